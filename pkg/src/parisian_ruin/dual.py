"""Free-boundary problem for the concave dual of the value function.

The dual ĥ(y) = f(w) + w·y with y = −f_w solves a linear ODE on [0, y_L]
whose coefficients switch at the free boundary y₀ (the image of w = 0).
On [0, y₀] the solution is (c/r)[y − (y₀/B₁)(y/y₀)^{B₁}]; on (y₀, y_L] it is
K + D₃y^{b₊} + D₄y^{b₋} + (c/r)y.  For the Parisian problem (b₊, b₋) =
(B₃, B₄) and K = ρ/(λ+ρ); for the occupation-time problem (b₊, b₋) =
(B₁, B₂) and K = 1/λ.  Both share every formula below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .market import DerivedConstants, ModelParams

ROOT_ATOL = 1e-12
CONSISTENCY_RTOL = 1e-9
MAX_HALVINGS = 200


class SolverError(RuntimeError):
    """Internal inconsistency in the free-boundary solve."""


@dataclass(frozen=True)
class BranchSpec:
    """Exponents and terminal constant of the negative-wealth branch."""

    b_hi: float
    b_lo: float
    hazard: float  # discount rate of the ODE on (y0, yL]
    source: float  # running payoff rate on (y0, yL]
    kind: str

    @property
    def K(self) -> float:
        return self.source / self.hazard

    @classmethod
    def parisian(cls, consts: DerivedConstants, params: ModelParams) -> "BranchSpec":
        return cls(consts.B3, consts.B4, params.lam + params.rho, params.rho, "psi")

    @classmethod
    def occupation(cls, consts: DerivedConstants, params: ModelParams) -> "BranchSpec":
        return cls(consts.B1, consts.B2, params.lam, 1.0, "m")


@dataclass(frozen=True)
class DualSolution:
    z_hat: float
    y0: float
    yL: float
    D1: float
    D3: float
    D4: float
    branch: BranchSpec
    residuals: dict = field(default_factory=dict, compare=False)

    def as_dict(self) -> dict:
        return {
            "z_hat": self.z_hat, "y0": self.y0, "yL": self.yL,
            "D1": self.D1, "D3": self.D3, "D4": self.D4,
            "residuals": dict(self.residuals),
        }


def _g_weights(b_hi: float, b_lo: float) -> tuple[float, float]:
    span = b_hi - b_lo
    return b_hi * (1.0 - b_lo) / span, b_lo * (b_hi - 1.0) / span


def eval_g(z, consts: DerivedConstants, params: ModelParams, branch: BranchSpec | None = None):
    """g(z) = (c/r + L)[a₊z^{b₊−1} + a₋z^{b₋−1}] − c/r; its root is y₀/y_L."""
    if branch is None:
        branch = BranchSpec.parisian(consts, params)
    if not z > 0:
        raise ValueError(f"g is defined for z > 0 only, got {z}")
    a_hi, a_lo = _g_weights(branch.b_hi, branch.b_lo)
    lz = math.log(z)
    total = params.safe_level + params.L
    return total * (a_hi * math.exp((branch.b_hi - 1.0) * lz)
                    + a_lo * math.exp((branch.b_lo - 1.0) * lz)) - params.safe_level


def _g_prime(z: float, params: ModelParams, branch: BranchSpec) -> float:
    b3, b4 = branch.b_hi, branch.b_lo
    span = b3 - b4
    lz = math.log(z)
    return (params.safe_level + params.L) * (
        b3 * (b3 - 1.0) * (1.0 - b4) / span * math.exp((b3 - 2.0) * lz)
        - b4 * (1.0 - b4) * (b3 - 1.0) / span * math.exp((b4 - 2.0) * lz)
    )


def solve_boundary_ratio(consts: DerivedConstants, params: ModelParams,
                         branch: BranchSpec | None = None) -> float:
    """Unique zero of the increasing function g on (0, 1).

    Bisection on a bracket [z_lo, 1] where z_lo is found by halving from 1/2,
    followed by two guarded Newton steps.
    """
    if branch is None:
        branch = BranchSpec.parisian(consts, params)
    g = lambda z: eval_g(z, consts, params, branch)  # noqa: E731
    tol = ROOT_ATOL * max(1.0, params.L)

    lo = 0.5
    for _ in range(MAX_HALVINGS):
        if g(lo) < 0:
            break
        lo *= 0.5
    else:
        raise SolverError(f"no sign change of g found after {MAX_HALVINGS} halvings")
    hi = 1.0

    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm < 0:
            lo = mid
        else:
            hi = mid
        if abs(gm) <= tol and hi - lo <= 4 * math.ulp(hi):
            break
        if hi - lo <= 2 * math.ulp(hi):
            break
    z = mid
    for _ in range(2):
        step = g(z) / _g_prime(z, params, branch)
        candidate = z - step
        if lo <= candidate <= hi:
            z = candidate
    if not (0.0 < z < 1.0) or abs(g(z)) > tol:
        raise SolverError(f"root of g not resolved: z={z}, g={g(z)}")
    return z


def _y0_primary(z: float, consts: DerivedConstants, params: ModelParams, branch: BranchSpec) -> float:
    b3, b4, B1 = branch.b_hi, branch.b_lo, consts.B1
    inv = ((b3 - 1.0) / b3 * (params.safe_level + params.L) * z ** (b4 - 1.0)
           + (B1 - b3) / (B1 * b3) * params.safe_level)
    return branch.K / inv


def _y0_cross(z: float, consts: DerivedConstants, params: ModelParams, branch: BranchSpec) -> float:
    b3, b4, B1 = branch.b_hi, branch.b_lo, consts.B1
    inv = (-(1.0 - b4) / b4 * (params.safe_level + params.L) * z ** (b3 - 1.0)
           + (B1 - b4) / (B1 * b4) * params.safe_level)
    return branch.K / inv


def matching_residuals(sol: DualSolution, consts: DerivedConstants, params: ModelParams) -> list[float]:
    """Relative residuals of value matching and smooth pasting at y₀ and y_L.

    The D₃, D₄ terms are written as multiples of y_L·(y/y_L)^b so that large
    exponents do not overflow.
    """
    b3, b4, K = sol.branch.b_hi, sol.branch.b_lo, sol.branch.K
    cr, L, B1 = params.safe_level, params.L, consts.B1
    total = cr + L
    span = b3 - b4
    out = []
    for y, value_rhs, slope_rhs in (
        (sol.y0, cr * (B1 - 1.0) / B1 * sol.y0, 0.0),
        (sol.yL, K - L * sol.yL, -L * sol.yL),
    ):
        t = y / sol.yL
        t3 = -(1.0 - b4) / span * total * sol.yL * t**b3
        t4 = -(b3 - 1.0) / span * total * sol.yL * t**b4
        value = [t3, t4, cr * y, K, -value_rhs]
        slope = [b3 * t3, b4 * t4, cr * y, -slope_rhs]
        out.append(abs(sum(value)) / sum(abs(v) for v in value))
        out.append(abs(sum(slope)) / sum(abs(v) for v in slope))
    return out


def solve_boundaries(consts: DerivedConstants, params: ModelParams,
                     branch: BranchSpec | None = None) -> DualSolution:
    """Free boundaries y₀, y_L and the dual coefficients D₁, D₃, D₄."""
    if branch is None:
        branch = BranchSpec.parisian(consts, params)
    z = solve_boundary_ratio(consts, params, branch)
    y0 = _y0_primary(z, consts, params, branch)
    y0_alt = _y0_cross(z, consts, params, branch)
    gap = abs(y0 - y0_alt) / abs(y0)
    if gap > CONSISTENCY_RTOL:
        raise SolverError(f"y0 candidates disagree: primary {y0!r}, cross-check {y0_alt!r}")
    yL = y0 / z
    b3, b4 = branch.b_hi, branch.b_lo
    total = params.safe_level + params.L
    # the raw coefficients may saturate to −inf for extreme exponents; nothing evaluates them
    with np.errstate(over="ignore"):
        D1 = float(-params.safe_level / consts.B1 * np.float64(y0) ** (1.0 - consts.B1))
        D3 = float(-(1.0 - b4) / (b3 - b4) * total * np.float64(yL) ** (1.0 - b3))
        D4 = float(-(b3 - 1.0) / (b3 - b4) * total * np.float64(yL) ** (1.0 - b4))
    sol = DualSolution(z_hat=z, y0=y0, yL=yL, D1=D1, D3=D3, D4=D4, branch=branch)
    eqs = matching_residuals(sol, consts, params)
    residuals = {
        "g_at_root": abs(eval_g(z, consts, params, branch)),
        "y0_cross_gap": gap,
        "eq1": eqs[0], "eq2": eqs[1], "eq3": eqs[2], "eq4": eqs[3],
    }
    if max(eqs) > CONSISTENCY_RTOL:
        raise SolverError(f"matching conditions not satisfied: {residuals}")
    # coefficients are negative by construction; ≤ 0 admits underflow for extreme exponents
    if not (y0 > 0 and D1 <= 0 and D3 <= 0 and D4 <= 0):
        raise SolverError(f"sign invariants violated: y0={y0}, D1={D1}, D3={D3}, D4={D4}")
    return DualSolution(z_hat=z, y0=y0, yL=yL, D1=D1, D3=D3, D4=D4, branch=branch,
                        residuals=residuals)


def dual_value(y, sol: DualSolution, consts: DerivedConstants, params: ModelParams):
    """ĥ(y) on [0, y_L]."""
    y = np.asarray(y, dtype=float)
    cr = params.safe_level
    b3, b4, K = sol.branch.b_hi, sol.branch.b_lo, sol.branch.K
    low = cr * (y - sol.y0 / consts.B1 * (y / sol.y0) ** consts.B1)
    t = y / sol.yL
    total = cr + params.L
    span = b3 - b4
    with np.errstate(divide="ignore", invalid="ignore"):
        high = K - (total * sol.yL * ((1.0 - b4) / span * t**b3 + (b3 - 1.0) / span * t**b4) - cr * y)
    return np.where(y <= sol.y0, low, high)


def dual_slope(y, sol: DualSolution, consts: DerivedConstants, params: ModelParams):
    """ĥ_y(y); equals the primal wealth w at which −f_w = y."""
    y = np.asarray(y, dtype=float)
    cr = params.safe_level
    b3, b4 = sol.branch.b_hi, sol.branch.b_lo
    low = cr * (1.0 - (y / sol.y0) ** (consts.B1 - 1.0))
    a_hi, a_lo = _g_weights(b3, b4)
    t = y / sol.yL
    with np.errstate(divide="ignore", invalid="ignore"):
        high = cr - (cr + params.L) * (a_hi * t ** (b3 - 1.0) + a_lo * t ** (b4 - 1.0))
    return np.where(y <= sol.y0, low, high)


def dual_curvature(y, sol: DualSolution, consts: DerivedConstants, params: ModelParams,
                   side: str = "left"):
    """ĥ_yy(y).  At y = y₀ ``side`` picks the branch: 'left' is [0, y₀]."""
    y = np.asarray(y, dtype=float)
    cr = params.safe_level
    b3, b4 = sol.branch.b_hi, sol.branch.b_lo
    B1 = consts.B1
    t = y / sol.yL
    with np.errstate(divide="ignore", invalid="ignore"):
        low = -cr * (B1 - 1.0) / sol.y0 * (y / sol.y0) ** (B1 - 2.0)
        high = -(cr + params.L) / sol.yL * (b3 - 1.0) * (1.0 - b4) / (b3 - b4) * (
            b3 * t ** (b3 - 2.0) - b4 * t ** (b4 - 2.0))
    use_low = y < sol.y0 if side == "right" else y <= sol.y0
    return np.where(use_low, low, high)


def dual_ode_residual(y, sol: DualSolution, consts: DerivedConstants, params: ModelParams):
    """Relative residual of h·ĥ + (r − h)yĥ_y − δy²ĥ_yy − cy − s on each branch."""
    y = np.asarray(y, dtype=float)
    high = y > sol.y0
    h = np.where(high, sol.branch.hazard, params.lam)
    s = np.where(high, sol.branch.source, 0.0)
    v = dual_value(y, sol, consts, params)
    vy = dual_slope(y, sol, consts, params)
    vyy = dual_curvature(y, sol, consts, params, side="left")
    terms = [h * v, (params.r - h) * y * vy, -consts.delta * y**2 * vyy, -params.c * y, -s]
    total = sum(terms)
    scale = sum(np.abs(t) for t in terms)
    return np.abs(total) / scale
