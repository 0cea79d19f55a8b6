"""Value functions and feedback strategies recovered from the dual solution.

``ValueFunction`` is the minimum probability of lifetime exponential Parisian
ruin ψ with its optimal strategy π*.  ``OccupationValue`` is the minimum
expected occupation time below zero m with its strategy π_L.  Both are the
convex Legendre transforms of a dual built by :mod:`parisian_ruin.dual`, so
they share one implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dual import BranchSpec, DualSolution, solve_boundaries
from .market import DerivedConstants, ModelParams, derive_constants, validate

INVERT_ITERATIONS = 60


class DomainError(ValueError):
    """Wealth outside the domain of the requested function."""


class ConvexityError(ArithmeticError):
    """Candidate value function is not strictly convex where required."""


class SandwichViolation(ArithmeticError):
    """The comparison bounds ρm − (ρ/λ)² < ψ < ρm failed."""


def _as_array(w):
    arr = np.asarray(w, dtype=float)
    return np.atleast_1d(arr).copy(), arr.ndim == 0


def _out(arr, scalar):
    return float(np.asarray(arr).reshape(-1)[0]) if scalar else arr


@dataclass(frozen=True)
class _DualValue:
    params: ModelParams
    consts: DerivedConstants
    dual: DualSolution

    @property
    def beta(self) -> float:
        """Coefficient of (1 − rw/c)^q on the non-negative wealth branch."""
        p = self.params
        return p.c * self.dual.y0 / (p.r * self.consts.q)

    @property
    def lower_value(self) -> float:
        return self.dual.branch.K

    # -- dual map --------------------------------------------------------------
    def _w_of_t(self, t):
        """Wealth as a function of t = y/y_L on [ẑ, 1]."""
        b3, b4 = self.dual.branch.b_hi, self.dual.branch.b_lo
        span = b3 - b4
        total = self.params.safe_level + self.params.L
        return self.params.safe_level - total * (
            b3 * (1.0 - b4) / span * t ** (b3 - 1.0) + b4 * (b3 - 1.0) / span * t ** (b4 - 1.0))

    def _dw_dt(self, t):
        b3, b4 = self.dual.branch.b_hi, self.dual.branch.b_lo
        total = self.params.safe_level + self.params.L
        c = (b3 - 1.0) * (1.0 - b4) / (b3 - b4)
        return -total * c * (b3 * t ** (b3 - 2.0) - b4 * t ** (b4 - 2.0))

    def _invert_t(self, w):
        lo = np.full(np.shape(w), self.dual.z_hat)
        hi = np.ones(np.shape(w))
        # w(t) is strictly decreasing on [ẑ, 1]
        for _ in range(INVERT_ITERATIONS):
            mid = 0.5 * (lo + hi)
            above = self._w_of_t(mid) > w
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
        t = 0.5 * (lo + hi)
        t = t - (self._w_of_t(t) - w) / self._dw_dt(t)
        return np.clip(t, self.dual.z_hat, 1.0)

    def invert_dual(self, w):
        """Dual variable y ∈ [y₀, y_L] with ĥ_y(y) = w, for −L ≤ w ≤ 0."""
        arr, scalar = _as_array(w)
        if np.any(arr < -self.params.L) or np.any(arr > 0) or np.any(~np.isfinite(arr)):
            raise DomainError(f"invert_dual needs −L ≤ w ≤ 0 (L={self.params.L})")
        return _out(self._invert_t(arr) * self.dual.yL, scalar)

    # -- evaluation -------------------------------------------------------------
    def _check_domain(self, arr, clamp, lower_open=False, upper_open=False):
        p = self.params
        low_bad = arr <= -p.L if lower_open else arr < -p.L
        high_bad = arr > p.safe_level
        if np.any(~np.isfinite(arr)):
            raise DomainError("wealth must be finite")
        if not clamp and (np.any(low_bad) or np.any(high_bad)):
            lo_br = "(" if lower_open else "["
            raise DomainError(f"wealth outside {lo_br}{-p.L}, {p.safe_level}]")

    def value(self, w, clamp: bool = False):
        """f(w) on [−L, c/r]; with ``clamp`` the boundary constants extend it outside."""
        arr, scalar = _as_array(w)
        self._check_domain(arr, clamp)
        p, k = self.params, self.consts
        x = np.clip(1.0 - p.r * arr / p.c, 0.0, None)
        out = self.beta * x ** k.q
        neg = (arr < 0) & (arr >= -p.L)
        if np.any(neg):
            b3, b4 = self.dual.branch.b_hi, self.dual.branch.b_lo
            t = self._invert_t(arr[neg])
            total = p.safe_level + p.L
            coef = (b3 - 1.0) * (1.0 - b4) / (b3 - b4)
            out[neg] = self.lower_value - total * self.dual.yL * coef * (t**b4 - t**b3)
        out = np.where(arr < -p.L, self.lower_value, out)
        out = np.where(arr >= p.safe_level, 0.0, out)
        return _out(out, scalar)

    def derivatives(self, w, side: str = "right"):
        """(f, f_w, f_ww) from the dual chain rule: f_w = −y, f_ww = −1/ĥ_yy.

        At w = 0 ``side`` selects the one-sided second derivative.
        """
        arr, scalar = _as_array(w)
        self._check_domain(arr, clamp=False)
        p, k, d = self.params, self.consts, self.dual
        f = np.asarray(self.value(arr), dtype=float).copy()
        x = 1.0 - p.r * arr / p.c
        with np.errstate(divide="ignore", invalid="ignore"):
            fw = -d.y0 * x ** (k.q - 1.0)
            fww = d.y0 * (k.q - 1.0) * (p.r / p.c) * x ** (k.q - 2.0)
        neg = (arr < 0) | ((arr == 0) & (side == "left"))
        if np.any(neg):
            b3, b4 = d.branch.b_hi, d.branch.b_lo
            t = self._invert_t(arr[neg])
            total = p.safe_level + p.L
            coef = (b3 - 1.0) * (1.0 - b4) / (b3 - b4)
            hyy = -total / d.yL * coef * (b3 * t ** (b3 - 2.0) - b4 * t ** (b4 - 2.0))
            fw[neg] = -t * d.yL
            fww[neg] = -1.0 / hyy
        return tuple(_out(a, scalar) for a in (f, fw, fww))

    def strategy(self, w, side: str = "right"):
        """Feedback investment −((μ−r)/σ²)·f_w/f_ww, in closed form.

        Defined on (−L, c/r]; zero at the safe level.
        """
        arr, scalar = _as_array(w)
        self._check_domain(arr, clamp=False, lower_open=True)
        p, k, d = self.params, self.consts, self.dual
        out = k.merton_ratio * (p.safe_level - arr) / (k.q - 1.0)
        neg = (arr < 0) | ((arr == 0) & (side == "left"))
        if np.any(neg):
            t = self._invert_t(arr[neg])
            out[neg] = self._strategy_of_t(t)
        return _out(out, scalar)

    def _strategy_of_t(self, t):
        p, k, d = self.params, self.consts, self.dual
        b3, b4 = d.branch.b_hi, d.branch.b_lo
        total = p.safe_level + p.L
        coef = (b3 - 1.0) * (1.0 - b4) / (b3 - b4)
        return k.merton_ratio * total * coef * (b3 * t ** (b3 - 1.0) - b4 * t ** (b4 - 1.0))

    def strategy_at_cutoff(self) -> float:
        """One-sided limit of the strategy as w ↓ −L."""
        return float(self._strategy_of_t(np.float64(1.0)))

    def hjb_residual(self, w, side: str = "right"):
        """HJB residual of this value function, derivatives from the dual."""
        f, fw, fww = self.derivatives(w, side=side)
        arr = np.asarray(w, dtype=float)
        below = (arr < 0) | ((arr == 0) & (side == "left"))
        return hjb_residual(arr, f, fw, fww, self.params, self.dual.branch, below_zero=below)

    def strategy_table(self, points: int = 1 << 16):
        """Uniform wealth grid on [−L, 0] and the exact strategy on it."""
        grid = np.linspace(-self.params.L, 0.0, points)
        t = self._invert_t(grid)
        return grid, self._strategy_of_t(t)


class ValueFunction(_DualValue):
    """Minimum probability of lifetime exponential Parisian ruin."""

    @classmethod
    def build(cls, params: ModelParams) -> "ValueFunction":
        consts = derive_constants(validate(params))
        dual = solve_boundaries(consts, params, BranchSpec.parisian(consts, params))
        vf = cls(params, consts, dual)
        if not 0.0 < vf.beta < 1.0:
            raise ArithmeticError(f"beta = {vf.beta} outside (0, 1)")
        return vf

    def psi(self, w, clamp: bool = False):
        return self.value(w, clamp=clamp)

    def pi_star(self, w, side: str = "right"):
        return self.strategy(w, side=side)


class OccupationValue(_DualValue):
    """Minimum expected occupation time below zero, modulo time already spent."""

    @classmethod
    def build(cls, params: ModelParams) -> "OccupationValue":
        consts = derive_constants(validate(params))
        dual = solve_boundaries(consts, params, BranchSpec.occupation(consts, params))
        return cls(params, consts, dual)

    def m(self, w, clamp: bool = False):
        return self.value(w, clamp=clamp)

    def pi_occupation(self, w, side: str = "right"):
        return self.strategy(w, side=side)


def hjb_residual(w, f, f_w, f_ww, params: ModelParams, branch: BranchSpec, below_zero=None):
    """h·f − s − (rw − c)f_w + δ·f_w²/f_ww with the infimum over π in closed form.

    (h, s) = (branch.hazard, branch.source) below zero and (λ, 0) above.  For
    the Parisian problem this is λf + ρ(f − 1)·1{w<0} − (rw − c)f_w + δf_w²/f_ww.
    """
    w = np.asarray(w, dtype=float)
    f_ww = np.asarray(f_ww, dtype=float)
    if np.any(~(f_ww > 0)):
        raise ConvexityError(f"f_ww must be positive, got min {np.min(f_ww)}")
    below = w < 0 if below_zero is None else np.asarray(below_zero, dtype=bool)
    delta = 0.5 * ((params.mu - params.r) / params.sigma) ** 2
    h = np.where(below, branch.hazard, params.lam)
    s = np.where(below, branch.source, 0.0)
    res = h * f - s - (params.r * w - params.c) * f_w + delta * f_w**2 / f_ww
    return float(res) if res.ndim == 0 else res


def pi_zero(params: ModelParams, w):
    """Lifetime-ruin strategy ((μ−r)/σ²)(c/r − w)/(q − 1) for w ≤ c/r."""
    arr, scalar = _as_array(w)
    if np.any(arr > params.safe_level) or np.any(~np.isfinite(arr)):
        raise DomainError(f"pi_zero needs w ≤ c/r = {params.safe_level}")
    k = derive_constants(params)
    return _out(k.merton_ratio * (params.safe_level - arr) / (k.q - 1.0), scalar)


def psi_restricted(params: ModelParams, w):
    """Minimum Parisian ruin probability when 0 ≤ π ≤ π₀, on (−∞, c/r]."""
    arr, scalar = _as_array(w)
    if np.any(arr > params.safe_level) or np.any(np.isnan(arr)):
        raise DomainError(f"psi_restricted needs w ≤ c/r = {params.safe_level}")
    k = derive_constants(params)
    K = params.lower_payoff
    x = 1.0 - params.r * arr / params.c
    with np.errstate(divide="ignore"):
        neg = K * (1.0 - k.q / (k.q + k.alpha) * x ** (-k.alpha))
    pos = K * k.alpha / (k.q + k.alpha) * np.clip(x, 0.0, None) ** k.q
    return _out(np.where(arr < 0, neg, pos), scalar)


def asymptotic_sandwich(params: ModelParams, w, rho_small: float):
    """(ρm − (ρ/λ)², ψ, ρm) at wealth w with ρ = ``rho_small``.

    Raises SandwichViolation unless the ordering is strict for w < c/r.
    """
    p = params.replace(rho=rho_small)
    vf = ValueFunction.build(p)
    occ = OccupationValue.build(p)
    arr, scalar = _as_array(w)
    psi = np.asarray(vf.psi(arr), dtype=float)
    upper = rho_small * np.asarray(occ.m(arr), dtype=float)
    lower = upper - (rho_small / p.lam) ** 2
    interior = arr < p.safe_level
    ok = np.where(interior, (lower < psi) & (psi < upper), (lower < psi) & (psi <= upper))
    if not np.all(ok):
        bad = arr[~ok]
        raise SandwichViolation(f"sandwich ordering fails at w = {bad}")
    return tuple(_out(a, scalar) for a in (lower, psi, upper))


def _pi_decr_lhs(params: ModelParams, consts: DerivedConstants) -> float:
    b3, b4 = consts.B3, consts.B4
    span = b3 - b4
    f = (-b4 / (b3 - 1.0)) ** ((b3 - 1.0) / span) * (b3 / (1.0 - b4)) ** ((1.0 - b4) / span)
    return ((params.safe_level + params.L) * f
            * (params.lam + params.rho + consts.delta - params.r) / consts.delta)


def pi_monotonicity_condition(params: ModelParams, tol: float = 1e-12) -> str:
    """Shape of π* on (−L, 0): 'decreasing', 'increasing' or 'dec_then_inc'."""
    consts = derive_constants(validate(params))
    if _pi_decr_lhs(params, consts) <= params.safe_level:
        return "decreasing"
    if params.r <= params.lam + params.rho + tol:
        return "increasing"
    return "dec_then_inc"


def observed_shape(vf: _DualValue, points: int = 1000) -> str:
    """Classify the strategy on (−L, 0) from finite-difference slope signs."""
    L = vf.params.L
    grid = np.linspace(-L, 0.0, points + 2)[1:-1]
    slopes = np.diff(vf.strategy(grid))
    signs = np.sign(slopes)
    if np.all(signs < 0):
        return "decreasing"
    if np.all(signs > 0):
        return "increasing"
    changes = np.flatnonzero(np.diff(signs) != 0)
    if len(changes) == 1 and signs[0] < 0 and signs[-1] > 0:
        return "dec_then_inc"
    # a zero slope exactly at the turning point counts as one change
    nonzero = signs[signs != 0]
    if (len(nonzero) and nonzero[0] < 0 and nonzero[-1] > 0
            and np.count_nonzero(np.diff(nonzero)) == 1):
        return "dec_then_inc"
    return "irregular"
