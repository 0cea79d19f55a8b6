"""Executable property suite behind ``parisian-ruin verify``.

Each check returns a CheckResult whose ``margin`` is tolerance minus the
measured violation, so a positive margin means the property holds with room
to spare.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .dual import dual_ode_residual, eval_g
from .market import ModelParams, derive_constants, validate
from .value import (OccupationValue, ValueFunction, observed_shape, pi_monotonicity_condition,
                    pi_zero, psi_restricted)

SUITES = ("boundaries", "convexity", "hjb", "monotonicity", "figure1", "asymptotic")
GRID_POINTS = 2048
SANDWICH_POINTS = 512
ZERO_BAND = 1e-6
FIGURE1_RHOS = (0.01, 0.02, 0.03, 0.04)
CUTOFF_RHOS = (0.005, 0.02, 0.1)
L_LADDER = (50.0, 100.0, 200.0, 400.0)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    margin: float
    detail: str

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "margin": self.margin,
                "detail": self.detail}

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<34} margin={self.margin:.3e}  {self.detail}"


def _bound(name: str, measured: float, tol: float, detail: str = "") -> CheckResult:
    """Pass when ``measured`` ≤ ``tol``."""
    measured = float(measured)
    ok = bool(measured <= tol)
    text = f"measured {measured:.3e} vs tol {tol:.1e}"
    return CheckResult(name, ok, tol - measured, f"{text}; {detail}" if detail else text)


def _positive(name: str, smallest: float, detail: str = "") -> CheckResult:
    """Pass when a strict inequality holds everywhere (``smallest`` > 0)."""
    smallest = float(smallest)
    text = f"min gap {smallest:.3e}"
    return CheckResult(name, bool(smallest > 0), smallest, f"{text}; {detail}" if detail else text)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def value_grid(params: ModelParams, points: int = GRID_POINTS) -> np.ndarray:
    return np.linspace(-params.L, params.safe_level, points)


def interior_negative(params: ModelParams, points: int = GRID_POINTS) -> np.ndarray:
    return np.linspace(-params.L, 0.0, points + 2)[1:-1]


def _hjb_rel(model, params: ModelParams, points: int) -> float:
    grid = value_grid(params, points)
    grid = grid[(np.abs(grid) > ZERO_BAND) & (grid < params.safe_level)]
    f = model.value(grid)
    res = model.hjb_residual(grid)
    worst = float(np.max(np.abs(res) / (params.lam * np.abs(f))))
    for side in ("left", "right"):
        f0 = model.value(0.0)
        worst = max(worst, abs(model.hjb_residual(0.0, side=side)) / (params.lam * f0))
    return worst


# -- suites ---------------------------------------------------------------------
def check_boundaries(params: ModelParams) -> list[CheckResult]:
    vf = ValueFunction.build(params)
    occ = OccupationValue.build(params)
    p, k, d = params, vf.consts, vf.dual
    out = [
        _bound("psi_at_cutoff", abs(vf.psi(-p.L) - p.lower_payoff), 1e-10,
               f"psi(-L)={vf.psi(-p.L)!r}"),
        _bound("psi_at_safe_level", abs(vf.psi(p.safe_level)), 1e-10),
        _bound("m_at_cutoff", _rel(occ.m(-p.L), 1.0 / p.lam), 1e-8, f"m(-L)={occ.m(-p.L)!r}"),
        _bound("m_at_safe_level", abs(occ.m(p.safe_level)), 1e-8),
        _bound("g_root", abs(eval_g(d.z_hat, k, p)), 1e-12 * max(1.0, p.L), f"z_hat={d.z_hat!r}"),
        _bound("y0_cross_check", d.residuals["y0_cross_gap"], 1e-9),
        _bound("matching_conditions", max(d.residuals[f"eq{i}"] for i in range(1, 5)), 1e-9),
        CheckResult("beta_in_unit_interval", 0.0 < vf.beta < 1.0,
                    min(vf.beta, 1.0 - vf.beta), f"beta={vf.beta!r}"),
    ]
    return out


def check_convexity(params: ModelParams) -> list[CheckResult]:
    vf = ValueFunction.build(params)
    p, d = params, vf.dual
    grid = value_grid(p)
    psi = vf.psi(grid)
    first = np.diff(psi)
    second = np.diff(psi, 2)
    _, fw_left, fww_left = vf.derivatives(0.0, side="left")
    _, fw_right, fww_right = vf.derivatives(0.0, side="right")
    neg = interior_negative(p)
    pi = vf.pi_star(neg)
    pi_second = np.diff(pi, 2)
    scale = float(np.max(np.abs(pi)))
    return [
        _bound("psi_non_increasing", max(0.0, float(first.max())), 0.0),
        _bound("psi_convex", max(0.0, -float(second.min())), 1e-10),
        _bound("psi_C1_at_zero", _rel(fw_left, fw_right), 1e-8),
        CheckResult("psi_one_sided_second_derivatives",
                    bool(np.isfinite(fww_left) and np.isfinite(fww_right)),
                    0.0, f"left={fww_left:.6e} right={fww_right:.6e}"),
        _bound("psi_slope_at_zero_is_minus_y0", _rel(fw_right, -d.y0), 1e-8),
        _bound("pi_star_convex", max(0.0, -float(pi_second.min())), 1e-8 * scale),
    ]


def pi_ode_residual(vf: ValueFunction, points: int = GRID_POINTS) -> float:
    """Largest relative mismatch of a central-difference π*_w against its ODE."""
    p, k = vf.params, vf.consts
    h = 1e-5 * (p.safe_level + p.L)
    grid = np.linspace(-p.L + 2 * h, -2 * h, points)
    slope = (vf.pi_star(grid + h) - vf.pi_star(grid - h)) / (2 * h)
    pi = vf.pi_star(grid)
    rhs = (2.0 / (p.mu - p.r) * (p.lam + p.rho + k.delta - p.r)
           - 2.0 / p.sigma**2 * (p.c - p.r * grid) / pi)
    scale = np.maximum(np.abs(slope), np.abs(2.0 / p.sigma**2 * (p.c - p.r * grid) / pi))
    return float(np.max(np.abs(slope - rhs) / scale))


def check_hjb(params: ModelParams) -> list[CheckResult]:
    vf = ValueFunction.build(params)
    occ = OccupationValue.build(params)
    k = vf.consts
    ys = np.linspace(1e-3 * vf.dual.y0, vf.dual.yL, GRID_POINTS)
    return [
        _bound("hjb_psi", _hjb_rel(vf, params, GRID_POINTS), 1e-8, "relative to lambda*psi"),
        _bound("hjb_m", _hjb_rel(occ, params, GRID_POINTS), 1e-8, "relative to lambda*m"),
        _bound("dual_ode_psi", float(np.max(dual_ode_residual(ys, vf.dual, k, params))), 1e-10),
        _bound("pi_star_ode", pi_ode_residual(vf), 1e-5),
    ]


def check_monotonicity(params: ModelParams, rho_pair: tuple[float, float] | None = None
                       ) -> list[CheckResult]:
    p = params
    vf = ValueFunction.build(p)
    neg = interior_negative(p)
    pos = np.linspace(0.0, p.safe_level, GRID_POINTS + 2)[1:-1]
    pi0_neg, pi0_pos = pi_zero(p, neg), pi_zero(p, pos)
    out = [
        _positive("pi_star_above_pi_zero", float(np.min(vf.pi_star(neg) - pi0_neg))),
        _bound("pi_star_equals_pi_zero_above_zero",
               float(np.max(np.abs(vf.pi_star(pos) - pi0_pos) / pi0_pos)), 1e-10),
    ]

    lo, hi = rho_pair if rho_pair is not None else (p.rho / 2.0, p.rho * 2.0)
    if not 0 < lo < hi:
        raise ValueError("rho pair must satisfy 0 < rho1 < rho2")
    v1, v2 = ValueFunction.build(p.replace(rho=lo)), ValueFunction.build(p.replace(rho=hi))
    out.append(_positive(f"pi_star_increasing_in_rho({lo:g},{hi:g})",
                         float(np.min(v2.pi_star(neg) - v1.pi_star(neg)))))
    out.append(_bound("pi_star_rho_free_above_zero",
                      float(np.max(np.abs(v2.pi_star(pos) - v1.pi_star(pos)) / v1.pi_star(pos))),
                      1e-10))

    a1, a2 = ValueFunction.build(p.replace(lam=p.lam / 2.0)), ValueFunction.build(p.replace(lam=p.lam * 2.0))
    out.append(_positive("pi_star_lambda_ordering_negative",
                         float(np.min(a2.pi_star(neg) - a1.pi_star(neg)))))
    out.append(_positive("pi_star_lambda_ordering_positive",
                         float(np.min(a1.pi_star(pos) - a2.pi_star(pos)))))

    target = 2.0 * p.r / (p.mu - p.r) * (p.safe_level + p.L)
    worst = max(_rel(ValueFunction.build(p.replace(rho=rho)).strategy_at_cutoff(), target)
                for rho in CUTOFF_RHOS)
    out.append(_bound("pi_star_at_cutoff_rho_free", worst, 1e-8, f"target {target!r}"))

    w = -0.1 * p.L
    ladder = [ValueFunction.build(p.replace(L=L)) for L in L_LADDER]
    pis = np.array([v.pi_star(w) for v in ladder])
    psis = np.array([v.psi(w) for v in ladder])
    out.append(_positive(f"pi_star_increasing_in_L(w={w:g})", float(np.min(np.diff(pis))),
                         f"L={list(L_LADDER)}"))
    out.append(_positive(f"psi_decreasing_in_L(w={w:g})", float(np.min(-np.diff(psis))),
                         f"L={list(L_LADDER)}"))

    cross = restricted_crossing(p, vf)
    right = np.linspace(-p.L if cross is None else cross, p.safe_level, GRID_POINTS)[1:-1]
    gap = float(np.min(psi_restricted(p, right) - vf.psi(right)))
    where = "none" if cross is None else f"{cross:.6f}"
    out.append(_positive("psi_restricted_dominates_right_of_crossing", gap,
                         f"crossing at w={where}"))
    return out


def restricted_crossing(params: ModelParams, vf: ValueFunction | None = None) -> float | None:
    """Wealth in (−L, 0) where ψ₀ − ψ changes sign, or None if it does not."""
    vf = vf or ValueFunction.build(params)
    fn = lambda w: float(psi_restricted(params, w) - vf.psi(w))  # noqa: E731
    grid = np.linspace(-params.L, 0.0, 257)
    vals = np.array([fn(x) for x in grid])
    idx = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))
    if len(idx) == 0:
        return None
    i = int(idx[0])
    return brentq(fn, grid[i], grid[i + 1], xtol=1e-12)


def check_figure1(params: ModelParams, rhos=FIGURE1_RHOS) -> list[CheckResult]:
    out = []
    for rho in rhos:
        p = params.replace(rho=rho)
        predicted = pi_monotonicity_condition(p)
        seen = observed_shape(ValueFunction.build(p))
        out.append(CheckResult(f"figure1_shape(rho={rho:g})", predicted == seen,
                               0.0 if predicted == seen else -1.0,
                               f"predicted {predicted}, observed {seen}"))
    return out


def check_asymptotic(params: ModelParams, points: int = SANDWICH_POINTS) -> list[CheckResult]:
    p = params
    vf = ValueFunction.build(p)
    occ = OccupationValue.build(p)
    grid = np.linspace(-p.L, p.safe_level, points)
    interior = grid[grid < p.safe_level]
    psi = vf.psi(interior)
    upper = p.rho * occ.m(interior)
    bound = (p.rho / p.lam) ** 2
    return [
        _positive(f"sandwich_upper(rho={p.rho:g})", float(np.min(upper - psi))),
        _positive(f"sandwich_lower(rho={p.rho:g})", float(np.min(psi - (upper - bound)))),
        _bound(f"psi_minus_rho_m(rho={p.rho:g})", float(np.max(np.abs(psi - upper))), bound),
    ]


def run_suite(name: str, params: ModelParams, rho_pair=None, rhos=FIGURE1_RHOS) -> list[CheckResult]:
    validate(params)
    derive_constants(params)
    if name == "all":
        return [r for s in SUITES for r in run_suite(s, params, rho_pair, rhos)]
    if name == "boundaries":
        return check_boundaries(params)
    if name == "convexity":
        return check_convexity(params)
    if name == "hjb":
        return check_hjb(params)
    if name == "monotonicity":
        return check_monotonicity(params, rho_pair)
    if name == "figure1":
        return check_figure1(params, rhos)
    if name == "asymptotic":
        return check_asymptotic(params)
    raise ValueError(f"unknown suite {name!r}; choose from {SUITES + ('all',)}")


def all_passed(results: list[CheckResult]) -> bool:
    return all(r.passed for r in results) and not any(math.isnan(r.margin) for r in results)
