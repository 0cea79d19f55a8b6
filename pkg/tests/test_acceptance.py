"""Acceptance gate: one test per criterion, each printing a single PASS/FAIL line.

The Monte Carlo criteria (9 to 13) run 2·10⁵ paths each at dt = 0.01 and
take roughly a minute apiece on one core.
"""

import functools
import json
import math
import sys
import time

import numpy as np
import pytest

from parisian_ruin.checks import observed_shape, pi_ode_residual
from parisian_ruin.cli import main as cli_main
from parisian_ruin.dual import eval_g
from parisian_ruin.market import PAPER_PARAMS
from parisian_ruin.simulate import SimConfig, estimate_value
from parisian_ruin.value import (OccupationValue, ValueFunction, pi_monotonicity_condition,
                                 pi_zero, psi_restricted)

P = PAPER_PARAMS
PATHS = 200_000
DT = 0.01
SEED = 20240101
CLI_PARAMS = ["--r", "0.04", "--mu", "0.08", "--sigma", "0.2", "--lambda", "0.01",
              "--rho", "0.02", "--c", "1", "--L", "100"]


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}")
        assert ok, detail
    return emit


def _grid(points=2048):
    return np.linspace(-P.L, P.safe_level, points)


@functools.lru_cache(maxsize=None)
def _mc(w0, strategy="optimal", mode="parisian_value", restricted=False, clock="exponential",
        rho=P.rho, seed=SEED):
    params = P.replace(rho=rho)
    cfg = SimConfig(w0=w0, paths=PATHS, dt=DT, seed=seed, strategy=strategy, mode=mode,
                    restricted=restricted, clock=clock)
    start = time.perf_counter()
    est = estimate_value(params, cfg)
    return est, time.perf_counter() - start


def _mc_line(w0, est, target, allowance):
    gap = abs(est.estimate - target)
    bound = 3 * est.stderr + allowance
    return gap <= bound, (f"w0={w0:g} est={est.estimate:.5f}±{est.stderr:.5f} "
                          f"analytic={target:.5f} |gap|={gap:.5f} ≤ {bound:.5f}")


# -- analytic criteria -------------------------------------------------------------
def test_criterion_01_boundary_exactness(report):
    start = time.perf_counter()
    vf, occ = ValueFunction.build(P), OccupationValue.build(P)
    psi_lo, psi_hi = vf.psi(-100.0), vf.psi(25.0)
    m_lo, m_hi = occ.m(-100.0), occ.m(25.0)
    elapsed = time.perf_counter() - start
    ok = (abs(psi_lo - 2 / 3) <= 1e-10 and abs(psi_hi) <= 1e-10
          and abs(m_lo - 100.0) <= 1e-8 * 100.0 and abs(m_hi) <= 1e-8 and elapsed < 0.1)
    report(1, ok, f"ψ(−100)={psi_lo!r} ψ(25)={psi_hi!r} m(−100)={m_lo!r} m(25)={m_hi!r} "
                  f"in {elapsed * 1e3:.1f} ms")


def test_criterion_02_root_and_consistency(report):
    start = time.perf_counter()
    vf = ValueFunction.build(P)
    g = abs(eval_g(vf.dual.z_hat, vf.consts, P))
    res = vf.dual.residuals
    eqs = max(res[f"eq{i}"] for i in range(1, 5))
    elapsed = time.perf_counter() - start
    ok = g <= 1e-12 * 100 and res["y0_cross_gap"] <= 1e-9 and eqs <= 1e-9 and elapsed < 0.1
    report(2, ok, f"|g(ẑ)|={g:.2e} y0 gap={res['y0_cross_gap']:.2e} max eq={eqs:.2e} "
                  f"in {elapsed * 1e3:.1f} ms")


def test_criterion_03_hjb_certification(report):
    start = time.perf_counter()
    w = _grid()
    w = w[(np.abs(w) > 1e-6) & (w < P.safe_level)]  # ψ = m = 0 at c/r, no relative scale
    worst = {}
    for name, model in (("ψ", ValueFunction.build(P)), ("m", OccupationValue.build(P))):
        rel = np.abs(model.hjb_residual(w)) / (P.lam * model.value(w))
        f0 = model.value(0.0)
        one_sided = max(abs(model.hjb_residual(0.0, side=s)) / (P.lam * f0) for s in ("left", "right"))
        worst[name] = max(float(rel.max()), one_sided)
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= 1e-8 and elapsed < 1.0
    report(3, ok, f"max rel residual ψ={worst['ψ']:.2e} m={worst['m']:.2e} in {elapsed:.3f} s")


def test_criterion_04_regularity(report):
    vf = ValueFunction.build(P)
    psi = vf.psi(_grid())
    first, second = float(np.diff(psi).max()), float(np.diff(psi, 2).min())
    _, left, _ = vf.derivatives(0.0, side="left")
    _, right, _ = vf.derivatives(0.0, side="right")
    h = 1e-4  # second-order one-sided differences as an independent check
    fd_right = (-3 * vf.psi(0.0) + 4 * vf.psi(h) - vf.psi(2 * h)) / (2 * h)
    fd_left = (3 * vf.psi(0.0) - 4 * vf.psi(-h) + vf.psi(-2 * h)) / (2 * h)
    gap = abs(left - right) / abs(right)
    fd_gap = abs(fd_left - fd_right) / abs(fd_right)
    y0_gap = abs(right + vf.dual.y0) / vf.dual.y0
    ok = first <= 0 and second >= -1e-10 and gap <= 1e-8 and fd_gap <= 1e-8 and y0_gap <= 1e-8
    report(4, ok, f"max Δψ={first:.2e} min Δ²ψ={second:.2e} C¹ gap={gap:.1e} "
                  f"(FD {fd_gap:.1e}) ψ_w(0)+y0 rel={y0_gap:.1e}")


def test_criterion_05_strategy_propositions(report):
    start = time.perf_counter()
    vf = ValueFunction.build(P)
    pos = np.linspace(0, 25, 2002)[1:-1]
    neg = np.linspace(-100, 0, 2002)[1:-1]
    eq_gap = float(np.max(np.abs(vf.pi_star(pos) - pi_zero(P, pos)) / pi_zero(P, pos)))
    above = float(np.min(vf.pi_star(neg) - pi_zero(P, neg)))
    fam = [ValueFunction.build(P.replace(rho=r)) for r in (0.005, 0.02, 0.1)]
    pis = [v.pi_star(neg) for v in fam]
    order = float(min(np.min(pis[1] - pis[0]), np.min(pis[2] - pis[1])))
    convex = float(np.min(np.diff(pis[1], 2)))
    cutoff = max(abs(v.strategy_at_cutoff() - 250.0) / 250.0 for v in fam)
    ode = max(pi_ode_residual(v) for v in fam)
    elapsed = time.perf_counter() - start
    ok = (eq_gap <= 1e-10 and above > 0 and order > 0 and convex >= -1e-8 * 250
          and cutoff <= 1e-8 and ode <= 1e-5 and elapsed < 2.0)
    report(5, ok, f"π*=π₀ gap {eq_gap:.1e}, min(π*−π₀)={above:.3f}, min ρ-gap={order:.4f}, "
                  f"min Δ²π*={convex:.1e}, π*(−L+) rel err {cutoff:.1e}, ODE {ode:.1e}, "
                  f"{elapsed:.2f} s")


def test_criterion_06_figure1_regimes(report):
    start = time.perf_counter()
    want = {0.01: "decreasing", 0.02: "dec_then_inc", 0.03: "increasing", 0.04: "increasing"}
    got = {}
    for rho, shape in want.items():
        p = P.replace(rho=rho)
        got[rho] = (pi_monotonicity_condition(p), observed_shape(ValueFunction.build(p)))
    # exactly one − to + sign change at ρ = 0.02
    neg = np.linspace(-100, 0, 1002)[1:-1]
    signs = np.sign(np.diff(ValueFunction.build(P).pi_star(neg)))
    changes = int(np.count_nonzero(np.diff(signs[signs != 0])))
    elapsed = time.perf_counter() - start
    ok = all(got[r] == (s, s) for r, s in want.items()) and changes == 1 and elapsed < 2.0
    text = ", ".join(f"ρ={r:g}: {c}/{o}" for r, (c, o) in got.items())
    report(6, ok, f"{text}; sign changes at ρ=0.02: {changes}; {elapsed:.2f} s")


def test_criterion_07_L_monotonicity(report):
    start = time.perf_counter()
    ladder = [ValueFunction.build(P.replace(L=L)) for L in (50.0, 100.0, 200.0, 400.0)]
    pis = [v.pi_star(-10.0) for v in ladder]
    psis = [v.psi(-10.0) for v in ladder]
    elapsed = time.perf_counter() - start
    ok = all(np.diff(pis) > 0) and all(np.diff(psis) < 0) and elapsed < 1.0
    report(7, ok, "π*(−10)=" + ", ".join(f"{x:.3f}" for x in pis)
           + "; ψ(−10)=" + ", ".join(f"{x:.5f}" for x in psis) + f"; {elapsed:.3f} s")


def test_criterion_08_asymptotic_sandwich(report):
    start = time.perf_counter()
    w = np.linspace(-100, 25, 512)
    parts, ok = [], True
    for rho in (1e-3, 1e-2):
        p = P.replace(rho=rho)
        psi = ValueFunction.build(p).psi(w)
        upper = rho * OccupationValue.build(p).m(w)
        lower = upper - (rho / p.lam) ** 2
        interior = w < p.safe_level  # at c/r both sides are 0 and only equality can hold
        strict = bool(np.all(lower[interior] < psi[interior]) and np.all(psi[interior] < upper[interior]))
        at_safe = psi[-1] == upper[-1] == 0.0
        dev = float(np.max(np.abs(psi - upper)))
        ok &= strict and at_safe and dev <= (rho / p.lam) ** 2
        parts.append(f"ρ={rho:g}: strict on 511 pts={strict}, equal at c/r={at_safe}, "
                     f"max|ψ−ρm|={dev:.2e} ≤ {(rho / p.lam) ** 2:.0e}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 1.0
    report(8, ok, "; ".join(parts) + f"; {elapsed:.3f} s")


# -- Monte Carlo criteria --------------------------------------------------------
@pytest.mark.slow
def test_criterion_09_mc_psi(report):
    vf = ValueFunction.build(P)
    lines, ok, total = [], True, 0.0
    for w0 in (-50.0, -10.0, 5.0):
        est, secs = _mc(w0)
        total += secs
        good, text = _mc_line(w0, est, vf.psi(w0), 0.01)
        ok &= good
        lines.append(text)
    ok &= total <= 600
    report(9, ok, "; ".join(lines) + f"; {total:.0f} s")


@pytest.mark.slow
def test_criterion_10_mc_restricted(report):
    lines, ok = [], True
    for w0 in (-10.0, 5.0):
        est, _ = _mc(w0, strategy="zero", restricted=True)
        good, text = _mc_line(w0, est, psi_restricted(P, w0), 0.01)
        ok &= good
        lines.append(text)
    report(10, ok, "; ".join(lines))


@pytest.mark.slow
def test_criterion_11_mc_occupation(report):
    est, _ = _mc(-10.0, strategy="occupation", mode="occupation_value")
    ok, text = _mc_line(-10.0, est, OccupationValue.build(P).m(-10.0), 0.5)
    report(11, ok, text)


@pytest.mark.slow
def test_criterion_12_mc_sandwich(report):
    rho = 0.01
    est, _ = _mc(-10.0, strategy="occupation", rho=rho)
    rho_m = rho * OccupationValue.build(P.replace(rho=rho)).m(-10.0)
    lo = rho_m - (rho / P.lam) ** 2 - 3 * est.stderr - 0.01
    hi = rho_m + 3 * est.stderr + 0.01
    ok = lo <= est.estimate <= hi
    report(12, ok, f"est={est.estimate:.5f}±{est.stderr:.5f} in [{lo:.5f}, {hi:.5f}] (ρm={rho_m:.5f})")


@pytest.mark.slow
def test_criterion_13_clock_equivalence(report):
    exp_est, _ = _mc(-10.0)
    ber_est, _ = _mc(-10.0, clock="bernoulli", seed=SEED + 1)
    gap = abs(exp_est.estimate - ber_est.estimate)
    bound = 3 * math.hypot(exp_est.stderr, ber_est.stderr)
    report(13, gap <= bound, f"exponential={exp_est.estimate:.5f}±{exp_est.stderr:.5f} "
                             f"bernoulli={ber_est.estimate:.5f}±{ber_est.stderr:.5f} "
                             f"|gap|={gap:.5f} ≤ {bound:.5f}")


def test_criterion_14_determinism(report, capsys):
    def run(*argv):
        code = cli_main(list(argv))
        out = capsys.readouterr().out
        assert code == 0
        return out

    analytic = [["solve", *CLI_PARAMS], ["eval", *CLI_PARAMS, "--points", "513"],
                ["figure1", *CLI_PARAMS, "--points", "513"],
                ["verify", *CLI_PARAMS, "--suite", "all", "--json"]]
    same_analytic = all(run(*a) == run(*a) for a in analytic)
    sim = ["simulate", *CLI_PARAMS, "--w0", "-10", "--paths", "20000", "--seed", "7"]
    first, second = run(*sim), run(*sim)
    threaded = run(*sim, "--workers", "4")
    same_sim = first == second
    same_workers = json.loads(first)["estimate"] == json.loads(threaded)["estimate"]
    ok = same_analytic and same_sim and same_workers
    report(14, ok, f"analytic commands byte-identical={same_analytic}, fixed-seed simulation "
                   f"byte-identical={same_sim}, 1 vs 4 workers identical estimate={same_workers}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
