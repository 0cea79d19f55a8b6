"""Monte Carlo estimation of the Parisian ruin and occupation-time functionals.

Wealth follows dW = (rW + (μ−r)π(W) − c)dt + σπ(W)dB under a feedback
strategy, discretised by Euler–Maruyama.  Death is an Exp(λ) time drawn per
path.  The Parisian clock is either a fresh Exp(ρ) budget per excursion below
zero (default) or a per-step Bernoulli trial with probability 1 − e^{−ρ·dt}.
Crossings of 0 and c/r are detected at grid times.  Crossings of the lower
cutoff between grid times are caught by the Brownian-bridge test (on by
default): with endpoints a, b above the cutoff, the step is absorbed with
probability exp(−2ab/(σ²π²dt)).

Each path owns its Philox stream keyed by (seed, path index), and the
reduction is a correctly rounded sum, so estimates are bit-identical for any
worker count.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .market import ModelParams, derive_constants, validate
from .rng import STREAM_EVENT, polar_normals, uniform_pair
from .value import OccupationValue, ValueFunction

CAUSES = ("parisian_ruin", "death", "hit_safe_level", "hit_lower_cutoff", "time_cap", "blowup")
RUIN, DEATH, SAFE, CUTOFF, TIME_CAP, BLOWUP = range(6)
RESTRICTED_CUTOFF = 1e4
BLOWUP_BUDGET = 1e-4
TABLE_POINTS = 1 << 16
Z95 = 1.959963984540054


class SimulationError(RuntimeError):
    """Too many paths produced non-finite wealth."""


class Strategy(str, enum.Enum):
    OPTIMAL = "optimal"        # π*, minimises the Parisian ruin probability
    ZERO = "zero"              # π₀, minimises the ordinary lifetime ruin probability
    OCCUPATION = "occupation"  # π_L, minimises expected occupation time


class Mode(str, enum.Enum):
    PARISIAN_VALUE = "parisian_value"
    OCCUPATION_VALUE = "occupation_value"


class Clock(str, enum.Enum):
    EXPONENTIAL = "exponential"
    BERNOULLI = "bernoulli"


@dataclass(frozen=True)
class SimConfig:
    w0: float
    paths: int = 200_000
    dt: float = 0.01
    seed: int = 20240101
    strategy: Strategy = Strategy.OPTIMAL
    max_time: float | None = None  # defaults to 20/λ
    mode: Mode = Mode.PARISIAN_VALUE
    clock: Clock = Clock.EXPONENTIAL
    restricted: bool = False  # no cutoff at −L; deep cutoff at −1e4 instead
    workers: int = 1
    antithetic: bool = False
    bridge: bool = True  # Brownian-bridge test for crossing the lower cutoff

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "clock", Clock(self.clock))
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if int(self.paths) != self.paths or self.paths < 1:
            raise ValueError("paths must be a positive integer")
        if self.antithetic and self.paths % 2:
            raise ValueError("antithetic sampling needs an even path count")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.max_time is not None and not self.max_time > 0:
            raise ValueError("max_time must be positive")
        if not math.isfinite(self.w0):
            raise ValueError("w0 must be finite")

    def horizon(self, params: ModelParams) -> float:
        return self.max_time if self.max_time is not None else 20.0 / params.lam

    def as_dict(self) -> dict:
        return {
            "w0": self.w0, "paths": self.paths, "dt": self.dt, "seed": self.seed,
            "strategy": self.strategy.value, "max_time": self.max_time,
            "mode": self.mode.value, "clock": self.clock.value,
            "restricted": self.restricted, "antithetic": self.antithetic,
            "bridge": self.bridge,
        }


@dataclass(frozen=True)
class PathState:
    w: float
    t: float
    excursion_elapsed: float
    excursion_budget: float
    death_time: float
    occupation: float
    min_wealth: float
    steps: int
    cause: str


@dataclass(frozen=True)
class SimEstimate:
    estimate: float
    stderr: float
    ci95: tuple[float, float]
    paths_used: int
    steps_total: int
    absorbed_counts: dict = field(default_factory=dict)
    blowups: int = 0

    def as_dict(self) -> dict:
        return {
            "estimate": self.estimate, "stderr": self.stderr, "ci95": list(self.ci95),
            "paths_used": self.paths_used, "steps_total": self.steps_total,
            "absorbed_counts": dict(self.absorbed_counts), "blowups": self.blowups,
        }


@njit(cache=True, nogil=True)
def _invest(w, safe, slope, tab_lo, tab_h, tab):
    if w >= safe:
        return 0.0
    if w >= 0.0 or tab.shape[0] == 0:
        return slope * (safe - w)
    x = (w - tab_lo) / tab_h
    i = int(x)
    if i < 0:
        i = 0
    elif i > tab.shape[0] - 2:
        i = tab.shape[0] - 2
    frac = x - i
    return tab[i] + frac * (tab[i + 1] - tab[i])


@njit(cache=True, nogil=True)
def _event_uniform(seed, path, counter):
    u, _ = uniform_pair(seed, path, STREAM_EVENT, counter)
    return u


@njit(cache=True, nogil=True)
def _run_paths(start, stop, seed, w0, dt, max_steps,
               r, mu, sigma, c, lam, rho, cutoff, cutoff_payoff,
               slope, tab_lo, tab_h, tab, occupation_mode, bernoulli, antithetic, bridge,
               payoff, cause, steps_out, state):
    safe = c / r
    excess = mu - r
    sqdt = math.sqrt(dt)
    p_step = -math.expm1(-rho * dt)
    for p in range(start, stop):
        stream = p // 2 if antithetic else p
        sign = -1.0 if (antithetic and p % 2 == 1) else 1.0
        ev = np.uint64(0)
        nblock = 0
        spare = 0.0
        has_spare = False

        w = w0
        t = 0.0
        occ = 0.0
        minw = w0
        exc = 0.0
        budget = np.inf
        death = -math.log(_event_uniform(seed, stream, ev)) / lam
        ev += np.uint64(1)
        n = 0
        if w >= safe:
            result, why = (occ if occupation_mode else 0.0), 2
        elif w <= -cutoff:
            result, why = (1.0 / lam if occupation_mode else cutoff_payoff), 3
        else:
            if w < 0.0 and not occupation_mode and not bernoulli:
                budget = -math.log(_event_uniform(seed, stream, ev)) / rho
                ev += np.uint64(1)
            result, why = 0.0, -1
            while True:
                if n >= max_steps:
                    result, why = (occ if occupation_mode else 0.0), 4
                    break
                neg = w < 0.0
                life = death - t
                # Parisian ruin inside this step
                if neg and not occupation_mode:
                    if bernoulli:
                        if life > dt:
                            u = _event_uniform(seed, stream, ev)
                            ev += np.uint64(1)
                            if u < p_step:
                                t += dt
                                exc += dt
                                n += 1
                                result, why = 1.0, 0
                                break
                    else:
                        left = budget - exc
                        if left <= dt and left < life:
                            t += left
                            exc = budget
                            n += 1
                            result, why = 1.0, 0
                            break
                if life <= dt:
                    if neg:
                        occ += life
                        exc += life
                    t = death
                    n += 1
                    result, why = (occ if occupation_mode else 0.0), 1
                    break

                pi = _invest(w, safe, slope, tab_lo, tab_h, tab)
                if has_spare:
                    z = spare
                    has_spare = False
                else:
                    z, spare, nblock = polar_normals(seed, stream, nblock)
                    has_spare = True
                w_new = w + (r * w + excess * pi - c) * dt + sigma * pi * sqdt * sign * z
                t += dt
                n += 1
                if neg:
                    occ += dt
                    exc += dt
                if not math.isfinite(w_new):
                    result, why = np.nan, 5
                    break
                if w_new < minw:
                    minw = w_new
                if w_new >= safe:
                    w = w_new
                    result, why = (occ if occupation_mode else 0.0), 2
                    break
                hit = w_new <= -cutoff
                if not hit and bridge and pi != 0.0:
                    gap = 2.0 * (w + cutoff) * (w_new + cutoff) / (sigma * sigma * pi * pi * dt)
                    if gap < 40.0:
                        u = _event_uniform(seed, stream, ev)
                        ev += np.uint64(1)
                        if u < math.exp(-gap):
                            w_new = -cutoff
                            hit = True
                if hit:
                    w = w_new
                    result, why = ((occ + 1.0 / lam) if occupation_mode else cutoff_payoff), 3
                    break
                if w_new < 0.0:
                    if not neg:
                        exc = 0.0
                        if not occupation_mode and not bernoulli:
                            budget = -math.log(_event_uniform(seed, stream, ev)) / rho
                            ev += np.uint64(1)
                else:
                    exc = 0.0
                w = w_new
        payoff[p] = result
        cause[p] = why
        steps_out[p] = n
        state[p, 0] = w
        state[p, 1] = t
        state[p, 2] = exc
        state[p, 3] = budget
        state[p, 4] = death
        state[p, 5] = occ
        state[p, 6] = minw


def _strategy_inputs(params: ModelParams, config: SimConfig):
    k = derive_constants(params)
    slope = k.merton_ratio / (k.q - 1.0)
    if config.strategy is Strategy.ZERO:
        return slope, 0.0, 1.0, np.empty(0)
    if config.restricted:
        raise ValueError("the restricted problem has no cutoff; use the 'zero' strategy")
    vf = (ValueFunction if config.strategy is Strategy.OPTIMAL else OccupationValue).build(params)
    grid, values = vf.strategy_table(TABLE_POINTS)
    # the table endpoint at −L is the one-sided limit; it is never used past the cutoff
    return slope, float(grid[0]), float(grid[1] - grid[0]), np.ascontiguousarray(values)


def _run(params: ModelParams, config: SimConfig, start: int = 0, stop: int | None = None):
    validate(params)
    stop = config.paths if stop is None else stop
    slope, tab_lo, tab_h, tab = _strategy_inputs(params, config)
    cutoff = RESTRICTED_CUTOFF if config.restricted else params.L
    max_steps = int(math.ceil(config.horizon(params) / config.dt - 1e-9))
    n = config.paths
    payoff = np.zeros(n)
    cause = np.full(n, -1, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)
    state = np.zeros((n, 7))
    args = (np.uint64(config.seed), float(config.w0), float(config.dt), max_steps,
            params.r, params.mu, params.sigma, params.c, params.lam, params.rho,
            float(cutoff), params.lower_payoff, slope, tab_lo, tab_h, tab,
            config.mode is Mode.OCCUPATION_VALUE, config.clock is Clock.BERNOULLI,
            config.antithetic, config.bridge)
    bounds = np.linspace(start, stop, config.workers + 1).astype(np.int64)
    chunks = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]

    def work(chunk):
        _run_paths(chunk[0], chunk[1], *args, payoff, cause, steps, state)

    if len(chunks) == 1:
        work(chunks[0])
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            list(pool.map(work, chunks))
    return payoff, cause, steps, state


def simulate_path(params: ModelParams, config: SimConfig, path_index: int = 0):
    """Simulate one path; returns (payoff, PathState)."""
    if not 0 <= path_index < config.paths:
        raise IndexError("path_index outside the configured path range")
    payoff, cause, steps, state = _run(params, config, path_index, path_index + 1)
    i = path_index
    s = state[i]
    diag = PathState(w=s[0], t=s[1], excursion_elapsed=s[2], excursion_budget=s[3],
                     death_time=s[4], occupation=s[5], min_wealth=s[6],
                     steps=int(steps[i]), cause=CAUSES[cause[i]])
    return float(payoff[i]), diag


def _summarise(payoff, cause, steps, antithetic: bool) -> SimEstimate:
    ok = cause != BLOWUP
    blowups = int(np.count_nonzero(~ok))
    counts = {name: int(np.count_nonzero(cause == code)) for code, name in enumerate(CAUSES[:-1])}
    if antithetic:
        pairs = payoff.reshape(-1, 2)
        pair_ok = ok.reshape(-1, 2).all(axis=1)
        samples = pairs[pair_ok].mean(axis=1)
    else:
        samples = payoff[ok]
    m = len(samples)
    if m == 0:
        raise SimulationError("no usable paths")
    mean = math.fsum(samples) / m
    if m > 1:
        var = math.fsum((samples - mean) ** 2) / (m - 1)
        stderr = math.sqrt(var / m)
    else:
        stderr = 0.0
    return SimEstimate(
        estimate=mean, stderr=stderr, ci95=(mean - Z95 * stderr, mean + Z95 * stderr),
        paths_used=int(np.count_nonzero(ok)), steps_total=int(steps.sum()),
        absorbed_counts=counts, blowups=blowups,
    )


def estimate_value(params: ModelParams, config: SimConfig) -> SimEstimate:
    """Monte Carlo estimate of the value functional selected by ``config.mode``."""
    payoff, cause, steps, _ = _run(params, config)
    est = _summarise(payoff, cause, steps, config.antithetic)
    if est.blowups > BLOWUP_BUDGET * config.paths:
        raise SimulationError(f"{est.blowups} of {config.paths} paths produced non-finite wealth")
    return est


def estimate_occupation(params: ModelParams, config: SimConfig) -> SimEstimate:
    """Expected occupation time below zero under the configured strategy."""
    if config.mode is not Mode.OCCUPATION_VALUE:
        config = replace(config, mode=Mode.OCCUPATION_VALUE)
    return estimate_value(params, config)
