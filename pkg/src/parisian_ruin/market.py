"""Market parameters and the closed-form constants derived from them.

All quantities are per year; wealth is in the same units as the net
consumption rate ``c``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

IDENTITY_RTOL = 1e-12


class ParameterError(ValueError):
    """A model parameter violates a standing assumption."""


@dataclass(frozen=True)
class ModelParams:
    r: float
    mu: float
    sigma: float
    lam: float
    rho: float
    c: float
    L: float

    @property
    def safe_level(self) -> float:
        """Wealth c/r at which riskless investment funds consumption forever."""
        return self.c / self.r

    @property
    def lower_payoff(self) -> float:
        """Value ρ/(λ+ρ) paid on reaching the lower cutoff −L."""
        return self.rho / (self.lam + self.rho)

    def replace(self, **changes: float) -> "ModelParams":
        fields = asdict(self)
        fields.update(changes)
        return ModelParams(**fields)

    def as_dict(self) -> dict[str, float]:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return {k: d[k] for k in ("r", "mu", "sigma", "lambda", "rho", "c", "L")}


PAPER_PARAMS = ModelParams(r=0.04, mu=0.08, sigma=0.2, lam=0.01, rho=0.02, c=1.0, L=100.0)


def validate(params: ModelParams) -> ModelParams:
    """Return ``params`` unchanged, or raise ParameterError naming the violation."""
    for name, label in (("r", "r"), ("mu", "μ"), ("sigma", "σ"), ("lam", "λ"),
                        ("rho", "ρ"), ("c", "c"), ("L", "L")):
        value = getattr(params, name)
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ParameterError(f"{label} must be a finite number, got {value!r}")
    checks = (
        (params.sigma > 0, "requires σ > 0"),
        (params.r > 0, "requires r > 0"),
        (params.lam > 0, "requires λ > 0"),
        (params.rho > 0, "requires ρ > 0 (use the occupation-time problem for ρ = 0)"),
        (params.c > 0, "requires c > 0"),
        (params.L > 0, "requires L > 0"),
        (params.mu > params.r, "requires μ > r"),
    )
    for ok, message in checks:
        if not ok:
            raise ParameterError(message)
    if not (math.isfinite(params.safe_level) and params.safe_level > 0):
        raise ParameterError("requires a finite positive safe level c/r")
    return params


@dataclass(frozen=True)
class DerivedConstants:
    delta: float
    B1: float
    B2: float
    B3: float
    B4: float
    q: float
    alpha: float
    merton_ratio: float

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in ("delta", "B1", "B2", "B3", "B4", "q", "alpha")}


def dual_exponents(delta: float, r: float, hazard: float) -> tuple[float, float]:
    """Roots (positive, negative) of δB² − (r − h + δ)B − h = 0 for hazard h."""
    a = r - hazard + delta
    disc = math.sqrt(a * a + 4.0 * delta * hazard)
    # Avoid cancellation in the small-magnitude root by using the product h/δ.
    if a >= 0:
        big = (a + disc) / (2.0 * delta)
        return big, -hazard / (delta * big)
    small = (a - disc) / (2.0 * delta)
    return -hazard / (delta * small), small


def _close(a: float, b: float, rtol: float = IDENTITY_RTOL) -> bool:
    return abs(a - b) <= rtol * max(abs(a), abs(b), 1e-300)


def derive_constants(params: ModelParams) -> DerivedConstants:
    validate(params)
    r, lam, rho = params.r, params.lam, params.rho
    excess = params.mu - params.r
    delta = 0.5 * (excess / params.sigma) ** 2
    B1, B2 = dual_exponents(delta, r, lam)
    B3, B4 = dual_exponents(delta, r, lam + rho)
    q = B1 / (B1 - 1.0)
    s = r + lam + delta
    q_direct = (s + math.sqrt(s * s - 4.0 * r * lam)) / (2.0 * r)
    a = r - lam + delta
    alpha = (q - 1.0) / (2.0 * delta) * (-a + math.sqrt(a * a + 4.0 * delta * (lam + rho)))

    if not (B1 > B3 > 1.0 and 0.0 > B2 > B4):
        raise ArithmeticError(f"exponent ordering violated: B1={B1}, B2={B2}, B3={B3}, B4={B4}")
    if not (q > 1.0 and _close(q, q_direct)):
        raise ArithmeticError(f"q identity violated: {q} vs {q_direct}")
    if not alpha > 0.0:
        raise ArithmeticError(f"alpha must be positive, got {alpha}")
    return DerivedConstants(
        delta=delta, B1=B1, B2=B2, B3=B3, B4=B4, q=q, alpha=alpha,
        merton_ratio=excess / params.sigma**2,
    )
