"""Model parameters, spectral constants and the nonlinearities of the SIR wave system.

The traveling-wave profile (S, I) in the variable xi = x + c t solves

    c S' = d1 S'' - beta S I / (S + I)
    c I' = d2 I'' + beta S I / (S + I) - gamma I

with S(-inf) = S_-inf, I(+-inf) = 0.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

GUARD_FACTOR = 1e-14


class InvalidRegime(ValueError):
    """Raised when R0 <= 1, where no non-trivial non-negative wave exists."""


@dataclass(frozen=True)
class ModelParams:
    d1: float = 1.0
    d2: float = 1.0
    d3: float = 1.0
    beta: float = 2.0
    gamma: float = 1.0
    s_minus_inf: float = 1.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"ModelParams.{name} must be a finite positive number, got {value!r}")

    @property
    def r0(self) -> float:
        return self.beta / self.gamma

    @property
    def guard(self) -> float:
        """Threshold on S + I below which the incidence is taken as zero."""
        return GUARD_FACTOR * self.s_minus_inf

    @property
    def plateau(self) -> float:
        """M = (beta - gamma) S_-inf / gamma, the I-level where incidence balances recovery."""
        return (self.beta - self.gamma) * self.s_minus_inf / self.gamma

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        known = {k: float(v) for k, v in data.items() if k in cls.__dataclass_fields__}
        unknown = set(data) - set(known)
        if unknown:
            raise ValueError(f"unknown model parameter(s): {sorted(unknown)}")
        return cls(**known)


def critical_speed(d2: float, beta: float, gamma: float) -> float:
    """c* = 2 sqrt(d2 (beta - gamma))."""
    if beta <= gamma:
        raise InvalidRegime(
            f"R0 = beta/gamma = {beta / gamma:.6g} <= 1: no traveling wave exists (threshold R0 > 1)"
        )
    return 2.0 * math.sqrt(d2 * (beta - gamma))


def characteristic(lam, c: float, params: ModelParams):
    """Delta(lambda, c) = d2 lambda^2 - c lambda + beta - gamma."""
    lam = np.asarray(lam, dtype=float)
    return params.d2 * lam**2 - c * lam + params.beta - params.gamma


def kernel_roots(d: float, c: float, shift: float) -> tuple[float, float]:
    """Roots (lambda_minus, lambda_plus) of d lambda^2 - c lambda - shift = 0, shift > 0.

    lambda_minus is taken from the product of roots to avoid cancellation.
    """
    disc = math.sqrt(c * c + 4.0 * d * shift)
    lam_plus = (c + disc) / (2.0 * d)
    lam_minus = -2.0 * shift / (c + disc)
    return lam_minus, lam_plus


@dataclass(frozen=True)
class SpectralData:
    r0: float
    c_star: float
    lambda_star: float
    beta1: float
    beta2: float
    lambda1_minus: float
    lambda1_plus: float
    lambda2_minus: float
    lambda2_plus: float
    big_lambda1: float
    big_lambda2: float
    mu: float
    params: ModelParams = field(repr=False, compare=False)

    def roots(self, component: int) -> tuple[float, float, float, float]:
        """(lambda_minus, lambda_plus, Lambda, shift) for component 1 (S) or 2 (I)."""
        if component == 1:
            return self.lambda1_minus, self.lambda1_plus, self.big_lambda1, self.beta1
        if component == 2:
            return self.lambda2_minus, self.lambda2_plus, self.big_lambda2, self.beta2
        raise ValueError("component must be 1 or 2")

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("params")
        return out


def derive_spectral(
    params: ModelParams,
    beta1: Optional[float] = None,
    beta2: Optional[float] = None,
    mu: Optional[float] = None,
) -> SpectralData:
    """Compute c*, lambda*, the kernel exponents and the weighted-norm rate.

    ``beta1``/``beta2`` default to 2 beta and beta + gamma; ``mu=None`` picks the
    midpoint of the admissible interval (0, min(-lambda1_minus, -lambda2_minus)).
    """
    c_star = critical_speed(params.d2, params.beta, params.gamma)
    beta1 = 2.0 * params.beta if beta1 is None else float(beta1)
    beta2 = params.beta + params.gamma if beta2 is None else float(beta2)
    if not beta1 > params.beta:
        raise ValueError(f"beta1 = {beta1} must exceed beta = {params.beta}")
    if not beta2 > params.gamma:
        raise ValueError(f"beta2 = {beta2} must exceed gamma = {params.gamma}")

    l1m, l1p = kernel_roots(params.d1, c_star, beta1)
    l2m, l2p = kernel_roots(params.d2, c_star, beta2)
    mu_max = min(-l1m, -l2m)
    if mu is None:
        mu = 0.5 * mu_max
    elif not 0.0 < mu < mu_max:
        raise ValueError(f"mu = {mu} outside the admissible interval (0, {mu_max:.6g})")

    return SpectralData(
        r0=params.r0,
        c_star=c_star,
        lambda_star=c_star / (2.0 * params.d2),
        beta1=beta1,
        beta2=beta2,
        lambda1_minus=l1m,
        lambda1_plus=l1p,
        lambda2_minus=l2m,
        lambda2_plus=l2p,
        big_lambda1=math.sqrt(c_star**2 + 4.0 * params.d1 * beta1),
        big_lambda2=math.sqrt(c_star**2 + 4.0 * params.d2 * beta2),
        mu=float(mu),
        params=params,
    )


def infection_force(s, i, beta: float, guard: float = 0.0):
    """Incidence beta S I / (S + I), set to zero where S I = 0 or S + I <= guard."""
    s = np.asarray(s, dtype=float)
    i = np.asarray(i, dtype=float)
    if np.any(s < 0) or np.any(i < 0):
        raise ValueError("infection_force requires non-negative densities")
    return _force(s, i, beta, guard)


def _force(s, i, beta, guard):
    total = s + i
    ok = (total > guard) & (s * i != 0)
    # beta * min * (max / total): the quotient is <= 1 after rounding, so f <= beta min(S, I)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.maximum(s, i) / np.where(ok, total, 1.0)
        out = np.where(ok, beta * np.minimum(s, i) * frac, 0.0)
    return out if out.ndim else float(out)


def h_funcs(s, i, spec: SpectralData):
    """Return (beta1 S - f, (beta2 - gamma) I + f), the sources of the fixed-point operator."""
    p = spec.params
    f = infection_force(s, i, p.beta, p.guard)
    return spec.beta1 * np.asarray(s, float) - f, (spec.beta2 - p.gamma) * np.asarray(i, float) + f
