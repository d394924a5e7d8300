"""Analytic coincidence-visibility model and the multiplicative imperfection budget."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np

from .errors import DomainError, InputError, UnboundedOptimumError, UndefinedVisibilityError


def v_h(x, g2_s: float, g2_e: float):
    """Multi-photon-limited visibility ``2x / (x^2 g2_S + g2_E + 2x)``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("brightness ratio x must be positive")
    if g2_s < 0 or g2_e < 0:
        raise DomainError("g2 values must be nonnegative")
    out = 2 * x / (x**2 * g2_s + g2_e + 2 * x)
    return out if out.ndim else float(out)


def optimal_ratio(g2_s: float, g2_e: float) -> float:
    """Brightness ratio maximizing :func:`v_h`: ``sqrt(g2_E / g2_S)``."""
    if g2_s < 0 or g2_e < 0:
        raise DomainError("g2 values must be nonnegative")
    if g2_s == 0:
        raise UnboundedOptimumError("g2_S = 0: visibility has no interior maximum in x")
    return math.sqrt(g2_e / g2_s)


def v_snr(snr: float, eta_ro: float, p_ro: float) -> float:
    """Herald-noise factor ``SNR eta_ro / (SNR eta_ro + p_ro)``."""
    if min(snr, eta_ro, p_ro) < 0:
        raise DomainError("SNR, eta_ro and p_ro must be nonnegative")
    if math.isinf(snr):
        return 1.0
    signal = snr * eta_ro
    if signal + p_ro == 0:
        raise DomainError("SNR * eta_ro + p_ro is zero")
    return signal / (signal + p_ro)


def p_ro_for_v_snr(target: float, snr: float, eta_ro: float) -> float:
    """Read-out noise probability that produces a given ``V_SNR``."""
    if not 0 < target <= 1:
        raise DomainError("target V_SNR must lie in (0, 1]")
    return snr * eta_ro * (1 - target) / target


def v_c(g2_windowed: float) -> float:
    """Coherence factor ``sqrt(g2 - 1)`` from the windowed thermal g2."""
    if not 1.0 <= g2_windowed <= 2.0:
        raise DomainError(f"windowed g2={g2_windowed} outside [1, 2]")
    return math.sqrt(g2_windowed - 1.0)


def v_p(sigmas: Sequence[float]) -> float:
    """Phase-noise factor ``exp(-sigma^2 / 2)`` with ``sigma^2 = sum sigma_i^2``."""
    s = np.asarray(sigmas, dtype=float)
    if not np.all(np.isfinite(s)):
        raise DomainError("phase standard deviations must be finite")
    return float(np.exp(-np.sum(s**2) / 2))


def hom_g2(g2_th: float, g2_ro: float, eta: float, zeta: float = 1.0) -> float:
    """HOM-type g2 of two fields with indistinguishability ``eta`` and intensity ratio ``zeta``."""
    if zeta <= 0:
        raise DomainError("relative intensity zeta must be positive")
    if not 0 <= eta <= 1:
        raise DomainError("indistinguishability eta must lie in [0, 1]")
    return (g2_th + zeta**2 * g2_ro + 2 * (1 - eta) * zeta) / (1 + zeta) ** 2


@dataclass(frozen=True)
class HomInversion:
    eta: float
    in_range: bool


def eta_from_hom(g2_hom: float, g2_th: float, g2_ro: float, zeta: float = 1.0) -> HomInversion:
    """Invert :func:`hom_g2` for ``eta``; out-of-range results are flagged, not clamped."""
    if zeta <= 0:
        raise DomainError("relative intensity zeta must be positive")
    eta = 1 - (g2_hom * (1 + zeta) ** 2 - g2_th - zeta**2 * g2_ro) / (2 * zeta)
    return HomInversion(eta, 0.0 <= eta <= 1.0)


def v_i(eta_l: float, eta_r: float) -> float:
    """Mode-mismatch factor: geometric mean of the two nodes' indistinguishabilities."""
    for e in (eta_l, eta_r):
        if not 0 <= e <= 1:
            raise DomainError(f"indistinguishability {e} outside [0, 1]")
    return math.sqrt(eta_l * eta_r)


def full_visibility(
    p_e: Sequence[float],
    p_s: Sequence[float],
    d: float,
    g: float,
    psi: float,
    phi: float,
    xi: float = 1.0,
) -> float:
    """Two-photon-order fringe visibility at entanglement phase ``psi``.

    ``p_e``/``p_s`` are ``(P(0), P(1), P(2))`` with ``P(1)`` per mode and
    ``P(2)`` the one-photon-per-mode probability; ``d``, ``g`` are normalized
    coherences and ``xi`` the mode-overlap factor.
    """
    if min(*p_e, *p_s) < 0:
        raise DomainError("probabilities must be nonnegative")
    if not 0 <= xi <= 1:
        raise DomainError("xi must lie in [0, 1]")
    den = p_e[0] * p_s[2] + p_e[2] * p_s[0] + 2 * p_e[1] * p_s[1]
    if den == 0:
        raise UndefinedVisibilityError("no two-photon coincidence weight")
    return 2 * p_e[1] * p_s[1] * d * g * math.cos(psi - phi) * xi / den


@dataclass(frozen=True)
class VisibilityBudget:
    v_snr: float
    v_h: float
    v_c: float
    v_p: float
    v_i: float

    def __post_init__(self):
        for f in fields(self):
            val = getattr(self, f.name)
            if not 0 <= val <= 1:
                raise DomainError(f"{f.name}={val} outside [0, 1]")

    @property
    def v_theory(self) -> float:
        return self.v_snr * self.v_h * self.v_c * self.v_p * self.v_i

    def as_dict(self) -> dict[str, float]:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["v_theory"] = self.v_theory
        return out


@dataclass(frozen=True)
class BudgetInputs:
    """Physical inputs of the budget; any factor may instead be given directly.

    A directly supplied factor (``v_h=0.69`` say) takes precedence over the
    physical parameters that would otherwise determine it.
    """

    snr: float | None = None
    eta_ro: float | None = None
    p_ro: float | None = None
    x: float | None = None
    g2_s: float | None = None
    g2_e: float | None = None
    g2_windowed: float | None = None
    sigma_thi: float | None = None
    sigma_woi: float | None = None
    sigma_wri: float | None = None
    eta_l: float | None = None
    eta_r: float | None = None
    v_snr: float | None = None
    v_h: float | None = None
    v_c: float | None = None
    v_p: float | None = None
    v_i: float | None = None

    def __post_init__(self):
        for f in fields(self):
            val = getattr(self, f.name)
            if val is not None and (not math.isfinite(val) and f.name != "snr" or val < 0):
                raise DomainError(f"{f.name}={val} must be finite and nonnegative")


_FACTOR_NEEDS = {
    "v_snr": ("snr", "eta_ro", "p_ro"),
    "v_h": ("x", "g2_s", "g2_e"),
    "v_c": ("g2_windowed",),
    "v_p": ("sigma_thi", "sigma_woi", "sigma_wri"),
    "v_i": ("eta_l", "eta_r"),
}


def missing_inputs(inputs: BudgetInputs) -> list[str]:
    missing = []
    for factor, needs in _FACTOR_NEEDS.items():
        if getattr(inputs, factor) is None:
            missing += [k for k in needs if getattr(inputs, k) is None]
    return missing


def budget(inputs: BudgetInputs) -> VisibilityBudget:
    missing = missing_inputs(inputs)
    if missing:
        raise InputError("missing budget inputs: " + ", ".join(missing))
    i = inputs
    return VisibilityBudget(
        v_snr=i.v_snr if i.v_snr is not None else v_snr(i.snr, i.eta_ro, i.p_ro),
        v_h=i.v_h if i.v_h is not None else v_h(i.x, i.g2_s, i.g2_e),
        v_c=i.v_c if i.v_c is not None else v_c(i.g2_windowed),
        v_p=i.v_p if i.v_p is not None else v_p((i.sigma_thi, i.sigma_woi, i.sigma_wri)),
        v_i=i.v_i if i.v_i is not None else v_i(i.eta_l, i.eta_r),
    )
