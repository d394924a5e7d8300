"""Photon statistics and coherence models for the signal, reference and ancilla fields.

Conventions
-----------
* Two-mode states are ordered (node A, node B).
* ``SignalState.mean_per_arm`` is the mean photon number reaching one node; the
  total weak-field brightness ``epsilon`` of the two-arm state is twice that.
* ``EntangledAncilla.d`` is the *absolute* off-diagonal element
  ``<10|rho|01>`` (bounded by ``sqrt(p01 p10)``); ``coherence`` gives the
  normalized value that enters the visibility formula.
* Coherence time follows ``tau_c = int_0^inf |g1(tau)| dtau`` for both
  supported shapes, so ``|g1| = exp(-|tau|/tau_c)`` (exponential, Lorentzian
  spectrum) or ``exp(-pi (tau/tau_c)^2 / 4)`` (gaussian, Doppler spectrum).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.special import erf
from scipy.stats import poisson

from .errors import DomainError, InputError, InvalidStateError, TruncationError
from .fock import DEFAULT_N_MAX, FockState, basis_index, beamsplitter_unitary

PROB_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class PhotonNumberDist:
    probs: np.ndarray

    def __post_init__(self):
        p = self.probs
        if np.any(p < 0) or abs(p.sum() - 1) > PROB_TOL:
            raise InvalidStateError("photon-number probabilities must be nonnegative and sum to 1")

    @property
    def n_max(self) -> int:
        return len(self.probs) - 1

    @property
    def mean(self) -> float:
        return float(np.dot(np.arange(len(self.probs)), self.probs))

    @property
    def g2(self) -> float:
        n = np.arange(len(self.probs))
        m = self.mean
        if m == 0:
            return float("nan")
        return float(np.dot(n * (n - 1), self.probs) / m**2)


def _normalized(p: np.ndarray) -> PhotonNumberDist:
    return PhotonNumberDist(p / p.sum())


def thermal_dist(mean: float, n_max: int = DEFAULT_N_MAX) -> PhotonNumberDist:
    """Bose-Einstein ``p_n = m^n / (1+m)^(n+1)``, renormalized on ``0..n_max``."""
    if mean < 0:
        raise DomainError(f"mean photon number must be >= 0, got {mean}")
    n = np.arange(n_max + 1)
    return _normalized(mean**n / (1 + mean) ** (n + 1))


def coherent_dist(mean: float, n_max: int = DEFAULT_N_MAX) -> PhotonNumberDist:
    """Poisson distribution, renormalized on ``0..n_max``."""
    if mean < 0:
        raise DomainError(f"mean photon number must be >= 0, got {mean}")
    return _normalized(poisson.pmf(np.arange(n_max + 1), mean))


@dataclass(frozen=True)
class CoherenceModel:
    form: str = "gaussian"
    tau_c: float = 15.4  # ns

    def __post_init__(self):
        if self.form not in ("gaussian", "exponential"):
            raise InputError(f"unknown coherence form {self.form!r}")
        if not self.tau_c > 0:
            raise InputError("coherence time must be positive")

    def g1(self, tau):
        return g1(self, tau)

    def g2(self, tau):
        return g2_tau(self, tau)

    def windowed_g2(self, window):
        return windowed_g2(self, window)


def g1(model: CoherenceModel, tau):
    """Magnitude of the first-order coherence at delay ``tau`` (ns)."""
    x = np.abs(np.asarray(tau, dtype=float)) / model.tau_c
    if model.form == "exponential":
        out = np.exp(-x)
    else:
        out = np.exp(-np.pi * x**2 / 4)
    return out if out.ndim else float(out)


def g2_tau(model: CoherenceModel, tau):
    """Siegert relation for chaotic light: ``1 + |g1(tau)|^2``."""
    return 1 + np.square(g1(model, tau))


def windowed_g2(model: CoherenceModel, window):
    """Zero-delay g2 integrated over a detection window ``T`` (ns).

    ``1 + T^-2 int_0^T int_0^T |g1(t-t')|^2 dt dt'`` in closed form.
    """
    T = np.asarray(window, dtype=float)
    if np.any(T <= 0):
        raise DomainError("window width must be positive")
    if model.form == "exponential":
        s = model.tau_c / 2
        val = 2 * (T * s - s**2 * (-np.expm1(-T / s))) / T**2
    else:
        a = np.pi / (2 * model.tau_c**2)
        root = math.sqrt(a)
        val = 2 * (T * math.sqrt(math.pi) / (2 * root) * erf(root * T) + np.expm1(-a * T**2) / (2 * a)) / T**2
    out = 1 + val
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class EntangledAncilla:
    """Read-out field of the heralded single-excitation entanglement.

    ``p00..p11`` and ``d`` form the two-level X block.  When ``g2`` is given,
    same-mode pairs ``|20>``, ``|02>`` of weight ``p11/2`` each are implied
    (binomial split of the two-photon term), so the invariant is
    ``p00 + p01 + p10 + p11 + same_mode_weight == 1``.
    """

    p00: float
    p01: float
    p10: float
    p11: float
    d: float = 0.0
    psi: float = 0.0
    g2: float | None = None
    eta_ro: float | None = None

    def __post_init__(self):
        probs = (self.p00, self.p01, self.p10, self.p11)
        if min(probs) < 0:
            raise InvalidStateError("ancilla probabilities must be nonnegative")
        total = sum(probs) + self.same_mode_weight
        if abs(total - 1) > PROB_TOL:
            raise InvalidStateError(f"ancilla probabilities sum to {total:.12g}, expected 1")
        if self.d < 0 or self.d > math.sqrt(self.p01 * self.p10) + 1e-15:
            raise InvalidStateError(
                f"coherence d={self.d} outside [0, sqrt(p01 p10)={math.sqrt(self.p01 * self.p10):.6g}]"
            )

    @property
    def same_mode_weight(self) -> float:
        return self.p11 if self.g2 is not None else 0.0

    @property
    def p1(self) -> float:
        return self.p01 + self.p10

    @property
    def coherence(self) -> float:
        """Normalized coherence ``d / sqrt(p01 p10)`` in [0, 1]."""
        norm = math.sqrt(self.p01 * self.p10)
        return self.d / norm if norm > 0 else 0.0

    @classmethod
    def from_retrieval(
        cls, p1: float, g2: float, coherence: float = 1.0, psi: float = 0.0, eta_ro: float | None = None
    ) -> "EntangledAncilla":
        """Balanced ancilla with single-photon probability ``p1`` (both modes together).

        The two-photon probability follows the low-excitation moment relation
        ``P(2) = g2 p1^2 / 2``, split binomially over ``|20>, |11>, |02>``.
        """
        if not 0 <= coherence <= 1:
            raise DomainError("normalized coherence must lie in [0, 1]")
        p2 = g2 * p1**2 / 2
        half = p1 / 2
        return cls(
            p00=1 - p1 - p2,
            p01=half,
            p10=half,
            p11=p2 / 2,
            d=coherence * half,
            psi=psi,
            g2=g2,
            eta_ro=eta_ro if eta_ro is not None else p1,
        )


def build_ancilla_state(a: EntangledAncilla, n_max: int = DEFAULT_N_MAX) -> FockState:
    dim = (n_max + 1) ** 2
    rho = np.zeros((dim, dim), dtype=complex)

    def idx(i, j):
        return basis_index((i, j), n_max)

    rho[idx(0, 0), idx(0, 0)] = a.p00
    rho[idx(0, 1), idx(0, 1)] = a.p01
    rho[idx(1, 0), idx(1, 0)] = a.p10
    rho[idx(1, 1), idx(1, 1)] = a.p11
    coh = a.d * np.exp(1j * a.psi)
    rho[idx(1, 0), idx(0, 1)] = coh
    rho[idx(0, 1), idx(1, 0)] = np.conj(coh)
    if a.same_mode_weight > 0:
        if n_max < 2:
            raise TruncationError("same-mode photon pairs need n_max >= 2")
        rho[idx(2, 0), idx(2, 0)] = a.same_mode_weight / 2
        rho[idx(0, 2), idx(0, 2)] = a.same_mode_weight / 2
    return FockState(rho, n_max, 2)


@dataclass(frozen=True)
class SignalState:
    """Thermal signal over two collection arms with complex visibility ``g e^{i phi}``.

    ``g`` is the field-level coherence ``<a_A^+ a_B> / mean_per_arm``; the
    normalized coherence of the single-photon block approaches it as the
    mean photon number goes to zero.
    """

    mean_per_arm: float
    g: float = 1.0
    phi: float = 0.0

    def __post_init__(self):
        if self.mean_per_arm < 0:
            raise DomainError("mean photon number must be >= 0")
        if not 0 <= self.g <= 1:
            raise DomainError(f"visibility amplitude g={self.g} outside [0, 1]")

    @property
    def epsilon(self) -> float:
        return 2 * self.mean_per_arm

    @property
    def g2(self) -> float:
        return 2.0


def split_thermal_populations(mean_per_arm: float, n_max: int) -> np.ndarray:
    """Joint ``P(n_A, n_B)`` of a thermal field of mean ``2*mean_per_arm`` split 50/50."""
    total_mean = 2 * mean_per_arm
    p = np.zeros((n_max + 1, n_max + 1))
    for na in range(n_max + 1):
        for nb in range(n_max + 1):
            n = na + nb
            p[na, nb] = total_mean**n / (1 + total_mean) ** (n + 1) * comb(n, na) / 2**n
    return p / p.sum()


def build_signal_state(
    mean_per_arm: float, g: float = 1.0, phi: float = 0.0, n_max: int = DEFAULT_N_MAX
) -> FockState:
    """Two-mode Gaussian thermal state with ``<a_A^+ a_B> = g e^{i phi} mean_per_arm``.

    Two independent thermal modes of means ``m(1 +- g)`` are combined on a
    balanced mixer at cutoff ``2 n_max`` (exact for every block kept) and the
    ``n_A, n_B <= n_max`` block is renormalized.  At ``g = 1`` the populations
    are those of :func:`split_thermal_populations`.
    """
    spec = SignalState(mean_per_arm, g, phi)
    big = 2 * n_max
    m = spec.mean_per_arm
    rho = np.kron(np.diag(thermal_dist(m * (1 + g), big).probs), np.diag(thermal_dist(m * (1 - g), big).probs))
    u = beamsplitter_unitary(big, spec.phi + math.pi)
    rho = u @ rho @ u.conj().T
    keep = [basis_index((a, b), big) for a in range(n_max + 1) for b in range(n_max + 1)]
    block = rho[np.ix_(keep, keep)]
    block = (block + block.conj().T) / 2
    return FockState(block / np.trace(block).real, n_max, 2)


def leading_order_params(state: FockState) -> tuple[tuple[float, float, float], float, float]:
    """``((P(0), P(1), P(2)), coherence, phase)`` of a 2-mode state, as used by the leading-order formulas.

    ``P(1)`` is the mean single-photon population per mode and ``P(2)`` the
    population of ``|11>``; ``coherence`` is ``|<10|rho|01>| / P(1)``.
    """
    p0 = state.element((0, 0), (0, 0)).real
    p01 = state.element((0, 1), (0, 1)).real
    p10 = state.element((1, 0), (1, 0)).real
    p11 = state.element((1, 1), (1, 1)).real
    c = state.element((1, 0), (0, 1))
    p1 = (p01 + p10) / 2
    coh = abs(c) / math.sqrt(p01 * p10) if p01 * p10 > 0 else 0.0
    return (p0, p1, p11), coh, float(np.angle(c))


def signal_mean_for_ratio(x: float, ancilla: EntangledAncilla) -> float:
    """Per-arm thermal mean giving brightness ratio ``x = P_S(1) / P_E(1)`` (per-mode populations)."""
    if x <= 0:
        raise DomainError("brightness ratio must be positive")
    target = x * ancilla.p1 / 2
    # P_S(1) per arm = m / (1 + 2m)^2 for the split thermal state; invert on the weak branch
    if target >= 0.125:
        raise DomainError(f"single-photon population {target:.4g} per arm is unreachable (max 1/8)")
    # m/(1+2m)^2 = t  ->  4t m^2 + (4t - 1) m + t = 0, smaller root
    a, b, c = 4 * target, 4 * target - 1, target
    return (-b - math.sqrt(b * b - 4 * a * c)) / (2 * a)
