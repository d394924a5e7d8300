"""Fisher information of complex-visibility estimation from weak thermal light.

The parameter vector is ``(Re g, Im g)``; the measurement adds a known phase
shift ``delta`` before detection, so information only flows along the
direction ``phi - delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularityError

_SINGULAR_TOL = 1e-15


@dataclass(frozen=True, eq=False)
class FisherResult:
    matrix: np.ndarray
    eigenvalues: tuple[float, float]
    trace_norm: float
    epsilon: float
    delta: float


def _rank_one(prefactor: float, angle: float, epsilon: float, delta: float) -> FisherResult:
    c, s = math.cos(angle), math.sin(angle)
    m = prefactor * np.array([[c * c, s * c], [s * c, s * s]])
    lam = np.linalg.eigvalsh(m)
    return FisherResult(m, (float(lam[0]), float(lam[1])), float(np.trace(m)), epsilon, delta)


def _prefactor(scale: float, amp: float, angle: float) -> float:
    re = amp * math.cos(angle)
    gap = 1 - re * re
    if gap <= _SINGULAR_TOL:
        raise SingularityError(f"Re(V e^(i(phi-delta))) = {re:+.6g}: Fisher information diverges")
    return scale / gap


def fisher_ideal(epsilon: float, g: float, phi: float, delta: float = 0.0) -> FisherResult:
    """Direct-detection Fisher matrix for mean photon number ``epsilon``."""
    if epsilon < 0:
        raise DomainError("epsilon must be nonnegative")
    if not 0 <= g <= 1:
        raise DomainError(f"|g|={g} outside [0, 1]")
    angle = phi - delta
    return _rank_one(_prefactor(epsilon, g, angle), angle, epsilon, delta)


def fisher_practical(eta: float, epsilon: float, v: float, phi: float, delta: float = 0.0) -> FisherResult:
    """Entanglement-assisted Fisher matrix with retrieval efficiency ``eta`` and fringe visibility ``v``.

    Half the ideal information at ``eta = 1``: only half the heralded events
    carry the phase.
    """
    if not 0 <= eta <= 1:
        raise DomainError(f"eta={eta} outside [0, 1]")
    if epsilon < 0:
        raise DomainError("epsilon must be nonnegative")
    if not 0 <= v <= 1:
        raise DomainError(f"visibility {v} outside [0, 1]")
    angle = phi - delta
    return _rank_one(_prefactor(eta * epsilon / 2, v, angle), angle, epsilon, delta)


def practical_upper_bound(eta: float, epsilon: float, v: float) -> float:
    """``eta epsilon / (2 (1 - V^2))``, attained at ``phi = delta``."""
    if v >= 1:
        raise SingularityError("bound diverges at V = 1")
    return eta * epsilon / (2 * (1 - v * v))


def compare_local_bound(epsilon: float, fisher: FisherResult) -> float:
    """Ratio of the trace norm to the ``epsilon^2`` ceiling of local measurement schemes."""
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    return fisher.trace_norm / epsilon**2
