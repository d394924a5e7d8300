"""Phase bookkeeping of the three locked interferometers (THI, WOI, WRI).

Propagation over length ``L`` at wave number ``k`` contributes ``-k L``.
Each interferometer has an actuator phase that the lock servo sets:

* THI: PZT phase ``pzt`` in the double-passed locking arm,
  ``2 k_p (dL + d_delta) + pzt = phi_th``.
* WOI: fiber stretcher ``stretcher`` in node A's write-out arm (the PZT sits
  in the shared locking path),
  ``k_p (dL + 2 d_delta + dL_ro + dL_wo) + pzt + stretcher = phi_woro``.
* WRI: waveplate phase ``waveplate`` on node B's read beam,
  ``k_wr (dL_w + dL_r) + waveplate = phi_wr``.

``d`` denotes node B minus node A.  Products ``k L`` reach ~1e11 rad for
kilometre paths, far beyond double precision, so every phase is accumulated
exactly with :class:`fractions.Fraction` and wrapped with 60-digit ``pi``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from .errors import DomainError, InputError, UnlockedError

K_SIGNAL = 2 * math.pi / 780.241e-9  # rad/m, Rb D2
K_CONTROL = 2 * math.pi / 795.0e-9
LOCK_TOL = 1e-9  # rad
_DPS = 60


def wrap(phase) -> float:
    """Reduce an exact (Fraction/int/float) phase into (-pi, pi]."""
    with mpmath.workdps(_DPS):
        x = mpmath.mpf(phase.numerator) / phase.denominator if isinstance(phase, Fraction) else mpmath.mpf(phase)
        two_pi = 2 * mpmath.pi
        n = mpmath.ceil((x - mpmath.pi) / two_pi)
        return float(x - n * two_pi)


def _q(x: float) -> Fraction:
    return Fraction(x)


@dataclass(frozen=True)
class PathConfig:
    L_A: float = 0.0
    L_B: float = 0.0
    delta_A: float = 0.0
    delta_B: float = 0.0
    Lw_A: float = 0.0
    Lw_B: float = 0.0
    Lwo_A: float = 0.0
    Lwo_B: float = 0.0
    Lr_A: float = 0.0
    Lr_B: float = 0.0
    Lro_A: float = 0.0
    Lro_B: float = 0.0
    k_th: float = K_SIGNAL
    k_p: float = K_SIGNAL
    k_wr: float = K_CONTROL
    k_w: float = K_CONTROL
    k_wo: float = K_SIGNAL
    k_r: float = K_CONTROL
    k_ro: float = K_SIGNAL
    Phi_w_A: float = 0.0
    Phi_w_B: float = 0.0
    Phi_r_A: float = 0.0
    Phi_r_B: float = 0.0
    # actuator phases set by the servos (rad)
    pzt: float = 0.0
    stretcher: float = 0.0
    waveplate: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise InputError(f"{f.name} must be finite")
            if f.name.startswith("k_") and v <= 0:
                raise InputError(f"wave number {f.name} must be positive")
            if f.name[0] in "Ld" and v < 0:
                raise InputError(f"path length {f.name} must be nonnegative")

    def wavenumber_deviations(self) -> dict[str, float]:
        """Relative deviations behind the ``k_p ~ k_wo ~ k_ro = k_th`` and ``k_wr ~ k_w ~ k_r`` assumptions."""
        return {
            "k_p": self.k_p / self.k_th - 1,
            "k_wo": self.k_wo / self.k_th - 1,
            "k_ro": self.k_ro / self.k_th - 1,
            "k_w": self.k_w / self.k_wr - 1,
            "k_r": self.k_r / self.k_wr - 1,
        }


@dataclass(frozen=True)
class LockState:
    phi_th: float
    phi_woro: float
    phi_wr: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.phi_th, self.phi_woro, self.phi_wr)):
            raise InputError("lock set-points must be finite")


def _diff(cfg: PathConfig, name: str) -> Fraction:
    return _q(getattr(cfg, name + "_B")) - _q(getattr(cfg, name + "_A"))


def _lock_combinations(cfg: PathConfig) -> dict[str, Fraction]:
    dL, dd = _diff(cfg, "L"), _diff(cfg, "delta")
    kp, kwr = _q(cfg.k_p), _q(cfg.k_wr)
    pzt = _q(cfg.pzt)
    return {
        "phi_th": 2 * kp * (dL + dd) + pzt,
        "phi_woro": kp * (dL + 2 * dd + _diff(cfg, "Lro") + _diff(cfg, "Lwo")) + pzt + _q(cfg.stretcher),
        "phi_wr": kwr * (_diff(cfg, "Lw") + _diff(cfg, "Lr")) + _q(cfg.waveplate),
    }


def lock_setpoints(cfg: PathConfig) -> LockState:
    """Set-points that the current lengths and actuator phases realize, wrapped to (-pi, pi]."""
    c = _lock_combinations(cfg)
    return LockState(wrap(c["phi_th"]), wrap(c["phi_woro"]), wrap(c["phi_wr"]))


def engage_locks(cfg: PathConfig, target: LockState) -> PathConfig:
    """Return ``cfg`` with the actuator phases the servos would settle at for ``target``."""
    free = replace(cfg, pzt=0.0, stretcher=0.0, waveplate=0.0)
    c = _lock_combinations(free)
    pzt = _q(target.phi_th) - c["phi_th"]
    stretcher = _q(target.phi_woro) - c["phi_woro"] - _q(wrap(pzt))
    waveplate = _q(target.phi_wr) - c["phi_wr"]
    return replace(free, pzt=wrap(pzt), stretcher=wrap(stretcher), waveplate=wrap(waveplate))


def lock_residuals(cfg: PathConfig, lock: LockState) -> dict[str, float]:
    c = _lock_combinations(cfg)
    return {k: wrap(c[k] - _q(getattr(lock, k))) for k in c}


def _field_phases(cfg: PathConfig) -> dict[str, Fraction]:
    q = lambda name: _q(getattr(cfg, name))  # noqa: E731
    w_a = q("Phi_w_A") - (q("k_w") * q("Lw_A") + q("k_wo") * q("Lwo_A")) + q("stretcher")
    w_b = q("Phi_w_B") - (q("k_w") * q("Lw_B") + q("k_wo") * q("Lwo_B"))
    r_a = q("Phi_r_A") - q("k_r") * q("Lr_A") - q("k_ro") * q("Lro_A")
    r_b = q("Phi_r_B") - q("k_r") * q("Lr_B") - q("k_ro") * q("Lro_B") - q("waveplate")
    return {
        "readout": (w_b + r_b) - (w_a + r_a),
        "thermal": -q("k_th") * (q("L_B") - q("L_A")),
    }


def final_phase(cfg: PathConfig, minus_herald: bool = False) -> float:
    """Relative phase of ``|VH>`` against ``|HV>`` after one photon is detected per node.

    Computed from the raw propagation phases, without assuming any lock.
    """
    ph = _field_phases(cfg)
    total = ph["readout"] - ph["thermal"]
    if minus_herald:
        return wrap(Fraction(wrap(total)) + Fraction(math.pi))
    return wrap(total)


def residual_phase(cfg: PathConfig, lock: LockState, minus_herald: bool = False, tol: float = LOCK_TOL) -> float:
    """Final two-photon phase, after checking that ``cfg`` satisfies ``lock``.

    Under exact locks and equal wave numbers this equals
    ``phi_th - phi_woro - phi_wr`` (plus the laser-phase differences between
    nodes), whatever the path lengths.
    """
    res = lock_residuals(cfg, lock)
    bad = {k: v for k, v in res.items() if abs(v) > tol}
    if bad:
        raise UnlockedError(bad)
    return final_phase(cfg, minus_herald)


def expected_phase(lock: LockState, minus_herald: bool = False) -> float:
    base = Fraction(lock.phi_th) - Fraction(lock.phi_woro) - Fraction(lock.phi_wr)
    return wrap(base + Fraction(math.pi)) if minus_herald else wrap(base)


_CHUNK = 1 << 16


def _drift_chunk(seed: int, index: int, n: int, sigmas: np.ndarray) -> tuple[float, float]:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))
    theta = rng.standard_normal((n, len(sigmas))) @ sigmas
    c = np.cos(theta)
    return float(c.sum()), float(np.dot(c, c))


def drift_vp(sigmas: Sequence[float], trials: int, seed: int = 0, workers: int = 1) -> tuple[float, float]:
    """Monte Carlo ``<cos(sum of independent Gaussian phase errors)>`` with its standard error.

    Trials are split into fixed chunks, each with its own counter-derived
    stream, so the estimate does not depend on ``workers``.
    """
    if trials <= 0:
        raise DomainError("trials must be positive")
    s = np.asarray(sigmas, dtype=float)
    if not np.all(np.isfinite(s)):
        raise DomainError("phase standard deviations must be finite")
    if not np.any(s):
        return 1.0, 0.0
    sizes = [min(_CHUNK, trials - i) for i in range(0, trials, _CHUNK)]
    jobs = [(seed, i, n, s) for i, n in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda a: _drift_chunk(*a), jobs))
    else:
        parts = [_drift_chunk(*a) for a in jobs]
    total = math.fsum(p[0] for p in parts)
    sq = math.fsum(p[1] for p in parts)
    mean = total / trials
    var = max(sq / trials - mean**2, 0.0)
    return mean, math.sqrt(var / trials)
