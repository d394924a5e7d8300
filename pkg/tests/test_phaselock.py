import math
from dataclasses import replace
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from nonlocal_fringe.errors import DomainError, InputError, UnlockedError
from nonlocal_fringe.phaselock import (
    K_CONTROL,
    K_SIGNAL,
    LockState,
    PathConfig,
    drift_vp,
    engage_locks,
    expected_phase,
    final_phase,
    lock_residuals,
    lock_setpoints,
    residual_phase,
    wrap,
)
from nonlocal_fringe.visibility import v_p

LENGTHS = ("L_A", "L_B", "delta_A", "delta_B", "Lw_A", "Lw_B", "Lwo_A", "Lwo_B", "Lr_A", "Lr_B", "Lro_A", "Lro_B")


def random_config(rng, span=2e4):
    return PathConfig(**{k: float(rng.uniform(0, span)) for k in LENGTHS})


def random_lock(rng):
    return LockState(*rng.uniform(-math.pi, math.pi, 3))


def mp_wrap(x):
    with mpmath.workdps(50):
        two_pi = 2 * mpmath.pi
        r = mpmath.fmod(x, two_pi)
        if r > mpmath.pi:
            r -= two_pi
        elif r <= -mpmath.pi:
            r += two_pi
        return float(r)


def test_wrap():
    assert wrap(math.pi) == pytest.approx(math.pi)
    # the double nearest -pi lies just inside the interval
    assert wrap(-math.pi) == -math.pi
    assert wrap(Fraction(-355, 113)) == pytest.approx(-355 / 113 + 2 * math.pi, abs=1e-15)
    assert wrap(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    assert wrap(Fraction(10**12)) == pytest.approx(mp_wrap(mpmath.mpf(10**12)), abs=1e-15)


def test_symmetric_config():
    cfg = PathConfig(**{k: 7.0 for k in LENGTHS})
    lock = lock_setpoints(cfg)
    assert (lock.phi_th, lock.phi_woro, lock.phi_wr) == (0.0, 0.0, 0.0)
    assert residual_phase(cfg, lock) == 0.0


def test_thermal_setpoint_example():
    kp = 2 * math.pi / 1550e-9
    cfg = PathConfig(L_A=0.0, L_B=1.0, k_p=kp)
    with mpmath.workdps(50):
        oracle = mp_wrap(2 * mpmath.mpf(kp))
    assert lock_setpoints(cfg).phi_th == pytest.approx(oracle, abs=1e-12)


def test_wr_lock_depends_on_sum():
    cfg = PathConfig(Lw_A=1.0, Lw_B=2.0, Lr_A=3.0, Lr_B=4.0, k_w=K_CONTROL, k_r=K_CONTROL)
    shifted = replace(cfg, Lw_B=2.0 + 0.125, Lr_B=4.0 - 0.125)
    assert lock_setpoints(shifted).phi_wr == pytest.approx(lock_setpoints(cfg).phi_wr, abs=1e-12)


def test_engaged_locks_have_no_residual():
    rng = np.random.default_rng(0)
    cfg, lock = random_config(rng), random_lock(rng)
    locked = engage_locks(cfg, lock)
    assert all(abs(v) < 1e-12 for v in lock_residuals(locked, lock).values())
    with pytest.raises(UnlockedError) as exc:
        residual_phase(cfg, lock)
    assert set(exc.value.residuals) <= {"phi_th", "phi_woro", "phi_wr"}


def test_path_length_independence():
    rng = np.random.default_rng(1)
    for _ in range(200):
        cfg, lock = random_config(rng), random_lock(rng)
        phase = residual_phase(engage_locks(cfg, lock), lock)
        assert abs(wrap(phase - expected_phase(lock))) < 1e-12


def test_independent_of_perturbations_preserving_locks():
    rng = np.random.default_rng(2)
    lock = random_lock(rng)
    base = residual_phase(engage_locks(random_config(rng), lock), lock)
    for _ in range(50):
        cfg = random_config(rng)
        moved = {k: getattr(cfg, k) + rng.normal(0, 1e-3) for k in LENGTHS}
        moved = {k: abs(v) for k, v in moved.items()}
        phase = residual_phase(engage_locks(replace(cfg, **moved), lock), lock)
        assert abs(wrap(phase - base)) < 1e-12


def test_minus_herald_adds_pi():
    rng = np.random.default_rng(3)
    lock = random_lock(rng)
    cfg = engage_locks(random_config(rng), lock)
    plus, minus = residual_phase(cfg, lock), residual_phase(cfg, lock, minus_herald=True)
    assert abs(wrap(minus - plus - math.pi)) < 1e-12
    assert abs(wrap(expected_phase(lock, True) - minus)) < 1e-12


def test_laser_phases_shift_by_their_difference():
    rng = np.random.default_rng(4)
    lock = random_lock(rng)
    cfg = engage_locks(random_config(rng), lock)
    shifted = replace(cfg, Phi_w_A=0.3, Phi_w_B=1.0, Phi_r_A=-0.2, Phi_r_B=0.4)
    diff = (1.0 - 0.3) + (0.4 + 0.2)
    assert abs(wrap(final_phase(shifted) - final_phase(cfg) - diff)) < 1e-12
    shared = replace(cfg, Phi_w_A=0.7, Phi_w_B=0.7, Phi_r_A=-1.1, Phi_r_B=-1.1)
    assert abs(wrap(final_phase(shared) - final_phase(cfg))) < 1e-12


def test_wavenumber_detuning_is_reported():
    lock = LockState(0.1, 0.2, 0.3)
    cfg = PathConfig(Lwo_A=0.0, Lwo_B=1e4, k_wo=K_SIGNAL * (1 + 1e-6))
    assert cfg.wavenumber_deviations()["k_wo"] == pytest.approx(1e-6, rel=1e-6)
    locked = engage_locks(cfg, lock)
    drift = wrap(final_phase(locked) - expected_phase(lock))
    # first order: (k_p - k_wo) times the write-out path imbalance
    predicted = wrap(Fraction(K_SIGNAL) * Fraction(1e4) - Fraction(K_SIGNAL * (1 + 1e-6)) * Fraction(1e4))
    assert abs(wrap(drift - predicted)) < 1e-9
    assert abs(drift) > 1e-3


def test_path_config_validation():
    with pytest.raises(InputError):
        PathConfig(L_A=-1.0)
    with pytest.raises(InputError):
        PathConfig(k_th=0.0)
    with pytest.raises(InputError):
        LockState(math.nan, 0, 0)


# ---- phase drift


def test_drift_vp_zero():
    assert drift_vp([0, 0, 0], 1000) == (1.0, 0.0)


@pytest.mark.parametrize("sigmas", [(0.043, 0.063, 0.081), (0.209, 0.281, 0.081)])
def test_drift_vp_matches_analytic(sigmas):
    mean, se = drift_vp(sigmas, 1_000_000, seed=11)
    assert abs(mean - v_p(sigmas)) < 3 * se
    assert se < 5e-4


def test_drift_vp_converges_as_inverse_sqrt():
    s = (0.209, 0.281, 0.081)
    _, se_small = drift_vp(s, 10_000, seed=1)
    _, se_big = drift_vp(s, 1_000_000, seed=1)
    assert se_small / se_big == pytest.approx(10, rel=0.1)


def test_drift_vp_independent_of_workers():
    s = (0.1, 0.2, 0.3)
    assert drift_vp(s, 300_000, seed=5, workers=1) == drift_vp(s, 300_000, seed=5, workers=4)


def test_drift_vp_errors():
    with pytest.raises(DomainError):
        drift_vp([0.1], 0)
    with pytest.raises(DomainError):
        drift_vp([math.inf], 100)
