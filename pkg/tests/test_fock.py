import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _states import random_density, random_x_pair, x_state
from nonlocal_fringe.errors import (
    CutoffMismatchError,
    InputError,
    InvalidStateError,
    StructureError,
    TruncationError,
    UndefinedVisibilityError,
)
from nonlocal_fringe.fock import (
    COINCIDENCE_KEYS,
    DetectionPattern,
    FockState,
    all_patterns,
    attenuate,
    basis_index,
    brute_force_coincidences,
    coincidence_probs,
    coincidence_probs_leading,
    concurrence_x_state,
    detection_probability,
    detection_projector,
    fock_state,
    from_matrix,
    heisenberg_coincidences,
    mix_at_node,
    pad,
    partial_trace,
    permute_modes,
    photon_distribution,
    tensor,
    vacuum,
    visibility_from_counts,
)
from nonlocal_fringe.sources import EntangledAncilla, build_ancilla_state, build_signal_state, leading_order_params


def test_state_validation():
    with pytest.raises(InvalidStateError):
        from_matrix(np.diag([0.5, 0.4]), 1, 1)
    with pytest.raises(InvalidStateError):
        from_matrix(np.diag([1.2, -0.2]), 1, 1)
    with pytest.raises(InvalidStateError):
        from_matrix([[0.5, 0.5j], [0.5j, 0.5]], 1, 1)
    with pytest.raises(InputError):
        FockState(np.eye(3), 1, 1)


def test_basis_index_order():
    assert basis_index((0, 0), 4) == 0
    assert basis_index((0, 1), 4) == 1
    assert basis_index((1, 0), 4) == 5
    with pytest.raises(InputError):
        basis_index((5, 0), 4)


# ---- tensor


def test_tensor_vacuum():
    v = tensor(vacuum(2), vacuum(2))
    assert v.modes == 4
    assert v.data[0, 0] == 1 and abs(v.trace() - 1) < 1e-15
    assert np.count_nonzero(v.data) == 1


def test_tensor_trace_multiplies():
    rng = np.random.default_rng(1)
    a, b = random_density(rng, 2), random_density(rng, 2)
    assert abs(tensor(a, b).trace() - 1) < 1e-12
    tensor(a, b).validate()


def test_tensor_n_max_1_diagonal_is_outer_product():
    rng = np.random.default_rng(2)
    a, b = random_density(rng, 1, weight=1.0), random_density(rng, 1, weight=1.0)
    da, db = np.real(np.diag(a.data)), np.real(np.diag(b.data))
    expected = [da[i] * db[j] for i in range(4) for j in range(4)]
    t = tensor(a, b)
    assert t.data.shape == (16, 16)
    assert np.allclose(np.real(np.diag(t.data)), expected, atol=1e-15)


def test_tensor_cutoff_mismatch():
    with pytest.raises(CutoffMismatchError):
        tensor(vacuum(2, 3), vacuum(2, 4))


# ---- plumbing


def test_pad_permute_partial_trace():
    rng = np.random.default_rng(3)
    rho = random_density(rng, 2)
    big = pad(rho, 4)
    assert big.n_max == 4 and abs(big.trace() - 1) < 1e-12
    assert big.element((1, 2), (2, 1)) == rho.element((1, 2), (2, 1))
    swapped = permute_modes(rho, (1, 0))
    assert swapped.element((0, 2), (1, 1)) == rho.element((2, 0), (1, 1))
    joint = tensor(rho, random_density(rng, 2))
    assert np.allclose(partial_trace(joint, [0, 1]).data, rho.data, atol=1e-14)
    with pytest.raises(InputError):
        pad(rho, 1)
    with pytest.raises(InputError):
        permute_modes(rho, (0, 0))


def test_attenuation_binomial_thinning():
    state = fock_state((2,), 3)
    out = photon_distribution(attenuate(state, 0.3, 0))
    assert np.allclose(out[:3], [0.49, 0.42, 0.09], atol=1e-14)
    assert np.allclose(attenuate(state, 1.0, 0).data, state.data)
    with pytest.raises(InputError):
        attenuate(state, 1.5, 0)


# ---- mixing


def test_mix_vacuum():
    v = vacuum(4, 2)
    assert np.allclose(mix_at_node(v, (0, 1), 0.3).data, v.data)


def test_mix_single_photon_splits_evenly():
    out = mix_at_node(fock_state((1, 0), 2), (0, 1), 0.0)
    assert np.allclose(photon_distribution(out, 0)[:2], [0.5, 0.5], atol=1e-14)
    assert np.allclose(photon_distribution(out, 1)[:2], [0.5, 0.5], atol=1e-14)


def test_hong_ou_mandel_suppression():
    out = mix_at_node(fock_state((1, 1), 2), (0, 1), 0.0)
    assert abs(detection_probability(out, DetectionPattern((True, True)))) < 1e-14
    assert out.element((2, 0), (2, 0)).real == pytest.approx(0.5, abs=1e-14)


def test_mix_is_unitary_conjugation():
    rng = np.random.default_rng(4)
    rho = random_density(rng, 4, modes=2, support=2)
    out = mix_at_node(rho, (0, 1), 1.1)
    assert abs(out.trace() - 1) < 1e-10
    assert np.allclose(np.linalg.eigvalsh(out.data), np.linalg.eigvalsh(rho.data), atol=1e-10)


def test_mix_errors():
    with pytest.raises(InputError):
        mix_at_node(vacuum(4, 2), (1, 1))
    with pytest.raises(InputError):
        mix_at_node(vacuum(4, 2), (0, 4))
    with pytest.raises(TruncationError):
        mix_at_node(fock_state((2, 1), 2), (0, 1))


# ---- projectors


def test_projector_no_click_is_vacuum():
    p = detection_projector(DetectionPattern((False,) * 4), 2)
    assert p[0, 0] == 1 and p.sum() == 1


def test_projector_13_at_n_max_1():
    p = detection_projector(DetectionPattern.from_label("N13"), 1)
    assert np.linalg.matrix_rank(p) == 1
    assert p[basis_index((1, 0, 1, 0), 1), basis_index((1, 0, 1, 0), 1)] == 1


def test_projectors_complete_idempotent_orthogonal():
    ps = [detection_projector(p, 2) for p in all_patterns()]
    assert len(ps) == 16
    assert np.allclose(sum(ps), np.eye(81))
    for a, b in itertools.combinations(ps, 2):
        assert np.max(np.abs(a @ b)) < 1e-12
    for a in ps:
        assert np.max(np.abs(a @ a - a)) < 1e-12


def test_gjc_events():
    gjc = [p for p in all_patterns() if p.is_gjc_event]
    assert sorted(gjc, key=str) == sorted((DetectionPattern.from_label(k) for k in COINCIDENCE_KEYS), key=str)


# ---- coincidences


def test_no_coherence_no_fringe():
    rho = x_state(0.8, 0.1, 0.0, 0.0)
    n = coincidence_probs(rho, rho)
    assert max(n.values()) - min(n.values()) < 1e-15


def test_single_photon_full_coherence_counts():
    (re, pe), (rs, ps) = [(x_state(1 - 2 * p, p, 1.0, 0.4), p) for p in (0.2, 0.05)]
    n = coincidence_probs(re, rs)
    assert n["N13"] == pytest.approx(pe * ps, abs=1e-12)
    assert n["N24"] == pytest.approx(pe * ps, abs=1e-12)
    assert n["N14"] == pytest.approx(0.0, abs=1e-12)
    assert visibility_from_counts(n) == pytest.approx(1.0, abs=1e-12)
    lead = coincidence_probs_leading((1 - 2 * pe, pe, 0), (1 - 2 * ps, ps, 0), 1, 1, 0.4, 0.4)
    assert lead["N13"] == pytest.approx(pe * ps) and lead["N14"] == 0


def test_random_states_match_brute_force_n_max_3():
    rng = np.random.default_rng(5)
    for _ in range(5):
        re = random_density(rng, 3)
        rs = random_density(rng, 3)
        exact = coincidence_probs(re, rs)
        brute = brute_force_coincidences(pad(re, 6), pad(rs, 6))
        for k in COINCIDENCE_KEYS:
            assert exact[k] == pytest.approx(brute[k], abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-np.pi, np.pi), st.floats(-np.pi, np.pi))
def test_three_routes_agree(seed, pa, pb):
    rng = np.random.default_rng(seed)
    re = random_density(rng, 4, support=2)
    rs = random_density(rng, 4, support=2)
    a = coincidence_probs(re, rs, (pa, pb))
    b = brute_force_coincidences(re, rs, (pa, pb))
    c = heisenberg_coincidences(re, rs, (pa, pb))
    for k in COINCIDENCE_KEYS:
        assert a[k] == pytest.approx(b[k], abs=1e-12)
        assert a[k] == pytest.approx(c[k], abs=1e-12)


def test_full_support_heisenberg_route():
    rng = np.random.default_rng(6)
    re, rs = random_density(rng, 4, weight=0.8), random_density(rng, 4, weight=0.8)
    a, c = coincidence_probs(re, rs), heisenberg_coincidences(re, rs)
    assert all(abs(a[k] - c[k]) < 1e-12 for k in COINCIDENCE_KEYS)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_leading_order_exact_on_single_photon_x_states(seed):
    rng = np.random.default_rng(seed)
    (re, pe), (rs, ps) = random_x_pair(rng)
    (_, _, _), d, psi = leading_order_params(re)
    (_, _, _), g, phi = leading_order_params(rs)
    lead = coincidence_probs_leading((1 - 2 * pe, pe, 0), (1 - 2 * ps, ps, 0), d, g, psi, phi)
    exact = coincidence_probs(re, rs)
    for k in COINCIDENCE_KEYS:
        assert lead[k] == pytest.approx(exact[k], abs=1e-12)


def test_leading_order_error_is_third_order():
    def rel_err(s):
        re = build_ancilla_state(EntangledAncilla.from_retrieval(0.2 * s, 0.5))
        rs = build_signal_state(0.02 * s, 0.8, 0.3)
        pe, d, psi = leading_order_params(re)
        ps, g, phi = leading_order_params(rs)
        lead = coincidence_probs_leading(pe, ps, d, g, psi, phi)
        exact = coincidence_probs(re, rs)
        return max(abs(lead[k] - exact[k]) / exact[k] for k in COINCIDENCE_KEYS)

    e1, e2 = rel_err(1.0), rel_err(0.5)
    # relative error of a second-order quantity falls linearly with the excitation
    assert 1.8 < e1 / e2 < 2.2
    assert e1 < 0.05


def test_fringe_is_even_in_psi_minus_phi():
    for psi, phi in ((0.7, -0.2), (2.5, 1.0)):
        a = coincidence_probs(x_state(0.7, 0.15, 0.9, psi), x_state(0.9, 0.05, 0.6, phi))
        b = coincidence_probs(x_state(0.7, 0.15, 0.9, phi), x_state(0.9, 0.05, 0.6, psi))
        assert all(abs(a[k] - b[k]) < 1e-15 for k in COINCIDENCE_KEYS)


def test_swapping_detectors_negates_visibility():
    counts = {"N13": 5.0, "N14": 2.0, "N23": 1.0, "N24": 4.0}
    swapped = {"N13": counts["N23"], "N14": counts["N24"], "N23": counts["N13"], "N24": counts["N14"]}
    assert visibility_from_counts(swapped) == pytest.approx(-visibility_from_counts(counts))


def test_visibility_from_counts_examples():
    assert visibility_from_counts(dict(N13=1, N14=1, N23=1, N24=1)) == 0
    assert visibility_from_counts(dict(N13=2, N14=0, N23=0, N24=2)) == 1
    with pytest.raises(UndefinedVisibilityError):
        visibility_from_counts(dict(N13=0, N14=0, N23=0, N24=0))
    with pytest.raises(InputError):
        visibility_from_counts(dict(N13=-1, N14=1, N23=1, N24=1))


def test_cutoff_mismatch_in_coincidences():
    with pytest.raises(CutoffMismatchError):
        coincidence_probs(vacuum(2, 3), vacuum(2, 4))


# ---- concurrence


def test_concurrence_examples():
    assert concurrence_x_state(x_state(0.0, 0.5, 1.0, 0.0, n_max=1)) == pytest.approx(1.0)
    assert concurrence_x_state(x_state(0.8, 0.1, 0.0, 0.0, n_max=1)) == 0
    assert concurrence_x_state(x_state(0.9, 0.045, 0.04 / 0.045, 0.0, n_max=1, p11=0.01)) == 0


def test_concurrence_rejects_non_x_state():
    rng = np.random.default_rng(8)
    with pytest.raises(StructureError):
        concurrence_x_state(random_density(rng, 1, weight=1.0))
