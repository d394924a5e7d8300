"""Truncated Fock-space density matrices, beam-splitter mixing and click detection.

Every mode is truncated at the same photon-number cutoff ``n_max``; a state on
``m`` modes is a dense ``(n_max+1)**m`` square matrix with the first mode as
the most significant index.

Two independent routes to the four coincidence probabilities live here:

* :func:`brute_force_coincidences` builds the 4-mode state, conjugates it with
  beam-splitter unitaries obtained from a matrix exponential and traces it
  against click projectors.
* :func:`coincidence_probs` contracts the two 2-mode states against closed-form
  binomial beam-splitter amplitudes, never forming the 4-mode operator.

Port convention: the 50/50 mixer with phase ``theta`` on modes ``(a, b)`` is
``U = exp(pi/4 * (e^{i theta} a^dag b - e^{-i theta} a b^dag))``.  A photon
entering mode ``a`` leaves in output ``a`` with amplitude ``1/sqrt(2)`` and in
output ``b`` with amplitude ``-e^{-i theta}/sqrt(2)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import factorial, sqrt
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import expm

from .errors import (
    CutoffMismatchError,
    InputError,
    InvalidStateError,
    StructureError,
    TruncationError,
    UndefinedVisibilityError,
)

DEFAULT_N_MAX = 4
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10

COINCIDENCE_KEYS = ("N13", "N14", "N23", "N24")


@dataclass(frozen=True, eq=False)
class FockState:
    """Density matrix on ``modes`` truncated bosonic modes."""

    data: np.ndarray
    n_max: int
    modes: int

    def __post_init__(self):
        if self.n_max < 1:
            raise InputError(f"n_max must be >= 1, got {self.n_max}")
        dim = (self.n_max + 1) ** self.modes
        if self.data.shape != (dim, dim):
            raise InputError(
                f"data has shape {self.data.shape}, expected {(dim, dim)} "
                f"for {self.modes} modes at n_max={self.n_max}"
            )

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def local_dim(self) -> int:
        return self.n_max + 1

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def validate(self) -> "FockState":
        """Check Hermiticity, unit trace and positivity; return ``self``."""
        herm = np.max(np.abs(self.data - self.data.conj().T))
        if herm > HERMITIAN_TOL:
            raise InvalidStateError(f"not Hermitian (max deviation {herm:.2e})")
        tr = self.trace()
        if abs(tr - 1) > TRACE_TOL:
            raise InvalidStateError(f"trace is {tr.real:.12g}, expected 1")
        lam = np.linalg.eigvalsh(self.data).min()
        if lam < -PSD_TOL:
            raise InvalidStateError(f"not positive semidefinite (eigenvalue {lam:.2e})")
        return self

    def tensor_view(self) -> np.ndarray:
        d = self.local_dim
        return self.data.reshape((d,) * (2 * self.modes))

    def diagonal(self) -> np.ndarray:
        """Populations as an ``(n_max+1,)*modes`` array."""
        return np.real(np.diagonal(self.data)).reshape((self.local_dim,) * self.modes)

    def element(self, ket: Sequence[int], bra: Sequence[int]) -> complex:
        return complex(self.data[basis_index(ket, self.n_max), basis_index(bra, self.n_max)])


def basis_index(occupation: Sequence[int], n_max: int) -> int:
    """Row index of the Fock basis vector ``|n_1 n_2 ...>``."""
    idx = 0
    for n in occupation:
        if not 0 <= n <= n_max:
            raise InputError(f"occupation {n} outside [0, {n_max}]")
        idx = idx * (n_max + 1) + n
    return idx


def from_matrix(data, n_max: int, modes: int, validate: bool = True) -> FockState:
    state = FockState(np.asarray(data, dtype=complex), n_max, modes)
    return state.validate() if validate else state


def fock_state(occupation: Sequence[int], n_max: int = DEFAULT_N_MAX) -> FockState:
    """Pure number state ``|n_1 ... n_m><n_1 ... n_m|``."""
    modes = len(occupation)
    dim = (n_max + 1) ** modes
    data = np.zeros((dim, dim), dtype=complex)
    i = basis_index(occupation, n_max)
    data[i, i] = 1.0
    return FockState(data, n_max, modes)


def vacuum(modes: int = 1, n_max: int = DEFAULT_N_MAX) -> FockState:
    return fock_state((0,) * modes, n_max)


def tensor(a: FockState, b: FockState) -> FockState:
    if a.n_max != b.n_max:
        raise CutoffMismatchError(f"cannot combine n_max={a.n_max} with n_max={b.n_max}")
    return FockState(np.kron(a.data, b.data), a.n_max, a.modes + b.modes)


def pad(state: FockState, n_max: int) -> FockState:
    """Embed a state into a larger per-mode cutoff."""
    if n_max < state.n_max:
        raise InputError(f"cannot pad from n_max={state.n_max} down to {n_max}")
    if n_max == state.n_max:
        return state
    d_old, d_new, m = state.local_dim, n_max + 1, state.modes
    out = np.zeros((d_new,) * (2 * m), dtype=complex)
    out[(slice(0, d_old),) * (2 * m)] = state.tensor_view()
    return FockState(out.reshape(d_new**m, d_new**m), n_max, m)


def permute_modes(state: FockState, order: Sequence[int]) -> FockState:
    """Reorder modes so that new mode ``k`` is old mode ``order[k]``."""
    m = state.modes
    if sorted(order) != list(range(m)):
        raise InputError(f"{order!r} is not a permutation of {m} modes")
    axes = list(order) + [m + k for k in order]
    t = np.transpose(state.tensor_view(), axes)
    return FockState(np.ascontiguousarray(t).reshape(state.dim, state.dim), state.n_max, m)


def partial_trace(state: FockState, keep: Sequence[int]) -> FockState:
    m, d = state.modes, state.local_dim
    keep = list(keep)
    drop = [k for k in range(m) if k not in keep]
    t = state.tensor_view()
    letters = "abcdefghijklmnopqrstuvwxyz"
    ket = list(letters[:m])
    bra = list(letters[m : 2 * m])
    for k in drop:
        bra[k] = ket[k]
    out = "".join(ket[k] for k in keep) + "".join(bra[k] for k in keep)
    reduced = np.einsum("".join(ket) + "".join(bra) + "->" + out, t)
    dk = d ** len(keep)
    return FockState(reduced.reshape(dk, dk), state.n_max, len(keep))


def photon_distribution(state: FockState, mode: int = 0) -> np.ndarray:
    """Marginal photon-number distribution of one mode."""
    return np.real(np.diagonal(partial_trace(state, [mode]).data)).copy()


def annihilation(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1)


def beamsplitter_unitary(n_max: int, phase: float = 0.0) -> np.ndarray:
    """Two-mode 50/50 mixing unitary on the truncated space, via ``expm``.

    The generator conserves total photon number, so the result is exact on
    every sector with ``n_a + n_b <= n_max``.
    """
    a = annihilation(n_max)
    eye = np.eye(n_max + 1)
    a1 = np.kron(a, eye)
    a2 = np.kron(eye, a)
    gen = np.exp(1j * phase) * a1.conj().T @ a2
    gen = gen - gen.conj().T
    return expm((np.pi / 4) * gen)


def _apply_two_mode(state: FockState, op: np.ndarray, i: int, j: int) -> FockState:
    m, d = state.modes, state.local_dim
    op_t = op.reshape(d, d, d, d)
    t = state.tensor_view()
    # ket side: contract op's input indices with modes i, j
    t = np.tensordot(op_t, t, axes=([2, 3], [i, j]))
    t = np.moveaxis(t, [0, 1], [i, j])
    # bra side: multiply by op^dagger from the right
    t = np.tensordot(t, op_t.conj(), axes=([m + i, m + j], [2, 3]))
    t = np.moveaxis(t, [2 * m - 2, 2 * m - 1], [m + i, m + j])
    return FockState(t.reshape(state.dim, state.dim), state.n_max, m)


def mix_at_node(state: FockState, node_pair: tuple[int, int], phase: float = 0.0) -> FockState:
    """Interfere two modes on a balanced mixer with relative phase ``phase``.

    Output mode ``node_pair[0]`` feeds the first detector of the node and
    ``node_pair[1]`` the second.  Raises :class:`TruncationError` if the pair
    carries population with more than ``n_max`` photons in total, since those
    sectors cannot be represented after mixing.
    """
    i, j = node_pair
    if i == j or not (0 <= i < state.modes and 0 <= j < state.modes):
        raise InputError(f"invalid mode pair {node_pair} for a {state.modes}-mode state")
    pops = state.diagonal()
    n = np.arange(state.local_dim)
    shape = [1] * state.modes
    shape_i, shape_j = list(shape), list(shape)
    shape_i[i] = shape_j[j] = state.local_dim
    total = n.reshape(shape_i) + n.reshape(shape_j)
    overflow = float(np.sum(np.where(total > state.n_max, pops, 0.0)))
    if overflow > 1e-12:
        raise TruncationError(
            f"{overflow:.3e} population in modes {node_pair} exceeds n_max={state.n_max} "
            "after mixing; pad the state to a larger cutoff"
        )
    return _apply_two_mode(state, beamsplitter_unitary(state.n_max, phase), i, j)


def attenuate(state: FockState, eta: float, mode: int) -> FockState:
    """Pure-loss channel with transmission ``eta`` on one mode (Kraus form)."""
    if not 0.0 <= eta <= 1.0:
        raise InputError(f"transmission must lie in [0, 1], got {eta}")
    d, m = state.local_dim, state.modes
    out = np.zeros_like(state.tensor_view())
    t = state.tensor_view()
    for k in range(d):
        kraus = np.zeros((d, d))
        for n in range(k, d):
            kraus[n - k, n] = sqrt(_binom(n, k) * eta ** (n - k) * (1 - eta) ** k)
        s = np.tensordot(kraus, t, axes=([1], [mode]))
        s = np.moveaxis(s, 0, mode)
        s = np.tensordot(s, kraus, axes=([m + mode], [1]))
        s = np.moveaxis(s, -1, m + mode)
        out += s
    return FockState(out.reshape(state.dim, state.dim), state.n_max, m)


def _binom(n: int, k: int) -> float:
    return factorial(n) / (factorial(k) * factorial(n - k))


@dataclass(frozen=True)
class DetectionPattern:
    """Click / no-click outcome for each detector; detectors are numbered from 1."""

    clicks: tuple[bool, ...]

    @classmethod
    def coincidence(cls, first: int, second: int, detectors: int = 4) -> "DetectionPattern":
        """Clicks at exactly the two named detectors, e.g. ``coincidence(1, 3)``."""
        for k in (first, second):
            if not 1 <= k <= detectors:
                raise InputError(f"detector {k} outside 1..{detectors}")
        return cls(tuple(k in (first, second) for k in range(1, detectors + 1)))

    @classmethod
    def from_label(cls, label: str) -> "DetectionPattern":
        """``"N13"`` or ``"13"`` -> clicks at detectors 1 and 3."""
        digits = label.lstrip("N")
        return cls.coincidence(int(digits[0]), int(digits[1]))

    @property
    def is_gjc_event(self) -> bool:
        """One click per node: detectors (1|2) and (3|4)."""
        c = self.clicks
        return len(c) == 4 and (c[0] != c[1]) and (c[2] != c[3])


def all_patterns(detectors: int = 4) -> list[DetectionPattern]:
    return [DetectionPattern(c) for c in itertools.product((False, True), repeat=detectors)]


def projector_diagonal(pattern: DetectionPattern, n_max: int) -> np.ndarray:
    """Diagonal of the click projector: ``(I-|0><0|)`` per click, ``|0><0|`` otherwise."""
    diag = np.ones(1)
    for click in pattern.clicks:
        local = np.ones(n_max + 1)
        if click:
            local[0] = 0.0
        else:
            local[1:] = 0.0
        diag = np.kron(diag, local)
    return diag


def detection_projector(pattern: DetectionPattern, n_max: int = DEFAULT_N_MAX) -> np.ndarray:
    return np.diag(projector_diagonal(pattern, n_max))


def detection_probability(state: FockState, pattern: DetectionPattern) -> float:
    if len(pattern.clicks) != state.modes:
        raise InputError(f"pattern has {len(pattern.clicks)} detectors, state has {state.modes} modes")
    return float(np.real(np.dot(np.diagonal(state.data), projector_diagonal(pattern, state.n_max))))


def _check_pair(rho_e: FockState, rho_s: FockState) -> None:
    for name, s in (("ancilla", rho_e), ("signal", rho_s)):
        if s.modes != 2:
            raise InputError(f"{name} state must have 2 modes, got {s.modes}")
    if rho_e.n_max != rho_s.n_max:
        raise CutoffMismatchError(f"ancilla n_max={rho_e.n_max} != signal n_max={rho_s.n_max}")


def detector_state(
    rho_e: FockState, rho_s: FockState, node_phases: tuple[float, float] = (0.0, 0.0)
) -> FockState:
    """Four-mode state at detectors 1..4 after mixing at both nodes.

    Modes of ``rho_e`` and ``rho_s`` are ordered (node A, node B).  Node A mixes
    ancilla mode A with signal mode A into detectors 1, 2; node B likewise into
    detectors 3, 4.
    """
    _check_pair(rho_e, rho_s)
    joint = tensor(rho_e, rho_s)  # (E_A, E_B, S_A, S_B)
    joint = permute_modes(joint, (0, 2, 1, 3))  # (E_A, S_A, E_B, S_B)
    joint = mix_at_node(joint, (0, 1), node_phases[0])
    return mix_at_node(joint, (2, 3), node_phases[1])


def brute_force_coincidences(
    rho_e: FockState, rho_s: FockState, node_phases: tuple[float, float] = (0.0, 0.0)
) -> dict[str, float]:
    """Coincidence probabilities from the explicit 4-mode Schroedinger picture."""
    out = detector_state(rho_e, rho_s, node_phases)
    return {k: detection_probability(out, DetectionPattern.from_label(k)) for k in COINCIDENCE_KEYS}


def _node_povm(n_max: int, phase: float, port: int) -> np.ndarray:
    """Heisenberg-picture click operator for one node on the 2-mode input space.

    The mixer is built at cutoff ``2*n_max`` so every input sector is exact.
    """
    big = 2 * n_max
    u = beamsplitter_unitary(big, phase)
    d_big = big + 1
    proj = np.zeros((d_big, d_big))
    if port == 1:
        proj[1:, 0] = 1.0
    else:
        proj[0, 1:] = 1.0
    out_op = u.conj().T @ np.diag(proj.ravel()) @ u
    keep = [a * d_big + c for a in range(n_max + 1) for c in range(n_max + 1)]
    return out_op[np.ix_(keep, keep)]


def heisenberg_coincidences(
    rho_e: FockState, rho_s: FockState, node_phases: tuple[float, float] = (0.0, 0.0)
) -> dict[str, float]:
    """Brute-force coincidences with node operators pulled back onto the inputs.

    Unlike :func:`brute_force_coincidences` this handles states whose support
    reaches the cutoff in every mode.
    """
    _check_pair(rho_e, rho_s)
    n = rho_e.n_max
    joint = permute_modes(tensor(rho_e, rho_s), (0, 2, 1, 3))
    out = {}
    for key in COINCIDENCE_KEYS:
        pa, pb = int(key[1]), int(key[2]) - 2
        op = np.kron(_node_povm(n, node_phases[0], pa), _node_povm(n, node_phases[1], pb))
        out[key] = float(np.real(np.trace(joint.data @ op)))
    return out


def _port_amplitudes(n_max: int, phase: float, port: int) -> np.ndarray:
    """Closed-form ``<n,0|U|a,c>`` (port 1) or ``<0,n|U|a,c>`` (port 2), ``n=a+c``."""
    d = n_max + 1
    amp = np.zeros((d, d), dtype=complex)
    for a in range(d):
        for c in range(d):
            n = a + c
            mag = sqrt(factorial(n) / (factorial(a) * factorial(c))) * 2.0 ** (-n / 2)
            if port == 1:
                amp[a, c] = mag * np.exp(1j * c * phase)
            else:
                amp[a, c] = mag * (-np.exp(-1j * phase)) ** a
    return amp


def _node_kernel(n_max: int, phase: float, port: int) -> np.ndarray:
    """``K[a, c, a', c'] = amp(a,c) conj(amp(a',c'))`` on matching nonzero photon number."""
    d = n_max + 1
    amp = _port_amplitudes(n_max, phase, port)
    total = np.add.outer(np.arange(d), np.arange(d))
    same = (total[:, :, None, None] == total[None, None, :, :]) & (total[:, :, None, None] > 0)
    return np.einsum("ac,xz->acxz", amp, amp.conj()) * same


def coincidence_probs(
    rho_e: FockState, rho_s: FockState, node_phases: tuple[float, float] = (0.0, 0.0)
) -> dict[str, float]:
    """Exact coincidence probabilities ``N13, N14, N23, N24`` in closed form.

    ``N_kl = sum rho_E[ab, a'b'] rho_S[ce, c'e'] K_A^k[a,c,a',c'] K_B^l[b,e,b',e']``
    where ``K`` are products of binomial mixer amplitudes.  To leading order in
    the excitation probabilities this reduces to
    :func:`coincidence_probs_leading`.
    """
    _check_pair(rho_e, rho_s)
    n = rho_e.n_max
    re, rs = rho_e.tensor_view(), rho_s.tensor_view()
    kernels = {
        (node, port): _node_kernel(n, node_phases[node], port) for node in (0, 1) for port in (1, 2)
    }
    out = {}
    for key in COINCIDENCE_KEYS:
        ka = kernels[(0, int(key[1]))]
        kb = kernels[(1, int(key[2]) - 2)]
        val = np.einsum("abpq,cers,acpr,beqs->", re, rs, ka, kb, optimize=True)
        out[key] = float(np.real(val))
    return out


def coincidence_probs_leading(
    p_e: Sequence[float],
    p_s: Sequence[float],
    d: float,
    g: float,
    psi: float,
    phi: float,
) -> dict[str, float]:
    """Two-photon-order coincidence probabilities.

    ``p_e = (P_E(0), P_E(1), P_E(2))`` with ``P(1)`` the single-photon
    probability per mode and ``P(2)`` the probability of one photon in each
    mode; ``d`` and ``g`` are the normalized coherences.  Exact when neither
    state has weight in the two-photon sector.
    """
    base = p_e[2] * p_s[0] + p_e[0] * p_s[2] + 2 * p_e[1] * p_s[1]
    fringe = 2 * p_e[1] * p_s[1] * d * g * np.cos(psi - phi)
    plus, minus = (base + fringe) / 4, (base - fringe) / 4
    return {"N13": plus, "N24": plus, "N14": minus, "N23": minus}


def visibility_from_counts(counts: Mapping[str, float]) -> float:
    """``(N13 + N24 - N14 - N23) / (N13 + N24 + N14 + N23)``."""
    try:
        n13, n14, n23, n24 = (float(counts[k]) for k in COINCIDENCE_KEYS)
    except KeyError as exc:
        raise InputError(f"missing coincidence count {exc}") from None
    if min(n13, n14, n23, n24) < 0:
        raise InputError("coincidence counts must be nonnegative")
    total = n13 + n24 + n14 + n23
    if total == 0:
        raise UndefinedVisibilityError("all coincidence counts are zero")
    return (n13 + n24 - n14 - n23) / total


def concurrence_x_state(state: FockState, tol: float = 1e-9) -> float:
    """Concurrence ``2 max(0, |d| - sqrt(p00 p11))`` of an X-structured 2-mode state."""
    if state.modes != 2:
        raise InputError("concurrence needs a 2-mode state")
    idx = [basis_index(o, state.n_max) for o in ((0, 0), (0, 1), (1, 0), (1, 1))]
    allowed = np.zeros((state.dim, state.dim), dtype=bool)
    for i in idx:
        allowed[i, i] = True
    allowed[idx[1], idx[2]] = allowed[idx[2], idx[1]] = True
    stray = float(np.sum(np.abs(state.data[~allowed])))
    if stray > tol:
        raise StructureError(f"state is not X-structured ({stray:.2e} off-pattern weight)")
    p00 = state.data[idx[0], idx[0]].real
    p11 = state.data[idx[3], idx[3]].real
    d = abs(state.data[idx[2], idx[1]])
    return 2.0 * max(0.0, d - sqrt(max(p00 * p11, 0.0)))
