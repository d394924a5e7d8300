"""Monte Carlo twin of the experiment: thermal time-tag streams and heralded fringe scans."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import brentq, curve_fit
from scipy.signal import fftconvolve

from . import kernels
from .errors import (
    DomainError,
    FitError,
    InputError,
    InsufficientDurationError,
    StreamFormatError,
)
from .fock import COINCIDENCE_KEYS, DEFAULT_N_MAX, FockState, attenuate, coincidence_probs
from .sources import (
    CoherenceModel,
    EntangledAncilla,
    build_ancilla_state,
    build_signal_state,
    leading_order_params,
    signal_mean_for_ratio,
)
from .visibility import full_visibility, v_p, v_snr

HERALD_CHANNEL = 0


def _rng(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


# ---------------------------------------------------------------- event streams


@dataclass(frozen=True, eq=False)
class EventStream:
    """Sorted detection timestamps (ns) per channel; channel 0 is the herald."""

    channels: Mapping[int, np.ndarray]
    duration_ns: int

    def __post_init__(self):
        if self.duration_ns <= 0:
            raise DomainError("stream duration must be positive")
        for ch, t in self.channels.items():
            if t.size and (np.any(np.diff(t) < 0) or t[0] < 0 or t[-1] > self.duration_ns):
                raise InputError(f"channel {ch}: timestamps must be sorted and inside [0, duration]")

    def events(self, channel: int) -> np.ndarray:
        return self.channels.get(channel, np.empty(0))

    @property
    def total(self) -> int:
        return sum(len(t) for t in self.channels.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStream) or self.duration_ns != other.duration_ns:
            return False
        keys = {k for k, v in self.channels.items() if v.size} | {k for k, v in other.channels.items() if v.size}
        return all(np.array_equal(self.events(k), other.events(k)) for k in keys)

    def write(self, path) -> None:
        chans = [np.full(len(t), ch, dtype=np.int64) for ch, t in sorted(self.channels.items())]
        times = [t for _, t in sorted(self.channels.items())]
        ch = np.concatenate(chans) if chans else np.empty(0, np.int64)
        ts = np.concatenate(times) if times else np.empty(0)
        order = np.lexsort((ch, ts))
        with open(path, "w", newline="\n") as fh:
            fh.write(f"# duration_ns={self.duration_ns}\n")
            for c, t in zip(ch[order].tolist(), ts[order].tolist()):
                fh.write(f"{c}\t{t!r}\n")

    @classmethod
    def read(cls, path) -> "EventStream":
        lines = Path(path).read_text().splitlines()
        if not lines or not lines[0].startswith("# duration_ns="):
            raise StreamFormatError(1, lines[0] if lines else "", "expected '# duration_ns=<int>' header")
        try:
            duration = int(lines[0].split("=", 1)[1])
        except ValueError:
            raise StreamFormatError(1, lines[0], "duration is not an integer") from None
        buckets: dict[int, list[float]] = {}
        for no, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise StreamFormatError(no, line, "expected 'channel<TAB>timestamp_ns'")
            try:
                ch, t = int(parts[0]), float(parts[1])
            except ValueError:
                raise StreamFormatError(no, line, "unparsable channel or timestamp") from None
            if not 0 <= t <= duration:
                raise StreamFormatError(no, line, "timestamp outside [0, duration]")
            buckets.setdefault(ch, []).append(t)
        return cls({ch: np.sort(np.asarray(v)) for ch, v in buckets.items()}, duration)


def _gaussian_field(noise: np.ndarray, dt: float, tau_c: float) -> np.ndarray:
    # |g1| = exp(-b tau^2) needs a kernel exp(-2 b t^2); b from the tau_c convention
    b = math.pi / (4 * tau_c**2)
    half = int(math.ceil(3.5 / math.sqrt(b) / dt))
    t = np.arange(-half, half + 1) * dt
    h = np.exp(-2 * b * t**2)
    h /= np.sqrt(np.sum(h**2))
    return fftconvolve(noise, h, mode="valid")


def simulate_thermal_stream(
    rate: float,
    model: CoherenceModel,
    duration_ns: float,
    seed: int = 0,
    dt: float | None = None,
    channels: Sequence[int] = (1, 2),
) -> EventStream:
    """Chaotic light split onto detectors: a Cox process driven by a complex Gaussian field.

    ``rate`` is the mean detection rate per channel (counts/ns).  The field has
    unit mean intensity and autocorrelation ``g1`` of ``model`` on a grid of
    step ``dt`` (default ``tau_c / 20``).
    """
    if duration_ns < 10 * model.tau_c:
        raise InsufficientDurationError(
            f"duration {duration_ns} ns is shorter than 10 coherence times ({10 * model.tau_c} ns)"
        )
    if rate < 0:
        raise DomainError("rate must be nonnegative")
    dt = model.tau_c / 20 if dt is None else dt
    if not 0 < dt <= model.tau_c / 20:
        raise DomainError("grid step must lie in (0, tau_c/20]")
    duration = int(round(duration_ns))
    if rate == 0:
        return EventStream({ch: np.empty(0) for ch in channels}, duration)

    n = int(math.ceil(duration / dt))
    rng = _rng(seed, 0)
    if model.form == "exponential":
        w = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2)
        e = kernels.ar1_field(w, math.exp(-dt / model.tau_c))
    else:
        pad = int(math.ceil(3.5 * 2 / math.sqrt(math.pi) * model.tau_c / dt))
        w = (rng.standard_normal(n + 2 * pad) + 1j * rng.standard_normal(n + 2 * pad)) / math.sqrt(2)
        e = _gaussian_field(w, dt, model.tau_c)[:n]
    lam = rate * dt * (e.real**2 + e.imag**2)

    out = {}
    for i, ch in enumerate(channels):
        r = _rng(seed, 1 + i)
        k = r.poisson(lam)
        cells = np.repeat(np.arange(n), k)
        t = (cells + r.random(cells.size)) * dt
        out[ch] = np.sort(t[t <= duration])
    return EventStream(out, duration)


def simulate_poisson_stream(
    rate: float, duration_ns: float, seed: int = 0, channels: Sequence[int] = (1, 2)
) -> EventStream:
    """Coherent light: independent homogeneous Poisson processes."""
    if rate < 0:
        raise DomainError("rate must be nonnegative")
    duration = int(round(duration_ns))
    out = {}
    for i, ch in enumerate(channels):
        r = _rng(seed, 1 + i)
        out[ch] = np.sort(r.uniform(0, duration, r.poisson(rate * duration)))
    return EventStream(out, duration)


@dataclass(frozen=True, eq=False)
class G2Curve:
    tau_ns: np.ndarray
    g2: np.ndarray
    counts: np.ndarray
    stderr: np.ndarray

    def at_zero(self) -> float:
        return float(self.g2[np.argmin(np.abs(self.tau_ns))])


def estimate_g2(
    stream: EventStream, bin_ns: float = 2.5, tau_max: float = 100.0, channels: tuple[int, int] = (1, 2)
) -> G2Curve:
    """Cross-correlation g2 from start-multistop delays, normalized to uncorrelated light.

    Bins are centred on multiples of ``bin_ns`` so the zero-delay bin exists.
    """
    if bin_ns <= 0 or tau_max <= 0:
        raise DomainError("bin width and tau_max must be positive")
    t1, t2 = stream.events(channels[0]), stream.events(channels[1])
    if t1.size == 0 or t2.size == 0:
        raise DomainError("cannot estimate g2 from an empty channel")
    m = int(round(tau_max / bin_ns))
    half = (m + 0.5) * bin_ns
    counts = kernels.pair_histogram(
        np.ascontiguousarray(t1, dtype=float), np.ascontiguousarray(t2, dtype=float), half, bin_ns
    )
    tau = (np.arange(counts.size) - m) * bin_ns
    T = float(stream.duration_ns)
    expected = t1.size * t2.size * bin_ns * (T - np.abs(tau)) / T**2
    g2 = counts / expected
    return G2Curve(tau, g2, counts, np.sqrt(np.maximum(counts, 1)) / expected)


def windowed_g2_stream(
    stream: EventStream, widths: Sequence[float], channels: tuple[int, int] = (1, 2)
) -> np.ndarray:
    """``<n1 n2> / (<n1><n2>)`` with counts taken in consecutive windows of each width."""
    t1, t2 = stream.events(channels[0]), stream.events(channels[1])
    if t1.size == 0 or t2.size == 0:
        raise DomainError("cannot estimate g2 from an empty channel")
    out = []
    for w in widths:
        if w <= 0:
            raise DomainError("window width must be positive")
        nb = int(stream.duration_ns // w)
        if nb < 1:
            raise InsufficientDurationError(f"window {w} ns longer than the stream")
        n1 = np.bincount((t1 // w).astype(np.int64), minlength=nb + 1)[:nb].astype(float)
        n2 = np.bincount((t2 // w).astype(np.int64), minlength=nb + 1)[:nb].astype(float)
        out.append(np.mean(n1 * n2) / (np.mean(n1) * np.mean(n2)))
    return np.asarray(out)


def fit_coherence_time(curve: G2Curve, form: str = "gaussian", guess: float = 10.0) -> tuple[float, float]:
    """Least-squares ``tau_c`` (and its standard error) from ``g2 = 1 + A |g1(tau)|^2``."""

    def model(tau, amp, tau_c):
        return 1 + amp * np.square(CoherenceModel(form, abs(tau_c) + 1e-12).g1(tau))

    popt, pcov = curve_fit(model, curve.tau_ns, curve.g2, p0=(1.0, guess), sigma=curve.stderr, absolute_sigma=True)
    return abs(float(popt[1])), float(np.sqrt(pcov[1, 1]))


# ---------------------------------------------------------------- fringe scans


@dataclass(frozen=True)
class DetectorSpec:
    """Detection and heralding parameters.

    ``g2_windowed`` overrides the signal's windowed g2 that the coherence
    model would give for ``window_ns``.
    """

    efficiency: float = 1.0
    window_ns: float = 20.0
    snr: float = math.inf
    p_ro: float = 0.0
    eta_ro: float = 0.26
    g2_windowed: float | None = None

    def __post_init__(self):
        if not 0 < self.efficiency <= 1:
            raise DomainError("detector efficiency must lie in (0, 1]")
        if self.window_ns <= 0:
            raise DomainError("window must be positive")
        if self.snr <= 0 or self.p_ro < 0 or not 0 < self.eta_ro <= 1:
            raise DomainError("need snr > 0, p_ro >= 0 and 0 < eta_ro <= 1")
        if self.g2_windowed is not None and not 1 <= self.g2_windowed <= 2:
            raise DomainError("windowed g2 must lie in [1, 2]")


def default_phase_grid(points: int = 12) -> tuple[float, ...]:
    return tuple(2 * math.pi * k / points for k in range(points))


@dataclass(frozen=True)
class ExperimentConfig:
    """One fringe-scan experiment.

    ``signal_mean`` is the thermal mean photon number per arm before the
    extra ``arm_loss_db`` (applied to both arms, so it scales the brightness
    ratio).  ``delay_ns`` is recorded but has no effect of its own: the
    delayed read-out enters through ``arm_loss_db`` and ``phase_sigmas``.
    """

    ancilla: EntangledAncilla
    signal_mean: float
    coherence: CoherenceModel = CoherenceModel()
    detectors: DetectorSpec = DetectorSpec()
    phase_points: tuple[float, ...] = field(default_factory=default_phase_grid)
    trials_per_point: int = 1_000_000
    seed: int = 0
    signal_g: float = 1.0
    signal_phi: float = 0.0
    phase_sigmas: tuple[float, ...] = ()
    mode_overlap: float = 1.0
    delay_ns: float = 0.0
    arm_loss_db: float = 0.0
    n_max: int = DEFAULT_N_MAX

    def __post_init__(self):
        if self.trials_per_point < 1:
            raise DomainError("trials_per_point must be >= 1")
        if not self.phase_points:
            raise DomainError("phase_points must be nonempty")
        if self.signal_mean < 0 or self.delay_ns < 0 or self.arm_loss_db < 0:
            raise DomainError("signal_mean, delay_ns and arm_loss_db must be nonnegative")
        if not 0 <= self.mode_overlap <= 1 or not 0 <= self.signal_g <= 1:
            raise DomainError("mode_overlap and signal_g must lie in [0, 1]")

    @classmethod
    def for_ratio(cls, ancilla: EntangledAncilla, x: float, **kw) -> "ExperimentConfig":
        """Config whose brightness ratio ``x`` holds at the detectors, before any extra arm loss.

        Detector loss does not scale the two states' single-photon
        populations identically, so the source-level mean is solved for.
        """
        guess = cls(ancilla=ancilla, signal_mean=signal_mean_for_ratio(x, ancilla), **kw)
        probe = replace(guess, arm_loss_db=0.0)

        def mismatch(m: float) -> float:
            rho_e, rho_s = prepared_states(replace(probe, signal_mean=m))
            return leading_order_params(rho_s)[0][1] / leading_order_params(rho_e)[0][1] - x

        lo, hi = guess.signal_mean / 4, guess.signal_mean * 4
        if mismatch(lo) * mismatch(hi) > 0:
            return guess
        return replace(guess, signal_mean=brentq(mismatch, lo, hi, xtol=1e-15, rtol=1e-13))

    @property
    def arm_transmission(self) -> float:
        return 10 ** (-self.arm_loss_db / 10)

    @property
    def g2_windowed(self) -> float:
        d = self.detectors
        return d.g2_windowed if d.g2_windowed is not None else float(self.coherence.windowed_g2(d.window_ns))

    @property
    def overlap(self) -> float:
        """Interference-term factor from temporal (``sqrt(g2_w - 1)``) and spatial mode overlap."""
        return math.sqrt(self.g2_windowed - 1) * self.mode_overlap

    @property
    def genuine_fraction(self) -> float:
        s = self.detectors.snr
        return 1.0 if math.isinf(s) else s / (1 + s)


def prepared_states(cfg: ExperimentConfig) -> tuple[FockState, FockState]:
    """Ancilla and signal states as seen by the detectors (all losses applied)."""
    eta = cfg.detectors.efficiency
    rho_e = build_ancilla_state(cfg.ancilla, cfg.n_max)
    rho_s = build_signal_state(cfg.signal_mean, cfg.signal_g, cfg.signal_phi, cfg.n_max)
    for m in (0, 1):
        rho_e = attenuate(rho_e, eta, m)
        rho_s = attenuate(rho_s, eta * cfg.arm_transmission, m)
    return rho_e, rho_s


@dataclass(frozen=True, eq=False)
class FringeModel:
    """``N_k(psi) = a_k + Re(b_k e^{i psi})`` per genuine herald, plus flat noise ``q`` per pattern.

    ``b`` already carries the mode-overlap factor; ``phase_factor`` is the
    phase-noise average applied by :meth:`expected`.
    """

    a: np.ndarray
    b: np.ndarray
    q_noise: float
    genuine_fraction: float
    phase_factor: float

    def expected(self, psi: float) -> np.ndarray:
        """Mean coincidence probability per trial for N13, N14, N23, N24."""
        f = self.genuine_fraction
        fringe = self.a + self.phase_factor * np.real(self.b * np.exp(1j * psi))
        return f * fringe + (1 - f) * self.q_noise

    @property
    def visibility(self) -> float:
        s = np.array([1.0, -1.0, -1.0, 1.0])
        f = self.genuine_fraction
        num = f * self.phase_factor * abs(np.dot(s, self.b))
        return num / (f * self.a.sum() + (1 - f) * 4 * self.q_noise)

    @property
    def fringe_phase(self) -> float:
        """Entanglement phase of maximal contrast; 0 when there is no fringe."""
        z = np.dot([1.0, -1.0, -1.0, 1.0], self.b)
        return float(-np.angle(z)) if z != 0 else 0.0


def fringe_model(cfg: ExperimentConfig) -> FringeModel:
    _, rho_s = prepared_states(cfg)
    n = {}
    for psi in (0.0, math.pi / 2, math.pi):
        e = build_ancilla_state(replace(cfg.ancilla, psi=psi), cfg.n_max)
        for m in (0, 1):
            e = attenuate(e, cfg.detectors.efficiency, m)
        p = coincidence_probs(e, rho_s)
        n[psi] = np.array([p[k] for k in COINCIDENCE_KEYS])
    a = (n[0.0] + n[math.pi]) / 2
    b = ((n[0.0] - n[math.pi]) / 2 + 1j * (a - n[math.pi / 2])) * cfg.overlap
    d = cfg.detectors
    q = d.p_ro / d.eta_ro * a.sum() / 4
    return FringeModel(a, b, q, cfg.genuine_fraction, v_p(cfg.phase_sigmas) if cfg.phase_sigmas else 1.0)


def predicted_visibility(cfg: ExperimentConfig) -> float:
    """Two-photon-order analytic fringe visibility for ``cfg`` (leading-order formula times noise factors)."""
    rho_e, rho_s = prepared_states(cfg)
    pe, d, _ = leading_order_params(rho_e)
    ps, g, _ = leading_order_params(rho_s)
    base = full_visibility(pe, ps, d, g, 0.0, 0.0, xi=cfg.overlap)
    d_ = cfg.detectors
    noise = v_snr(d_.snr, d_.eta_ro, d_.p_ro)
    return base * noise * (v_p(cfg.phase_sigmas) if cfg.phase_sigmas else 1.0)


def exact_visibility(cfg: ExperimentConfig) -> float:
    """Visibility of the full truncated-Fock-space model the Monte Carlo samples from."""
    return fringe_model(cfg).visibility


@dataclass(frozen=True, eq=False)
class FringeScan:
    psi: np.ndarray
    counts: np.ndarray  # shape (points, 4), columns N13, N14, N23, N24
    trials_per_point: int

    def as_dict(self) -> dict[str, np.ndarray]:
        return {k: self.counts[:, i] for i, k in enumerate(COINCIDENCE_KEYS)}

    def fit(self) -> "FringeFit":
        return fit_visibility(self.psi, self.counts)


CHUNK_TRIALS = 1 << 18


def _scan_chunk(task) -> np.ndarray:
    seed, k, c, n, psi, model, sigma = task
    rng = _rng(seed, k, c)
    u_h = rng.random(n)
    u_p = rng.random(n)
    dtheta = rng.standard_normal(n) * sigma if sigma > 0 else np.zeros(n)
    return kernels.classify_trials(
        u_h, u_p, dtheta, psi, model.genuine_fraction,
        np.ascontiguousarray(model.a), np.ascontiguousarray(model.b.real),
        np.ascontiguousarray(model.b.imag), model.q_noise,
    )  # fmt: skip


def run_fringe_scan(cfg: ExperimentConfig, workers: int = 1) -> FringeScan:
    """Sample heralded coincidences trial by trial at each entanglement phase.

    Every (phase point, chunk) pair draws from its own counter-keyed stream
    and chunks are reduced in a fixed order, so the counts do not depend on
    ``workers``.
    """
    model = fringe_model(cfg)
    # phase noise is sampled explicitly, so the model's averaged factor is not reused
    model = replace(model, phase_factor=1.0)
    sigma = math.sqrt(sum(s * s for s in cfg.phase_sigmas))
    tasks = []
    for k, psi in enumerate(cfg.phase_points):
        for c, start in enumerate(range(0, cfg.trials_per_point, CHUNK_TRIALS)):
            n = min(CHUNK_TRIALS, cfg.trials_per_point - start)
            tasks.append((cfg.seed, k, c, n, float(psi), model, sigma))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(_scan_chunk, tasks))
    else:
        parts = [_scan_chunk(t) for t in tasks]
    counts = np.zeros((len(cfg.phase_points), 4), dtype=np.int64)
    for t, p in zip(tasks, parts):
        counts[t[1]] += p
    return FringeScan(np.asarray(cfg.phase_points, dtype=float), counts, cfg.trials_per_point)


@dataclass(frozen=True, eq=False)
class FringeFit:
    amplitude: float
    phase: float
    offset: float
    stderr: float
    residuals: np.ndarray

    @property
    def visibility(self) -> float:
        if self.offset == 0:
            raise FitError("zero offset: visibility undefined")
        return self.amplitude / self.offset

    def projected(self, phase: float) -> float:
        """Signed amplitude along a known fringe phase.

        Unlike ``amplitude`` this is unbiased when the true fringe vanishes;
        its standard error is ``stderr`` for an evenly spaced phase grid.
        """
        return self.amplitude * math.cos(self.phase - phase)


def fit_fringe(psi: Sequence[float], y: Sequence[float], sigma: Sequence[float] | None = None) -> FringeFit:
    """Weighted linear least squares of ``y = offset + amplitude cos(psi - phase)``."""
    psi = np.asarray(psi, dtype=float)
    y = np.asarray(y, dtype=float)
    if psi.shape != y.shape:
        raise FitError("psi and y must have the same length")
    if np.unique(np.round(np.mod(psi, 2 * np.pi), 12)).size < 4:
        raise FitError("need at least 4 distinct phase points")
    w = np.ones_like(y) if sigma is None else 1 / np.asarray(sigma, dtype=float)
    if not np.all(np.isfinite(w)):
        raise FitError("uncertainties must be positive")
    design = np.column_stack([np.ones_like(psi), np.cos(psi), np.sin(psi)])
    coef, *_ = np.linalg.lstsq(design * w[:, None], y * w, rcond=None)
    c0, c1, c2 = coef
    amp = math.hypot(c1, c2)
    wd = design * w[:, None]
    cov = np.linalg.inv(wd.T @ wd)
    if sigma is None:
        dof = max(len(y) - 3, 1)
        cov = cov * float(np.sum((y - design @ coef) ** 2)) / dof
    if amp > 0:
        var = (c1 * c1 * cov[1, 1] + c2 * c2 * cov[2, 2] + 2 * c1 * c2 * cov[1, 2]) / amp**2
    else:
        var = (cov[1, 1] + cov[2, 2]) / 2
    return FringeFit(amp, math.atan2(c2, c1), float(c0), math.sqrt(max(var, 0.0)), y - design @ coef)


def fit_visibility(psi: Sequence[float], counts: np.ndarray) -> FringeFit:
    """Fit the per-point contrast ``(N13+N24-N14-N23)/total`` with Poisson weights.

    The returned ``amplitude`` is the fringe visibility and ``stderr`` its
    standard error.
    """
    counts = np.asarray(counts, dtype=float)
    total = counts.sum(axis=1)
    if np.any(total == 0):
        raise FitError("a phase point has no coincidences")
    contrast = (counts[:, 0] + counts[:, 3] - counts[:, 1] - counts[:, 2]) / total
    sigma = np.sqrt(np.maximum(1 - contrast**2, 1 / total) / total)
    return fit_fringe(psi, contrast, sigma)
