"""Pure-numpy versions of the compiled kernels, same signatures and results."""

import numpy as np
from scipy.signal import lfilter


def ar1_field(noise: np.ndarray, rho: float) -> np.ndarray:
    noise = np.ascontiguousarray(noise, dtype=np.complex128)
    if noise.size == 0:
        return noise.copy()
    s = np.sqrt(1.0 - rho * rho)
    # x[0] = w[0] is the stationary start; the filter state carries it forward
    out, _ = lfilter([s], [1.0, -rho], noise[1:], zi=[rho * noise[0]])
    return np.concatenate([noise[:1], out])


def pair_histogram(t1: np.ndarray, t2: np.ndarray, tau_max: float, bin_width: float) -> np.ndarray:
    nbins = int(2.0 * tau_max / bin_width + 0.5)
    counts = np.zeros(nbins, dtype=np.int64)
    lo = np.searchsorted(t2, t1 - tau_max, side="left")
    hi = np.searchsorted(t2, t1 + tau_max, side="left")
    step = 1 << 16
    for start in range(0, len(t1), step):
        sl = slice(start, start + step)
        n = hi[sl] - lo[sl]
        if not n.sum():
            continue
        owner = np.repeat(np.arange(len(n)), n)
        offs = np.arange(n.sum()) - np.repeat(np.cumsum(n) - n, n)
        d = t2[lo[sl][owner] + offs] - t1[sl][owner]
        k = np.floor((d + tau_max) / bin_width).astype(np.int64)
        k = k[(k >= 0) & (k < nbins)]
        counts += np.bincount(k, minlength=nbins)
    return counts


def classify_trials(u_herald, u_pattern, dtheta, psi, genuine_fraction, a, b_re, b_im, q_noise):
    counts = np.zeros(4, dtype=np.int64)
    genuine = u_herald < genuine_fraction
    th = psi + dtheta[genuine]
    cs, sn = np.cos(th), np.sin(th)
    p = a[None, :] + b_re[None, :] * cs[:, None] - b_im[None, :] * sn[:, None]
    cum = np.cumsum(p, axis=1)
    idx = np.sum(u_pattern[genuine][:, None] >= cum, axis=1)
    counts += np.bincount(idx, minlength=5)[:4]
    u = u_pattern[~genuine]
    if q_noise > 0:
        k = np.minimum((u[u < 4.0 * q_noise] / q_noise).astype(np.int64), 3)
        counts += np.bincount(k, minlength=4)
    return counts
