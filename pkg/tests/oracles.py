"""Slow, direct reference computations used to check the fast code paths.

Nothing here imports the package's numerical routines: each oracle is
written from the defining formula.
"""
from __future__ import annotations

import math

import numpy as np

# --- continuous wavelet transform by direct summation ------------------------


def morse_psi_hat(omega, gamma=3.0, beta=20.0):
    """Morse wavelet spectrum, scaled to peak value 2 (zero for omega <= 0)."""
    omega = np.asarray(omega, dtype=float)
    out = np.zeros_like(omega)
    pos = omega > 0
    w = omega[pos]
    log_a = (beta / gamma) * (1.0 + math.log(gamma) - math.log(beta))
    out[pos] = 2.0 * np.exp(log_a + beta * np.log(w) - w**gamma)
    return out


def _gauss_legendre(lo, hi, panels, order):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (b - a) * x + 0.5 * (b + a))
        weights.append(0.5 * (b - a) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def morse_psi_time(tau, gamma=3.0, beta=20.0, omega_max=6.0, panels=40, order=24):
    """Time-domain mother wavelet psi(tau) = (1/2pi) int Psi(w) exp(i w tau) dw,
    by composite Gauss-Legendre quadrature over the (numerically) finite
    support of the spectrum."""
    nodes, weights = _gauss_legendre(0.0, omega_max, panels, order)
    spec = morse_psi_hat(nodes, gamma, beta) * weights
    tau = np.asarray(tau, dtype=float)
    return np.exp(1j * np.outer(tau, nodes)) @ spec / (2 * np.pi)


class DirectCWT:
    """Direct evaluation of (1/sqrt a) sum_n x[n] psi*((t_n - b)/a) dt.

    The mother wavelet is tabulated once per scale on all lags up to
    ``max_len``, so many segments can be checked cheaply.
    """

    def __init__(self, scales, fs, max_len, gamma=3.0, beta=20.0):
        self.scales = np.asarray(scales, dtype=float)
        self.fs = float(fs)
        self.max_len = int(max_len)
        lags = np.arange(-(max_len - 1), max_len) / fs
        self.table = np.array([morse_psi_time(lags / a, gamma, beta) for a in self.scales])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        n = x.size
        if n > self.max_len:
            raise ValueError("segment longer than the tabulated lag range")
        dt = 1.0 / self.fs
        # lag index for (t_n - b): n - b + (max_len - 1)
        idx = np.arange(n)[None, :] - np.arange(n)[:, None] + (self.max_len - 1)
        out = np.empty((self.scales.size, n), dtype=complex)
        for k, a in enumerate(self.scales):
            psi = self.table[k][idx]  # rows: b, cols: n
            out[k] = (np.conj(psi) @ x) * dt / math.sqrt(a)
        return out


# --- equal error rate by exhaustive sweep ------------------------------------


def eer_sweep(genuine, imposter):
    """Pure-Python O(n^2) EER.

    Thresholds: -inf, then every distinct score ascending. At each one,
    FAR = share of imposters <= t and FRR = share of genuine > t. The EER is
    read at the first threshold where FAR >= FRR, interpolating linearly with
    the previous threshold when the two do not meet exactly.
    """
    genuine = [float(g) for g in genuine]
    imposter = [float(i) for i in imposter]
    thresholds = [-math.inf] + sorted(set(genuine) | set(imposter))
    prev = None
    for t in thresholds:
        far = sum(1 for s in imposter if s <= t) / len(imposter)
        frr = sum(1 for s in genuine if s > t) / len(genuine)
        d = far - frr
        if d >= 0:
            if d == 0 or prev is None:
                return far
            p_far, p_d = prev
            a = -p_d / (d - p_d)
            return p_far + a * (far - p_far)
        prev = (far, d)
    raise AssertionError("sweep never crossed")


# --- LDA by plain eigendecomposition -----------------------------------------


def scatter_by_summation(X, y):
    """Between- and within-class scatter accumulated one vector at a time."""
    X = np.asarray(X, dtype=float)
    L = X.shape[1]
    mu = X.mean(axis=0)
    Sb = np.zeros((L, L))
    Sw = np.zeros((L, L))
    for c in sorted(set(y)):
        rows = [X[i] for i in range(len(y)) if y[i] == c]
        mk = sum(rows) / len(rows)
        d = (mk - mu)[:, None]
        Sb += len(rows) * (d @ d.T)
        for z in rows:
            e = (z - mk)[:, None]
            Sw += e @ e.T
    return Sb, Sw


def lda_eig(X, y, m):
    """Top-m eigenpairs of inv(S_w) @ S_b via the non-symmetric solver."""
    Sb, Sw = scatter_by_summation(X, y)
    vals, vecs = np.linalg.eig(np.linalg.inv(Sw) @ Sb)
    order = np.argsort(-vals.real)[:m]
    return vals.real[order], vecs.real[:, order]


def principal_angles(A, B):
    """Principal angles (radians) between the column spans of A and B."""
    qa, _ = np.linalg.qr(A)
    qb, _ = np.linalg.qr(B)
    s = np.linalg.svd(qa.T @ qb, compute_uv=False)
    return np.arccos(np.clip(s, -1.0, 1.0))


# --- Butterworth band-pass magnitude in closed form --------------------------


def butterworth_bandpass_gain(f, fs, low, high, order):
    """|H(f)| of the digital Butterworth band-pass of total ``order`` obtained
    by the prewarped bilinear transform of the analog prototype."""
    n = order // 2
    warp = lambda hz: 2.0 * fs * np.tan(np.pi * hz / fs)  # noqa: E731
    W = warp(np.asarray(f, dtype=float))
    wl, wh = warp(low), warp(high)
    x = (W**2 - wl * wh) / ((wh - wl) * W)
    return 1.0 / np.sqrt(1.0 + x ** (2 * n))
