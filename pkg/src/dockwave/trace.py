"""Fourier calculus for periodic functions on the contact curve.

A function on the curve is identified with its samples at the arc-length
nodes, i.e. with a periodic function of s on [0, L). Sobolev norms use the
convention

    |g|_{H^s}^2 = L * sum_n (1 + (2 pi n / L)^2)^s |g_hat_n|^2,
    g_hat_n = (1/L) integral g(s) exp(-2 pi i n s / L) ds,

and boundary quadrature is the trapezoid rule, which is spectrally accurate
for smooth periodic data.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class TraceField:
    """Real samples of a function at the curve's arc-length nodes."""

    curve: object
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.curve.n_s,):
            raise ValueError(f"expected {self.curve.n_s} samples, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("trace field contains non-finite values")

    def copy(self):
        return TraceField(self.curve, self.values.copy())


@dataclass
class TraceSpectrum:
    """One-sided Fourier coefficients g_hat_n for 0 <= n <= n_s/2.

    Hermitian symmetry is implicit: the stored coefficients describe a real
    signal, negative modes being conjugates of positive ones.
    """

    curve: object
    coeff: np.ndarray

    def to_field(self):
        return TraceField(self.curve, np.fft.irfft(self.coeff * self.curve.n_s, n=self.curve.n_s))


def spectrum(g):
    return TraceSpectrum(g.curve, np.fft.rfft(g.values) / g.curve.n_s)


def wavenumbers(curve):
    """Physical wavenumbers 2 pi n / L for the one-sided modes."""
    return 2.0 * np.pi * np.arange(curve.n_s // 2 + 1) / curve.length


def _mode_weights(curve):
    # Parseval multiplicities: interior one-sided modes count twice
    n = curve.n_s
    w = np.full(n // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    return w


def sobolev_norm(g, s):
    """H^s(Gamma) norm of a trace field under the fixed convention."""
    coeff = np.fft.rfft(g.values) / g.curve.n_s
    xi = wavenumbers(g.curve)
    weight = (1.0 + xi ** 2) ** s
    total = g.curve.length * np.sum(_mode_weights(g.curve) * weight * np.abs(coeff) ** 2)
    return float(np.sqrt(total))


def l2_inner(f, g):
    """Trapezoid inner product on the curve."""
    return float(f.curve.ds * np.dot(f.values, g.values))


def l2_norm(g):
    return np.sqrt(max(l2_inner(g, g), 0.0))


def apply_multiplier(g, mult):
    """Apply a real Fourier multiplier given per one-sided mode."""
    coeff = np.fft.rfft(g.values)
    return TraceField(g.curve, np.fft.irfft(coeff * mult, n=g.curve.n_s))


def d_tan(g):
    """Tangential (arc-length) derivative, spectral."""
    xi = wavenumbers(g.curve)
    mult = 1j * xi
    if g.curve.n_s % 2 == 0:
        mult = mult.copy()
        mult[-1] = 0.0
    coeff = np.fft.rfft(g.values)
    return TraceField(g.curve, np.fft.irfft(coeff * mult, n=g.curve.n_s))


def smooth_jeps(g, eps):
    """Smoothing multiplier 1 / (1 + eps |xi|) mode by mode.

    Symmetric for the trapezoid inner product and a contraction in every
    H^s norm; eps = 0 is the identity.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if eps == 0.0:
        return g.copy()
    return apply_multiplier(g, 1.0 / (1.0 + eps * wavenumbers(g.curve)))


def jeps_multiplier(curve, eps):
    return 1.0 / (1.0 + eps * wavenumbers(curve))


def random_smooth(curve, rng, decay=8.0, amplitude=1.0):
    """Random band-limited trace with spectral decay, for test batteries."""
    n_half = curve.n_s // 2 + 1
    mags = np.exp(-np.arange(n_half) / decay)
    coeff = mags * (rng.standard_normal(n_half) + 1j * rng.standard_normal(n_half))
    coeff[0] = mags[0] * rng.standard_normal()
    if curve.n_s % 2 == 0:
        coeff[-1] = coeff[-1].real
    vals = np.fft.irfft(coeff, n=curve.n_s) * curve.n_s
    scale = np.max(np.abs(vals))
    return TraceField(curve, amplitude * vals / (scale if scale > 0 else 1.0))
