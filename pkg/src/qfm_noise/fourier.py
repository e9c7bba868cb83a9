"""Frequency spectrum theory and empirical Fourier coefficients of circuit models."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.integrate import trapezoid

from .circuits import CircuitLayout, expectation_values
from .noise import NoiseModel, sample_cge

ZERO_THRESHOLD = 1e-14


class NyquistError(ValueError):
    """The sampling grid cannot resolve the model's highest frequency."""


@dataclass(frozen=True)
class Spectrum:
    frequencies: np.ndarray  # (M, D) integer frequency vectors, lexicographically sorted
    gates_per_feature: tuple  # encoding rotations per feature
    d_per_layer: tuple  # per feature: generator dimension of every encoding layer

    @property
    def max_frequency(self) -> tuple:
        return tuple(int(g) for g in self.gates_per_feature)

    @property
    def size(self) -> int:
        return len(self.frequencies)

    def __contains__(self, omega) -> bool:
        omega = np.atleast_1d(omega)
        return bool(np.any(np.all(self.frequencies == omega, axis=1)))


def _encoding_gates(layout: CircuitLayout) -> list:
    per_feature = [[] for _ in range(layout.n_features)]
    for g in layout.gates:
        if g.role == "encoding":
            if g.kind not in ("RX", "RY", "RZ"):
                raise ValueError(f"unsupported encoding generator {g.kind}")
            per_feature[g.feature].append(g)
    return per_feature


def eigenvalue_sums(n_gates: int) -> tuple:
    """Distinct sums of ``n_gates`` eigenvalues +-1/2 and their multiplicities."""
    counts = np.array([comb(n_gates, k) for k in range(n_gates + 1)])
    values = np.arange(n_gates + 1) - n_gates / 2
    return values, counts


def analytic_spectrum(layout: CircuitLayout) -> Spectrum:
    """All differences of eigenvalue sums, per feature, as a Cartesian product."""
    per_feature = _encoding_gates(layout)
    axes = []
    for gates in per_feature:
        values, _ = eigenvalue_sums(len(gates))
        diffs = np.unique(np.round(values[:, None] - values[None, :]).astype(int))
        axes.append(diffs)
    freqs = np.array(list(itertools.product(*axes)), dtype=int).reshape(-1, layout.n_features)
    d_per_layer = tuple(
        tuple(2 ** sum(g.block == layer for g in gates) for layer in range(layout.layers))
        for gates in per_feature
    )
    return Spectrum(freqs, tuple(len(g) for g in per_feature), d_per_layer)


def redundancy_count(layout: CircuitLayout, omega) -> int:
    """Number of eigenvalue index pairs ``(j, k)`` with ``Lambda_j - Lambda_k = omega``."""
    omega = np.atleast_1d(np.asarray(omega, dtype=int))
    per_feature = _encoding_gates(layout)
    if omega.size != len(per_feature):
        raise ValueError(f"frequency must have {len(per_feature)} components")
    total = 1
    for w, gates in zip(omega, per_feature):
        _, counts = eigenvalue_sums(len(gates))
        # pair counts for every difference -g..g
        pairs = np.correlate(counts, counts, mode="full")
        g = len(gates)
        total *= int(pairs[w + g]) if abs(w) <= g else 0
    return total


def redundancy_map(layout: CircuitLayout) -> dict:
    spectrum = analytic_spectrum(layout)
    return {tuple(int(v) for v in w): redundancy_count(layout, w) for w in spectrum.frequencies}


# --------------------------------------------------------------------------
# empirical coefficients


@dataclass(frozen=True)
class CoefficientSample:
    """Fourier coefficients ``c_omega`` of one parameter draw."""

    frequencies: np.ndarray  # (M, D), fractional when oversampled
    values: np.ndarray  # (M,) complex

    def __getitem__(self, omega) -> complex:
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        hit = np.flatnonzero(np.all(np.isclose(self.frequencies, omega, atol=1e-9), axis=1))
        if hit.size == 0:
            raise KeyError(f"frequency {tuple(omega)} not resolved by this sample")
        return complex(self.values[hit[0]])

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def phases(self) -> np.ndarray:
        return np.angle(self.values)

    def reconstruct(self, x) -> np.ndarray:
        """Evaluate ``sum_w c_w exp(i w.x)`` at points ``x`` of shape (N, D)."""
        x = np.asarray(x, dtype=float).reshape(-1, self.frequencies.shape[1])
        return np.exp(1j * x @ self.frequencies.T) @ self.values


def sampling_grid(max_frequency, oversample: int = 1, points=None):
    """Per-feature grids of ``oversample * points`` samples with spacing 2pi/points.

    ``points`` defaults to ``2 * max + 1``, the smallest grid that resolves every
    integer frequency up to ``max``. Oversampling extends the window to
    ``oversample`` periods, refining the frequency resolution to ``1/oversample``.
    """
    if int(oversample) != oversample or oversample < 1:
        raise ValueError("oversample must be a positive integer")
    max_frequency = tuple(max_frequency)
    points = tuple(points) if points is not None else tuple(2 * m + 1 for m in max_frequency)
    for m, p in zip(max_frequency, points):
        if p < 2 * m + 1:
            raise NyquistError(f"{p} points per period cannot resolve frequency {m}")
    axes = [np.arange(oversample * p) * (2 * np.pi / p) for p in points]
    return axes, points


def _dft_frequencies(sizes, points, oversample):
    axes = [np.fft.fftshift(np.fft.fftfreq(s, d=1.0 / s)) / oversample for s in sizes]
    return np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, len(sizes))


def sample_coefficients(layout: CircuitLayout, thetas, noise: NoiseModel | None = None,
                        rng: np.random.Generator | None = None, oversample: int = 1,
                        obs=None, cge_draws=None, points=None) -> list:
    """Coefficients for a stack of parameter vectors ``thetas`` of shape (S, P).

    Under coherent gate errors one draw per parameter vector is taken (from
    ``rng`` unless ``cge_draws`` is given) and held fixed over the whole grid.
    """
    noise = noise or NoiseModel()
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    n_samples = thetas.shape[0]
    spectrum = analytic_spectrum(layout)
    axes, points = sampling_grid(spectrum.max_frequency, oversample, points)
    sizes = [len(a) for a in axes]
    grid = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, layout.n_features)
    n_grid = grid.shape[0]

    features = np.tile(grid, (n_samples, 1))
    params = np.repeat(thetas, n_grid, axis=0)
    cge = None
    if noise.has_cge:
        if cge_draws is None:
            if rng is None:
                raise ValueError("a random generator is required for coherent gate errors")
            cge_draws = [sample_cge(layout, noise, rng) for _ in range(n_samples)]
        enc = np.repeat(np.array([d.encoding_offsets for d in cge_draws]), n_grid, axis=0)
        train = np.repeat(np.array([d.trainable_offsets for d in cge_draws]), n_grid, axis=0)
        cge = (enc, train)
    values = expectation_values(layout, features, params, noise, obs, cge)
    values = values.reshape([n_samples] + sizes)
    coeffs = np.fft.fftn(values, axes=range(1, len(sizes) + 1)) / n_grid
    coeffs = np.fft.fftshift(coeffs, axes=range(1, len(sizes) + 1)).reshape(n_samples, -1)
    freqs = _dft_frequencies(sizes, points, oversample)
    return [CoefficientSample(freqs, c) for c in coeffs]


def extract_coefficients(layout: CircuitLayout, theta, noise: NoiseModel | None = None,
                         rng: np.random.Generator | None = None, oversample: int = 1,
                         obs=None, points=None) -> CoefficientSample:
    """DFT estimate of ``c_omega(theta)`` on a half-open grid over ``[0, 2pi * oversample)``."""
    return sample_coefficients(layout, np.asarray(theta)[None, :], noise, rng, oversample,
                               obs, points=points)[0]


def quadrature_oracle(layout: CircuitLayout, theta, noise: NoiseModel | None = None,
                      obs=None, factor: int = 10) -> CoefficientSample:
    """Coefficients from trapezoid quadrature of ``(1/2pi) int f(x) exp(-i w x) dx``.

    Uses a closed grid of ``factor * (2 max + 1)`` intervals per feature.
    Coherent gate errors are rejected since they break band-limitedness.
    """
    noise = noise or NoiseModel()
    if noise.has_cge:
        raise ValueError("the quadrature oracle does not support coherent gate errors")
    spectrum = analytic_spectrum(layout)
    nodes = [np.linspace(0.0, 2 * np.pi, factor * (2 * m + 1) + 1) for m in spectrum.max_frequency]
    mesh = np.meshgrid(*nodes, indexing="ij")
    points = np.stack([m.reshape(-1) for m in mesh], axis=1)
    f = expectation_values(layout, points, np.asarray(theta, dtype=float)[None, :], noise, obs)
    f = f.reshape(mesh[0].shape)

    ranges = [np.arange(-m, m + 1) for m in spectrum.max_frequency]
    freqs = np.array(list(itertools.product(*ranges)), dtype=float).reshape(-1, len(ranges))
    values = np.empty(len(freqs), dtype=complex)
    for i, omega in enumerate(freqs):
        phase = sum(w * m for w, m in zip(omega, mesh))
        integrand = f * np.exp(-1j * phase)
        for axis in reversed(range(len(nodes))):
            integrand = trapezoid(integrand, nodes[axis], axis=axis)
        values[i] = integrand / (2 * np.pi) ** len(nodes)
    return CoefficientSample(freqs, values)


# --------------------------------------------------------------------------
# statistics over parameter draws


@dataclass(frozen=True)
class CoefficientStats:
    frequencies: np.ndarray
    abs_mean: np.ndarray  # mu_c
    rel_std: np.ndarray  # sigma_c, NaN where the frequency is absent
    cov: np.ndarray  # (M, 2, 2) covariance of (Re, Im)
    re_mean: np.ndarray
    im_mean: np.ndarray
    n_samples: int
    threshold: float = ZERO_THRESHOLD

    @property
    def present(self) -> np.ndarray:
        return self.abs_mean >= self.threshold

    def row(self, omega) -> int:
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        hit = np.flatnonzero(np.all(np.isclose(self.frequencies, omega, atol=1e-9), axis=1))
        if hit.size == 0:
            raise KeyError(f"frequency {tuple(omega)} not in statistics")
        return int(hit[0])


def coefficient_stats(samples, threshold: float = ZERO_THRESHOLD) -> CoefficientStats:
    """Mean magnitude, relative std and (Re, Im) covariance per frequency.

    ``rel_std`` is ``std(|c|) / mean(|c|)`` with population normalisation;
    frequencies whose mean magnitude is below ``threshold`` count as absent.
    """
    samples = list(samples)
    if len(samples) < 2:
        raise ValueError("coefficient statistics need at least two samples")
    freqs = samples[0].frequencies
    if any(s.frequencies.shape != freqs.shape or not np.allclose(s.frequencies, freqs)
           for s in samples):
        raise ValueError("samples were taken on different frequency grids")
    values = np.array([s.values for s in samples])
    mags = np.abs(values)
    mu = mags.mean(axis=0)
    present = mu >= threshold
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma = np.where(present, mags.std(axis=0) / mu, np.nan)
    re, im = values.real, values.imag
    re_c = re - re.mean(axis=0)
    im_c = im - im.mean(axis=0)
    cov = np.empty((len(mu), 2, 2))
    cov[:, 0, 0] = (re_c * re_c).mean(axis=0)
    cov[:, 0, 1] = cov[:, 1, 0] = (re_c * im_c).mean(axis=0)
    cov[:, 1, 1] = (im_c * im_c).mean(axis=0)
    return CoefficientStats(freqs, mu, sigma, cov, re.mean(axis=0), im.mean(axis=0),
                            len(samples), threshold)


def _non_negative(freqs: np.ndarray) -> np.ndarray:
    """Mask selecting one frequency out of every +-omega pair (and omega = 0)."""
    keep = np.zeros(len(freqs), dtype=bool)
    for i, w in enumerate(freqs):
        nz = w[np.abs(w) > 1e-12]
        keep[i] = nz.size == 0 or nz[0] > 0
    return keep


def spectrum_occupancy(stats: CoefficientStats, threshold: float = ZERO_THRESHOLD) -> int:
    """Number of non-negative frequency bins whose mean magnitude exceeds ``threshold``.

    Each +-omega pair is counted once, so a model ``f = cos x`` has occupancy 1.
    """
    mask = _non_negative(stats.frequencies) & (stats.abs_mean > threshold)
    return int(mask.sum())
