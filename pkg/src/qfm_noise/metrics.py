"""Expressibility and entangling capability of parameterised circuits."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import quantum as qc
from .circuits import CircuitLayout, simulate
from .noise import NoiseModel, sample_cge

DEFAULT_BINS = 75
DEFAULT_PAIRS = 5000
EMPIRICAL_FLOOR = 1e-12


# --------------------------------------------------------------------------
# expressibility


def haar_bin_probabilities(n: int, n_bins: int) -> np.ndarray:
    """Probability mass of each of ``n_bins`` equal fidelity bins under Haar sampling.

    Integrates the density ``(N-1)(1-F)^(N-2)`` with ``N = 2**n`` exactly
    through its CDF ``1 - (1-F)^(N-1)``.

    Examples
    --------
    >>> haar_bin_probabilities(2, 2)
    array([0.875, 0.125])
    """
    return np.exp(haar_log_bin_probabilities(n, n_bins))


def haar_log_bin_probabilities(n: int, n_bins: int) -> np.ndarray:
    """Logarithm of :func:`haar_bin_probabilities`, accurate for the tiny top bins.

    Each bin ``[a, b)`` has mass ``(1-a)^(N-1) - (1-b)^(N-1)``, evaluated as
    ``(N-1) ln(1-a) + ln(1 - ((1-b)/(1-a))^(N-1))`` to avoid cancellation.
    """
    if n < 1:
        raise ValueError("need at least one qubit")
    if n_bins < 2:
        raise ValueError("need at least two bins")
    power = 2**n - 1
    upper = 1.0 - np.linspace(0.0, 1.0, n_bins + 1)  # 1 - F at every edge
    lo, hi = upper[:-1], upper[1:]
    return power * np.log(lo) + np.log1p(-((hi / lo) ** power))


@dataclass(frozen=True)
class FidelityHistogram:
    n_bins: int
    counts: np.ndarray
    n_pairs: int

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_bins + 1)

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.n_pairs

    @classmethod
    def from_fidelities(cls, fidelities, n_bins: int) -> "FidelityHistogram":
        f = np.clip(np.asarray(fidelities, dtype=float), 0.0, 1.0)
        counts, _ = np.histogram(f, bins=np.linspace(0.0, 1.0, n_bins + 1))
        return cls(n_bins, counts, f.size)


@dataclass(frozen=True)
class ExpressibilityReport:
    kl_divergence: float
    n_bins: int
    n_pairs: int
    noise: dict = field(default_factory=dict)
    histogram: FidelityHistogram | None = None
    undersampled: bool = False


def kl_to_haar(histogram: FidelityHistogram, n: int) -> float:
    """``sum_b p_b ln(p_b / q_b)`` with the empirical ``p_b`` floored inside the log."""
    p = histogram.probabilities
    log_q = haar_log_bin_probabilities(n, histogram.n_bins)
    terms = np.where(p > 0, p * (np.log(np.maximum(p, EMPIRICAL_FLOOR)) - log_q), 0.0)
    return float(max(terms.sum(), 0.0))


def _final_states(layout, noise, params, rng, force_density=False):
    cge = None
    if noise.has_cge:
        draws = [sample_cge(layout, noise, rng) for _ in range(params.shape[0])]
        cge = (np.array([d.encoding_offsets for d in draws]).reshape(len(draws), -1),
               np.array([d.trainable_offsets for d in draws]).reshape(len(draws), -1))
    return simulate(layout, None, params, noise, cge, force_density=force_density)


def pair_fidelities(layout: CircuitLayout, noise: NoiseModel, n_pairs: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Fidelities of ``n_pairs`` state pairs from ``2 * n_pairs`` independent draws."""
    params = rng.uniform(0.0, 2 * np.pi, size=(2 * n_pairs, layout.n_params))
    states, pure = _final_states(layout, noise, params, rng)
    if pure:
        v = qc.pure_vectors(states)
        return np.abs(np.sum(v[:n_pairs].conj() * v[n_pairs:], axis=1)) ** 2
    rho = qc.density_matrix(states)
    return qc.uhlmann_fidelity_batch(rho[:n_pairs], rho[n_pairs:])


def expressibility(layout: CircuitLayout, noise: NoiseModel | None = None,
                   n_pairs: int = DEFAULT_PAIRS, n_bins: int = DEFAULT_BINS,
                   rng: np.random.Generator | None = None) -> ExpressibilityReport:
    """KL divergence between the circuit's pair-fidelity histogram and Haar.

    Smaller values mean a more expressive circuit. ``layout`` should be the
    stripped metrics circuit; uniform parameters are drawn from ``rng``.
    """
    noise = noise or NoiseModel()
    rng = rng if rng is not None else np.random.default_rng()
    fids = pair_fidelities(layout, noise, n_pairs, rng)
    hist = FidelityHistogram.from_fidelities(fids, n_bins)
    return ExpressibilityReport(
        kl_to_haar(hist, layout.n), n_bins, n_pairs, noise.to_dict(), hist,
        undersampled=n_pairs < n_bins,
    )


# --------------------------------------------------------------------------
# entanglement


def mw_batch(vectors: np.ndarray, n: int) -> np.ndarray:
    """Meyer-Wallach measure for a ``(B, 2**n)`` stack of normalised pure states."""
    if n < 2:
        raise ValueError("Meyer-Wallach entanglement needs at least two qubits")
    purities = qc.reduced_purities_pure(vectors, n)
    return np.clip(2.0 * (1.0 - purities.mean(axis=1)), 0.0, None)


def mw_entanglement(state) -> float:
    """``Q = 2 (1 - mean_k Tr rho_k^2)`` for a pure state.

    Examples
    --------
    >>> bell = qc.PureState(np.array([1, 0, 0, 1]) / np.sqrt(2))
    >>> round(mw_entanglement(bell), 12)
    1.0
    """
    if not isinstance(state, qc.PureState):
        state = qc.PureState(np.asarray(state, dtype=complex))
    return float(mw_batch(state.amplitudes[None], state.n)[0])


def eof_batch(matrices: np.ndarray, n: int) -> np.ndarray:
    """Eigen-decomposition estimate of entanglement of formation for ``(B, N, N)`` states.

    Eigenvalues below the floor are dropped. The result bounds the true
    convex-roof value from above.
    """
    mats = np.asarray(matrices).reshape(-1, 2**n, 2**n)
    vals, vecs = np.linalg.eigh(0.5 * (mats + mats.conj().transpose(0, 2, 1)))
    weights = np.where(vals >= qc.EIGEN_FLOOR, vals, 0.0)
    eig_states = vecs.transpose(0, 2, 1).reshape(-1, 2**n)
    q = mw_batch(eig_states, n).reshape(weights.shape)
    return np.sum(weights * q, axis=1)


def eof(state) -> float:
    """Weighted Meyer-Wallach entanglement of the eigenstates of ``state``."""
    if isinstance(state, qc.PureState):
        state = state.density()
    if not isinstance(state, qc.DensityOperator):
        state = qc.DensityOperator(np.asarray(state, dtype=complex))
    return float(eof_batch(state.matrix[None], state.n)[0])


@dataclass(frozen=True)
class EntanglementReport:
    measure: str  # "MW" or "EF"
    mean_q: float
    min_q: float
    max_q: float
    values: np.ndarray
    noise: dict = field(default_factory=dict)


def entangling_capability(layout: CircuitLayout, noise: NoiseModel | None = None,
                          n_samples: int = 500, rng: np.random.Generator | None = None,
                          measure: str | None = None) -> EntanglementReport:
    """Mean entanglement of the circuit's output over uniform parameter draws.

    ``measure`` defaults to MW when no Kraus channel is active and EF
    otherwise; asking for EF on a noiseless model evaluates it on the
    density-matrix path.
    """
    noise = noise or NoiseModel()
    rng = rng if rng is not None else np.random.default_rng()
    measure = (measure or ("EF" if noise.is_decoherent else "MW")).upper()
    if measure not in ("MW", "EF"):
        raise ValueError(f"unknown entanglement measure {measure!r}")
    if measure == "MW" and noise.is_decoherent:
        raise ValueError("MW is only defined for pure states; use EF with decoherent noise")
    params = rng.uniform(0.0, 2 * np.pi, size=(n_samples, layout.n_params))
    states, pure = _final_states(layout, noise, params, rng, force_density=measure == "EF")
    if pure:
        q = mw_batch(qc.pure_vectors(states), layout.n)
    else:
        q = eof_batch(qc.density_matrix(states), layout.n)
    return EntanglementReport(measure, float(q.mean()), float(q.min()), float(q.max()),
                              q, noise.to_dict())
