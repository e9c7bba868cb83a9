"""Dense pure-state and density-operator primitives.

Wire convention: qubit 0 is the least significant bit of the computational
basis index. Multi-qubit gate matrices follow the same rule locally, i.e. for
a gate on ``wires = (w0, w1)`` the local basis index is ``b(w0) + 2 * b(w1)``.

The value types (:class:`PureState`, :class:`DensityOperator`, ...) validate
their invariants on construction and are what the public functions accept.
The circuit simulator works on stacked ("batched") tensors through the
``apply_*`` kernels at the bottom of this module, which skip validation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
UNITARY_TOL = 1e-12
COMPLETENESS_TOL = 1e-12
EIGEN_FLOOR = 1e-12

I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


class QuantumStateError(ValueError):
    """Raised when an input violates a state, channel or gate invariant."""


def _n_qubits_for(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or 2**n != dim:
        raise QuantumStateError(f"dimension {dim} is not a power of two")
    return n


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray
    n: int = field(init=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "n", _n_qubits_for(amps.size))
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > 1e-10:
            raise QuantumStateError(f"state norm is {norm}, expected 1")

    @classmethod
    def basis(cls, bits: str) -> "PureState":
        """Computational basis state written as a bit string, qubit 0 first.

        ``PureState.basis("01")`` puts qubit 0 in |0> and qubit 1 in |1>.
        """
        index = sum(int(b) << q for q, b in enumerate(bits))
        amps = np.zeros(2 ** len(bits), dtype=complex)
        amps[index] = 1.0
        return cls(amps)

    def density(self) -> "DensityOperator":
        return DensityOperator(np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityOperator:
    matrix: np.ndarray
    n: int = field(init=False)

    def __post_init__(self):
        rho = np.asarray(self.matrix, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise QuantumStateError(f"density matrix must be square, got {rho.shape}")
        object.__setattr__(self, "matrix", rho)
        object.__setattr__(self, "n", _n_qubits_for(rho.shape[0]))
        if np.max(np.abs(rho - rho.conj().T)) >= HERMITIAN_TOL:
            raise QuantumStateError("density matrix is not Hermitian")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise QuantumStateError(f"density matrix has trace {tr}")
        if np.linalg.eigvalsh(rho)[0] < -PSD_TOL:
            raise QuantumStateError("density matrix is not positive semidefinite")

    @classmethod
    def zero(cls, n: int) -> "DensityOperator":
        rho = np.zeros((2**n, 2**n), dtype=complex)
        rho[0, 0] = 1.0
        return cls(rho)

    @classmethod
    def maximally_mixed(cls, n: int) -> "DensityOperator":
        return cls(np.eye(2**n, dtype=complex) / 2**n)


@dataclass(frozen=True)
class KrausChannel:
    """Single-qubit channel given by its Kraus operators."""

    operators: tuple
    label: str = ""

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.operators)
        if not ops or any(k.shape != (2, 2) for k in ops):
            raise QuantumStateError("only single-qubit (2x2) Kraus operators are supported")
        object.__setattr__(self, "operators", ops)
        err = np.max(np.abs(sum(k.conj().T @ k for k in ops) - I2))
        if err >= COMPLETENESS_TOL:
            raise QuantumStateError(
                f"Kraus set {self.label!r} is incomplete (deviation {err:.3e})"
            )

    def superoperator(self) -> np.ndarray:
        """4x4 matrix acting on (row, column) index pairs, see ``apply_superop``."""
        return sum(np.kron(k, k.conj()) for k in self.operators)


@dataclass(frozen=True)
class Observable:
    matrix: np.ndarray
    description: str = ""

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise QuantumStateError("observable must be a square matrix")
        _n_qubits_for(m.shape[0])
        if np.max(np.abs(m - m.conj().T)) >= HERMITIAN_TOL:
            raise QuantumStateError("observable is not Hermitian")
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return _n_qubits_for(self.matrix.shape[0])

    @property
    def diagonal(self) -> np.ndarray | None:
        """Real diagonal if the observable is diagonal in the computational basis."""
        m = self.matrix
        if np.count_nonzero(m - np.diag(np.diag(m))):
            return None
        return np.diag(m).real.copy()


def z_values(n: int) -> np.ndarray:
    """``(n, 2**n)`` table of Z eigenvalues, row ``q`` for qubit ``q``."""
    idx = np.arange(2**n)
    return np.array([1.0 - 2.0 * ((idx >> q) & 1) for q in range(n)])


def mean_z(n: int) -> Observable:
    """(1/n) sum_k Z_k."""
    return Observable(np.diag(z_values(n).mean(axis=0)).astype(complex), "mean-Z")


def z_parity(n: int) -> Observable:
    """Z tensored over all n qubits."""
    return Observable(np.diag(z_values(n).prod(axis=0)).astype(complex), "Z^n")


def single_qubit_observable(op: np.ndarray, wire: int, n: int, label: str = "") -> Observable:
    full = np.array([[1.0]], dtype=complex)
    for q in reversed(range(n)):
        full = np.kron(full, op if q == wire else I2)
    return Observable(full, label or f"op[{wire}]")


# --------------------------------------------------------------------------
# public operations on validated values


def _check_wires(wires: Sequence[int], n: int) -> tuple:
    wires = tuple(int(w) for w in wires)
    if len(set(wires)) != len(wires):
        raise QuantumStateError(f"wires {wires} are not distinct")
    for w in wires:
        if not 0 <= w < n:
            raise QuantumStateError(f"wire {w} out of range for {n} qubits")
    return wires


def apply_unitary(state: DensityOperator, gate_matrix, wires: Sequence[int]) -> DensityOperator:
    """Return ``U rho U^dagger`` with ``U`` acting on ``wires``."""
    wires = _check_wires(wires, state.n)
    u = np.asarray(gate_matrix, dtype=complex)
    if u.shape != (2 ** len(wires),) * 2:
        raise QuantumStateError(f"gate shape {u.shape} does not match {len(wires)} wires")
    if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) >= UNITARY_TOL:
        raise QuantumStateError("gate matrix is not unitary")
    rho = density_tensor(state.matrix[None], state.n)
    rho = apply_unitary_density(rho, u, wires, state.n)
    return DensityOperator(density_matrix(rho)[0])


def apply_kraus(state: DensityOperator, channel: KrausChannel, wire: int) -> DensityOperator:
    """Return ``sum_i K_i rho K_i^dagger`` with the channel on ``wire``."""
    (wire,) = _check_wires([wire], state.n)
    rho = density_tensor(state.matrix[None], state.n)
    rho = apply_superop(rho, channel.superoperator(), wire, state.n)
    return DensityOperator(density_matrix(rho)[0])


def partial_trace_single(state: DensityOperator, keep: int) -> DensityOperator:
    (keep,) = _check_wires([keep], state.n)
    n = state.n
    t = state.matrix.reshape((2,) * (2 * n))
    row, col = n - 1 - keep, 2 * n - 1 - keep
    # trace out every other qubit pairwise
    letters = [chr(ord("a") + i) for i in range(2 * n)]
    for q in range(n):
        if q != keep:
            letters[n + n - 1 - q] = letters[n - 1 - q]
    sub = "".join(letters) + "->" + letters[row] + letters[col]
    return DensityOperator(np.einsum(sub, t))


def purity(state: DensityOperator) -> float:
    """Tr(rho^2)."""
    rho = state.matrix
    return float(np.sum(np.abs(rho) ** 2))


def hermitian_eigendecomposition(state: DensityOperator):
    """Eigenvalues in descending order and matching eigenstates.

    Eigenvalues below ``EIGEN_FLOOR`` are clamped to zero; consumers that
    build decompositions (such as the entanglement of formation) skip them.
    Inside a degenerate eigenspace the basis is whatever LAPACK returns.

    Returns
    -------
    (np.ndarray, list[PureState])
    """
    m = state.matrix if isinstance(state, DensityOperator) else np.asarray(state, dtype=complex)
    if np.max(np.abs(m - m.conj().T)) >= HERMITIAN_TOL:
        raise QuantumStateError("eigendecomposition requires a Hermitian input")
    vals, vecs = np.linalg.eigh(m)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    vals = np.where(vals >= EIGEN_FLOOR, vals, 0.0)
    return vals, [PureState(vecs[:, i]) for i in range(len(vals))]


def expectation(state: DensityOperator, obs: Observable) -> float:
    if obs.matrix.shape != state.matrix.shape:
        raise QuantumStateError(
            f"observable shape {obs.matrix.shape} does not match state {state.matrix.shape}"
        )
    value = np.trace(obs.matrix @ state.matrix)
    if abs(value.imag) > 1e-10:
        raise QuantumStateError(f"expectation has imaginary residue {value.imag:.3e}")
    return float(value.real)


def state_fidelity(a, b) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(a) b sqrt(a)))**2``.

    Accepts :class:`PureState` or :class:`DensityOperator`; for two pure states
    this is the squared overlap.
    """
    if isinstance(a, PureState) and isinstance(b, PureState):
        if a.n != b.n:
            raise QuantumStateError("fidelity of states with different qubit counts")
        return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)
    ra = a.density().matrix if isinstance(a, PureState) else a.matrix
    rb = b.density().matrix if isinstance(b, PureState) else b.matrix
    if ra.shape != rb.shape:
        raise QuantumStateError("fidelity of states with different dimensions")
    return float(uhlmann_fidelity_batch(ra[None], rb[None])[0])


# --------------------------------------------------------------------------
# batched kernels
#
# A batch of pure states is a tensor of shape (B, 2, ..., 2) with n qubit
# axes; a batch of density operators has shape (B, 2, ..., 2) with 2n axes
# (rows first, then columns). Qubit q lives on axis 1 + (n - 1 - q) for rows
# and 1 + n + (n - 1 - q) for columns.


def pure_tensor(vectors: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(vectors, dtype=complex).reshape((-1,) + (2,) * n)


def pure_vectors(psi: np.ndarray) -> np.ndarray:
    return psi.reshape(psi.shape[0], -1)


def density_tensor(matrices: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(matrices, dtype=complex).reshape((-1,) + (2,) * (2 * n))


def density_matrix(rho: np.ndarray) -> np.ndarray:
    b = rho.shape[0]
    d = int(round(np.sqrt(rho[0].size)))
    return rho.reshape(b, d, d)


def zero_pure(batch: int, n: int) -> np.ndarray:
    psi = np.zeros((batch, 2**n), dtype=complex)
    psi[:, 0] = 1.0
    return pure_tensor(psi, n)


def zero_density(batch: int, n: int) -> np.ndarray:
    rho = np.zeros((batch, 2**n, 2**n), dtype=complex)
    rho[:, 0, 0] = 1.0
    return density_tensor(rho, n)


def row_axis(q: int, n: int) -> int:
    return 1 + (n - 1 - q)


def col_axis(q: int, n: int) -> int:
    return 1 + n + (n - 1 - q)


def apply_matrix(tensor: np.ndarray, mat: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Contract a ``2**k`` square matrix (or a ``(B, 2**k, 2**k)`` stack) into ``axes``.

    ``axes[j]`` is the tensor axis that carries local bit ``j`` of the matrix.
    """
    k = len(axes)
    front = list(range(1, k + 1))
    msb_first = list(reversed(axes))
    moved = np.moveaxis(tensor, msb_first, front)
    shape = moved.shape
    out = np.matmul(mat, moved.reshape(shape[0], 2**k, -1))
    return np.moveaxis(out.reshape(shape), front, msb_first)


def density_axes(wires: Sequence[int], n: int) -> list:
    """Axes for a superoperator on ``wires``: column bits first, then row bits."""
    return [col_axis(w, n) for w in wires] + [row_axis(w, n) for w in wires]


def unitary_superop(mat: np.ndarray) -> np.ndarray:
    """``kron(U, U*)`` for a matrix or a stack of matrices."""
    if mat.ndim == 2:
        return np.kron(mat, mat.conj())
    b, d, _ = mat.shape
    return np.einsum("bij,bkl->bikjl", mat, mat.conj()).reshape(b, d * d, d * d)


def lift_kraus(op: np.ndarray, j: int, k: int) -> np.ndarray:
    """Embed a single-qubit operator on local bit ``j`` of a ``k``-qubit space."""
    full = np.array([[1.0]], dtype=complex)
    for q in reversed(range(k)):
        full = np.kron(full, op if q == j else I2)
    return full


def apply_unitary_pure(psi: np.ndarray, mat: np.ndarray, wires: Sequence[int], n: int) -> np.ndarray:
    return apply_matrix(psi, mat, [row_axis(w, n) for w in wires])


def apply_unitary_density(rho: np.ndarray, mat: np.ndarray, wires: Sequence[int], n: int) -> np.ndarray:
    return apply_matrix(rho, unitary_superop(mat), density_axes(wires, n))


def apply_superop(rho: np.ndarray, superop: np.ndarray, wire: int, n: int) -> np.ndarray:
    """Apply a single-qubit channel in superoperator form (``kron(K, K*)`` sums)."""
    return apply_matrix(rho, superop, density_axes([wire], n))


def probabilities_pure(psi: np.ndarray) -> np.ndarray:
    v = pure_vectors(psi)
    return v.real**2 + v.imag**2


def probabilities_density(rho: np.ndarray) -> np.ndarray:
    return np.einsum("bii->bi", density_matrix(rho)).real.copy()


def expectation_batch(state: np.ndarray, obs: Observable, pure: bool) -> np.ndarray:
    diag = obs.diagonal
    if diag is not None:
        probs = probabilities_pure(state) if pure else probabilities_density(state)
        return probs @ diag
    if pure:
        v = pure_vectors(state)
        return np.einsum("bi,ij,bj->b", v.conj(), obs.matrix, v).real
    return np.einsum("ij,bji->b", obs.matrix, density_matrix(state)).real


def reduced_purities_pure(vectors: np.ndarray, n: int) -> np.ndarray:
    """``(B, n)`` array of Tr(rho_k^2) for every qubit of each pure state."""
    psi = np.asarray(vectors).reshape((-1,) + (2,) * n)
    out = np.empty((psi.shape[0], n))
    for q in range(n):
        a = np.moveaxis(psi, row_axis(q, n), 1).reshape(psi.shape[0], 2, -1)
        red = a @ a.conj().transpose(0, 2, 1)
        out[:, q] = np.sum(np.abs(red) ** 2, axis=(1, 2))
    return out


def psd_sqrt_batch(mats: np.ndarray) -> np.ndarray:
    """Matrix square roots; eigenvalues below ``EIGEN_FLOOR`` count as zero."""
    vals, vecs = np.linalg.eigh(mats)
    root = np.sqrt(np.where(vals >= EIGEN_FLOOR, vals, 0.0))
    return (vecs * root[:, None, :]) @ vecs.conj().transpose(0, 2, 1)


def uhlmann_fidelity_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise Uhlmann fidelity of two stacks of density matrices.

    Uses ``F = ||sqrt(a) sqrt(b)||_1^2`` (nuclear norm), which is symmetric by
    construction and avoids a second square root of small noisy eigenvalues.
    """
    sv = np.linalg.svd(psd_sqrt_batch(a) @ psd_sqrt_batch(b), compute_uv=False)
    return np.clip(sv.sum(axis=1) ** 2, 0.0, 1.0)


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> DensityOperator:
    """Random mixed state from a Ginibre matrix of the given rank."""
    d = 2**n
    g = rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))
    rho = g @ g.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return DensityOperator(rho / np.trace(rho).real)


def random_pure(n: int, rng: np.random.Generator) -> PureState:
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return PureState(v / np.linalg.norm(v))
