"""Ansatz layouts and the batched circuit simulator.

A model with ``L`` encoding layers is laid out as::

    W(0)  S(0)  W(1)  S(1) ... S(L-1)  W(L)

where every ``W`` is one copy of the ansatz template and every ``S`` encodes
each feature with one Pauli rotation per target wire. Rotations follow
``R_P(a) = exp(-i a P / 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from . import quantum as qc
from .noise import CgeDraw, NoiseModel, kraus_for, sample_cge

ANSATZ_KINDS = ("SEA", "HEA", "C15", "C19")
DEBUG_KINDS = ("IDLE", "RY")
ROTATIONS = ("RX", "RY", "RZ")
PARAMETRIC = ROTATIONS + ("CRX",)

# elements of a (B, d, d) density stack or (B, d) state stack per chunk
_CHUNK_ELEMENTS = 1 << 21


class CircuitError(ValueError):
    pass


class GateSpec(NamedTuple):
    kind: str
    wires: tuple
    param: int | None = None  # trainable slot or encoding slot, see ``role``
    role: str | None = None  # "trainable", "encoding" or None for CNOT
    feature: int | None = None  # 0-based feature index for encoding gates
    block: int = 0  # index of the W or S block the gate belongs to


@dataclass(frozen=True)
class EncodingSpec:
    """Per-feature Pauli axis and target wires (``None`` = every wire)."""

    axes: tuple = ("Y",)
    wires: tuple | None = None

    def __post_init__(self):
        axes = tuple(a.upper() for a in self.axes)
        if not axes:
            raise CircuitError("encoding needs at least one feature")
        if any(a not in ("X", "Y", "Z") for a in axes):
            raise CircuitError(f"encoding axes must be X, Y or Z, got {axes}")
        object.__setattr__(self, "axes", axes)
        if self.wires is not None:
            wires = tuple(tuple(w) for w in self.wires)
            if len(wires) != len(axes):
                raise CircuitError("one wire list per encoded feature is required")
            object.__setattr__(self, "wires", wires)

    @classmethod
    def parse(cls, text: str) -> "EncodingSpec":
        """``"y"`` -> one feature on Y, ``"xy"`` -> X for feature 0, Y for feature 1."""
        return cls(tuple(text.upper()))

    @property
    def n_features(self) -> int:
        return len(self.axes)


@dataclass(frozen=True)
class CircuitLayout:
    n: int
    layers: int
    n_features: int
    gates: tuple
    ansatz: str
    encoding_axes: tuple
    params_per_layer: int

    def __post_init__(self):
        slots = sorted(g.param for g in self.gates if g.role == "trainable")
        if slots != list(range(len(slots))):
            raise CircuitError("trainable slots must be contiguous from 0")
        enc = sorted(g.param for g in self.gates if g.role == "encoding")
        if enc != list(range(len(enc))):
            raise CircuitError("encoding slots must be contiguous from 0")
        for g in self.gates:
            if g.kind == "CNOT" and g.param is not None:
                raise CircuitError("CNOT carries no parameter")
            if g.kind in PARAMETRIC and g.param is None:
                raise CircuitError(f"{g.kind} needs a parameter slot")
            if any(not 0 <= w < self.n for w in g.wires) or len(set(g.wires)) != len(g.wires):
                raise CircuitError(f"bad wires {g.wires} for {self.n} qubits")
            if g.role == "encoding" and not 0 <= g.feature < self.n_features:
                raise CircuitError(f"feature index {g.feature} out of range")

    @property
    def n_params(self) -> int:
        return sum(g.role == "trainable" for g in self.gates)

    @property
    def n_encoding(self) -> int:
        return sum(g.role == "encoding" for g in self.gates)

    def slot_kinds(self) -> list:
        """Gate kind of every trainable slot, in slot order."""
        kinds = [None] * self.n_params
        for g in self.gates:
            if g.role == "trainable":
                kinds[g.param] = g.kind
        return kinds


# --------------------------------------------------------------------------
# ansatz templates: sequences of (kind, wires); parametric gates take the next slot


def _ring(n: int, step: int, order: Sequence[int]) -> list:
    return [("CNOT", (i, (i + step) % n)) for i in order]


def _template(ansatz: str, n: int) -> list:
    ring = n > 1
    if ansatz == "SEA":
        ops = [(k, (q,)) for q in range(n) for k in ("RZ", "RY", "RZ")]
        return ops + (_ring(n, 1, range(n)) if ring else [])
    if ansatz == "HEA":
        ops = [(k, (q,)) for q in range(n) for k in ("RY", "RZ")]
        return ops + (_ring(n, 1, range(n)) if ring else [])
    if ansatz == "C15":
        col = [("RY", (q,)) for q in range(n)]
        if not ring:
            return col + col
        return col + _ring(n, -1, range(n - 1, -1, -1)) + col + _ring(n, 1, range(n))
    if ansatz == "C19":
        ops = [("RX", (q,)) for q in range(n)] + [("RZ", (q,)) for q in range(n)]
        if ring:
            ops += [("CRX", (i, (i + 1) % n)) for i in range(n)]
        return ops
    if ansatz == "RY":
        return [("RY", (q,)) for q in range(n)]
    if ansatz == "IDLE":
        return []
    raise CircuitError(f"unknown ansatz kind {ansatz!r}")


def params_per_layer(ansatz: str, n: int) -> int:
    return sum(kind in PARAMETRIC for kind, _ in _template(ansatz.upper(), n))


def build_circuit(ansatz: str, n: int, layers: int = 1, enc: EncodingSpec | str | None = None) -> CircuitLayout:
    """Lay out ``W S W ... S W`` for one of SEA, HEA, C15, C19 (or IDLE / RY).

    Parameters per trainable layer: SEA 3n, HEA 2n, C15 2n, C19 3n.

    Examples
    --------
    >>> build_circuit("sea", 4, 1).n_params
    24
    """
    ansatz = ansatz.upper()
    if isinstance(enc, str):
        enc = EncodingSpec.parse(enc)
    enc = enc or EncodingSpec()
    if n < 1:
        raise CircuitError("need at least one qubit")
    if layers < 1:
        raise CircuitError("need at least one encoding layer")
    template = _template(ansatz, n)
    gates = []
    slot = 0
    enc_slot = 0

    def trainable_block(block):
        nonlocal slot
        for kind, wires in template:
            if kind in PARAMETRIC:
                gates.append(GateSpec(kind, wires, slot, "trainable", None, block))
                slot += 1
            else:
                gates.append(GateSpec(kind, wires, None, None, None, block))

    for layer in range(layers):
        trainable_block(layer)
        for d, axis in enumerate(enc.axes):
            targets = range(n) if enc.wires is None else enc.wires[d]
            for w in targets:
                gates.append(GateSpec("R" + axis, (w,), enc_slot, "encoding", d, layer))
                enc_slot += 1
    trainable_block(layers)
    return CircuitLayout(
        n=n,
        layers=layers,
        n_features=enc.n_features,
        gates=tuple(gates),
        ansatz=ansatz,
        encoding_axes=enc.axes,
        params_per_layer=params_per_layer(ansatz, n),
    )


def strip_for_metrics(layout: CircuitLayout) -> CircuitLayout:
    """Keep only the first trainable block (no encoding, no later blocks)."""
    gates = tuple(g for g in layout.gates if g.block == 0 and g.role != "encoding")
    return CircuitLayout(
        n=layout.n,
        layers=0,
        n_features=layout.n_features,
        gates=gates,
        ansatz=layout.ansatz,
        encoding_axes=(),
        params_per_layer=layout.params_per_layer,
    )


# --------------------------------------------------------------------------
# gate matrices on stacks of angles


def rotation_matrices(kind: str, angles: np.ndarray) -> np.ndarray:
    a = np.asarray(angles, dtype=float)
    c = np.cos(a / 2)
    s = np.sin(a / 2)
    out = np.empty(a.shape + (2, 2), dtype=complex)
    if kind == "RX":
        out[..., 0, 0] = c
        out[..., 0, 1] = -1j * s
        out[..., 1, 0] = -1j * s
        out[..., 1, 1] = c
    elif kind == "RY":
        out[..., 0, 0] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
        out[..., 1, 1] = c
    elif kind == "RZ":
        out[..., 0, 0] = np.exp(-0.5j * a)
        out[..., 0, 1] = 0
        out[..., 1, 0] = 0
        out[..., 1, 1] = np.exp(0.5j * a)
    else:
        raise CircuitError(f"{kind} is not a single-qubit rotation")
    return out


CNOT = np.eye(4, dtype=complex)[[0, 3, 2, 1]]  # control = local bit 0


def crx_matrices(angles: np.ndarray) -> np.ndarray:
    rx = rotation_matrices("RX", angles)
    out = np.zeros(rx.shape[:-2] + (4, 4), dtype=complex)
    out[..., 0, 0] = 1
    out[..., 2, 2] = 1
    # control set -> local indices 1 (target 0) and 3 (target 1)
    out[..., 1, 1] = rx[..., 0, 0]
    out[..., 1, 3] = rx[..., 0, 1]
    out[..., 3, 1] = rx[..., 1, 0]
    out[..., 3, 3] = rx[..., 1, 1]
    return out


def gate_matrices(kind: str, angles: np.ndarray | None) -> np.ndarray:
    if kind == "CNOT":
        return CNOT
    if kind == "CRX":
        return crx_matrices(angles)
    return rotation_matrices(kind, angles)


# --------------------------------------------------------------------------
# simulation


def _composite_kraus(model: NoiseModel) -> list:
    """Kraus set of BF then PF then DP on one wire (empty if none active)."""
    ops = [qc.I2]
    active = model.gate_channels()
    if not active:
        return []
    for channel in active:
        ops = [k @ o for k in channel.operators for o in ops]
    return ops


def _terminal_kraus(model: NoiseModel, stage: str) -> list:
    if stage == "prepare":
        chain = [kraus_for("BF", model.p_sp)] if model.p_sp > 0 else []
    else:
        chain = [kraus_for(k, getattr(model, f"p_{k.lower()}")) for k in ("AD", "PD")
                 if getattr(model, f"p_{k.lower()}") > 0]
        if model.p_me > 0:
            chain.append(kraus_for("BF", model.p_me))
    if not chain:
        return []
    ops = [qc.I2]
    for channel in chain:
        ops = [k @ o for k in channel.operators for o in ops]
    return ops


@lru_cache(maxsize=256)
def _noise_superops(model: NoiseModel, k: int):
    """Local superoperator of the after-gate noise for a ``k``-wire gate."""
    ops = _composite_kraus(model)
    if not ops:
        return None
    total = np.eye(4**k, dtype=complex)
    for j in range(k):
        lifted = [qc.lift_kraus(o, j, k) for o in ops]
        total = sum(np.kron(m, m.conj()) for m in lifted) @ total
    return total


@lru_cache(maxsize=256)
def _terminal_superop(model: NoiseModel, stage: str):
    ops = _terminal_kraus(model, stage)
    if not ops:
        return None
    return sum(np.kron(k, k.conj()) for k in ops)


def _as_batch(values, width: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1 and arr.size == width:
        arr = arr.reshape(1, width)
    if arr.ndim != 2 or arr.shape[1] != width:
        raise CircuitError(f"{name} must have {width} columns, got shape {arr.shape}")
    return arr


def _gate_angles(gate: GateSpec, features, params, enc_off, train_off, model) -> np.ndarray | None:
    if gate.role == "trainable":
        return params[:, gate.param] + train_off[:, gate.param]
    if gate.role == "encoding":
        x = features[:, gate.feature]
        eps = enc_off[:, gate.param]
        if model.cge_encoding == "frequency":
            return x * (1.0 + eps)
        return x + eps
    return None


def _cge_arrays(layout: CircuitLayout, cge):
    if cge is None:
        return np.zeros((1, layout.n_encoding)), np.zeros((1, layout.n_params))
    if isinstance(cge, CgeDraw):
        enc, train = cge.encoding_offsets, cge.trainable_offsets
    else:
        enc, train = cge
    return (_as_batch(enc, layout.n_encoding, "encoding offsets"),
            _as_batch(train, layout.n_params, "trainable offsets"))


def simulate(layout: CircuitLayout, features, params, noise: NoiseModel | None = None,
             cge=None, force_density: bool = False):
    """Final states for a stack of (feature, parameter) rows.

    ``features`` is ``(B, D)`` and ``params`` is ``(B, P)``; either may be a
    single row that is broadcast, and ``features=None`` means all-zero
    inputs. ``cge`` is a :class:`CgeDraw` (shared by all rows) or a pair of
    ``(B, E)`` / ``(B, P)`` offset arrays. The noise model's
    own ``p_cge`` is ignored here; offsets must be passed explicitly.

    Returns ``(tensor, pure)`` where ``tensor`` is a pure-state stack if
    ``pure`` is True and a density stack otherwise.
    """
    noise = noise or NoiseModel()
    if features is None:
        features = np.zeros((1, layout.n_features))
    features = _as_batch(features, layout.n_features, "features")
    params = _as_batch(params, layout.n_params, "params")
    enc_off, train_off = _cge_arrays(layout, cge)
    batch = max(features.shape[0], params.shape[0], enc_off.shape[0], train_off.shape[0])
    features = np.broadcast_to(features, (batch, features.shape[1]))
    params = np.broadcast_to(params, (batch, params.shape[1]))
    enc_off = np.broadcast_to(enc_off, (batch, enc_off.shape[1]))
    train_off = np.broadcast_to(train_off, (batch, train_off.shape[1]))

    pure = not (noise.is_decoherent or force_density)
    n = layout.n
    per_row = 2**n if pure else 4**n
    chunk = max(1, _CHUNK_ELEMENTS // per_row)
    pieces = []
    for lo in range(0, batch, chunk):
        sl = slice(lo, min(batch, lo + chunk))
        args = (layout, features[sl], params[sl], enc_off[sl], train_off[sl], noise)
        pieces.append(_run_pure(*args) if pure else _run_density(*args))
    return np.concatenate(pieces, axis=0), pure


def _run_pure(layout, features, params, enc_off, train_off, noise):
    n = layout.n
    psi = qc.zero_pure(features.shape[0], n)
    for gate in layout.gates:
        mat = gate_matrices(gate.kind, _gate_angles(gate, features, params, enc_off, train_off, noise))
        psi = qc.apply_unitary_pure(psi, mat, gate.wires, n)
    return psi


def _run_density(layout, features, params, enc_off, train_off, noise):
    n = layout.n
    rho = qc.zero_density(features.shape[0], n)
    prep = _terminal_superop(noise, "prepare")
    if prep is not None:
        for w in range(n):
            rho = qc.apply_superop(rho, prep, w, n)
    for gate in layout.gates:
        mat = gate_matrices(gate.kind, _gate_angles(gate, features, params, enc_off, train_off, noise))
        sup = qc.unitary_superop(mat)
        after = _noise_superops(noise, len(gate.wires))
        if after is not None:
            sup = np.matmul(after, sup)
        rho = qc.apply_matrix(rho, sup, qc.density_axes(gate.wires, n))
    final = _terminal_superop(noise, "final")
    if final is not None:
        for w in range(n):
            rho = qc.apply_superop(rho, final, w, n)
    return rho


def expectation_values(layout: CircuitLayout, features, params, noise: NoiseModel | None = None,
                       obs: qc.Observable | None = None, cge=None) -> np.ndarray:
    """Model outputs for a stack of rows; see :func:`simulate` for shapes."""
    obs = obs or qc.mean_z(layout.n)
    if obs.n != layout.n:
        raise CircuitError("observable acts on a different number of qubits")
    state, pure = simulate(layout, features, params, noise, cge)
    return qc.expectation_batch(state, obs, pure)


def _validate_inputs(layout, x, theta):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if x.shape[-1] != layout.n_features:
        raise CircuitError(f"expected {layout.n_features} features, got {x.shape[-1]}")
    if theta.size != layout.n_params:
        raise CircuitError(f"expected {layout.n_params} parameters, got {theta.size}")
    return x, theta


def evaluate(layout: CircuitLayout, x, theta, noise: NoiseModel | None = None,
             obs: qc.Observable | None = None, rng: np.random.Generator | None = None) -> float:
    """f(x, theta): expectation of ``obs`` (default mean Z) after the circuit.

    A CGE draw is taken from ``rng`` when the noise model has ``p_cge > 0``.
    """
    return float(evaluate_grid(layout, np.atleast_1d(x)[None, :], theta, noise, obs, rng)[0])


def evaluate_grid(layout: CircuitLayout, x_grid, theta, noise: NoiseModel | None = None,
                  obs: qc.Observable | None = None, rng: np.random.Generator | None = None,
                  cge: CgeDraw | None = None) -> np.ndarray:
    """f over a grid of inputs with a single CGE draw held fixed across the grid."""
    noise = noise or NoiseModel()
    grid = np.asarray(x_grid, dtype=float)
    if grid.ndim == 1:
        grid = grid[:, None]
    if grid.shape[0] == 0:
        raise CircuitError("empty input grid")
    _, theta = _validate_inputs(layout, grid[0], theta)
    if cge is None and noise.has_cge:
        if rng is None:
            raise CircuitError("a random generator is required for coherent gate errors")
        cge = sample_cge(layout, noise, rng)
    return expectation_values(layout, grid, theta[None, :], noise, obs, cge)
