"""Noise channels and where they act inside one circuit execution.

Execution order for every circuit run::

    SP bit flips -> (gate ; BF/PF/DP on each touched wire)* -> AD, PD -> ME bit flips

Coherent gate errors (CGE) never enter the density matrix machinery; they are
Gaussian offsets added to rotation angles before the gate matrices are built.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .quantum import I2, PAULI_X, PAULI_Y, PAULI_Z, KrausChannel

GATE_KINDS = ("BF", "PF", "DP")
DAMPING_KINDS = ("AD", "PD")
KRAUS_KINDS = GATE_KINDS + DAMPING_KINDS
CGE_SCOPES = frozenset({"encoding", "trainable"})

# How an encoding-gate offset enters the rotation angle:
#   "frequency": angle = (1 + eps) * x, i.e. the encoded frequency is detuned
#   "offset":    angle = x + eps, a constant phase that keeps f 2pi-periodic
CGE_ENCODING_MODES = ("frequency", "offset")


class NoiseConfigError(ValueError):
    pass


def _check_probability(p: float, name: str) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0 or np.isnan(p):
        raise NoiseConfigError(f"{name}={p} is outside [0, 1]")
    return p


def kraus_for(kind: str, p: float) -> KrausChannel:
    """Kraus set of one of the single-qubit channels BF, PF, DP, AD, PD.

    ``p = 0`` gives the identity channel with a single operator.
    """
    kind = kind.upper()
    p = _check_probability(p, f"p_{kind.lower()}")
    if p == 0.0:
        return KrausChannel((I2,), kind)
    keep = np.sqrt(1.0 - p)
    if kind == "BF":
        ops = (keep * I2, np.sqrt(p) * PAULI_X)
    elif kind == "PF":
        ops = (keep * I2, np.sqrt(p) * PAULI_Z)
    elif kind == "DP":
        w = np.sqrt(p / 3.0)
        ops = (keep * I2, w * PAULI_X, w * PAULI_Y, w * PAULI_Z)
    elif kind == "AD":
        ops = (np.array([[1, 0], [0, keep]]), np.array([[0, np.sqrt(p)], [0, 0]]))
    elif kind == "PD":
        ops = (np.array([[1, 0], [0, keep]]), np.array([[0, 0], [0, np.sqrt(p)]]))
    else:
        raise NoiseConfigError(f"unknown channel kind {kind!r}")
    return KrausChannel(ops, kind)


@dataclass(frozen=True)
class NoiseModel:
    p_bf: float = 0.0
    p_pf: float = 0.0
    p_dp: float = 0.0
    p_ad: float = 0.0
    p_pd: float = 0.0
    p_sp: float = 0.0
    p_me: float = 0.0
    p_cge: float = 0.0
    cge_scope: frozenset = field(default=CGE_SCOPES)
    cge_encoding: str = "frequency"

    def __post_init__(self):
        for name in ("p_bf", "p_pf", "p_dp", "p_ad", "p_pd", "p_sp", "p_me", "p_cge"):
            object.__setattr__(self, name, _check_probability(getattr(self, name), name))
        scope = frozenset(s.lower() for s in self.cge_scope)
        if not scope <= CGE_SCOPES:
            raise NoiseConfigError(f"unknown CGE scope {sorted(scope - CGE_SCOPES)}")
        object.__setattr__(self, "cge_scope", scope)
        if self.cge_encoding not in CGE_ENCODING_MODES:
            raise NoiseConfigError(f"unknown CGE encoding mode {self.cge_encoding!r}")

    @classmethod
    def single(cls, kind: str, level: float, cge_scope=CGE_SCOPES, **kwargs) -> "NoiseModel":
        """Model with one noise kind active (``"none"`` gives the noiseless model)."""
        kind = kind.lower()
        if kind == "none":
            return cls(**kwargs)
        name = f"p_{kind}"
        if name not in cls.__dataclass_fields__:
            raise NoiseConfigError(f"unknown noise kind {kind!r}")
        return cls(**{name: level, "cge_scope": frozenset(cge_scope), **kwargs})

    @property
    def is_decoherent(self) -> bool:
        """True if any Kraus channel is active, i.e. mixed states are needed."""
        return any(
            getattr(self, f"p_{k}") > 0 for k in ("bf", "pf", "dp", "ad", "pd", "sp", "me")
        )

    @property
    def has_cge(self) -> bool:
        return self.p_cge > 0 and bool(self.cge_scope)

    def gate_channels(self) -> list:
        return [kraus_for(k, getattr(self, f"p_{k.lower()}")) for k in GATE_KINDS
                if getattr(self, f"p_{k.lower()}") > 0]

    def without_cge(self) -> "NoiseModel":
        return replace(self, p_cge=0.0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cge_scope"] = sorted(self.cge_scope)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseModel":
        data = dict(data)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise NoiseConfigError(f"unknown noise fields {sorted(unknown)}")
        if "cge_scope" in data:
            data["cge_scope"] = frozenset(data["cge_scope"])
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "NoiseModel":
        return cls.from_dict(json.loads(text))


class GateNoiseSite(NamedTuple):
    gate_index: int
    wire: int
    kind: str


class TerminalNoiseSite(NamedTuple):
    stage: str  # "prepare", "damping" or "measure"
    wire: int
    kind: str
    p: float


def gate_noise_sites(layout, model: NoiseModel) -> list:
    """One channel per touched wire per active BF/PF/DP kind, after every gate."""
    active = [k for k in GATE_KINDS if getattr(model, f"p_{k.lower()}") > 0]
    return [
        GateNoiseSite(i, w, k)
        for i, gate in enumerate(layout.gates)
        for w in gate.wires
        for k in active
    ]


def terminal_noise_sites(layout, model: NoiseModel) -> list:
    sites = []
    wires = range(layout.n)
    if model.p_sp > 0:
        sites += [TerminalNoiseSite("prepare", w, "BF", model.p_sp) for w in wires]
    for kind in DAMPING_KINDS:
        p = getattr(model, f"p_{kind.lower()}")
        if p > 0:
            sites += [TerminalNoiseSite("damping", w, kind, p) for w in wires]
    if model.p_me > 0:
        sites += [TerminalNoiseSite("measure", w, "BF", model.p_me) for w in wires]
    return sites


@dataclass(frozen=True)
class CgeDraw:
    encoding_offsets: np.ndarray
    trainable_offsets: np.ndarray

    @classmethod
    def zeros(cls, layout) -> "CgeDraw":
        return cls(np.zeros(layout.n_encoding), np.zeros(layout.n_params))


def sample_cge(layout, model: NoiseModel, rng: np.random.Generator) -> CgeDraw:
    """Draw one offset per rotation slot from N(0, p_cge^2).

    Slots outside ``model.cge_scope`` get exactly zero. Encoding offsets are
    drawn before trainable ones so the stream layout is fixed.
    """
    enc = np.zeros(layout.n_encoding)
    train = np.zeros(layout.n_params)
    if model.p_cge > 0:
        if "encoding" in model.cge_scope:
            enc = rng.normal(0.0, model.p_cge, size=layout.n_encoding)
        if "trainable" in model.cge_scope:
            train = rng.normal(0.0, model.p_cge, size=layout.n_params)
    return CgeDraw(enc, train)
