"""Regression of random Fourier series with Adam, plus gradient estimators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import quantum as qc
from .circuits import CircuitLayout, simulate
from .fourier import Spectrum
from .metrics import eof_batch, mw_batch
from .noise import NoiseModel, sample_cge

GRADIENT_METHODS = ("parameter-shift", "finite-difference")
_METHOD_ALIASES = {"ps": "parameter-shift", "fd": "finite-difference"}
FD_STEP = 1e-5

# four-term shift rule for controlled rotations (generator eigenvalues 0, +-1/2)
_CRX_SHIFTS = (np.pi / 2, 3 * np.pi / 2)
_CRX_COEFFS = ((np.sqrt(2) + 1) / (4 * np.sqrt(2)), -(np.sqrt(2) - 1) / (4 * np.sqrt(2)))


class TrainingDiverged(RuntimeError):
    """Loss or parameters became non-finite; ``trace`` holds the records so far."""

    def __init__(self, message: str, trace: "TrainingTrace"):
        super().__init__(message)
        self.trace = trace


# --------------------------------------------------------------------------
# targets


@dataclass(frozen=True)
class TargetSeries:
    """Real Fourier series ``f'(x) = sum_w c'_w exp(i w x)`` on a fixed grid."""

    frequencies: np.ndarray  # (M,) integers, ascending and symmetric
    coefficients: np.ndarray  # (M,) complex, conjugate symmetric
    a: float
    seed: object
    grid: np.ndarray  # (s,) sample points

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.real(np.exp(1j * np.multiply.outer(x, self.frequencies)) @ self.coefficients)

    @property
    def values(self) -> np.ndarray:
        return self(self.grid)

    @property
    def max_frequency(self) -> int:
        return int(self.frequencies.max())


def target_grid(s: int) -> np.ndarray:
    """``s`` evenly spaced points on ``[-pi, pi)``."""
    return -np.pi + 2 * np.pi * np.arange(s) / s


def generate_target(spectrum: Spectrum, a: float = 0.5, seed=None) -> TargetSeries:
    """Random real Fourier series over a one-dimensional integer spectrum.

    Positive frequencies get a magnitude from U[0, 1] and a phase from
    U[0, 2pi); negative ones mirror them by conjugation and ``r_0`` is real
    with a random sign. The series is scaled so that its largest absolute
    value on the grid equals ``a``.
    """
    if a <= 0:
        raise ValueError("normalisation a must be positive")
    freqs = np.asarray(spectrum.frequencies)
    if freqs.ndim == 2:
        if freqs.shape[1] != 1:
            raise ValueError("targets are only defined for one-dimensional inputs")
        freqs = freqs[:, 0]
    if freqs.size == 0:
        raise ValueError("empty spectrum")
    k = int(np.max(freqs))
    omegas = np.arange(-k, k + 1)
    if not np.array_equal(np.sort(freqs), omegas):
        raise ValueError("target generation needs a contiguous symmetric spectrum")

    rng = np.random.default_rng(seed)
    r = np.zeros(2 * k + 1, dtype=complex)
    r[k] = rng.uniform(0.0, 1.0) * rng.choice([-1.0, 1.0])
    for w in range(1, k + 1):
        mag = rng.uniform(0.0, 1.0)
        phase = rng.uniform(0.0, 2 * np.pi)
        r[k + w] = mag * np.exp(1j * phase)
        r[k - w] = np.conj(r[k + w])

    grid = target_grid(len(omegas))
    raw = np.real(np.exp(1j * np.outer(grid, omegas)) @ r)
    scale = np.max(np.abs(raw))
    if scale == 0:
        raise ValueError("degenerate target draw")
    return TargetSeries(omegas, a * r / scale, float(a), seed, grid)


def mse(target_values, model_values) -> float:
    t = np.asarray(target_values, dtype=float)
    m = np.asarray(model_values, dtype=float)
    if t.shape != m.shape:
        raise ValueError(f"length mismatch: {t.shape} vs {m.shape}")
    return float(np.mean((t - m) ** 2))


def grid_coefficients(values, grid, frequencies) -> np.ndarray:
    """Direct DFT ``(1/s) sum_k f(x_k) exp(-i w x_k)`` of samples on an even grid."""
    phase = np.exp(-1j * np.outer(frequencies, grid))
    return phase @ np.asarray(values) / len(grid)


def coefficient_gap(target: TargetSeries, model_coefficients, frequencies=None) -> np.ndarray:
    """``| |c_w| - |c'_w| |`` for every target frequency.

    ``model_coefficients`` are aligned with ``frequencies`` (the target's own
    frequencies by default).
    """
    c = np.asarray(model_coefficients)
    if frequencies is not None and not np.array_equal(np.asarray(frequencies), target.frequencies):
        raise ValueError("model and target spectra differ")
    if c.shape != target.coefficients.shape:
        raise ValueError("model and target spectra differ")
    return np.abs(np.abs(c) - np.abs(target.coefficients))


# --------------------------------------------------------------------------
# gradients


def _shift_plan(layout: CircuitLayout, method: str):
    """Rows of (slot, shift, weight) whose weighted sum gives df/dtheta_slot."""
    plan = []
    for slot, kind in enumerate(layout.slot_kinds()):
        if method == "finite-difference":
            plan += [(slot, FD_STEP, 0.5 / FD_STEP), (slot, -FD_STEP, -0.5 / FD_STEP)]
        elif kind == "CRX":
            for s, c in zip(_CRX_SHIFTS, _CRX_COEFFS):
                plan += [(slot, s, c), (slot, -s, -c)]
        else:
            plan += [(slot, np.pi / 2, 0.5), (slot, -np.pi / 2, -0.5)]
    return plan


def _resolve_method(method: str) -> str:
    method = _METHOD_ALIASES.get(method, method)
    if method not in GRADIENT_METHODS:
        raise ValueError(f"unknown gradient method {method!r}")
    return method


def _expectations(layout, x, params, noise, cge, obs):
    states, pure = simulate(layout, x, params, noise, cge)
    obs = obs or qc.mean_z(layout.n)
    return qc.expectation_batch(states, obs, pure)


def model_jacobian(layout: CircuitLayout, x_grid, theta, noise: NoiseModel | None = None,
                   method: str = "parameter-shift", cge=None, obs=None):
    """Model values ``f(x_k)`` and Jacobian ``df(x_k)/dtheta_j`` on a 1-D grid.

    All shifted circuits are simulated in one batch; ``cge`` (a frozen
    :class:`CgeDraw` or ``None``) is shared by every evaluation.

    Returns
    -------
    values : ndarray, shape (s,)
    jac : ndarray, shape (s, P)
    """
    noise = noise or NoiseModel()
    method = _resolve_method(method)
    x = np.asarray(x_grid, dtype=float).reshape(-1, 1)
    theta = np.asarray(theta, dtype=float)
    plan = _shift_plan(layout, method)
    params = np.tile(theta, (len(plan) + 1, 1))
    for row, (slot, shift, _) in enumerate(plan, start=1):
        params[row, slot] += shift
    s = x.shape[0]
    out = _expectations(layout, np.tile(x, (len(plan) + 1, 1)), np.repeat(params, s, axis=0),
                        noise, cge, obs).reshape(len(plan) + 1, s)
    jac = np.zeros((s, layout.n_params))
    for row, (slot, _, weight) in enumerate(plan, start=1):
        jac[:, slot] += weight * out[row]
    return out[0], jac


def gradient(layout: CircuitLayout, theta, target: TargetSeries, noise: NoiseModel | None = None,
             method: str = "parameter-shift", rng: np.random.Generator | None = None,
             cge=None) -> np.ndarray:
    """Gradient of the grid MSE with respect to ``theta``.

    Under coherent gate errors one offset draw (``cge`` or sampled from
    ``rng``) is frozen for all shifted evaluations.
    """
    noise = noise or NoiseModel()
    if noise.has_cge and cge is None:
        if rng is None:
            raise ValueError("a random generator is required for coherent gate errors")
        cge = sample_cge(layout, noise, rng)
    values, jac = model_jacobian(layout, target.grid, theta, noise, method, cge)
    return 2.0 * (values - target.values) @ jac / len(target.grid)


# --------------------------------------------------------------------------
# optimiser and training loop


class Adam:
    """Adam with bias correction; ``step`` returns the updated parameters."""

    def __init__(self, lr: float = 0.01, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(grad)
            self.v = np.zeros_like(grad)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass(frozen=True)
class TrainingConfig:
    lr: float = 0.01
    steps: int = 1000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    noise: NoiseModel = field(default_factory=NoiseModel)
    gradient: str = "parameter-shift"
    record_every: int = 1
    entanglement_every: int = 10
    entanglement_x: float = 0.0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.steps < 0:
            raise ValueError("step count must be non-negative")
        if self.record_every < 1 or self.entanglement_every < 1:
            raise ValueError("trace cadences must be positive")
        object.__setattr__(self, "gradient", _resolve_method(self.gradient))

    def to_dict(self) -> dict:
        return {
            "lr": self.lr, "steps": self.steps, "beta1": self.beta1, "beta2": self.beta2,
            "eps": self.eps, "noise": self.noise.to_dict(), "gradient": self.gradient,
            "record_every": self.record_every, "entanglement_every": self.entanglement_every,
            "entanglement_x": self.entanglement_x,
        }


@dataclass
class TrainingTrace:
    frequencies: np.ndarray
    steps: list = field(default_factory=list)
    mse: list = field(default_factory=list)
    abs_c: list = field(default_factory=list)
    delta_c: list = field(default_factory=list)
    q_steps: list = field(default_factory=list)
    q: list = field(default_factory=list)
    theta: np.ndarray | None = None
    header: dict = field(default_factory=dict)

    @property
    def initial_mse(self) -> float:
        return self.mse[0]

    @property
    def final_mse(self) -> float:
        return self.mse[-1]

    def delta_at(self, step: int) -> np.ndarray:
        return self.delta_c[self.steps.index(step)]


def _entanglement(layout, theta, noise, cge, x) -> float:
    states, pure = simulate(layout, np.array([[x]]), theta, noise, cge)
    if pure:
        return float(mw_batch(qc.pure_vectors(states), layout.n)[0])
    return float(eof_batch(qc.density_matrix(states), layout.n)[0])


def train(layout: CircuitLayout, target: TargetSeries, config: TrainingConfig | None = None,
          seed=None) -> TrainingTrace:
    """Fit ``layout`` to ``target`` with Adam on the target grid.

    ``seed`` (int or ``SeedSequence``) spawns two streams: one for the
    uniform initial parameters and one for coherent-error draws, which are
    resampled once per step and shared by loss and gradient.
    """
    config = config or TrainingConfig()
    if layout.n_features != 1:
        raise ValueError("training is defined for one-dimensional inputs only")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    param_ss, noise_ss = ss.spawn(2)
    theta = np.random.default_rng(param_ss).uniform(0.0, 2 * np.pi, layout.n_params)
    noise_rng = np.random.default_rng(noise_ss)
    noise = config.noise
    y = target.values
    trace = TrainingTrace(target.frequencies, header={
        "entanglement_x": config.entanglement_x,
        "entanglement_measure": "EF" if noise.is_decoherent else "MW",
        "gradient": config.gradient,
    })
    opt = Adam(config.lr, config.beta1, config.beta2, config.eps)

    for step in range(config.steps + 1):
        cge = sample_cge(layout, noise, noise_rng) if noise.has_cge else None
        last = step == config.steps
        if last:
            values = _expectations(layout, target.grid.reshape(-1, 1), theta, noise, cge, None)
        else:
            values, jac = model_jacobian(layout, target.grid, theta, noise, config.gradient, cge)
        loss = mse(y, values)
        if step % config.record_every == 0 or last:
            coeffs = grid_coefficients(values, target.grid, target.frequencies)
            trace.steps.append(step)
            trace.mse.append(loss)
            trace.abs_c.append(np.abs(coeffs))
            trace.delta_c.append(coefficient_gap(target, coeffs))
        if step % config.entanglement_every == 0 and layout.n > 1:
            trace.q_steps.append(step)
            trace.q.append(_entanglement(layout, theta, noise, cge, config.entanglement_x))
        if not np.isfinite(loss) or not np.all(np.isfinite(theta)):
            trace.theta = theta
            raise TrainingDiverged(f"non-finite loss at step {step}", trace)
        if not last:
            grad = 2.0 * (values - y) @ jac / len(y)
            theta = opt.step(theta, grad)
    trace.theta = theta
    return trace
