"""Experiment grid runners: configuration, work pool, CSV/JSON persistence."""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .circuits import ANSATZ_KINDS, EncodingSpec, build_circuit, strip_for_metrics
from .fourier import (analytic_spectrum, coefficient_stats, redundancy_map, sample_coefficients,
                      spectrum_occupancy)
from .metrics import entangling_capability, expressibility
from .noise import NoiseModel
from .seeding import rng_for, seed_sequence
from .training import TrainingConfig, TrainingDiverged, generate_target, train

PAPER_LEVELS = (0.0, 0.005, 0.010, 0.015, 0.020, 0.025, 0.030)
NOISE_KINDS = ("bf", "pf", "dp", "ad", "pd", "sp", "me", "cge")
CGE_SCOPE_FLAGS = {"enc": ("encoding",), "train": ("trainable",), "both": ("encoding", "trainable")}
COMMANDS = ("spectrum", "coeffs", "expressibility", "entanglement", "train", "plot-data")

COEFF_COLUMNS = ["seed", "noise_type", "noise_level", "omega", "re_mean", "im_mean", "abs_mean",
                 "rel_std", "cov_rr", "cov_ri", "cov_ii", "ansatz", "n_qubits"]
EXPR_COLUMNS = ["seed", "noise_type", "noise_level", "n_qubits", "ansatz", "kl_divergence",
                "n_bins", "n_pairs"]
ENT_COLUMNS = ["seed", "noise_type", "noise_level", "n_qubits", "ansatz", "measure", "mean_q",
               "min_q", "max_q"]
TRAIN_COLUMNS = ["run_id", "problem_seed", "param_seed", "noise_type", "noise_level", "step",
                 "mse", "entangling_q"]
TRACE_COLUMNS = ["run_id", "step", "omega", "abs_c", "delta_c"]


def fmt(value) -> str:
    """CSV cell text; floats keep 17 significant digits."""
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def fmt_level(level) -> str:
    """Configured noise levels are labels; shortest round-trip text."""
    return repr(float(level))


def fmt_omega(omega) -> str:
    parts = []
    for w in np.atleast_1d(omega):
        w = float(w)
        parts.append(str(int(round(w))) if abs(w - round(w)) < 1e-9 else format(w, ".17g"))
    return ";".join(parts)


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    ansatz: tuple = tuple(a.lower() for a in ANSATZ_KINDS)
    qubits: tuple = (4,)
    layers: int = 1
    encoding: str = "y"
    features: int | None = None
    noise: tuple = ("none",)
    levels: tuple = PAPER_LEVELS
    cge_scope: str = "both"
    oversample: int = 1
    seeds: tuple = (0, 1, 2, 3, 4)
    problem_seeds: tuple = (0, 1, 2)
    samples: int = 50
    bins: int = 75
    pairs: int = 5000
    steps: int = 1000
    lr: float = 0.01
    paper_scale: bool = False
    out: str = "results"
    master_seed: int = 0
    threads: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        for a in self.ansatz:
            if a.upper() not in ANSATZ_KINDS:
                raise ValueError(f"unknown ansatz {a!r}")
        for k in self.noise:
            if k != "none" and k not in NOISE_KINDS:
                raise ValueError(f"unknown noise kind {k!r}")
        if self.cge_scope not in CGE_SCOPE_FLAGS:
            raise ValueError(f"unknown CGE scope {self.cge_scope!r}")
        if any(not 0.0 <= lv <= 1.0 for lv in self.levels):
            raise ValueError("noise levels must lie in [0, 1]")
        if any(n < 1 for n in self.qubits) or self.layers < 1:
            raise ValueError("qubits and layers must be positive")
        if self.command == "entanglement" and min(self.qubits) < 2:
            raise ValueError("entanglement needs at least two qubits")
        if self.oversample < 1:
            raise ValueError("oversample must be a positive integer")
        if min(self.samples, self.bins, self.pairs) < 1 or self.steps < 0:
            raise ValueError("sample counts must be positive")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master seed must fit in 64 bits")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        enc = self.encoding_spec()
        if self.features is not None and self.features != enc.n_features:
            raise ValueError(f"encoding {self.encoding!r} does not give {self.features} features")
        if self.command == "train" and enc.n_features != 1:
            raise ValueError("training targets are one-dimensional")

    def encoding_spec(self) -> EncodingSpec:
        axes = tuple(self.encoding.upper())
        if self.features is not None and len(axes) == 1:
            axes = axes * self.features
        return EncodingSpec(axes)

    def samples_for(self, n: int) -> int:
        """Parameter draws per seed; the full budget scales as 250 * 2**n."""
        return 250 * 2**n if self.paper_scale else self.samples

    def noise_cells(self) -> list:
        cells = []
        for kind in self.noise:
            if kind == "none":
                cells.append(("none", 0.0, NoiseModel()))
                continue
            for level in self.levels:
                cells.append((kind, float(level), NoiseModel.single(
                    kind, level, cge_scope=CGE_SCOPE_FLAGS[self.cge_scope])))
        return cells

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("threads")
        return d

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def paper_scale_overrides(config: ExperimentConfig) -> dict:
    """Budgets for full-scale reproduction: five sampling seeds, 10 x 10 training runs."""
    if config.command == "train":
        return {"seeds": tuple(range(10)), "problem_seeds": tuple(range(10)), "steps": 1000}
    return {"seeds": tuple(range(5))}


# --------------------------------------------------------------------------
# work pool and persistence


def thread_count(config: ExperimentConfig | None = None) -> int:
    if config is not None and config.threads:
        return max(1, int(config.threads))
    env = os.environ.get("QFM_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_cells(cells: list, work, threads: int) -> list:
    """Apply ``work`` to every cell; results (or exceptions) come back in cell order."""

    def guarded(cell):
        try:
            return work(cell), None
        except Exception as exc:  # reported per cell, never aborts the sweep
            return None, f"{cell!r}: {type(exc).__name__}: {exc}\n{traceback.format_exc()}"

    if threads <= 1 or len(cells) <= 1:
        return [guarded(c) for c in cells]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(guarded, cells))


def write_csv(path: Path, columns: list, rows: list) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        writer.writerows([[fmt(v) for v in row] for row in rows])
    return path


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunResult:
    command: str
    out: Path
    files: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


class _Run:
    """Echo config, collect artifacts, write manifest and failure marker."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.out = Path(config.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.stem = config.command
        self.start = time.time()
        self.result = RunResult(config.command, self.out)
        cfg = dict(config.to_dict(), config_hash=config.config_hash())
        (self.out / f"{self.stem}.config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True))
        marker = self.out / f"{self.stem}.FAILED"
        if marker.exists():
            marker.unlink()

    def collect(self, outcomes: list) -> list:
        rows = []
        for value, error in outcomes:
            if error is None:
                rows.append(value)
            else:
                self.result.failures.append(error)
        return rows

    def write(self, name: str, columns: list, rows: list):
        self.result.files.append(write_csv(self.out / name, columns, rows))

    def write_json(self, name: str, payload):
        path = self.out / name
        path.write_text(json.dumps(payload, indent=2, sort_keys=True))
        self.result.files.append(path)

    def finish(self) -> RunResult:
        manifest = {
            "command": self.config.command,
            "config_hash": self.config.config_hash(),
            "seeds": list(self.config.seeds),
            "master_seed": self.config.master_seed,
            "artifacts": {p.name: _sha256(p) for p in self.result.files},
            "wall_clock_s": round(time.time() - self.start, 3),
            "version": __version__,
            "threads": thread_count(self.config),
            "failed_cells": len(self.result.failures),
        }
        (self.out / f"{self.stem}.manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
        if self.result.failures:
            (self.out / f"{self.stem}.FAILED").write_text("\n".join(self.result.failures))
        return self.result


def _layout(config: ExperimentConfig, ansatz: str, n: int):
    return build_circuit(ansatz, n, config.layers, config.encoding_spec())


# --------------------------------------------------------------------------
# runners


def run_spectrum(config: ExperimentConfig) -> RunResult:
    """Frequencies and redundancies of the encoding, plus |Omega| growth."""
    run = _Run(config)
    enc = config.encoding_spec()
    payload, rows = [], []
    for n in config.qubits:
        layout = build_circuit("sea", n, config.layers, enc)
        spec = analytic_spectrum(layout)
        red = redundancy_map(layout)
        payload.append({
            "n_qubits": n, "layers": config.layers, "features": enc.n_features,
            "size": spec.size, "max_frequency": list(spec.max_frequency),
            "frequencies": spec.frequencies.tolist(),
            "d_per_layer": [list(d) for d in spec.d_per_layer],
        })
        rows += [[n, fmt_omega(w), count] for w, count in red.items()]
    growth = [
        {"n_qubits": n, "layers": layers, "features": d, "size": (2 * n * layers + 1) ** d}
        for n in range(1, max(config.qubits) + 1)
        for layers in range(1, config.layers + 1)
        for d in (1, 2)
    ]
    run.write_json("spectrum.json", {"spectra": payload, "growth": growth})
    run.write("redundancy.csv", ["n_qubits", "omega", "count"], rows)
    return run.finish()


def coefficient_cell(config: ExperimentConfig, cell) -> list:
    ansatz, n, kind, level, noise, seed = cell
    layout = _layout(config, ansatz, n)
    theta_rng = rng_for(config.master_seed, "coefficients", ansatz, n, seed, "theta")
    noise_rng = rng_for(config.master_seed, "coefficients", ansatz, n, seed, "noise", kind, level)
    thetas = theta_rng.uniform(0.0, 2 * np.pi, size=(config.samples_for(n), layout.n_params))
    samples = sample_coefficients(layout, thetas, noise, noise_rng, config.oversample)
    stats = coefficient_stats(samples)
    rows = []
    for i, omega in enumerate(stats.frequencies):
        cov = stats.cov[i]
        rows.append([seed, kind, fmt_level(level), fmt_omega(omega), stats.re_mean[i], stats.im_mean[i],
                     stats.abs_mean[i], stats.rel_std[i], cov[0, 0], cov[0, 1], cov[1, 1],
                     ansatz, n])
    return rows


def _grid(config: ExperimentConfig) -> list:
    return [(a, n, kind, level, noise, seed)
            for a in config.ansatz for n in config.qubits
            for kind, level, noise in config.noise_cells()
            for seed in config.seeds]


def run_coefficients(config: ExperimentConfig) -> RunResult:
    run = _Run(config)
    outcomes = run_cells(_grid(config), lambda c: coefficient_cell(config, c), thread_count(config))
    rows = [r for block in run.collect(outcomes) for r in block]
    run.write("coefficients.csv", COEFF_COLUMNS, rows)
    return run.finish()


def occupancy(config: ExperimentConfig, ansatz: str, n: int, noise: NoiseModel, seed: int,
              kind: str = "cge", level: float = 0.0) -> int:
    """Present-frequency count for one coefficient cell (same streams as ``coeffs``)."""
    layout = _layout(config, ansatz, n)
    theta_rng = rng_for(config.master_seed, "coefficients", ansatz, n, seed, "theta")
    noise_rng = rng_for(config.master_seed, "coefficients", ansatz, n, seed, "noise", kind, level)
    thetas = theta_rng.uniform(0.0, 2 * np.pi, size=(config.samples_for(n), layout.n_params))
    return spectrum_occupancy(coefficient_stats(
        sample_coefficients(layout, thetas, noise, noise_rng, config.oversample)))


def expressibility_cell(config: ExperimentConfig, cell) -> list:
    ansatz, n, kind, level, noise, seed = cell
    layout = strip_for_metrics(_layout(config, ansatz, n))
    # parameters are drawn before any coherent offsets, so they are shared across noise cells
    rng = rng_for(config.master_seed, "expressibility", ansatz, n, seed)
    report = expressibility(layout, noise, config.pairs, config.bins, rng)
    return [[seed, kind, fmt_level(level), n, ansatz, report.kl_divergence, report.n_bins, report.n_pairs]]


def run_expressibility(config: ExperimentConfig) -> RunResult:
    run = _Run(config)
    outcomes = run_cells(_grid(config), lambda c: expressibility_cell(config, c), thread_count(config))
    rows = [r for block in run.collect(outcomes) for r in block]
    run.write("expressibility.csv", EXPR_COLUMNS, rows)
    return run.finish()


def entanglement_cell(config: ExperimentConfig, cell) -> list:
    ansatz, n, kind, level, noise, seed = cell
    layout = strip_for_metrics(_layout(config, ansatz, n))
    measures = ["EF"] if noise.is_decoherent else ["MW", "EF"]
    rows = []
    for measure in measures:
        rng = rng_for(config.master_seed, "entanglement", ansatz, n, seed)
        rep = entangling_capability(layout, noise, config.samples_for(n), rng, measure)
        rows.append([seed, kind, fmt_level(level), n, ansatz, measure, rep.mean_q, rep.min_q, rep.max_q])
    return rows


def run_entanglement(config: ExperimentConfig) -> RunResult:
    run = _Run(config)
    outcomes = run_cells(_grid(config), lambda c: entanglement_cell(config, c), thread_count(config))
    rows = [r for block in run.collect(outcomes) for r in block]
    run.write("entanglement.csv", ENT_COLUMNS, rows)
    return run.finish()


def run_id(ansatz: str, n: int, kind: str, level: float, problem_seed: int, param_seed: int) -> str:
    return f"{ansatz}-n{n}-{kind}-{fmt_level(level)}-p{problem_seed}-s{param_seed}"


def training_cell(config: ExperimentConfig, cell):
    ansatz, n, kind, level, noise, problem_seed, param_seed = cell
    layout = _layout(config, ansatz, n)
    if layout.n_features != 1:
        raise ValueError("training uses one-dimensional inputs")
    target = generate_target(analytic_spectrum(layout), 0.5,
                             seed_sequence(config.master_seed, "target", n, config.layers, problem_seed))
    tc = TrainingConfig(lr=config.lr, steps=config.steps, noise=noise)
    seed = seed_sequence(config.master_seed, "training", ansatz, n, problem_seed, param_seed)
    failure = None
    try:
        trace = train(layout, target, tc, seed)
    except TrainingDiverged as exc:
        trace, failure = exc.trace, str(exc)
    rid = run_id(ansatz, n, kind, level, problem_seed, param_seed)
    q = dict(zip(trace.q_steps, trace.q))
    rows = [[rid, problem_seed, param_seed, kind, fmt_level(level), s, m, fmt(q[s]) if s in q else ""]
            for s, m in zip(trace.steps, trace.mse)]
    coeff_rows = [[rid, s, fmt_omega(w), a, d]
                  for s, ac, dc in zip(trace.steps, trace.abs_c, trace.delta_c)
                  for w, a, d in zip(trace.frequencies, ac, dc)]
    return rows, coeff_rows, f"{rid}: {failure}" if failure else None


def run_training(config: ExperimentConfig) -> RunResult:
    run = _Run(config)
    cells = [(a, n, kind, level, noise, ps, s)
             for a in config.ansatz for n in config.qubits
             for kind, level, noise in config.noise_cells()
             for ps in config.problem_seeds for s in config.seeds]
    outcomes = run_cells(cells, lambda c: training_cell(config, c), thread_count(config))
    done = run.collect(outcomes)
    # diverged runs keep their partial traces and are reported as failures
    run.result.failures += [failure for _, _, failure in done if failure]
    run.write("training.csv", TRAIN_COLUMNS, [r for rows, _, _ in done for r in rows])
    run.write("coefficients_trace.csv", TRACE_COLUMNS, [r for _, rows, _ in done for r in rows])
    return run.finish()


RUNNERS = {
    "spectrum": run_spectrum,
    "coeffs": run_coefficients,
    "expressibility": run_expressibility,
    "entanglement": run_entanglement,
    "train": run_training,
}
