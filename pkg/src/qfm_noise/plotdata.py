"""Tidy per-figure CSV bundles from completed run directories.

Schemas (all files live in ``<results>/plot-data``):

``coefficients_by_omega.csv``
    ansatz, n_qubits, noise_type, noise_level, omega, abs_mean, abs_mean_std,
    rel_std, re_mean, im_mean (means and std over seeds)
``occupancy.csv``
    ansatz, n_qubits, noise_type, noise_level, seed, occupancy (non-negative
    bins with mean magnitude above 1e-14)
``redundancy.csv``
    n_qubits, omega, count
``expressibility_summary.csv``
    ansatz, n_qubits, noise_type, noise_level, kl_mean, kl_std, inverse_kl
``entanglement_summary.csv``
    ansatz, n_qubits, noise_type, noise_level, measure, q_mean, q_min, q_max
``training_mse.csv`` / ``training_q.csv``
    noise_type, noise_level, step, mean, std (over runs)
``training_delta.csv``
    noise_type, noise_level, step, omega, delta_mean, delta_std
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import numpy as np

from .experiments import write_csv
from .fourier import ZERO_THRESHOLD

EXPECTED = ("coefficients.csv", "redundancy.csv", "expressibility.csv", "entanglement.csv",
            "training.csv", "coefficients_trace.csv")


class MissingResults(FileNotFoundError):
    pass


def _read(path: Path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _group(rows, keys, value):
    groups = defaultdict(list)
    for r in rows:
        if r[value] not in ("", "nan"):
            groups[tuple(r[k] for k in keys)].append(float(r[value]))
    return groups


def _omega_non_negative(text: str) -> bool:
    parts = [float(p) for p in text.split(";")]
    nz = [p for p in parts if abs(p) > 1e-12]
    return not nz or nz[0] > 0


def _coefficients(rows):
    keys = ["ansatz", "n_qubits", "noise_type", "noise_level", "omega"]
    mags = _group(rows, keys, "abs_mean")
    rel = _group(rows, keys, "rel_std")
    re = _group(rows, keys, "re_mean")
    im = _group(rows, keys, "im_mean")
    out = []
    for key, vals in mags.items():
        r = rel.get(key, [])
        out.append(list(key) + [np.mean(vals), np.std(vals), np.mean(r) if r else float("nan"),
                                np.mean(re[key]), np.mean(im[key])])
    occ = defaultdict(int)
    for row in rows:
        key = (row["ansatz"], row["n_qubits"], row["noise_type"], row["noise_level"], row["seed"])
        occ.setdefault(key, 0)
        if _omega_non_negative(row["omega"]) and float(row["abs_mean"]) > ZERO_THRESHOLD:
            occ[key] += 1
    return out, [list(k) + [v] for k, v in occ.items()]


def _sort_key(row):
    key = []
    for v in row:
        try:
            key.append((0, float(v), ""))
        except (TypeError, ValueError):
            key.append((1, 0.0, str(v)))
    return key


def _series(rows, keys, value):
    return [list(k) + [np.mean(v), np.std(v)] for k, v in _group(rows, keys, value).items()]


def _plot(path: Path, rows, x_col: int, y_col: int, label_cols) -> None:
    """Best-effort line plot; failures never propagate."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except Exception:
        return
    try:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        lines = defaultdict(list)
        for r in rows:
            lines[tuple(r[c] for c in label_cols)].append((float(r[x_col]), float(r[y_col])))
        for label, pts in lines.items():
            pts.sort()
            ax.plot(*zip(*pts), label=" ".join(str(s) for s in label))
        if len(lines) <= 12:
            ax.legend(fontsize=6)
        fig.tight_layout()
        fig.savefig(path, dpi=80)
        plt.close(fig)
    except Exception:
        pass


def emit_plot_data(results_dir, images: bool = True) -> list:
    """Write every figure bundle that the available result files support.

    Raises
    ------
    MissingResults
        If none of the expected result files exist.
    """
    root = Path(results_dir)
    present = [name for name in EXPECTED if (root / name).exists()]
    if not present:
        raise MissingResults(f"no results in {root}; expected any of: {', '.join(EXPECTED)}")
    out = root / "plot-data"
    out.mkdir(exist_ok=True)
    written = []

    def emit(name, columns, rows, plot=None):
        rows = sorted(rows, key=_sort_key)
        written.append(write_csv(out / name, columns, rows))
        if images and plot:
            _plot(out / name.replace(".csv", ".png"), rows, *plot)

    if "coefficients.csv" in present:
        coeffs, occ = _coefficients(_read(root / "coefficients.csv"))
        emit("coefficients_by_omega.csv", ["ansatz", "n_qubits", "noise_type", "noise_level", "omega",
                                           "abs_mean", "abs_mean_std", "rel_std", "re_mean", "im_mean"],
             coeffs)
        emit("occupancy.csv", ["ansatz", "n_qubits", "noise_type", "noise_level", "seed",
                               "occupancy"], occ)
    if "redundancy.csv" in present:
        rows = _read(root / "redundancy.csv")
        emit("redundancy.csv", ["n_qubits", "omega", "count"],
             [[r["n_qubits"], r["omega"], r["count"]] for r in rows])
    if "expressibility.csv" in present:
        rows = _series(_read(root / "expressibility.csv"),
                       ["ansatz", "n_qubits", "noise_type", "noise_level"], "kl_divergence")
        rows = [r + [1.0 / r[4] if r[4] > 0 else float("inf")] for r in rows]
        emit("expressibility_summary.csv", ["ansatz", "n_qubits", "noise_type", "noise_level",
                                            "kl_mean", "kl_std", "inverse_kl"], rows, (3, 6, (0, 2)))
    if "entanglement.csv" in present:
        raw = _read(root / "entanglement.csv")
        keys = ["ansatz", "n_qubits", "noise_type", "noise_level", "measure"]
        means = _group(raw, keys, "mean_q")
        rows = [list(k) + [np.mean(v), np.min(v), np.max(v)] for k, v in means.items()]
        emit("entanglement_summary.csv", keys + ["q_mean", "q_min", "q_max"], rows, (3, 5, (0, 2, 4)))
    if "training.csv" in present:
        raw = _read(root / "training.csv")
        keys = ["noise_type", "noise_level", "step"]
        emit("training_mse.csv", keys + ["mean", "std"], _series(raw, keys, "mse"), (2, 3, (0, 1)))
        emit("training_q.csv", keys + ["mean", "std"], _series(raw, keys, "entangling_q"),
             (2, 3, (0, 1)))
    if "coefficients_trace.csv" in present and "training.csv" in present:
        run_noise = {r["run_id"]: (r["noise_type"], r["noise_level"])
                     for r in _read(root / "training.csv")}
        raw = [dict(r, noise_type=run_noise[r["run_id"]][0], noise_level=run_noise[r["run_id"]][1])
               for r in _read(root / "coefficients_trace.csv")]
        keys = ["noise_type", "noise_level", "step", "omega"]
        emit("training_delta.csv", keys + ["delta_mean", "delta_std"], _series(raw, keys, "delta_c"))
    return written
