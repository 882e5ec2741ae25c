"""CSV/JSON artifacts. Each CSV starts with a ``# gtbo-<kind> v1`` line."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .bo import TraceRow

TRACE_COLUMNS = ["iteration", "phase", "point_hash", "y", "f", "best_y", "best_f"]


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def _header(kind: str, seed: int) -> str:
    return f"# gtbo-{kind} v1 seed={seed}\n"


def write_trace(path, rows, seed: int) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(_header("trace", seed))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in rows:
            w.writerow([r.iteration, r.phase, r.point_hash, _fmt(r.y), _fmt(r.f), _fmt(r.best_y), _fmt(r.best_f)])


def _read_csv(path):
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# gtbo-"):
            raise ValueError(f"{path}: missing gtbo schema line")
        meta = dict(tok.split("=", 1) for tok in first.split()[3:] if "=" in tok)
        return first.split()[1], meta, list(csv.DictReader(fh))


def read_trace(path) -> list:
    _, _, rows = _read_csv(path)

    def opt(s):
        return None if s == "" else float(s)

    return [
        TraceRow(int(r["iteration"]), r["phase"], r["point_hash"], float(r["y"]), opt(r["f"]),
                 float(r["best_y"]), opt(r["best_f"]))
        for r in rows
    ]


def read_seed(path) -> int:
    _, meta, _ = _read_csv(path)
    return int(meta["seed"])


def write_marginals(path, history: np.ndarray, seed: int) -> None:
    history = np.atleast_2d(history)
    dim = history.shape[1] if history.size else 0
    with open(path, "w", newline="") as fh:
        fh.write(_header("marginals", seed))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration"] + [f"m{i}" for i in range(dim)])
        for t, row in enumerate(history if history.size else [], start=1):
            w.writerow([t] + [repr(float(v)) for v in row])


def read_marginals(path) -> np.ndarray:
    _, _, rows = _read_csv(path)
    return np.array([[float(v) for k, v in r.items() if k != "iteration"] for r in rows])


def write_active_count(path, counts, seed: int) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(_header("active-count", seed))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "active_count"])
        for t, c in enumerate(counts, start=1):
            w.writerow([t, int(c)])


def write_sweep(path, axis: str, curves: dict, seeds, seed: int) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(_header("sweep", seed))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["axis", "value", "seed", "iteration", "fraction_correct"])
        for value, mat in curves.items():
            for s, row in zip(seeds, mat):
                for t, v in enumerate(row, start=1):
                    w.writerow([axis, value, s, t, repr(float(v))])


def read_sweep(path) -> dict:
    _, _, rows = _read_csv(path)
    out: dict = {}
    for r in rows:
        out.setdefault(float(r["value"]), {}).setdefault(int(r["seed"]), []).append(float(r["fraction_correct"]))
    return {v: np.array([per_seed[s] for s in sorted(per_seed)]) for v, per_seed in out.items()}


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")
