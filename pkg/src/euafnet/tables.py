"""Grid error records and their CSV/JSON export."""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from .serialize import atomic_write


@dataclass
class ErrorTable:
    """Per-point target and network values on an evaluation grid.

    ``diagnostics`` maps a name to an ``(N, k)`` array with extra per-point
    columns (the KST pipeline stores per-branch budget terms there).
    """

    points: np.ndarray
    target: np.ndarray
    values: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points.reshape(-1, 1)
        self.target = np.asarray(self.target, dtype=float).reshape(-1)
        self.values = np.asarray(self.values, dtype=float).reshape(-1)

    @property
    def abs_err(self) -> np.ndarray:
        return np.abs(self.target - self.values)

    @property
    def sup(self) -> float:
        return float(self.abs_err.max())

    @property
    def mean(self) -> float:
        return float(self.abs_err.mean())

    @property
    def argmax_point(self) -> list:
        return [float(v) for v in self.points[int(np.argmax(self.abs_err))]]

    def summary(self) -> dict:
        out = {"points": int(len(self.target)), "sup": self.sup, "mean": self.mean,
               "argmax": self.argmax_point}
        for name, arr in self.diagnostics.items():
            out[f"max_{name}"] = [float(v) for v in np.max(arr, axis=0)]
        return out

    def to_csv(self) -> str:
        d = self.points.shape[1]
        coords = ["x"] if d == 1 else [f"x{j + 1}" for j in range(d)]
        buf = io.StringIO()
        buf.write(",".join(coords + ["f", "phi", "abs_err"]) + "\n")
        for p, f, v, e in zip(self.points, self.target, self.values, self.abs_err):
            buf.write(",".join(repr(float(c)) for c in (*p, f, v, e)) + "\n")
        return buf.getvalue()

    def write(self, csv_path, summary_path=None):
        atomic_write(csv_path, self.to_csv())
        if summary_path is not None:
            atomic_write(summary_path, json.dumps(self.summary(), indent=1, sort_keys=True) + "\n")
