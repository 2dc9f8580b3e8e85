"""Built-in target registry, addressed by short string ids."""
from __future__ import annotations

import numpy as np

from .kst import synthetic_triple
from .width_bound import example_family

UNIVARIATE = {
    "const0.3": lambda x: np.full_like(np.asarray(x, dtype=float), 0.3),
    "constant": lambda x: np.full_like(np.asarray(x, dtype=float), 0.3),
    "linear": lambda x: np.asarray(x, dtype=float),
    "abs_half": lambda x: np.abs(np.asarray(x, dtype=float) - 0.5),
    "sin2pi": lambda x: np.sin(2 * np.pi * np.asarray(x, dtype=float)),
}
# the acceptance names for the same functions
UNIVARIATE["x"] = UNIVARIATE["linear"]
UNIVARIATE["abs"] = UNIVARIATE["abs_half"]


def univariate_target(name: str):
    try:
        return UNIVARIATE[name]
    except KeyError:
        raise KeyError(f"unknown univariate target {name!r}; choose from {sorted(UNIVARIATE)}") from None


def kst_target(name: str, d: int):
    """``synthetic`` is the standard triple for the given d."""
    if name != "synthetic":
        raise KeyError(f"unknown multivariate target {name!r}; only 'synthetic' is built in")
    return synthetic_triple(d)


def family_target(name: str, d: int):
    """``abs2``: c_j = 1, h_j(x) = 2|x| (c_star = 1); ``abs1``: h_j(x) = |x| (c_star = 1/2)."""
    if name == "abs2":
        return example_family(d)
    if name == "abs1":
        return example_family(d, h=np.abs)
    raise KeyError(f"unknown family {name!r}; choose from ['abs1', 'abs2']")
