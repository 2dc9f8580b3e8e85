"""Multivariate approximation through a one-outer-function KST representation.

    f(x) = sum_{i=1}^{2d+1} g( sum_j lam_j h_i(x_j) )

is approximated by

    phi(x) = sum_{i=1}^{2d+1} outer( sum_j lam_j psi_i(x_j) ),

where each ``psi_i`` is a fitted network for ``h_i`` followed by the
three-neuron clip to [0, 1], and ``outer`` is one shared network for ``g``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import (FeedforwardNetwork, clip01_fragment, compose_networks,
                   count_intrinsic_neurons, has_clip_tail, scalar_fn)
from .errors import ClipRangeError, CompositionError, FitFailed, InfeasibleTolerance, SubFitError
from .search import SearchBudget
from .serialize import dumps_record, network_to_record, parse_document, record_to_network
from .tables import ErrorTable
from .univariate import MODULUS_SAMPLES, _grid_modulus, fit_univariate, sample

LAMBDA_SLACK = 1e-12
DELTA_FLOOR = 1e-6


@dataclass(frozen=True)
class Affine1D:
    scale: float
    shift: float

    def __call__(self, t):
        return self.scale * np.asarray(t, dtype=float) + self.shift


def rescale_maps(a: float, b: float):
    """Forward map [a, b] -> [0, 1] and its inverse [0, 1] -> [a, b]."""
    a, b = float(a), float(b)
    if not a < b:
        raise ValueError("rescale_maps needs a < b")
    return Affine1D(1.0 / (b - a), -a / (b - a)), Affine1D(b - a, a)


@dataclass(frozen=True)
class ErrorBudget:
    epsilon: float
    per_term_outer_tol: float
    delta: float


def compute_budget(g, d: int, eps: float, samples: int = MODULUS_SAMPLES) -> ErrorBudget:
    """Split eps: each of the 2d+1 outer terms gets eps/(2(2d+1)), and ``delta``
    is the largest grid-tested distance over which ``g`` moves less than that.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    tol = eps / (2 * (2 * d + 1))
    while True:
        zs = np.linspace(0.0, 1.0, samples)
        gz = sample(g, zs)
        spacing = zs[1] - zs[0]
        if _grid_modulus(gz, spacing, 1.0) < tol:
            return ErrorBudget(eps, tol, 1.0)
        if _grid_modulus(gz, spacing, spacing) < tol:
            lo, hi = 1, samples - 1  # lo passes, hi fails
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if _grid_modulus(gz, spacing, mid * spacing) < tol:
                    lo = mid
                else:
                    hi = mid
            return ErrorBudget(eps, tol, float(lo * spacing))
        if spacing / 10 < DELTA_FLOOR:
            raise InfeasibleTolerance(
                f"delta for eps={eps:g} falls below {DELTA_FLOOR:g}", best=spacing)
        samples = (samples - 1) * 10 + 1


def clip_inner(raw: FeedforwardNetwork, domain=(0.0, 1.0), check_points: int = 2001) -> FeedforwardNetwork:
    """Append the clip fragment so the output lands in [0, 1].

    The clip identity only holds on [-1, 2]; raw networks that leave that
    range on the check grid are rejected.
    """
    xs = np.linspace(float(domain[0]), float(domain[1]), check_points)
    out = scalar_fn(raw)(xs)
    if out.min() < -1.0 or out.max() > 2.0:
        raise ClipRangeError(f"raw output range [{out.min():.3g}, {out.max():.3g}] leaves [-1, 2]")
    return compose_networks(clip01_fragment(), raw, **{**raw.metadata, "role": "inner", "clipped": True})


@dataclass(frozen=True, eq=False)
class KstComposition:
    d: int
    domain: tuple
    lam: tuple
    inner: tuple
    outer: FeedforwardNetwork

    def __post_init__(self):
        inner = tuple(self.inner)
        lam = tuple(float(v) for v in self.lam)
        if self.d < 1:
            raise CompositionError("d must be positive")
        if len(inner) != 2 * self.d + 1:
            raise CompositionError(f"need {2 * self.d + 1} inner networks, got {len(inner)}")
        if len(lam) != self.d:
            raise CompositionError(f"need {self.d} lambda weights, got {len(lam)}")
        if any(not v > 0 for v in lam):
            raise CompositionError("every lambda must be positive")
        if sum(lam) > 1 + LAMBDA_SLACK:
            raise CompositionError(f"lambda weights sum to {sum(lam):.6g} > 1")
        for net in inner + (self.outer,):
            if net.input_dim != 1 or net.output_dim != 1:
                raise CompositionError("inner and outer networks must be scalar")
        a, b = map(float, self.domain)
        if not a < b:
            raise CompositionError("domain must satisfy a < b")
        object.__setattr__(self, "inner", inner)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "domain", (a, b))

    @property
    def clipped(self) -> bool:
        return all(has_clip_tail(n) for n in self.inner)

    def inner_values(self, xs) -> np.ndarray:
        """psi_i(x_j) as an array of shape (N, 2d+1, d)."""
        xs = np.array(xs, dtype=float, ndmin=2)
        if xs.shape[1] != self.d:
            raise ValueError(f"composition takes {self.d} inputs, got {xs.shape[1]}")
        flat = xs.reshape(-1)
        cols = [scalar_fn(net)(flat).reshape(xs.shape) for net in self.inner]
        return np.stack(cols, axis=1)

    def outer_arguments(self, xs) -> np.ndarray:
        """sum_j lam_j psi_i(x_j), shape (N, 2d+1)."""
        return self.inner_values(xs) @ np.array(self.lam)

    def evaluate(self, xs) -> np.ndarray:
        z = self.outer_arguments(xs)
        # the shared outer network runs once per branch
        return scalar_fn(self.outer)(z.reshape(-1)).reshape(z.shape).sum(axis=1)

    def neuron_count(self):
        return count_intrinsic_neurons(self)

    def to_record(self) -> dict:
        return {"kind": "kst_composition", "version": 1, "d": self.d,
                "domain": list(self.domain), "lambda": list(self.lam),
                "inner": [network_to_record(n) for n in self.inner],
                "outer": network_to_record(self.outer)}

    def serialize(self) -> bytes:
        return dumps_record(self.to_record()).encode("utf-8")

    @classmethod
    def deserialize(cls, data) -> "KstComposition":
        rec = parse_document(data, required=("kind", "d", "domain", "lambda", "inner", "outer"))
        inner = [record_to_network(r, f"inner[{i}]") for i, r in enumerate(rec["inner"])]
        return cls(int(rec["d"]), tuple(rec["domain"]), tuple(rec["lambda"]), tuple(inner),
                   record_to_network(rec["outer"], "outer"))


def compose_kst(lam: Sequence[float], inner: Sequence[FeedforwardNetwork],
                outer: FeedforwardNetwork, domain=(0.0, 1.0)) -> KstComposition:
    lam = tuple(lam)
    return KstComposition(len(lam), tuple(domain), lam, tuple(inner), outer)


@dataclass(frozen=True)
class SyntheticKstTriple:
    """A function *defined* by its KST representation on [0, 1]^d."""

    g: Callable
    h: tuple
    lam: tuple
    name: str = "synthetic"

    def __post_init__(self):
        d = len(self.lam)
        if len(self.h) != 2 * d + 1:
            raise CompositionError(f"need {2 * d + 1} inner functions, got {len(self.h)}")
        if any(not v > 0 for v in self.lam) or sum(self.lam) > 1 + LAMBDA_SLACK:
            raise CompositionError("lambda must be positive with sum <= 1")
        zs = np.linspace(0.0, 1.0, 1001)
        for i, h in enumerate(self.h):
            hz = sample(h, zs)
            if np.any(np.diff(hz) <= 0) or hz.min() < 0 or hz.max() > 1:
                raise CompositionError(f"h[{i}] must be strictly increasing from [0,1] into [0,1]")

    @property
    def d(self) -> int:
        return len(self.lam)

    def outer_arguments(self, ys) -> np.ndarray:
        ys = np.array(ys, dtype=float, ndmin=2)
        hv = np.stack([sample(h, ys) for h in self.h], axis=1)
        return hv @ np.array(self.lam, dtype=float)

    def __call__(self, ys) -> np.ndarray:
        """Induced f on [0, 1]^d (rows of ``ys`` are points)."""
        z = self.outer_arguments(ys)
        return sample(self.g, z).sum(axis=1)


def _power(p):
    return lambda x: np.asarray(x, dtype=float) ** p


def synthetic_triple(d: int) -> SyntheticKstTriple:
    """The standard test triples: identities for d = 1, x^(1+i/6) with g = z^2 above."""
    if d == 1:
        ident = lambda x: np.asarray(x, dtype=float)
        return SyntheticKstTriple(ident, (ident,) * 3, (1.0,), "identity")
    return SyntheticKstTriple(lambda z: np.asarray(z, dtype=float) ** 2,
                              tuple(_power(1 + i / 6) for i in range(1, 2 * d + 2)),
                              tuple([1.0 / d] * d), f"power{d}")


def product_grid(domain, d: int, per_axis: int) -> np.ndarray:
    axis = np.linspace(float(domain[0]), float(domain[1]), per_axis)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def verify_error(comp: KstComposition, reference, grid) -> ErrorTable:
    """Grid errors of ``comp`` against ``reference``.

    ``reference`` is a callable on points of [a, b]^d, or a
    ``SyntheticKstTriple`` on [0, 1]^d (rescaled to ``comp.domain``).  For a
    triple the table also carries, per branch, the outer-argument
    discrepancy ``|sum lam h_i - sum lam psi_i|`` and the outer mismatch
    ``|g(z_i) - outer(z_i)|`` at the realized arguments.
    """
    pts = np.asarray(grid, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, comp.d)
    a, b = comp.domain
    if pts.min() < a - 1e-12 or pts.max() > b + 1e-12:
        raise ValueError("grid leaves the composition domain")
    z_net = comp.outer_arguments(pts)
    outer_out = scalar_fn(comp.outer)(z_net.reshape(-1)).reshape(z_net.shape)
    phi = outer_out.sum(axis=1)
    diag = {"outer_argument": z_net}
    if isinstance(reference, SyntheticKstTriple):
        fwd, _ = rescale_maps(a, b)
        ys = fwd(pts)
        target = reference(ys)
        diag["branch_discrepancy"] = np.abs(reference.outer_arguments(ys) - z_net)
        diag["outer_mismatch"] = np.abs(sample(reference.g, z_net) - outer_out)
    else:
        target = np.asarray(reference(pts), dtype=float).reshape(-1)
    return ErrorTable(pts, target, phi, diag)


@dataclass
class MultivariateResult:
    composition: KstComposition
    table: ErrorTable
    budget: ErrorBudget
    outer_report: object
    inner_reports: list


def approximate_multivariate(triple: SyntheticKstTriple, domain=(0.0, 1.0), eps: float = 0.5,
                             search: SearchBudget | None = None, grid: int | None = None
                             ) -> MultivariateResult:
    """Fit the outer and inner functions, clip, compose and measure on a grid.

    ``grid`` is points per axis (default 2001 for d = 1 and 41 otherwise).
    """
    search = search or SearchBudget()
    d = triple.d
    budget = compute_budget(triple.g, d, eps)
    fwd, _ = rescale_maps(*domain)
    try:
        outer = fit_univariate(triple.g, (0.0, 1.0), budget.per_term_outer_tol, search.child(0))
    except (FitFailed, InfeasibleTolerance) as exc:
        raise SubFitError("outer", exc) from exc
    inner_nets, inner_reports = [], []
    for i, h in enumerate(triple.h):
        target = (lambda hh: lambda x: sample(hh, fwd(x)))(h)
        try:
            rep = fit_univariate(target, domain, budget.delta, search.child(i + 1))
            inner_nets.append(clip_inner(rep.network.with_metadata(role="inner", branch=i), domain))
        except (FitFailed, InfeasibleTolerance, ClipRangeError) as exc:
            raise SubFitError(f"inner[{i}]", exc) from exc
        inner_reports.append(rep)
    comp = compose_kst(triple.lam, inner_nets, outer.network.with_metadata(role="outer"), domain)
    per_axis = grid or (2001 if d == 1 else 41)
    table = verify_error(comp, triple, product_grid(domain, d, per_axis))
    return MultivariateResult(comp, table, budget, outer, inner_reports)
