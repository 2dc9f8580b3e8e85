"""Width lower bound: networks of width d - 1 cannot approximate certain f.

For a first layer ``W0`` with d - 1 rows, every kernel vector x of ``W0``
gives the network the same value ``B`` as the origin does.  We build, in
exact rational arithmetic, a kernel vector inside [-1/2, 1/2]^d with one
coordinate equal to +1/2; against ``f = sum_j c_j h_j(x_j)`` with
``h_j(0) = 0`` the network then errs by at least ``c_star / 2`` at one of
the two points.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .core import AffineLayer, FeedforwardNetwork, _euaf, evaluate_batch
from .errors import WidthMismatch
from .search import SearchBudget, multistart_search

HALF = Fraction(1, 2)


def _frac(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    if isinstance(v, str):
        return Fraction(v)
    return Fraction(float(v))  # exact binary expansion of the float


def frac_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class RationalMatrix:
    """Dense matrix of exact rationals."""

    entries: tuple

    def __post_init__(self):
        rows = tuple(tuple(_frac(v) for v in row) for row in self.entries)
        if rows and len({len(r) for r in rows}) != 1:
            raise ValueError("ragged matrix")
        object.__setattr__(self, "entries", rows)

    @classmethod
    def of(cls, rows) -> "RationalMatrix":
        return cls(tuple(tuple(r) for r in np.asarray(rows, dtype=object).tolist())) \
            if not isinstance(rows, RationalMatrix) else rows

    @property
    def rows(self) -> int:
        return len(self.entries)

    @property
    def cols(self) -> int:
        return len(self.entries[0]) if self.entries else 0

    def __getitem__(self, idx):
        i, j = idx
        return self.entries[i][j]

    def matvec(self, x: Sequence[Fraction]) -> tuple:
        return tuple(sum((a * b for a, b in zip(row, x)), Fraction(0)) for row in self.entries)

    def scaled(self, alpha) -> "RationalMatrix":
        alpha = _frac(alpha)
        return RationalMatrix(tuple(tuple(alpha * v for v in row) for row in self.entries))

    def to_strings(self) -> list:
        return [[frac_str(v) for v in row] for row in self.entries]


def rref(m) -> tuple:
    """Exact Gauss-Jordan elimination; returns (reduced matrix, pivot columns)."""
    m = RationalMatrix.of(m)
    a = [list(row) for row in m.entries]
    pivots, r = [], 0
    for c in range(m.cols):
        if r == m.rows:
            break
        p = next((i for i in range(r, m.rows) if a[i][c] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        lead = a[r][c]
        a[r] = [v / lead for v in a[r]]
        for i in range(m.rows):
            if i != r and a[i][c] != 0:
                factor = a[i][c]
                a[i] = [vi - factor * vr for vi, vr in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
    return RationalMatrix(tuple(tuple(row) for row in a)), tuple(pivots)


@dataclass(frozen=True)
class IndexSets:
    """Column classes of an RREF (0-based).

    ``forced_zero``: pivot variables with no free-variable dependence;
    ``pivot``: the remaining pivot variables; ``free``: free variables;
    ``coeffs[(i, k)]``: nonzero c_ik in x_i = sum_k c_ik x_k.
    """

    forced_zero: tuple
    pivot: tuple
    free: tuple
    coeffs: dict


def classify_indices(reduced: RationalMatrix, pivots: Sequence[int]) -> IndexSets:
    pivots = tuple(pivots)
    free = tuple(c for c in range(reduced.cols) if c not in pivots)
    coeffs, forced = {}, []
    for row, p in enumerate(pivots):
        deps = {(p, k): -reduced[row, k] for k in free if reduced[row, k] != 0}
        if deps:
            coeffs.update(deps)
        else:
            forced.append(p)
    return IndexSets(tuple(forced), tuple(p for p in pivots if p not in forced), free, coeffs)


@dataclass(frozen=True)
class WitnessReport:
    rref: RationalMatrix
    pivots: tuple
    forced_zero: tuple
    pivot_columns: tuple
    free_columns: tuple
    coeffs: dict
    mu_tilde: Fraction | None
    k_tilde: int
    x_tilde: tuple
    degenerate: bool
    half_coordinate: int

    def to_record(self) -> dict:
        return {
            "rref": self.rref.to_strings(),
            "rank": len(self.pivots),
            "forced_zero": list(self.forced_zero),
            "pivot_columns": list(self.pivot_columns),
            "free_columns": list(self.free_columns),
            "coeffs": [{"pivot": i, "free": k, "value": frac_str(v)}
                       for (i, k), v in sorted(self.coeffs.items())],
            "mu_tilde": None if self.mu_tilde is None else frac_str(self.mu_tilde),
            "k_tilde": self.k_tilde,
            "x_tilde": [frac_str(v) for v in self.x_tilde],
            "degenerate": self.degenerate,
            "half_coordinate": self.half_coordinate,
        }


def construct_witness(w0) -> WitnessReport:
    """Kernel vector of a (d-1) x d matrix inside [-1/2, 1/2]^d with a +1/2 entry.

    The free variable tied to the largest |c_ik| carries the scale
    (ties: smallest free column, then smallest pivot); all other free
    variables are zero.  With no dependencies at all, the first free
    variable is set to 1/2.
    """
    w0 = RationalMatrix.of(w0)
    d = w0.cols
    if d < 2 or w0.rows != d - 1:
        raise ValueError(f"expected a (d-1) x d matrix, got {w0.rows} x {d}")
    reduced, pivots = rref(w0)
    sets = classify_indices(reduced, pivots)
    x = [Fraction(0)] * d
    if not sets.coeffs:
        k = sets.free[0]
        x[k] = HALF
        return WitnessReport(reduced, pivots, sets.forced_zero, sets.pivot, sets.free, {},
                             None, k, tuple(x), True, k)
    (i_best, k_best), mu = min(sets.coeffs.items(), key=lambda kv: (-abs(kv[1]), kv[0][1], kv[0][0]))
    if abs(mu) >= 1:
        x[k_best] = Fraction(1 if mu > 0 else -1) / (2 * abs(mu))
        half = i_best
    else:
        x[k_best] = HALF
        half = k_best
    for (i, k), c in sets.coeffs.items():
        if k == k_best:
            x[i] = c * x[k_best]
    return WitnessReport(reduced, pivots, sets.forced_zero, sets.pivot, sets.free, dict(sets.coeffs),
                         mu, k_best, tuple(x), False, half)


def in_kernel(w0, x) -> bool:
    return all(v == 0 for v in RationalMatrix.of(w0).matvec(x))


# -- the function family ---------------------------------------------------------

@dataclass(frozen=True)
class ExampleFamily:
    """f(x) = sum_j c_j h_j(x_j) on [-1/2, 1/2]^d."""

    d: int
    c: tuple
    h: tuple
    c_star: float

    def __call__(self, xs) -> np.ndarray:
        xs = np.array(xs, dtype=float, ndmin=2)
        return sum(cj * np.asarray(hj(xs[:, j]), dtype=float) for j, (cj, hj) in enumerate(zip(self.c, self.h)))


def abs2(x):
    return 2.0 * np.abs(x)


def example_family(d: int, c: Sequence[float] | None = None, h=abs2) -> ExampleFamily:
    """Build the family; ``h`` is one callable for all coordinates or a sequence."""
    c = tuple(float(v) for v in (c if c is not None else [1.0] * d))
    hs = tuple(h) if isinstance(h, (list, tuple)) else (h,) * d
    if len(c) != d or len(hs) != d:
        raise ValueError("need d weights and d functions")
    if any(not v > 0 for v in c):
        raise ValueError("every c_j must be positive")
    grid = np.linspace(-0.5, 0.5, 201)
    halves = []
    for j, hj in enumerate(hs):
        at0 = float(np.asarray(hj(np.array([0.0])))[0])
        at_half = float(np.asarray(hj(np.array([0.5])))[0])
        if at0 != 0.0:
            raise ValueError(f"h[{j}](0) = {at0} must vanish")
        if at_half == 0.0:
            raise ValueError(f"h[{j}](1/2) must be nonzero")
        if np.any(np.asarray(hj(grid)) < 0):
            raise ValueError(f"h[{j}] must be nonnegative")
        halves.append(at_half)
    return ExampleFamily(d, c, hs, min(c) * min(halves))


# -- the two-point certificate ---------------------------------------------------

@dataclass
class GapCertificate:
    e0: float
    e1: float
    gap: float
    floor: float
    net_at_origin: float
    net_at_witness: float
    witness: WitnessReport = field(repr=False)

    @property
    def holds(self) -> bool:
        return self.gap >= self.floor - 1e-9

    def to_record(self) -> dict:
        return {"e0": self.e0, "e1": self.e1, "gap": self.gap, "floor": self.floor,
                "net_at_origin": self.net_at_origin, "net_at_witness": self.net_at_witness,
                "holds": self.holds, "witness": self.witness.to_record()}


def two_point_gap(family: ExampleFamily, net: FeedforwardNetwork,
                  activation: Callable | None = None) -> GapCertificate:
    """max(|f(0) - net(0)|, |f(x~) - net(x~)|) with x~ from the first layer's kernel.

    Only the first layer is constrained (d - 1 rows, d columns); any depth
    and any activation hook are allowed after it.
    """
    d = family.d
    first = net.first_layer
    if net.input_dim != d or first.out_dim != d - 1 or net.output_dim != 1:
        raise WidthMismatch(f"certificate needs a {d - 1} x {d} first layer and scalar output, "
                            f"got {first.out_dim} x {net.input_dim}")
    report = construct_witness(RationalMatrix.of(first.weight.tolist()))
    pts = np.array([[0.0] * d, [float(v) for v in report.x_tilde]])
    out = evaluate_batch(net, pts, activation)[:, 0]
    fv = family(pts)
    e0, e1 = float(abs(fv[0] - out[0])), float(abs(fv[1] - out[1]))
    return GapCertificate(e0, e1, max(e0, e1), family.c_star / 2, float(out[0]), float(out[1]), report)


# -- generators for certification batches -----------------------------------------

def random_rational_matrix(rows: int, cols: int, rng, kind: str = "full") -> RationalMatrix:
    """Small-denominator rational matrix; ``kind`` in full, zero, deficient, sparse."""
    if kind == "zero":
        return RationalMatrix(tuple(tuple(Fraction(0) for _ in range(cols)) for _ in range(rows)))
    num = rng.integers(-6, 7, size=(rows, cols))
    den = rng.integers(1, 5, size=(rows, cols))
    m = [[Fraction(int(p), int(q)) for p, q in zip(nr, dr)] for nr, dr in zip(num, den)]
    if kind == "sparse":
        mask = rng.random((rows, cols)) < 0.6
        m = [[v if keep else Fraction(0) for v, keep in zip(r, mr)] for r, mr in zip(m, mask)]
    elif kind == "deficient" and rows >= 2:
        # last row is a rational combination of the first two
        s, t = Fraction(int(rng.integers(-3, 4)), 2), Fraction(int(rng.integers(-3, 4)), 3)
        m[-1] = [s * a + t * b for a, b in zip(m[0], m[1])]
    return RationalMatrix(tuple(tuple(r) for r in m))


def random_narrow_network(d: int, depth: int, rng, scale: float = 2.0) -> FeedforwardNetwork:
    """Random EUAF network with every hidden layer of width d - 1."""
    w = d - 1
    dims = [d] + [w] * depth + [1]
    layers = []
    for i in range(depth + 1):
        layers.append(AffineLayer(scale * rng.standard_normal((dims[i + 1], dims[i])),
                                  scale * rng.standard_normal(dims[i + 1]), activated=i < depth))
    return FeedforwardNetwork(d, tuple(layers), {"role": "narrow", "kind": "random"})


def _unpack(theta: np.ndarray, dims: Sequence[int]):
    out, pos = [], 0
    for i in range(len(dims) - 1):
        n_w = dims[i + 1] * dims[i]
        w = theta[pos:pos + n_w].reshape(dims[i + 1], dims[i])
        pos += n_w
        b = theta[pos:pos + dims[i + 1]]
        pos += dims[i + 1]
        out.append((w, b))
    return out


def train_narrow_network(family: ExampleFamily, depth: int = 2, budget: SearchBudget | None = None,
                         points: int = 256) -> FeedforwardNetwork:
    """Fit a width-(d-1) EUAF network to the family by compass search on all parameters.

    The loss is the mean squared error on seeded sample points of
    [-1/2, 1/2]^d, with the cube's corners and axis half-points included.
    """
    budget = budget or SearchBudget(max_evals=100_000)
    d = family.d
    rng = np.random.default_rng(budget.seed)
    axis_pts = np.vstack([0.5 * np.eye(d), -0.5 * np.eye(d), np.zeros((1, d))])
    xs = np.vstack([rng.uniform(-0.5, 0.5, size=(points, d)), axis_pts])
    ys = family(xs)
    dims = [d] + [d - 1] * depth + [1]

    def forward(theta):
        h = xs
        parts = _unpack(theta, dims)
        for i, (w, b) in enumerate(parts):
            h = h @ w.T + b
            if i < len(parts) - 1:
                h = _euaf(h)
        return h[:, 0]

    def loss(theta):
        r = forward(theta) - ys
        return float(r @ r) / len(ys)

    n_params = sum(dims[i + 1] * (dims[i] + 1) for i in range(len(dims) - 1))
    theta0 = 0.5 * rng.standard_normal(n_params)
    res = multistart_search(loss, theta0, budget, spread=0.5)
    layers = [AffineLayer(w.copy(), b.copy(), activated=i < depth)
              for i, (w, b) in enumerate(_unpack(res.x, dims))]
    return FeedforwardNetwork(d, tuple(layers), {"role": "narrow", "kind": "trained",
                                                 "loss": res.value, "evaluations": res.evaluations})
