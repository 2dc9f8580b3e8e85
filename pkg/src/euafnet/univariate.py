"""Fixed-architecture EUAF fitting of univariate continuous functions.

The fit follows three steps:

1. split [a, b] into ``n`` equal cells, small enough that the target moves
   less than eps/2 across a cell (``choose_partition``);
2. an *indexer* network sends cell ``k`` to the integer ``k``
   (``build_indexer``);
3. a *decoder* network sends ``k`` to the value of the target on cell ``k``
   (``fit_point_values``).

Both networks are built from the staircase identity

    st(s) = s - sigma(2 s + 5/2) / 2 + 1/4,

which is exactly ``k`` whenever ``|s - k| <= 1/4`` (one triangle-wave neuron
plus a passthrough), and from the one-neuron ReLU on [-1, 1]

    max(z, 0) = (z + 1 - sigma(z + 1)) / 2.

The composed network plus a linear lane is padded to a fixed 36 x 5
template, so refits for other targets or tolerances change parameter values
only.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from .core import (TEMPLATE_DEPTH, TEMPLATE_WIDTH, AffineLayer, FeedforwardNetwork,
                   compose_networks, constant_network, identity_lane,
                   map_output, pad_to_width, scalar_fn, stack_networks)
from .errors import FitFailed, IndexerError, InfeasibleTolerance, NonFiniteError
from .search import SearchBudget, multistart_search
from .serialize import network_to_record
from .tables import ErrorTable

N_MAX = 4096
MODULUS_SAMPLES = 10_001
VALIDATION_POINTS = 2001
# fraction of eps handed to the decoder; the partition takes < eps/2
DECODER_SHARE = 0.45
# kink units available to the decoder: 34 in each of its last two layers
DECODER_UNITS = 68
_LAYER_UNITS = 34


def sample(f, xs) -> np.ndarray:
    """Evaluate ``f`` on ``xs``, vectorized when ``f`` supports it."""
    xs = np.asarray(xs, dtype=float)
    try:
        ys = np.asarray(f(xs), dtype=float)
        if ys.shape != xs.shape:
            ys = np.broadcast_to(ys, xs.shape).astype(float) if ys.ndim == 0 else None
    except (TypeError, ValueError):
        ys = None
    if ys is None:
        ys = np.array([float(f(float(x))) for x in xs.ravel()]).reshape(xs.shape)
    if not np.all(np.isfinite(ys)):
        raise NonFiniteError("target function returned a non-finite value")
    return ys


def _grid_modulus(values: np.ndarray, spacing: float, delta: float) -> float:
    lag = int(np.floor(delta / spacing + 1e-9))
    if lag <= 0:
        return 0.0
    if lag >= len(values) - 1:
        return float(values.max() - values.min())
    size = lag + 1
    hi = maximum_filter1d(values, size, mode="nearest")
    lo = minimum_filter1d(values, size, mode="nearest")
    return float((hi - lo).max())


def estimate_modulus(f, interval, delta: float, samples: int = MODULUS_SAMPLES) -> float:
    """Empirical modulus of continuity: max |f(u) - f(v)| over grid pairs with |u - v| <= delta."""
    a, b = map(float, interval)
    if not delta > 0:
        raise ValueError("delta must be positive")
    if samples < 2:
        raise ValueError("need at least two samples")
    xs = np.linspace(a, b, samples)
    return _grid_modulus(sample(f, xs), xs[1] - xs[0], delta)


@dataclass(frozen=True)
class PartitionPlan:
    a: float
    b: float
    n: int
    breakpoints: tuple
    values: tuple

    @property
    def cell_width(self) -> float:
        return (self.b - self.a) / self.n

    @property
    def midpoints(self) -> np.ndarray:
        return self.a + (np.arange(self.n) + 0.5) * self.cell_width


def partition_plan(f, interval, n: int) -> PartitionPlan:
    a, b = map(float, interval)
    if not a < b:
        raise ValueError("interval must satisfy a < b")
    if n < 1:
        raise ValueError("n must be positive")
    h = (b - a) / n
    bps = a + np.arange(n + 1) * h
    bps[-1] = b
    mids = a + (np.arange(n) + 0.5) * h
    return PartitionPlan(a, b, int(n), tuple(float(v) for v in bps),
                         tuple(float(v) for v in sample(f, mids)))


def choose_partition(f, interval, eps: float, n_max: int = N_MAX,
                     samples: int = MODULUS_SAMPLES) -> PartitionPlan:
    """Smallest ``n <= n_max`` whose cell width keeps the modulus strictly below eps/2."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    a, b = map(float, interval)
    xs = np.linspace(a, b, samples)
    vals = sample(f, xs)
    spacing = xs[1] - xs[0]
    # absorbs rounding in the grid differences, nothing more
    slack = 1e-12 * max(1.0, float(np.abs(vals).max()))

    def ok(n):
        return _grid_modulus(vals, spacing, (b - a) / n) + slack < eps / 2

    if not ok(n_max):
        raise InfeasibleTolerance(
            f"eps={eps:g} needs more than n_max={n_max} sub-intervals",
            best=_grid_modulus(vals, spacing, (b - a) / n_max))
    lo, hi = 1, n_max
    while lo < hi:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid + 1
    return partition_plan(f, (a, b), lo)


# -- staircase pieces ----------------------------------------------------------

def staircase(s):
    """Numpy twin of the one-neuron staircase (flat at k for |s - k| <= 1/4)."""
    s = np.asarray(s, dtype=float)
    return s - 0.5 * np.abs(((2 * s + 2.5) + 1) % 2 - 1) + 0.25


def build_indexer(plan: PartitionPlan) -> FeedforwardNetwork:
    """Width-2, depth-2 network sending the middle of cell ``k`` exactly to ``k``.

    With ``s = n (x - a)/(b - a) - 1/2`` the output is ``st(st(s))``; it equals
    ``k`` on the middle 75% of cell ``k`` and moves monotonically from ``k`` to
    ``k + 1`` inside the boundary collars.
    """
    n, a, b = plan.n, plan.a, plan.b
    if n == 1:
        net = constant_network(0.0, 1, (2, 2))
    else:
        N = n + 1.0
        scale = 1.0 / (b - a)
        net = FeedforwardNetwork(1, (
            # x' = (x - a)/(b - a) and the staircase neuron of s = n x' - 1/2
            AffineLayer([[scale], [2 * n * scale]], [-a * scale, -2 * n * a * scale + 1.5]),
            # st1 = n x' - 1/4 - nu1/2, passed through as (st1 + 1)/N
            AffineLayer([[n / N, -0.5 / N], [2.0 * n, -1.0]], [0.75 / N, 2.0]),
            AffineLayer([[N, -0.5]], [-0.75], activated=False),
        ))
    net = net.with_metadata(role="indexer", n=n)
    dev = indexer_deviation(net, plan)
    if dev >= 0.25:
        raise IndexerError(f"indexer misses the cell contract by {dev:.3g}", dev)
    return net


def indexer_deviation(net: FeedforwardNetwork, plan: PartitionPlan, per_cell: int = 9) -> float:
    """Largest |I(x) - k| over the closed middle 80% of every cell."""
    k = np.repeat(np.arange(plan.n), per_cell)
    frac = np.tile(np.linspace(0.1, 0.9, per_cell), plan.n)
    xs = plan.a + (k + frac) * plan.cell_width
    out = scalar_fn(net)(xs)
    return float(np.abs(out - k).max())


def collar_ok(net: FeedforwardNetwork, plan: PartitionPlan, per_collar: int = 5) -> bool:
    """Inside the 10% collars ``round(I(x))`` stays within one of the cell index."""
    k = np.repeat(np.arange(plan.n), 2 * per_collar)
    frac = np.tile(np.concatenate([np.linspace(0, 0.1, per_collar),
                                   np.linspace(0.9, 1.0, per_collar)]), plan.n)
    xs = np.minimum(plan.a + (k + frac) * plan.cell_width, plan.b)
    out = np.round(scalar_fn(net)(xs))
    return bool(np.all(np.abs(out - k) <= 1))


# -- decoder -------------------------------------------------------------------

@dataclass
class PointFit:
    """Decoder network plus how well it reproduces the requested values."""

    network: FeedforwardNetwork
    max_deviation: float
    tol: float
    evaluations: int
    knots: np.ndarray
    ordinates: np.ndarray

    @property
    def met(self) -> bool:
        return self.max_deviation < self.tol


def _greedy_knots(v: np.ndarray, tol: float) -> np.ndarray:
    n = len(v)
    knots, i = [0], 0
    while i < n - 1:
        best = i + 1
        for j in range(i + 2, n):
            t = np.arange(i + 1, j)
            line = v[i] + (v[j] - v[i]) * (t - i) / (j - i)
            if np.abs(line - v[i + 1:j]).max() < tol:
                best = j
            else:
                break
        knots.append(best)
        i = best
    return np.array(knots)


def decoder_network(n: int, knots, ordinates) -> FeedforwardNetwork:
    """Depth-3 network g(st(s)) with g the piecewise-linear interpolant of (knots, ordinates).

    ``g`` is flat outside [knots[0], knots[-1]].  Knots must be increasing and
    lie in [0, n - 1]; at most ``DECODER_UNITS`` of them.
    """
    xi = np.asarray(knots, dtype=float)
    u = np.asarray(ordinates, dtype=float)
    if len(xi) != len(u) or len(xi) == 0:
        raise ValueError("knots and ordinates must be non-empty and of equal length")
    if len(xi) > DECODER_UNITS:
        raise ValueError(f"decoder holds at most {DECODER_UNITS} knots")
    N = n + 1.0
    slopes = np.concatenate([[0.0], np.diff(u) / np.diff(xi), [0.0]])
    a = np.diff(slopes)  # kink coefficient at every knot
    k2 = min(len(xi), _LAYER_UNITS)
    xi2, a2, xi3, a3 = xi[:k2], a[:k2], xi[k2:], a[k2:]

    # layer 1: s' = (s + 1)/N and the staircase neuron; y = N s' - 3/4 - nu/2
    l1 = AffineLayer([[1.0 / N], [2.0]], [1.0 / N, 2.5])
    # layer 2: y' = (y + 1)/N and ReLU neurons sigma((y - xi)/N + 1)
    w2 = np.tile([1.0, -0.5 / N], (1 + k2, 1))
    b2 = np.concatenate([[0.25 / N], 1.0 - (0.75 + xi2) / N])
    l2 = AffineLayer(w2, b2)

    # G2(y) = C + A y - sum_{layer 2} (N/2) a_i kappa_i collects everything
    # except the activated parts of the layer-3 units
    A = a.sum() / 2.0
    C = u[0] + np.sum(a * (N - xi)) / 2.0

    def g2(y):
        y = np.asarray(y, dtype=float)[:, None]
        return (u[0] + (a2 * np.maximum(y - xi2, 0)).sum(axis=1)
                + (a3 * ((y - xi3) / 2 + N / 2)).sum(axis=1))

    cand = g2(np.concatenate([[-1.0, float(n)], xi2]))
    lo, hi = float(cand.min()), float(cand.max())
    span = hi - lo
    if span > 0:
        w_acc = np.concatenate([[A * N], -(N / 2.0) * a2]) / span
        b_acc = (C - A - lo) / span
    else:
        w_acc, b_acc, span = np.zeros(1 + k2), 0.0, 0.0
    w3 = np.zeros((1 + len(xi3), 1 + k2))
    w3[0] = w_acc
    w3[1:, 0] = 1.0
    b3 = np.concatenate([[b_acc], 1.0 - (1.0 + xi3) / N])
    l3 = AffineLayer(w3, b3)
    out = AffineLayer([np.concatenate([[span], -(N / 2.0) * a3])], [lo], activated=False)
    return FeedforwardNetwork(1, (l1, l2, l3, out), {"role": "decoder", "n": n})


def decoder_deviation(net: FeedforwardNetwork, values) -> float:
    """max |D(k + t) - values[k]| over integers k and offsets t in {-1/4, 0, 1/4}."""
    v = np.asarray(values, dtype=float)
    k = np.arange(len(v), dtype=float)
    pts = np.concatenate([k - 0.25, k, k + 0.25])
    out = scalar_fn(net)(pts)
    return float(np.abs(out - np.tile(v, 3)).max())


def fit_point_values(values, tol: float, search: SearchBudget | None = None) -> PointFit:
    """Decoder D with |D(k +- 1/4) - values[k]| < tol for every index k.

    Knots come from a greedy interpolating segmentation.  When it needs more
    knots than the decoder holds, the tolerance is relaxed until it fits and
    the knot ordinates are refined by compass search.  Always returns the best
    network found; ``PointFit.met`` says whether ``tol`` was reached.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or len(v) == 0:
        raise ValueError("values must be a non-empty sequence")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if v.min() < -1e-12 or v.max() > 1 + 1e-12:
        raise ValueError("values must lie in [0, 1]")
    n = len(v)
    search = search or SearchBudget()
    evals = 0
    knots = _greedy_knots(v, tol)
    if len(knots) > DECODER_UNITS:
        lo_t, hi_t = tol, max(tol, float(v.max() - v.min())) + 1.0
        for _ in range(60):
            mid = 0.5 * (lo_t + hi_t)
            if len(_greedy_knots(v, mid)) > DECODER_UNITS:
                lo_t = mid
            else:
                hi_t = mid
        knots = _greedy_knots(v, hi_t)
    u = v[knots].copy()
    k_all = np.arange(n)
    if len(knots) > 1 and np.abs(np.interp(k_all, knots, u) - v).max() >= tol:
        def objective(z):
            return float(np.abs(np.interp(k_all, knots, z) - v).max())
        res = multistart_search(objective, u, search, spread=0.1 * tol, target=0.5 * tol)
        u, evals = res.x, res.evaluations
    net = decoder_network(n, knots, u)
    return PointFit(net, decoder_deviation(net, v), tol, evals, knots, u)


# -- full univariate fit -------------------------------------------------------

@dataclass
class FitReport:
    network: FeedforwardNetwork
    sup_error: float
    epsilon: float
    n: int
    budget_used: int
    architecture_fingerprint: tuple
    seed: int
    max_abs_param: float
    segments: int
    table: ErrorTable = field(repr=False)

    @property
    def met(self) -> bool:
        return self.sup_error < self.epsilon

    def to_record(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "sup_error": self.sup_error,
            "met": self.met,
            "n": self.n,
            "budget_used": self.budget_used,
            "architecture_fingerprint": list(self.architecture_fingerprint),
            "seed": self.seed,
            "max_abs_param": self.max_abs_param,
            "segments": self.segments,
            "network": network_to_record(self.network),
        }


def sup_error(net: FeedforwardNetwork, f, grid) -> float:
    """max over the grid of |f(x) - net(x)|."""
    xs = np.asarray(grid, dtype=float).reshape(-1)
    if xs.size == 0:
        raise ValueError("grid must be non-empty")
    return float(np.abs(sample(f, xs) - scalar_fn(net)(xs)).max())


def error_table(net: FeedforwardNetwork, f, grid) -> ErrorTable:
    xs = np.asarray(grid, dtype=float).reshape(-1)
    return ErrorTable(xs, sample(f, xs), scalar_fn(net)(xs))


def assemble_fit(plan: PartitionPlan, decoder: FeedforwardNetwork, offset: float,
                 slope: float, scale: float) -> FeedforwardNetwork:
    """``offset + slope x' + scale D(I(x))`` padded to the 36 x 5 template."""
    main = compose_networks(decoder, build_indexer(plan))
    lane = identity_lane(main.depth, plan.a, plan.b)
    both = stack_networks([main, lane])
    net = map_output(both, [[scale, slope]], [offset])
    if net.depth != TEMPLATE_DEPTH:
        raise AssertionError("fit network must have the template depth")
    return pad_to_width(net, TEMPLATE_WIDTH).with_metadata(role="univariate", n=plan.n)


def fit_univariate(f, interval, eps: float, search: SearchBudget | None = None,
                   grid: int = VALIDATION_POINTS, n_max: int = N_MAX,
                   samples: int = MODULUS_SAMPLES) -> FitReport:
    """Fit ``f`` on [a, b] within ``eps`` using the fixed 36 x 5 template.

    The secant through (a, f(a)) and (b, f(b)) goes into the linear lane and
    the indexer/decoder pair carries the remainder.  If the grid error still
    misses ``eps`` the decoder ordinates are refined by compass search.
    Raises ``FitFailed`` (carrying the best report) when ``eps`` is not met.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    search = search or SearchBudget()
    a, b = map(float, interval)
    if not a < b:
        raise ValueError("interval must satisfy a < b")
    fa, fb = sample(f, np.array([a, b]))
    offset, slope = float(fa), float(fb - fa)

    def residual(x):
        x = np.asarray(x, dtype=float)
        return sample(f, x) - offset - slope * (x - a) / (b - a)

    try:
        plan = choose_partition(residual, (a, b), eps, n_max, samples)
    except InfeasibleTolerance:
        plan = partition_plan(residual, (a, b), n_max)

    r_mid = np.array(plan.values)
    lo, hi = float(r_mid.min()), float(r_mid.max())
    span = hi - lo if hi > lo else 1.0
    v = np.clip((r_mid - lo) / span, 0.0, 1.0)
    pf = fit_point_values(v, DECODER_SHARE * eps / span, search)
    used = pf.evaluations
    net = assemble_fit(plan, pf.network, offset + lo, slope, span)

    xs = np.linspace(a, b, grid)
    fx = sample(f, xs)
    err = float(np.abs(fx - scalar_fn(net)(xs)).max())
    if err >= eps and len(pf.knots) > 1:
        # decoder input as a function of x, then a cheap surrogate of the output
        x_lane = (xs - a) / (b - a)
        y = staircase(scalar_fn(build_indexer(plan))(xs))

        def objective(z):
            return float(np.abs(fx - offset - lo - slope * x_lane
                                - span * np.interp(y, pf.knots, z)).max())

        res = multistart_search(objective, pf.ordinates, search.child(1),
                                spread=0.05 * eps / span, target=0.5 * eps)
        used += res.evaluations
        cand = assemble_fit(plan, decoder_network(plan.n, pf.knots, res.x), offset + lo, slope, span)
        cand_err = float(np.abs(fx - scalar_fn(cand)(xs)).max())
        if cand_err < err:
            net, err = cand, cand_err

    report = FitReport(net, err, float(eps), plan.n, used, net.widths, search.seed,
                       net.max_abs_param(), len(pf.knots) - 1,
                       ErrorTable(xs, fx, scalar_fn(net)(xs)))
    if not report.met:
        raise FitFailed(f"sup error {err:.3g} does not meet eps={eps:g}", report)
    return report
