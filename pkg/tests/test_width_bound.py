from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import fraction_free_rref

from euafnet.core import AffineLayer, FeedforwardNetwork, constant_network
from euafnet.errors import WidthMismatch
from euafnet.search import SearchBudget
from euafnet.width_bound import (RationalMatrix, classify_indices, construct_witness,
                                 example_family, in_kernel, random_narrow_network,
                                 random_rational_matrix, rref, train_narrow_network,
                                 two_point_gap)

HALF = F(1, 2)


def as_rows(m):
    return [list(r) for r in m.entries]


# -- rref ----------------------------------------------------------------------

def test_rref_examples():
    r, piv = rref([[1, 0, -2], [0, 1, 3]])
    assert as_rows(r) == [[1, 0, -2], [0, 1, 3]] and piv == (0, 1)
    r, piv = rref([[2, 4]])
    assert as_rows(r) == [[1, 2]] and piv == (0,)
    r, piv = rref([[1, 1, 1], [2, 2, 2]])
    assert as_rows(r) == [[1, 1, 1], [0, 0, 0]] and piv == (0,)


def test_rational_matrix_is_exact():
    m = RationalMatrix.of([[0.1, "1/3"]])
    assert m[0, 0] == F(0.1) and m[0, 0] != F(1, 10)
    assert m[0, 1] == F(1, 3)
    with pytest.raises(ValueError):
        RationalMatrix(((1, 2), (3,)))


matrices = st.integers(1, 5).flatmap(lambda r: st.integers(1, 6).flatmap(
    lambda c: st.lists(st.lists(st.fractions(min_value=-5, max_value=5, max_denominator=7),
                                min_size=c, max_size=c), min_size=r, max_size=r)))


@settings(max_examples=150, deadline=None)
@given(matrices)
def test_rref_structure_and_idempotence(rows):
    r, piv = rref(rows)
    assert len(piv) <= min(len(rows), len(rows[0]))
    for i, p in enumerate(piv):
        assert r[i, p] == 1
        assert all(r[j, p] == 0 for j in range(r.rows) if j != i)
        assert all(r[i, c] == 0 for c in range(p))
    assert all(all(v == 0 for v in r.entries[i]) for i in range(len(piv), r.rows))
    r2, piv2 = rref(r)
    assert r2 == r and piv2 == piv


@pytest.mark.parametrize("seed", range(5))
def test_rref_agrees_with_fraction_free_oracle(seed):
    rng = np.random.default_rng(seed)
    for kind in ("full", "sparse", "deficient", "zero"):
        m = random_rational_matrix(4, 5, rng, kind)
        r, piv = rref(m)
        ref, ref_piv = fraction_free_rref(m.entries)
        assert r.entries == ref and piv == ref_piv


# -- classification ------------------------------------------------------------

def test_classify_examples():
    s = classify_indices(*rref([[1, 0, -2], [0, 1, 3]]))
    assert s.pivot == (0, 1) and s.free == (2,) and s.forced_zero == ()
    assert s.coeffs == {(0, 2): 2, (1, 2): -3}
    s = classify_indices(*rref([[0, 0]]))
    assert s.pivot == () and s.free == (0, 1) and s.coeffs == {}
    s = classify_indices(*rref([[1, 0, 0], [0, 1, -1]]))
    assert s.forced_zero == (0,) and s.pivot == (1,) and s.free == (2,)
    assert s.coeffs == {(1, 2): 1}


# -- witness -------------------------------------------------------------------

def test_witness_examples():
    w = construct_witness([[1, 0, -2], [0, 1, 3]])
    assert w.x_tilde == (F(-1, 3), HALF, F(-1, 6))
    assert w.mu_tilde == -3 and w.k_tilde == 2 and w.half_coordinate == 1
    w = construct_witness([[1, 0, F(-1, 2)], [0, 1, F(1, 4)]])
    assert w.coeffs == {(0, 2): HALF, (1, 2): F(-1, 4)}
    assert w.mu_tilde == HALF and w.x_tilde == (F(1, 4), F(-1, 8), HALF)
    w = construct_witness([[0, 0]])
    assert w.x_tilde == (HALF, 0) and w.degenerate and w.mu_tilde is None


def test_witness_ties_pick_smallest_free_then_pivot():
    # |c| = 2 appears at (0, 2), (1, 2) and (0, 3)
    w = construct_witness([[1, 0, -2, 2], [0, 1, 2, 0], [0, 0, 0, 0]])
    assert w.k_tilde == 2 and w.half_coordinate == 0
    assert in_kernel([[1, 0, -2, 2], [0, 1, 2, 0], [0, 0, 0, 0]], w.x_tilde)


def test_witness_forced_zero_only_is_degenerate():
    w = construct_witness([[1, 0, 0], [0, 1, 0]])
    assert w.degenerate and w.x_tilde == (0, 0, HALF)


def test_witness_shape_errors():
    with pytest.raises(ValueError):
        construct_witness([[1, 2]] * 2)
    with pytest.raises(ValueError):
        construct_witness([[1]])


def test_witness_record_uses_fraction_strings():
    rec = construct_witness([[1, 0, -2], [0, 1, 3]]).to_record()
    assert rec["x_tilde"] == ["-1/3", "1/2", "-1/6"]
    assert rec["mu_tilde"] == "-3/1" and rec["rank"] == 2
    assert rec["coeffs"][0] == {"pivot": 0, "free": 2, "value": "2/1"}


def check_witness(m, w):
    assert in_kernel(m, w.x_tilde)
    assert all(abs(v) <= HALF for v in w.x_tilde)
    assert w.x_tilde[w.half_coordinate] == HALF


@pytest.mark.parametrize("d", [2, 3, 5])
def test_witness_invariants_on_random_batches(d):
    rng = np.random.default_rng(100 + d)
    kinds = ("full", "sparse", "deficient", "zero")
    for i in range(300):
        m = random_rational_matrix(d - 1, d, rng, kinds[i % 4])
        check_witness(m, construct_witness(m))


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 6).flatmap(lambda d: st.lists(
    st.lists(st.fractions(min_value=-9, max_value=9, max_denominator=9), min_size=d, max_size=d),
    min_size=d - 1, max_size=d - 1)), st.fractions(min_value=-7, max_value=7, max_denominator=5))
def test_witness_properties_and_scale_invariance(rows, alpha):
    m = RationalMatrix.of(rows)
    w = construct_witness(m)
    check_witness(m, w)
    if alpha != 0:
        assert construct_witness(m.scaled(alpha)).x_tilde == w.x_tilde


def test_float_first_layer_is_converted_exactly():
    rng = np.random.default_rng(9)
    w = rng.normal(size=(2, 3))
    report = construct_witness(RationalMatrix.of(w.tolist()))
    check_witness(RationalMatrix.of(w.tolist()), report)


# -- family and gap ------------------------------------------------------------

def test_family_examples():
    fam = example_family(3)
    assert fam([[0, 0, 0]])[0] == 0
    xs = np.random.default_rng(0).uniform(-0.5, 0.5, (200, 3))
    xs[:, 1] = 0.5
    assert fam(xs).min() >= 1
    fam2 = example_family(2, [2, 3], [lambda x: np.abs(x), lambda x: 2 * np.abs(x)])
    assert fam2.c_star == 1.0


def test_family_rejects_inadmissible_h():
    with pytest.raises(ValueError):
        example_family(2, h=lambda x: np.abs(x) + 1)
    with pytest.raises(ValueError):
        example_family(2, h=lambda x: np.abs(x) * (np.abs(x) < 0.4))
    with pytest.raises(ValueError):
        example_family(2, h=lambda x: np.asarray(x))
    with pytest.raises(ValueError):
        example_family(2, c=[1, -1])


def test_gap_zero_network():
    fam = example_family(3)
    cert = two_point_gap(fam, constant_network(0.0, 3, (2,)))
    assert cert.e0 == 0 and cert.gap >= 1 and cert.holds


def test_gap_constant_network():
    cert = two_point_gap(example_family(3), constant_network(0.6, 3, (2, 2)))
    assert cert.e0 == pytest.approx(0.6) and cert.gap >= 0.6
    assert cert.net_at_origin == cert.net_at_witness


def test_gap_random_networks_any_depth():
    fam = example_family(3)
    rng = np.random.default_rng(2)
    for depth in (1, 2, 4):
        for _ in range(100):
            cert = two_point_gap(fam, random_narrow_network(3, depth, rng))
            assert cert.gap >= 0.5 - 1e-9
            assert cert.net_at_origin == pytest.approx(cert.net_at_witness, abs=1e-12)


def test_gap_with_other_activation():
    fam = example_family(3)
    net = random_narrow_network(3, 2, np.random.default_rng(4))
    cert = two_point_gap(fam, net, activation=np.tanh)
    assert cert.holds


def test_gap_width_mismatch():
    fam = example_family(3)
    wide = FeedforwardNetwork(3, (AffineLayer(np.ones((3, 3)), np.zeros(3)),
                                  AffineLayer(np.ones((1, 3)), [0.0], activated=False)))
    with pytest.raises(WidthMismatch):
        two_point_gap(fam, wide)
    with pytest.raises(WidthMismatch):
        two_point_gap(fam, constant_network(0.0, 2, (1,)))


def test_trained_network_still_above_floor():
    fam = example_family(3)
    net = train_narrow_network(fam, 2, SearchBudget(max_evals=5_000, seed=1))
    assert net.widths == (2, 2)
    cert = two_point_gap(fam, net)
    assert cert.holds
    assert net.metadata["evaluations"] <= 5_000


def test_training_is_deterministic():
    fam = example_family(3)
    a = train_narrow_network(fam, 1, SearchBudget(max_evals=2_000, seed=5))
    b = train_narrow_network(fam, 1, SearchBudget(max_evals=2_000, seed=5))
    assert a == b
