from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from utils.errors import NotComposable, TargetOutsidePolytope, SingularLog
from models.orbit import ChartPoint
from models import groupoid as gp

LOG2, LOG3 = np.log(2.0), np.log(3.0)
vectors = arrays(np.float64, 3, elements=st.floats(-2, 2, allow_nan=False))
pencil = st.sampled_from([-3.0, -1.0, 0.0, 1.0])


class TableModel(object):
    """Stand-in with fixed GT values per chart point. Points in `rough` are not smooth."""
    def __init__(self, table, rough=()):
        self.table = {ChartPoint(k): np.asarray(v, dtype=float) for k, v in table.items()}
        self.rough = {ChartPoint(k) for k in rough}

    def gt(self, p):
        return SimpleNamespace(flat=self.table[p], smooth=p not in self.rough)

    def gt_values(self, p):
        return self.gt(p).flat


@pytest.mark.parametrize("n, k, slots", [
    (2, 1, ((1, 0),)),
    (3, 1, ((1, 0), (2, 1))),
    (4, 2, ((1, 0), (2, 0), (2, 1), (3, 1))),
])
def test_pattern_layout(n, k, slots):
    assert gp.gt_pattern_layout(n, k) == slots


@pytest.mark.parametrize("n", range(2, 7))
def test_polytope_dimension(n):
    for k in range(1, n):
        assert gp.GTPolytope(n, k).m == k * (n - k)


def test_simplex():
    simplex = gp.simplex(2)
    assert simplex == gp.GTPolytope(3, 1)
    assert simplex.contains([0.5, 1.5])
    assert simplex.contains([0.0, 2.0])
    assert not simplex.contains([1.5, 0.5])
    assert not simplex.contains([-0.1, 1.0])
    assert not simplex.contains([0.1, np.nan])
    np.testing.assert_array_equal(simplex.vertex(), [2.0, 2.0])
    np.testing.assert_array_equal(simplex.vertex(high=False), [0.0, 0.0])


def test_grassmannian_polytope():
    polytope = gp.GTPolytope(4, 2)
    levels = polytope.full_pattern([1.0, 0.5, 1.5, 1.0])
    np.testing.assert_array_equal(levels[3], [0.0, 0.0, 2.0, 2.0])
    assert polytope.contains([1.0, 0.5, 1.5, 1.0])
    assert not polytope.contains([1.0, 1.5, 0.5, 1.0])
    with pytest.raises(ValueError):
        polytope.full_pattern([1.0])
    lam = polytope.sample(np.random.default_rng(0))
    assert polytope.contains(lam)


def test_polytope_point():
    assert gp.PolytopePoint((0.5, 1.0), gp.simplex(2)).array.tolist() == [0.5, 1.0]
    with pytest.raises(TargetOutsidePolytope):
        gp.PolytopePoint((1.0, 0.5), gp.simplex(2))


def test_membership_case():
    assert gp.MembershipCase.from_t(1.0) is gp.MembershipCase.PAIR
    assert gp.MembershipCase.from_t(-3.0) is gp.MembershipCase.PAIR
    assert gp.MembershipCase.from_t(-1.0) is gp.MembershipCase.INTERIOR
    assert gp.MembershipCase.from_t(0.0) is gp.MembershipCase.BOUNDARY
    assert gp.MembershipCase.from_t(-2.0) is gp.MembershipCase.BOUNDARY


def test_target():
    g = gp.GroupoidElement.make([0.0], [LOG2], 1.0, gp.simplex(1))
    np.testing.assert_allclose(gp.target(g), [1.0])
    np.testing.assert_array_equal(gp.source(g), [0.0])
    g = gp.GroupoidElement.make([1.0], [LOG3], -2.0, gp.simplex(1))
    with pytest.raises(TargetOutsidePolytope):
        gp.target(g)


def test_element_validation():
    with pytest.raises(ValueError):
        gp.GroupoidElement.make([0.0, 1.0], [0.0], 1.0)
    with pytest.raises(TargetOutsidePolytope):
        gp.GroupoidElement.make([3.0], [0.0], 1.0, gp.simplex(1))
    g = gp.GroupoidElement.make([0.5], [0.1], -1.0)
    assert g.to_json() == {"lambda": [0.5], "h": [0.1], "t": -1.0}


def test_inverse():
    g = gp.GroupoidElement.make([0.0], [LOG2], 1.0, gp.simplex(1))
    inv = gp.inverse(g)
    np.testing.assert_allclose(inv.lam, [1.0])
    np.testing.assert_allclose(inv.h, [-LOG2])
    np.testing.assert_allclose(gp.target(inv), [0.0], atol=1e-15)


def test_compose():
    g1 = gp.GroupoidElement.make([0.0], [LOG2], 1.0)
    g2 = gp.GroupoidElement.make([1.0], [LOG3], 1.0)
    g = gp.compose(g1, g2)
    np.testing.assert_allclose(g.h, [np.log(6.0)])
    np.testing.assert_allclose(gp.target(g), [5.0])
    # same arrows restricted to the simplex leave it
    with pytest.raises(TargetOutsidePolytope):
        gp.compose(gp.GroupoidElement.make([0.0], [LOG2], 1.0, gp.simplex(1)),
                   gp.GroupoidElement.make([1.0], [LOG3], 1.0, gp.simplex(1)))


def test_not_composable():
    g1 = gp.GroupoidElement.make([0.0], [LOG2], 1.0)
    with pytest.raises(NotComposable):
        gp.compose(g1, gp.GroupoidElement.make([0.5], [0.0], 1.0))
    with pytest.raises(NotComposable):
        gp.compose(g1, gp.GroupoidElement.make([1.0], [0.0], -1.0))


def test_identity():
    e = gp.identity([0.5, 1.0], -1.0, gp.simplex(2))
    np.testing.assert_array_equal(gp.target(e), [0.5, 1.0])
    g = gp.GroupoidElement.make([0.5, 1.0], [0.2, -0.1], -1.0)
    assert gp.compose(gp.identity(g.lam, -1.0), g).h == g.h


@settings(deadline=None, max_examples=100)
@given(vectors, vectors, arrays(np.float64, 3, elements=st.floats(0, 2)), pencil)
def test_action_law(h1, h2, lam, t):
    composed = gp.act(h1 + h2, lam, t)
    nested = gp.act(h1, gp.act(h2, lam, t), t)
    np.testing.assert_allclose(nested, composed, rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(gp.act(np.zeros(3), lam, t), lam)


@settings(deadline=None, max_examples=50)
@given(vectors, pencil)
def test_fixed_locus(h, t):
    lam = np.array([-t, 0.5, -t])
    moved = gp.act(h, lam, t)
    assert moved[0] == -t and moved[2] == -t


@pytest.mark.parametrize("t", [-3.0, 0.0, 1.0])
def test_zero_arrow_is_exact(t):
    lam = np.array([2.225e-313, 0.1, 1.0 + 1e-16])
    np.testing.assert_array_equal(gp.act(np.zeros(3), lam, t), lam)


@pytest.mark.parametrize("lam, h, t, member", [
    ((1.0, 1.0, 1.5), (3.0, 3.0, 0.2), -1.0, True),
    ((1.0, 1.0, 1.5), (3.0, 2.0, 0.2), -1.0, False),
    ((0.0, 0.5), (0.1, 0.3), 0.0, False),
    ((0.0, 0.5), (0.0, 0.3), 0.0, True),
    ((0.5, 1.0), (0.3, 0.1), 1.0, True),
    ((0.5, 1.0), (0.3, 1.0), 1.0, False),
])
def test_membership_cpn(lam, h, t, member):
    assert gp.membership_cpn(gp.GroupoidElement.make(lam, h, t)) is member


def test_membership_needs_simplex():
    g = gp.GroupoidElement.make([1.0] * 4, [0.0] * 4, 1.0, gp.GTPolytope(4, 2))
    with pytest.raises(ValueError):
        gp.membership_cpn(g)


def test_closure_interior_case():
    t = -1.0
    g1 = gp.GroupoidElement.make([0.5, 1.0, 1.0], [np.log(0.8), 2.0, 2.0], t)
    g2 = gp.GroupoidElement.make(gp.target(g1), [np.log(0.5), -1.0, -1.0], t)
    assert gp.membership_cpn(g1) and gp.membership_cpn(g2)
    assert gp.closure_check(g1, g2)
    assert gp.membership_cpn(gp.inverse(g1))


def test_lenart_cocycle():
    f = lambda q: q ** 2
    assert gp.lenart_cocycle(f, 1.0, 3.0) == 8.0
    assert gp.lenart_cocycle(f, 2.0, 2.0) == 0.0


def test_eigenvalue_cocycle():
    model = TableModel({(0.0,): [0.0], (1.0,): [1.0], (2.0,): [1.5]})
    x, y = ChartPoint((0.0,)), ChartPoint((1.0,))
    assert gp.eigenvalue_cocycle(x, x, 0, 1.0, model) == 0.0
    assert gp.eigenvalue_cocycle(x, y, 0, 1.0, model) == pytest.approx(LOG2)
    with pytest.raises(SingularLog):
        gp.eigenvalue_cocycle(y, ChartPoint((2.0,)), 0, -1.0, model)
    with pytest.raises(SingularLog):
        gp.eigenvalue_cocycle(x, ChartPoint((2.0,)), 0, -1.0, model)


def test_pair_to_element():
    model = TableModel({(0.0,): [0.2, 1.1], (1.0,): [0.7, 1.9]})
    x, y = ChartPoint((0.0,)), ChartPoint((1.0,))
    for t in (-3.0, 1.0):
        g = gp.pair_to_element(x, y, t, model, gp.simplex(2))
        np.testing.assert_allclose(gp.target(g), [0.7, 1.9], atol=1e-12)
    gxy = gp.pair_to_element(x, y, 1.0, model)
    gyx = gp.pair_to_element(y, x, 1.0, model)
    np.testing.assert_allclose(gp.compose(gxy, gyx).h, [0.0, 0.0], atol=1e-12)


def test_cocycle_needs_smooth_points():
    model = TableModel({(0.0,): [0.2, 1.1], (1.0,): [0.7, 1.9]}, rough=[(1.0,)])
    x, y = ChartPoint((0.0,)), ChartPoint((1.0,))
    with pytest.raises(SingularLog):
        gp.eigenvalue_cocycle(x, y, 0, 1.0, model)
    with pytest.raises(SingularLog):
        gp.pair_to_element(y, x, 1.0, model)
