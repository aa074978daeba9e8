import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from utils.errors import KindMismatch, AsymmetryResidual, SingularNt, OddMultiplicity, ComplexSpectrum
from models.components import FDConfig, TensorField, constant_field, identity_field
from models.orbit import ChartPoint
from models import pn

FD = FDConfig()
J = np.array([[0.0, 1.0], [-1.0, 0.0]])
P3 = ChartPoint((0.3, -0.7, 1.2))


def lie_poisson_so3():
    """P^{ij} = eps_ijk x_k, a linear Poisson tensor."""
    def evaluator(q):
        x = q.array
        return np.array([[0.0, x[2], -x[1]], [-x[2], 0.0, x[0]], [x[1], -x[0], 0.0]])
    return TensorField(evaluator, "bivector")


def random_linear(rng, dim, kind):
    coef = rng.normal(size=(dim + 1, dim, dim))
    if kind == "bivector":
        coef = coef - coef.transpose(0, 2, 1)
    return TensorField(lambda q: coef[0] + np.einsum("l,lij->ij", q.array, coef[1:]), kind)


@pytest.mark.parametrize("P, p", [
    (constant_field(np.kron(np.eye(2), J), "bivector"), ChartPoint((0.1, 0.2, 0.3, 0.4))),
    (lie_poisson_so3(), P3),
])
def test_schouten_vanishes_on_poisson_tensors(P, p):
    np.testing.assert_allclose(pn.schouten_bivector_bivector(P, P, p, FD), 0, atol=1e-8)


def test_schouten_detects_non_poisson():
    # P^{01} = 1, P^{12} = x_1
    def evaluator(q):
        x = q.array
        return np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, x[1]], [0.0, -x[1], 0.0]])
    P = TensorField(evaluator, "bivector")
    bracket = pn.schouten_bivector_bivector(P, P, P3, FD)
    np.testing.assert_allclose(bracket[0, 1, 2], 2.0, atol=1e-8)
    np.testing.assert_allclose(bracket, -bracket.transpose(1, 0, 2), atol=1e-8)


def test_schouten_kind_mismatch():
    with pytest.raises(KindMismatch):
        pn.schouten_bivector_bivector(identity_field(3), lie_poisson_so3(), P3, FD)


def test_lie_derivative_of_hamiltonian_flow_vanishes():
    P = constant_field(np.kron(np.eye(2), J), "bivector")
    H = np.diag([1.0, 2.0, 3.0, 4.0]) + 0.5
    v = lambda q: P(q).T @ (H @ q.array)
    lie = pn.lie_derivative_bivector(v, P, ChartPoint((0.1, 0.2, 0.3, 0.4)), FD)
    np.testing.assert_allclose(lie.components, 0, atol=1e-8)


def test_lie_derivative_along_zero_field():
    lie = pn.lie_derivative_bivector(lambda q: np.zeros(3), lie_poisson_so3(), P3, FD)
    np.testing.assert_array_equal(lie.components, np.zeros((3, 3)))


def test_torsion_of_constant_multiples_of_identity():
    for c in (1.0, -2.5):
        np.testing.assert_array_equal(pn.torsion_tensor(identity_field(3, c), P3, FD), np.zeros((3, 3, 3)))


def test_torsion_of_random_linear_field():
    N = random_linear(np.random.default_rng(5), 3, "endomorphism")
    T = pn.torsion_tensor(N, P3, FD)
    assert np.linalg.norm(T) > 1e-2
    np.testing.assert_allclose(T, -T.transpose(0, 2, 1), atol=1e-8)
    np.testing.assert_array_equal(pn.nijenhuis_torsion(N, 0, 1, P3, FD), T[:, 0, 1])


def test_hierarchy_bivector():
    P = np.kron(np.eye(2), J)
    np.testing.assert_array_equal(pn.hierarchy_bivector(P, np.eye(4), 0).components, P)
    np.testing.assert_allclose(pn.hierarchy_bivector(P, 3.0 * np.eye(4), 1).components, 3.0 * P)
    with pytest.raises(ValueError):
        pn.hierarchy_bivector(P, np.eye(4), -1)
    with pytest.raises(AsymmetryResidual):
        pn.hierarchy_bivector(P, np.arange(16.0).reshape(4, 4), 1)


def test_trivial_hierarchy():
    P = lie_poisson_so3()
    level = pn.HierarchyLevel(j=2, k=1)
    field = level.bivector(P, identity_field(3))
    np.testing.assert_allclose(field(P3), P(P3))
    assert level.hamiltonian(identity_field(3))(P3) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        pn.HierarchyLevel(-1, 1)


def test_np_symmetry():
    P = np.kron(np.eye(2), J)
    assert pn.check_np_symmetry(P, np.eye(4)) == 0.0
    assert pn.check_np_symmetry(P, np.diag([1.0, 2.0, 3.0, 4.0])) > 1.0


@settings(deadline=None, max_examples=30)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_canonical_hamiltonian_on_doubled_diagonal(a, b):
    N = constant_field(np.diag([a, a, b, b]), "endomorphism")
    p = ChartPoint((0.0,) * 4)
    assert pn.canonical_hamiltonian(N, 2, p) == pytest.approx(a ** 2 + b ** 2, abs=1e-9)
    assert pn.canonical_hamiltonian(N, 1, p) == pytest.approx(2 * (a + b), abs=1e-9)


def test_canonical_hamiltonian_index():
    assert pn.canonical_hamiltonian(identity_field(4), 1, ChartPoint((0.0,) * 4)) == 4.0
    with pytest.raises(ValueError):
        pn.canonical_hamiltonian(identity_field(4), 0, ChartPoint((0.0,) * 4))


def test_lenart_and_logdet_for_constant_operators():
    N = identity_field(3, 2.0)
    assert pn.check_lenart_canonical(N, 2, P3, FD) == 0.0
    assert pn.check_logdet_extension(N, 1.0, P3, FD) == 0.0
    with pytest.raises(SingularNt):
        pn.check_logdet_extension(N, -2.0, P3, FD)


def test_logdet_extension_at_a_zero_of_the_pencil(cp1):
    # |z|^2 = 1 puts the GT value at 1, so N - 1 vanishes there but not on the stencil
    p = ChartPoint((1 / np.sqrt(2), 1 / np.sqrt(2)))
    assert cp1.gt_values(p)[0] == pytest.approx(1.0)
    with pytest.raises(SingularNt):
        pn.check_logdet_extension(cp1.nijenhuis_field, -1.0, p, FD)
    assert pn.check_logdet_extension(cp1.nijenhuis_field, 1.0, p, FD) < 1e-6


def test_shifted_field():
    N = identity_field(2, 1.5)
    assert pn.shifted_field(N, 0) is N
    np.testing.assert_array_equal(pn.shifted_field(N, -1.0)(ChartPoint((0.0, 0.0))), 0.5 * np.eye(2))


def test_poisson_bracket():
    assert pn.poisson_bracket(J, [1.0, 0.0], [0.0, 1.0]) == 1.0
    assert pn.poisson_bracket(J, [0.3, 0.4], [0.3, 0.4]) == 0.0


@settings(deadline=None, max_examples=50)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3),
       st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3))
def test_poisson_bracket_is_antisymmetric(df, dg):
    P = lie_poisson_so3()(P3)
    assert pn.poisson_bracket(P, df, df) == 0.0
    assert pn.poisson_bracket(P, df, dg) == -pn.poisson_bracket(P, dg, df)


def test_koszul_bracket_of_exact_forms():
    P = constant_field(J, "bivector")
    f = lambda q: q.coords[0] ** 2
    g = lambda q: q.coords[1]
    p = ChartPoint((0.7, -0.4))
    # {df, dg}_P = d{f, g}_P = d(2 x_0)
    np.testing.assert_allclose(pn.koszul_bracket(P, f, g, p, FD), [2.0, 0.0], atol=1e-6)
    np.testing.assert_allclose(pn.koszul_bracket(P, f, f, p, FD), [0.0, 0.0], atol=1e-6)


def test_nijenhuis_spectrum():
    assert pn.nijenhuis_spectrum(np.diag([0.5, 0.5, 1.5, 1.5])) == [(0.5, 2), (1.5, 2)]
    assert pn.nijenhuis_spectrum(np.eye(4)) == [(1.0, 4)]
    with pytest.raises(OddMultiplicity):
        pn.nijenhuis_spectrum(np.diag([1.0, 2.0, 2.0, 2.0]))
    with pytest.raises(ComplexSpectrum):
        pn.nijenhuis_spectrum(J)


def test_eigen_equation():
    N = identity_field(2, 3.0)
    constant = lambda q: 3.0
    assert pn.check_eigen_equation(constant, N, ChartPoint((0.1, 0.2)), FD) == 0.0
    coordinate = lambda q: q.coords[0]
    assert pn.check_eigen_equation(coordinate, N, ChartPoint((0.1, 0.2)), FD) == pytest.approx(2.9, abs=1e-8)


def test_hamiltonian_form_residual():
    lam = lambda q: q.coords[0] * q.coords[1]
    closed, n_closed = pn.hamiltonian_form_residual(lam, identity_field(2, 2.0), ChartPoint((0.3, 0.5)), FD)
    assert closed < 1e-8 and n_closed < 1e-8
    # N^T d x_0 = x_0 d x_1 is not closed
    N = TensorField(lambda q: np.array([[0.0, q.coords[0]], [0.0, 0.0]]), "endomorphism")
    _, n_closed = pn.hamiltonian_form_residual(lambda q: q.coords[0], N, ChartPoint((0.3, 0.5)), FD)
    assert n_closed == pytest.approx(np.sqrt(2), abs=1e-6)


def test_vandermonde_checks():
    assert pn.vandermonde_checks([1.0, 2.0]) == (1.0, 2.0)
    assert pn.vandermonde_checks([1.0, 1.0]) == (0.0, 0.0)
    assert pn.vandermonde_checks([0.5]) == (1.0, 0.5)
    with pytest.raises(ValueError):
        pn.vandermonde_checks([])
