import numpy as np
import pytest

from utils.errors import CountMismatch
from models.components import FDConfig
from models.orbit import OrbitSpec, ChartPoint, embed, tangent_frame
from models.groupoid import gt_pattern_layout
from models import hermitian as hm
from models import pn
from utils.data import sample_chart_points

FD = FDConfig()


def test_standard_r_matrix():
    r = hm.standard_r_matrix(4, 0.5)
    assert len(r.pairs) == 6
    for b, a in r.pairs:
        np.testing.assert_array_equal(a + a.conj().T, 0)
        np.testing.assert_array_equal(b + b.conj().T, 0)
    assert r.scaled(2.0).c == 2.0
    with pytest.raises(ValueError):
        hm.standard_r_matrix(3, 0.0)


def test_kks_form_at_cp1_origin():
    spec = OrbitSpec(2, 1)
    p = spec.origin()
    omega = hm.kks_form(spec, p, tangent_frame(spec, p)).components
    np.testing.assert_allclose(omega, [[0.0, -2.0], [2.0, 0.0]], atol=1e-12)


def test_vertex_shift(cp2):
    s0, residual = hm.vertex_shift(cp2.spec, cp2.r)
    assert s0 == pytest.approx(2 * cp2.c * cp2.spec.scale, rel=1e-9)
    assert residual < 1e-10


@pytest.mark.parametrize("name", ["cp1", "cp2", "gr24"])
def test_bruhat_vanishes_at_lowest_vertex(name, request):
    model = request.getfixturevalue(name)
    lowest = model.spec.origin(model.spec.opposite_chart)
    local = model.local(lowest)
    assert np.linalg.norm(local.pi) < 1e-9 * max(1.0, np.linalg.norm(local.omega_inv))


@pytest.mark.parametrize("name", ["cp1", "cp2", "gr24"])
def test_nijenhuis_at_rho(name, request):
    model = request.getfixturevalue(name)
    np.testing.assert_allclose(model.local(model.spec.origin()).N, 2.0 * np.eye(model.spec.dim), atol=1e-9)


def test_pencil_bivector():
    omega = np.array([[0.0, -2.0], [2.0, 0.0]])
    pi = np.array([[0.0, 1.0], [-1.0, 0.0]])
    np.testing.assert_array_equal(hm.pencil_bivector(pi, omega, 0.0).components, pi)
    np.testing.assert_allclose(hm.pencil_bivector(np.zeros((2, 2)), omega, 1.0).components, np.linalg.inv(omega))
    np.testing.assert_allclose(hm.nijenhuis_operator(pi, omega).components, 2.0 * np.eye(2))


def test_moment_minor():
    x = np.arange(9.0).reshape(3, 3)
    np.testing.assert_array_equal(hm.moment_minor(x, 2), [[0.0, 1.0], [3.0, 4.0]])
    for s in (0, 4):
        with pytest.raises(ValueError):
            hm.moment_minor(x, s)


@pytest.mark.parametrize("n, k", [(2, 1), (3, 1), (4, 1), (4, 2), (5, 2)])
def test_empirical_layout_matches_patterns(n, k):
    spec = OrbitSpec(n, k)
    layout = hm.default_layout(spec, hm.default_kappa(spec))
    assert layout.slots == gt_pattern_layout(n, k)


def test_layout_needs_generic_samples():
    spec = OrbitSpec(3, 1)
    with pytest.raises(CountMismatch):
        hm.gt_layout(spec, [spec.origin()], hm.default_kappa(spec))


def test_gt_at_rho(cp1):
    gt = cp1.gt(cp1.spec.origin())
    np.testing.assert_allclose(gt.flat, [2.0])
    assert not gt.smooth
    assert gt.interlacing_residual() == 0.0


def test_gt_interlacing(cp2, cp2_points):
    for p in cp2_points:
        gt = cp2.gt(p)
        assert gt.interlacing_residual() < 1e-9
        assert np.all((gt.flat > 0) & (gt.flat < 2))


def test_gt_spectrum_rejects_bad_kappa(cp2):
    with pytest.raises(ValueError):
        hm.gt_spectrum(embed(cp2.spec, cp2.spec.origin()), cp2.spec, 0.0)


def test_match_spectra():
    nspec = [(0.5, 2), (1.5, 2)]
    assert hm.match_spectra(nspec, [1.5, 0.5]).max_distance == 0.0
    assert hm.match_spectra(nspec, [0.5, 1.5 + 1e-8]).max_distance == pytest.approx(1e-8)
    report = hm.match_spectra(nspec, [0.5])
    assert not report.complete and report.max_distance == np.inf
    np.testing.assert_array_equal(hm.expand_spectrum([(1.0, 4)]), [1.0, 1.0])


def test_spectrum_matches_gt(cp2, cp2_points):
    for p in cp2_points:
        assert cp2.match(p).max_distance < 1e-6


def test_spectrum_matches_gt_on_grassmannian(gr24):
    for p in sample_chart_points(gr24.spec, 5, np.random.default_rng(2)):
        assert gr24.match(p).max_distance < 1e-6


@pytest.mark.parametrize("scale", [1.0, 2.0])
def test_calibration(scale):
    spec = OrbitSpec(2, 1, scale)
    samples = sample_chart_points(spec, 20, np.random.default_rng(0))
    result = hm.calibrate(spec, samples)
    assert result.c == pytest.approx(1 / (2 * scale), rel=1e-6)
    assert result.kappa == pytest.approx(2 / scale)
    assert result.objective < 1e-6
    assert result.to_json()["layout"] == [[1, 0]]


def test_calibration_needs_samples():
    spec = OrbitSpec(2, 1)
    with pytest.raises(ValueError):
        hm.calibrate(spec, sample_chart_points(spec, 3, np.random.default_rng(0)))


def test_degeneracy_witness(cp1, cp2):
    p = hm.degeneracy_witness(cp1, -1.0)
    assert p == ChartPoint((1.0, 0.0))
    for model in (cp1, cp2):
        for t in (-1.0, -0.5):
            p = hm.degeneracy_witness(model, t)
            eigs = np.linalg.eigvals(model.local(p).N + t * np.eye(model.spec.dim))
            assert np.min(np.abs(eigs)) < 1e-7
    with pytest.raises(ValueError):
        hm.degeneracy_witness(cp1, 1.0)


def test_jacobi_and_torsion(cp2, cp2_points):
    for p in cp2_points[:2]:
        for P in (cp2.poisson_field, cp2.bruhat_field, cp2.pencil_field(-1.0)):
            bracket = pn.schouten_bivector_bivector(P, P, p, FD)
            scale = max(1.0, np.linalg.norm(P(p)) * np.linalg.norm(P.jacobian(p, FD)))
            assert np.linalg.norm(bracket) / scale < 1e-5
        N = cp2.nijenhuis_field
        scale = max(1.0, np.linalg.norm(N(p)) * np.linalg.norm(N.jacobian(p, FD)))
        assert np.linalg.norm(pn.torsion_tensor(N, p, FD)) / scale < 1e-6


def test_gt_variables_are_nijenhuis_eigenvalues(cp2, cp2_points):
    N = cp2.nijenhuis_field
    for p in cp2_points[:2]:
        for i in range(cp2.spec.m):
            res = pn.check_eigen_equation(cp2.gt_variable(i), N, p, FD)
            assert res / max(1.0, np.linalg.norm(N(p))) < 1e-5


def test_pencil_shifts_spectrum(cp2, cp2_points):
    p = cp2_points[0]
    base = cp2.spectrum(p)
    shifted = cp2.spectrum(p, t=1.0)
    assert [m for _, m in shifted] == [m for _, m in base]
    np.testing.assert_allclose([v for v, _ in shifted], [v + 1.0 for v, _ in base], atol=1e-10)
