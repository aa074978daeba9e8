"""hermitian.py
The PN structure on Gr(k,n) (CP^n for k = 1): the KKS form, the Bruhat-Poisson
tensor pushed forward from the standard r-matrix, the pencil pi_t = pi + t omega^-1,
moment-map minors and Gelfand-Tsetlin spectra, and the calibration of the
normalisation constants against them.
"""

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from utils.errors import (DegenerateForm, FrameSolveFailure, CountMismatch, CalibrationFailure)
from models.components import (BivectorAtPoint, TwoFormAtPoint, EndomorphismAtPoint, TensorField,
                               as_components)
from models.orbit import ChartPoint, make_rho, embed, tangent_frame, solve_generators
from models.pn import nijenhuis_spectrum, shifted_field

GT_MAX = 2.0            # GT variables live in [0, GT_MAX] once kappa is fixed
FORM_COND_MAX = 1e10
FRAME_SOLVE_TOL = 1e-8
CONSTANT_TOL = 1e-7     # a GT slot pinned this close to 0 or GT_MAX on every sample is constant
SMOOTH_GAP = 1e-2
SPECTRUM_TOL = 1e-6
MIN_CALIBRATION_SAMPLES = 10
C_GRID = np.logspace(-3, 3, 121)


@dataclass(frozen=True, eq=False)
class RMatrixSpec:
    """r = c * sum first ^ second over the generator pairs."""
    pairs: tuple
    c: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"Invalid r-matrix constant {self.c}")
        for a, b in self.pairs:
            for g in (a, b):
                if np.linalg.norm(g + g.conj().T) > 1e-12:
                    raise ValueError("r-matrix generators must be skew-Hermitian")

    def scaled(self, c):
        return replace(self, c=c)


def standard_r_matrix(n, c=1.0):
    """Pairs (B_ij, A_ij), A_ij = E_ij - E_ji, B_ij = i(E_ij + E_ji), i < j."""
    pairs = []
    for i in range(n):
        for j in range(i + 1, n):
            a = np.zeros((n, n), dtype=complex)
            a[i, j], a[j, i] = 1.0, -1.0
            b = np.zeros((n, n), dtype=complex)
            b[i, j] = b[j, i] = 1j
            pairs.append((b, a))
    return RMatrixSpec(tuple(pairs), c)


def pairing(u, v):
    """<u, v> = -Tr(u v), positive definite on u(n)."""
    return -np.trace(u @ v).real


def kks_form(spec, p, frame):
    """omega_ab = <x, [X_a, X_b]> with [X_a, x] = frame.basis[a]."""
    x = frame.point.matrix
    gens = solve_generators(frame.point, frame.basis)
    xgg = np.einsum("ij,ajk,bki->ab", x, gens, gens)
    omega = -(xgg - xgg.T).real
    omega = 0.5 * (omega - omega.T)
    if np.linalg.cond(omega) > FORM_COND_MAX:
        raise DegenerateForm(f"KKS form ill-conditioned at {p.coords}")
    return TwoFormAtPoint(omega)


def sigma(x, gen):
    """Infinitesimal action sigma_x(X) = [X, x]."""
    return gen @ x - x @ gen


def sigma_bivector(r, frame):
    """Frame components of sum c * sigma(first) ^ sigma(second)."""
    x = frame.point.matrix
    vectors = [sigma(x, g) for pair in r.pairs for g in pair]
    coef, res = frame.coefficients(vectors)
    if res > FRAME_SOLVE_TOL:
        raise FrameSolveFailure(f"sigma_x not in the frame span (residual {res:.3e})")
    first, second = coef[0::2], coef[1::2]
    wedge = np.einsum("pi,pj->ij", first, second)
    return r.c * (wedge - wedge.T)


def vertex_shift(spec, r):
    """s0 with sigma_rho(r) = s0 omega_rho^-1, and the relative residual of that fit."""
    p = spec.origin()
    frame = tangent_frame(spec, p)
    b0 = sigma_bivector(r, frame)
    w0 = kks_form(spec, p, frame).inverse()
    s0 = np.sum(b0 * w0) / np.sum(w0 * w0)
    return float(s0), float(np.linalg.norm(b0 - s0 * w0) / max(1.0, np.linalg.norm(b0)))


def bruhat_poisson(spec, r, p, frame, omega=None, shift=None):
    """Bruhat-Poisson bivector sigma(r) + s0 omega^-1, based at the lowest vertex of
    the orbit (the origin of spec.opposite_chart), where it vanishes.
    """
    if omega is None:
        omega = kks_form(spec, p, frame)
    if shift is None:
        shift, _ = vertex_shift(spec, r)
    comps = sigma_bivector(r, frame) + shift * as_components(omega.inverse())
    return BivectorAtPoint(0.5 * (comps - comps.T))


def pencil_bivector(pi, omega, t):
    """pi_t = pi + t omega^-1"""
    omega = as_components(omega)
    if np.linalg.cond(omega) > FORM_COND_MAX:
        raise DegenerateForm("omega is not invertible")
    return BivectorAtPoint(as_components(pi) + t * np.linalg.inv(omega))


def nijenhuis_operator(pi, omega):
    """N = pi o omega, N^i_j = pi^{il} omega_{lj}"""
    return EndomorphismAtPoint(as_components(pi) @ as_components(omega))


def moment_minor(x, s):
    mat = getattr(x, "matrix", x)
    if not 1 <= s <= mat.shape[0]:
        raise ValueError(f"Invalid minor size {s}")
    return mat[:s, :s]


def default_kappa(spec):
    """kappa with kappa * max eig(-i rho) = GT_MAX."""
    return GT_MAX / np.max(np.abs(np.diag(make_rho(spec).matrix)))


def gt_levels(x, spec, kappa):
    """Ascending eigenvalues of kappa (-i) minor_s for s = 1..n."""
    levels = []
    for s in range(1, spec.n + 1):
        herm = -1j * moment_minor(x, s)
        levels.append(kappa * np.linalg.eigvalsh(0.5 * (herm + herm.conj().T)))
    return levels


@dataclass(frozen=True)
class GTLayout:
    """Positions (s, j) of the non-constant GT slots, 1-based level s, 0-based j."""
    slots: tuple


def gt_layout(spec, samples, kappa):
    """Slots pinned at 0 or kappa * scale on every sample are constant, the rest are GT variables."""
    values = [gt_levels(embed(spec, p).matrix, spec, kappa) for p in samples]
    slots = []
    for s in range(1, spec.n + 1):
        column = np.array([v[s - 1] for v in values])
        for j in range(s):
            pinned = (np.all(np.abs(column[:, j]) < CONSTANT_TOL)
                      or np.all(np.abs(column[:, j] - kappa * spec.scale) < CONSTANT_TOL))
            if not pinned:
                slots.append((s, j))
    if len(slots) != spec.m:
        raise CountMismatch(f"Found {len(slots)} non-constant GT slots, expected {spec.m}")
    return GTLayout(tuple(slots))


@lru_cache(maxsize=32)
def default_layout(spec, kappa):
    # imported here, utils.data depends on models.orbit
    from utils.data import sample_chart_points
    rng = np.random.default_rng(0)
    return gt_layout(spec, sample_chart_points(spec, 12, rng), kappa)


@dataclass(frozen=True, eq=False)
class GTSpectrum:
    """Gelfand-Tsetlin data at a point.
    - levels: all eigenvalues of each scaled minor, ascending
    - values: non-constant entries per level (triangular array)
    - flags: smoothness flag per non-constant entry
    """
    levels: tuple
    values: tuple
    flags: tuple
    top: float = GT_MAX

    @property
    def flat(self):
        return np.array([v for level in self.values for v in level])

    @property
    def smooth(self):
        return all(f for level in self.flags for f in level)

    @property
    def in_m0(self):
        """All GT variables smooth and pairwise distinct."""
        flat = np.sort(self.flat)
        return self.smooth and (len(flat) < 2 or np.min(np.diff(flat)) > SMOOTH_GAP)

    def interlacing_residual(self):
        worst = 0.0
        for level in self.levels:
            worst = max(worst, -level.min(), level.max() - self.top)
        for lower, upper in zip(self.levels[:-1], self.levels[1:]):
            worst = max(worst, np.max(upper[:-1] - lower), np.max(lower - upper[1:]))
        return float(max(worst, 0.0))


def gt_spectrum(x, spec, kappa, layout=None):
    """GT variables of the point x (EmbeddedPoint or matrix)."""
    if not kappa > 0:
        raise ValueError(f"Invalid kappa {kappa}")
    if layout is None:
        layout = default_layout(spec, kappa)
    if len(layout.slots) != spec.m:
        raise CountMismatch(f"Layout has {len(layout.slots)} slots, expected {spec.m}")
    levels = gt_levels(getattr(x, "matrix", x), spec, kappa)
    top = kappa * spec.scale
    values, flags = [[] for _ in levels], [[] for _ in levels]
    for s, j in layout.slots:
        level = levels[s - 1]
        value = level[j]
        others = np.concatenate([np.delete(level, j), [0.0, top]])
        values[s - 1].append(float(value))
        flags[s - 1].append(bool(np.min(np.abs(others - value)) > SMOOTH_GAP))
    return GTSpectrum(tuple(levels), tuple(tuple(v) for v in values), tuple(tuple(f) for f in flags), top)


@dataclass(frozen=True)
class MatchReport:
    max_distance: float
    pairs: tuple
    unmatched_n: tuple = ()
    unmatched_gt: tuple = ()

    @property
    def complete(self):
        return not self.unmatched_n and not self.unmatched_gt


def expand_spectrum(nspec):
    """Each distinct eigenvalue once per pair of its multiplicity."""
    return np.array([value for value, mult in nspec for _ in range(mult // 2)])


def match_spectra(nspec, gt, tol=SPECTRUM_TOL):
    """Pair N eigenvalues and GT values in sorted order (optimal in one dimension)."""
    n_values = np.sort(expand_spectrum(nspec))
    gt_values = np.sort(gt.flat if isinstance(gt, GTSpectrum) else np.asarray(gt, dtype=float))
    size = min(len(n_values), len(gt_values))
    dist = np.abs(n_values[:size] - gt_values[:size])
    pairs = tuple((float(a), float(b)) for a, b in zip(n_values[:size], gt_values[:size]))
    report = MatchReport(float(dist.max(initial=0.0)), pairs,
                         tuple(float(v) for v in n_values[size:]),
                         tuple(float(v) for v in gt_values[size:]))
    if not report.complete:
        report = replace(report, max_distance=np.inf)
    return report


@dataclass(frozen=True, eq=False)
class LocalTensors:
    x: np.ndarray
    omega: np.ndarray
    omega_inv: np.ndarray
    pi: np.ndarray
    N: np.ndarray


class HermitianModel(object):
    """PN structure (omega^-1, N = pi o omega) on the orbit, with its GT variables.
    Params:
    - spec (OrbitSpec): orbit
    - r (RMatrixSpec): r-matrix including the constant c, default standard with c = 1
    - kappa (float): GT constant, default from rho's spectrum
    - layout (GTLayout): non-constant GT slots, default found empirically
    """
    def __init__(self, spec, r=None, kappa=None, layout=None):
        self.spec = spec
        self.r = r if r is not None else standard_r_matrix(spec.n)
        self.kappa = kappa if kappa is not None else default_kappa(spec)
        self.layout = layout if layout is not None else default_layout(spec, self.kappa)
        self.shift, self.shift_residual = vertex_shift(spec, self.r)
        self._local = lru_cache(maxsize=16384)(self._compute_local)
        self._gt = lru_cache(maxsize=16384)(self._compute_gt)
        self.omega_field = TensorField(lambda p: self.local(p).omega, "two-form", name="omega")
        self.poisson_field = TensorField(lambda p: self.local(p).omega_inv, "bivector", name="omega^-1")
        self.bruhat_field = TensorField(lambda p: self.local(p).pi, "bivector", name="pi")
        self.nijenhuis_field = TensorField(lambda p: self.local(p).N, "endomorphism", name="N")
        self._pencils = {}

    @property
    def c(self):
        return self.r.c

    def __repr__(self):
        return f"HermitianModel(n={self.spec.n}, k={self.spec.k}, c={self.c:.6g}, kappa={self.kappa:.6g})"

    def with_constants(self, c, kappa):
        return HermitianModel(self.spec, self.r.scaled(c), kappa, self.layout if kappa == self.kappa else None)

    def _compute_local(self, p):
        frame = tangent_frame(self.spec, p)
        omega = kks_form(self.spec, p, frame)
        pi = bruhat_poisson(self.spec, self.r, p, frame, omega=omega, shift=self.shift)
        omega_inv = omega.inverse()
        return LocalTensors(frame.point.matrix, omega.components, 0.5 * (omega_inv - omega_inv.T),
                            pi.components, nijenhuis_operator(pi, omega).components)

    def local(self, p):
        return self._local(p)

    def pencil_field(self, t):
        """Bivector field pi_t."""
        if t == 0:
            return self.bruhat_field
        if ("pi", t) not in self._pencils:
            self._pencils[("pi", t)] = TensorField(
                lambda p: pencil_bivector(self.local(p).pi, self.local(p).omega, t).components,
                "bivector", name=f"pi_{t:g}")
        return self._pencils[("pi", t)]

    def nijenhuis_shifted(self, t):
        """Endomorphism field N_t = N + t."""
        if ("N", t) not in self._pencils:
            self._pencils[("N", t)] = shifted_field(self.nijenhuis_field, t)
        return self._pencils[("N", t)]

    def _compute_gt(self, p):
        return gt_spectrum(embed(self.spec, p), self.spec, self.kappa, self.layout)

    def gt(self, p):
        return self._gt(p)

    def gt_values(self, p):
        return self.gt(p).flat

    def gt_variable(self, i):
        """The i-th GT variable as a scalar field on the chart."""
        return lambda q: float(self.gt(q).flat[i])

    def spectrum(self, p, t=0.0, tol=SPECTRUM_TOL):
        return nijenhuis_spectrum(self.local(p).N + t * np.eye(self.spec.dim), tol)

    def match(self, p, tol=SPECTRUM_TOL):
        return match_spectra(self.spectrum(p, tol=tol), self.gt(p), tol)


@dataclass(frozen=True)
class Calibration:
    c: float
    kappa: float
    layout: GTLayout = field(repr=False)
    objective: float = 0.0

    def to_json(self):
        return {"c": self.c, "kappa": self.kappa, "objective": self.objective,
                "layout": [list(slot) for slot in self.layout.slots]}


def _golden_section(f, lo, hi, iters=100):
    ratio = (np.sqrt(5) - 1) / 2
    a, b = lo, hi
    x1, x2 = b - ratio * (b - a), a + ratio * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - ratio * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + ratio * (b - a)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def calibrate(spec, samples, r=None, tol=SPECTRUM_TOL, kappa=None):
    """Fix kappa from rho's spectrum, then search c so the N spectra match the GT values.
    Returns a Calibration; raises CalibrationFailure if the best c misses tol.
    """
    if len(samples) < MIN_CALIBRATION_SAMPLES:
        raise ValueError(f"calibrate needs at least {MIN_CALIBRATION_SAMPLES} samples, got {len(samples)}")
    kappa = kappa if kappa is not None else default_kappa(spec)
    layout = gt_layout(spec, samples, kappa)
    unit = HermitianModel(spec, (r or standard_r_matrix(spec.n)).scaled(1.0), kappa, layout)
    mus, gts = [], []
    for p in samples:
        mus.append(np.sort(expand_spectrum(unit.spectrum(p))))
        gts.append(np.sort(unit.gt_values(p)))
    if any(len(mu) != len(g) for mu, g in zip(mus, gts)):
        raise CalibrationFailure("N spectrum and GT variables differ in count")

    def objective(c):
        return max(float(np.max(np.abs(c * mu - g))) for mu, g in zip(mus, gts))

    scores = np.array([objective(c) for c in C_GRID])
    i = int(np.argmin(scores))
    lo, hi = C_GRID[max(i - 1, 0)], C_GRID[min(i + 1, len(C_GRID) - 1)]
    c, score = _golden_section(objective, lo, hi)
    result = Calibration(float(c), float(kappa), layout, float(score))
    if score > tol:
        raise CalibrationFailure(f"Best c={c:.6g} leaves spectrum distance {score:.3e}", best=result)
    return result


def degeneracy_witness(model, t):
    """Point on the ray Z = alpha E_{last,0} where a GT variable equals -t, so det N_t = 0.
    Along the ray the (0, 0) entry of kappa (-i) x is kappa * scale / (1 + alpha^2).
    """
    top = model.kappa * model.spec.scale
    if not -top < t < 0:
        raise ValueError(f"Pencil parameter {t} has no degeneracy locus in (-{top:g}, 0)")
    alpha = np.sqrt(top / -t - 1.0)
    coords = np.zeros(model.spec.dim)
    coords[(model.spec.n - model.spec.k - 1) * model.spec.k] = alpha
    return ChartPoint.from_array(coords)


def test_calibration(args):
    """Module Test
    """
    from tqdm.autonotebook import tqdm
    from models.orbit import OrbitSpec
    from utils.data import sample_chart_points

    spec = OrbitSpec(args.n, 1 if args.manifold == "cpn" else (args.k or 1), args.scale)
    rng = np.random.default_rng(args.seed)
    samples = sample_chart_points(spec, max(MIN_CALIBRATION_SAMPLES, min(args.samples, 20)), rng)
    result = calibrate(spec, samples)
    print(result)
    print(f"Expected c = {1 / (2 * spec.scale):.6g}, kappa = {2 / spec.scale:.6g}")
    model = HermitianModel(spec, standard_r_matrix(spec.n, result.c), result.kappa, result.layout)
    worst = 0.0
    for p in tqdm(sample_chart_points(spec, 10, rng)):
        worst = max(worst, model.match(p).max_distance)
    print(f"Holdout spectrum distance {worst:.3e}")
