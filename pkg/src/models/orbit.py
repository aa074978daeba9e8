"""orbit.py
The adjoint U(n)-orbit through rho = scale * diag(i 1_k, 0_{n-k}) realised as Gr(k,n):
affine charts, the embedding into skew-Hermitian matrices, tangent frames and
the generator solve [X, x] = v.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from utils.errors import NumericalDegeneracy, RankDeficiency, NotTangent
from models.components import fd_directional

QR_COND_MAX = 1e8       # conditioning limit for the column-span representative
RANK_TOL = 1e-9         # relative singular value cut-off for frame rank
TANGENT_TOL = 1e-8      # relative residual allowed in solve_generator
LSTSQ_RCOND = 1e-10


@dataclass(frozen=True)
class OrbitSpec:
    """Orbit through rho.
    Params:
    - n (int): matrix size
    - k (int): rank of rho, 0 < k < n
    - scale (float): multiplier on rho
    """
    n: int
    k: int
    scale: float = 1.0

    def __post_init__(self):
        if self.n < 2 or not 0 < self.k < self.n:
            raise ValueError(f"Invalid orbit (n={self.n}, k={self.k}), need 0 < k < n")
        if not self.scale > 0:
            raise ValueError(f"Invalid scale {self.scale}")

    @property
    def m(self):
        return self.k * (self.n - self.k)

    @property
    def dim(self):
        return 2 * self.m

    @property
    def standard_chart(self):
        return tuple(range(self.k))

    @property
    def opposite_chart(self):
        return tuple(range(self.n - self.k, self.n))

    def origin(self, chart_id=()):
        return ChartPoint(tuple([0.0] * self.dim), tuple(chart_id))


@dataclass(frozen=True)
class ChartPoint:
    """Real coordinates (Re Z, Im Z) of the (n-k) x k block below the pivot rows.
    An empty chart_id means the standard chart.
    """
    coords: tuple
    chart_id: tuple = ()

    def __post_init__(self):
        if not all(np.isfinite(self.coords)):
            raise ValueError(f"Non-finite chart coordinates {self.coords}")

    @classmethod
    def from_array(cls, coords, chart_id=()):
        return cls(tuple(float(c) for c in np.asarray(coords, dtype=float).ravel()), tuple(chart_id))

    @property
    def array(self):
        return np.array(self.coords, dtype=float)

    def shifted(self, j, delta):
        coords = list(self.coords)
        coords[j] += delta
        return ChartPoint(tuple(coords), self.chart_id)


@dataclass(frozen=True, eq=False)
class EmbeddedPoint:
    matrix: np.ndarray

    @property
    def n(self):
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class TangentFrame:
    """Images of the chart coordinate directions under d(embed)."""
    basis: tuple
    point: EmbeddedPoint

    @property
    def real_matrix(self):
        """Frame as columns of real vectors, shape (2 n^2, dim)."""
        return np.stack([realify(b) for b in self.basis], axis=1)

    def coefficients(self, vectors):
        """Least-squares frame coefficients of tangent matrices, shape (len(vectors), dim)
        and the relative residual of the worst one.
        """
        a = self.real_matrix
        b = np.stack([realify(v) for v in vectors], axis=1)
        coef, _, _, _ = np.linalg.lstsq(a, b, rcond=LSTSQ_RCOND)
        res = np.linalg.norm(a @ coef - b, axis=0) / np.maximum(1.0, np.linalg.norm(b, axis=0))
        return coef.T, float(res.max(initial=0.0))


def realify(a):
    a = np.asarray(a)
    return np.concatenate([a.real.ravel(), a.imag.ravel()])


def make_rho(spec):
    diag = np.concatenate([np.full(spec.k, 1j * spec.scale), np.zeros(spec.n - spec.k)])
    return EmbeddedPoint(np.diag(diag))


def _chart_rows(spec, p):
    pivots = tuple(p.chart_id) or spec.standard_chart
    if len(pivots) != spec.k or len(set(pivots)) != spec.k or not all(0 <= i < spec.n for i in pivots):
        raise ValueError(f"Invalid chart {p.chart_id} for Gr({spec.k},{spec.n})")
    rest = [i for i in range(spec.n) if i not in pivots]
    return list(pivots), rest


def _unpack(spec, coords):
    coords = np.asarray(coords, dtype=float)
    if coords.shape != (spec.dim,):
        raise ValueError(f"Chart point has {coords.size} coordinates, expected {spec.dim}")
    return (coords[:spec.m] + 1j * coords[spec.m:]).reshape(spec.n - spec.k, spec.k)


def chart_matrix(spec, p):
    """Column-span representative Y (n x k): identity on the pivot rows, Z below."""
    pivots, rest = _chart_rows(spec, p)
    y = np.zeros((spec.n, spec.k), dtype=complex)
    y[pivots, :] = np.eye(spec.k)
    y[rest, :] = _unpack(spec, p.coords)
    return y


def embed(spec, p):
    """x = g(Z) rho g(Z)^H, i.e. i * scale times the orthogonal projector onto span Y."""
    y = chart_matrix(spec, p)
    q, r = np.linalg.qr(y)
    diag = np.abs(np.diag(r))
    if diag.min() == 0 or diag.max() / diag.min() > QR_COND_MAX:
        raise NumericalDegeneracy(f"Orthonormalisation ill-conditioned at {p.coords}")
    x = 1j * spec.scale * (q @ q.conj().T)
    return EmbeddedPoint(0.5 * (x - x.conj().T))


def _analytic_basis(spec, p):
    # dP = (1 - P) dY G Y^H + Y G dY^H (1 - P), G = (Y^H Y)^-1
    y = chart_matrix(spec, p)
    g = np.linalg.inv(y.conj().T @ y)
    proj = y @ g @ y.conj().T
    comp = np.eye(spec.n) - proj
    _, rest = _chart_rows(spec, p)
    basis = []
    for unit in (1.0, 1j):
        for j in range(spec.m):
            dz = np.zeros(spec.m, dtype=complex)
            dz[j] = unit
            dy = np.zeros((spec.n, spec.k), dtype=complex)
            dy[rest, :] = dz.reshape(spec.n - spec.k, spec.k)
            left = comp @ dy @ g @ y.conj().T
            basis.append(1j * spec.scale * (left + left.conj().T))
    return basis


def tangent_frame(spec, p, fd=None):
    """Tangent frame at p. With fd=None the exact differential of the embedding is
    used; otherwise each direction is a finite difference of embed.
    """
    x = embed(spec, p)
    if fd is None:
        basis = _analytic_basis(spec, p)
    else:
        basis = [fd_directional(lambda q: embed(spec, q).matrix, p, j, fd) for j in range(spec.dim)]
    frame = TangentFrame(tuple(basis), x)
    sv = np.linalg.svd(frame.real_matrix, compute_uv=False)
    rank = int(np.sum(sv > RANK_TOL * sv[0]))
    if rank < spec.dim:
        raise RankDeficiency(f"Frame rank {rank} < {spec.dim} at {p.coords}")
    return frame


@lru_cache(maxsize=16)
def lie_algebra_basis(n):
    """Orthonormal (real Frobenius) basis of u(n), shape (n^2, n, n)."""
    basis = []
    for a in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[a, a] = 1j
        basis.append(e)
    for a in range(n):
        for b in range(a + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[a, b], e[b, a] = 1.0, -1.0
            basis.append(e / np.sqrt(2))
            e = np.zeros((n, n), dtype=complex)
            e[a, b] = e[b, a] = 1j
            basis.append(e / np.sqrt(2))
    return np.stack(basis)


def solve_generators(x, vs):
    """Minimum-norm X_a with [X_a, x] = v_a for every v_a in vs, shape (len(vs), n, n)."""
    mat = x.matrix if isinstance(x, EmbeddedPoint) else np.asarray(x)
    basis = lie_algebra_basis(mat.shape[0])
    ad = np.stack([realify(e @ mat - mat @ e) for e in basis], axis=1)
    rhs = np.stack([realify(v) for v in vs], axis=1)
    coef, _, _, _ = np.linalg.lstsq(ad, rhs, rcond=LSTSQ_RCOND)
    res = np.linalg.norm(ad @ coef - rhs, axis=0) / np.maximum(1.0, np.linalg.norm(rhs, axis=0))
    if res.size and res.max() > TANGENT_TOL:
        raise NotTangent(f"Generator residual {res.max():.3e} exceeds {TANGENT_TOL}")
    return np.einsum("ba,bij->aij", coef, basis)


def solve_generator(x, v):
    return solve_generators(x, [v])[0]


def orbit_spectrum(x):
    """Ascending eigenvalues of -i x (real for skew-Hermitian x)."""
    mat = x.matrix if isinstance(x, EmbeddedPoint) else np.asarray(x)
    herm = -1j * mat
    return np.linalg.eigvalsh(0.5 * (herm + herm.conj().T))
