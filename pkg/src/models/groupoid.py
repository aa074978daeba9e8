"""groupoid.py
The groupoid L(N_t) over the Gelfand-Tsetlin polytope: elements (lambda, h), the
structure maps of the exponential R^m action, subgroupoid membership on CP^n and
eigenvalue cocycles on the pair groupoid of model points.
"""

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from utils.errors import NotComposable, TargetOutsidePolytope, SingularLog

GT_MAX = 2.0
COMPOSE_TOL = 1e-9
MEMBER_TOL = 1e-9
LOG_TOL = 1e-12


@lru_cache(maxsize=64)
def gt_pattern_layout(n, k):
    """Free slots (s, j) of GT patterns with top row (0^{n-k}, 2^k).
    Slot j (0-based, ascending) of level s is pinned to 0 when j < s - k and to 2 when
    j >= n - k; otherwise its interlacing bounds differ.
    """
    return tuple((s, j) for s in range(1, n) for j in range(s) if s - k <= j < n - k)


class GTPolytope(object):
    """GT polytope of Gr(k,n); Delta_{n-1} for k = 1.
    Params:
    - n (int): matrix size
    - k (int): rank
    - top (float): upper bound of the GT variables
    """
    def __init__(self, n, k=1, top=GT_MAX):
        if not 0 < k < n:
            raise ValueError(f"Invalid polytope (n={n}, k={k})")
        self.n, self.k, self.top = n, k, top
        self.slots = gt_pattern_layout(n, k)

    @property
    def m(self):
        return len(self.slots)

    def __repr__(self):
        return f"GTPolytope(n={self.n}, k={self.k})"

    def __eq__(self, other):
        return isinstance(other, GTPolytope) and (self.n, self.k, self.top) == (other.n, other.k, other.top)

    def __hash__(self):
        return hash((self.n, self.k, self.top))

    def full_pattern(self, lam):
        """Levels 1..n of the GT pattern with the free slots filled from lam."""
        lam = np.asarray(lam, dtype=float)
        if lam.shape != (self.m,):
            raise ValueError(f"Expected {self.m} GT coordinates, got {lam.shape}")
        levels = [np.array([0.0 if j < s - self.k else self.top for j in range(s)]) for s in range(1, self.n + 1)]
        for value, (s, j) in zip(lam, self.slots):
            levels[s - 1][j] = value
        return levels

    def violation(self, lam):
        levels = self.full_pattern(lam)
        worst = 0.0
        for lower, upper in zip(levels[:-1], levels[1:]):
            worst = max(worst, np.max(upper[:-1] - lower), np.max(lower - upper[1:]))
        return float(max(worst, 0.0))

    def contains(self, lam, tol=MEMBER_TOL):
        return bool(np.all(np.isfinite(lam))) and self.violation(lam) <= tol

    def vertex(self, high=True):
        """Image of rho (all GT variables at top) or of the lowest vertex (all 0)."""
        return np.full(self.m, self.top if high else 0.0)

    def sample(self, rng, low=0.0, high=None, max_tries=100000):
        """Uniform point of the polytope intersected with the box [low, high]^m."""
        high = self.top if high is None else high
        if self.k == 1:
            return np.sort(rng.uniform(low, high, self.m))
        for _ in range(max_tries):
            lam = np.sort(rng.uniform(low, high, self.m))
            if self.contains(lam):
                return lam
            lam = rng.uniform(low, high, self.m)
            if self.contains(lam):
                return lam
        raise ValueError(f"No point of {self} found in [{low}, {high}]")


def simplex(m):
    """Delta_m = {0 <= l_1 <= ... <= l_m <= 2}, the polytope of CP^m."""
    return GTPolytope(m + 1, 1)


@dataclass(frozen=True)
class PolytopePoint:
    lam: tuple
    polytope: GTPolytope

    def __post_init__(self):
        if not self.polytope.contains(self.lam):
            raise TargetOutsidePolytope(f"{list(self.lam)} violates the GT inequalities of {self.polytope}")

    @property
    def array(self):
        return np.array(self.lam, dtype=float)


class MembershipCase(enum.Enum):
    PAIR = "pair"
    INTERIOR = "interior"
    BOUNDARY = "boundary"

    @classmethod
    def from_t(cls, t, top=GT_MAX, tol=MEMBER_TOL):
        if abs(t) <= tol or abs(t + top) <= tol:
            return cls.BOUNDARY
        if -top < t < 0:
            return cls.INTERIOR
        return cls.PAIR


@dataclass(frozen=True)
class GroupoidElement:
    """Arrow (lambda, h) of L(N_t). With polytope None it lives in the action groupoid over R^m."""
    lam: tuple
    h: tuple
    t: float
    polytope: GTPolytope = None

    def __post_init__(self):
        if len(self.lam) != len(self.h):
            raise ValueError(f"lambda has {len(self.lam)} entries but h has {len(self.h)}")
        if self.polytope is not None and not self.polytope.contains(self.lam):
            raise TargetOutsidePolytope(f"Source {list(self.lam)} outside {self.polytope}")

    @classmethod
    def make(cls, lam, h, t, polytope=None):
        return cls(tuple(float(v) for v in lam), tuple(float(v) for v in h), float(t), polytope)

    def to_json(self):
        return {"lambda": list(self.lam), "h": list(self.h), "t": self.t}


def act(h, lam, t):
    """R^m action h(lambda) = -t + e^h (lambda + t), written as lambda + (e^h - 1)(lambda + t)
    so that h = 0 returns lambda unchanged.
    """
    lam = np.asarray(lam, dtype=float)
    return lam + np.expm1(np.asarray(h, dtype=float)) * (lam + t)


def source(g):
    return np.array(g.lam, dtype=float)


def target(g):
    lam = act(g.h, g.lam, g.t)
    if g.polytope is not None and not g.polytope.contains(lam):
        raise TargetOutsidePolytope(f"Target {lam.tolist()} outside {g.polytope}")
    return lam


def identity(lam, t, polytope=None):
    return GroupoidElement.make(lam, np.zeros(len(lam)), t, polytope)


def compose(g1, g2, tol=COMPOSE_TOL):
    """(lambda, h1) (target, h2) = (lambda, h1 + h2)."""
    if g1.t != g2.t:
        raise NotComposable(f"Pencil parameters differ ({g1.t} vs {g2.t})")
    gap = float(np.max(np.abs(target(g1) - source(g2)), initial=0.0))
    if gap >= tol:
        raise NotComposable(f"target(g1) and source(g2) differ by {gap:.3e}")
    result = GroupoidElement(g1.lam, tuple(np.add(g1.h, g2.h).tolist()), g1.t, g1.polytope)
    target(result)
    return result


def inverse(g):
    return GroupoidElement.make(target(g), -np.asarray(g.h), g.t, g.polytope)


def membership_cpn(g, tol=MEMBER_TOL):
    """Membership in the wide subgroupoid describing L(N_t) on CP^n.
    - pair: any arrow with source and target in the simplex
    - interior: lambda_i = lambda_{i+1} = -t forces h_i = h_{i+1}
    - boundary: lambda_i = -t forces h_i = 0
    """
    polytope = g.polytope if g.polytope is not None else simplex(len(g.lam))
    if polytope.k != 1:
        raise ValueError("membership_cpn needs the simplex of CP^n (k = 1)")
    lam, h = source(g), np.asarray(g.h, dtype=float)
    if not polytope.contains(lam, tol) or not polytope.contains(act(h, lam, g.t), tol):
        return False
    case = MembershipCase.from_t(g.t, polytope.top, tol)
    fixed = np.abs(lam + g.t) <= tol
    if case is MembershipCase.INTERIOR:
        pinned = fixed[:-1] & fixed[1:]
        return bool(np.all(np.abs(h[:-1] - h[1:])[pinned] <= tol))
    if case is MembershipCase.BOUNDARY:
        return bool(np.all(np.abs(h[fixed]) <= tol))
    return True


def closure_check(g1, g2, tol=MEMBER_TOL):
    return membership_cpn(compose(g1, g2), tol)


def lenart_cocycle(f, x, y):
    """Coboundary of f on the pair groupoid, (x, y) -> f(y) - f(x)."""
    return f(y) - f(x)


def _log_shift(value, t):
    if abs(value + t) <= LOG_TOL:
        raise SingularLog(f"lambda + t vanishes (lambda={value}, t={t})")
    return np.log(abs(value + t))


def eigenvalue_cocycle(x, y, i, t, model):
    """h(x, y) = log(lambda_i(y) + t) - log(lambda_i(x) + t), so that
    -t + e^h (lambda_i(x) + t) = lambda_i(y).
    """
    for q in (x, y):
        if not model.gt(q).smooth:
            raise SingularLog(f"GT variables are not smooth at {q.coords}")
    lx, ly = model.gt_values(x)[i], model.gt_values(y)[i]
    if (lx + t) * (ly + t) < 0:
        raise SingularLog(f"lambda_{i} + t changes sign between the points (t={t})")
    return lenart_cocycle(lambda q: _log_shift(model.gt_values(q)[i], t), x, y)


def pair_to_element(x, y, t, model, polytope=None):
    """Arrow of L(N_t) with source GT(x) carrying x to y."""
    lam = model.gt_values(x)
    h = [eigenvalue_cocycle(x, y, i, t, model) for i in range(len(lam))]
    return GroupoidElement.make(lam, h, t, polytope)
