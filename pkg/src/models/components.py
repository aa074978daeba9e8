"""General components shared by the tensor calculus: the finite-difference
engine, tensor values at a point and tensor fields on a chart.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from utils.errors import KindMismatch

SCHEMES = ("central-2", "central-4")
KINDS = ("bivector", "two-form", "endomorphism", "vector", "covector", "scalar")

# stencil offsets and weights, derivative = sum(w * f(p + o*h)) / h
_STENCILS = {
    "central-2": ((1.0, 0.5), (-1.0, -0.5)),
    "central-4": ((2.0, -1.0 / 12), (1.0, 8.0 / 12), (-1.0, -8.0 / 12), (-2.0, 1.0 / 12)),
}


@dataclass(frozen=True)
class FDConfig:
    """Finite-difference settings.
    Params:
    - step (float): step for first derivatives
    - scheme (str): central-2 or central-4
    - nested_step (float): step used by nested() for second-order quantities
    """
    step: float = 1e-5
    scheme: str = "central-2"
    nested_step: float = 1e-3

    def __post_init__(self):
        if not self.step > 0 or not self.nested_step > 0:
            raise ValueError(f"Invalid fd step {self.step}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"Invalid fd scheme {self.scheme}, must be one of {SCHEMES}")

    def nested(self):
        # derivatives of FD derivatives: roundoff of the inner stencil is divided by the outer step
        return FDConfig(step=self.nested_step, scheme="central-4", nested_step=self.nested_step)


def fd_directional(f, p, j, fd):
    """Central-difference approximation of the derivative of f along chart coordinate j.
    f may return a real or complex scalar or array; the result keeps its shape and dtype.
    """
    acc = None
    for offset, weight in _STENCILS[fd.scheme]:
        term = weight * np.asarray(f(p.shifted(j, offset * fd.step)))
        acc = term if acc is None else acc + term
    return acc / fd.step


def fd_gradient(f, p, fd):
    """Gradient of a scalar field, shape (dim,)."""
    return np.array([fd_directional(f, p, j, fd) for j in range(len(p.coords))])


def fd_jacobian(f, p, fd):
    """Derivatives of an array-valued field. Result[l, ...] = d f[...] / d coords_l."""
    return np.stack([fd_directional(f, p, j, fd) for j in range(len(p.coords))])


def as_components(value):
    return np.asarray(getattr(value, "components", value), dtype=float)


@dataclass(frozen=True, eq=False)
class BivectorAtPoint:
    """Contravariant antisymmetric 2-tensor in the chart frame."""
    components: np.ndarray

    def residual(self):
        c = self.components
        return np.linalg.norm(c + c.T) / max(1.0, np.linalg.norm(c))


@dataclass(frozen=True, eq=False)
class TwoFormAtPoint:
    components: np.ndarray

    def inverse(self):
        return np.linalg.inv(self.components)


@dataclass(frozen=True, eq=False)
class EndomorphismAtPoint:
    """Mixed tensor N^i_j; components[i, j]."""
    components: np.ndarray


_AT_POINT = {
    "bivector": BivectorAtPoint,
    "two-form": TwoFormAtPoint,
    "endomorphism": EndomorphismAtPoint,
}


class TensorField(object):
    """A tensor field given by an evaluator ChartPoint -> components.
    Values and FD jacobians are memoised per point, so repeated stencils
    across checks do not re-evaluate the model.
    Params:
    - evaluator (callable): ChartPoint -> np.ndarray
    - kind (str): one of KINDS
    - name (str): label used in reports
    """
    def __init__(self, evaluator, kind, name="", cache_size=8192):
        if kind not in KINDS:
            raise ValueError(f"Invalid tensor kind {kind}")
        self.kind = kind
        self.name = name or kind
        self._value = lru_cache(maxsize=cache_size)(evaluator)
        self._jacobian = lru_cache(maxsize=cache_size)(lambda p, fd: fd_jacobian(self._value, p, fd))

    def __call__(self, p):
        return self._value(p)

    def __repr__(self):
        return f"TensorField({self.name!r}, kind={self.kind!r})"

    def at(self, p):
        """Value at p wrapped in its AtPoint type."""
        if self.kind not in _AT_POINT:
            return self(p)
        return _AT_POINT[self.kind](self(p))

    def jacobian(self, p, fd):
        return self._jacobian(p, fd)

    def expect(self, kind):
        if self.kind != kind:
            raise KindMismatch(f"{self.name} is a {self.kind} field, expected {kind}")
        return self


def constant_field(value, kind, name=""):
    value = np.asarray(value, dtype=float)
    return TensorField(lambda p: value, kind, name=name or f"constant {kind}")


def identity_field(dim, scale=1.0):
    return constant_field(scale * np.eye(dim), "endomorphism", name="identity")
