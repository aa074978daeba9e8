"""verify.py
The verification suite: run configuration, the check registry, run_suite, and the
spectrum and groupoid commands that share its model setup.
"""

import time
import zlib
from dataclasses import dataclass, field, replace
from functools import cached_property
from itertools import combinations, combinations_with_replacement

import numpy as np
import pandas as pd

from tqdm.autonotebook import tqdm

from utils.errors import ConfigError, CalibrationFailure, NumericalGuard, OddMultiplicity, ComplexSpectrum, SingularNt
from utils.utils import (VERSION, DEFAULT_T, DEFAULT_SAMPLES, DEFAULT_NESTED_POINTS, DEFAULT_TRIALS,
                         DEFAULT_TOLERANCES, ResidualMeter, relative, log_result)
from utils.data import sample_chart_points
from models.components import SCHEMES, FDConfig, TensorField, fd_directional, fd_gradient
from models.orbit import OrbitSpec, ChartPoint, make_rho, embed, tangent_frame, solve_generator, orbit_spectrum
from models import pn
from models import hermitian as hm
from models import groupoid as gp

MANIFOLDS = ("cpn", "grass")
CALIBRATION_SAMPLES = 20
HOLDOUT_SAMPLES = 20
HIERARCHY_DEPTH = 3         # P_1, P_2, P_3
LENART_MAX_K = 4
INVOLUTION_MAX_K = 3
LOGDET_MARGIN = 0.1         # skip points with some |lambda_i + t| below this
VANDERMONDE_MIN = 1e-8
PENCIL_REGULAR_T = (-3.0, 0.5, 1.0)
PENCIL_SINGULAR_T = (-1.0,)
PENCIL_MARGIN = 0.1
COCYCLE_T = 1.0
COCYCLE_TRIPLES = 100
MEMBERSHIP_T = (1.0, -3.0, -1.0, -0.5, -1.5, -2.0, 0.0)
NEGATIVE_POINTS = 5


@dataclass(frozen=True)
class RunConfig:
    """Everything a run depends on; two runs with equal configs give equal results."""
    manifold: str = "cpn"
    n: int = 2
    k: int = 1
    scale: float = 1.0
    t_values: tuple = DEFAULT_T
    samples: int = DEFAULT_SAMPLES
    seed: int = 0
    fd_step: float = 1e-5
    fd_scheme: str = "central-2"
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    checks: tuple = ()
    pin_c: float = None
    pin_kappa: float = None
    nested_points: int = DEFAULT_NESTED_POINTS
    trials: int = DEFAULT_TRIALS

    def __post_init__(self):
        if self.manifold not in MANIFOLDS:
            raise ConfigError(f"Unknown manifold {self.manifold}, must be one of {MANIFOLDS}")
        if self.manifold == "cpn" and self.k != 1:
            raise ConfigError(f"cpn needs k = 1, got k = {self.k}")
        if self.n < 2 or not 0 < self.k < self.n:
            raise ConfigError(f"Invalid (n, k) = ({self.n}, {self.k}), need 0 < k < n")
        if not self.scale > 0:
            raise ConfigError(f"Invalid scale {self.scale}")
        if self.samples < 1 or self.nested_points < 0 or self.trials < 1:
            raise ConfigError("samples and trials must be positive, nested-points non-negative")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"Seed {self.seed} is not a 64-bit unsigned integer")
        if not self.fd_step > 0 or self.fd_scheme not in SCHEMES:
            raise ConfigError(f"Invalid finite differences ({self.fd_step}, {self.fd_scheme})")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"Unknown tolerances {sorted(unknown)}")
        bad = [name for name, value in self.tolerances.items() if not value > 0]
        if bad:
            raise ConfigError(f"Tolerances must be positive: {bad}")
        unknown = [name for name in self.checks if name not in CHECKS]
        if unknown:
            raise ConfigError(f"Unknown checks {unknown}")
        for name in ("pin_c", "pin_kappa"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigError(f"{name} must be positive, got {value}")

    @classmethod
    def from_args(cls, args):
        """Builds the config from the parsed command line."""
        tolerances = dict(DEFAULT_TOLERANCES)
        for item in getattr(args, "tol", None) or []:
            name, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"--tol expects NAME=VALUE, got {item}")
            tolerances[name.strip()] = _to_float(value, f"tolerance {name}")
        t_values = tuple(_to_float(v, "t") for v in _split(getattr(args, "t", ""))) or DEFAULT_T
        return cls(manifold=args.manifold,
                   n=args.n,
                   k=1 if args.manifold == "cpn" and args.k is None else (args.k or 1),
                   scale=args.scale,
                   t_values=t_values,
                   samples=args.samples,
                   seed=args.seed,
                   fd_step=args.fd_step,
                   fd_scheme=args.fd_scheme,
                   tolerances=tolerances,
                   checks=tuple(_split(getattr(args, "checks", ""))),
                   pin_c=args.pin_c,
                   pin_kappa=args.pin_kappa,
                   nested_points=args.nested_points,
                   trials=args.trials)

    @property
    def spec(self):
        return OrbitSpec(self.n, self.k, self.scale)

    @property
    def fd(self):
        return FDConfig(step=self.fd_step, scheme=self.fd_scheme)

    def to_json(self):
        return {"manifold": self.manifold, "n": self.n, "k": self.k, "scale": self.scale,
                "t_values": list(self.t_values), "samples": self.samples, "seed": self.seed,
                "fd_step": self.fd_step, "fd_scheme": self.fd_scheme,
                "tolerances": dict(self.tolerances), "checks": list(self.checks or CHECKS),
                "pin_c": self.pin_c, "pin_kappa": self.pin_kappa,
                "nested_points": self.nested_points, "trials": self.trials}


def _split(text):
    return [item.strip() for item in (text or "").split(",") if item.strip()]


def _to_float(value, what):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"Invalid {what}: {value!r}")


@dataclass
class CheckResult:
    name: str
    points_evaluated: int
    max_residual: float
    tolerance: float
    passed: bool
    witnesses: list = field(default_factory=list)
    error: str = None
    details: dict = field(default_factory=dict)

    def to_json(self):
        out = {"name": self.name, "points_evaluated": self.points_evaluated,
               "max_residual": self.max_residual, "tolerance": self.tolerance,
               "pass": self.passed, "witnesses": self.witnesses}
        if self.error is not None:
            out["error"] = self.error
        if self.details:
            out["details"] = self.details
        return out


@dataclass
class VerificationReport:
    config: RunConfig
    calibration: dict
    results: list
    wall_time: float = 0.0
    version: str = VERSION

    @property
    def passed(self):
        return all(r.passed for r in self.results)

    def results_json(self):
        return [r.to_json() for r in self.results]

    def to_json(self):
        return {"config": self.config.to_json(), "calibration": self.calibration,
                "results": self.results_json(), "pass": self.passed,
                "wall_time": self.wall_time, "version": self.version}


# check name -> (function, tolerance key); a key of None makes the check a failure count
CHECKS = {}


def register(name, tolerance=None):
    def wrapper(fn):
        if name in CHECKS:
            raise NameError(f"Check {name} registered twice")
        CHECKS[name] = (fn, tolerance)
        return fn
    return wrapper


class SuiteContext(object):
    """Shared state of a run: sampled points, calibration and the model.
    Everything random is drawn from generators seeded by (seed, name), so a check
    sees the same numbers whether it runs alone or in the full suite.
    Params:
    - config (RunConfig): run configuration
    - progress (bool): show tqdm bars
    """
    def __init__(self, config, progress=True):
        self.config = config
        self.spec = config.spec
        self.fd = config.fd
        self.progress = progress

    def rng(self, name):
        return np.random.default_rng([self.config.seed, zlib.crc32(name.encode())])

    def iterate(self, name, items):
        items = list(items)
        with tqdm(total=len(items), desc=name, leave=False, disable=not self.progress) as t:
            for item in items:
                yield item
                t.update()

    @cached_property
    def points(self):
        return sample_chart_points(self.spec, self.config.samples, self.rng("points"))

    @cached_property
    def holdout(self):
        return sample_chart_points(self.spec, HOLDOUT_SAMPLES, self.rng("holdout"))

    @cached_property
    def _calibration(self):
        cfg = self.config
        if cfg.pin_c is not None:
            kappa = cfg.pin_kappa if cfg.pin_kappa is not None else hm.default_kappa(self.spec)
            try:
                layout = hm.default_layout(self.spec, kappa)
            except NumericalGuard as e:
                return None, e
            return hm.Calibration(cfg.pin_c, kappa, layout, objective=float("nan")), None
        samples = sample_chart_points(self.spec, CALIBRATION_SAMPLES, self.rng("calibration"))
        try:
            return hm.calibrate(self.spec, samples, tol=cfg.tolerances["spectrum"], kappa=cfg.pin_kappa), None
        except CalibrationFailure as e:
            return e.best, e
        except NumericalGuard as e:
            return None, e

    @property
    def calibration(self):
        return self._calibration[0]

    @property
    def calibration_error(self):
        return self._calibration[1]

    @cached_property
    def model(self):
        cal = self.calibration
        if cal is None:
            return hm.HermitianModel(self.spec)
        return hm.HermitianModel(self.spec, hm.standard_r_matrix(self.spec.n, cal.c), cal.kappa, cal.layout)

    @cached_property
    def m0_points(self):
        """Sampled points where every GT variable is smooth and they are pairwise apart."""
        return [p for p in self.points if self.model.gt(p).in_m0]

    @cached_property
    def nested_points(self):
        return self.m0_points[:self.config.nested_points]

    @cached_property
    def hierarchy(self):
        """Bivector fields P_1 = omega^-1, P_2 = N P_1, ..."""
        model = self.model
        return [pn.HierarchyLevel(j, j + 1).bivector(model.poisson_field, model.nijenhuis_field)
                for j in range(HIERARCHY_DEPTH)]

    @cached_property
    def polytope(self):
        top = self.model.kappa * self.spec.scale
        return gp.GTPolytope(self.spec.n, self.spec.k, top)

    @property
    def trials(self):
        return self.config.trials


def _norm(a):
    return float(np.linalg.norm(getattr(a, "components", a)))


# geometry

@register("spectrum_preservation", "geometry")
def check_spectrum_preservation(ctx, meter):
    rho = orbit_spectrum(make_rho(ctx.spec))
    for p in ctx.iterate("spectrum_preservation", ctx.points):
        x = embed(ctx.spec, p).matrix
        deviation = max(np.max(np.abs(orbit_spectrum(x) - rho)), np.linalg.norm(x + x.conj().T))
        meter.update(relative(deviation, ctx.spec.scale), p.coords)


@register("frame_rank")
def check_frame_rank(ctx, meter):
    worst = np.inf
    for p in ctx.iterate("frame_rank", ctx.points):
        deficient = 0
        for fd in (None, ctx.fd):
            try:
                frame = tangent_frame(ctx.spec, p, fd)
            except NumericalGuard:
                deficient = 1
                continue
            sv = np.linalg.svd(frame.real_matrix, compute_uv=False)
            worst = min(worst, sv[-1] / sv[0])
        meter.update(deficient, p.coords)
    return {"min_relative_singular_value": worst}


@register("generator_round_trip", "geometry")
def check_generator_round_trip(ctx, meter):
    rng = ctx.rng("generator_round_trip")
    n = ctx.spec.n
    for p in ctx.iterate("generator_round_trip", ctx.points):
        x = embed(ctx.spec, p).matrix
        a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        x0 = 0.5 * (a - a.conj().T)
        v = x0 @ x - x @ x0
        gen = solve_generator(x, v)
        meter.update(relative(np.linalg.norm(gen @ x - x @ gen - v), np.linalg.norm(v)), p.coords)


@register("fd_convergence", "fd_order")
def check_fd_convergence(ctx, meter):
    """Observed order of the stencils on a quintic against 2 (central-2) and 4 (central-4)."""
    p = ChartPoint.from_array(np.full(ctx.spec.dim, 0.5))
    quintic = lambda q: float(np.sum(q.array ** 5))
    exact = 5 * 0.5 ** 4
    orders = {}
    for scheme, expected, step in (("central-2", 2, 1e-2), ("central-4", 4, 5e-2)):
        errors = [abs(fd_directional(quintic, p, 0, FDConfig(step=h, scheme=scheme)) - exact)
                  for h in (step, step / 2)]
        orders[scheme] = float(np.log2(errors[0] / errors[1]))
        meter.update(abs(orders[scheme] - expected), p.coords)
    return {"observed_orders": orders}


# poisson-nijenhuis

@register("jacobi", "schouten")
def check_jacobi(ctx, meter):
    model = ctx.model
    fields = [model.poisson_field] + [model.pencil_field(t) for t in ctx.config.t_values]
    for p in ctx.iterate("jacobi", ctx.points):
        for P in fields:
            bracket = pn.schouten_bivector_bivector(P, P, p, ctx.fd)
            meter.update(relative(_norm(bracket), _norm(P(p)), _norm(P.jacobian(p, ctx.fd))), p.coords)


@register("compatibility", "schouten")
def check_compatibility(ctx, meter):
    model = ctx.model
    pi, inv = model.bruhat_field, model.poisson_field
    for p in ctx.iterate("compatibility", ctx.points):
        bracket = pn.schouten_bivector_bivector(pi, inv, p, ctx.fd)
        scale = max(_norm(pi(p)), _norm(inv(p))) * max(_norm(pi.jacobian(p, ctx.fd)), _norm(inv.jacobian(p, ctx.fd)))
        meter.update(relative(_norm(bracket), scale), p.coords)


@register("hierarchy_compatibility", "schouten")
def check_hierarchy_compatibility(ctx, meter):
    levels = ctx.hierarchy
    for p in ctx.iterate("hierarchy_compatibility", ctx.points):
        for j, s in combinations_with_replacement(range(len(levels)), 2):
            P, Q = levels[j], levels[s]
            bracket = pn.schouten_bivector_bivector(P, Q, p, ctx.fd)
            scale = max(_norm(P(p)), _norm(Q(p))) * max(_norm(P.jacobian(p, ctx.fd)), _norm(Q.jacobian(p, ctx.fd)))
            meter.update(relative(_norm(bracket), scale), p.coords)


@register("torsion", "torsion")
def check_torsion(ctx, meter):
    model = ctx.model
    fields = [model.nijenhuis_field] + [model.nijenhuis_shifted(t) for t in ctx.config.t_values]
    for p in ctx.iterate("torsion", ctx.points):
        dN = _norm(model.nijenhuis_field.jacobian(p, ctx.fd))
        for N in fields:
            meter.update(relative(_norm(pn.torsion_tensor(N, p, ctx.fd)), _norm(N(p)), dN), p.coords)


@register("np_symmetry", "np")
def check_np_symmetry(ctx, meter):
    model = ctx.model
    for p in ctx.iterate("np_symmetry", ctx.points):
        N = model.nijenhuis_field(p)
        for P in (model.poisson_field(p), model.bruhat_field(p)):
            meter.update(relative(pn.check_np_symmetry(P, N), _norm(N), _norm(P)), p.coords)


@register("lenart", "grad")
def check_lenart(ctx, meter):
    N_field = ctx.model.nijenhuis_field
    for p in ctx.iterate("lenart", ctx.points):
        norm_n, norm_dn = _norm(N_field(p)), _norm(N_field.jacobian(p, ctx.fd))
        for k in range(1, LENART_MAX_K + 1):
            res = pn.check_lenart_canonical(N_field, k, p, ctx.fd)
            meter.update(relative(res, max(1.0, norm_n) ** k, norm_dn), p.coords)


@register("logdet_extension", "grad")
def check_logdet_extension(ctx, meter):
    model = ctx.model
    skipped = 0
    for p in ctx.iterate("logdet_extension", ctx.m0_points):
        values = model.gt_values(p)
        norm_dn = _norm(model.nijenhuis_field.jacobian(p, ctx.fd))
        for t in ctx.config.t_values:
            margin = float(np.min(np.abs(values + t)))
            if margin < LOGDET_MARGIN:
                skipped += 1
                continue
            try:
                res = pn.check_logdet_extension(model.nijenhuis_field, t, p, ctx.fd)
            except SingularNt:
                skipped += 1
                continue
            meter.update(relative(res, norm_dn / margin), p.coords)
    return {"skipped": skipped}


def _hamiltonian_gradients(N_field, p, fd, count):
    return [fd_gradient(lambda q, k=k: pn.canonical_hamiltonian(N_field, k, q), p, fd)
            for k in range(1, count + 1)]


@register("involution", "inv")
def check_involution(ctx, meter):
    N_field = ctx.model.nijenhuis_field
    levels = ctx.hierarchy[:2]
    for p in ctx.iterate("involution", ctx.points):
        grads = _hamiltonian_gradients(N_field, p, ctx.fd, INVOLUTION_MAX_K)
        for P in levels:
            pp = P(p)
            for a, b in combinations(range(INVOLUTION_MAX_K), 2):
                value = pn.poisson_bracket(pp, grads[a], grads[b])
                meter.update(relative(abs(value), _norm(grads[a]), _norm(pp), _norm(grads[b])), p.coords)


@register("double_degeneracy")
def check_double_degeneracy(ctx, meter):
    model = ctx.model
    tol = ctx.config.tolerances["spectrum"]
    for p in ctx.iterate("double_degeneracy", ctx.points):
        for t in (0.0,) + tuple(ctx.config.t_values):
            try:
                spectrum = model.spectrum(p, t, tol)
            except (OddMultiplicity, ComplexSpectrum):
                meter.update(1, p.coords)
                continue
            meter.update(int(len(spectrum) > ctx.spec.m), p.coords)


@register("eigen_equation", "grad")
def check_eigen_equation(ctx, meter):
    model = ctx.model
    for p in ctx.iterate("eigen_equation", ctx.m0_points):
        norm_n = _norm(model.nijenhuis_field(p))
        for i in range(ctx.spec.m):
            res = pn.check_eigen_equation(model.gt_variable(i), model.nijenhuis_field, p, ctx.fd)
            meter.update(relative(res, norm_n), p.coords)


@register("hamiltonian_forms", "grad")
def check_hamiltonian_forms(ctx, meter):
    model = ctx.model
    closedness = 0.0
    for p in ctx.iterate("hamiltonian_forms", ctx.nested_points):
        norm_n = _norm(model.nijenhuis_field(p))
        for i in range(ctx.spec.m):
            closed, n_closed = pn.hamiltonian_form_residual(model.gt_variable(i), model.nijenhuis_field, p, ctx.fd)
            closedness = max(closedness, closed)
            meter.update(relative(max(closed, n_closed), norm_n), p.coords)
    return {"max_closedness": closedness}


@register("modular_field", "schouten")
def check_modular_field(ctx, meter):
    """L_sigma pi_t = 0 for sigma = omega^-1 d I_1, on the nested configuration."""
    model = ctx.model
    nested = ctx.fd.nested()
    inv = model.poisson_field
    trace = lambda q: pn.canonical_hamiltonian(model.nijenhuis_field, 1, q)
    sigma = TensorField(lambda q: inv(q).T @ fd_gradient(trace, q, nested), "vector", name="sigma_I1")
    for p in ctx.iterate("modular_field", ctx.nested_points):
        for t in ctx.config.t_values:
            P = model.pencil_field(t)
            lie = pn.lie_derivative_bivector(sigma, P, p, nested)
            scale = max(_norm(P(p)), _norm(sigma(p))) * max(1.0, _norm(sigma.jacobian(p, nested)), _norm(P.jacobian(p, nested)))
            meter.update(relative(_norm(lie), scale), p.coords)


@register("spectral_shift", "shift")
def check_spectral_shift(ctx, meter):
    model = ctx.model
    tol = ctx.config.tolerances["spectrum"]
    for p in ctx.iterate("spectral_shift", ctx.points):
        local = model.local(p)
        base = model.spectrum(p, 0.0, tol)
        for t in ctx.config.t_values:
            pencil = hm.pencil_bivector(local.pi, local.omega, t)
            shifted = pn.nijenhuis_spectrum(hm.nijenhuis_operator(pencil, local.omega), tol)
            if [mult for _, mult in shifted] != [mult for _, mult in base]:
                meter.update(np.inf, p.coords)
                continue
            gaps = [abs(a - (b + t)) / max(1.0, abs(b + t)) for (a, _), (b, _) in zip(shifted, base)]
            meter.update(max(gaps, default=0.0), p.coords)


@register("vandermonde")
def check_vandermonde(ctx, meter):
    smallest_b, smallest_a = np.inf, np.inf
    for p in ctx.iterate("vandermonde", ctx.m0_points):
        det_b, det_a = pn.vandermonde_checks(ctx.model.gt_values(p))
        smallest_b, smallest_a = min(smallest_b, abs(det_b)), min(smallest_a, abs(det_a))
        meter.update(int(abs(det_b) <= VANDERMONDE_MIN), p.coords)
    return {"min_abs_det_b": smallest_b, "min_abs_det_a": smallest_a}


@register("koszul", "inv")
def check_koszul(ctx, meter):
    model = ctx.model
    m = ctx.spec.m
    pairs = list(combinations(range(m), 2)) or [(0, 0)]
    exchange = 0.0
    for p in ctx.iterate("koszul", ctx.nested_points):
        norm_pi, norm_inv = _norm(model.bruhat_field(p)), _norm(model.poisson_field(p))
        for i, j in pairs:
            f, g = model.gt_variable(i), model.gt_variable(j)
            bracket = pn.koszul_bracket(model.bruhat_field, f, g, p, ctx.fd)
            meter.update(relative(_norm(bracket), norm_pi), p.coords)
            res = pn.check_koszul_exchange(model.poisson_field, model.nijenhuis_field, f, g, p, ctx.fd)
            res = relative(res, norm_inv, _norm(model.nijenhuis_field(p)))
            exchange = max(exchange, res)
            meter.update(res, p.coords)
    return {"max_exchange_residual": exchange}


@register("trace_convention", "spectrum")
def check_trace_convention(ctx, meter):
    """Tr N against the sum of distinct eigenvalues; double degeneracy makes the ratio 2."""
    model = ctx.model
    ratios = []
    for p in ctx.iterate("trace_convention", ctx.m0_points):
        trace = float(np.trace(model.nijenhuis_field(p)))
        distinct = sum(value for value, _ in model.spectrum(p))
        ratio = trace / distinct
        ratios.append(ratio)
        meter.update(abs(ratio - 2.0), p.coords)
    return {"mean_ratio": float(np.mean(ratios)) if ratios else float("nan")}


# hermitian models

@register("kks_closedness", "kks")
def check_kks_closedness(ctx, meter):
    omega = ctx.model.omega_field
    for p in ctx.iterate("kks_closedness", ctx.points):
        jac = omega.jacobian(p, ctx.fd)
        d_omega = jac + jac.transpose(1, 2, 0) + jac.transpose(2, 0, 1)
        meter.update(relative(_norm(d_omega), _norm(omega(p))), p.coords)


@register("bruhat_fixed_point", "fixed_point")
def check_bruhat_fixed_point(ctx, meter):
    """pi vanishes at the lowest vertex and N(rho) = (kappa * scale) id."""
    model, spec = ctx.model, ctx.spec
    lowest = spec.origin(spec.opposite_chart)
    local = model.local(lowest)
    meter.update(relative(_norm(local.pi), _norm(local.omega_inv)), lowest.coords)
    top = model.kappa * spec.scale
    n_rho = model.local(spec.origin()).N
    meter.update(relative(np.linalg.norm(n_rho - top * np.eye(spec.dim)), top), spec.origin().coords)
    meter.update(model.shift_residual)
    return {"shift": model.shift, "shift_residual": model.shift_residual}


@register("calibration", "spectrum")
def check_calibration(ctx, meter):
    """Holdout spectrum distance with the calibrated (or pinned) constants."""
    if ctx.calibration_error is not None:
        raise ctx.calibration_error
    model = ctx.model
    for p in ctx.iterate("calibration", ctx.holdout):
        meter.update(model.match(p, ctx.config.tolerances["spectrum"]).max_distance, p.coords)
    return {"c": ctx.calibration.c, "kappa": ctx.calibration.kappa}


@register("spectrum_match", "spectrum")
def check_spectrum_match(ctx, meter):
    model = ctx.model
    for p in ctx.iterate("spectrum_match", ctx.points):
        meter.update(model.match(p, ctx.config.tolerances["spectrum"]).max_distance, p.coords)


@register("gt_interlacing", "interlacing")
def check_gt_interlacing(ctx, meter):
    for p in ctx.iterate("gt_interlacing", ctx.points):
        meter.update(ctx.model.gt(p).interlacing_residual(), p.coords)
    return {"m0_points": len(ctx.m0_points)}


def _pencil_logdet(local, t):
    pencil = hm.pencil_bivector(local.pi, local.omega, t)
    return float(np.linalg.slogdet(pencil.components)[1])


@register("pencil_nondegeneracy")
def check_pencil_nondegeneracy(ctx, meter):
    model = ctx.model
    min_logdet = np.inf
    for p in ctx.iterate("pencil_nondegeneracy", ctx.points):
        local = model.local(p)
        for t in PENCIL_REGULAR_T:
            smallest = np.min(np.abs(np.linalg.eigvals(local.N + t * np.eye(ctx.spec.dim))))
            min_logdet = min(min_logdet, _pencil_logdet(local, t))
            meter.update(int(smallest < PENCIL_MARGIN), p.coords)
    return {"min_log_abs_det": min_logdet}


@register("pencil_degeneracy_witness", "spectrum")
def check_pencil_degeneracy_witness(ctx, meter):
    model = ctx.model
    top = model.kappa * ctx.spec.scale
    ts = sorted(set(PENCIL_SINGULAR_T) | {t for t in ctx.config.t_values if -top < t < 0})
    logdets = {}
    for t in ts:
        p = hm.degeneracy_witness(model, t)
        local = model.local(p)
        smallest = np.min(np.abs(np.linalg.eigvals(local.N + t * np.eye(ctx.spec.dim))))
        logdets[str(t)] = _pencil_logdet(local, t)
        meter.update(relative(smallest, _norm(local.N)), p.coords)
    return {"log_abs_det": logdets}


# groupoid

def _random_chain(rng, polytope, t, length):
    """Composable members g_1, ..., g_length of L(N_t) and the pinned block [a, b).
    Slots in the block sit at -t on every point; the others keep the sign of lambda + t.
    """
    # 0.0 - t keeps t = 0 at +0.0 so the uniform bounds stay ordered
    m, top, pivot = polytope.m, polytope.top, 0.0 - t
    pinnable = polytope.k == 1 and 0 <= pivot <= top
    a = b = 0
    if pinnable:
        a = int(rng.integers(0, m + 1)) if pivot > 0 else 0
        b = int(rng.integers(a, m + 1)) if pivot < top else m
    points = []
    for _ in range(length + 1):
        if not pinnable:
            lam = polytope.sample(rng)
        else:
            lam = np.empty(m)
            if a:
                lam[:a] = np.sort(rng.uniform(0.0, pivot, a))
            lam[a:b] = pivot
            if b < m:
                lam[b:] = np.sort(rng.uniform(pivot, top, m - b))
        points.append(lam)
    case = gp.MembershipCase.from_t(t, top)
    chain = []
    for lam, nxt in zip(points[:-1], points[1:]):
        h = np.zeros(m)
        free = np.ones(m, dtype=bool)
        free[a:b] = False
        h[free] = np.log(np.abs(nxt[free] + t) / np.abs(lam[free] + t))
        if case is gp.MembershipCase.INTERIOR:
            h[a:b] = rng.normal()
        chain.append(gp.GroupoidElement.make(lam, h, t, polytope))
    return chain, (a, b)


def _groupoid_ts(ctx):
    if ctx.spec.k == 1:
        return MEMBERSHIP_T
    return tuple(t for t in MEMBERSHIP_T if gp.MembershipCase.from_t(t) is gp.MembershipCase.PAIR)


def _max_abs(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)), initial=0.0))


@register("groupoid_axioms", "groupoid")
def check_groupoid_axioms(ctx, meter):
    rng = ctx.rng("groupoid_axioms")
    polytope = gp.GTPolytope(ctx.spec.n, ctx.spec.k)
    for t in ctx.iterate("groupoid_axioms", _groupoid_ts(ctx)):
        for _ in range(ctx.trials):
            (g1, g2, g3), _ = _random_chain(rng, polytope, t, 3)
            left = gp.compose(gp.compose(g1, g2), g3)
            right = gp.compose(g1, gp.compose(g2, g3))
            unit_right = gp.compose(g1, gp.identity(gp.target(g1), t, polytope))
            unit_left = gp.compose(gp.identity(g1.lam, t, polytope), g1)
            loop = gp.compose(g1, gp.inverse(g1))
            back = gp.inverse(gp.inverse(g1))
            # e^|h| amplifies the rounding of lambda + t when acting twice
            amplification = float(np.exp(np.max(np.abs(g1.h), initial=0.0)))
            meter.update(max(_max_abs(left.h, right.h),
                             _max_abs(unit_right.h, g1.h), _max_abs(unit_left.h, g1.h),
                             _max_abs(loop.h, 0.0), _max_abs(gp.target(loop), g1.lam),
                             _max_abs(back.lam, g1.lam) / amplification, _max_abs(back.h, g1.h)), g1.lam)


@register("action_law", "groupoid")
def check_action_law(ctx, meter):
    rng = ctx.rng("action_law")
    m = ctx.spec.m
    for t in ctx.iterate("action_law", ctx.config.t_values):
        for _ in range(ctx.trials):
            h1, h2 = rng.normal(size=m), rng.normal(size=m)
            lam = rng.uniform(0.0, 2.0, m)
            composed = gp.act(h1 + h2, lam, t)
            nested = gp.act(h1, gp.act(h2, lam, t), t)
            meter.update(max(_max_abs(composed, nested) / max(1.0, float(np.max(np.abs(composed)))),
                             _max_abs(gp.act(np.zeros(m), lam, t), lam)), lam)


@register("fixed_locus", "groupoid")
def check_fixed_locus(ctx, meter):
    rng = ctx.rng("fixed_locus")
    m = ctx.spec.m
    for t in ctx.iterate("fixed_locus", ctx.config.t_values):
        for _ in range(ctx.trials):
            lam = rng.uniform(0.0, 2.0, m)
            pinned = rng.random(m) < 0.5
            lam[pinned] = -t
            moved = gp.act(rng.normal(scale=3.0, size=m), lam, t)
            meter.update(_max_abs(moved[pinned], lam[pinned]), lam)


@register("membership_closure")
def check_membership_closure(ctx, meter):
    """Members of the CP^n subgroupoid stay members under compose and inverse;
    perturbing a pinned h breaks membership.
    """
    if ctx.spec.k != 1:
        return {"skipped": "membership rule is only known for CP^n"}
    rng = ctx.rng("membership_closure")
    polytope = gp.simplex(ctx.spec.m)
    for t in ctx.iterate("membership_closure", MEMBERSHIP_T):
        case = gp.MembershipCase.from_t(t)
        for _ in range(ctx.trials):
            (g1, g2), (a, b) = _random_chain(rng, polytope, t, 2)
            bad = 0
            bad += not gp.membership_cpn(g1)
            bad += not gp.closure_check(g1, g2)
            bad += not gp.membership_cpn(gp.inverse(g1))
            pinned = b - a
            if (case is gp.MembershipCase.INTERIOR and pinned >= 2) or (case is gp.MembershipCase.BOUNDARY and pinned >= 1):
                h = np.array(g1.h)
                h[a] += 1.0
                bad += gp.membership_cpn(replace(g1, h=tuple(h.tolist())))
            meter.update(bad, g1.lam)


@register("cocycle_morphism", "cocycle_target")
def check_cocycle_morphism(ctx, meter):
    """pair_to_element reproduces targets and carries concatenation to composition."""
    model, points = ctx.model, ctx.m0_points
    h_error = 0.0
    triples = [points[i:i + 3] for i in range(min(COCYCLE_TRIPLES, len(points) - 2))]
    for x, y, z in ctx.iterate("cocycle_morphism", triples):
        gxy = gp.pair_to_element(x, y, COCYCLE_T, model, ctx.polytope)
        gyz = gp.pair_to_element(y, z, COCYCLE_T, model, ctx.polytope)
        gxz = gp.pair_to_element(x, z, COCYCLE_T, model, ctx.polytope)
        h_error = max(h_error, _max_abs(gp.compose(gxy, gyz).h, gxz.h),
                      abs(gp.eigenvalue_cocycle(x, x, 0, COCYCLE_T, model)))
        meter.update(_max_abs(gp.target(gxy), model.gt_values(y)), x.coords)
    tol = ctx.config.tolerances["groupoid"]
    return {"pass": meter.passed and h_error <= tol, "max_h_error": h_error, "h_tolerance": tol}


@register("pair_surjectivity", "cocycle_target")
def check_pair_surjectivity(ctx, meter):
    model, points = ctx.model, [p for p in ctx.points if ctx.model.gt(p).smooth]
    ts = [t for t in ctx.config.t_values
          if gp.MembershipCase.from_t(t, ctx.polytope.top) is gp.MembershipCase.PAIR]
    for t in ts:
        for x, y in ctx.iterate(f"pair_surjectivity t={t:g}", list(zip(points[:-1], points[1:]))):
            g = gp.pair_to_element(x, y, t, model, ctx.polytope)
            meter.update(_max_abs(gp.target(g), model.gt_values(y)), x.coords)
    return {"t_values": ts}


# negative controls

def _random_linear_field(rng, dim, kind, antisymmetric=False):
    coef = rng.normal(size=(dim + 1, dim, dim))
    if antisymmetric:
        coef = coef - coef.transpose(0, 2, 1)
    return TensorField(lambda q: coef[0] + np.einsum("l,lij->ij", q.array, coef[1:]), kind, name=f"random {kind}")


@register("negative_controls", "negative")
def check_negative_controls(ctx, meter):
    """Random tensors must fail torsion, Jacobi, compatibility, NP symmetry and the
    eigenvalue equation. Reports the smallest residual; passes when it is above tolerance.
    """
    rng = ctx.rng("negative_controls")
    model, dim = ctx.model, ctx.spec.dim
    N = _random_linear_field(rng, dim, "endomorphism")
    P = _random_linear_field(rng, dim, "bivector", antisymmetric=True)
    inv = model.poisson_field
    # shifted past the top of the GT range so it never agrees with an eigenvalue
    shifted = lambda q: float(q.coords[0]) + 5.0 * model.kappa * ctx.spec.scale
    residuals = []
    for p in ctx.iterate("negative_controls", ctx.points[:NEGATIVE_POINTS]):
        n0, dn = N(p), N.jacobian(p, ctx.fd)
        residuals.append(relative(_norm(pn.torsion_tensor(N, p, ctx.fd)), _norm(n0), _norm(dn)))
        # trivectors vanish in dimension 2
        if dim >= 3:
            p0, dp = P(p), P.jacobian(p, ctx.fd)
            residuals.append(relative(_norm(pn.schouten_bivector_bivector(P, P, p, ctx.fd)), _norm(p0), _norm(dp)))
            scale = max(_norm(p0), _norm(inv(p))) * max(_norm(dp), _norm(inv.jacobian(p, ctx.fd)))
            residuals.append(relative(_norm(pn.schouten_bivector_bivector(P, inv, p, ctx.fd)), scale))
        residuals.append(relative(pn.check_np_symmetry(inv(p), n0), _norm(n0), _norm(inv(p))))
        residuals.append(relative(pn.check_eigen_equation(shifted, model.nijenhuis_field, p, ctx.fd),
                                  _norm(model.nijenhuis_field(p))))
    smallest = min(residuals, default=np.inf)
    meter.update(smallest, n=len(residuals))
    return {"pass": smallest > meter.tolerance, "direction": "residuals must exceed tolerance"}


def run_check(ctx, name):
    """Runs one registered check; an exception becomes a failed result."""
    if name not in CHECKS:
        raise NameError(f"Unknown check {name}")
    fn, key = CHECKS[name]
    tol = ctx.config.tolerances[key] if key is not None else 0.0
    meter = ResidualMeter(tol)
    try:
        details = fn(ctx, meter) or {}
    except Exception as e:
        return CheckResult(name, meter.count, float("inf"), tol, False, meter.witnesses,
                           error=type(e).__name__, details={"message": str(e)})
    passed = details.pop("pass", meter.passed)
    return CheckResult(name, meter.count, meter.max, tol, bool(passed), meter.witnesses, details=details)


def run_suite(config, progress=True):
    """Runs the configured checks (all registered ones by default) and collects a report.
    Params:
    - config (RunConfig): run configuration
    - progress (bool): show progress bars
    Returns:
    - VerificationReport
    """
    start = time.time()
    ctx = SuiteContext(config, progress)
    results = []
    for name in config.checks or tuple(CHECKS):
        result = run_check(ctx, name)
        status = "pass" if result.passed else f"FAIL{' (' + result.error + ')' if result.error else ''}"
        print(f"{name:28s} {status:6s} max residual {result.max_residual:.3e} "
              f"tol {result.tolerance:.1e} points {result.points_evaluated}")
        log_result(result)
        results.append(result)
    calibration = ctx.calibration.to_json() if ctx.calibration is not None else None
    return VerificationReport(config, calibration, results, time.time() - start)


def spectrum_dump(config, points, progress=True):
    """GT values and N eigenvalues side by side, one row per point.
    Params:
    - config (RunConfig): run configuration, constants calibrated unless pinned
    - points (list of ChartPoint): points to tabulate
    Returns:
    - pd.DataFrame
    """
    ctx = SuiteContext(config, progress)
    if ctx.calibration_error is not None and ctx.calibration is None:
        raise ctx.calibration_error
    model, tol = ctx.model, config.tolerances["spectrum"]
    rows = []
    for p in ctx.iterate("spectrum", points):
        gt = model.gt(p)
        eigs = np.sort(hm.expand_spectrum(model.spectrum(p, tol=tol)))
        row = {f"x{j}": c for j, c in enumerate(p.coords)}
        row.update({f"gt_{i}": v for i, v in enumerate(gt.flat)})
        row.update({f"n_eig_{i}": v for i, v in enumerate(eigs)})
        row.update({f"smooth_{i}": f for i, f in enumerate(f for level in gt.flags for f in level)})
        row["match_distance"] = hm.match_spectra(model.spectrum(p, tol=tol), gt, tol).max_distance
        row["in_m0"] = gt.in_m0
        rows.append(row)
    return pd.DataFrame(rows)


GROUPOID_COMMANDS = ("compose", "member", "target", "pair-map")


def _element(obj, restrict=True):
    try:
        lam, h, t = obj["lambda"], obj["h"], obj["t"]
    except (KeyError, TypeError) as e:
        raise ConfigError(f"Groupoid element needs lambda, h and t: {e}")
    polytope = gp.simplex(len(lam)) if restrict else None
    return gp.GroupoidElement.make(lam, h, t, polytope)


def groupoid_cli(subcommand, args):
    """Groupoid operations on JSON arguments, for the command line.
    - target: {lambda, h, t} -> {target}
    - member: {lambda, h, t} -> {member, case}
    - compose: {g1, g2, restrict?} -> {result, target}
    - pair-map: {x, y, t, n, k?, scale?} -> {result, target}
    """
    if subcommand not in GROUPOID_COMMANDS:
        raise ConfigError(f"Unknown groupoid command {subcommand}, must be one of {GROUPOID_COMMANDS}")
    if not isinstance(args, dict):
        raise ConfigError("Groupoid arguments must be a JSON object")
    if subcommand == "target":
        return {"target": gp.target(_element(args)).tolist()}
    if subcommand == "member":
        g = _element(args)
        return {"member": gp.membership_cpn(g), "case": gp.MembershipCase.from_t(g.t).value}
    if subcommand == "compose":
        restrict = bool(args.get("restrict", True))
        result = gp.compose(_element(args.get("g1"), restrict), _element(args.get("g2"), restrict))
        return {"result": result.to_json(), "target": gp.target(result).tolist()}
    try:
        spec = OrbitSpec(int(args["n"]), int(args.get("k", 1)), float(args.get("scale", 1.0)))
        x = ChartPoint.from_array(args["x"])
        y = ChartPoint.from_array(args["y"])
        t = float(args["t"])
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"pair-map needs x, y, t and n: {e}")
    model = hm.HermitianModel(spec)
    g = gp.pair_to_element(x, y, t, model, gp.GTPolytope(spec.n, spec.k, model.kappa * spec.scale))
    return {"result": g.to_json(), "target": gp.target(g).tolist()}
