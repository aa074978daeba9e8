"""data.py
Chart point sampling and the point / spectrum file formats.
"""

import numpy as np
import pandas as pd

from tqdm.autonotebook import trange

from utils.errors import ConfigError
from models.orbit import ChartPoint, chart_matrix

SAMPLE_STD = 0.7
SAMPLE_COND_MAX = 1e3   # reject draws whose column-span Gram matrix is worse conditioned
MAX_REJECTIONS = 10000


def sample_chart_points(spec, count, rng, std=SAMPLE_STD, chart_id=()):
    """Draw chart points from a centred Gaussian, rejecting ill-conditioned ones.
    Params:
    - spec (OrbitSpec): orbit
    - count (int): number of points
    - rng (np.random.Generator): seeded generator
    - std (float): Gaussian scale of the chart coordinates
    Returns:
    - list of ChartPoint
    """
    points, rejected = [], 0
    while len(points) < count:
        p = ChartPoint.from_array(rng.normal(0.0, std, size=spec.dim), chart_id)
        y = chart_matrix(spec, p)
        if np.linalg.cond(y.conj().T @ y) > SAMPLE_COND_MAX:
            rejected += 1
            if rejected > MAX_REJECTIONS:
                raise ConfigError(f"Sampler rejected {rejected} draws, std {std} too large")
            continue
        points.append(p)
    return points


def read_points_csv(path, spec):
    """One ChartPoint per row, 2k(n-k) columns, optional header row."""
    df = pd.read_csv(path, header=None)
    if df.shape[0] and not all(_is_number(v) for v in df.iloc[0]):
        df = df.iloc[1:]
    try:
        values = df.to_numpy(dtype=float)
    except ValueError as e:
        raise ConfigError(f"Non-numeric entry in {path}: {e}")
    if values.ndim != 2 or values.shape[1] != spec.dim:
        raise ConfigError(f"{path} has {values.shape[-1]} columns, expected {spec.dim}")
    return [ChartPoint.from_array(row) for row in values]


def write_points_csv(path, points):
    dim = len(points[0].coords) if points else 0
    pd.DataFrame([p.coords for p in points], columns=[f"x{j}" for j in range(dim)]).to_csv(path, index=False)


def _is_number(value):
    try:
        float(value)
    except (TypeError, ValueError):
        return False
    return True


def test_sampler(args):
    """Module Test
    """
    from models.orbit import OrbitSpec, embed, make_rho, orbit_spectrum

    spec = OrbitSpec(args.n, 1 if args.manifold == "cpn" else (args.k or 1), args.scale)
    rng = np.random.default_rng(args.seed)
    points = sample_chart_points(spec, args.samples, rng)
    rho_eigs = orbit_spectrum(make_rho(spec))
    worst = 0.0
    with trange(len(points)) as t:
        for p in points:
            eigs = orbit_spectrum(embed(spec, p))
            worst = max(worst, float(np.max(np.abs(eigs - rho_eigs))))
            t.update()
    print(points[0])
    print(f"Sampled {len(points)} points on Gr({spec.k},{spec.n}), worst spectrum deviation {worst:.3e}")
