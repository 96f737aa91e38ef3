"""curvature: closed-form against numeric curvature over a scan of points.

Two dimensions scan a points x points grid; higher dimensions draw `points`
seeded random points from the same box. Numeric values come from the
metric itself (exact derivatives or Richardson finite differences).
"""

import logging

import numpy as np

from curvlab.cli import EXIT_FAILED, EXIT_OK
from curvlab.config import RunConfig
from curvlab.errors import DomainError
from curvlab.export import write_csv
from curvlab.geometry import (
    family_metric,
    gaussian_curvature_2d,
    sectional_curvatures,
    type_i_sectional_curvatures,
)

logger = logging.getLogger(__name__)

# Numeric/closed agreement required for exit 0
SCAN_TOLERANCE = 1e-5

_F_OF_KIND = {'type_i': 'identity', 'ms': 'exp_plus'}


def scan_points(n: int, q_min: float, q_max: float, points: int, seed: int) -> np.ndarray:
    if n == 2:
        axis = np.linspace(q_min, q_max, points)
        return np.array([(a, b) for a in axis for b in axis])
    rng = np.random.default_rng(seed)
    return rng.uniform(q_min, q_max, size=(points, n))


def closed_form(kind: str, z: float, q: np.ndarray) -> np.ndarray:
    """Closed-form coordinate-plane sectional curvature matrix."""
    if kind == 'ms':
        n = q.size
        return z * (np.ones((n, n)) - np.eye(n))
    return type_i_sectional_curvatures(z, q)


def scan_rows(config: RunConfig):
    """(columns, rows) of a curvature scan."""
    n, z = config.n, config.params.z
    cfg = config.curvature
    if n < 2:
        raise DomainError('curvature needs N >= 2')
    metric = family_metric(n, z, _F_OF_KIND[cfg.kind])
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    columns = [f'q{i + 1}' for i in range(n)]
    if n == 2:
        columns += ['closed_form', 'numeric']
    else:
        for i, j in pairs:
            columns += [f'K{i + 1}{j + 1}_closed', f'K{i + 1}{j + 1}_numeric']
        columns += ['scalar_closed', 'scalar_numeric']
        if n == 3 and cfg.kind == 'type_i':
            columns.append('identity')
    columns.append('abs_err')

    rows = []
    for q in scan_points(n, cfg.q_min, cfg.q_max, cfg.points, config.seed):
        closed = closed_form(cfg.kind, z, q)
        if n == 2 and cfg.method == 'ad':
            numeric = np.array([[0.0, 1.0], [1.0, 0.0]]) * gaussian_curvature_2d(metric, q)
        else:
            numeric = sectional_curvatures(metric, q, method=cfg.method)
        row = list(q)
        if n == 2:
            row += [closed[0, 1], numeric[0, 1]]
        else:
            for i, j in pairs:
                row += [closed[i, j], numeric[i, j]]
            row += [closed.sum(), numeric.sum()]
            if n == 3 and cfg.kind == 'type_i':
                q2 = float(np.dot(q, q))
                row.append(sum(closed[i, j] for i, j in pairs) + 2.5 * z * np.sinh(z * q2))
        row.append(max(abs(closed[i, j] - numeric[i, j]) for i, j in pairs))
        rows.append(row)
    return columns, np.array(rows)


def run(config: RunConfig, args) -> int:
    columns, rows = scan_rows(config)
    path = config.outputs.resolve('curvature', args.out_dir)
    write_csv(path, columns, rows)
    worst = float(rows[:, -1].max())
    print(f'{config.curvature.kind} curvature scan, N={config.n}, z={config.params.z:g}: '
          f'{len(rows)} points, max |closed - numeric| = {worst:.3e}')
    print(f'Scan written to {path}')
    return EXIT_OK if worst < SCAN_TOLERANCE else EXIT_FAILED
