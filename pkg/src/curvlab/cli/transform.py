"""transform: polar chart roundtrip and Hamiltonian/integral conversions.

For seeded random states the report records the worst
    - roundtrip error of (q, p) through to_polar/from_polar
    - |H~ - 2H|
    - |C~^(m) - 4C^(m)| (m < N), |C~^(N) - 4 kappa2 C^(N)|, and in 3D
      |C~_(2) - 4 kappa2 C_(2)|
    - pseudosphere residual of the collective variables
each divided by max(1, |reference|).
"""

import logging

import numpy as np

from curvlab.cli import EXIT_FAILED, EXIT_OK
from curvlab.config import RunConfig
from curvlab.core_algebra import ModelParams, universal_integrals
from curvlab.diffobs import sample_states
from curvlab.export import write_json
from curvlab.geometry import collective_vars, from_polar, polar_hamiltonian, to_polar
from curvlab.hamiltonians import build_deformed, ms, type_i

logger = logging.getLogger(__name__)

TRANSFORM_TOLERANCE = 1e-10


def polar_kind(chart: str, n: int) -> str:
    if chart == 'ms':
        return 'ms_2d'
    return {2: 'type_i_2d', 3: 'type_i_3d'}.get(n, 'nd')


def _relative(value: float, reference: float) -> float:
    return abs(value - reference) / max(1.0, abs(reference))


def transform_report(config: RunConfig) -> dict:
    n, z = config.n, config.params.z
    chart, kappa2 = config.transform.chart, config.transform.kappa2
    params = ModelParams.flat(n, z=z)
    h = build_deformed(ms(params) if chart == 'ms' else type_i(params))
    kind = polar_kind(chart, n)

    worst = {'roundtrip': 0.0, 'hamiltonian': 0.0, 'pseudosphere': 0.0}
    for state in sample_states(n, config.samples, config.seed):
        polar = to_polar(state.q, z, kappa2, p=state.p, chart=chart)
        back = from_polar(polar)
        worst['roundtrip'] = max(worst['roundtrip'],
                                 float(np.max(np.abs(back.vector() - state.vector()))))
        evaluation = polar_hamiltonian(kind, polar)
        worst['hamiltonian'] = max(worst['hamiltonian'],
                                   _relative(evaluation.hamiltonian, 2.0 * h(state)))
        integrals = universal_integrals(state, params)
        for m, value in evaluation.left.items():
            factor = 4.0 * kappa2 if m == n else 4.0
            key = f'left_{m}'
            worst[key] = max(worst.get(key, 0.0), _relative(value, factor * integrals.left_at(m)))
        for m, value in evaluation.right.items():
            key = f'right_{m}'
            worst[key] = max(worst.get(key, 0.0),
                             _relative(value, 4.0 * kappa2 * integrals.right_at(m)))
        xi = collective_vars(state.q, z)
        worst['pseudosphere'] = max(worst['pseudosphere'],
                                    abs(xi.pseudosphere_residual()) / xi.xi_squared[0])

    return {'n': n, 'z': z, 'kappa2': kappa2, 'chart': chart, 'kind': kind,
            'samples': config.samples, 'seed': config.seed, 'max_errors': worst,
            'tolerance': TRANSFORM_TOLERANCE,
            'passed': all(v < TRANSFORM_TOLERANCE for v in worst.values())}


def run(config: RunConfig, args) -> int:
    report = transform_report(config)
    path = config.outputs.resolve('transform', args.out_dir)
    write_json(path, report)
    print(f'Polar chart {report["kind"]} (z={report["z"]:g}, kappa2={report["kappa2"]:g}), '
          f'{report["samples"]} states')
    for name, err in report['max_errors'].items():
        print(f'  {name:>14s}: {err:.3e}')
    print(f'Report written to {path}')
    return EXIT_OK if report['passed'] else EXIT_FAILED
