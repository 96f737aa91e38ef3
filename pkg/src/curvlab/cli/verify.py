"""verify: bracket relations, involution and independence ranks."""

import logging

from curvlab.cli import EXIT_FAILED, EXIT_OK
from curvlab.config import RunConfig
from curvlab.diffobs import (
    left_integral_observable,
    rank_check,
    right_integral_observable,
    sample_array,
    verify_algebra,
)
from curvlab.export import write_json

logger = logging.getLogger(__name__)

RANK_STATES = 10


def expected_rank(n: int, n_extras: int) -> int:
    """2N-2 for the universal integrals and H, 2N-1 once extra integrals are added."""
    if n == 1:
        return 1
    return 2 * n - 1 if n_extras else 2 * n - 2


def run(config: RunConfig, args) -> int:
    params = config.params
    if config.system.family == 'classical':
        params = params.with_z(0.0)
    h, extras = config.system.build(config.params)
    report = verify_algebra(params, config.samples, config.seed, hamiltonian=h,
                            tolerance=config.tolerance, extras=extras)

    n = params.n
    integrals = ([left_integral_observable(params, m) for m in range(2, n + 1)]
                 + [right_integral_observable(params, m) for m in range(2, n)])
    states = sample_array(n, min(RANK_STATES, config.samples), config.seed)
    report.ranks.append(rank_check(integrals + [h], states, expected_rank(n, 0)))
    if extras:
        report.ranks.append(rank_check(integrals + [h] + list(extras), states,
                                       expected_rank(n, len(extras))))

    path = config.outputs.resolve('report', args.out_dir)
    write_json(path, report.to_dict())

    failures = report.failures()
    print(f'{len(report.checks)} bracket checks, {len(failures)} failed '
          f'(N={n}, z={params.z:g}, {config.samples} samples)')
    for check in failures:
        print(f'  FAIL {{{check.left}, {check.right}}} = {check.expected}: '
              f'scaled deviation {check.max_deviation:.3e} (absolute {check.max_abs_deviation:.3e})')
    for rank in report.ranks:
        status = 'OK' if rank['passed'] else 'FAIL'
        print(f'  rank {status}: expected {rank["expected"]}, got {sorted(set(rank["ranks"]))}')
    print(f'Report written to {path}')
    return EXIT_OK if report.passed else EXIT_FAILED
