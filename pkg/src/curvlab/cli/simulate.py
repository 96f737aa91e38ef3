"""simulate: integrate one trajectory and report invariant drift."""

import logging
import sys

from curvlab.cli import EXIT_FAILED, EXIT_OK, EXIT_RUNTIME
from curvlab.config import RunConfig
from curvlab.core_algebra import PhaseState
from curvlab.diffobs import sample_states
from curvlab.dynamics import drift_report, hamilton_flow
from curvlab.errors import ConvergenceError, SingularityAbort
from curvlab.export import write_csv, write_json

logger = logging.getLogger(__name__)


def initial_state(config: RunConfig) -> PhaseState:
    """Configured initial state, or one drawn from the sampling box with the seed."""
    if config.initial_state is not None:
        return config.initial_state
    return sample_states(config.n, 1, config.seed)[0]


def run(config: RunConfig, args) -> int:
    params = config.params
    h, _ = config.system.build(params)
    monitors = config.system.monitors(params, config.monitors)
    x0 = initial_state(config)
    drift_path = config.outputs.resolve('drift', args.out_dir)

    print(f'Integrating {h.name} (N={params.n}, z={params.z:g}) with '
          f'{config.integrator.method} to t={config.integrator.t_end:g}')
    try:
        traj = hamilton_flow(h, x0, config.integrator, monitors, progress=not args.quiet)
    except (SingularityAbort, ConvergenceError) as e:
        write_json(drift_path, {'error': f'{type(e).__name__}: {e}', 'time': e.time,
                                'last_state': list(e.last_state)})
        print(f'ERROR: {e}', file=sys.stderr)
        print(f'Last good state written to {drift_path}', file=sys.stderr)
        return EXIT_RUNTIME

    traj_path = config.outputs.resolve('trajectory', args.out_dir)
    write_csv(traj_path, traj.columns(), traj.table())
    summary = drift_report(traj)
    within = summary.within(config.drift_bound)
    write_json(drift_path, dict(summary.to_dict(), bound=config.drift_bound, within=within))

    for name, drift in summary.drifts.items():
        flag = '' if drift < config.drift_bound else '  *** above bound ***'
        print(f'  {name:>12s}: drift {drift:.3e}{flag}')
    print(f'Trajectory: {traj_path} ({len(traj.times)} rows)')
    print(f'Drift:      {drift_path}')
    return EXIT_OK if within else EXIT_FAILED
