"""sweep: drift summaries over a parameter grid.

The grid is the Cartesian product of the configured axes, taken in the fixed
order of SWEEP_AXES, so cell indices do not depend on key order in the file.
"""

import itertools
import logging
from dataclasses import replace
from typing import Dict, List

from curvlab.cli import EXIT_OK
from curvlab.cli.simulate import initial_state
from curvlab.config import SWEEP_AXES, RunConfig
from curvlab.core_algebra import PhaseState
from curvlab.dynamics import SweepCell, sweep
from curvlab.export import write_json

logger = logging.getLogger(__name__)

_PARAM_AXES = ('z', 'kappa2', 'omega', 'k')


def grid_labels(axes: Dict[str, list]) -> List[Dict[str, object]]:
    names = [a for a in SWEEP_AXES if a in axes]
    return [dict(zip(names, values)) for values in itertools.product(*(axes[a] for a in names))]


def make_cell(config: RunConfig, index: int, label: Dict[str, object]) -> SweepCell:
    base_state = initial_state(config)

    def build():
        overrides = {k: float(v) for k, v in label.items() if k in _PARAM_AXES}
        if 'b' in label:
            overrides['b'] = tuple(float(v) for v in label['b'])
        params = replace(config.params, **overrides)
        q = label.get('q', base_state.q)
        p = label.get('p', base_state.p)
        x0 = PhaseState.from_lists(q, p)
        h, _ = config.system.build(params)
        return h, config.system.monitors(params, config.monitors), x0

    return SweepCell(index=index, label=label, build=build)


def run(config: RunConfig, args) -> int:
    labels = grid_labels(config.sweep.axes) or [{}]
    cells = [make_cell(config, i, label) for i, label in enumerate(labels)]
    workers = args.workers if args.workers is not None else config.sweep.workers
    results = sweep(cells, config.integrator, workers=workers, progress=not args.quiet)

    path = config.outputs.resolve('sweep', args.out_dir)
    write_json(path, {'drift_bound': config.drift_bound,
                      'integrator': config.integrator.to_dict(),
                      'cells': [r.to_dict() for r in results]})
    failed = [r for r in results if not r.ok]
    above = [r for r in results if r.ok and not r.summary.within(config.drift_bound)]
    print(f'{len(results)} cells: {len(failed)} failed, {len(above)} above drift bound')
    for r in failed:
        print(f'  cell {r.index} {r.label}: {r.error}')
    print(f'Sweep written to {path}')
    return EXIT_OK
