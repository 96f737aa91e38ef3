import numpy as np
import pytest

from curvlab.core_algebra import ModelParams, PhaseState
from curvlab.diffobs import Observable, left_integral_observable, right_integral_observable
from curvlab.dynamics import (
    DriftSummary,
    IntegratorSpec,
    StepStats,
    SweepCell,
    Trajectory,
    drift_report,
    hamilton_flow,
    sweep,
    worker_count,
)
from curvlab.errors import ConvergenceError, SingularConfigurationError, SingularityAbort
from curvlab.hamiltonians import build_deformed, extra_integral_ms, ms_sw, sw, type_i

X0 = PhaseState.from_lists([0.5, 0.7], [0.3, -0.2])


def oscillator(z=0.5, omega=1.0):
    params = ModelParams(z=z, b=(0.0, 0.0), omega=omega)
    return params, build_deformed(sw(params))


def test_integrator_spec_validation():
    with pytest.raises(ValueError):
        IntegratorSpec(method='leapfrog')
    with pytest.raises(ValueError):
        IntegratorSpec(t_end=0.0)
    with pytest.raises(ValueError):
        IntegratorSpec(dt=-1e-3)
    with pytest.raises(ValueError):
        IntegratorSpec(order=3)
    assert IntegratorSpec(dt=0.3, t_end=1.0).n_steps == 4
    assert IntegratorSpec(dt=0.1, t_end=1.0).n_steps == 10


def test_integrator_spec_roundtrip_dict():
    spec = IntegratorSpec(method='rk_adaptive', dt=0.01, t_end=3.0, rtol=1e-9)
    assert IntegratorSpec.from_dict(spec.to_dict()) == spec


@pytest.mark.parametrize('method', ['implicit_midpoint', 'rk_adaptive'])
def test_flat_free_motion_is_straight(method):
    h = build_deformed(type_i(ModelParams.flat(2)))
    x0 = PhaseState.from_lists([0.1, 0.2], [0.3, -0.1])
    traj = hamilton_flow(h, x0, IntegratorSpec(method=method, dt=0.01, t_end=5.0))
    expected = x0.q[None, :] + traj.times[:, None] * x0.p[None, :]
    np.testing.assert_allclose(traj.states[:, :2], expected, atol=1e-9)
    np.testing.assert_allclose(traj.states[:, 2:], np.tile(x0.p, (len(traj.times), 1)), atol=1e-12)
    assert traj.times[-1] == pytest.approx(5.0, rel=1e-15)


def test_midpoint_times_are_uniform():
    _, h = oscillator()
    traj = hamilton_flow(h, X0, IntegratorSpec(dt=0.3, t_end=1.0))
    np.testing.assert_allclose(traj.times, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert traj.stats.steps == 4


def test_type_i_invariants_conserved():
    z = 0.5
    params = ModelParams.flat(2, z=z)
    h = build_deformed(type_i(params))
    x0 = PhaseState.from_lists([0.5, 0.7], [0.03, -0.02])
    traj = hamilton_flow(h, x0, IntegratorSpec(dt=1e-3, t_end=20.0),
                         monitors=[left_integral_observable(params, 2)])
    summary = drift_report(traj)
    assert list(summary.drifts) == [h.name, 'C^(2)']
    assert summary.within(1e-6), summary.drifts


def test_ms_sw_invariants_conserved():
    params = ModelParams(z=0.3, b=(0.4, 0.0), omega=1.0)
    h = build_deformed(ms_sw(params))
    monitors = [left_integral_observable(params, 2), extra_integral_ms(2, params, with_sw=True)]
    traj = hamilton_flow(h, X0, IntegratorSpec(dt=1e-3, t_end=20.0), monitors=monitors)
    summary = drift_report(traj)
    assert len(summary.drifts) == 3
    assert summary.within(1e-6), summary.drifts


X3 = PhaseState.from_lists([0.5, 0.6, 0.7], [0.3, -0.2, 0.1])


def three_site_monitors(params):
    return [left_integral_observable(params, 2), left_integral_observable(params, 3),
            right_integral_observable(params, 2)]


@pytest.mark.parametrize('order', [2, 4])
def test_three_site_type_i_invariants_conserved(order):
    params = ModelParams(z=0.3, b=(0.4, 0.0, 0.0))
    h = build_deformed(type_i(params))
    traj = hamilton_flow(h, X3, IntegratorSpec(dt=1e-3, t_end=20.0, order=order),
                         monitors=three_site_monitors(params))
    summary = drift_report(traj)
    assert len(summary.drifts) == 4
    assert summary.within(1e-6), summary.drifts


def test_three_site_ms_sw_invariants_conserved():
    params = ModelParams(z=0.3, b=(0.4, 0.0, 0.0), omega=1.0)
    h = build_deformed(ms_sw(params))
    monitors = three_site_monitors(params) + [extra_integral_ms(3, params, with_sw=True)]
    traj = hamilton_flow(h, X3, IntegratorSpec(dt=1e-3, t_end=20.0), monitors=monitors)
    summary = drift_report(traj)
    assert len(summary.drifts) == 5
    assert summary.within(1e-6), summary.drifts


def test_three_site_ms_sw_plain_midpoint_drift_is_second_order():
    params = ModelParams(z=0.3, b=(0.4, 0.0, 0.0), omega=1.0)
    h = build_deformed(ms_sw(params))
    c3 = left_integral_observable(params, 3)
    drifts = []
    for dt in (2e-3, 1e-3):
        traj = hamilton_flow(h, X3, IntegratorSpec(dt=dt, t_end=20.0, order=2), monitors=[c3])
        drifts.append(drift_report(traj).drifts['C^(3)'])
    assert drifts[0] / drifts[1] == pytest.approx(4.0, rel=0.2)


def test_composition_is_fourth_order():
    _, h = oscillator()
    drifts = []
    for dt in (0.04, 0.02):
        traj = hamilton_flow(h, X0, IntegratorSpec(dt=dt, t_end=5.0, order=4))
        drifts.append(drift_report(traj).drifts[h.name])
    assert drifts[0] / drifts[1] > 10.0


def test_midpoint_energy_error_is_second_order():
    _, h = oscillator()
    drifts = []
    for dt in (0.02, 0.01):
        traj = hamilton_flow(h, X0, IntegratorSpec(dt=dt, t_end=5.0, order=2))
        drifts.append(drift_report(traj).drifts[h.name])
    assert drifts[0] / drifts[1] == pytest.approx(4.0, rel=0.2)


def test_midpoint_is_time_reversible():
    _, h = oscillator()
    spec = IntegratorSpec(dt=0.01, t_end=2.0)
    forward = hamilton_flow(h, X0, spec).final_state
    flipped = PhaseState(q=forward.q, p=-forward.p)
    back = hamilton_flow(h, flipped, spec).final_state
    np.testing.assert_allclose(back.q, X0.q, atol=1e-8)
    np.testing.assert_allclose(back.p, -X0.p, atol=1e-8)


def test_rk_and_midpoint_agree():
    _, h = oscillator()
    midpoint = hamilton_flow(h, X0, IntegratorSpec(dt=2.5e-4, t_end=1.0)).final_state
    rk = hamilton_flow(h, X0, IntegratorSpec(method='rk_adaptive', t_end=1.0)).final_state
    np.testing.assert_allclose(midpoint.vector(), rk.vector(), atol=1e-6)


def test_explicit_euler_drifts_where_midpoint_does_not(explicit_euler):
    _, h = oscillator()
    energies = explicit_euler(h, X0, 1e-2, 1000)
    euler_drift = np.max(np.abs(energies - energies[0]))
    traj = hamilton_flow(h, X0, IntegratorSpec(dt=1e-2, t_end=10.0))
    midpoint_drift = np.max(np.abs(traj.monitored[h.name] - traj.monitored[h.name][0]))
    assert euler_drift > 10.0 * midpoint_drift


def test_newton_failure_raises():
    _, h = oscillator()
    with pytest.raises(ConvergenceError) as info:
        hamilton_flow(h, X0, IntegratorSpec(dt=0.01, t_end=1.0, max_newton_iters=1))
    assert info.value.time == 0.0
    np.testing.assert_array_equal(info.value.last_state, X0.vector())


def wall_hamiltonian():
    def guard(q, margin):
        return 'hit the wall at q = 1' if q[0] > 1.0 else None
    return Observable('H', 1, lambda x: 0.5 * x[1] ** 2, guard)


@pytest.mark.parametrize('method', ['implicit_midpoint', 'rk_adaptive'])
def test_singularity_guard_aborts(method):
    x0 = PhaseState.from_lists([0.5], [1.0])
    with pytest.raises(SingularityAbort) as info:
        hamilton_flow(wall_hamiltonian(), x0, IntegratorSpec(method=method, dt=0.01, t_end=2.0))
    assert info.value.time == pytest.approx(0.5, abs=0.02)
    assert info.value.last_state[0] == pytest.approx(1.0, abs=0.02)


def test_singular_initial_state_rejected():
    h = build_deformed(type_i(ModelParams(z=0.2, b=(1.0, 0.0))))
    with pytest.raises(SingularConfigurationError):
        hamilton_flow(h, PhaseState.from_lists([0.0, 0.5], [0.1, 0.1]), IntegratorSpec())


def test_trajectory_table_layout():
    params, h = oscillator()
    traj = hamilton_flow(h, X0, IntegratorSpec(dt=0.1, t_end=0.5),
                         monitors=[left_integral_observable(params, 2)])
    assert traj.columns() == ['t', 'q1', 'q2', 'p1', 'p2', h.name, 'C^(2)']
    assert traj.table().shape == (6, 7)
    assert traj.n == 2


def test_trajectory_rejects_mismatched_monitor():
    with pytest.raises(ValueError):
        Trajectory(times=np.zeros(3), states=np.zeros((3, 2)),
                   monitored={'H': np.zeros(2)}, stats=StepStats(steps=2))


def test_constant_monitor_has_zero_drift():
    traj = Trajectory(times=np.arange(3.0), states=np.zeros((3, 2)),
                      monitored={'H': np.full(3, 2.5)}, stats=StepStats(steps=2))
    summary = drift_report(traj)
    assert summary.drifts == {'H': 0.0}
    assert summary.within()


def test_drift_is_relative_above_one():
    traj = Trajectory(times=np.arange(3.0), states=np.zeros((3, 2)),
                      monitored={'H': np.array([10.0, 10.5, 9.0]), 'C': np.array([0.1, 0.2, 0.1])},
                      stats=StepStats(steps=2))
    summary = drift_report(traj)
    assert summary.drifts['H'] == pytest.approx(0.1)
    assert summary.drifts['C'] == pytest.approx(0.1)
    assert summary.max_drift == pytest.approx(0.1)
    assert not summary.within(0.05)


def test_drift_summary_to_dict():
    summary = DriftSummary(drifts={'H': 1e-9}, t_end=1.0, method='implicit_midpoint',
                           stats=StepStats(steps=10, newton_mean=2.0, newton_max=3))
    d = summary.to_dict()
    assert d['max_drift'] == 1e-9
    assert d['stats']['newton_max'] == 3


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def oscillator_cell(index, z, omega, q1=0.5):
    def build():
        params, h = oscillator(z, omega)
        x0 = PhaseState.from_lists([q1, 0.7], [0.3, -0.2])
        return h, [left_integral_observable(params, 2)], x0
    return SweepCell(index=index, label={'z': z, 'omega': omega}, build=build)


def test_single_cell_matches_direct_run():
    spec = IntegratorSpec(dt=0.05, t_end=1.0)
    [result] = sweep([oscillator_cell(0, 0.5, 1.0)], spec, workers=1, progress=False)
    params, h = oscillator(0.5, 1.0)
    direct = drift_report(hamilton_flow(h, X0, spec, [left_integral_observable(params, 2)]))
    assert result.ok
    assert result.summary.to_dict() == direct.to_dict()


def test_sweep_is_deterministic_across_workers():
    spec = IntegratorSpec(dt=0.05, t_end=0.5)
    cells = [oscillator_cell(i, z, omega)
             for i, (z, omega) in enumerate((z, w) for z in (-0.4, 0.0, 0.3, 0.6) for w in (0.5, 1.5))]
    serial = sweep(cells, spec, workers=1, progress=False)
    parallel = sweep(cells, spec, workers=4, progress=False)
    assert [r.to_dict() for r in serial] == [r.to_dict() for r in parallel]
    assert [r.index for r in parallel] == list(range(8))


def test_sweep_isolates_failing_cells():
    spec = IntegratorSpec(dt=0.05, t_end=0.5)

    def singular():
        h = build_deformed(type_i(ModelParams(z=0.2, b=(1.0, 0.0))))
        return h, [], PhaseState.from_lists([0.0, 0.5], [0.1, 0.1])

    cells = [oscillator_cell(0, 0.5, 1.0), SweepCell(1, {'b1': 1.0}, singular),
             oscillator_cell(2, 0.2, 1.0)]
    results = sweep(cells, spec, workers=2, progress=False)
    assert [r.ok for r in results] == [True, False, True]
    assert results[1].error.startswith('SingularConfigurationError')
    assert results[1].to_dict()['summary'] is None


def test_worker_count(monkeypatch):
    assert worker_count(8, 3) == 3
    assert worker_count(0, 3) == 1
    monkeypatch.setenv('CURVLAB_THREADS', '2')
    assert worker_count(None, 10) == 2
