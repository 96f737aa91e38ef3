import math

import jax.numpy as jnp
import numpy as np
import pytest

from curvlab.core_algebra import ModelParams, PhaseState
from curvlab.diffobs import poisson_bracket, sample_states, universal_integral_observables
from curvlab.errors import DomainError, SingularConfigurationError
from curvlab.hamiltonians import (
    ClassicalSystem,
    DeformedFamily,
    ambient_coordinates,
    build_classical,
    build_deformed,
    conformal_factor,
    extra_integral_ms,
    flat_counterpart,
    kc,
    ms,
    ms_sw,
    potential_array,
    sw,
    type_i,
)


def test_flat_free_particle():
    h = build_deformed(type_i(ModelParams.flat(2)))
    assert h(PhaseState.from_lists([1.0, 1.0], [1.0, 0.0])) == 0.5


def test_classical_limit_matches_explicit_form(states3):
    b = (0.3, 0.0, 0.7)
    params = ModelParams(z=0.0, b=b, omega=1.5)
    h = build_deformed(sw(params))
    for state in states3[:5]:
        q, p = state.q, state.p
        expected = 0.5 * p @ p + 1.5 * q @ q + 0.3 / (2 * q[0] ** 2) + 0.7 / (2 * q[2] ** 2)
        assert h(state) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize('kind', ['identity', 'exp_plus', 'exp_minus'])
def test_builtin_factors_are_one_at_zero(kind):
    assert float(conformal_factor(kind)(jnp.asarray(0.0))) == 1.0


def test_user_factor_must_be_one_at_zero():
    with pytest.raises(ValueError):
        DeformedFamily('user', 'none', ModelParams.flat(2), f=lambda x: 2.0 + x)
    DeformedFamily('user', 'none', ModelParams.flat(2), f=lambda x: jnp.cosh(x))


def test_unknown_kinds_rejected():
    with pytest.raises(ValueError):
        DeformedFamily('cubic', 'none', ModelParams.flat(2))
    with pytest.raises(ValueError):
        DeformedFamily('identity', 'user', ModelParams.flat(2))


def test_family_names():
    params = ModelParams.flat(2, z=0.3)
    assert ms(params).name == 'H[exp_plus,none]'
    assert ms_sw(params).name == 'H[exp_plus,sw]*'


def test_sw_potential_converges_to_oscillator():
    jm, omega = 1.5, 2.0
    errors = []
    for z in (1e-2, 1e-3, 1e-4):
        u = float(potential_array('sw', jnp.asarray(jm), ModelParams(z=z, omega=omega)))
        errors.append(abs(u - 3.0))
    assert float(potential_array('sw', jnp.asarray(jm), ModelParams(z=0.0, omega=omega))) == 3.0
    # at least linear; sinh is odd so the error is in fact O(z^2)
    assert math.log10(errors[0] / errors[1]) > 0.9
    assert math.log10(errors[1] / errors[2]) > 0.9


def test_kc_potential_limit():
    u0 = float(potential_array('kc', jnp.asarray(4.0), ModelParams(z=0.0, k=1.0)))
    assert u0 == pytest.approx(-0.5, rel=1e-15)
    u = float(potential_array('kc', jnp.asarray(4.0), ModelParams(z=1e-6, k=1.0)))
    assert u == pytest.approx(-0.5, abs=1e-5)


def test_kc_potential_direct_form():
    z, jm, k = 0.3, 2.0, 1.7
    direct = -k * math.sqrt(2 * z / (math.exp(2 * z * jm) - 1)) * math.exp(2 * z * jm)
    assert float(potential_array('kc', jnp.asarray(jm), ModelParams(z=z, k=k))) == pytest.approx(direct, rel=1e-13)


def test_kc_hamiltonian_guard():
    h = build_deformed(kc(ModelParams.flat(2, z=0.2, k=1.0)))
    with pytest.raises(SingularConfigurationError):
        h(PhaseState.from_lists([0.0, 0.0], [0.1, 0.1]))


def test_dressed_form():
    params = ModelParams(z=0.4, b=(0.0, 0.0), omega=1.0)
    state = PhaseState.from_lists([0.5, 0.7], [0.2, -0.3])
    undressed = build_deformed(DeformedFamily('exp_plus', 'sw', params))
    dressed = build_deformed(ms_sw(params))
    jm = 0.74
    u = math.sinh(0.4 * jm) / 0.4
    assert dressed(state) - undressed(state) == pytest.approx(u * (math.exp(0.4 * jm) - 1.0), rel=1e-12)


def test_ms_extra_integral_commutes():
    params = ModelParams.flat(2, z=0.6)
    h = build_deformed(ms(params))
    i_z = extra_integral_ms(2, params)
    for state in sample_states(2, 30, seed=13):
        assert abs(poisson_bracket(h, i_z, state)) < 1e-10


@pytest.mark.parametrize('n', [3, 4])
def test_ms_extra_integral_commutes_any_dimension(n):
    params = ModelParams(z=-0.4, b=tuple(0.2 * (i + 1) for i in range(n)))
    h = build_deformed(ms(params))
    i_z = extra_integral_ms(n, params)
    for state in sample_states(n, 10, seed=n):
        assert abs(poisson_bracket(h, i_z, state)) < 1e-10


def test_ms_sw_extra_integral_commutes():
    params = ModelParams(z=0.3, b=(0.5, 0.0), omega=1.0)
    h = build_deformed(ms_sw(params))
    i_z = extra_integral_ms(2, params, with_sw=True)
    for state in sample_states(2, 30, seed=17):
        assert abs(poisson_bracket(h, i_z, state)) < 1e-10


def test_ms_extra_integral_zero_at_rest():
    i_z = extra_integral_ms(2, ModelParams.flat(2, z=0.5))
    assert i_z(PhaseState.from_lists([0.7, 0.3], [0.0, 0.9])) == 0.0


def test_ms_sw_extra_integral_refuses_zero_z():
    with pytest.raises(DomainError):
        extra_integral_ms(2, ModelParams(z=0.0, b=(0.0, 0.0), omega=1.0), with_sw=True)


def test_extra_integral_dimension_checks():
    with pytest.raises(ValueError):
        extra_integral_ms(3, ModelParams.flat(2, z=0.1))
    with pytest.raises(ValueError):
        extra_integral_ms(1, ModelParams.flat(1, z=0.1))


# ---------------------------------------------------------------------------
# Classical curved systems
# ---------------------------------------------------------------------------

def test_beltrami_flat_free():
    h, extras = build_classical(ClassicalSystem('beltrami', 0.0, 'free', (0.0, 0.0)))
    state = PhaseState.from_lists([0.4, 0.9], [0.3, -0.7])
    assert h(state) == pytest.approx(0.5 * (0.09 + 0.49), rel=1e-15)
    assert len(extras) == 2


@pytest.mark.parametrize('chart,kappa', [('beltrami', 0.5), ('beltrami', -0.4),
                                         ('poincare', 0.6), ('poincare', -0.4)])
def test_sw_integrals_commute(chart, kappa):
    h, extras = build_classical(ClassicalSystem(chart, kappa, 'sw', (0.2, 0.3, 0.4), omega=1.0))
    assert [e.name for e in extras] == [f'I_{i}^{chart[0].upper()}' for i in (1, 2, 3)]
    for state in sample_states(3, 30, seed=21, q_range=(0.1, 0.6)):
        for extra in extras:
            assert abs(poisson_bracket(h, extra, state)) < 1e-10


@pytest.mark.parametrize('chart,kappa', [('beltrami', 0.5), ('beltrami', -0.4),
                                         ('poincare', 0.6), ('poincare', -0.4)])
def test_kc_runge_lenz_commutes(chart, kappa):
    h, extras = build_classical(ClassicalSystem(chart, kappa, 'kc', (0.0, 0.7, 0.9), k=1.0))
    assert [e.name for e in extras] == [f'L_1^{chart[0].upper()}']
    for state in sample_states(3, 30, seed=23, q_range=(0.1, 0.6)):
        assert abs(poisson_bracket(h, extras[0], state)) < 1e-10


@pytest.mark.parametrize('kappa', [0.6, -0.3])
def test_poincare_free_integrals_commute(kappa):
    h, extras = build_classical(ClassicalSystem('poincare', kappa, 'free', (0.0, 0.0, 0.0)))
    for state in sample_states(3, 20, seed=29, q_range=(0.1, 0.6)):
        for extra in extras:
            assert abs(poisson_bracket(h, extra, state)) < 1e-10


def test_classical_universal_integrals_commute():
    spec = ClassicalSystem('poincare', 0.8, 'evans', (0.1, 0.2, 0.3), evans=lambda r2: jnp.log1p(r2))
    h, extras = build_classical(spec)
    assert extras == []
    integrals = universal_integral_observables(ModelParams(z=0.0, b=spec.b), include_top_right=True)
    for state in sample_states(3, 10, seed=31, q_range=(0.1, 0.6)):
        for c in integrals:
            assert abs(poisson_bracket(h, c, state)) < 1e-10


def test_kc_needs_a_free_site():
    with pytest.raises(DomainError):
        build_classical(ClassicalSystem('beltrami', 0.1, 'kc', (0.5, 0.5), k=1.0))


def test_classical_system_validation():
    with pytest.raises(ValueError):
        ClassicalSystem('gnomonic', 0.1)
    with pytest.raises(ValueError):
        ClassicalSystem('beltrami', 0.1, 'evans')


def test_beltrami_chart_guard():
    h, _ = build_classical(ClassicalSystem('beltrami', -1.0, 'free', (0.0, 0.0)))
    with pytest.raises(SingularConfigurationError):
        h(PhaseState.from_lists([1.0, 1.0], [0.0, 0.0]))


@pytest.mark.parametrize('chart,expected', [('poincare', (6.0, 8.0)), ('beltrami', (3.0, 4.0))])
def test_ambient_coordinates_flat(chart, expected):
    np.testing.assert_allclose(ambient_coordinates(chart, 0.0, (3.0, 4.0)), expected)


def test_ambient_coordinates_curved():
    np.testing.assert_allclose(ambient_coordinates('beltrami', 1.0, (1.0, 0.0)), (1 / math.sqrt(2), 0.0))
    np.testing.assert_allclose(ambient_coordinates('poincare', -0.25, (1.0, 1.0)), (4.0, 4.0))


def test_ambient_coordinates_domain():
    with pytest.raises(DomainError):
        ambient_coordinates('beltrami', -1.0, (1.0, 0.0))
    with pytest.raises(ValueError):
        ambient_coordinates('gnomonic', 0.0, (1.0, 0.0))


@pytest.mark.parametrize('family', [type_i, sw, kc])
def test_small_z_matches_flat_counterpart(family):
    params = ModelParams(z=1e-6, b=(0.3, 0.0, 0.5), omega=2.0, k=1.0)
    spec = family(params)
    deformed = build_deformed(spec)
    classical, _ = build_classical(flat_counterpart(spec))
    for state in sample_states(3, 10, seed=37):
        assert deformed(state) == pytest.approx(classical(state), rel=1e-5)


def test_flat_counterpart_sw_frequency():
    counterpart = flat_counterpart(sw(ModelParams(z=0.2, b=(0.0, 0.0), omega=4.0)))
    assert counterpart.potential == 'sw'
    assert counterpart.omega == 2.0
    assert counterpart.kappa == 0.0
