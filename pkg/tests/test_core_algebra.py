import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis.strategies import floats

from curvlab.core_algebra import (
    GeneratorTriple,
    ModelParams,
    PhaseState,
    casimir,
    classical_generators,
    classical_integrals,
    exponent_K,
    exponent_K_pair,
    exponent_Ktilde,
    exponent_Ktilde_pair,
    generators,
    partial_generators,
    sinc_hyp,
    universal_integrals,
)
from curvlab.diffobs import sample_states
from curvlab.errors import SingularConfigurationError


# ---------------------------------------------------------------------------
# sinc_hyp
# ---------------------------------------------------------------------------

def test_sinc_hyp_classical_limit():
    assert sinc_hyp(0.0, 3.7) == 1.0


def test_sinc_hyp_log2():
    assert sinc_hyp(1.0, math.log(2.0)) == pytest.approx(0.75 / math.log(2.0), rel=1e-15)


def test_sinc_hyp_series_branch_matches_direct():
    z = 1e-9
    direct = math.sinh(z) / z
    assert sinc_hyp(z, 1.0) == pytest.approx(direct, rel=1e-15)


@settings(max_examples=50, deadline=None)
@given(floats(min_value=-3.0, max_value=3.0))
def test_sinc_hyp_even_and_at_least_one(u):
    assert sinc_hyp(1.0, u) == pytest.approx(sinc_hyp(-1.0, u), rel=1e-15)
    assert sinc_hyp(1.0, u) >= 1.0


def test_sinc_hyp_array_input():
    out = sinc_hyp(0.5, np.array([0.0, 1.0, 2.0]))
    np.testing.assert_allclose(out, [1.0, math.sinh(0.5) / 0.5, math.sinh(1.0)], rtol=1e-15)


# ---------------------------------------------------------------------------
# Exponents
# ---------------------------------------------------------------------------

def test_exponent_K_direct():
    assert exponent_K(2, 3, (1.0, 2.0, 3.0)) == 8.0


def test_exponent_K_empty_sums():
    assert exponent_K(1, 1, (0.3, 0.7, 1.1)) == 0.0


def test_exponent_K_pair_is_sum(rng):
    q = rng.uniform(-1, 1, size=5)
    for i in range(1, 5):
        for j in range(i + 1, 6):
            for h in range(j, 6):
                expected = exponent_K(i, h, q) + exponent_K(j, h, q)
                assert exponent_K_pair(i, j, h, q) == pytest.approx(expected, abs=1e-15)


def test_exponent_K_pair_expanded_form(rng):
    q = rng.uniform(-1, 1, size=5)
    w = q * q
    expected = (-w[0] + w[2] + w[3] + w[4]) + (-w[0] - w[1] - w[2] + w[4])
    assert exponent_K_pair(2, 4, 5, q) == pytest.approx(expected, abs=1e-15)


def test_exponent_Ktilde(rng):
    q = rng.uniform(-1, 1, size=4)
    w = q * q
    assert exponent_Ktilde(3, 2, q) == pytest.approx(-w[1] + w[3], abs=1e-15)
    assert exponent_Ktilde(4, 4, q) == 0.0
    assert exponent_Ktilde_pair(2, 3, 1, q) == pytest.approx(
        exponent_Ktilde(2, 1, q) + exponent_Ktilde(3, 1, q), abs=1e-15)


@pytest.mark.parametrize('i,h', [(0, 2), (3, 2), (1, 4)])
def test_exponent_K_index_errors(i, h):
    with pytest.raises(IndexError):
        exponent_K(i, h, (1.0, 2.0, 3.0))


def test_exponent_pair_requires_ordered_indices():
    with pytest.raises(IndexError):
        exponent_K_pair(2, 2, 3, (1.0, 2.0, 3.0))


# ---------------------------------------------------------------------------
# Generators and Casimir
# ---------------------------------------------------------------------------

def test_generators_flat_limit():
    state = PhaseState.from_lists([1.0, 1.0], [1.0, 0.0])
    triple = generators(state, ModelParams.flat(2))
    assert (triple.jm, triple.jp, triple.j3) == (2.0, 1.0, 1.0)


def test_one_site_casimir_is_b1():
    state = PhaseState.from_lists([0.7], [0.4])
    params = ModelParams(z=0.3, b=(1.2,))
    assert casimir(generators(state, params), params.z) == pytest.approx(1.2, rel=1e-13)


@pytest.mark.parametrize('z', [-1.0, -0.3, 0.0, 0.3, 1.0])
def test_one_site_casimir_any_state(z, rng):
    params = ModelParams(z=z, b=(0.8,))
    for _ in range(10):
        state = PhaseState.from_lists(rng.uniform(0.2, 1.2, 1), rng.uniform(-1, 1, 1))
        assert casimir(generators(state, params), z) == pytest.approx(0.8, rel=1e-12)


def test_two_site_generators_match_explicit_forms(rng):
    z = 0.5
    params = ModelParams.flat(2, z=z)
    for _ in range(10):
        q = rng.uniform(0.2, 1.2, 2)
        p = rng.uniform(-1, 1, 2)
        s1 = math.sinh(z * q[0] ** 2) / (z * q[0] ** 2)
        s2 = math.sinh(z * q[1] ** 2) / (z * q[1] ** 2)
        jp = s1 * p[0] ** 2 * math.exp(z * q[1] ** 2) + s2 * p[1] ** 2 * math.exp(-z * q[0] ** 2)
        j3 = s1 * q[0] * p[0] * math.exp(z * q[1] ** 2) + s2 * q[1] * p[1] * math.exp(-z * q[0] ** 2)
        triple = generators(PhaseState(q=q, p=p), params)
        assert triple.jm == pytest.approx(q @ q, rel=1e-14)
        assert triple.jp == pytest.approx(jp, rel=1e-14)
        assert triple.j3 == pytest.approx(j3, rel=1e-14)


def test_casimir_classical_formula():
    assert casimir(GeneratorTriple(jm=1.0, jp=1.0, j3=1.0), 0.0) == 0.0


def test_casimir_continuous_at_zero():
    triple = GeneratorTriple(jm=0.9, jp=1.7, j3=0.4)
    assert abs(casimir(triple, 1e-8) - casimir(triple, 0.0)) < 1e-7


def test_zero_z_dispatches_to_classical():
    b = (0.3, 0.0, 1.1)
    params = ModelParams(z=0.0, b=b)
    for state in sample_states(3, 5, seed=3):
        assert generators(state, params) == classical_generators(state, b)
        assert universal_integrals(state, params) == classical_integrals(state, b)


def test_classical_integrals_match_angular_momentum_form():
    state = PhaseState.from_lists([0.5, 0.9, 0.7], [0.1, -0.4, 0.6])
    b = (0.2, 0.5, 0.0)
    q, p = state.q, state.p
    c2 = (q[0] * p[1] - q[1] * p[0]) ** 2 + b[0] * q[1] ** 2 / q[0] ** 2 + b[1] * q[0] ** 2 / q[1] ** 2 + b[0] + b[1]
    assert classical_integrals(state, b).left_at(2) == pytest.approx(c2, rel=1e-14)


def test_singular_configuration_raises():
    state = PhaseState.from_lists([0.0, 0.5], [0.1, 0.2])
    with pytest.raises(SingularConfigurationError) as info:
        generators(state, ModelParams(z=0.2, b=(1.0, 0.0)))
    assert info.value.site == 1


def test_zero_q_allowed_without_centrifugal_term():
    state = PhaseState.from_lists([0.0, 0.5], [0.1, 0.2])
    generators(state, ModelParams(z=0.2, b=(0.0, 1.0)))


def test_phase_state_validation():
    with pytest.raises(ValueError):
        PhaseState.from_lists([0.1, 0.2], [0.3])
    with pytest.raises(ValueError):
        PhaseState.from_lists([float('nan')], [0.3])


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(kappa2=0.0)
    with pytest.raises(ValueError):
        ModelParams(omega=-1.0)


def test_model_params_roundtrip_dict():
    params = ModelParams(z=-0.4, b=(0.1, 0.2), kappa2=-1.0, omega=2.0, k=0.5)
    assert ModelParams.from_dict(params.to_dict()) == params


# ---------------------------------------------------------------------------
# Universal integrals
# ---------------------------------------------------------------------------

@pytest.mark.parametrize('z', [-0.7, 0.0, 0.4])
def test_left_integrals_are_partial_casimirs(z):
    params = ModelParams(z=z, b=(0.3, 0.0, 0.8, 0.2))
    for state in sample_states(4, 10, seed=5):
        integrals = universal_integrals(state, params)
        for m in range(2, 5):
            expected = casimir(partial_generators(state, params, m), z)
            assert integrals.left_at(m) == pytest.approx(expected, rel=1e-12)


def test_two_site_casimir_explicit_form():
    z = 0.4
    b = (0.6, 1.3)
    params = ModelParams(z=z, b=b)
    for state in sample_states(2, 50, seed=17):
        q, p = state.q, state.p
        w = q * q
        s = np.sinh(z * w) / (z * w)
        expected = (s[0] * s[1] * (q[0] * p[1] - q[1] * p[0]) ** 2
                    + b[0] * np.sinh(z * w[1]) / np.sinh(z * w[0])
                    + b[1] * np.sinh(z * w[0]) / np.sinh(z * w[1])) * np.exp(z * (w[1] - w[0]))
        expected += b[0] * np.exp(2 * z * w[1]) + b[1] * np.exp(-2 * z * w[0])
        assert universal_integrals(state, params).left_at(2) == pytest.approx(expected, rel=1e-13)


def test_three_site_integrals_explicit_forms():
    z = 0.2
    params = ModelParams.flat(3, z=z)
    for state in sample_states(3, 50, seed=19):
        q, p = state.q, state.p
        w = q * q
        s = np.sinh(z * w) / (z * w)

        def l(i, j):
            return s[i] * s[j] * (q[i] * p[j] - q[j] * p[i]) ** 2

        c2 = l(0, 1) * np.exp(z * (w[1] - w[0]))
        c3 = (l(0, 1) * np.exp(z * (w[1] - w[0] + 2 * w[2]))
              + l(0, 2) * np.exp(z * (w[2] - w[0]))
              + l(1, 2) * np.exp(z * (w[2] - 2 * w[0] - w[1])))
        c2r = l(1, 2) * np.exp(z * (w[2] - w[1]))
        integrals = universal_integrals(state, params)
        assert integrals.left_at(2) == pytest.approx(c2, rel=1e-13)
        assert integrals.left_at(3) == pytest.approx(c3, rel=1e-13)
        assert integrals.right_at(2) == pytest.approx(c2r, rel=1e-13)


def test_vanishing_angular_momentum_gives_zero():
    state = PhaseState.from_lists([0.4, 0.8], [0.2, 0.4])
    assert universal_integrals(state, ModelParams.flat(2, z=0.6)).left_at(2) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize('z', [-1.0, 0.3])
def test_top_left_equals_top_right(z):
    params = ModelParams(z=z, b=(0.1, 0.5, 0.0, 0.9, 0.2))
    for state in sample_states(5, 10, seed=23):
        integrals = universal_integrals(state, params)
        assert integrals.left_at(5) == pytest.approx(integrals.right_at(5), rel=1e-12)


@pytest.mark.parametrize('z', [-0.5, 0.0, 0.6])
def test_right_integrals_from_reversed_chain(z):
    params = ModelParams(z=z, b=(0.1, 0.5, 0.0, 0.9))
    for state in sample_states(4, 10, seed=29):
        right = universal_integrals(state, params)
        mirrored = universal_integrals(state.reversed(), params.reversed().with_z(-z))
        for m in range(2, 5):
            assert right.right_at(m) == pytest.approx(mirrored.left_at(m), rel=1e-12)


def test_deformed_integrals_converge_linearly_to_classical():
    b = (0.3, 0.7, 0.2)
    state = sample_states(3, 1, seed=31)[0]
    classical = universal_integrals(state, ModelParams(z=0.0, b=b)).left_at(3)
    errors = [abs(universal_integrals(state, ModelParams(z=z, b=b)).left_at(3) - classical)
              for z in (1e-4, 1e-6)]
    slope = math.log10(errors[0] / errors[1]) / 2.0
    assert slope == pytest.approx(1.0, rel=0.1)


def test_integral_set_index_errors():
    integrals = universal_integrals(sample_states(3, 1, seed=1)[0], ModelParams.flat(3, z=0.1))
    with pytest.raises(IndexError):
        integrals.left_at(1)
    with pytest.raises(IndexError):
        integrals.right_at(4)
