"""Differentiable observables and the Poisson-bracket engine.

An Observable wraps a jax-traceable scalar function of the flat phase-space
vector x = (q_1..q_N, p_1..p_N). Gradients come from forward-mode
algorithmic differentiation (``jax.jacfwd``) and are exact to machine
precision; finite differences are only used by the tests as an oracle.

Batches of observables are evaluated together: one compiled function returns
the values and the M x 2N Jacobian at every sampled state, from which all
pairwise brackets follow as Jq Jp^T - Jp Jq^T.

Example usage:
    from curvlab.core_algebra import ModelParams
    from curvlab.diffobs import generator_observables, poisson_bracket, sample_states

    params = ModelParams.flat(2, z=0.5)
    jm, jp, j3, cas = generator_observables(params)
    state = sample_states(2, 1, seed=0)[0]
    print(poisson_bracket(jm, jp, state) - 4 * j3(state))   # ~0
"""

import functools
import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import jax
import jax.numpy as jnp
import numpy as np

from curvlab.core_algebra import (
    ModelParams,
    PhaseState,
    casimir_array,
    check_regular,
    generator_arrays,
    left_integral_array,
    right_integral_array,
    shc,
    split_vector,
)
from curvlab.errors import SingularConfigurationError

logger = logging.getLogger(__name__)

# Sampling box for random regular states
Q_BOX = (0.2, 1.2)
P_BOX = (-1.0, 1.0)

# Relative singular-value threshold for numerical rank
RANK_THRESHOLD = 1e-8

DEFAULT_TOLERANCE = 1e-10

Guard = Callable[[np.ndarray, float], Optional[str]]


def combine_guards(*guards: Optional[Guard]) -> Optional[Guard]:
    active = [g for g in guards if g is not None]
    if not active:
        return None
    if len(active) == 1:
        return active[0]

    def guard(q: np.ndarray, margin: float) -> Optional[str]:
        for g in active:
            msg = g(q, margin)
            if msg is not None:
                return msg
        return None
    return guard


def centrifugal_guard(b: Sequence[float]) -> Optional[Guard]:
    """Guard rejecting q_i near 0 where b_i != 0 (None if all b_i vanish)."""
    b = tuple(b)
    if not any(bi != 0.0 for bi in b):
        return None
    return lambda q, margin: check_regular(q, b, margin)


@dataclass(frozen=True, eq=False)
class Observable:
    """Differentiable scalar function on a 2N-dimensional phase space.

    Attributes:
        name: label used in reports and CSV headers
        n: number of degrees of freedom N
        fn: jax-traceable map from the flat 2N vector to a scalar
        guard: optional check returning a diagnostic at singular points
    """
    name: str
    n: int
    fn: Callable
    guard: Optional[Guard] = None
    _value: Callable = field(init=False, repr=False)
    _grad: Callable = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, '_value', jax.jit(self.fn))
        object.__setattr__(self, '_grad', jax.jit(jax.jacfwd(self.fn)))

    def check(self, state: PhaseState, margin: float = 0.0):
        """Raise SingularConfigurationError if the state is singular for this observable."""
        if state.n != self.n:
            raise ValueError(f'{self.name}: expected N={self.n}, got {state.n}')
        if self.guard is not None:
            msg = self.guard(state.q, margin)
            if msg is not None:
                raise SingularConfigurationError(f'{self.name}: {msg}')

    def __call__(self, state: PhaseState) -> float:
        self.check(state)
        return float(self._value(jnp.asarray(state.vector())))

    def gradient(self, state: PhaseState) -> np.ndarray:
        """Exact gradient (d/dq_1..d/dq_N, d/dp_1..d/dp_N)."""
        self.check(state)
        return np.asarray(self._grad(jnp.asarray(state.vector())))

    def renamed(self, name: str) -> 'Observable':
        return Observable(name, self.n, self.fn, self.guard)

    def _binary(self, other, op, symbol: str) -> 'Observable':
        if isinstance(other, Observable):
            if other.n != self.n:
                raise ValueError('observables live on different phase spaces')
            f, g = self.fn, other.fn
            return Observable(f'({self.name}{symbol}{other.name})', self.n,
                              lambda x: op(f(x), g(x)),
                              combine_guards(self.guard, other.guard))
        c = float(other)
        f = self.fn
        return Observable(f'({self.name}{symbol}{c:g})', self.n,
                          lambda x: op(f(x), c), self.guard)

    def __add__(self, other):
        return self._binary(other, lambda a, b: a + b, '+')

    def __sub__(self, other):
        return self._binary(other, lambda a, b: a - b, '-')

    def __mul__(self, other):
        return self._binary(other, lambda a, b: a * b, '*')

    __rmul__ = __mul__
    __radd__ = __add__

    def bracket(self, other: 'Observable') -> 'Observable':
        """The observable {self, other}, itself differentiable."""
        f, g, n = self.fn, other.fn, self.n

        def fn(x):
            df = jax.jacfwd(f)(x)
            dg = jax.jacfwd(g)(x)
            return jnp.dot(df[:n], dg[n:]) - jnp.dot(dg[:n], df[n:])
        return Observable(f'{{{self.name},{other.name}}}', n, fn,
                          combine_guards(self.guard, other.guard))


# ---------------------------------------------------------------------------
# Observables of the algebra
# ---------------------------------------------------------------------------

def generator_observables(params: ModelParams) -> Tuple[Observable, Observable, Observable, Observable]:
    """(J-, J+, J3, Casimir) of the N-site realization as observables."""
    z, b, n = params.z, params.b, params.n
    guard = centrifugal_guard(b)

    def gens(x):
        q, p = split_vector(x)
        return generator_arrays(q, p, z, b)

    jm = Observable('J-', n, lambda x: gens(x)[0], None)
    jp = Observable('J+', n, lambda x: gens(x)[1], guard)
    j3 = Observable('J3', n, lambda x: gens(x)[2], None)
    cas = Observable('C', n, lambda x: casimir_array(*gens(x), z), guard)
    return jm, jp, j3, cas


def left_integral_observable(params: ModelParams, m: int) -> Observable:
    """C_z^(m) as an observable."""
    if not 2 <= m <= params.n:
        raise IndexError(f'left integral m={m} needs 2 <= m <= {params.n}')
    z, b = params.z, params.b

    def fn(x):
        q, p = split_vector(x)
        return left_integral_array(q, p, z, b, m)
    return Observable(f'C^({m})', params.n, fn, centrifugal_guard(b[:m]))


def right_integral_observable(params: ModelParams, m: int) -> Observable:
    """C_{z,(m)} as an observable."""
    if not 2 <= m <= params.n:
        raise IndexError(f'right integral m={m} needs 2 <= m <= {params.n}')
    z, b, n = params.z, params.b, params.n

    def fn(x):
        q, p = split_vector(x)
        return right_integral_array(q, p, z, b, m)
    return Observable(f'C_({m})', n, fn, centrifugal_guard(b[n - m:]))


def universal_integral_observables(params: ModelParams, include_top_right: bool = False) -> List[Observable]:
    """Left integrals C^(2..N) then right integrals C_(2..N-1).

    C_(N) coincides with C^(N) and is only included on request.
    """
    n = params.n
    obs = [left_integral_observable(params, m) for m in range(2, n + 1)]
    top = n + 1 if include_top_right else n
    obs += [right_integral_observable(params, m) for m in range(2, top)]
    return obs


# ---------------------------------------------------------------------------
# Sampling and batched evaluation
# ---------------------------------------------------------------------------

def sample_array(n: int, count: int, seed: int,
                 q_range: Tuple[float, float] = Q_BOX,
                 p_range: Tuple[float, float] = P_BOX) -> np.ndarray:
    """(count, 2N) array of states drawn uniformly from the sampling box."""
    rng = np.random.default_rng(seed)
    q = rng.uniform(q_range[0], q_range[1], size=(count, n))
    p = rng.uniform(p_range[0], p_range[1], size=(count, n))
    return np.concatenate([q, p], axis=1)


def sample_states(n: int, count: int, seed: int, **kwargs) -> List[PhaseState]:
    return [PhaseState.from_vector(x) for x in sample_array(n, count, seed, **kwargs)]


@functools.lru_cache(maxsize=128)
def _compiled_batch(observables: Tuple[Observable, ...]):
    fns = [o.fn for o in observables]

    def stacked(x):
        return jnp.stack([jnp.asarray(f(x), dtype=float) for f in fns])

    def values_and_jacobian(x):
        return stacked(x), jax.jacfwd(stacked)(x)

    logger.debug('compiling batch of %d observables', len(fns))
    return jax.jit(jax.vmap(values_and_jacobian))


def evaluate_batch(observables: Sequence[Observable], states: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Values (S, M) and Jacobians (S, M, 2N) of M observables at S states.

    Raises:
        SingularConfigurationError: if any state is singular for any observable
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    for x in states:
        state = PhaseState.from_vector(x)
        for obs in observables:
            obs.check(state)
    values, jac = _compiled_batch(tuple(observables))(jnp.asarray(states))
    return np.asarray(values), np.asarray(jac)


def bracket_tensor(jac: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """All pairwise brackets from Jacobians, plus their roundoff scale.

    Args:
        jac: (S, M, 2N) Jacobians

    Returns:
        (brackets, scale), each (S, M, M); brackets[s, a, b] = {A_a, A_b}
    """
    n = jac.shape[-1] // 2
    jq, jp = jac[..., :n], jac[..., n:]
    brackets = np.einsum('sai,sbi->sab', jq, jp) - np.einsum('sbi,sai->sab', jq, jp)
    scale = (np.einsum('sai,sbi->sab', np.abs(jq), np.abs(jp))
             + np.einsum('sbi,sai->sab', np.abs(jq), np.abs(jp)))
    return brackets, scale


def poisson_bracket(a: Observable, b: Observable, state: PhaseState) -> float:
    """Canonical bracket {a,b} = sum_i da/dq_i db/dp_i - db/dq_i da/dp_i."""
    ga = a.gradient(state)
    gb = b.gradient(state)
    n = state.n
    return float(np.dot(ga[:n], gb[n:]) - np.dot(gb[:n], ga[n:]))


def independence_rank(observables: Sequence[Observable], state: PhaseState) -> int:
    """Numerical rank of the M x 2N Jacobian of the observables at a state."""
    if not observables:
        raise ValueError('independence_rank needs at least one observable')
    _, jac = evaluate_batch(observables, state.vector()[None, :])
    sv = np.linalg.svd(jac[0], compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > RANK_THRESHOLD * sv[0]))


def rank_check(observables: Sequence[Observable], states: np.ndarray, expected: int) -> dict:
    """Independence rank at each state compared with the expected count."""
    ranks = [independence_rank(observables, PhaseState.from_vector(x))
             for x in np.atleast_2d(states)]
    return {'observables': [o.name for o in observables], 'expected': expected,
            'ranks': ranks, 'passed': all(r == expected for r in ranks)}


# ---------------------------------------------------------------------------
# Algebra verification
# ---------------------------------------------------------------------------

@dataclass
class BracketCheck:
    """One verified relation {left, right} = expected over all samples.

    max_deviation is the pass criterion: |{A,B} - expected| divided by
    max(1, S), S being the sum of absolute gradient products in the
    bracket. max_abs_deviation is the same maximum left unscaled.
    """
    left: str
    right: str
    expected: str
    max_deviation: float
    tolerance: float
    max_abs_deviation: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.max_deviation < self.tolerance)

    def to_dict(self) -> dict:
        return {'pair': [self.left, self.right], 'expected': self.expected,
                'max_deviation': self.max_deviation,
                'max_abs_deviation': self.max_abs_deviation, 'tolerance': self.tolerance,
                'passed': self.passed}


@dataclass
class BracketReport:
    """Outcome of a bracket-verification run."""
    params: dict
    n_samples: int
    seed: int
    checks: List[BracketCheck] = field(default_factory=list)
    ranks: List[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (all(c.passed for c in self.checks)
                and all(r['passed'] for r in self.ranks))

    def failures(self) -> List[BracketCheck]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {'params': self.params, 'n_samples': self.n_samples, 'seed': self.seed,
                'passed': self.passed,
                'checks': [c.to_dict() for c in self.checks],
                'ranks': self.ranks}

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def check_relations(observables: Sequence[Observable], states: np.ndarray,
                    relations: Sequence[Tuple[int, int, str, Callable[[np.ndarray], np.ndarray]]],
                    tolerance: float = DEFAULT_TOLERANCE) -> List[BracketCheck]:
    """Check bracket relations {A_i, A_j} = expected(values) over a batch.

    Each relation is (i, j, label, expected) where expected maps the (S, M)
    value array to the (S,) expected bracket. Deviations are divided by
    max(1, scale) with scale the bracket's own roundoff magnitude.
    """
    values, jac = evaluate_batch(observables, states)
    brackets, scale = bracket_tensor(jac)
    checks = []
    for i, j, label, expected in relations:
        raw = np.abs(brackets[:, i, j] - expected(values))
        dev = raw / np.maximum(1.0, scale[:, i, j])
        checks.append(BracketCheck(observables[i].name, observables[j].name, label,
                                   float(dev.max()), tolerance, float(raw.max())))
    return checks


def _zero(values: np.ndarray) -> np.ndarray:
    return np.zeros(values.shape[0])


def verify_algebra(params: ModelParams, n_samples: int, seed: int,
                   hamiltonian: Optional[Observable] = None,
                   tolerance: float = DEFAULT_TOLERANCE,
                   extras: Sequence[Observable] = ()) -> BracketReport:
    """Check the deformed algebra, Casimir and integral brackets on random states.

    Checked relations:
        {J3,J+} = 2 J+ cosh(z J-), {J3,J-} = -2 sinh(z J-)/z, {J-,J+} = 4 J3
        {C, J_l} = 0 and {C^(m), J_l} = {C_(m), J_l} = 0
        involution inside the left chain and inside the right chain
        {H, C}, {H, C^(m)}, {H, C_(m)} = 0 (default H = J+/2)
        {H, I} = 0 for every extra integral I

    Args:
        params: model parameters (N taken from len(b))
        n_samples: number of random states (>= 1)
        seed: RNG seed for the sampling box
        hamiltonian: Hamiltonian to test against the integrals
        tolerance: pass threshold on the scaled deviation
        extras: system-specific integrals of the Hamiltonian

    Returns:
        BracketReport with one BracketCheck per relation
    """
    if n_samples < 1:
        raise ValueError('n_samples must be >= 1')
    z, n = params.z, params.n
    jm, jp, j3, cas = generator_observables(params)
    if hamiltonian is None:
        hamiltonian = (0.5 * jp).renamed('H')
    left = [left_integral_observable(params, m) for m in range(2, n + 1)]
    right = [right_integral_observable(params, m) for m in range(2, n)]
    observables = [jm, jp, j3, cas, hamiltonian] + left + right + list(extras)
    i_jm, i_jp, i_j3, i_cas, i_h = range(5)
    i_left = list(range(5, 5 + len(left)))
    i_right = list(range(5 + len(left), 5 + len(left) + len(right)))
    i_extra = list(range(5 + len(left) + len(right), len(observables)))

    def sinh_over_z(v):
        return v[:, i_jm] * np.asarray(shc(z * v[:, i_jm]))

    relations = [
        (i_j3, i_jp, '2 J+ cosh(z J-)', lambda v: 2.0 * v[:, i_jp] * np.cosh(z * v[:, i_jm])),
        (i_j3, i_jm, '-2 sinh(z J-)/z', lambda v: -2.0 * sinh_over_z(v)),
        (i_jm, i_jp, '4 J3', lambda v: 4.0 * v[:, i_j3]),
    ]
    for c in [i_cas] + i_left + i_right:
        for g in (i_jm, i_jp, i_j3):
            relations.append((c, g, '0', _zero))
    for chain in (i_left, i_right):
        for a_pos, a in enumerate(chain):
            for b in chain[a_pos + 1:]:
                relations.append((a, b, '0', _zero))
    for c in [i_cas] + i_left + i_right + i_extra:
        relations.append((i_h, c, '0', _zero))

    states = sample_array(n, n_samples, seed)
    checks = check_relations(observables, states, relations, tolerance)
    report = BracketReport(params=params.to_dict(), n_samples=n_samples, seed=seed,
                           checks=checks)
    logger.info('verify_algebra N=%d z=%g: %d checks, %d failed',
                n, z, len(checks), len(report.failures()))
    return report
