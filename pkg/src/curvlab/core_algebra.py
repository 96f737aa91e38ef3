"""Deformed sl(2,R) generators, Casimirs and universal integrals.

Closed-form evaluation of the N-site symplectic realization of the
non-standard deformation sl_z(2,R) and of its coproduct Casimirs (the
"universal" left and right integrals), together with the z=0 classical
realization that the deformed formulas reduce to.

Realization (1-based sites, s_z(x) = sinh(zx)/(zx)):
    J-  = sum q_i^2
    J3  = sum s_z(q_i^2) q_i p_i exp(z K_i)
    J+  = sum (s_z(q_i^2) p_i^2 + z b_i / sinh(z q_i^2)) exp(z K_i)
    K_i = -sum_{k<i} q_k^2 + sum_{l>i} q_l^2

Casimir:
    C = sinh(z J-)/z * J+ - J3^2

Two layers are exposed. The array kernels (``generator_arrays``,
``left_integral_array``, ``right_integral_array``) take jax arrays and are
what observables and the gradient engine trace through. The public
operations take PhaseState/ModelParams, validate them and return floats.

Example usage:
    from curvlab.core_algebra import PhaseState, ModelParams, generators, casimir

    state = PhaseState.from_lists([0.7], [0.4])
    params = ModelParams(z=0.3, b=(1.2,))
    triple = generators(state, params)
    print(casimir(triple, params.z))    # 1.2
"""

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import jax.numpy as jnp
import numpy as np

from curvlab.errors import SingularConfigurationError

logger = logging.getLogger(__name__)

# |z x| below which sinh(zx)/(zx) uses its Taylor series
SERIES_THRESHOLD = 1e-4


@dataclass(frozen=True, eq=False)
class PhaseState:
    """A point of the 2N-dimensional canonical phase space.

    Attributes:
        q: N positions
        p: N conjugate momenta
    """
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).reshape(-1)
        p = np.asarray(self.p, dtype=float).reshape(-1)
        if q.size == 0:
            raise ValueError('PhaseState needs at least one degree of freedom')
        if q.shape != p.shape:
            raise ValueError(f'q and p lengths differ ({q.size} vs {p.size})')
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise ValueError('PhaseState entries must be finite')
        object.__setattr__(self, 'q', q)
        object.__setattr__(self, 'p', p)

    @property
    def n(self) -> int:
        return self.q.size

    def vector(self) -> np.ndarray:
        """Flat (q_1..q_N, p_1..p_N) vector."""
        return np.concatenate([self.q, self.p])

    @classmethod
    def from_vector(cls, x: Sequence[float]) -> 'PhaseState':
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size % 2:
            raise ValueError('phase-space vector must have even length')
        n = x.size // 2
        return cls(q=x[:n], p=x[n:])

    @classmethod
    def from_lists(cls, q: Sequence[float], p: Sequence[float]) -> 'PhaseState':
        return cls(q=np.asarray(q, dtype=float), p=np.asarray(p, dtype=float))

    def reversed(self) -> 'PhaseState':
        """Same point with site labels in reverse order."""
        return PhaseState(q=self.q[::-1].copy(), p=self.p[::-1].copy())

    def to_dict(self) -> dict:
        return {'q': self.q.tolist(), 'p': self.p.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> 'PhaseState':
        return cls.from_lists(d['q'], d['p'])


@dataclass(frozen=True)
class ModelParams:
    """Parameters shared by every Hamiltonian of the family.

    Attributes:
        z: deformation parameter (0 is the classical limit; may be negative)
        b: centrifugal coefficients b_1..b_N
        kappa2: signature parameter (kappa2 = lambda2^2, negative is Lorentzian)
        omega: oscillator constant (>= 0)
        k: Kepler-Coulomb constant
    """
    z: float = 0.0
    b: Tuple[float, ...] = (0.0,)
    kappa2: float = 1.0
    omega: float = 0.0
    k: float = 0.0

    def __post_init__(self):
        b = tuple(float(v) for v in self.b)
        if not b:
            raise ValueError('b must have one entry per site')
        object.__setattr__(self, 'b', b)
        object.__setattr__(self, 'z', float(self.z))
        for name in ('z', 'kappa2', 'omega', 'k'):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f'{name} must be finite')
        if not all(np.isfinite(b)):
            raise ValueError('b entries must be finite')
        if self.kappa2 == 0.0:
            raise ValueError('kappa2 must be nonzero')
        if self.omega < 0.0:
            raise ValueError('omega must be >= 0')

    @property
    def n(self) -> int:
        return len(self.b)

    @classmethod
    def flat(cls, n: int, z: float = 0.0, **kwargs) -> 'ModelParams':
        """Parameters with all b_i = 0 for an N-site chain."""
        return cls(z=z, b=(0.0,) * n, **kwargs)

    def with_z(self, z: float) -> 'ModelParams':
        return replace(self, z=float(z))

    def reversed(self) -> 'ModelParams':
        return replace(self, b=self.b[::-1])

    def to_dict(self) -> dict:
        return {'z': self.z, 'b': list(self.b), 'kappa2': self.kappa2,
                'omega': self.omega, 'k': self.k}

    @classmethod
    def from_dict(cls, d: dict) -> 'ModelParams':
        return cls(z=d.get('z', 0.0), b=tuple(d['b']),
                   kappa2=d.get('kappa2', 1.0), omega=d.get('omega', 0.0),
                   k=d.get('k', 0.0))


@dataclass(frozen=True)
class GeneratorTriple:
    """Values of (J-, J+, J3) at a phase-space point."""
    jm: float
    jp: float
    j3: float

    def to_dict(self) -> dict:
        return {'jm': self.jm, 'jp': self.jp, 'j3': self.j3}


@dataclass(frozen=True)
class IntegralSet:
    """Left integrals C_z^(2..N) and right integrals C_{z,(2..N)}.

    Both tuples are indexed from m=2; use left_at/right_at for 1-based m.
    """
    left: Tuple[float, ...] = field(default_factory=tuple)
    right: Tuple[float, ...] = field(default_factory=tuple)

    def left_at(self, m: int) -> float:
        if not 2 <= m < len(self.left) + 2:
            raise IndexError(f'left integral m={m} out of range')
        return self.left[m - 2]

    def right_at(self, m: int) -> float:
        if not 2 <= m < len(self.right) + 2:
            raise IndexError(f'right integral m={m} out of range')
        return self.right[m - 2]

    def to_dict(self) -> dict:
        return {'left': list(self.left), 'right': list(self.right)}


# ---------------------------------------------------------------------------
# Scalar helpers
# ---------------------------------------------------------------------------

def shc(u):
    """sinh(u)/u on jax arrays, smooth and exactly 1 at u = 0.

    The series branch keeps gradients finite at the removable singularity.
    """
    u = jnp.asarray(u)
    small = jnp.abs(u) < SERIES_THRESHOLD
    safe = jnp.where(small, 1.0, u)
    u2 = u * u
    series = 1.0 + u2 / 6.0 * (1.0 + u2 / 20.0 * (1.0 + u2 / 42.0))
    return jnp.where(small, series, jnp.sinh(safe) / safe)


def sinc_hyp(z: float, x):
    """Return sinh(zx)/(zx), with value 1 at zx = 0.

    Args:
        z: deformation parameter
        x: scalar or array argument (typically q_i^2)

    Returns:
        float for scalar input, numpy array otherwise
    """
    value = np.asarray(shc(z * jnp.asarray(x, dtype=float)))
    return float(value) if value.ndim == 0 else value


def _check_site_range(i: int, lo: int, hi: int, label: str):
    if not lo <= i <= hi:
        raise IndexError(f'{label}={i} outside [{lo}, {hi}]')


def exponent_K(i: int, h: int, q: Sequence[float]) -> float:
    """K_i^(h) = -sum_{k<i} q_k^2 + sum_{l=i+1}^{h} q_l^2 (1-based)."""
    q2 = np.square(np.asarray(q, dtype=float))
    _check_site_range(h, 1, q2.size, 'h')
    _check_site_range(i, 1, h, 'i')
    return float(-q2[:i - 1].sum() + q2[i:h].sum())


def exponent_K_pair(i: int, j: int, h: int, q: Sequence[float]) -> float:
    """K_ij^(h) = K_i^(h) + K_j^(h) for i < j <= h."""
    if i >= j:
        raise IndexError(f'pair needs i < j (got i={i}, j={j})')
    return exponent_K(i, h, q) + exponent_K(j, h, q)


def exponent_Ktilde(i: int, h: int, q: Sequence[float]) -> float:
    """Right-chain exponent -sum_{k=h}^{i-1} q_k^2 + sum_{l=i+1}^{N} q_l^2."""
    q2 = np.square(np.asarray(q, dtype=float))
    _check_site_range(h, 1, q2.size, 'h')
    _check_site_range(i, h, q2.size, 'i')
    return float(-q2[h - 1:i - 1].sum() + q2[i:].sum())


def exponent_Ktilde_pair(i: int, j: int, h: int, q: Sequence[float]) -> float:
    """Right-chain pair exponent Ktilde_i^(h) + Ktilde_j^(h) for h <= i < j."""
    if i >= j:
        raise IndexError(f'pair needs i < j (got i={i}, j={j})')
    return exponent_Ktilde(i, h, q) + exponent_Ktilde(j, h, q)


def chain_exponents(q2):
    """K_i^(h) for every site of a chain of length h = len(q2).

    Uses prefix sums so the whole vector costs O(h).
    """
    prefix = jnp.concatenate([jnp.zeros(1), jnp.cumsum(q2)])
    total = prefix[-1]
    return -prefix[:-1] + (total - prefix[1:])


# ---------------------------------------------------------------------------
# Array kernels (traced by jax)
# ---------------------------------------------------------------------------

def _nonzero(b: Sequence[float]) -> np.ndarray:
    return np.asarray(b, dtype=float) != 0.0


def classical_generator_arrays(q, p, b: Sequence[float]):
    """Undeformed realization: J- = q^2, J+ = p^2 + sum b_i/q_i^2, J3 = q.p."""
    q2 = q * q
    jp_terms = p * p
    mask = _nonzero(b)
    if mask.any():
        bv = jnp.asarray(b, dtype=float)
        jp_terms = jp_terms + jnp.where(mask, bv / jnp.where(mask, q2, 1.0), 0.0)
    return jnp.sum(q2), jnp.sum(jp_terms), jnp.sum(q * p)


def generator_arrays(q, p, z: float, b: Sequence[float]):
    """(J-, J+, J3) of a chain; the z=0 case is the classical realization."""
    if z == 0.0:
        return classical_generator_arrays(q, p, b)
    q2 = q * q
    s = shc(z * q2)
    w = jnp.exp(z * chain_exponents(q2))
    jp_terms = s * p * p
    mask = _nonzero(b)
    if mask.any():
        # z b / sinh(z q^2) written as b / (q^2 s) so it is regular in z
        bv = jnp.asarray(b, dtype=float)
        jp_terms = jp_terms + jnp.where(mask, bv / jnp.where(mask, q2 * s, 1.0), 0.0)
    return jnp.sum(q2), jnp.sum(jp_terms * w), jnp.sum(s * q * p * w)


def casimir_array(jm, jp, j3, z: float):
    """sinh(z J-)/z * J+ - J3^2, with the exact J- J+ - J3^2 at z=0."""
    if z == 0.0:
        return jm * jp - j3 * j3
    return jm * shc(z * jm) * jp - j3 * j3


def _classical_chain_casimir(q, p, b: Sequence[float]):
    n = q.shape[0]
    q2 = q * q
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            term = (q[i] * p[j] - q[j] * p[i]) ** 2
            if b[i] != 0.0:
                term = term + b[i] * q2[j] / q2[i]
            if b[j] != 0.0:
                term = term + b[j] * q2[i] / q2[j]
            total = total + term
    for i in range(n):
        if b[i] != 0.0:
            total = total + b[i]
    return total


def _chain_casimir(q, p, z: float, b: Sequence[float]):
    """Coproduct Casimir of a whole chain from the Q_ij^z form."""
    if z == 0.0:
        return _classical_chain_casimir(q, p, b)
    n = q.shape[0]
    q2 = q * q
    s = shc(z * q2)
    # sinh(z q_i^2) up to the common factor z
    sh = q2 * s
    kexp = chain_exponents(q2)
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            qij = s[i] * s[j] * (q[i] * p[j] - q[j] * p[i]) ** 2
            if b[i] != 0.0:
                qij = qij + b[i] * sh[j] / sh[i]
            if b[j] != 0.0:
                qij = qij + b[j] * sh[i] / sh[j]
            total = total + qij * jnp.exp(z * (kexp[i] + kexp[j]))
    for i in range(n):
        if b[i] != 0.0:
            total = total + b[i] * jnp.exp(2.0 * z * kexp[i])
    return total


def left_integral_array(q, p, z: float, b: Sequence[float], m: int):
    """C_z^(m): Casimir of the first m sites."""
    return _chain_casimir(q[:m], p[:m], z, tuple(b[:m]))


def right_integral_array(q, p, z: float, b: Sequence[float], m: int):
    """C_{z,(m)}: Casimir of the last m sites, exponents from site N-m+1."""
    n = q.shape[0]
    return _chain_casimir(q[n - m:], p[n - m:], z, tuple(b[n - m:]))


def split_vector(x):
    """(q, p) halves of a flat phase-space vector."""
    n = x.shape[0] // 2
    return x[:n], x[n:]


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def check_regular(q: np.ndarray, b: Sequence[float], margin: float = 0.0) -> Optional[str]:
    """Return a diagnostic if some |q_i| <= margin while b_i != 0, else None."""
    q = np.asarray(q, dtype=float)
    for i, (qi, bi) in enumerate(zip(q, b)):
        if bi != 0.0 and abs(qi) <= margin:
            return f'site {i + 1}: q={qi:.3e} with b={bi:g} (centrifugal singularity)'
    return None


def _validate(state: PhaseState, params: ModelParams):
    if state.n != params.n:
        raise ValueError(f'state has N={state.n} but params has {params.n} b entries')
    msg = check_regular(state.q, params.b)
    if msg is not None:
        site = next(i for i, (qi, bi) in enumerate(zip(state.q, params.b))
                    if bi != 0.0 and qi == 0.0)
        raise SingularConfigurationError(msg, site=site + 1)


def classical_generators(state: PhaseState, b: Sequence[float]) -> GeneratorTriple:
    """Undeformed N-site realization of sl(2,R)."""
    _validate(state, ModelParams(b=tuple(b)))
    jm, jp, j3 = classical_generator_arrays(jnp.asarray(state.q), jnp.asarray(state.p), tuple(b))
    return GeneratorTriple(jm=float(jm), jp=float(jp), j3=float(j3))


def generators(state: PhaseState, params: ModelParams) -> GeneratorTriple:
    """Evaluate (J-, J+, J3) of the deformed realization.

    Args:
        state: phase-space point with N sites
        params: deformation z and centrifugal coefficients b

    Returns:
        GeneratorTriple

    Raises:
        SingularConfigurationError: if q_i = 0 for some b_i != 0
    """
    _validate(state, params)
    jm, jp, j3 = generator_arrays(jnp.asarray(state.q), jnp.asarray(state.p),
                                  params.z, params.b)
    return GeneratorTriple(jm=float(jm), jp=float(jp), j3=float(j3))


def partial_generators(state: PhaseState, params: ModelParams, m: int) -> GeneratorTriple:
    """Generators of the first m sites (exponents K_i^(m))."""
    _validate(state, params)
    _check_site_range(m, 1, state.n, 'm')
    jm, jp, j3 = generator_arrays(jnp.asarray(state.q[:m]), jnp.asarray(state.p[:m]),
                                  params.z, params.b[:m])
    return GeneratorTriple(jm=float(jm), jp=float(jp), j3=float(j3))


def casimir(triple: GeneratorTriple, z: float) -> float:
    """Casimir sinh(zJ-)/z J+ - J3^2 of a generator triple."""
    return float(casimir_array(triple.jm, triple.jp, triple.j3, float(z)))


def classical_integrals(state: PhaseState, b: Sequence[float]) -> IntegralSet:
    """Undeformed left/right integrals of an N-site chain."""
    return universal_integrals(state, ModelParams(z=0.0, b=tuple(b)))


def universal_integrals(state: PhaseState, params: ModelParams) -> IntegralSet:
    """All left integrals C_z^(m) and right integrals C_{z,(m)}, m=2..N.

    Raises:
        SingularConfigurationError: if q_i = 0 for some b_i != 0
    """
    _validate(state, params)
    q, p = jnp.asarray(state.q), jnp.asarray(state.p)
    left: List[float] = []
    right: List[float] = []
    for m in range(2, state.n + 1):
        left.append(float(left_integral_array(q, p, params.z, params.b, m)))
        right.append(float(right_integral_array(q, p, params.z, params.b, m)))
    return IntegralSet(left=tuple(left), right=tuple(right))
