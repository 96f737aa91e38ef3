"""Catalogue of Hamiltonians built on the sl(2,R) coalgebra.

Deformed family (any N):
    H = 1/2 J+ f(z J-) + U(J-)          (dressed: H = (1/2 J+ + U) f(z J-))

    f:  identity (f = 1, type I), exp_plus (e^x, maximally superintegrable),
        exp_minus (e^-x), or a user function with f(0) = 1
    U:  none, sw (omega sinh(zJ-)/z), kc (-k sqrt(2z/(e^{2zJ-}-1)) e^{2zJ-}),
        or a user function U(J-, z)

Classical curved systems (z = 0) in Poincare and Beltrami charts:
    H^P = 1/2 (1 + kappa J-)^2 J+ + V^P
    H^B = 1/2 (1 + kappa J-) (J+ + kappa J3^2) + V^B

with free, Evans, Smorodinsky-Winternitz (SW) and Kepler-Coulomb (KC)
potentials and their extra integrals.

Example usage:
    from curvlab.core_algebra import ModelParams
    from curvlab.hamiltonians import build_deformed, ms_sw, extra_integral_ms

    params = ModelParams(z=0.3, b=(0.4, 0.0), omega=1.0)
    h = build_deformed(ms_sw(params))
    i_z = extra_integral_ms(2, params, with_sw=True)
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import jax.numpy as jnp
import numpy as np

from curvlab.core_algebra import (
    ModelParams,
    classical_generator_arrays,
    generator_arrays,
    shc,
    split_vector,
)
from curvlab.diffobs import Guard, Observable, combine_guards, centrifugal_guard
from curvlab.errors import DomainError

logger = logging.getLogger(__name__)

F_KINDS = ('identity', 'exp_plus', 'exp_minus', 'user')
U_KINDS = ('none', 'sw', 'kc', 'user')
CHARTS = ('poincare', 'beltrami')
POTENTIALS = ('free', 'evans', 'sw', 'kc')

_F_BUILTIN = {
    'identity': lambda x: jnp.ones_like(x),
    'exp_plus': jnp.exp,
    'exp_minus': lambda x: jnp.exp(-x),
}


def conformal_factor(f_kind: str, user_f: Optional[Callable] = None) -> Callable:
    """The function f(x) for a family member."""
    if f_kind == 'user':
        if user_f is None:
            raise ValueError("f_kind='user' needs a function")
        return user_f
    try:
        return _F_BUILTIN[f_kind]
    except KeyError:
        raise ValueError(f'unknown f_kind {f_kind!r} (expected one of {F_KINDS})')


def _radius_guard(q: np.ndarray, margin: float) -> Optional[str]:
    if np.sum(np.square(q)) <= margin * margin:
        return 'J- = 0 (Kepler-Coulomb centre)'
    return None


@dataclass(frozen=True)
class DeformedFamily:
    """A member of the deformed family H = 1/2 J+ f(zJ-) + U.

    Attributes:
        f_kind: conformal factor choice
        u_kind: potential choice
        params: model parameters (z, b, omega, k)
        dressed: if True the potential is multiplied by f too (MS-SW form)
        f: user function of x = zJ- (jax-traceable), for f_kind='user'
        u: user function U(J-, z) (jax-traceable), for u_kind='user'. It takes
            J- and z separately rather than the product zJ-, so that a
            potential such as omega sinh(zJ-)/z can supply its own z = 0 limit
    """
    f_kind: str = 'identity'
    u_kind: str = 'none'
    params: ModelParams = field(default_factory=ModelParams)
    dressed: bool = False
    f: Optional[Callable] = None
    u: Optional[Callable] = None

    def __post_init__(self):
        if self.f_kind not in F_KINDS:
            raise ValueError(f'unknown f_kind {self.f_kind!r}')
        if self.u_kind not in U_KINDS:
            raise ValueError(f'unknown u_kind {self.u_kind!r}')
        if self.u_kind == 'user' and self.u is None:
            raise ValueError("u_kind='user' needs a function")
        f0 = float(conformal_factor(self.f_kind, self.f)(jnp.asarray(0.0)))
        if abs(f0 - 1.0) > 1e-12:
            raise ValueError(f'f(0) must be 1 (got {f0!r})')

    @property
    def name(self) -> str:
        label = f'H[{self.f_kind},{self.u_kind}]'
        return label + '*' if self.dressed else label


def type_i(params: ModelParams) -> DeformedFamily:
    """H = 1/2 J+ (non-constant curvature geodesic flow)."""
    return DeformedFamily('identity', 'none', params)


def ms(params: ModelParams) -> DeformedFamily:
    """H = 1/2 J+ e^{zJ-} (constant curvature z)."""
    return DeformedFamily('exp_plus', 'none', params)


def sw(params: ModelParams) -> DeformedFamily:
    """H = 1/2 J+ + omega sinh(zJ-)/z."""
    return DeformedFamily('identity', 'sw', params)


def kc(params: ModelParams) -> DeformedFamily:
    """H = 1/2 J+ - k sqrt(2z/(e^{2zJ-}-1)) e^{2zJ-}."""
    return DeformedFamily('identity', 'kc', params)


def ms_sw(params: ModelParams) -> DeformedFamily:
    """H = (1/2 J+ + omega sinh(zJ-)/z) e^{zJ-}."""
    return DeformedFamily('exp_plus', 'sw', params, dressed=True)


def potential_array(u_kind: str, jm, params: ModelParams, user_u: Optional[Callable] = None):
    """U(J-) for the built-in potentials; limits omega J- and -k/sqrt(J-) at z=0."""
    z = params.z
    if u_kind == 'none':
        return 0.0
    if u_kind == 'sw':
        # sinh(z J-)/z
        return params.omega * jm * shc(z * jm)
    if u_kind == 'kc':
        # sqrt(2z/(e^{2zJ-}-1)) e^{2zJ-} = e^{3zJ-/2} / sqrt(J- s_z(J-))
        return -params.k * jnp.exp(1.5 * z * jm) / jnp.sqrt(jm * shc(z * jm))
    if u_kind == 'user':
        return user_u(jm, z)
    raise ValueError(f'unknown u_kind {u_kind!r}')


def build_deformed(spec: DeformedFamily) -> Observable:
    """Build the Hamiltonian of a deformed-family member as an observable.

    Raises:
        SingularConfigurationError: at evaluation, for b_i != 0 at q_i = 0 or
            the KC potential at J- = 0
    """
    params = spec.params
    z, b, n = params.z, params.b, params.n
    f = conformal_factor(spec.f_kind, spec.f)
    u_kind, user_u, dressed = spec.u_kind, spec.u, spec.dressed

    def fn(x):
        q, p = split_vector(x)
        jm, jp, _ = generator_arrays(q, p, z, b)
        u = potential_array(u_kind, jm, params, user_u)
        factor = f(z * jm)
        if dressed:
            return (0.5 * jp + u) * factor
        return 0.5 * jp * factor + u

    guard = centrifugal_guard(b)
    if u_kind == 'kc':
        guard = combine_guards(guard, _radius_guard)
    return Observable(spec.name, n, fn, guard)


def extra_integral_ms(dim: int, params: ModelParams, with_sw: bool = False) -> Observable:
    """Extra integral I_z of the MS Hamiltonian (and of MS-SW when with_sw).

    I_z = s_z(q1^2)/2 e^{z q1^2} p1^2 + b1 e^{z q1^2} / (2 q1^2 s_z(q1^2))
          [+ omega/(2z) e^{2 z q1^2} for MS-SW]

    The b1 term is z b1 / (2 sinh(z q1^2)) e^{z q1^2} written regularly in z.

    Raises:
        DomainError: with_sw at z = 0, where the omega term diverges
    """
    if dim != params.n:
        raise ValueError(f'dim={dim} does not match N={params.n}')
    if dim < 2:
        raise ValueError('the extra integral needs N >= 2')
    z, b1, omega = params.z, params.b[0], params.omega
    if with_sw and z == 0.0:
        raise DomainError('MS-SW extra integral is undefined at z = 0')

    def fn(x):
        q, p = split_vector(x)
        w = q[0] * q[0]
        s = shc(z * w)
        value = 0.5 * s * jnp.exp(z * w) * p[0] * p[0]
        if b1 != 0.0:
            value = value + b1 * jnp.exp(z * w) / (2.0 * w * s)
        if with_sw:
            value = value + omega / (2.0 * z) * jnp.exp(2.0 * z * w)
        return value

    name = 'I_z[sw]' if with_sw else 'I_z'
    return Observable(name, dim, fn, centrifugal_guard((b1,) + (0.0,) * (dim - 1)))


# ---------------------------------------------------------------------------
# Classical curved systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassicalSystem:
    """A z=0 system on a constant-curvature space.

    Attributes:
        chart: 'poincare' or 'beltrami'
        kappa: curvature parameter
        potential: 'free', 'evans', 'sw' or 'kc'
        b: centrifugal coefficients
        omega: SW frequency
        k: KC constant
        evans: central potential V(r2) for potential='evans' (jax-traceable)
    """
    chart: str = 'beltrami'
    kappa: float = 0.0
    potential: str = 'free'
    b: Tuple[float, ...] = (0.0,)
    omega: float = 0.0
    k: float = 0.0
    evans: Optional[Callable] = None

    def __post_init__(self):
        if self.chart not in CHARTS:
            raise ValueError(f'unknown chart {self.chart!r}')
        if self.potential not in POTENTIALS:
            raise ValueError(f'unknown potential {self.potential!r}')
        if self.potential == 'evans' and self.evans is None:
            raise ValueError('Evans system needs a central potential V')
        object.__setattr__(self, 'b', tuple(float(v) for v in self.b))

    @property
    def n(self) -> int:
        return len(self.b)


def _chart_guard(chart: str, kappa: float) -> Optional[Guard]:
    if kappa == 0.0:
        return None
    if chart == 'beltrami':
        def guard(q, margin):
            if 1.0 + kappa * np.sum(np.square(q)) <= margin:
                return 'outside Beltrami chart (1 + kappa q^2 <= 0)'
            return None
    else:
        def guard(q, margin):
            if abs(1.0 - kappa * np.sum(np.square(q))) <= margin:
                return 'Poincare chart pole (1 - kappa q^2 = 0)'
            return None
    return guard


def _killing_momenta(chart: str, kappa: float, q, p):
    """Momenta of the translation-like Killing vectors of each chart."""
    q2 = jnp.sum(q * q)
    qp = jnp.sum(q * p)
    if chart == 'poincare':
        return p * (1.0 - kappa * q2) + 2.0 * kappa * qp * q
    return p + kappa * qp * q


def _classical_potential(spec: ClassicalSystem, jm):
    kappa = spec.kappa
    poincare = spec.chart == 'poincare'
    if spec.potential == 'free':
        return 0.0
    if spec.potential == 'evans':
        arg = 4.0 * jm / (1.0 - kappa * jm) ** 2 if poincare else jm
        return spec.evans(arg)
    if spec.potential == 'sw':
        if poincare:
            return spec.omega ** 2 * 4.0 * jm / (1.0 - kappa * jm) ** 2
        return spec.omega ** 2 * jm
    # kc
    if poincare:
        return -spec.k * (1.0 - kappa * jm) / (2.0 * jnp.sqrt(jm))
    return -spec.k / jnp.sqrt(jm)


def _sw_integral(spec: ClassicalSystem, i: int) -> Callable:
    kappa, omega, bi = spec.kappa, spec.omega, spec.b[i]
    poincare = spec.chart == 'poincare'

    def fn(x):
        q, p = split_vector(x)
        mom = _killing_momenta(spec.chart, kappa, q, p)
        q2 = jnp.sum(q * q)
        if poincare:
            value = mom[i] ** 2 + 8.0 * omega ** 2 * q[i] ** 2 / (1.0 - kappa * q2) ** 2
            if bi != 0.0:
                value = value + bi * (1.0 - kappa * q2) ** 2 / q[i] ** 2
        else:
            value = mom[i] ** 2 + 2.0 * omega ** 2 * q[i] ** 2
            if bi != 0.0:
                value = value + bi / q[i] ** 2
        return value
    return fn


def _kc_integral(spec: ClassicalSystem, i: int) -> Callable:
    kappa, k, b = spec.kappa, spec.k, spec.b
    poincare = spec.chart == 'poincare'

    def fn(x):
        q, p = split_vector(x)
        mom = _killing_momenta(spec.chart, kappa, q, p)
        q2 = jnp.sum(q * q)
        value = jnp.sum(mom * (q * p[i] - q[i] * p))
        if poincare:
            value = value + k * q[i] / (2.0 * jnp.sqrt(q2))
        else:
            value = value + k * q[i] / jnp.sqrt(q2)
        for l, bl in enumerate(b):
            if l == i or bl == 0.0:
                continue
            if poincare:
                value = value - bl * q[i] * (1.0 - kappa * q2) / q[l] ** 2
            else:
                value = value - bl * q[i] / q[l] ** 2
        return value
    return fn


def build_classical(spec: ClassicalSystem) -> Tuple[Observable, List[Observable]]:
    """Hamiltonian of a classical curved system and its extra integrals.

    Extra integrals:
        free, sw: I_i for every site i (free uses omega = 0)
        kc: Laplace-Runge-Lenz components L_i for every i with b_i = 0
        evans: none beyond the universal integrals

    Raises:
        DomainError: KC system where every b_i is nonzero
    """
    kappa, b, n = spec.kappa, spec.b, spec.n
    chart = spec.chart

    def hamiltonian(x):
        q, p = split_vector(x)
        jm, jp, j3 = classical_generator_arrays(q, p, b)
        if chart == 'poincare':
            kinetic = 0.5 * (1.0 + kappa * jm) ** 2 * jp
        else:
            kinetic = 0.5 * (1.0 + kappa * jm) * (jp + kappa * j3 * j3)
        return kinetic + _classical_potential(spec, jm)

    guard = combine_guards(centrifugal_guard(b), _chart_guard(chart, kappa))
    if spec.potential == 'kc':
        guard = combine_guards(guard, _radius_guard)
    h = Observable(f'H^{chart[0].upper()}[{spec.potential}]', n, hamiltonian, guard)

    extras: List[Observable] = []
    if spec.potential in ('free', 'sw'):
        for i in range(n):
            extras.append(Observable(f'I_{i + 1}^{chart[0].upper()}', n,
                                     _sw_integral(spec, i), guard))
    elif spec.potential == 'kc':
        free_sites = [i for i, bi in enumerate(b) if bi == 0.0]
        if not free_sites:
            raise DomainError('KC extra integral needs at least one b_i = 0 '
                              f'(got b={list(b)})')
        for i in free_sites:
            extras.append(Observable(f'L_{i + 1}^{chart[0].upper()}', n,
                                     _kc_integral(spec, i), guard))
    return h, extras


def flat_counterpart(spec: DeformedFamily) -> ClassicalSystem:
    """The kappa = 0 classical system a deformed member tends to as z -> 0.

    The deformed SW term omega sinh(zJ-)/z tends to omega J-, which is the
    classical SW potential with frequency sqrt(omega).
    """
    params = spec.params
    if spec.u_kind == 'none':
        return ClassicalSystem('beltrami', 0.0, 'free', params.b)
    if spec.u_kind == 'sw':
        return ClassicalSystem('beltrami', 0.0, 'sw', params.b, omega=float(np.sqrt(params.omega)))
    if spec.u_kind == 'kc':
        return ClassicalSystem('beltrami', 0.0, 'kc', params.b, k=params.k)
    raise ValueError('user potentials have no built-in classical counterpart')


def ambient_coordinates(chart: str, kappa: float, q: Sequence[float]) -> np.ndarray:
    """Ambient coordinates x_i of a Poincare or Beltrami chart point.

    Poincare: x_i = 2 q_i / (1 + kappa q^2); Beltrami: x_i = q_i / sqrt(1 + kappa q^2).

    Raises:
        DomainError: Beltrami radicand <= 0, or Poincare denominator 0
    """
    q = np.asarray(q, dtype=float)
    denom = 1.0 + kappa * float(np.dot(q, q))
    if chart == 'poincare':
        if denom == 0.0:
            raise DomainError('Poincare chart: 1 + kappa q^2 = 0')
        return 2.0 * q / denom
    if chart == 'beltrami':
        if denom <= 0.0:
            raise DomainError(f'Beltrami chart: 1 + kappa q^2 = {denom:g} <= 0')
        return q / np.sqrt(denom)
    raise ValueError(f'unknown chart {chart!r}')
