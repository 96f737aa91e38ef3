"""Metrics, curvatures and geodesic polar charts of the deformed family.

The kinetic Hamiltonian H = 1/2 J+ f(zJ-) defines a diagonal metric

    g_ii(q) = exp(-z K_i(q)) / (s_z(q_i^2) f(z q^2)),    H = 1/2 sum p_i^2 / g_ii

``MetricField.g`` is this kinetic metric; ``MetricField.line_element`` is the
line element ds^2 = 2 g (entries 2 z q_i^2 / sinh(z q_i^2) ... in two and
three dimensions), and every curvature in this module is computed for ds^2.
The factor 2 is kept in every dimension so that one normalization covers the
2D, 3D and N-D closed forms. The bare diagonal form ds^2 = sum g_ii dq_i^2
(line_scale=1) is the same metric scaled by 1/2, so its curvatures are
exactly twice the ones computed here.

Geodesic polar charts use kappa-trigonometric functions so that both signs
of z share one code path:

    type I:  C_{-z}(rho) = exp(z q^2)
    MS:      C_{z}(r)    = exp(-z q^2)        (two dimensions only)

with angles built from the collective variables xi_k. Polar momenta stored
in a PolarState are canonical (P = (dq/dQ)^T p). Polar Hamiltonians and
integrals are evaluated on POLAR_MOMENTUM_SCALE * P, which is the momentum
normalization for which H~ = 2 H and C~ = 4 kappa2 C hold.

Example usage:
    from curvlab.core_algebra import ModelParams
    from curvlab.hamiltonians import type_i
    from curvlab.geometry import metric_from_kinetic, gaussian_curvature_2d

    metric = metric_from_kinetic(type_i(ModelParams.flat(2, z=1.0)))
    print(gaussian_curvature_2d(metric, [0.5, 0.5]))   # -sinh(0.5)
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import jax
import jax.numpy as jnp
import numpy as np

from curvlab.core_algebra import PhaseState, chain_exponents, shc, split_vector
from curvlab.diffobs import Observable
from curvlab.errors import DomainError, SingularConfigurationError
from curvlab.hamiltonians import DeformedFamily, build_deformed, conformal_factor

logger = logging.getLogger(__name__)

# ds^2 = LINE_ELEMENT_SCALE * g for metrics induced by 1/2 J+ f(zJ-)
LINE_ELEMENT_SCALE = 2.0

# Polar formulas are written for momenta twice the canonical lift
POLAR_MOMENTUM_SCALE = 2.0

FD_STEP = 1e-4

POLAR_KINDS = ('type_i_2d', 'type_i_3d', 'ms_2d', 'nd')
CHARTS = ('type_i', 'ms')


# ---------------------------------------------------------------------------
# kappa-trigonometry
# ---------------------------------------------------------------------------

def kappa_cos(kappa: float, x):
    """C_kappa(x): cos(sqrt(kappa) x), 1 or cosh(sqrt(-kappa) x)."""
    if kappa > 0:
        return jnp.cos(np.sqrt(kappa) * x)
    if kappa < 0:
        return jnp.cosh(np.sqrt(-kappa) * x)
    return jnp.ones_like(jnp.asarray(x, dtype=float))


def kappa_sin(kappa: float, x):
    """S_kappa(x): sin(sqrt(kappa) x)/sqrt(kappa), x or sinh(sqrt(-kappa) x)/sqrt(-kappa)."""
    if kappa > 0:
        r = np.sqrt(kappa)
        return jnp.sin(r * x) / r
    if kappa < 0:
        r = np.sqrt(-kappa)
        return jnp.sinh(r * x) / r
    return jnp.asarray(x, dtype=float)


# ---------------------------------------------------------------------------
# Metric fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MetricField:
    """Diagonal position-dependent metric.

    Attributes:
        dim: dimension N
        g: jax-traceable map q -> (g_11..g_NN), kinetic normalization
        provenance: description of the inducing Hamiltonian
        line_scale: ds^2 = line_scale * g; 2 for the induced metrics, 1 for the
            bare diagonal form (curvatures scale as 1/line_scale)
    """
    dim: int
    g: Callable
    provenance: str = ''
    line_scale: float = LINE_ELEMENT_SCALE

    def line_fn(self, q):
        return self.line_scale * self.g(q)

    @cached_property
    def _kinetic_jit(self):
        return jax.jit(self.g)

    def kinetic(self, q: Sequence[float]) -> np.ndarray:
        return np.asarray(self._kinetic_jit(jnp.asarray(q, dtype=float)))

    def line_element(self, q: Sequence[float]) -> np.ndarray:
        """Coefficients of ds^2 = sum g_ii dq_i^2 in the line-element normalization."""
        return self.line_scale * self.kinetic(q)

    def kinetic_energy(self, q: Sequence[float], p: Sequence[float]) -> float:
        """1/2 sum p_i^2 / g_ii(q)."""
        p = np.asarray(p, dtype=float)
        return float(0.5 * np.sum(p * p / self.kinetic(q)))

    @cached_property
    def _gauss_jit(self):
        return jax.jit(_brioschi(self.line_fn))

    @cached_property
    def _sectional_jit(self):
        return jax.jit(_sectional_matrix(self.line_fn))


def family_metric_array(q, z: float, f: Callable):
    """Kinetic metric of 1/2 J+ f(zJ-): exp(-z K_i) / (s_z(q_i^2) f(z q^2))."""
    q2 = q * q
    return jnp.exp(-z * chain_exponents(q2)) / (shc(z * q2) * f(z * jnp.sum(q2)))


def metric_from_kinetic(spec: DeformedFamily) -> MetricField:
    """Invert the quadratic form of a purely kinetic family member.

    The inverse metric is read off as the p-Hessian of H at p = 0, so the
    result reproduces H = 1/2 sum p_i^2/g_ii by construction.

    Raises:
        ValueError: if the Hamiltonian has a potential or centrifugal terms
    """
    params = spec.params
    if spec.u_kind != 'none':
        raise ValueError(f'metric needs a kinetic Hamiltonian (u_kind={spec.u_kind!r})')
    if any(bi != 0.0 for bi in params.b):
        raise ValueError('metric needs b = 0 (centrifugal terms are potentials)')
    h = build_deformed(spec).fn
    n = params.n

    def g(q):
        inverse = jax.hessian(lambda p: h(jnp.concatenate([q, p])))(jnp.zeros(n))
        return 1.0 / jnp.diag(inverse)

    return MetricField(dim=n, g=g, provenance=f'{spec.name} z={params.z:g}')


def family_metric(n: int, z: float, f_kind: str = 'identity',
                  user_f: Optional[Callable] = None) -> MetricField:
    """Closed-form metric of 1/2 J+ f(zJ-) on N sites."""
    f = conformal_factor(f_kind, user_f)
    return MetricField(dim=n, g=lambda q: family_metric_array(q, z, f),
                       provenance=f'H[{f_kind},none] z={z:g}')


# ---------------------------------------------------------------------------
# Curvature
# ---------------------------------------------------------------------------

def _brioschi(line_fn: Callable) -> Callable:
    def sqrt_e(q):
        return jnp.sqrt(line_fn(q)[0])

    def sqrt_g(q):
        return jnp.sqrt(line_fn(q)[1])

    def u(q):
        return jax.grad(sqrt_g)(q)[0] / sqrt_e(q)

    def v(q):
        return jax.grad(sqrt_e)(q)[1] / sqrt_g(q)

    def curvature(q):
        return -(jax.grad(u)(q)[0] + jax.grad(v)(q)[1]) / (sqrt_e(q) * sqrt_g(q))
    return curvature


def gaussian_curvature_2d(metric: MetricField, q: Sequence[float]) -> float:
    """Gaussian curvature of a 2D diagonal metric from exact derivatives.

    K = -1/sqrt(g11 g22) (d1(d1 sqrt(g22)/sqrt(g11)) + d2(d2 sqrt(g11)/sqrt(g22)))

    Raises:
        ValueError: if the metric is not two-dimensional
        SingularConfigurationError: at points where g11 g22 <= 0
    """
    if metric.dim != 2:
        raise ValueError(f'gaussian_curvature_2d needs dim=2 (got {metric.dim})')
    q = np.asarray(q, dtype=float)
    line = metric.line_element(q)
    if np.any(line <= 0.0) or not np.all(np.isfinite(line)):
        raise SingularConfigurationError(f'singular metric point q={q.tolist()}')
    return float(metric._gauss_jit(jnp.asarray(q)))


def curvature_of_family(f: Union[str, Callable], z: float, x: float) -> float:
    """Gaussian curvature of the 2D metric of 1/2 J+ f(zJ-) at x = z q^2.

    K(x) = z (f'(x) cosh x + (f''(x) - f(x) - f'(x)^2/f(x)) sinh x)

    Args:
        f: built-in kind name or a jax-traceable function with f(0) = 1
        z: deformation parameter
        x: argument z q^2

    Raises:
        ZeroDivisionError: if f(x) = 0
    """
    fn = conformal_factor(f) if isinstance(f, str) else f
    x = jnp.asarray(float(x))
    f0 = float(fn(x))
    if f0 == 0.0:
        raise ZeroDivisionError(f'f({float(x)}) = 0')
    d1 = float(jax.grad(fn)(x))
    d2 = float(jax.grad(jax.grad(fn))(x))
    xv = float(x)
    return z * (d1 * np.cosh(xv) + (d2 - f0 - d1 * d1 / f0) * np.sinh(xv))


def christoffel_array(line_fn: Callable, q):
    """Gamma[k, i, j] of a metric given by its diagonal."""
    def metric_matrix(x):
        return jnp.diag(line_fn(x))
    gmat = metric_matrix(q)
    ginv = jnp.diag(1.0 / jnp.diag(gmat))
    dg = jax.jacfwd(metric_matrix)(q)          # dg[a, b, c] = d_c g_ab
    return 0.5 * (jnp.einsum('kl,lji->kij', ginv, dg)
                  + jnp.einsum('kl,lij->kij', ginv, dg)
                  - jnp.einsum('kl,ijl->kij', ginv, dg))


def _riemann_lowered(gmat, gamma, dgamma):
    # dgamma[a, b, c, d] = d_d Gamma^a_bc
    riemann = (jnp.einsum('abdc->abcd', dgamma) - dgamma
               + jnp.einsum('ace,ebd->abcd', gamma, gamma)
               - jnp.einsum('ade,ebc->abcd', gamma, gamma))
    return jnp.einsum('ae,ebcd->abcd', gmat, riemann)


def _sectional_from_riemann(gdiag, lowered):
    n = gdiag.shape[0]
    denom = gdiag[:, None] * gdiag[None, :]
    idx = jnp.arange(n)
    r_ijij = lowered[idx[:, None], idx[None, :], idx[:, None], idx[None, :]]
    safe = jnp.where(jnp.eye(n, dtype=bool), 1.0, denom)
    return jnp.where(jnp.eye(n, dtype=bool), 0.0, r_ijij / safe)


def _sectional_matrix(line_fn: Callable) -> Callable:
    def sectional(q):
        gdiag = line_fn(q)
        gamma = christoffel_array(line_fn, q)
        dgamma = jax.jacfwd(lambda x: christoffel_array(line_fn, x))(q)
        return _sectional_from_riemann(gdiag, _riemann_lowered(jnp.diag(gdiag), gamma, dgamma))
    return sectional


def richardson_derivative(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                          step: float = FD_STEP) -> np.ndarray:
    """Central-difference Jacobian with one Richardson extrapolation.

    Returns an array of shape fn(x).shape + (len(x),).
    """
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = 1.0

        def central(h):
            return (np.asarray(fn(x + h * e)) - np.asarray(fn(x - h * e))) / (2.0 * h)
        cols.append((4.0 * central(step / 2.0) - central(step)) / 3.0)
    return np.stack(cols, axis=-1)


def _fd_christoffel(line: Callable, q: np.ndarray, step: float) -> np.ndarray:
    gdiag = np.asarray(line(q))
    dg_diag = richardson_derivative(line, q, step)   # [a, c] = d_c g_aa
    n = q.size
    dg = np.zeros((n, n, n))
    for a in range(n):
        dg[a, a, :] = dg_diag[a]
    ginv = np.diag(1.0 / gdiag)
    return 0.5 * (np.einsum('kl,lji->kij', ginv, dg)
                  + np.einsum('kl,lij->kij', ginv, dg)
                  - np.einsum('kl,ijl->kij', ginv, dg))


def sectional_curvatures(metric: MetricField, q: Sequence[float], method: str = 'ad') -> np.ndarray:
    """Sectional curvatures K_ij of all coordinate planes of ds^2.

    Args:
        metric: diagonal metric (any dimension, any signature)
        q: point
        method: 'ad' for exact derivatives, 'fd' for Richardson-extrapolated
            finite differences (step FD_STEP)

    Returns:
        (N, N) symmetric array with zero diagonal
    """
    q = np.asarray(q, dtype=float)
    if method == 'ad':
        return np.asarray(metric._sectional_jit(jnp.asarray(q)))
    if method != 'fd':
        raise ValueError(f"method must be 'ad' or 'fd' (got {method!r})")

    def line(x):
        return metric.line_element(x)
    gdiag = line(q)
    gamma = _fd_christoffel(line, q, FD_STEP)
    dgamma = richardson_derivative(lambda x: _fd_christoffel(line, x, FD_STEP), q, FD_STEP)
    lowered = _riemann_lowered(jnp.diag(gdiag), jnp.asarray(gamma), jnp.asarray(dgamma))
    return np.asarray(_sectional_from_riemann(jnp.asarray(gdiag), lowered))


def scalar_curvature(metric: MetricField, q: Sequence[float], method: str = 'ad') -> float:
    """Scalar curvature sum_{i != j} K_ij of a diagonal metric."""
    return float(np.sum(sectional_curvatures(metric, q, method)))


def type_i_sectional_curvatures(z: float, q: Sequence[float]) -> np.ndarray:
    """Closed-form coordinate-plane sectional curvatures of the type-I ds^2, any N.

    For i < j, with K_k the chain exponents and w_k = q_k^2:
        K_ij = -z/2 [exp(z K_i + z w_i) - exp(z K_j - z w_j)
                     + sum_{k != i,j} sigma_k exp(z K_k) sinh(z w_k)]
    where sigma_k = -1 for i < k < j and +1 otherwise.
    """
    q = np.asarray(q, dtype=float)
    w = q * q
    kexp = np.asarray(chain_exponents(jnp.asarray(w)))
    n = q.size
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            total = np.exp(z * (kexp[i] + w[i])) - np.exp(z * (kexp[j] - w[j]))
            for k in range(n):
                if k in (i, j):
                    continue
                sigma = -1.0 if i < k < j else 1.0
                total += sigma * np.exp(z * kexp[k]) * np.sinh(z * w[k])
            out[i, j] = out[j, i] = -0.5 * z * total
    return out


@dataclass(frozen=True)
class SectionalCurvatures:
    """Sectional curvatures of a 3D metric and its scalar curvature."""
    k12: float
    k13: float
    k23: float
    scalar: float

    def to_dict(self) -> dict:
        return {'K12': self.k12, 'K13': self.k13, 'K23': self.k23, 'K': self.scalar}


def sectional_curvatures_3d(kind: str, z: float, q: Sequence[float],
                            numeric: bool = False) -> SectionalCurvatures:
    """Sectional curvatures of the 3D type-I or MS metric.

    Closed forms (type I, E = exp(2 z q^2)):
        K12 = z/4 e^{-zq^2} (1 + e^{2zq3^2} - 2E)
        K13 = z/4 e^{-zq^2} (2 - e^{2zq3^2} + e^{2z(q2^2+q3^2)} - 2E)
        K23 = z/4 e^{-zq^2} (2 - e^{2z(q2^2+q3^2)} - E)
    so that K12 + K13 + K23 = -(5/2) z sinh(z q^2) = K/2. MS: K_ij = z, K = 6z.

    Args:
        kind: 'type_i' or 'ms'
        numeric: evaluate from the Riemann tensor (finite differences) instead
    """
    q = np.asarray(q, dtype=float)
    if q.size != 3:
        raise ValueError('sectional_curvatures_3d needs a 3D point')
    if kind not in ('type_i', 'ms'):
        raise ValueError(f"kind must be 'type_i' or 'ms' (got {kind!r})")
    if numeric:
        f_kind = 'identity' if kind == 'type_i' else 'exp_plus'
        mat = sectional_curvatures(family_metric(3, z, f_kind), q, method='fd')
        k12, k13, k23 = mat[0, 1], mat[0, 2], mat[1, 2]
    elif kind == 'ms':
        k12 = k13 = k23 = z
    else:
        w = q * q
        big_e = np.exp(2.0 * z * w.sum())
        c3 = np.exp(2.0 * z * w[2])
        c23 = np.exp(2.0 * z * (w[1] + w[2]))
        pref = 0.25 * z * np.exp(-z * w.sum())
        k12 = pref * (1.0 + c3 - 2.0 * big_e)
        k13 = pref * (2.0 - c3 + c23 - 2.0 * big_e)
        k23 = pref * (2.0 - c23 - big_e)
    k12, k13, k23 = float(k12), float(k13), float(k23)
    return SectionalCurvatures(k12, k13, k23, 2.0 * (k12 + k13 + k23))


# ---------------------------------------------------------------------------
# Collective variables
# ---------------------------------------------------------------------------

def _site_weights(q2, z: float):
    """u_s = exp(2z sum_{i<s} q_i^2) (exp(2z q_s^2) - 1)/(2z), regular in z."""
    prefix = jnp.concatenate([jnp.zeros(1), jnp.cumsum(q2)[:-1]])
    return jnp.exp(2.0 * z * prefix) * q2 * jnp.exp(z * q2) * shc(z * q2)


@dataclass(frozen=True)
class CollectiveVars:
    """Collective variables xi_0..xi_N on the pseudosphere.

    Attributes:
        xi: magnitudes (xi_0, |xi_1|, .., |xi_N|)
        sign: sign of z; xi_0^2 - sign * sum xi_k^2 = 1
    """
    xi: np.ndarray
    sign: float

    @property
    def xi_squared(self) -> np.ndarray:
        """Signed squares (xi_0^2, xi_1^2, ..); negative entries when z < 0."""
        sq = np.square(self.xi)
        sq[1:] *= self.sign
        return sq

    def pseudosphere_residual(self) -> float:
        sq = self.xi_squared
        return float(sq[0] - sq[1:].sum() - 1.0)


def collective_vars(q: Sequence[float], z: float) -> CollectiveVars:
    """Ambient variables xi_0^2 = exp(2 z q^2), xi_k^2 = prod_{i<=N-k} e^{2z q_i^2} (e^{2z q_{N-k+1}^2} - 1).

    Raises:
        DomainError: at z = 0
    """
    if z == 0.0:
        raise DomainError('collective variables need z != 0')
    q = np.asarray(q, dtype=float)
    q2 = q * q
    u = np.asarray(_site_weights(jnp.asarray(q2), z))
    # xi_k pairs with site N-k
    tail = np.sqrt(2.0 * abs(z) * u[::-1])
    xi = np.concatenate([[np.exp(z * q2.sum())], tail])
    return CollectiveVars(xi=xi, sign=float(np.sign(z)))


# ---------------------------------------------------------------------------
# Polar charts
# ---------------------------------------------------------------------------

def _radial_kappa(z: float, chart: str) -> float:
    return -z if chart == 'type_i' else z


def _radius_from_q2(q2, kappa: float):
    """Radius R with C_kappa(R) = exp(-kappa q^2)."""
    if kappa > 0:
        r = np.sqrt(kappa)
        return jnp.arctan2(jnp.sqrt(-jnp.expm1(-2.0 * kappa * q2)), jnp.exp(-kappa * q2)) / r
    r = np.sqrt(-kappa)
    return jnp.arcsinh(jnp.sqrt(jnp.expm1(-2.0 * kappa * q2))) / r


def _q2_from_radius(radius, kappa: float):
    s = kappa_sin(kappa, radius)
    return -jnp.log1p(-kappa * s * s) / (2.0 * kappa)


def polar_coords_array(q, z: float, kappa2: float = 1.0, chart: str = 'type_i'):
    """(R, theta_2..theta_N) of a point q >= 0 (jax-traceable)."""
    q2 = q * q
    n = q.shape[0]
    radius = _radius_from_q2(jnp.sum(q2), _radial_kappa(z, chart))
    u = _site_weights(q2, z)
    lower = jnp.concatenate([jnp.zeros(1), jnp.cumsum(u)[:-1]])
    angles = []
    for k in range(1, n):
        site = n - k
        angles.append(jnp.arctan2(jnp.sqrt(lower[site]), jnp.sqrt(u[site])))
    if angles:
        angles[0] = angles[0] / np.sqrt(kappa2)
    return jnp.stack([radius] + angles)


def _direction_cosines_sq(angles, kappa2: float):
    """n_1^2..n_N^2 of the hyperspherical angles (first angle scaled by sqrt(kappa2))."""
    lam = np.sqrt(kappa2)
    sines = [jnp.sin(lam * angles[0]) if i == 0 else jnp.sin(a) for i, a in enumerate(angles)]
    cosines = [jnp.cos(lam * angles[0]) if i == 0 else jnp.cos(a) for i, a in enumerate(angles)]
    out = []
    running = 1.0
    for s, c in zip(sines, cosines):
        out.append(running * c * c)
        running = running * s * s
    out.append(running)
    return jnp.stack(out)


def cartesian_array(coords, z: float, kappa2: float = 1.0, chart: str = 'type_i'):
    """Inverse of polar_coords_array on the principal branch q >= 0."""
    n = coords.shape[0]
    q2_total = _q2_from_radius(coords[0], _radial_kappa(z, chart))
    if n == 1:
        return jnp.sqrt(q2_total)[None]
    sigma = jnp.expm1(2.0 * z * q2_total)
    # site s pairs with n_{N-s}
    c = _direction_cosines_sq(coords[1:], kappa2)[::-1]
    tail = jnp.concatenate([jnp.zeros(1), jnp.cumsum(c)])
    logs = jnp.log1p(sigma * tail)
    q2 = (logs[1:] - logs[:-1]) / (2.0 * z)
    return jnp.sqrt(jnp.maximum(q2, 0.0))


@dataclass(frozen=True, eq=False)
class PolarState:
    """Point of a geodesic polar chart with canonical momenta.

    Attributes:
        coords: (R, theta_2..theta_N); R is rho (type I) or r (MS)
        momenta: canonical (P_R, P_theta_2..), or None
        z: deformation (lambda1^2)
        kappa2: signature parameter (lambda2^2)
        chart: 'type_i' or 'ms'
    """
    coords: np.ndarray
    momenta: Optional[np.ndarray] = None
    z: float = 1.0
    kappa2: float = 1.0
    chart: str = 'type_i'

    @property
    def n(self) -> int:
        return int(np.asarray(self.coords).size)

    @property
    def radius(self) -> float:
        return float(self.coords[0])

    @property
    def angles(self) -> np.ndarray:
        return np.asarray(self.coords[1:])

    def to_dict(self) -> dict:
        return {'coords': np.asarray(self.coords).tolist(),
                'momenta': None if self.momenta is None else np.asarray(self.momenta).tolist(),
                'z': self.z, 'kappa2': self.kappa2, 'chart': self.chart}


def _check_chart(n: int, z: float, kappa2: float, chart: str):
    if chart not in CHARTS:
        raise ValueError(f'unknown chart {chart!r}')
    if z == 0.0:
        raise DomainError('polar charts need z != 0')
    if kappa2 <= 0.0:
        raise DomainError('kappa2 < 0 has no real phase-space chart (metric level only)')
    if n >= 4 and kappa2 != 1.0:
        raise DomainError('kappa2 != 1 is only defined for N = 2, 3')
    if chart == 'ms' and n != 2:
        raise DomainError('the MS polar chart is only available in two dimensions')


def _jacobian(coords, z: float, kappa2: float, chart: str) -> np.ndarray:
    return np.asarray(jax.jacfwd(lambda c: cartesian_array(c, z, kappa2, chart))(jnp.asarray(coords)))


def to_polar(q: Union[Sequence[float], PhaseState], z: float, kappa2: float = 1.0,
             p: Optional[Sequence[float]] = None, chart: str = 'type_i') -> PolarState:
    """Map q (and optionally p) to geodesic polar coordinates.

    Momenta are lifted canonically: P = (dq/dQ)^T p with the Jacobian of the
    inverse map obtained by differentiating cartesian_array.

    Raises:
        DomainError: z = 0, kappa2 <= 0, q outside q_i >= 0, or momenta at R = 0
    """
    if isinstance(q, PhaseState):
        q, p = q.q, q.p
    q = np.asarray(q, dtype=float)
    _check_chart(q.size, z, kappa2, chart)
    if np.any(q < 0.0):
        raise DomainError('polar charts are defined on the branch q_i >= 0')
    coords = np.asarray(polar_coords_array(jnp.asarray(q), z, kappa2, chart))
    momenta = None
    if p is not None:
        if coords[0] == 0.0:
            raise DomainError('momentum lift is singular at R = 0')
        jac = _jacobian(coords, z, kappa2, chart)
        momenta = jac.T @ np.asarray(p, dtype=float)
    return PolarState(coords=coords, momenta=momenta, z=z, kappa2=kappa2, chart=chart)


def from_polar(state: PolarState) -> Union[np.ndarray, PhaseState]:
    """Inverse of to_polar: q, or a PhaseState when momenta are present.

    Raises:
        DomainError: radius outside the chart (C_kappa(R) <= 0)
    """
    _check_chart(state.n, state.z, state.kappa2, state.chart)
    coords = np.asarray(state.coords, dtype=float)
    kappa = _radial_kappa(state.z, state.chart)
    if kappa > 0 and float(kappa_cos(kappa, coords[0])) <= 0.0:
        raise DomainError(f'radius {coords[0]:g} beyond the chart (C_kappa(R) <= 0)')
    q = np.asarray(cartesian_array(jnp.asarray(coords), state.z, state.kappa2, state.chart))
    if state.momenta is None:
        return q
    jac = _jacobian(coords, state.z, state.kappa2, state.chart)
    p = np.linalg.solve(jac.T, np.asarray(state.momenta, dtype=float))
    return PhaseState(q=q, p=p)


def polar_observables(n: int, z: float, kappa2: float = 1.0, chart: str = 'type_i') -> List[Observable]:
    """Polar coordinates and lifted momenta as observables of (q, p)."""
    _check_chart(n, z, kappa2, chart)

    def coord(i):
        return lambda x: polar_coords_array(split_vector(x)[0], z, kappa2, chart)[i]

    def momentum(i):
        def fn(x):
            q, p = split_vector(x)
            coords = polar_coords_array(q, z, kappa2, chart)
            jac = jax.jacfwd(lambda c: cartesian_array(c, z, kappa2, chart))(coords)
            return jnp.dot(jac[:, i], p)
        return fn

    names = ['R'] + [f'theta{i + 2}' for i in range(n - 1)]
    obs = [Observable(name, n, coord(i)) for i, name in enumerate(names)]
    obs += [Observable(f'P_{name}', n, momentum(i)) for i, name in enumerate(names)]
    return obs


# ---------------------------------------------------------------------------
# Polar Hamiltonians
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolarEvaluation:
    """Polar Hamiltonian and integrals, in the POLAR_MOMENTUM_SCALE normalization.

    Attributes:
        hamiltonian: H~
        left: {m: C~^(m)} for m = 2..N
        right: {m: C~_(m)}; only m = 2 in three dimensions
    """
    hamiltonian: float
    left: Dict[int, float] = field(default_factory=dict)
    right: Dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {'hamiltonian': self.hamiltonian,
                'left': {str(k): v for k, v in self.left.items()},
                'right': {str(k): v for k, v in self.right.items()}}


def angular_chain(state: PolarState) -> Dict[int, float]:
    """C~^(m) = p_{theta_{N-m+2}}^2 + C~^(m-1) / S^2(theta_{N-m+2}), m = 2..N.

    The first angle uses S_kappa2(theta_2) = sin(lambda2 theta_2)/lambda2.
    """
    if state.momenta is None:
        raise ValueError('angular_chain needs momenta')
    n = state.n
    angles = state.angles
    pm = POLAR_MOMENTUM_SCALE * np.asarray(state.momenta, dtype=float)
    chain = {}
    previous = 0.0
    for m in range(2, n + 1):
        a = n - m          # index of theta_{N-m+2} in angles
        if a == 0:
            s = float(kappa_sin(state.kappa2, angles[0]))
        else:
            s = float(np.sin(angles[a]))
        value = pm[1 + a] ** 2
        if m > 2:
            value += previous / (s * s)
        chain[m] = value
        previous = value
    return chain


def _radial_energy(chart: str, z: float, kappa2: float, radius: float, p_radius: float,
                   angular: float) -> float:
    kappa = _radial_kappa(z, chart)
    s = float(kappa_sin(kappa, radius))
    if s == 0.0:
        raise DomainError('polar Hamiltonian is singular at R = 0')
    bracket = p_radius * p_radius + angular / (kappa2 * s * s)
    if chart == 'ms':
        return 0.5 * bracket
    return 0.5 * float(kappa_cos(kappa, radius)) * bracket


def polar_hamiltonian(kind: str, state: PolarState) -> PolarEvaluation:
    """Evaluate the polar-form Hamiltonian and its integrals.

    type I:  H~ = 1/2 C_{-z}(rho) (p_rho^2 + C~^(N) / (kappa2 S_{-z}(rho)^2))
    MS 2D:   H~ = 1/2 (p_r^2 + C~^(2) / (kappa2 S_z(r)^2))
    3D also returns C~_(2) = (cos(phi) p_theta - sin(phi) p_phi C_k2(theta)/S_k2(theta))^2.

    Raises:
        DomainError: R = 0, or kind incompatible with the state
    """
    if kind not in POLAR_KINDS:
        raise ValueError(f'unknown polar kind {kind!r}')
    if state.momenta is None:
        raise ValueError('polar_hamiltonian needs momenta')
    n = state.n
    expected = {'type_i_2d': (2, 'type_i'), 'type_i_3d': (3, 'type_i'), 'ms_2d': (2, 'ms')}
    if kind in expected and expected[kind] != (n, state.chart):
        raise DomainError(f'{kind} needs N={expected[kind][0]} in the {expected[kind][1]} chart')
    if kind == 'nd' and (state.chart != 'type_i' or state.kappa2 != 1.0):
        raise DomainError('the N-D polar Hamiltonian is the type-I one with kappa2 = 1')
    chain = angular_chain(state)
    pm = POLAR_MOMENTUM_SCALE * np.asarray(state.momenta, dtype=float)
    energy = _radial_energy(state.chart, state.z, state.kappa2, state.radius, pm[0],
                            chain.get(n, 0.0))
    right = {}
    if n == 3:
        theta, phi = state.angles
        cot = float(kappa_cos(state.kappa2, theta) / kappa_sin(state.kappa2, theta))
        right[2] = (np.cos(phi) * pm[1] - np.sin(phi) * pm[2] * cot) ** 2
    return PolarEvaluation(hamiltonian=energy, left=chain, right=right)


@dataclass(frozen=True)
class RadialHamiltonian:
    """One-degree-of-freedom reduction H~(R, P_R) at fixed C~^(N).

    Called with the canonical radial pair; returns the value in the polar
    normalization (equal to the full H~ at the generating state).
    """
    z: float
    kappa2: float
    chart: str
    angular: float

    def __call__(self, radius: float, p_radius: float) -> float:
        return _radial_energy(self.chart, self.z, self.kappa2, radius,
                              POLAR_MOMENTUM_SCALE * p_radius, self.angular)


def radial_reduction(kind: str, integral_values: Union[PolarEvaluation, float],
                     z: float, kappa2: float = 1.0) -> RadialHamiltonian:
    """Reduce a polar Hamiltonian to the radial degree of freedom.

    Args:
        kind: polar kind (see POLAR_KINDS)
        integral_values: PolarEvaluation of a state, or C~^(N) directly
    """
    if kind not in POLAR_KINDS:
        raise ValueError(f'unknown polar kind {kind!r}')
    if isinstance(integral_values, PolarEvaluation):
        angular = integral_values.left[max(integral_values.left)] if integral_values.left else 0.0
    else:
        angular = float(integral_values)
    if angular < 0.0:
        raise ValueError('C~^(N) must be >= 0')
    chart = 'ms' if kind == 'ms_2d' else 'type_i'
    return RadialHamiltonian(z=z, kappa2=kappa2, chart=chart, angular=angular)


# ---------------------------------------------------------------------------
# Cayley-Klein polar metrics (2D, both signatures)
# ---------------------------------------------------------------------------

def cayley_klein_metric(rho: float, z: float, kappa2: float) -> np.ndarray:
    """Coefficients (1, kappa2 S_{-z}(rho)^2) of the constant-curvature polar metric."""
    s = float(kappa_sin(-z, rho))
    return np.array([1.0, kappa2 * s * s])


def polar_metric(rho: float, z: float, kappa2: float) -> np.ndarray:
    """Type-I 2D line element in polar form: Cayley-Klein metric / C_{-z}(rho)."""
    return cayley_klein_metric(rho, z, kappa2) / float(kappa_cos(-z, rho))


def polar_metric_field(z: float, kappa2: float) -> MetricField:
    """The polar line element as a MetricField in (rho, theta); may be Lorentzian."""
    def g(x):
        s = kappa_sin(-z, x[0])
        c = kappa_cos(-z, x[0])
        return jnp.stack([1.0 / c, kappa2 * s * s / c])
    return MetricField(dim=2, g=g, provenance=f'polar type I z={z:g} kappa2={kappa2:g}',
                       line_scale=1.0)


def polar_gaussian_curvature(rho: float, z: float) -> float:
    """K(rho) = -1/2 lambda1^2 sinh^2(lambda1 rho)/cosh(lambda1 rho) = -z^2 S^2 / (2 C)."""
    s = float(kappa_sin(-z, rho))
    c = float(kappa_cos(-z, rho))
    return -0.5 * z * z * s * s / c
