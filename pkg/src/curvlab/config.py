"""Run configuration: JSON schema, validation and system construction.

A run is described by one JSON object. ``CONFIG_SCHEMA`` is the published
schema and the validator walks that same dict, so ``curvlab schema`` always
prints what is enforced. Unknown keys are rejected at every level with the
dotted key path in the error.

Example config:
    {
      "n": 2,
      "system": {"family": "deformed", "f": "exp_plus", "u": "sw", "dressed": true},
      "params": {"z": 0.3, "b": [0.4, 0.0], "omega": 1.0},
      "initial_state": {"q": [0.6, 0.8], "p": [0.2, -0.3]},
      "integrator": {"dt": 0.001, "t_end": 20.0},
      "monitors": ["casimir", "left", "right", "extra"],
      "outputs": {"trajectory": "traj.csv", "drift": "drift.json"}
    }
"""

import copy
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from curvlab.core_algebra import ModelParams, PhaseState
from curvlab.diffobs import (
    DEFAULT_TOLERANCE,
    Observable,
    generator_observables,
    left_integral_observable,
    right_integral_observable,
)
from curvlab.dynamics import IntegratorSpec
from curvlab.errors import ConfigError
from curvlab.hamiltonians import (
    ClassicalSystem,
    DeformedFamily,
    build_classical,
    build_deformed,
    extra_integral_ms,
)

logger = logging.getLogger(__name__)

MONITOR_KINDS = ('casimir', 'left', 'right', 'extra')

_FLOAT_LIST = {'type': 'list', 'items': 'float'}

CONFIG_SCHEMA: Dict[str, Any] = {
    'type': 'object',
    'fields': {
        'n': {'type': 'int', 'min': 1, 'default': 2,
              'doc': 'degrees of freedom N'},
        'system': {'type': 'object', 'fields': {
            'family': {'type': 'str', 'choices': ['deformed', 'classical'], 'default': 'deformed'},
            'f': {'type': 'str', 'choices': ['identity', 'exp_plus', 'exp_minus'],
                  'default': 'identity', 'doc': 'conformal factor f(zJ-)'},
            'u': {'type': 'str', 'choices': ['none', 'sw', 'kc'], 'default': 'none'},
            'dressed': {'type': 'bool', 'default': False,
                        'doc': 'H = (J+/2 + U) f instead of J+ f/2 + U'},
            'chart': {'type': 'str', 'choices': ['poincare', 'beltrami'], 'default': 'beltrami'},
            'kappa': {'type': 'float', 'default': 0.0},
            'potential': {'type': 'str', 'choices': ['free', 'evans', 'sw', 'kc'], 'default': 'free'},
            'evans_coefficients': dict(_FLOAT_LIST, default=[],
                                       doc='Evans V(r^2) = sum_k a_k (r^2)^k'),
        }},
        'params': {'type': 'object', 'fields': {
            'z': {'type': 'float', 'default': 0.0},
            'b': dict(_FLOAT_LIST, default=None, doc='centrifugal b_i (default zeros)'),
            'kappa2': {'type': 'float', 'default': 1.0},
            'omega': {'type': 'float', 'default': 0.0},
            'k': {'type': 'float', 'default': 0.0},
        }},
        'initial_state': {'type': 'object', 'default': None, 'fields': {
            'q': dict(_FLOAT_LIST),
            'p': dict(_FLOAT_LIST),
        }},
        'seed': {'type': 'int', 'default': 0},
        'samples': {'type': 'int', 'min': 1, 'default': 200},
        'tolerance': {'type': 'float', 'default': DEFAULT_TOLERANCE},
        'integrator': {'type': 'object', 'fields': {
            'method': {'type': 'str', 'choices': ['implicit_midpoint', 'rk_adaptive'],
                       'default': 'implicit_midpoint'},
            'dt': {'type': 'float', 'default': 1e-3},
            'order': {'type': 'int', 'choices': [2, 4], 'default': 4,
                      'doc': '2: implicit midpoint, 4: its triple-jump composition'},
            't_end': {'type': 'float', 'default': 1.0},
            'rtol': {'type': 'float', 'default': 1e-10},
            'atol': {'type': 'float', 'default': 1e-12},
            'max_steps': {'type': 'int', 'min': 1, 'default': 10_000_000},
            'newton_tol': {'type': 'float', 'default': 1e-12},
            'max_newton_iters': {'type': 'int', 'min': 1, 'default': 25},
            'drift_bound': {'type': 'float', 'default': 1e-6},
        }},
        'monitors': {'type': 'list', 'items': 'str', 'choices': list(MONITOR_KINDS),
                     'default': ['casimir', 'left', 'right', 'extra']},
        'outputs': {'type': 'object', 'fields': {
            'report': {'type': 'str', 'default': 'verify.json'},
            'trajectory': {'type': 'str', 'default': 'trajectory.csv'},
            'drift': {'type': 'str', 'default': 'drift.json'},
            'curvature': {'type': 'str', 'default': 'curvature.csv'},
            'sweep': {'type': 'str', 'default': 'sweep.json'},
            'transform': {'type': 'str', 'default': 'transform.json'},
        }},
        'curvature': {'type': 'object', 'fields': {
            'kind': {'type': 'str', 'choices': ['type_i', 'ms'], 'default': 'type_i'},
            'method': {'type': 'str', 'choices': ['ad', 'fd'], 'default': 'fd'},
            'q_min': {'type': 'float', 'default': 0.1},
            'q_max': {'type': 'float', 'default': 1.0},
            'points': {'type': 'int', 'min': 1, 'default': 20},
        }},
        'sweep': {'type': 'object', 'fields': {
            'axes': {'type': 'map', 'default': {},
                     'doc': 'z, kappa2, omega, k: list of floats; b, q, p: list of vectors'},
            'workers': {'type': 'int', 'min': 1, 'default': None},
        }},
        'transform': {'type': 'object', 'fields': {
            'chart': {'type': 'str', 'choices': ['type_i', 'ms'], 'default': 'type_i'},
            'kappa2': {'type': 'float', 'default': 1.0},
        }},
    },
}

SWEEP_AXES = ('z', 'kappa2', 'omega', 'k', 'b', 'q', 'p')

_TYPES = {'int': int, 'float': (int, float), 'bool': bool, 'str': str}


def _check_scalar(value, kind: str, path: str):
    expected = _TYPES[kind]
    # bool is an int subclass; keep them apart
    if isinstance(value, bool) and kind != 'bool':
        raise ConfigError(f'expected {kind}, got bool', path)
    if not isinstance(value, expected):
        raise ConfigError(f'expected {kind}, got {type(value).__name__}', path)
    return float(value) if kind == 'float' else value


def _validate(value, schema: Dict[str, Any], path: str):
    kind = schema['type']
    if value is None:
        if 'default' in schema and schema['default'] is None:
            return None
        raise ConfigError('null is not allowed here', path)
    if kind == 'object':
        if not isinstance(value, dict):
            raise ConfigError(f'expected object, got {type(value).__name__}', path)
        known = schema['fields']
        for key in value:
            if key not in known:
                raise ConfigError('unknown key', f'{path}.{key}' if path else key)
        out = {}
        for key, sub in known.items():
            sub_path = f'{path}.{key}' if path else key
            if key in value:
                out[key] = _validate(value[key], sub, sub_path)
            elif 'default' in sub:
                out[key] = copy.deepcopy(sub['default'])
            elif sub['type'] == 'object':
                out[key] = _validate({}, sub, sub_path)
            else:
                raise ConfigError('required key missing', sub_path)
        return out
    if kind == 'list':
        if not isinstance(value, list):
            raise ConfigError(f'expected list, got {type(value).__name__}', path)
        items = [_check_scalar(v, schema['items'], f'{path}[{i}]') for i, v in enumerate(value)]
        for i, v in enumerate(items):
            if 'choices' in schema and v not in schema['choices']:
                raise ConfigError(f'{v!r} not one of {schema["choices"]}', f'{path}[{i}]')
        return items
    if kind == 'map':
        if not isinstance(value, dict):
            raise ConfigError(f'expected object, got {type(value).__name__}', path)
        return dict(value)
    value = _check_scalar(value, kind, path)
    if 'choices' in schema and value not in schema['choices']:
        raise ConfigError(f'{value!r} not one of {schema["choices"]}', path)
    if 'min' in schema and value < schema['min']:
        raise ConfigError(f'must be >= {schema["min"]}', path)
    return value


def validate_dict(data: Dict[str, Any]) -> Dict[str, Any]:
    """Validate raw JSON data against CONFIG_SCHEMA and fill defaults."""
    return _validate(data, CONFIG_SCHEMA, '')


# ---------------------------------------------------------------------------
# Typed configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemConfig:
    """Which Hamiltonian to build."""
    family: str = 'deformed'
    f: str = 'identity'
    u: str = 'none'
    dressed: bool = False
    chart: str = 'beltrami'
    kappa: float = 0.0
    potential: str = 'free'
    evans_coefficients: Tuple[float, ...] = ()

    def deformed(self, params: ModelParams) -> DeformedFamily:
        return DeformedFamily(self.f, self.u, params, dressed=self.dressed)

    def classical(self, params: ModelParams) -> ClassicalSystem:
        evans = None
        if self.potential == 'evans':
            coefficients = self.evans_coefficients

            def evans(r2):
                return sum(a * r2 ** k for k, a in enumerate(coefficients))
        return ClassicalSystem(self.chart, self.kappa, self.potential, params.b,
                               omega=params.omega, k=params.k, evans=evans)

    def build(self, params: ModelParams) -> Tuple[Observable, List[Observable]]:
        """Hamiltonian and its system-specific extra integrals."""
        if self.family == 'classical':
            return build_classical(self.classical(params))
        spec = self.deformed(params)
        h = build_deformed(spec)
        extras = []
        if self.f == 'exp_plus' and params.n >= 2:
            if self.u == 'none':
                extras.append(extra_integral_ms(params.n, params))
            elif self.u == 'sw' and self.dressed and params.z != 0.0:
                extras.append(extra_integral_ms(params.n, params, with_sw=True))
        return h, extras

    def monitors(self, params: ModelParams, kinds) -> List[Observable]:
        """Integrals to record along a trajectory."""
        z_params = params if self.family == 'deformed' else params.with_z(0.0)
        _, extras = self.build(params)
        out: List[Observable] = []
        n = params.n
        if 'casimir' in kinds:
            out.append(generator_observables(z_params)[3])
        if 'left' in kinds:
            # C^(N) is the full Casimir
            top = n if 'casimir' in kinds else n + 1
            out += [left_integral_observable(z_params, m) for m in range(2, top)]
        if 'right' in kinds:
            out += [right_integral_observable(z_params, m) for m in range(2, n)]
        if 'extra' in kinds:
            out += extras
        return out


@dataclass(frozen=True)
class OutputConfig:
    report: str = 'verify.json'
    trajectory: str = 'trajectory.csv'
    drift: str = 'drift.json'
    curvature: str = 'curvature.csv'
    sweep: str = 'sweep.json'
    transform: str = 'transform.json'

    def resolve(self, name: str, out_dir: Optional[str] = None) -> Path:
        """Output path; relative paths are placed under out_dir when given."""
        path = Path(getattr(self, name))
        if out_dir and not path.is_absolute():
            path = Path(out_dir) / path
        return path


@dataclass(frozen=True)
class CurvatureConfig:
    kind: str = 'type_i'
    method: str = 'fd'
    q_min: float = 0.1
    q_max: float = 1.0
    points: int = 20


@dataclass(frozen=True)
class SweepConfig:
    axes: Dict[str, list] = field(default_factory=dict)
    workers: Optional[int] = None


@dataclass(frozen=True)
class TransformConfig:
    chart: str = 'type_i'
    kappa2: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration."""
    n: int
    system: SystemConfig
    params: ModelParams
    initial_state: Optional[PhaseState]
    seed: int
    samples: int
    tolerance: float
    integrator: IntegratorSpec
    drift_bound: float
    monitors: Tuple[str, ...]
    outputs: OutputConfig
    curvature: CurvatureConfig
    sweep: SweepConfig
    transform: TransformConfig
    raw: Dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        """Validate and convert raw JSON data.

        Raises:
            ConfigError: schema violation, with the dotted key path
        """
        d = validate_dict(data)
        n = d['n']
        p = d['params']
        b = p['b'] if p['b'] is not None else [0.0] * n
        if len(b) != n:
            raise ConfigError(f'expected {n} entries, got {len(b)}', 'params.b')
        try:
            params = ModelParams(z=p['z'], b=tuple(b), kappa2=p['kappa2'],
                                 omega=p['omega'], k=p['k'])
        except ValueError as e:
            raise ConfigError(str(e), 'params')

        state = None
        if d['initial_state'] is not None:
            q, pv = d['initial_state']['q'], d['initial_state']['p']
            if len(q) != n or len(pv) != n:
                raise ConfigError(f'q and p need {n} entries', 'initial_state')
            state = PhaseState.from_lists(q, pv)

        s = d['system']
        system = SystemConfig(family=s['family'], f=s['f'], u=s['u'], dressed=s['dressed'],
                              chart=s['chart'], kappa=s['kappa'], potential=s['potential'],
                              evans_coefficients=tuple(s['evans_coefficients']))

        integ = dict(d['integrator'])
        drift_bound = integ.pop('drift_bound')
        try:
            integrator = IntegratorSpec.from_dict(integ)
        except ValueError as e:
            raise ConfigError(str(e), 'integrator')

        axes = d['sweep']['axes']
        for key in axes:
            if key not in SWEEP_AXES:
                raise ConfigError(f'unknown sweep axis (expected one of {SWEEP_AXES})',
                                  f'sweep.axes.{key}')
            if not isinstance(axes[key], list) or not axes[key]:
                raise ConfigError('expected a non-empty list', f'sweep.axes.{key}')

        return cls(n=n, system=system, params=params, initial_state=state,
                   seed=d['seed'], samples=d['samples'], tolerance=d['tolerance'],
                   integrator=integrator, drift_bound=drift_bound,
                   monitors=tuple(d['monitors']), outputs=OutputConfig(**d['outputs']),
                   curvature=CurvatureConfig(**d['curvature']),
                   sweep=SweepConfig(axes=axes, workers=d['sweep']['workers']),
                   transform=TransformConfig(**d['transform']), raw=d)

    def to_dict(self) -> Dict[str, Any]:
        """Fully-defaulted configuration as validated."""
        return dict(self.raw)

    def with_seed(self, seed: Optional[int]) -> 'RunConfig':
        if seed is None:
            return self
        raw = dict(self.raw, seed=seed)
        return RunConfig.from_dict(raw)


def load_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    """Load a JSON config file; no path means all defaults.

    Raises:
        ConfigError: unreadable file, malformed JSON (with line and column)
            or schema violation
    """
    if path is None:
        return RunConfig.from_dict({})
    path = Path(path)
    try:
        with open(path) as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError('file not found', str(path))
    except json.JSONDecodeError as e:
        raise ConfigError(e.msg, f'{path}:{e.lineno}:{e.colno}')
    logger.debug('loaded config %s', path)
    return RunConfig.from_dict(data)


def schema_json() -> str:
    return json.dumps(CONFIG_SCHEMA, indent=2)
