"""curvlab - deformed sl(2,R) coalgebra Hamiltonians, integrals and geometry.

Modules:
    core_algebra  - generators, Casimirs and universal integrals
    diffobs       - differentiable observables and Poisson-bracket checks
    hamiltonians  - deformed family and classical curved systems
    geometry      - induced metrics, curvatures and geodesic polar charts
    dynamics      - implicit midpoint / RK45 flows, drift monitoring, sweeps
    config        - JSON run configuration and schema
    export        - atomic CSV/JSON output

Command line: ``curvlab {verify,simulate,curvature,sweep,transform,schema}``.
"""

import jax

# Every tolerance in the package assumes float64
jax.config.update('jax_enable_x64', True)

from curvlab.core_algebra import (  # noqa: E402
    GeneratorTriple,
    IntegralSet,
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
from curvlab.diffobs import (  # noqa: E402
    BracketReport,
    Observable,
    independence_rank,
    poisson_bracket,
    sample_states,
    verify_algebra,
)
from curvlab.dynamics import IntegratorSpec, Trajectory, drift_report, hamilton_flow, sweep  # noqa: E402
from curvlab.errors import (  # noqa: E402
    ConfigError,
    ConvergenceError,
    CurvlabError,
    DomainError,
    SingularConfigurationError,
    SingularityAbort,
)
from curvlab.geometry import (  # noqa: E402
    CollectiveVars,
    MetricField,
    PolarState,
    collective_vars,
    curvature_of_family,
    from_polar,
    gaussian_curvature_2d,
    metric_from_kinetic,
    polar_hamiltonian,
    radial_reduction,
    sectional_curvatures,
    sectional_curvatures_3d,
    to_polar,
)
from curvlab.hamiltonians import (  # noqa: E402
    ClassicalSystem,
    DeformedFamily,
    ambient_coordinates,
    build_classical,
    build_deformed,
    extra_integral_ms,
)

__version__ = '0.1.0'

__all__ = [
    'BracketReport',
    'ClassicalSystem',
    'CollectiveVars',
    'ConfigError',
    'ConvergenceError',
    'CurvlabError',
    'DeformedFamily',
    'DomainError',
    'GeneratorTriple',
    'IntegralSet',
    'IntegratorSpec',
    'MetricField',
    'ModelParams',
    'Observable',
    'PhaseState',
    'PolarState',
    'SingularConfigurationError',
    'SingularityAbort',
    'Trajectory',
    'ambient_coordinates',
    'build_classical',
    'build_deformed',
    'casimir',
    'classical_generators',
    'classical_integrals',
    'collective_vars',
    'curvature_of_family',
    'drift_report',
    'exponent_K',
    'exponent_K_pair',
    'exponent_Ktilde',
    'exponent_Ktilde_pair',
    'extra_integral_ms',
    'from_polar',
    'gaussian_curvature_2d',
    'generators',
    'hamilton_flow',
    'independence_rank',
    'metric_from_kinetic',
    'partial_generators',
    'poisson_bracket',
    'polar_hamiltonian',
    'radial_reduction',
    'sample_states',
    'sectional_curvatures',
    'sectional_curvatures_3d',
    'sinc_hyp',
    'sweep',
    'to_polar',
    'universal_integrals',
    'verify_algebra',
]
