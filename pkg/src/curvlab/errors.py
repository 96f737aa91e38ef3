"""Exception hierarchy for curvlab.

All library errors derive from CurvlabError so callers (and the CLI) can
catch them in one place and map them to exit codes.
"""

from typing import Optional

import numpy as np


class CurvlabError(Exception):
    """Base exception for curvlab errors."""
    pass


class SingularConfigurationError(CurvlabError):
    """A phase-space point where an observable diverges.

    Raised for b_i != 0 at q_i = 0 (centrifugal term) and for the deformed
    Kepler-Coulomb potential at J- = 0.
    """

    def __init__(self, message: str, site: Optional[int] = None):
        super().__init__(message)
        self.site = site


class SingularityAbort(SingularConfigurationError):
    """Integration stopped by the singularity guard."""

    def __init__(self, message: str, time: float, last_state: np.ndarray,
                 site: Optional[int] = None):
        super().__init__(message, site=site)
        self.time = time
        self.last_state = last_state


class DomainError(CurvlabError):
    """Argument outside the principal domain of a chart or formula."""
    pass


class ConvergenceError(CurvlabError):
    """Newton iteration of the implicit midpoint rule did not converge."""

    def __init__(self, message: str, time: float, last_state: np.ndarray,
                 residual: float):
        super().__init__(message)
        self.time = time
        self.last_state = last_state
        self.residual = residual


class ConfigError(CurvlabError):
    """Invalid run configuration (malformed JSON or schema violation)."""

    def __init__(self, message: str, location: Optional[str] = None):
        if location:
            message = f'{location}: {message}'
        super().__init__(message)
        self.location = location
