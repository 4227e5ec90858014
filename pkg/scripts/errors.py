"""
Exception and warning types shared by the skdv modules.

Every error carries the CLI exit code it maps to, so `skdv.py` can turn any
failure into a machine-readable error report without a lookup table.
"""

from typing import Any, Dict, List, Optional


class SkdvError(Exception):
    """Base class for all skdv failures."""

    exit_code = 2
    kind = 'error'

    def to_dict(self) -> Dict[str, Any]:
        return {'error': self.kind, 'message': str(self)}


class InvalidInputError(SkdvError):
    kind = 'invalid-input'


class ResolutionError(SkdvError):
    kind = 'resolution'


class WindowError(SkdvError):
    kind = 'window'


class UndefinedRatioError(SkdvError):
    kind = 'undefined-ratio'


class FitError(SkdvError):
    kind = 'fit'


class ConfigValidationError(SkdvError):
    kind = 'validation'

    def __init__(self, message: str, fields: Optional[List[str]] = None):
        super().__init__(message)
        self.fields = list(fields or [])

    def to_dict(self) -> Dict[str, Any]:
        out = super().to_dict()
        out['fields'] = self.fields
        return out


class BlowUpError(SkdvError):
    """Raised when a state stops being finite or exceeds the blow-up threshold."""

    exit_code = 3
    kind = 'blow-up'

    def __init__(self, message: str, t: float, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.t = t
        self.diagnostics = dict(diagnostics or {})
        # filled in by evolve() with the trajectory recorded before the failure
        self.trajectory = None

    def to_dict(self) -> Dict[str, Any]:
        out = super().to_dict()
        out['t'] = self.t
        out['diagnostics'] = self.diagnostics
        return out


class AcceptanceBandError(SkdvError):
    exit_code = 4
    kind = 'acceptance-band'


class AsymptoticsWarning(UserWarning):
    """Parameters are below the range where the asymptotic scalings apply."""


class StabilityWarning(UserWarning):
    """Time step is large for the nonlinear sub-flow."""
