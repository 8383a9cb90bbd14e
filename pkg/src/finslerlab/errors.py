"""Exception hierarchy.

Every error carries a short machine-readable ``code`` which the CLI reports
in its error object.
"""


class FinslerError(Exception):
    code = "finsler.error"

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        out = {"code": self.code, "message": str(self)}
        for key, val in self.details.items():
            out[key] = val
        return out


class JetDomainError(FinslerError, ValueError):
    code = "jet.domain"


class ChartError(FinslerError, ValueError):
    code = "chart.outside"


class InadmissibleVectorError(FinslerError, ValueError):
    code = "vector.inadmissible"


class DegenerateTensorError(FinslerError, ValueError):
    code = "tensor.degenerate"


class BreakAmbiguityError(FinslerError, ValueError):
    code = "curve.break_ambiguous"


class BreakMismatchError(FinslerError, ValueError):
    code = "curve.break_mismatch"


class DomainExitError(FinslerError):
    """Integration left the chart or the admissible cone."""

    code = "integration.domain_exit"

    def __init__(self, message, t_exit, **details):
        super().__init__(message, t_exit=float(t_exit), **details)
        self.t_exit = float(t_exit)


class ExpDomainError(DomainExitError):
    code = "exp.not_in_domain"


class StepFailureError(FinslerError):
    code = "integration.step_failure"


class DegenerateFlagError(FinslerError, ValueError):
    code = "flag.degenerate"


class NotGeodesicError(FinslerError, ValueError):
    code = "curve.not_geodesic"


class NullGeodesicError(FinslerError, ValueError):
    code = "geodesic.null"


class MismatchedGeodesicError(FinslerError, ValueError):
    code = "jacobi.mismatched_geodesic"


class DegenerateRestrictionError(FinslerError, ValueError):
    code = "submanifold.degenerate_restriction"


class OrthogonalityError(FinslerError, ValueError):
    code = "submanifold.not_orthogonal"


class NotOnSubmanifoldError(FinslerError, ValueError):
    code = "submanifold.endpoint_off"


class NoNormalSectionError(FinslerError, ValueError):
    code = "submanifold.no_normal"


class NotTangentError(FinslerError, ValueError):
    code = "submanifold.not_tangent"


class ImmersionRankError(FinslerError, ValueError):
    code = "submanifold.rank"


class ScenarioError(FinslerError):
    """Schema-level problem in a scenario document."""

    def __init__(self, code, message, **details):
        super().__init__(message, **details)
        self.code = code
