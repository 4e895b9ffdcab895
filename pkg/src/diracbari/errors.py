"""Exception hierarchy shared by the solver modules."""


class DiracError(Exception):
    """Base class for all errors raised by :mod:`diracbari`."""


class NotCanonicalizable(DiracError):
    """The 2x2 minor on columns (1, 4) of the boundary matrix vanishes."""


class NotRegular(DiracError):
    """Boundary conditions fail ``ad - bc != 0``."""


class InternalInconsistency(DiracError):
    """Two independent routes to the same quantity disagree (a bug, not bad input)."""


class WrongCase(DiracError):
    """A specialised solver was called on data outside its case."""


class ContourThroughZero(DiracError):
    """A contour edge passes (numerically) through a zero of the function."""


class StepUnderflow(DiracError):
    """The ODE integrator needed more steps than allowed."""


class LocalizationFailure(DiracError):
    """No perturbed zero found near an unperturbed one."""


class NotAnEigenvalue(DiracError):
    """The characteristic determinant is not small at the requested point."""


class ZeroInnerProduct(DiracError):
    """An eigenpair has a vanishing inner product ``(f, g)``."""


class MultipleEigenvalue(DiracError):
    """An operation needing a simple eigenvalue got a multiple one."""


class UnsupportedBranch(DiracError):
    """Closed-form eigenvectors are not available for these coefficients."""


class DegenerateBoundary(DiracError):
    """The string boundary data cannot be brought to canonical form."""


class Inapplicable(DiracError):
    """A criterion was requested outside its hypotheses."""
