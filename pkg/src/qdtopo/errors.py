"""Exception types shared across the package."""


class SingularSystem(Exception):
    """The reduced stiffness system could not be solved (rigid-body modes
    left unconstrained, or a numerically singular factorization)."""


class NonConvergence(Exception):
    """An iterative linear solve hit its iteration cap before reaching the
    residual tolerance."""


class BisectionFailure(Exception):
    """The optimality-criteria volume bisection could not reach the target
    volume fraction (e.g. forced voids leave too little designable area)."""


class InvalidDesign(Exception):
    """A candidate design cannot be evaluated: a load, output, or support DOF
    is buried inside forced-void material, the volume target is unreachable,
    or the FE solve failed.  Callers discard the candidate and continue."""


class EmptyArchive(Exception):
    """Parent selection was requested from an archive with no occupied cells."""
