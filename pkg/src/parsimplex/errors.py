"""Exception types shared by the solver modules."""


class SimplexError(Exception):
    pass


class NonPositiveWeight(SimplexError):
    """A dual steepest-edge weight became nonpositive."""


class SingularBasis(SimplexError):
    """INVERT found no acceptable pivot for some basis positions.

    ``positions`` are the basis positions left unpivoted and ``rows`` the
    constraint rows left unpivoted; replacing ``basic[positions[k]]`` with the
    logical of ``rows[k]`` gives a nonsingular basis.
    """

    def __init__(self, positions, rows):
        self.positions = list(positions)
        self.rows = list(rows)
        super().__init__(f"singular basis: {len(self.positions)} dependent column(s)")


class StaleFactors(SimplexError):
    """The update log is too long or the factors failed a residual check."""


class TinyPivot(SimplexError):
    pass


class FtFailure(SimplexError):
    """Forrest-Tomlin update rejected the spike; the caller should reinvert."""


class DualUnbounded(SimplexError):
    """No ratio-test candidate blocks the dual step (LP primal infeasible)."""


class AllTinyPivots(SimplexError):
    pass


class InconsistentBounds(SimplexError):
    pass


class MismatchedSets(SimplexError):
    pass


class SchedulerViolation(SimplexError):
    """The major update issued a number of factor solves other than 2t or 2t+1."""
