"""Exception hierarchy shared by all gtssm modules."""


class GtssmError(Exception):
    pass


class InvalidTable(GtssmError):
    pass


class SizeLimit(GtssmError):
    pass


class NotASubgroup(GtssmError):
    pass


class NotNormal(GtssmError):
    pass


class NotAbelian(GtssmError):
    pass


class NotSolvable(GtssmError):
    """Raised when the derived series stalls at a nontrivial perfect subgroup.

    ``residual`` holds the stabilized subgroup mask; for a perfect group such
    as A5 it is the whole group.
    """

    def __init__(self, group_spec, residual):
        self.group_spec = group_spec
        self.residual = residual
        super().__init__(
            f"{group_spec} is not solvable: derived series stabilizes at a "
            f"perfect subgroup of order {int(residual.order)}"
        )


class InvalidSeries(GtssmError):
    pass


class DegenerateCenters(GtssmError):
    pass


class NotFound(GtssmError):
    pass


class MissingTableEntry(GtssmError):
    pass


class StateExplosion(GtssmError):
    pass


class BudgetExceeded(GtssmError):
    pass


class InvalidModel(GtssmError):
    pass


class UnknownState(GtssmError):
    pass


class FormatVersionMismatch(GtssmError):
    pass


class CorruptRecord(GtssmError):
    def __init__(self, line, reason):
        self.line = line
        super().__init__(f"line {line}: {reason}")
