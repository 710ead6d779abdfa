"""Exception types shared across the toolchain."""

from __future__ import annotations


class YulVerifyError(Exception):
    """Base class for all toolchain errors."""


class ParseError(YulVerifyError):
    """Syntax error in an annotation form or a source unit, with position info."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{message} (line {line}, col {col})")
        self.message = message
        self.line = line
        self.col = col


class UnknownDirective(ParseError):
    """An @-directive that is not part of the annotation grammar."""


class IllegalDeferred(YulVerifyError):
    """@coq used on a directive that does not admit deferral."""


class UnboundIdentifier(YulVerifyError):
    """A form references a name that is neither bound nor declared."""


class OldOutsidePost(YulVerifyError):
    """`old` used where there is no entry state to refer back to."""


class ResultOutsidePost(YulVerifyError):
    """`result` used outside a postcondition."""


class UnsupportedConstruct(YulVerifyError):
    """Source construct outside the restricted grammar (e.g. multiple returns)."""


class NoLayout(YulVerifyError):
    """A state-variable access was lowered without a storage layout for it."""


class UnsupportedType(YulVerifyError):
    """A state-variable type outside the supported shapes (e.g. deep mapping nests)."""


class StackUnderflow(YulVerifyError):
    """An opcode consumed more operands than the stack holds."""


class NegativeAddress(YulVerifyError):
    """A memory access at a negative byte index."""


class IndexOutOfRange(YulVerifyError):
    """Calldata/trace access outside the populated range."""


class OutOfFuel(YulVerifyError):
    """Concrete evaluation exceeded its step budget."""


class CalleeUnknown(YulVerifyError):
    """Concrete evaluation reached an external callee with no stub."""


class WatchedUnbound(YulVerifyError):
    """@learn names a variable that is not in scope at the loop head."""


class MissingInvariant(YulVerifyError):
    """A loop reached obligation generation with no invariant installed."""


class MissingEcfAnswer(YulVerifyError):
    """An external call site has no effective-callback-freedom answer."""


class UnsupportedSort(YulVerifyError):
    """A term reached SMT emission with a sort outside the supported set."""


class UnsupportedStmt(YulVerifyError):
    """A statement shape reached a stage that cannot encode it."""


class SolverError(YulVerifyError):
    """External solver missing, crashed, or produced unparseable output."""
