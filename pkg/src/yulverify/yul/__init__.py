"""Frontend for the restricted Yul-style contract IR."""

from .ast import (
    Assign,
    Block,
    Break,
    Call,
    Expr,
    ExprStmt,
    For,
    If,
    Leave,
    Let,
    Num,
    SpecStmt,
    Stmt,
    Switch,
    Var,
    YulFunc,
    YulUnit,
)
from .parse import BUILTINS, OPCODES, STORAGE_INTRINSICS, parse_unit
from .printer import print_expr, print_function, print_unit
from .storage import (
    DYNARRAY,
    MAPPING,
    SCALAR,
    READ_INTRINSICS,
    WRITE_INTRINSICS,
    StateVar,
    StorageLayout,
    build_storage_map,
    classify_type,
    lower_spec_accessors,
)

__all__ = [
    "Assign",
    "Block",
    "Break",
    "Call",
    "Expr",
    "ExprStmt",
    "For",
    "If",
    "Leave",
    "Let",
    "Num",
    "SpecStmt",
    "Stmt",
    "Switch",
    "Var",
    "YulFunc",
    "YulUnit",
    "BUILTINS",
    "OPCODES",
    "STORAGE_INTRINSICS",
    "parse_unit",
    "print_expr",
    "print_function",
    "print_unit",
    "DYNARRAY",
    "MAPPING",
    "SCALAR",
    "READ_INTRINSICS",
    "WRITE_INTRINSICS",
    "StateVar",
    "StorageLayout",
    "build_storage_map",
    "classify_type",
    "lower_spec_accessors",
]
