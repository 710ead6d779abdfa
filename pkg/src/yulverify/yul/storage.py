"""Storage layout: state-variable declarations to per-slot abstraction.

Each declared state variable owns one abstract slot, numbered sequentially
from 0x00 in declaration order.  Mappings and dynamic arrays are abstracted
as per-slot total maps (no hashed-slot modeling); a dynamic array adds a
length cell.  Every variable carries accessor descriptors naming the
canonical read/write/metadata intrinsics used in program text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..annotations import Form, Ident, Length, Lit, MapGet, SlotRef, _children
from ..errors import NoLayout, UnsupportedType

SCALAR = "scalar"
MAPPING = "mapping"
DYNARRAY = "dynarray"

#: Canonical accessor intrinsics per kind: (read, write, metadata)
ACCESSORS = {
    SCALAR: ("sload", "sstore", None),
    MAPPING: ("map_get", "map_set", None),
    DYNARRAY: ("arr_get", "arr_set", "arr_len"),
}

#: Extra write-family intrinsics (beyond the canonical write accessor).
WRITE_INTRINSICS = frozenset({"sstore", "map_set", "map2_set", "arr_set", "arr_push"})
READ_INTRINSICS = frozenset({"sload", "map_get", "map2_get", "arr_get", "arr_len"})


@dataclass(frozen=True)
class StateVar:
    name: str
    slot: int
    kind: str
    depth: int = 1  # mapping nesting depth

    @property
    def reads(self) -> str:
        if self.kind == MAPPING and self.depth == 2:
            return "map2_get"
        return ACCESSORS[self.kind][0]

    @property
    def writes(self) -> str:
        if self.kind == MAPPING and self.depth == 2:
            return "map2_set"
        return ACCESSORS[self.kind][1]

    @property
    def meta(self):
        return ACCESSORS[self.kind][2]


@dataclass
class StorageLayout:
    vars: dict[str, StateVar] = field(default_factory=dict)

    def __iter__(self):
        return iter(self.vars.values())

    def __len__(self) -> int:
        return len(self.vars)

    def __contains__(self, name: str) -> bool:
        return name in self.vars

    def by_slot(self, slot: int) -> StateVar:
        for v in self.vars.values():
            if v.slot == slot:
                return v
        raise KeyError(slot)

    def get(self, name: str) -> StateVar:
        return self.vars[name]


_SCALAR_TYPES = {"uint256", "address", "bool", "int", "uint"}
_MAPPING_RE = re.compile(r"^mapping\s*(\(|$)")


def classify_type(descriptor: str) -> tuple[str, int]:
    """Type descriptor -> (kind, depth).  Raises UnsupportedType."""
    text = descriptor.strip()
    if text in _SCALAR_TYPES:
        return (SCALAR, 1)
    if text.endswith("[]"):
        inner = text[:-2].strip()
        if inner in _SCALAR_TYPES:
            return (DYNARRAY, 1)
        raise UnsupportedType(f"unsupported array element type {inner!r}")
    if text == "mapping" or _MAPPING_RE.match(text):
        depth = max(1, text.count("mapping"))
        if depth > 2:
            raise UnsupportedType(f"mapping nesting depth {depth} > 2: {descriptor!r}")
        return (MAPPING, depth)
    if text == "array":
        return (DYNARRAY, 1)
    raise UnsupportedType(f"unsupported state variable type {descriptor!r}")


def build_storage_map(decls: list[tuple[str, str]]) -> StorageLayout:
    """Declarations (name, type descriptor) in order -> layout with slots 0x00..."""
    layout = StorageLayout()
    for i, (name, descriptor) in enumerate(decls):
        kind, depth = classify_type(descriptor)
        if name in layout.vars:
            raise UnsupportedType(f"duplicate state variable {name!r}")
        layout.vars[name] = StateVar(name, i, kind, depth)
    return layout


def lower_spec_accessors(form: Form, layout: StorageLayout) -> Form:
    """Rewrite state-variable identifiers in a form into slot references.

    Idempotent; raises NoLayout when a state-style access (indexing or
    `.length`) hits a name with no declared layout.
    """

    def walk(f: Form) -> Form:
        if isinstance(f, Ident):
            if f.name in layout:
                sv = layout.get(f.name)
                return SlotRef(sv.name, sv.slot, sv.kind, sv.depth)
            return f
        if isinstance(f, SlotRef):
            return f
        if isinstance(f, MapGet):
            base = walk(f.base)
            key = walk(f.key)
            root = base
            while isinstance(root, MapGet):
                root = root.base
            if isinstance(root, Ident):
                raise NoLayout(f"indexed access to {root.name!r} with no storage layout")
            return MapGet(base, key)
        if isinstance(f, Length):
            base = walk(f.base)
            if isinstance(base, Ident):
                raise NoLayout(f".length on {base.name!r} with no storage layout")
            if isinstance(base, SlotRef) and base.kind != DYNARRAY:
                raise UnsupportedType(f".length on non-array {base.name!r}")
            return Length(base)
        # Generic reconstruction for the remaining node shapes.
        kids = _children(f)
        if not kids:
            return f
        new_kids = [walk(c) for c in kids]
        if all(a is b for a, b in zip(kids, new_kids)):
            return f
        return _rebuild(f, new_kids)

    return walk(form)


def _rebuild(f: Form, kids: list[Form]) -> Form:
    from .. import annotations as A

    if isinstance(f, A.Old):
        return A.Old(kids[0])
    if isinstance(f, A.Pow):
        return A.Pow(kids[0], f.exp)
    if isinstance(f, A.Arith):
        return A.Arith(f.op, kids[0], kids[1])
    if isinstance(f, A.Cmp):
        return A.Cmp(f.op, kids[0], kids[1])
    if isinstance(f, A.Not):
        return A.Not(kids[0])
    if isinstance(f, A.And):
        return A.And(kids[0], kids[1])
    if isinstance(f, A.Or):
        return A.Or(kids[0], kids[1])
    if isinstance(f, A.Implies):
        return A.Implies(kids[0], kids[1])
    if isinstance(f, A.Binder):
        return A.Binder(f.kind, f.vars, kids[0])
    raise TypeError(f"cannot rebuild {f!r}")  # pragma: no cover
