"""Functional EVM machine model.

Machine words are mathematical integers (arbitrary precision).  With
`wrap_bits=N` arithmetic results are reduced modulo 2^N for EVM-faithful
concrete runs; by default results are unbounded.  Memory is a growable word
array with byte addressing at 32-byte granularity; growth rounding, padding
and the gas rule for memory expansion follow the word-array semantics
exactly, including their inclusive padding (the data list may run one word
past `size`; `len(data) >= size` always holds).

Storage is per-slot: scalar slots hold a word; mapping slots hold a total
key -> word map; dynamic-array slots hold an index -> word map plus a length
word.  Slot identities come from the unit's storage layout.

The `reverted` flag, once set, absorbs every later step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import IndexOutOfRange, NegativeAddress, StackUnderflow

GAS_VERYLOW = 3
DEFAULT_GAS = 10_000_000
WORD_BITS = 256


def mem_cost(a: int) -> int:
    """Gas cost attributable to a memory size of `a` words."""
    return 3 * a + (a * a) // 512


def mem_ceiling(x: int) -> int:
    """Words needed for byte extent x, by the model's own rounding: (x+32)/32."""
    return (x + 32) // 32


def round_up(max_index: int, byte_idx: int) -> int:
    """New word size after touching byte_idx, never shrinking max_index."""
    return max(max_index, mem_ceiling(byte_idx + 32))


def k_zeroes(k: int) -> list[int]:
    """k+1 zero words for k >= 0; empty for negative k."""
    if k < 0:
        return []
    return [0] * (k + 1)


def pad_mem(data: list[int], cur_size: int, new_size: int) -> list[int]:
    return data + k_zeroes(new_size - cur_size)


@dataclass
class MemArray:
    """Growable word memory with a sticky `peek` of the last read."""

    data: list[int] = field(default_factory=list)
    size: int = 0
    peek: int = 0

    def copy(self) -> "MemArray":
        return MemArray(list(self.data), self.size, self.peek)


def get_mem(byte_idx: int, m: MemArray) -> MemArray:
    """Read the word at byte_idx, growing (zero-padded) when out of bounds."""
    if byte_idx < 0:
        raise NegativeAddress(f"memory read at byte {byte_idx}")
    if byte_idx < m.size * 32:
        return MemArray(m.data, m.size, m.data[byte_idx // 32])
    new_size = round_up(m.size, byte_idx)
    new_data = pad_mem(m.data, m.size, new_size)
    return MemArray(new_data, new_size, 0)


def set_mem(byte_idx: int, value: int, m: MemArray) -> MemArray:
    """Write the word at byte_idx, growing by the same rounding as reads."""
    if byte_idx < 0:
        raise NegativeAddress(f"memory write at byte {byte_idx}")
    if byte_idx < m.size * 32:
        data = list(m.data)
        data[byte_idx // 32] = value
        return MemArray(data, m.size, m.peek)
    new_size = round_up(m.size, byte_idx)
    data = pad_mem(m.data, m.size, new_size)
    data[byte_idx // 32] = value
    return MemArray(data, new_size, m.peek)


@dataclass
class Message:
    sender: int = 0
    value: int = 0
    recipient: int = 0


@dataclass
class StorageModel:
    scalars: dict[int, int] = field(default_factory=dict)
    maps: dict[int, dict[int, int]] = field(default_factory=dict)
    arrays: dict[int, dict[int, int]] = field(default_factory=dict)
    lengths: dict[int, int] = field(default_factory=dict)

    def copy(self) -> "StorageModel":
        return StorageModel(
            dict(self.scalars),
            {k: dict(v) for k, v in self.maps.items()},
            {k: dict(v) for k, v in self.arrays.items()},
            dict(self.lengths),
        )

    # Scalar slots -----------------------------------------------------
    def load(self, slot: int) -> int:
        return self.scalars.get(slot, 0)

    def store(self, slot: int, value: int) -> None:
        self.scalars[slot] = value

    # Mapping slots ----------------------------------------------------
    def map_get(self, slot: int, key: int) -> int:
        return self.maps.get(slot, {}).get(key, 0)

    def map_set(self, slot: int, key: int, value: int) -> None:
        self.maps.setdefault(slot, {})[key] = value

    # Dynamic-array slots ----------------------------------------------
    def arr_get(self, slot: int, idx: int) -> int:
        return self.arrays.get(slot, {}).get(idx, 0)

    def arr_set(self, slot: int, idx: int, value: int) -> None:
        self.arrays.setdefault(slot, {})[idx] = value

    def arr_len(self, slot: int) -> int:
        return self.lengths.get(slot, 0)

    def arr_push(self, slot: int, value: int) -> None:
        n = self.arr_len(slot)
        self.arr_set(slot, n, value)
        self.lengths[slot] = n + 1


@dataclass
class EvmState:
    stack: list[int] = field(default_factory=list)
    calldata: list[int] = field(default_factory=list)
    memory: MemArray = field(default_factory=MemArray)
    storage: StorageModel = field(default_factory=StorageModel)
    message: Message = field(default_factory=Message)
    pc: int = 0
    gas: int = DEFAULT_GAS
    timestamp: int = 0
    reverted: bool = False
    timestamp_tainted: bool = False

    def copy(self) -> "EvmState":
        return EvmState(
            list(self.stack),
            list(self.calldata),
            self.memory.copy(),
            self.storage.copy(),
            Message(self.message.sender, self.message.value, self.message.recipient),
            self.pc,
            self.gas,
            self.timestamp,
            self.reverted,
            self.timestamp_tainted,
        )

    def push(self, value: int) -> None:
        self.stack.append(value)

    def pop(self) -> int:
        if not self.stack:
            raise StackUnderflow("pop from empty stack")
        return self.stack.pop()


def param(s: EvmState, i: int) -> int:
    """The i-th call argument from calldata."""
    if i < 0 or i >= len(s.calldata):
        raise IndexOutOfRange(f"calldata index {i} out of range")
    return s.calldata[i]


def _wrap(value: int, wrap_bits: Optional[int]) -> int:
    if wrap_bits is None:
        return value
    return value % (1 << wrap_bits)


def _to_unsigned(value: int, bits: int) -> int:
    return value % (1 << bits)


#: opcode -> operand count for the pure stack ops.
_PURE_ARITY = {
    "add": 2,
    "mul": 2,
    "sub": 2,
    "div": 2,
    "lt": 2,
    "gt": 2,
    "eq": 2,
    "iszero": 1,
    "and": 2,
    "or": 2,
}


def step(op: str, s: EvmState, wrap_bits: Optional[int] = None) -> EvmState:
    """Apply one opcode to a state, returning the successor state.

    Operands are taken from the stack (pushed beforehand, last argument on
    top), results are pushed.  A reverted state absorbs every step.
    """
    if s.reverted:
        return s
    s = s.copy()
    if op in _PURE_ARITY:
        n = _PURE_ARITY[op]
        if len(s.stack) < n:
            raise StackUnderflow(f"{op} needs {n} operands")
        args = [s.pop() for _ in range(n)]
        args.reverse()
        s.push(_pure(op, args, wrap_bits))
        return s
    if op == "caller":
        s.push(s.message.sender)
        return s
    if op == "timestamp":
        s.push(s.timestamp)
        s.timestamp_tainted = True
        return s
    if op == "sload":
        slot = s.pop()
        s.push(s.storage.load(slot))
        return s
    if op == "sstore":
        slot, value = _pop2(s)
        s.storage.store(slot, value)
        return s
    if op == "mload":
        byte_idx = s.pop()
        before = s.memory
        after = get_mem(byte_idx, before)
        s.memory = after
        s.gas -= mem_cost(after.size) - mem_cost(before.size) + GAS_VERYLOW
        s.push(after.peek)
        return s
    if op == "mstore":
        byte_idx, value = _pop2(s)
        before = s.memory
        after = set_mem(byte_idx, value, before)
        s.memory = after
        s.gas -= mem_cost(after.size) - mem_cost(before.size) + GAS_VERYLOW
        return s
    if op == "revert":
        # Operands (offset, size) are consumed if present; the flag is what
        # matters to the model.
        for _ in range(min(2, len(s.stack))):
            s.pop()
        s.reverted = True
        return s
    if op == "map_get":
        slot, key = _pop2(s)
        s.push(s.storage.map_get(slot, key))
        return s
    if op == "map_set":
        slot, key, value = _pop3(s)
        s.storage.map_set(slot, key, value)
        return s
    if op == "map2_get":
        slot, k1, k2 = _pop3(s)
        s.push(s.storage.map_get(slot, _pair(k1, k2)))
        return s
    if op == "map2_set":
        if len(s.stack) < 4:
            raise StackUnderflow("map2_set needs 4 operands")
        value = s.pop()
        k2 = s.pop()
        k1 = s.pop()
        slot = s.pop()
        s.storage.map_set(slot, _pair(k1, k2), value)
        return s
    if op == "arr_get":
        slot, idx = _pop2(s)
        s.push(s.storage.arr_get(slot, idx))
        return s
    if op == "arr_set":
        slot, idx, value = _pop3(s)
        s.storage.arr_set(slot, idx, value)
        return s
    if op == "arr_len":
        slot = s.pop()
        s.push(s.storage.arr_len(slot))
        return s
    if op == "arr_push":
        slot, value = _pop2(s)
        s.storage.arr_push(slot, value)
        return s
    raise ValueError(f"unknown opcode {op!r}")


def _pure(op: str, args: list[int], wrap_bits: Optional[int]) -> int:
    if op == "add":
        return _wrap(args[0] + args[1], wrap_bits)
    if op == "mul":
        return _wrap(args[0] * args[1], wrap_bits)
    if op == "sub":
        return _wrap(args[0] - args[1], wrap_bits)
    if op == "div":
        a, b = args
        if b == 0:
            return 0
        sign = -1 if (a < 0) != (b < 0) else 1
        return _wrap(sign * (abs(a) // abs(b)), wrap_bits)
    if op == "lt":
        return 1 if args[0] < args[1] else 0
    if op == "gt":
        return 1 if args[0] > args[1] else 0
    if op == "eq":
        return 1 if args[0] == args[1] else 0
    if op == "iszero":
        return 1 if args[0] == 0 else 0
    bits = wrap_bits or WORD_BITS
    a, b = _to_unsigned(args[0], bits), _to_unsigned(args[1], bits)
    if op == "and":
        return a & b
    if op == "or":
        return a | b
    raise ValueError(f"unknown pure op {op!r}")  # pragma: no cover


def _pop2(s: EvmState) -> tuple[int, int]:
    if len(s.stack) < 2:
        raise StackUnderflow("need 2 operands")
    b = s.pop()
    a = s.pop()
    return a, b


def _pop3(s: EvmState) -> tuple[int, int, int]:
    if len(s.stack) < 3:
        raise StackUnderflow("need 3 operands")
    c = s.pop()
    b = s.pop()
    a = s.pop()
    return a, b, c


def _pair(k1: int, k2: int) -> int:
    """Injective pairing for two-level mapping keys (concrete runs only)."""
    return (k1 << WORD_BITS) ^ k2 if k1 >= 0 and k2 >= 0 else hash((k1, k2))
