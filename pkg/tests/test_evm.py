"""Machine model: memory arithmetic, opcode semantics, executable laws."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from evm_laws import (
    MLOAD_LAWS,
    law_loaded_value,
    law_storage_reduce,
    random_state,
    random_storage,
)
from yulverify.errors import NegativeAddress, StackUnderflow
from yulverify.evm import (
    EvmState,
    MemArray,
    Message,
    StorageModel,
    get_mem,
    k_zeroes,
    mem_ceiling,
    mem_cost,
    pad_mem,
    param,
    round_up,
    set_mem,
    step,
)


# ---------------------------------------------------------------------------
# Memory arithmetic (oracle values computed by hand from the definitions)
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "words,cost",
    [(0, 0), (1, 3), (2, 6), (32, 98), (100, 319), (512, 2048)],
)
def test_mem_cost_oracle(words, cost):
    # 3a + a^2/512 with integer division.
    assert mem_cost(words) == cost


@pytest.mark.parametrize(
    "x,words", [(0, 1), (31, 1), (32, 2), (33, 2), (63, 2), (64, 3)]
)
def test_mem_ceiling_oracle(x, words):
    # (x + 32) / 32 with integer division — one word even for extent 0.
    assert mem_ceiling(x) == words


def test_round_up_never_shrinks():
    assert round_up(4, 0) == 4
    assert round_up(1, 64) == 4  # touching byte 64 needs ceiling(96) words
    # The rounding helper always charges one word past the touched byte, so
    # even byte 0 grows memory to two words.
    assert round_up(0, 0) == 2


def test_k_zeroes_emits_k_plus_one():
    assert k_zeroes(-1) == []
    assert k_zeroes(0) == [0]
    assert k_zeroes(2) == [0, 0, 0]


def test_pad_mem_appends_by_difference():
    assert pad_mem([7], 1, 4) == [7, 0, 0, 0, 0]


def test_get_mem_in_bounds_reads_without_growth():
    m = MemArray(data=[7], size=1, peek=0)
    out = get_mem(0, m)
    assert (out.size, out.peek, out.data) == (1, 7, [7])


def test_get_mem_out_of_bounds_grows_and_reads_zero():
    m = MemArray(data=[7], size=1, peek=0)
    out = get_mem(64, m)
    assert out.size == 4
    assert out.data == [7, 0, 0, 0, 0]
    assert out.peek == 0


def test_set_mem_in_bounds():
    m = MemArray(data=[7], size=1, peek=0)
    out = set_mem(0, 9, m)
    assert (out.data, out.size) == ([9], 1)
    assert m.data == [7]  # input untouched


def test_set_mem_growth_matches_read_rounding():
    m = MemArray(data=[], size=0, peek=0)
    out = set_mem(32, 5, m)
    # Writing byte 32 (word 1) rounds up to three words, same as a read there.
    assert out.size == 3
    assert out.data[1] == 5
    assert out.data == [0, 5, 0, 0]


def test_negative_addresses_rejected():
    with pytest.raises(NegativeAddress):
        get_mem(-1, MemArray())
    with pytest.raises(NegativeAddress):
        set_mem(-1, 0, MemArray())


# ---------------------------------------------------------------------------
# Opcode semantics
# ---------------------------------------------------------------------------


def run_pure(op, *args, wrap_bits=None):
    s = EvmState()
    for a in args:
        s.push(a)
    return step(op, s, wrap_bits).pop()


def test_arith_is_unbounded_without_wrap():
    assert run_pure("add", 2 ** 256 - 1, 1) == 2 ** 256
    assert run_pure("sub", 0, 1) == -1
    assert run_pure("mul", 2 ** 200, 2 ** 200) == 2 ** 400


def test_arith_wraps_with_wrap_bits():
    assert run_pure("add", 2 ** 64 - 1, 1, wrap_bits=64) == 0
    assert run_pure("sub", 0, 1, wrap_bits=64) == 2 ** 64 - 1
    assert run_pure("mul", 2 ** 32, 2 ** 32, wrap_bits=64) == 0


def test_division_truncates_and_zero_divides_to_zero():
    assert run_pure("div", 7, 2) == 3
    assert run_pure("div", 7, 0) == 0


def test_comparisons_and_flags():
    assert run_pure("lt", 1, 2) == 1
    assert run_pure("gt", 1, 2) == 0
    assert run_pure("eq", 5, 5) == 1
    assert run_pure("iszero", 0) == 1
    assert run_pure("iszero", 3) == 0


def test_bitwise_on_unsigned_words():
    assert run_pure("and", 0b1100, 0b1010) == 0b1000
    assert run_pure("or", 0b1100, 0b1010) == 0b1110


def test_operand_order_last_argument_on_top():
    s = EvmState()
    s.push(10)
    s.push(3)
    assert step("sub", s).pop() == 7


def test_stack_underflow():
    with pytest.raises(StackUnderflow):
        step("add", EvmState())


def test_caller_and_param():
    s = EvmState()
    s.message = Message(sender=0xAB, value=5)
    assert step("caller", s).pop() == 0xAB
    s.calldata = [11, 22]
    assert param(s, 1) == 22


def test_timestamp_taints_state():
    s = EvmState()
    s.timestamp = 999
    s2 = step("timestamp", s)
    assert s2.pop() == 999 and s2.timestamp_tainted
    assert not s.timestamp_tainted  # original untouched


def test_storage_opcodes():
    s = EvmState()
    s.push(3)
    s.push(42)
    s = step("sstore", s)
    s.push(3)
    assert step("sload", s).pop() == 42


def test_mapping_and_array_opcodes():
    s = EvmState()
    for vals in ([5, 1, 7], ):
        for v in vals:
            s.push(v)
    s = step("map_set", s)
    s.push(5)
    s.push(1)
    assert step("map_get", s).pop() == 7

    s.push(6)
    s.push(77)
    s = step("arr_push", s)
    s.push(6)
    assert step("arr_len", s).pop() == 1
    s.push(6)
    s.push(0)
    assert step("arr_get", s).pop() == 77


def test_depth_two_mapping_keys_do_not_collide():
    s = EvmState()
    for v in (9, 1, 2, 111):
        s.push(v)
    s = step("map2_set", s)
    for v in (9, 2, 1):
        s.push(v)
    assert step("map2_get", s).pop() == 0  # swapped keys miss
    for v in (9, 1, 2):
        s.push(v)
    assert step("map2_get", s).pop() == 111


def test_mload_gas_and_value():
    s = EvmState()
    g0 = s.gas
    s.push(0)
    s = step("mload", s)
    assert s.pop() == 0
    assert s.memory.size == 2  # growth rounds one word past the touched byte
    assert g0 - s.gas == 6 + 3  # growth cost for two words + fixed op cost


def test_revert_is_absorbing():
    s = EvmState()
    s.push(0)
    s.push(0)
    s = step("revert", s)
    assert s.reverted
    frozen = step("add", s)
    assert frozen.reverted and frozen.stack == s.stack


# ---------------------------------------------------------------------------
# Executable laws (property-tested; the acceptance suite re-runs these
# over >= 1000 seeded random cases)
# ---------------------------------------------------------------------------


@settings(max_examples=200)
@given(st.integers(min_value=0), st.integers(min_value=0, max_value=400))
def test_mload_laws_property(seed, byte_idx):
    state = random_state(random.Random(seed))
    assert all(law(state, byte_idx) for law in MLOAD_LAWS)
    assert law_loaded_value(state, byte_idx)


@settings(max_examples=200)
@given(
    st.integers(min_value=0),
    st.integers(min_value=0, max_value=64),
    st.integers(min_value=0),
)
def test_storage_reduce_property(seed, slot, value):
    phi = random_storage(random.Random(seed))
    assert law_storage_reduce(phi, slot, value)


def test_storage_model_copy_is_deep():
    phi = StorageModel()
    phi.map_set(1, 2, 3)
    phi.arr_push(4, 9)
    psi = phi.copy()
    psi.map_set(1, 2, 99)
    psi.arr_push(4, 10)
    assert phi.map_get(1, 2) == 3
    assert phi.arr_len(4) == 1
