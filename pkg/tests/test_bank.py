import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmor.bank import (
    DEFAULT_G_B,
    AddressError,
    DeviceParams,
    DimensionError,
    classify,
    dumps_bank,
    loads_bank,
    new_bank,
    program,
    read_conductance,
)
from cmor.eca import LatticeState, ReservoirTrace, decode_rule, run_reservoir
from oracles import double_loop_conductance

RULE60 = decode_rule(60)


def trace_of(x, n=8, m=7, rule=RULE60):
    return run_reservoir(LatticeState.from_int(x, n), rule, m)


def test_params_validation():
    with pytest.raises(ValueError):
        DeviceParams(lrs_nominal=1e-6, hrs_nominal=1e-3)
    with pytest.raises(ValueError):
        DeviceParams(parasitic_enabled=-1.0)
    with pytest.raises(ValueError):
        DeviceParams(levels=(0.0, 2e-3, 1e-3))
    assert DeviceParams().level_values == (1e-6, 1.5e-3)


def test_new_bank_shape_and_default_count():
    bank = new_bank(8, 7, DeviceParams(), DEFAULT_G_B)
    assert bank.size == 56
    assert len(bank.devices()) == 56
    assert all(d.level == 0 for d in bank.devices())


def test_ideal_unprogrammed_bank_reads_zero(ideal_params):
    bank = new_bank(8, 7, ideal_params, 1e-3)
    for x in (0, 1, 85, 170, 255):
        assert read_conductance(bank, trace_of(x)) == 0.0


def test_new_bank_seed_determinism():
    a = new_bank(8, 7, DeviceParams(seed=42))
    b = new_bank(8, 7, DeviceParams(seed=42))
    c = new_bank(8, 7, DeviceParams(seed=43))
    assert np.array_equal(a.g_actual, b.g_actual)
    assert not np.array_equal(a.g_actual, c.g_actual)


def test_new_bank_rejects_bad_dims():
    with pytest.raises(ValueError):
        new_bank(0, 7)


def test_program_ideal_is_exact():
    bank = new_bank(8, 7, DeviceParams().ideal())
    program(bank, (2, 7), 1)
    assert bank.device((2, 7)).g_actual == 1.5e-3
    assert bank.device((2, 7)).level == 1


def test_program_touches_only_target():
    bank = new_bank(8, 7, DeviceParams(seed=3))
    before = bank.g_actual.copy()
    program(bank, (4, 7), 1)
    changed = np.argwhere(bank.g_actual != before)
    assert changed.tolist() == [[3, 6]]


def test_program_address_and_level_errors():
    bank = new_bank(8, 7)
    with pytest.raises(AddressError):
        program(bank, (8, 1), 1)
    with pytest.raises(AddressError):
        program(bank, (1, 9), 1)
    with pytest.raises(ValueError):
        program(bank, (1, 1), 2)


def test_two_programmed_devices_differ_under_variation():
    for seed in range(200):
        bank = new_bank(8, 7, DeviceParams(seed=seed))
        program(bank, (2, 7))
        program(bank, (4, 7))
        assert bank.device((2, 7)).g_actual != bank.device((4, 7)).g_actual


def test_variation_statistics():
    # relative sd of the sampled LRS values should match lrs_sigma
    values = []
    for seed in range(2000):
        bank = new_bank(3, 1, DeviceParams(seed=seed, lrs_sigma=0.05))
        values.append(program(bank, (1, 1)).device((1, 1)).g_actual)
    values = np.array(values) / 1.5e-3
    assert abs(values.mean() - 1.0) < 0.005
    assert abs(values.std() - 0.05) < 0.005


def test_program_order_does_not_matter():
    a = new_bank(8, 7, DeviceParams(seed=9))
    b = new_bank(8, 7, DeviceParams(seed=9))
    program(program(a, (2, 7)), (4, 7))
    program(program(b, (4, 7)), (2, 7))
    assert a == b


def test_single_device_read(ideal_params):
    bank = new_bank(4, 3, ideal_params)
    program(bank, (2, 3))
    rows = np.zeros((3, 4), dtype=np.uint8)
    rows[1, 2] = 1
    assert read_conductance(bank, ReservoirTrace(rows)) == 1.5e-3


def test_read_matches_double_loop_oracle():
    rng = np.random.default_rng(5)
    for trial in range(50):
        params = DeviceParams(seed=trial, levels=(1e-6, 5e-4, 1e-3, 2e-3))
        bank = new_bank(4, 3, params)
        for k in rng.choice(12, size=rng.integers(0, 12), replace=False):
            program(bank, (k // 4 + 1, k % 4 + 1), int(rng.integers(0, 4)))
        rows = rng.integers(0, 2, size=(3, 4))
        expected = double_loop_conductance(rows.tolist(), bank.effective_conductance().tolist())
        assert read_conductance(bank, ReservoirTrace(rows)) == pytest.approx(expected, rel=1e-12)


def test_read_all_zero_trace_is_zero():
    bank = new_bank(8, 7, DeviceParams(seed=1))
    program(bank, (1, 1))
    assert read_conductance(bank, ReservoirTrace(np.zeros((7, 8)))) == 0.0


def test_dimension_mismatch():
    bank = new_bank(8, 7)
    with pytest.raises(DimensionError):
        read_conductance(bank, ReservoirTrace(np.zeros((3, 4))))


def test_classify_examples(ideal_params):
    bank = new_bank(8, 7, ideal_params, g_b=1e-4)
    assert all(classify(bank, trace_of(x)) == -1 for x in range(256))

    bank = new_bank(8, 7, ideal_params, g_b=1.2e-3)
    program(bank, (1, 1))
    rows = np.zeros((7, 8), dtype=np.uint8)
    rows[0, 0] = 1
    assert classify(bank, ReservoirTrace(rows)) == 1


def test_classify_tie_goes_negative(ideal_params):
    bank = new_bank(3, 1, ideal_params, g_b=1.5e-3)
    program(bank, (1, 1))
    assert classify(bank, ReservoirTrace([[1, 0, 0]])) == -1


def test_mirror_symmetry_rule_60_classes_and_values():
    for seed in range(5):
        bank = new_bank(8, 7, DeviceParams(seed=seed))
        program(bank, (2, 7))
        for x in range(128):
            a, b = trace_of(x), trace_of(255 - x)
            assert read_conductance(bank, a) == read_conductance(bank, b)
            assert classify(bank, a) == classify(bank, b)


def random_bank(data, n, m):
    seed = data.draw(st.integers(0, 10_000))
    bank = new_bank(n, m, DeviceParams(seed=seed))
    for k in data.draw(st.sets(st.integers(0, n * m - 1))):
        program(bank, (k // n + 1, k % n + 1))
    return bank


@settings(max_examples=60)
@given(st.data())
def test_linearity_over_partitions(data):
    n, m = 5, 3
    bank = random_bank(data, n, m)
    rows = np.array(data.draw(st.lists(st.integers(0, 1), min_size=n * m, max_size=n * m))).reshape(m, n)
    mask = np.array(data.draw(st.lists(st.booleans(), min_size=n * m, max_size=n * m))).reshape(m, n)
    trace = ReservoirTrace(rows)
    part_a = ReservoirTrace(rows * mask)
    part_b = ReservoirTrace(rows * ~mask)
    total = read_conductance(bank, part_a) + read_conductance(bank, part_b)
    assert read_conductance(bank, trace) == pytest.approx(total, rel=1e-12, abs=0)


@settings(max_examples=60)
@given(st.data())
def test_programming_lrs_never_decreases_reading(data):
    n, m = 5, 3
    bank = random_bank(data, n, m)
    rows = np.array(data.draw(st.lists(st.integers(0, 1), min_size=n * m, max_size=n * m))).reshape(m, n)
    k = data.draw(st.integers(0, n * m - 1))
    addr = (k // n + 1, k % n + 1)
    if bank.device(addr).level != 0:
        return
    before = read_conductance(bank, ReservoirTrace(rows))
    program(bank, addr, 1)
    assert read_conductance(bank, ReservoirTrace(rows)) >= before


@settings(max_examples=60)
@given(st.data())
def test_gated_devices_do_not_matter(data):
    n, m = 5, 3
    bank = random_bank(data, n, m)
    rows = np.array(data.draw(st.lists(st.integers(0, 1), min_size=n * m, max_size=n * m))).reshape(m, n)
    off = np.argwhere(rows == 0)
    if len(off) == 0:
        return
    i, j = off[data.draw(st.integers(0, len(off) - 1))]
    before = read_conductance(bank, ReservoirTrace(rows))
    program(bank, (int(i) + 1, int(j) + 1), 1 - bank.device((int(i) + 1, int(j) + 1)).level)
    assert read_conductance(bank, ReservoirTrace(rows)) == before


def test_bank_text_round_trip():
    params = DeviceParams(seed=17, levels=(1e-6, 1.5e-3, 1.56e-3), lrs_sigma=0.002)
    bank = new_bank(8, 7, params, g_b=1.0845248650000001e-3)
    program(bank, (2, 7), 1)
    program(bank, (4, 7), 2)
    program(bank, (4, 7), 2)
    text = dumps_bank(bank)
    again = loads_bank(text)
    assert again == bank
    assert dumps_bank(again) == text
    for x in range(256):
        assert read_conductance(again, trace_of(x)) == read_conductance(bank, trace_of(x))
    # continuing to program a reloaded bank matches programming the original
    assert program(again, (1, 1)) == program(bank, (1, 1))


def test_bank_text_lists_nine_significant_digits():
    bank = program(new_bank(8, 7, DeviceParams(seed=1)), (2, 7))
    line = next(l for l in dumps_bank(bank).splitlines() if l.startswith("2 7 "))
    mantissa = line.split()[-1].split("e")[0]
    assert len(mantissa.replace(".", "").lstrip("-")) == 9


def test_ideal_params_drop_variation_only():
    p = DeviceParams(seed=5, parasitic_enabled=2e-5)
    q = p.ideal()
    assert q.lrs_sigma == q.hrs_sigma == 0
    assert dataclasses.replace(q, lrs_sigma=p.lrs_sigma, hrs_sigma=p.hrs_sigma) == p
