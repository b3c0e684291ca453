"""Exit criteria. Each test marks its criterion PASS only after every assertion holds."""

import itertools
import time
from pathlib import Path

import numpy as np
import pytest

from cmor.bank import DEFAULT_G_B, DeviceParams, new_bank, program, read_conductance
from cmor.cli import main
from cmor.eca import REFERENCE_RULES, LatticeState, decode_rule, run_reservoir, step
from cmor.experiments import (
    level_ttest,
    major_clusters,
    random_separable_dataset,
    sweep,
    verify_logic,
    xor_elements,
    xor_experiment,
)
from cmor.stats import pooled_ttest
from cmor.train import exhaustive_oracle, train_plan
from oracles import lookup_trace

RULE60 = decode_rule(60)
CONFIGS = Path(__file__).parent.parent / "configs"

# independent high-precision reference (mpmath betainc == quadrature of the t density)
REFERENCE_P = 0.3465935070873342478


@pytest.mark.criterion("1 logic verification: 8 reference rules, 256 inputs, 0 mismatches, < 1 s")
def test_logic_verification(criterion):
    start = time.perf_counter()
    reports = [verify_logic(decode_rule(r), 8, 7) for r in REFERENCE_RULES]
    elapsed = time.perf_counter() - start
    assert all(rep.passed and rep.inputs_checked == 256 and not rep.mismatches for rep in reports)
    # the built-in reference and the test-suite oracle must also agree with each other
    for r in REFERENCE_RULES:
        for x in (0, 1, 129, 255):
            bits = [(x >> (7 - i)) & 1 for i in range(8)]
            trace = run_reservoir(LatticeState(tuple(bits)), decode_rule(r), 7)
            assert [list(row) for row in trace.rows] == lookup_trace(bits, r, 7)
    assert elapsed < 1.0, f"took {elapsed:.2f} s"
    criterion["ok"] = True


@pytest.mark.criterion("2 rule-60 bit-flip symmetry: step(x) == step(~x) for all 256 states")
def test_bit_flip_symmetry(criterion):
    for x in range(256):
        s = LatticeState.from_int(x, 8)
        assert step(s, RULE60).bits == step(s.complement(), RULE60).bits
    criterion["ok"] = True


@pytest.mark.criterion("3 mirror conductance symmetry: G(x) == G(255-x) bit-exact, 128 pairs")
def test_mirror_conductance(criterion):
    rng = np.random.default_rng(2024)
    for seed in range(10):
        bank = new_bank(8, 7, DeviceParams(seed=seed))
        for k in rng.choice(56, size=int(rng.integers(1, 8)), replace=False):
            program(bank, (k // 8 + 1, k % 8 + 1))
        for x in range(128):
            a = read_conductance(bank, run_reservoir(LatticeState.from_int(x, 8), RULE60, 7))
            b = read_conductance(bank, run_reservoir(LatticeState.from_int(255 - x, 8), RULE60, 7))
            assert a == b
    criterion["ok"] = True


@pytest.mark.criterion("4 sweep levels: 2 clusters = trace bit at (2,7); 3 clusters with (2,7)+(4,7)")
def test_sweep_levels(criterion):
    for seed in range(10):
        params = DeviceParams(seed=seed)
        one = program(new_bank(8, 7, params, DEFAULT_G_B), (2, 7))
        result = sweep(RULE60, one)
        clusters = major_clusters(result, params.lrs_nominal)
        assert clusters.max() + 1 == 2
        assert np.array_equal(clusters == 1, result.enabled((2, 7)))

        two = program(program(new_bank(8, 7, params, DEFAULT_G_B), (2, 7)), (4, 7))
        assert major_clusters(sweep(RULE60, two), params.lrs_nominal).max() + 1 == 3
    criterion["ok"] = True


@pytest.mark.criterion("5 XOR at G_b = 1.2 mS with one derived element; all 2^6 other-bit settings")
def test_xor(criterion):
    pair = (1, 2)
    element = xor_elements(RULE60, 8, 7, pair)[0]
    bank = program(new_bank(8, 7, DeviceParams(lrs_sigma=0.0), DEFAULT_G_B), element)
    result = xor_experiment(RULE60, bank, pair)
    assert result.classes() == (-1, 1, 1, -1)

    ideal = program(new_bank(8, 7, DeviceParams(lrs_sigma=0.0, parasitic_enabled=0.0), DEFAULT_G_B), element)
    others = [c for c in range(1, 9) if c not in pair]
    for values in itertools.product((0, 1), repeat=6):
        fixed = ["0"] * 8
        for c, v in zip(others, values):
            fixed[c - 1] = str(v)
        assert xor_experiment(RULE60, ideal, pair, "".join(fixed)).is_xor()
    criterion["ok"] = True


@pytest.mark.criterion("6 t-test: p(1..5 vs 2..6) within 1e-3; separated levels p < 0.001; null < 1% of 1000")
def test_ttest(criterion):
    _, p = pooled_ttest([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])
    assert abs(p - REFERENCE_P) < 1e-3

    params = DeviceParams(seed=42, lrs_sigma=0.002, levels=(1e-6, 1.5e-3, 1.56e-3))
    bank = new_bank(8, 7, params, DEFAULT_G_B)
    program(bank, (2, 7), 1)
    program(bank, (4, 7), 2)
    stats = level_ttest(sweep(RULE60, bank), (2, 7), (4, 7))
    assert stats.p < 1e-3

    hits = 0
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        a, b = rng.normal(1.5e-3, 3e-5, 64), rng.normal(1.5e-3, 3e-5, 64)
        hits += pooled_ttest(a, b)[1] < 1e-3
    assert hits < 10, f"{hits} false positives in 1000"
    criterion["ok"] = True


@pytest.mark.criterion("7 trainer vs exhaustive oracle: equal on >= 8/10, never above, < 30 s")
def test_trainer_vs_oracle(criterion):
    params = DeviceParams().ideal()
    start = time.perf_counter()
    equal = 0
    for seed in range(10):
        dataset, _ = random_separable_dataset(seed, RULE60, 4, 3, params)
        plan, _ = train_plan(dataset, RULE60, 3, params)
        best = exhaustive_oracle(dataset, RULE60, 4, 3, params)
        assert plan.achieved_accuracy <= best.achieved_accuracy
        equal += plan.achieved_accuracy == best.achieved_accuracy
    elapsed = time.perf_counter() - start
    assert equal >= 8, f"only {equal}/10 matched"
    assert elapsed < 30.0
    criterion["ok"] = True


@pytest.mark.criterion("8 determinism: repeated CLI runs give byte-identical artifacts")
def test_cli_determinism(criterion, tmp_path, capsys):
    for cfg in sorted(CONFIGS.glob("*.cfg")):
        experiment = next(
            line.split("=", 1)[1].strip() for line in cfg.read_text().splitlines() if line.startswith("experiment=")
        )
        outputs = []
        for run in ("a", "b"):
            out = tmp_path / cfg.stem / run
            assert main([experiment, "--config", str(cfg), "--out", str(out)]) == 0
            outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        assert outputs[0] == outputs[1]
        assert outputs[0]
    criterion["ok"] = True
