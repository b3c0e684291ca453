"""Simulated bench experiments: logic checks, input sweeps, XOR readout, level t-test."""

from __future__ import annotations

import io
import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from cmor.bank import CrossbarBank, classify_value, read_conductance_batch
from cmor.eca import LatticeState, ReservoirTrace, Rule, input_bits, run_reservoir, run_reservoir_batch
from cmor.stats import InsufficientDataError, pooled_ttest
from cmor.train import LabeledDataset, ProgrammingPlan, exhaustive_oracle

MAX_SWEEP_BITS = 20
TTEST_ALPHA = 1e-3
CLUSTER_GAP_FRACTION = 0.25


class SweepTooLargeError(ValueError):
    pass


# Independent reference automaton. Deliberately shares no code with cmor.eca:
# the rule is read from its printed binary string and the ring is walked with
# explicit index arithmetic.


def reference_next(bits: str, rule_number: int) -> str:
    table = format(rule_number, "08b")  # table[0] answers "111", table[7] answers "000"
    n = len(bits)
    out = []
    for i in range(n):
        hood = bits[(i - 1) % n] + bits[i] + bits[(i + 1) % n]
        out.append(table[7 - int(hood, 2)])
    return "".join(out)


def reference_trace(bits: str, rule_number: int, m: int) -> list[str]:
    rows = []
    for _ in range(m):
        bits = reference_next(bits, rule_number)
        rows.append(bits)
    return rows


@dataclass
class LogicReport:
    rule: int
    n: int
    m: int
    inputs_checked: int = 0
    inputs_passed: int = 0
    mismatches: list[tuple[int, int, int, int, int]] = field(default_factory=list)
    """(input, iteration, cell, expected, got) for every wrong cell."""

    @property
    def passed(self) -> bool:
        return self.inputs_checked > 0 and not self.mismatches

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.inputs_passed}/{self.inputs_checked} inputs"


def verify_logic(
    rule: Rule,
    n: int = 8,
    m: int = 7,
    reservoir: Callable[[LatticeState, Rule, int], ReservoirTrace] = run_reservoir,
) -> LogicReport:
    """Compare every cell of every generation against the reference automaton, for all 2^n inputs."""
    if n > MAX_SWEEP_BITS:
        raise SweepTooLargeError(f"refusing to enumerate 2^{n} inputs")
    report = LogicReport(rule.number, n, m)
    for x in range(2**n):
        bits = format(x, f"0{n}b")
        expected = reference_trace(bits, rule.number, m)
        got = reservoir(LatticeState.from_string(bits), rule, m).to_lines()
        bad = [
            (x, g + 1, c + 1, int(expected[g][c]), int(got[g][c]))
            for g in range(m)
            for c in range(n)
            if expected[g][c] != got[g][c]
        ]
        report.inputs_checked += 1
        if bad:
            report.mismatches.extend(bad)
        else:
            report.inputs_passed += 1
    return report


@dataclass
class SweepResult:
    rule: int
    n: int
    m: int
    programmed: list[tuple[int, int]]
    inputs: np.ndarray
    g_sigma: np.ndarray
    classes: np.ndarray
    g_b: float
    traces: np.ndarray = field(repr=False)
    """(2^n, m, n) reservoir traces, one per input."""

    def enabled(self, address: tuple[int, int]) -> np.ndarray:
        iteration, cell = address
        return self.traces[:, iteration - 1, cell - 1].astype(bool)

    def to_csv(self, cluster_gap: float | None = None) -> str:
        buf = io.StringIO()
        cols = ["input", "bits", "g_sigma_siemens", "class"]
        cols += [f"enabled_{i}_{c}" for i, c in self.programmed]
        if cluster_gap is not None:
            cols.append("cluster")
            clusters = gap_clusters(self.g_sigma, cluster_gap)
        buf.write(",".join(cols) + "\n")
        flags = [self.enabled(a) for a in self.programmed]
        for k, x in enumerate(self.inputs):
            row = [str(int(x)), format(int(x), f"0{self.n}b"), f"{self.g_sigma[k]:.8e}", str(int(self.classes[k]))]
            row += [str(int(f[k])) for f in flags]
            if cluster_gap is not None:
                row.append(str(int(clusters[k])))
            buf.write(",".join(row) + "\n")
        return buf.getvalue()


def sweep(rule: Rule, bank: CrossbarBank) -> SweepResult:
    """Read the bank's conductance and class for every n-bit input."""
    n, m = bank.n, bank.m
    if n > MAX_SWEEP_BITS:
        raise SweepTooLargeError(f"refusing to sweep 2^{n} inputs (limit 2^{MAX_SWEEP_BITS})")
    inputs = np.arange(2**n)
    traces = run_reservoir_batch(input_bits(inputs, n), rule, m)
    g = read_conductance_batch(bank, traces)
    return SweepResult(
        rule=rule.number,
        n=n,
        m=m,
        programmed=bank.programmed(),
        inputs=inputs,
        g_sigma=g,
        classes=classify_value(g, bank.g_b),
        g_b=bank.g_b,
        traces=traces,
    )


def gap_clusters(values, gap: float) -> np.ndarray:
    """1-D clustering: sort, then start a new cluster wherever consecutive values differ by more than ``gap``.

    Cluster ids are numbered from the lowest values upward and returned in input order.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.argsort(values, kind="stable")
    jumps = np.diff(values[order]) > gap
    ids_sorted = np.concatenate([[0], np.cumsum(jumps)])
    labels = np.empty(values.size, dtype=np.int64)
    labels[order] = ids_sorted
    return labels


def major_clusters(result: SweepResult, lrs_nominal: float, fraction: float = CLUSTER_GAP_FRACTION) -> np.ndarray:
    return gap_clusters(result.g_sigma, fraction * lrs_nominal)


@dataclass(frozen=True)
class MirrorReport:
    passed: bool
    skipped: bool
    mismatches: tuple[int, ...] = ()
    reason: str = ""


def mirror_check(result: SweepResult) -> MirrorReport:
    """G_sigma(x) must equal G_sigma(complement x) exactly, for rules where complements step alike."""
    rule = Rule(result.rule, tuple((result.rule >> k) & 1 for k in range(8)))
    if not rule.is_complement_symmetric():
        return MirrorReport(False, True, (), f"rule {result.rule} is not bit-flip symmetric")
    top = 2**result.n - 1
    g = result.g_sigma
    bad = tuple(int(x) for x in result.inputs if g[x] != g[top - x])
    return MirrorReport(not bad, False, bad)


# XOR readout


def xor_elements(rule: Rule, n: int, m: int, bit_pair: tuple[int, int]) -> list[tuple[int, int]]:
    """Every (iteration, cell) whose state equals input cell a XOR input cell b, for all 2^n inputs."""
    a, b = bit_pair
    if a == b:
        raise ValueError("bit pair needs two distinct cells")
    bits = input_bits(range(2**n), n)
    target = bits[:, a - 1] ^ bits[:, b - 1]
    traces = run_reservoir_batch(bits, rule, m)
    hits = np.all(traces == target[:, None, None], axis=0)
    return [(int(i) + 1, int(c) + 1) for i, c in zip(*np.nonzero(hits))]


def xor_pairs_for_element(rule: Rule, n: int, m: int, address: tuple[int, int]) -> list[tuple[int, int]]:
    """Input-cell pairs whose XOR the element at ``address`` computes."""
    return [p for p in itertools.combinations(range(1, n + 1), 2) if address in xor_elements(rule, n, m, p)]


@dataclass(frozen=True)
class XorResult:
    bit_pair: tuple[int, int]
    rows: tuple[tuple[int, int, float, int], ...]
    """(bit a, bit b, G_sigma, class) for (a, b) in 00, 01, 10, 11."""

    def classes(self) -> tuple[int, ...]:
        return tuple(r[3] for r in self.rows)

    def matches(self, fn: Callable[[int, int], int]) -> bool:
        """True when class +1 exactly marks the rows where ``fn(a, b)`` is true."""
        return all((cls == 1) == bool(fn(a, b)) for a, b, _, cls in self.rows)

    def is_xor(self) -> bool:
        return self.matches(lambda a, b: a ^ b)

    def to_csv(self) -> str:
        lines = ["bit_a,bit_b,g_sigma_siemens,class,xor"]
        lines += [f"{a},{b},{g:.8e},{c},{a ^ b}" for a, b, g, c in self.rows]
        return "\n".join(lines) + "\n"


def xor_experiment(
    rule: Rule,
    bank: CrossbarBank,
    bit_pair: tuple[int, int],
    fixed_bits: str | LatticeState | None = None,
) -> XorResult:
    """Classify the four settings of input cells ``bit_pair``, other cells held at ``fixed_bits``.

    ``fixed_bits`` is a full n-bit state whose values at the pair's cells are ignored
    (default all zeros).
    """
    a, b = bit_pair
    n, m = bank.n, bank.m
    if a == b:
        raise ValueError("bit pair needs two distinct cells")
    if not (1 <= a <= n and 1 <= b <= n):
        raise ValueError(f"bit pair {bit_pair} outside cells 1..{n}")
    if fixed_bits is None:
        base = [0] * n
    else:
        state = fixed_bits if isinstance(fixed_bits, LatticeState) else LatticeState.from_string(fixed_bits)
        if state.n != n:
            raise ValueError(f"fixed_bits has {state.n} cells, bank has {n}")
        base = list(state.bits)
    combos = []
    for va, vb in ((0, 0), (0, 1), (1, 0), (1, 1)):
        bits = list(base)
        bits[a - 1], bits[b - 1] = va, vb
        combos.append(bits)
    traces = run_reservoir_batch(np.array(combos, dtype=np.uint8), rule, m)
    g = read_conductance_batch(bank, traces)
    cls = classify_value(g, bank.g_b)
    rows = tuple((va, vb, float(gk), int(ck)) for (va, vb), gk, ck in zip(((0, 0), (0, 1), (1, 0), (1, 1)), g, cls))
    return XorResult((a, b), rows)


# level t-test


@dataclass(frozen=True)
class LevelStats:
    groups: np.ndarray
    """Per input: 0 neither enabled, 1 only a, 2 only b, 3 both."""
    means: dict[int, float]
    stds: dict[int, float]
    counts: dict[int, int]
    t: float
    p: float
    alpha: float = TTEST_ALPHA

    @property
    def significant(self) -> bool:
        return self.p < self.alpha

    def summary(self) -> str:
        return (
            f"only_a: n={self.counts.get(1, 0)} mean={self.means.get(1, float('nan')):.8e} "
            f"std={self.stds.get(1, float('nan')):.8e}\n"
            f"only_b: n={self.counts.get(2, 0)} mean={self.means.get(2, float('nan')):.8e} "
            f"std={self.stds.get(2, float('nan')):.8e}\n"
            f"t={self.t:.9g} p={self.p:.9g} alpha={self.alpha:g} "
            f"{'distinguishable' if self.significant else 'not distinguishable'}\n"
        )


def level_ttest(
    result: SweepResult, addr_a: tuple[int, int], addr_b: tuple[int, int], alpha: float = TTEST_ALPHA
) -> LevelStats:
    """Pooled-variance t-test between inputs enabling only ``addr_a`` and only ``addr_b``."""
    ea, eb = result.enabled(addr_a), result.enabled(addr_b)
    groups = ea.astype(np.int64) + 2 * eb.astype(np.int64)
    only_a, only_b = result.g_sigma[groups == 1], result.g_sigma[groups == 2]
    if only_a.size == 0 or only_b.size == 0:
        raise InsufficientDataError(
            f"no inputs enable only {addr_a} ({only_a.size}) or only {addr_b} ({only_b.size})"
        )
    t, p = pooled_ttest(only_a, only_b)
    means, stds, counts = {}, {}, {}
    for gid in range(4):
        vals = result.g_sigma[groups == gid]
        if vals.size:
            counts[gid] = int(vals.size)
            means[gid] = float(np.mean(vals))
            stds[gid] = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
    return LevelStats(groups, means, stds, counts, t, p, alpha)


# trainer benchmark data


def random_separable_dataset(
    seed: int, rule: Rule, n: int, m: int, params, size: int = 8, max_tries: int = 1000
) -> tuple[LabeledDataset, ProgrammingPlan]:
    """Random ``size``-item dataset (distinct inputs, mixed labels) that some binary programming classifies perfectly.

    Draws are rejected until the exhaustive oracle reaches accuracy 1.0.
    Returns ``(dataset, oracle_plan)``.
    """
    rng = np.random.default_rng(seed)
    all_bits = input_bits(range(2**n), n)
    for _ in range(max_tries):
        idx = rng.choice(2**n, size=size, replace=False)
        labels = rng.choice([-1, 1], size=size)
        if len(set(labels.tolist())) < 2:
            continue
        dataset = LabeledDataset.from_arrays(all_bits[idx], labels)
        best = exhaustive_oracle(dataset, rule, n, m, params)
        if best.achieved_accuracy == 1.0:
            return dataset, best
    raise RuntimeError(f"no separable dataset found in {max_tries} draws")
