"""Reference implementations the tests check the package against.

Nothing here imports cmor.
"""

import itertools
import math


def lookup_step(bits, rule_number):
    """One ring update by shifting the rule number, cell by cell."""
    n = len(bits)
    return [
        (rule_number >> (bits[(i - 1) % n] * 4 + bits[i] * 2 + bits[(i + 1) % n])) & 1
        for i in range(n)
    ]


def lookup_trace(bits, rule_number, m):
    rows = []
    for _ in range(m):
        bits = lookup_step(bits, rule_number)
        rows.append(bits)
    return rows


def int_to_bits(x, n):
    return [(x >> (n - 1 - i)) & 1 for i in range(n)]


def double_loop_conductance(trace_rows, g_eff):
    total = 0.0
    for i, row in enumerate(trace_rows):
        for j, bit in enumerate(row):
            if bit:
                total += g_eff[i][j]
    return total


def best_threshold_accuracy(values, labels):
    """Brute force over every threshold between/around the observed values (g > t is +1, t >= 0)."""
    cands = sorted(set(values))
    thresholds = [0.0] + [(a + b) / 2 for a, b in zip(cands, cands[1:])] + [cands[-1] + 1.0]
    best = 0.0
    for t in thresholds:
        acc = sum((1 if v > t else -1) == y for v, y in zip(values, labels)) / len(labels)
        best = max(best, acc)
    return best


def brute_force_binary_plans(features, labels, g_hi, g_lo):
    """Best accuracy over every binary level assignment, with independent pure-Python sums."""
    dims = len(features[0])
    best = 0.0
    for grid in itertools.product((0, 1), repeat=dims):
        values = [math.fsum(g_hi if grid[k] else g_lo for k in range(dims) if f[k]) for f in features]
        best = max(best, best_threshold_accuracy(values, labels))
    return best
