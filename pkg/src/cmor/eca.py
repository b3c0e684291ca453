"""Elementary cellular automaton on a ring, unrolled over m generations.

Conventions used throughout the package:

* neighborhood (left, center, right) selects rule bit ``4*left + 2*center + right``
  (Wolfram numbering);
* cells are numbered 1..n, cell 1 printed leftmost; the left neighbor of
  cell 1 is cell n;
* an integer input ``x`` maps to a lattice by its n-bit binary expansion,
  most significant bit in cell 1 (so ``format(x, "08b")`` is the printed state);
* generation 0 is the input itself and is not stored in a trace.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

REFERENCE_RULES = (60, 90, 102, 105, 153, 165, 180, 195)
DEFAULT_N = 8
DEFAULT_M = 7


class AddressError(IndexError):
    """An (iteration, cell) address outside the lattice or bank."""


@dataclass(frozen=True)
class Rule:
    number: int
    table: tuple[int, ...]

    def __post_init__(self):
        if len(self.table) != 8 or any(b not in (0, 1) for b in self.table):
            raise ValueError("rule table must hold 8 binary outputs")
        if encode_table(self.table) != self.number:
            raise ValueError(f"table does not encode rule {self.number}")

    def __call__(self, left: int, center: int, right: int) -> int:
        return self.table[4 * left + 2 * center + right]

    @property
    def lookup(self) -> np.ndarray:
        return np.array(self.table, dtype=np.uint8)

    def is_complement_symmetric(self) -> bool:
        """True when every neighborhood and its bitwise complement map to the same output."""
        return all(self.table[k] == self.table[7 - k] for k in range(8))


def decode_rule(number: int) -> Rule:
    if isinstance(number, bool) or not isinstance(number, (int, np.integer)):
        raise TypeError(f"rule number must be an integer, got {number!r}")
    number = int(number)
    if not 0 <= number <= 255:
        raise ValueError(f"rule number must be in 0..255, got {number}")
    return Rule(number, tuple((number >> k) & 1 for k in range(8)))


def encode_table(table: Sequence[int]) -> int:
    return sum(int(b) << k for k, b in enumerate(table))


@dataclass(frozen=True)
class LatticeState:
    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if len(bits) < 3:
            raise ValueError(f"ring lattice needs n >= 3 cells, got {len(bits)}")
        if any(b not in (0, 1) for b in bits):
            raise ValueError("lattice cells must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    @property
    def n(self) -> int:
        return len(self.bits)

    @classmethod
    def from_int(cls, value: int, n: int = DEFAULT_N) -> "LatticeState":
        if not 0 <= value < 2**n:
            raise ValueError(f"input {value} does not fit in {n} bits")
        return cls(tuple((value >> (n - 1 - i)) & 1 for i in range(n)))

    @classmethod
    def from_string(cls, text: str) -> "LatticeState":
        text = text.strip()
        if set(text) - {"0", "1"}:
            raise ValueError(f"lattice string must contain only 0/1, got {text!r}")
        return cls(tuple(int(c) for c in text))

    def to_int(self) -> int:
        return int(self.to_string(), 2)

    def to_string(self) -> str:
        return "".join(str(b) for b in self.bits)

    def complement(self) -> "LatticeState":
        return LatticeState(tuple(1 - b for b in self.bits))

    def cell(self, index: int) -> int:
        if not 1 <= index <= self.n:
            raise AddressError(f"cell {index} outside 1..{self.n}")
        return self.bits[index - 1]

    def as_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.uint8)

    def __str__(self) -> str:
        return self.to_string()


class ReservoirTrace:
    """Generations 1..m of a ring automaton, one row per generation.

    ``rows`` is a read-only ``(m, n)`` uint8 array; row 0 holds generation 1.
    """

    __slots__ = ("rows",)

    def __init__(self, rows):
        arr = np.array(rows, dtype=np.uint8)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValueError("trace must be a non-empty 2-D array of generations")
        if np.any(arr > 1):
            raise ValueError("trace entries must be 0 or 1")
        arr.setflags(write=False)
        self.rows = arr

    @property
    def m(self) -> int:
        return self.rows.shape[0]

    @property
    def n(self) -> int:
        return self.rows.shape[1]

    def generation(self, iteration: int) -> LatticeState:
        if not 1 <= iteration <= self.m:
            raise AddressError(f"iteration {iteration} outside 1..{self.m}")
        return LatticeState(tuple(self.rows[iteration - 1]))

    def vec(self) -> np.ndarray:
        """Flatten iteration-major, cell-minor."""
        return self.rows.reshape(-1)

    def to_lines(self) -> list[str]:
        return ["".join(str(b) for b in row) for row in self.rows]

    def __eq__(self, other):
        if not isinstance(other, ReservoirTrace):
            return NotImplemented
        return np.array_equal(self.rows, other.rows)

    def __hash__(self):
        return hash(self.rows.tobytes()) ^ hash(self.rows.shape)

    def __repr__(self):
        return f"ReservoirTrace(m={self.m}, n={self.n}, rows={self.to_lines()})"


def _step_array(bits: np.ndarray, lookup: np.ndarray) -> np.ndarray:
    # last axis is the ring; works for a single state or a batch
    left = np.roll(bits, 1, axis=-1)
    right = np.roll(bits, -1, axis=-1)
    return lookup[4 * left + 2 * bits + right]


def step(state: LatticeState, rule: Rule) -> LatticeState:
    out = _step_array(state.as_array(), rule.lookup)
    return LatticeState(tuple(out))


def run_reservoir(state: LatticeState, rule: Rule, m: int = DEFAULT_M) -> ReservoirTrace:
    if m < 1:
        raise ValueError(f"need at least one generation, got m={m}")
    bits = state.as_array()
    lookup = rule.lookup
    rows = np.empty((m, state.n), dtype=np.uint8)
    for g in range(m):
        bits = _step_array(bits, lookup)
        rows[g] = bits
    return ReservoirTrace(rows)


def input_bits(values: Iterable[int], n: int) -> np.ndarray:
    """Integer inputs to a ``(len(values), n)`` bit matrix, MSB in column 0."""
    values = np.asarray(list(values), dtype=np.int64)
    if values.size and (values.min() < 0 or values.max() >= 2**n):
        raise ValueError(f"inputs must lie in 0..{2**n - 1}")
    shifts = np.arange(n - 1, -1, -1)
    return ((values[:, None] >> shifts) & 1).astype(np.uint8)


def run_reservoir_batch(states: np.ndarray, rule: Rule, m: int = DEFAULT_M) -> np.ndarray:
    """Vectorized run over a ``(k, n)`` batch; returns ``(k, m, n)`` traces."""
    if m < 1:
        raise ValueError(f"need at least one generation, got m={m}")
    bits = np.asarray(states, dtype=np.uint8)
    if bits.ndim != 2 or bits.shape[1] < 3:
        raise ValueError("states must be a (k, n>=3) array")
    lookup = rule.lookup
    out = np.empty((bits.shape[0], m, bits.shape[1]), dtype=np.uint8)
    for g in range(m):
        bits = _step_array(bits, lookup)
        out[:, g, :] = bits
    return out


def cell_state(trace: ReservoirTrace, iteration: int, cell: int) -> int:
    if not 1 <= iteration <= trace.m:
        raise AddressError(f"iteration {iteration} outside 1..{trace.m}")
    if not 1 <= cell <= trace.n:
        raise AddressError(f"cell {cell} outside 1..{trace.n}")
    return int(trace.rows[iteration - 1, cell - 1])
