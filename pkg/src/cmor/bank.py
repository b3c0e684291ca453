"""1T1R crossbar readout: programmable conductances gated by a reservoir trace.

Each device's conductance is sampled once, when it is written, and then held
fixed. Sampling is keyed on ``(seed, iteration, cell, write count)`` so a bank's
state depends only on its seed and on which writes were made, not on the order
they were issued in.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from cmor.eca import DEFAULT_M, DEFAULT_N, AddressError, ReservoirTrace

DEFAULT_G_B = 1.2e-3  # siemens


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class DeviceParams:
    """Device model parameters. Conductances in siemens, sigmas relative.

    ``levels`` lists nominal conductances for level indices 0, 1, ...; level 0
    is the HRS/unformed state. When omitted the bank is binary:
    ``(hrs_nominal, lrs_nominal)``.

    Forming conditions are carried as annotations only and never enter the model.
    """

    lrs_nominal: float = 1.5e-3
    lrs_sigma: float = 0.02
    hrs_nominal: float = 1e-6
    hrs_sigma: float = 0.02
    parasitic_enabled: float = 15e-6
    levels: tuple[float, ...] | None = None
    seed: int = 0
    forming_voltage: float = 3.3
    compliance_current: float = 1e-3
    gate_voltage: float = 1.2

    def __post_init__(self):
        if self.levels is not None:
            object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))
        for name in ("lrs_nominal", "hrs_nominal", "parasitic_enabled", "lrs_sigma", "hrs_sigma"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be a finite value >= 0, got {value}")
        if not self.lrs_nominal > self.hrs_nominal:
            raise ValueError("lrs_nominal must exceed hrs_nominal")
        if self.levels is not None:
            lv = self.levels
            if len(lv) < 2:
                raise ValueError("levels needs at least an HRS and one programmed level")
            if any(v < 0 for v in lv):
                raise ValueError("levels must be >= 0")
            if any(b <= a for a, b in zip(lv, lv[1:])):
                raise ValueError("levels must be strictly increasing")

    @property
    def level_values(self) -> tuple[float, ...]:
        if self.levels is not None:
            return self.levels
        return (self.hrs_nominal, self.lrs_nominal)

    @property
    def n_levels(self) -> int:
        return len(self.level_values)

    def sigma_for(self, level: int) -> float:
        return self.hrs_sigma if level == 0 else self.lrs_sigma

    def ideal(self) -> "DeviceParams":
        """Same nominal values with device-to-device variation switched off."""
        return dataclasses.replace(self, lrs_sigma=0.0, hrs_sigma=0.0)


def round_sig(value: float, digits: int = 9) -> float:
    """Round to ``digits`` significant digits so the text format round-trips exactly."""
    return float(f"{value:.{digits - 1}e}")


@dataclass(frozen=True)
class DeviceState:
    address: tuple[int, int]
    level: int
    g_actual: float


@dataclass
class CrossbarBank:
    """An m x n grid of devices (rows = iterations, columns = cells)."""

    n: int
    m: int
    params: DeviceParams
    g_b: float
    levels: np.ndarray = field(repr=False)
    g_actual: np.ndarray = field(repr=False)
    write_counts: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m, self.n)

    @property
    def size(self) -> int:
        return self.n * self.m

    def _check(self, address: tuple[int, int]) -> tuple[int, int]:
        iteration, cell = address
        if not 1 <= iteration <= self.m or not 1 <= cell <= self.n:
            raise AddressError(f"address {address} outside (1..{self.m}, 1..{self.n})")
        return iteration - 1, cell - 1

    def device(self, address: tuple[int, int]) -> DeviceState:
        i, j = self._check(address)
        return DeviceState((i + 1, j + 1), int(self.levels[i, j]), float(self.g_actual[i, j]))

    def devices(self) -> list[DeviceState]:
        return [self.device((i, j)) for i in range(1, self.m + 1) for j in range(1, self.n + 1)]

    def programmed(self) -> list[tuple[int, int]]:
        return [(int(i) + 1, int(j) + 1) for i, j in zip(*np.nonzero(self.levels))]

    def effective_conductance(self) -> np.ndarray:
        """Per-device conductance seen when its gate is enabled."""
        return np.where(self.levels > 0, self.g_actual, self.params.parasitic_enabled)

    def copy(self) -> "CrossbarBank":
        return dataclasses.replace(
            self,
            levels=self.levels.copy(),
            g_actual=self.g_actual.copy(),
            write_counts=self.write_counts.copy(),
        )

    def __eq__(self, other):
        if not isinstance(other, CrossbarBank):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.params == other.params
            and self.g_b == other.g_b
            and np.array_equal(self.levels, other.levels)
            and np.array_equal(self.g_actual, other.g_actual)
            and np.array_equal(self.write_counts, other.write_counts)
        )


def _sample(params: DeviceParams, level: int, iteration: int, cell: int, write: int) -> float:
    nominal = params.level_values[level]
    sigma = params.sigma_for(level)
    if sigma == 0:
        return round_sig(nominal)
    rng = np.random.default_rng([params.seed, iteration, cell, write])
    g = nominal * (1.0 + sigma * rng.standard_normal())
    return round_sig(max(g, 0.0))


def new_bank(
    n: int = DEFAULT_N, m: int = DEFAULT_M, params: DeviceParams | None = None, g_b: float = DEFAULT_G_B
) -> CrossbarBank:
    if n < 1 or m < 1:
        raise ValueError(f"bank dimensions must be >= 1, got n={n}, m={m}")
    if not np.isfinite(g_b) or g_b < 0:
        raise ValueError(f"g_b must be >= 0, got {g_b}")
    params = params or DeviceParams()
    g = np.array(
        [[_sample(params, 0, i, j, 0) for j in range(1, n + 1)] for i in range(1, m + 1)],
        dtype=float,
    )
    return CrossbarBank(
        n=n,
        m=m,
        params=params,
        g_b=float(g_b),
        levels=np.zeros((m, n), dtype=np.int64),
        g_actual=g,
        write_counts=np.zeros((m, n), dtype=np.int64),
    )


def program(bank: CrossbarBank, address: tuple[int, int], level: int = 1) -> CrossbarBank:
    """Write one device in place and return the bank."""
    i, j = bank._check(address)
    if not 0 <= level < bank.params.n_levels:
        raise ValueError(f"level {level} invalid, bank has levels 0..{bank.params.n_levels - 1}")
    bank.write_counts[i, j] += 1
    bank.levels[i, j] = level
    bank.g_actual[i, j] = _sample(bank.params, level, i + 1, j + 1, int(bank.write_counts[i, j]))
    return bank


def _trace_rows(bank: CrossbarBank, trace) -> np.ndarray:
    rows = trace.rows if isinstance(trace, ReservoirTrace) else np.asarray(trace)
    if rows.shape[-2:] != bank.shape:
        raise DimensionError(f"trace shape {rows.shape[-2:]} does not match bank {bank.shape}")
    return rows


def read_conductance(bank: CrossbarBank, trace) -> float:
    rows = _trace_rows(bank, trace)
    g = bank.effective_conductance().reshape(-1)
    return math.fsum(g[rows.reshape(-1) == 1])


def read_conductance_batch(bank: CrossbarBank, traces: np.ndarray) -> np.ndarray:
    """G_sigma for a ``(k, m, n)`` stack of traces."""
    rows = _trace_rows(bank, traces)
    flat = rows.reshape(rows.shape[0], -1) == 1
    g = bank.effective_conductance().reshape(-1)
    # fsum is correctly rounded: equal sets of enabled conductances give bit-equal totals
    return np.array([math.fsum(g[r]) for r in flat])


def classify_value(g_sigma, g_b: float):
    """+1 above the threshold, -1 at or below it."""
    return np.where(np.asarray(g_sigma) > g_b, 1, -1)


def classify(bank: CrossbarBank, trace) -> int:
    return int(classify_value(read_conductance(bank, trace), bank.g_b))


# text format

_PARAM_FIELDS = [f.name for f in dataclasses.fields(DeviceParams)]


def _fmt(value: float) -> str:
    return f"{value:.8e}"


def params_lines(params: DeviceParams) -> list[str]:
    lines = []
    for name in _PARAM_FIELDS:
        value = getattr(params, name)
        if name == "levels":
            if value is None:
                continue
            value = ",".join(repr(v) for v in value)
        elif name == "seed":
            value = str(value)
        else:
            value = repr(float(value))
        lines.append(f"{name}={value}")
    return lines


def parse_params(entries: dict[str, str]) -> DeviceParams:
    kwargs = {}
    for name, text in entries.items():
        if name not in _PARAM_FIELDS:
            raise ValueError(f"unknown device parameter {name!r}")
        if name == "levels":
            kwargs[name] = tuple(float(v) for v in text.split(","))
        elif name == "seed":
            kwargs[name] = int(text)
        else:
            kwargs[name] = float(text)
    return DeviceParams(**kwargs)


def dumps_bank(bank: CrossbarBank) -> str:
    lines = ["# cmor crossbar bank", f"n={bank.n}", f"m={bank.m}", f"g_b={bank.g_b!r}"]
    lines += params_lines(bank.params)
    lines.append("# iteration cell level writes g_actual_siemens")
    for i in range(bank.m):
        for j in range(bank.n):
            lines.append(
                f"{i + 1} {j + 1} {bank.levels[i, j]} {bank.write_counts[i, j]} {_fmt(bank.g_actual[i, j])}"
            )
    return "\n".join(lines) + "\n"


def loads_bank(text: str) -> CrossbarBank:
    header: dict[str, str] = {}
    rows: list[Sequence[str]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line:
            key, _, value = line.partition("=")
            header[key.strip()] = value.strip()
        else:
            parts = line.split()
            if len(parts) != 5:
                raise ValueError(f"line {lineno}: expected 5 device fields, got {len(parts)}")
            rows.append(parts)
    try:
        n, m, g_b = int(header.pop("n")), int(header.pop("m")), float(header.pop("g_b"))
    except KeyError as exc:
        raise ValueError(f"bank file missing {exc.args[0]!r}") from None
    params = parse_params(header)
    bank = CrossbarBank(
        n=n,
        m=m,
        params=params,
        g_b=g_b,
        levels=np.zeros((m, n), dtype=np.int64),
        g_actual=np.zeros((m, n), dtype=float),
        write_counts=np.zeros((m, n), dtype=np.int64),
    )
    if len(rows) != n * m:
        raise ValueError(f"expected {n * m} device lines, got {len(rows)}")
    for it, cell, level, writes, g in rows:
        i, j = bank._check((int(it), int(cell)))
        bank.levels[i, j] = int(level)
        bank.write_counts[i, j] = int(writes)
        bank.g_actual[i, j] = float(g)
    return bank


def save_bank(bank: CrossbarBank, path) -> None:
    Path(path).write_text(dumps_bank(bank))


def load_bank(path) -> CrossbarBank:
    return loads_bank(Path(path).read_text())
