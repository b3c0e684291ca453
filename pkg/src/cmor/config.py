"""Flat ``key=value`` run configuration.

Schema (every key optional; ``#`` starts a comment line):

=================  ==========  ==============================================
key                default     meaning
=================  ==========  ==============================================
experiment         (none)      verify | sweep | xor | ttest | train
rule               60          Wolfram rule number 0..255
n                  8           cells per ring
m                  7           generations (bank rows)
seed               0           device-variation seed
g_b                1.2e-3      classification threshold, siemens
lrs_nominal        1.5e-3      LRS conductance, siemens
lrs_sigma          0.02        relative sd of programmed levels
hrs_nominal        1e-6        HRS conductance, siemens
hrs_sigma          0.02        relative sd of the HRS level
parasitic_enabled  15e-6       conductance of an enabled level-0 device
levels             (empty)     comma list of level conductances; empty = HRS,LRS
program            (empty)     writes ``iteration:cell[:level]``, comma separated
bit_pair           1,2         input cells for the XOR experiment
fixed_bits         (empty)     n-bit state for the other cells; empty = zeros
addr_a             2:7         first element for the t-test
addr_b             4:7         second element for the t-test
dataset            (empty)     training set path; empty = XOR of ``bit_pair``
epochs             5000        trainer epoch budget
learning_rate      0.1         trainer step size
l2                 0.01        trainer L2 coefficient
output             results     artifact directory
=================  ==========  ==============================================

Relative ``dataset`` paths resolve against the config file's directory.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from cmor.bank import DeviceParams

EXPERIMENTS = ("verify", "sweep", "xor", "ttest", "train")


class ConfigError(ValueError):
    pass


def _parse_address(text: str, with_level: bool = False) -> tuple[int, ...]:
    parts = text.strip().split(":")
    if len(parts) not in ((2, 3) if with_level else (2,)):
        raise ValueError(f"bad address {text!r}")
    return tuple(int(p) for p in parts)


def _format_address(addr: tuple[int, ...]) -> str:
    return ":".join(str(a) for a in addr)


@dataclass(frozen=True)
class RunConfig:
    experiment: str | None = None
    rule: int = 60
    n: int = 8
    m: int = 7
    seed: int = 0
    g_b: float = 1.2e-3
    lrs_nominal: float = 1.5e-3
    lrs_sigma: float = 0.02
    hrs_nominal: float = 1e-6
    hrs_sigma: float = 0.02
    parasitic_enabled: float = 15e-6
    levels: tuple[float, ...] | None = None
    program: tuple[tuple[int, ...], ...] = ()
    bit_pair: tuple[int, int] = (1, 2)
    fixed_bits: str = ""
    addr_a: tuple[int, int] = (2, 7)
    addr_b: tuple[int, int] = (4, 7)
    dataset: str = ""
    epochs: int = 5000
    learning_rate: float = 0.1
    l2: float = 0.01
    output: str = "results"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.experiment is not None and self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment: must be one of {', '.join(EXPERIMENTS)}, got {self.experiment!r}")
        if not 0 <= self.rule <= 255:
            raise ConfigError(f"rule: must be in 0..255, got {self.rule}")
        if self.n < 3:
            raise ConfigError(f"n: ring needs at least 3 cells, got {self.n}")
        if self.m < 1:
            raise ConfigError(f"m: must be >= 1, got {self.m}")
        if self.g_b < 0:
            raise ConfigError(f"g_b: must be >= 0, got {self.g_b}")
        for key in ("epochs",):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key}: must be >= 1")
        for key, addr in (("addr_a", self.addr_a), ("addr_b", self.addr_b)):
            if not (1 <= addr[0] <= self.m and 1 <= addr[1] <= self.n):
                raise ConfigError(f"{key}: address {addr} outside the {self.m}x{self.n} bank")
        for write in self.program:
            if not (1 <= write[0] <= self.m and 1 <= write[1] <= self.n):
                raise ConfigError(f"program: address {write[:2]} outside the {self.m}x{self.n} bank")
        a, b = self.bit_pair
        if a == b or not (1 <= a <= self.n and 1 <= b <= self.n):
            raise ConfigError(f"bit_pair: need two distinct cells in 1..{self.n}, got {self.bit_pair}")
        if self.fixed_bits and (len(self.fixed_bits) != self.n or set(self.fixed_bits) - {"0", "1"}):
            raise ConfigError(f"fixed_bits: need {self.n} characters of 0/1")
        try:
            self.device_params()
        except ValueError as exc:
            raise ConfigError(f"device parameters: {exc}") from None

    def device_params(self) -> DeviceParams:
        return DeviceParams(
            lrs_nominal=self.lrs_nominal,
            lrs_sigma=self.lrs_sigma,
            hrs_nominal=self.hrs_nominal,
            hrs_sigma=self.hrs_sigma,
            parasitic_enabled=self.parasitic_enabled,
            levels=self.levels,
            seed=self.seed,
        )

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_INT_KEYS = {"rule", "n", "m", "seed", "epochs"}
_FLOAT_KEYS = {
    "g_b",
    "lrs_nominal",
    "lrs_sigma",
    "hrs_nominal",
    "hrs_sigma",
    "parasitic_enabled",
    "learning_rate",
    "l2",
}


def _parse_value(key: str, text: str):
    if key in _INT_KEYS:
        return int(text)
    if key in _FLOAT_KEYS:
        return float(text)
    if key == "experiment":
        return text or None
    if key == "levels":
        return tuple(float(v) for v in text.split(",")) if text else None
    if key == "program":
        return tuple(_parse_address(p, with_level=True) for p in text.split(",") if p.strip())
    if key in ("addr_a", "addr_b"):
        return _parse_address(text)
    if key == "bit_pair":
        a, b = text.split(",")
        return (int(a), int(b))
    return text


def _format_value(key: str, value) -> str:
    if value is None:
        return ""
    if key in _FLOAT_KEYS:
        return repr(float(value))
    if key == "levels":
        return ",".join(repr(v) for v in value)
    if key == "program":
        return ",".join(_format_address(w) for w in value)
    if key in ("addr_a", "addr_b"):
        return _format_address(value)
    if key == "bit_pair":
        return f"{value[0]},{value[1]}"
    return str(value)


def parse_config(text: str, base_dir: Path | None = None) -> RunConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _parse_value(key, value)
        except ValueError:
            raise ConfigError(f"{key}: invalid value {value!r} (line {lineno})") from None
    if values.get("dataset"):
        path = Path(values["dataset"])
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        if not path.is_file():
            raise ConfigError(f"dataset: file not found: {path}")
        values["dataset"] = str(path.resolve())
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)


def dumps_config(config: RunConfig) -> str:
    return "".join(f"{key}={_format_value(key, getattr(config, key))}\n" for key in _FIELDS)


def save_config(config: RunConfig, path) -> None:
    Path(path).write_text(dumps_config(config))
