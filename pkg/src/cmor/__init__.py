"""Simulation of a cellular-automaton reservoir with a ReRAM crossbar readout."""

from cmor.bank import (
    CrossbarBank,
    DeviceParams,
    DeviceState,
    classify,
    new_bank,
    program,
    read_conductance,
)
from cmor.eca import LatticeState, ReservoirTrace, Rule, cell_state, decode_rule, run_reservoir, step

__all__ = [
    "CrossbarBank",
    "DeviceParams",
    "DeviceState",
    "LatticeState",
    "ReservoirTrace",
    "Rule",
    "cell_state",
    "classify",
    "decode_rule",
    "new_bank",
    "program",
    "read_conductance",
    "run_reservoir",
    "step",
]
