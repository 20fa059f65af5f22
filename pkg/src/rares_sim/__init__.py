"""Trace-driven simulator of a runtime-attack-resilient embedded device.

A hardware monitor watches seven bus control signals each cycle, latches
violations into a sticky 16-bit control register, and drives prevention
actions (low-power mode switch, CPU halt, chip gate with onboard recovery,
system reset).  Secure boot verifies the application image against a keyed
digest and reflashes from a golden copy on mismatch.  A remote verifier can
challenge the device for an authenticated memory report carrying a
proof-of-execution flag.
"""

from .attestation import (
    AttestReport,
    AttestRequest,
    attest,
    hmac_sha256,
    pox_begin,
    pox_end,
    verify_report,
)
from .detector import (
    AccessEvent,
    CtrlRegister,
    ExecContext,
    ViolationKind,
    classify,
    decode_bits,
    exec_context,
    step,
)
from .memory import DeviceState, GoldenImage, MemoryLayout, Region, RegionKind, build_layout
from .prevention import (
    ActionKind,
    ModeRegister,
    PreventionBinding,
    apply_prevention,
    ctrl_cen_sel,
    default_binding,
)
from .scenario import RunReport, Scenario, classify_trace_naive, parse_scenario, run
from .secureboot import BootOutcome, BootReport, fsbl_boot, reflash, verify_flash

__version__ = "0.1.0"

__all__ = [
    "AccessEvent",
    "ActionKind",
    "AttestReport",
    "AttestRequest",
    "BootOutcome",
    "BootReport",
    "CtrlRegister",
    "DeviceState",
    "ExecContext",
    "GoldenImage",
    "MemoryLayout",
    "ModeRegister",
    "PreventionBinding",
    "Region",
    "RegionKind",
    "RunReport",
    "Scenario",
    "ViolationKind",
    "apply_prevention",
    "attest",
    "build_layout",
    "classify",
    "classify_trace_naive",
    "ctrl_cen_sel",
    "decode_bits",
    "default_binding",
    "exec_context",
    "fsbl_boot",
    "hmac_sha256",
    "parse_scenario",
    "pox_begin",
    "pox_end",
    "reflash",
    "run",
    "step",
    "verify_flash",
    "verify_report",
]
