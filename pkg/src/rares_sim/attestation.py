"""Attestation primitive, challenge/response protocol, and proof of execution.

The device key is the 32-byte key-ROM content; it authenticates reports but
never appears in one.

Tag input encoding (bit-exact, so tags are reproducible across
implementations):

    nonce(32) || er_min(2 BE) || er_max(2 BE) || exec_flag(1: 0x00/0x01)
             || attested region bytes

er_min/er_max are the proof-of-execution window bounds carried in the clear
by the report; the attested region is chosen by the request and bound into
the tag through its contents.

Framed exchange (prover/verifier over any byte stream; in-process loopback
is the default): each message is a 4-byte big-endian length prefix followed
by the payload.  Payload byte 0 is the type, 0x01 request / 0x02 report;
remaining fields follow the encoding order above:

    request: 0x01 || nonce(32) || region_start(2 BE) || region_end(2 BE)
    report:  0x02 || er_min(2 BE) || er_max(2 BE) || exec_flag(1) || tag(32)
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import TYPE_CHECKING, BinaryIO

from .memory import DeviceState, RegionKind

if TYPE_CHECKING:
    from .detector import AccessEvent, ViolationKind

NONCE_SIZE = 32
TAG_SIZE = 32
_SHA256_BLOCK = 64

MSG_REQUEST = 0x01
MSG_REPORT = 0x02


class BadBoundsError(ValueError):
    """Region or window bounds outside the permitted area."""


class FrameError(ValueError):
    """Malformed frame or message payload."""


def hmac_sha256(key: bytes, msg: bytes) -> bytes:
    """RFC 2104 HMAC over SHA-256 (keyed pads built explicitly)."""
    if len(key) > _SHA256_BLOCK:
        key = hashlib.sha256(key).digest()
    key = key.ljust(_SHA256_BLOCK, b"\x00")
    ipad = bytes(b ^ 0x36 for b in key)
    opad = bytes(b ^ 0x5C for b in key)
    inner = hashlib.sha256(ipad + msg).digest()
    return hashlib.sha256(opad + inner).digest()


def _consttime_eq(a: bytes, b: bytes) -> bool:
    if len(a) != len(b):
        return False
    acc = 0
    for x, y in zip(a, b):
        acc |= x ^ y
    return acc == 0


# -- proof of execution ------------------------------------------------


def pox_begin(state: DeviceState, er_min: int, er_max: int) -> DeviceState:
    """Arm an execution window over [er_min, er_max] inside app RAM.

    Re-arming replaces any window in progress.  The exec flag keeps its last
    finalized value until this window breaches or completes.
    """
    app = state.layout.region(RegionKind.APP_RAM)
    if not (app.start <= er_min <= er_max <= app.end):
        raise BadBoundsError(
            f"window 0x{er_min:04X}-0x{er_max:04X} outside app RAM "
            f"0x{app.start:04X}-0x{app.end:04X}"
        )
    em = state.exec_meta
    em.er_min = er_min
    em.er_max = er_max
    em.armed = True
    em.window_clean = True
    state.sync_metadata()
    return state


def pox_observe(
    state: DeviceState, event: AccessEvent, violations: set[ViolationKind]
) -> DeviceState:
    """Watch one cycle of an armed window.

    Any violation, any interrupt, or any program-counter excursion outside
    the window bounds breaches it: the exec flag drops immediately and stays
    false for the rest of this window.
    """
    em = state.exec_meta
    if not em.armed:
        return state
    if violations or event.irq or not em.er_min <= event.pc <= em.er_max:
        em.window_clean = False
        em.exec_flag = False
    return state


def pox_end(state: DeviceState) -> DeviceState:
    """Close the window; the exec flag becomes the window's verdict."""
    em = state.exec_meta
    if not em.armed:
        return state
    em.exec_flag = em.window_clean
    em.armed = False
    state.sync_metadata()
    return state


def pox_abort(state: DeviceState) -> DeviceState:
    """System reset path: destroy any window and invalidate the proof."""
    em = state.exec_meta
    em.armed = False
    em.window_clean = False
    em.exec_flag = False
    state.sync_metadata()
    return state


# -- challenge / response ----------------------------------------------


@dataclass(frozen=True)
class AttestRequest:
    nonce: bytes
    region_start: int
    region_end: int

    def __post_init__(self):
        if len(self.nonce) != NONCE_SIZE:
            raise ValueError(f"nonce must be {NONCE_SIZE} bytes, got {len(self.nonce)}")


@dataclass(frozen=True)
class AttestReport:
    exec_flag: bool
    er_min: int
    er_max: int
    tag: bytes


def _tag_input(
    nonce: bytes, er_min: int, er_max: int, exec_flag: bool, region_bytes: bytes
) -> bytes:
    return (
        nonce
        + struct.pack(">HH", er_min & 0xFFFF, er_max & 0xFFFF)
        + (b"\x01" if exec_flag else b"\x00")
        + region_bytes
    )


def attest(state: DeviceState, req: AttestRequest) -> AttestReport:
    """Answer a nonce challenge over the requested region.

    The request bounds must lie within one mapped region; BadBoundsError
    otherwise.  Deterministic for a fixed state and nonce.
    """
    try:
        region = state.region_bytes(req.region_start, req.region_end)
    except ValueError as exc:
        raise BadBoundsError(str(exc)) from None
    em = state.exec_meta
    tag = hmac_sha256(
        state.key(), _tag_input(req.nonce, em.er_min, em.er_max, em.exec_flag, region)
    )
    return AttestReport(exec_flag=em.exec_flag, er_min=em.er_min, er_max=em.er_max, tag=tag)


def verify_report(
    key: bytes,
    req: AttestRequest,
    report: AttestReport,
    expected_region_bytes: bytes,
    require_exec: bool = False,
) -> bool:
    """Verifier-side check against the memory the verifier expects.

    Recomputes the tag (constant-time compare); with require_exec the report
    must additionally carry a true exec flag.
    """
    expected_tag = hmac_sha256(
        key,
        _tag_input(
            req.nonce, report.er_min, report.er_max, report.exec_flag, expected_region_bytes
        ),
    )
    ok = _consttime_eq(expected_tag, report.tag)
    if require_exec:
        ok = ok and report.exec_flag
    return ok


# -- wire framing -------------------------------------------------------


def encode_request(req: AttestRequest) -> bytes:
    return bytes([MSG_REQUEST]) + req.nonce + struct.pack(
        ">HH", req.region_start, req.region_end
    )


def decode_request(payload: bytes) -> AttestRequest:
    if len(payload) != 1 + NONCE_SIZE + 4 or payload[0] != MSG_REQUEST:
        raise FrameError("malformed request payload")
    start, end = struct.unpack(">HH", payload[1 + NONCE_SIZE:])
    return AttestRequest(nonce=payload[1:1 + NONCE_SIZE], region_start=start, region_end=end)


def encode_report(report: AttestReport) -> bytes:
    return (
        bytes([MSG_REPORT])
        + struct.pack(">HH", report.er_min, report.er_max)
        + (b"\x01" if report.exec_flag else b"\x00")
        + report.tag
    )


def decode_report(payload: bytes) -> AttestReport:
    if len(payload) != 1 + 4 + 1 + TAG_SIZE or payload[0] != MSG_REPORT:
        raise FrameError("malformed report payload")
    er_min, er_max = struct.unpack(">HH", payload[1:5])
    if payload[5] not in (0x00, 0x01):
        raise FrameError("exec flag byte must be 0x00 or 0x01")
    return AttestReport(
        exec_flag=payload[5] == 0x01, er_min=er_min, er_max=er_max, tag=payload[6:]
    )


def write_frame(stream: BinaryIO, payload: bytes) -> None:
    stream.write(struct.pack(">I", len(payload)) + payload)


def read_frame(stream: BinaryIO) -> bytes:
    header = stream.read(4)
    if len(header) != 4:
        raise FrameError("truncated length prefix")
    (length,) = struct.unpack(">I", header)
    payload = stream.read(length)
    if len(payload) != length:
        raise FrameError("truncated payload")
    return payload


def serve_request(state: DeviceState, payload: bytes) -> bytes:
    """Prover loopback: decode a request payload, answer it, encode the report."""
    req = decode_request(payload)
    return encode_report(attest(state, req))
