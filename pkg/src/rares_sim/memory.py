"""Device memory geography and mutable state.

A 16-bit flat address space split into seven regions (boot ROM, key ROM,
recovery ROM, flash, application RAM, reserved stack, metadata).  Region
bounds are configuration, not constants; :data:`DEFAULT_REGIONS` is one
workable arrangement.  The three ROM kinds are never writable through
simulated accesses.
"""

from __future__ import annotations

import hashlib
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum

ADDR_MASK = 0xFFFF
KEY_SIZE = 32
DIGEST_SIZE = 32

# Metadata region byte offsets.  The first two bytes hold the detection
# register image (little-endian); the flash reference digest and the
# proof-of-execution bookkeeping are mirrored after it when the region
# is large enough to hold them.
META_CTRL_OFF = 0
META_DIGEST_OFF = 2
META_EXEC_OFF = META_DIGEST_OFF + DIGEST_SIZE


class LayoutError(ValueError):
    """Base for invalid region map definitions."""


class OverlapError(LayoutError):
    pass


class MissingRegionError(LayoutError):
    pass


class DuplicateRegionError(LayoutError):
    pass


class KeyRomSizeError(LayoutError):
    pass


class UnmappedAddressError(KeyError):
    """Write issued to an address outside every mapped region."""


class RegionKind(Enum):
    BOOT_ROM = "boot_rom"
    KEY_ROM = "key_rom"
    RECOVERY_ROM = "recovery_rom"
    FLASH = "flash"
    APP_RAM = "app_ram"
    RESERVED_STACK = "reserved_stack"
    METADATA = "metadata"


ROM_KINDS = frozenset({RegionKind.BOOT_ROM, RegionKind.KEY_ROM, RegionKind.RECOVERY_ROM})


@dataclass(frozen=True)
class Region:
    kind: RegionKind
    start: int
    end: int  # inclusive

    @property
    def size(self) -> int:
        return self.end - self.start + 1

    def contains(self, addr: int) -> bool:
        return self.start <= addr <= self.end


DEFAULT_REGIONS = [
    (RegionKind.RESERVED_STACK, 0x0200, 0x0AFF),
    (RegionKind.METADATA, 0x0B00, 0x0B3F),
    (RegionKind.APP_RAM, 0x4000, 0x5FFF),
    (RegionKind.BOOT_ROM, 0x6000, 0x69FF),
    (RegionKind.KEY_ROM, 0x6A00, 0x6A1F),
    (RegionKind.RECOVERY_ROM, 0x7000, 0x77FF),
    (RegionKind.FLASH, 0xE000, 0xE7FF),
]


class MemoryLayout:
    """Validated, non-overlapping region map with total address lookup."""

    def __init__(self, regions: list[Region]):
        self.regions = sorted(regions, key=lambda r: r.start)
        self._by_kind = {r.kind: r for r in self.regions}
        self._starts = [r.start for r in self.regions]

    def region(self, kind: RegionKind) -> Region:
        return self._by_kind[kind]

    def classify(self, addr: int) -> RegionKind | None:
        i = bisect_right(self._starts, addr) - 1
        if i >= 0 and self.regions[i].contains(addr):
            return self.regions[i].kind
        return None


def build_layout(regions: list[tuple[RegionKind, int, int]] | None = None) -> MemoryLayout:
    """Validate a region list (each kind exactly once, disjoint, 16-bit bounds).

    Raises MissingRegionError / DuplicateRegionError / OverlapError /
    KeyRomSizeError / LayoutError on a malformed map.
    """
    if regions is None:
        regions = DEFAULT_REGIONS
    seen: set[RegionKind] = set()
    built: list[Region] = []
    for kind, start, end in regions:
        if kind in seen:
            raise DuplicateRegionError(f"region {kind.value} supplied twice")
        seen.add(kind)
        if not (0 <= start <= ADDR_MASK and 0 <= end <= ADDR_MASK):
            raise LayoutError(f"region {kind.value} bounds outside 16-bit space")
        if start > end:
            raise LayoutError(f"region {kind.value} has start 0x{start:04X} > end 0x{end:04X}")
        built.append(Region(kind, start, end))
    for kind in RegionKind:
        if kind not in seen:
            raise MissingRegionError(f"region {kind.value} missing")
    built.sort(key=lambda r: r.start)
    for a, b in zip(built, built[1:]):
        if b.start <= a.end:
            raise OverlapError(
                f"regions {a.kind.value} and {b.kind.value} overlap at 0x{b.start:04X}"
            )
    key_rom = next(r for r in built if r.kind == RegionKind.KEY_ROM)
    if key_rom.size != KEY_SIZE:
        raise KeyRomSizeError(f"key ROM must be {KEY_SIZE} bytes, got {key_rom.size}")
    meta = next(r for r in built if r.kind == RegionKind.METADATA)
    if meta.size < 2:
        raise LayoutError("metadata region must hold at least the 2-byte register image")
    return MemoryLayout(built)


def classify_addr(layout: MemoryLayout, addr: int) -> RegionKind | None:
    """Unique containing region for addr, or None for a gap address."""
    return layout.classify(addr)


@dataclass(frozen=True)
class GoldenImage:
    """Untampered flash copy plus the digest the boot check compares against."""

    image: bytes
    reference_digest: bytes


class WriteResult(Enum):
    APPLIED = "applied"
    SUPPRESSED = "suppressed"


@dataclass
class ExecMetadata:
    """Proof-of-execution bookkeeping for one executable-region window."""

    er_min: int = 0
    er_max: int = 0
    exec_flag: bool = False
    armed: bool = False
    window_clean: bool = False


class DeviceState:
    """One device's memories, detection register, and prevention latches.

    Single-threaded during a run; independent instances may run in parallel.
    """

    def __init__(self, layout: MemoryLayout):
        from .detector import CtrlRegister
        from .prevention import ModeRegister

        self.layout = layout
        self.mem: dict[RegionKind, bytearray] = {
            r.kind: bytearray(r.size) for r in layout.regions
        }
        self.ctrl = CtrlRegister()
        self.r2 = ModeRegister()
        self.cpu_halted = False
        self.chip_gate_active = False
        self.reset_pending = False
        self.recovery_queued = False
        self.exec_meta = ExecMetadata()
        self.reference_digest = bytes(DIGEST_SIZE)
        self.cycle = 0

    # -- provisioning -------------------------------------------------

    def set_region_bytes(self, kind: RegionKind, data: bytes, offset: int = 0) -> None:
        """Load region contents directly (scenario provisioning, not a bus access)."""
        buf = self.mem[kind]
        if offset + len(data) > len(buf):
            raise ValueError(f"{len(data)} bytes at +{offset} exceed region {kind.value}")
        buf[offset:offset + len(data)] = data

    def provision_golden(self, golden: GoldenImage) -> None:
        """Install the recovery image and its reference digest.

        The image bytes live in the recovery ROM; the digest is held in the
        metadata region when it fits (the field below stays authoritative).
        """
        flash_size = self.layout.region(RegionKind.FLASH).size
        if len(golden.image) != flash_size:
            raise ValueError(
                f"golden image is {len(golden.image)} bytes, flash region is {flash_size}"
            )
        recovery = self.layout.region(RegionKind.RECOVERY_ROM)
        if recovery.size < flash_size:
            raise ValueError("recovery ROM smaller than the flash region")
        self.set_region_bytes(RegionKind.RECOVERY_ROM, golden.image)
        if len(golden.reference_digest) != DIGEST_SIZE:
            raise ValueError("reference digest must be 32 bytes")
        self.reference_digest = bytes(golden.reference_digest)
        self.sync_metadata()

    # -- accessors ----------------------------------------------------

    def key(self) -> bytes:
        return bytes(self.mem[RegionKind.KEY_ROM])

    def flash_bytes(self) -> bytes:
        return bytes(self.mem[RegionKind.FLASH])

    def golden_image(self) -> GoldenImage:
        flash_size = self.layout.region(RegionKind.FLASH).size
        return GoldenImage(
            image=bytes(self.mem[RegionKind.RECOVERY_ROM][:flash_size]),
            reference_digest=self.reference_digest,
        )

    def read_byte(self, addr: int) -> int:
        """Bus read; gap addresses read as 0x00."""
        kind = self.layout.classify(addr)
        if kind is None:
            return 0x00
        region = self.layout.region(kind)
        return self.mem[kind][addr - region.start]

    def region_bytes(self, start: int, end: int) -> bytes:
        """Contents of [start, end] inclusive; bounds must share one region."""
        kind = self.layout.classify(start)
        if kind is None or self.layout.classify(end) is not kind or start > end:
            raise ValueError(f"range 0x{start:04X}-0x{end:04X} not within one region")
        region = self.layout.region(kind)
        return bytes(self.mem[kind][start - region.start:end - region.start + 1])

    def region_digests(self) -> dict[str, str]:
        return {
            kind.value: hashlib.sha256(bytes(buf)).hexdigest()
            for kind, buf in sorted(self.mem.items(), key=lambda kv: kv[0].value)
        }

    # -- metadata mirror ----------------------------------------------

    def sync_metadata(self) -> None:
        """Refresh the metadata-resident images (register, digest, exec state)."""
        meta = self.mem[RegionKind.METADATA]
        value = self.ctrl.value
        meta[META_CTRL_OFF] = value & 0xFF
        meta[META_CTRL_OFF + 1] = (value >> 8) & 0xFF
        if len(meta) >= META_EXEC_OFF:
            meta[META_DIGEST_OFF:META_EXEC_OFF] = self.reference_digest
        if len(meta) >= META_EXEC_OFF + 5:
            em = self.exec_meta
            meta[META_EXEC_OFF] = em.er_min & 0xFF
            meta[META_EXEC_OFF + 1] = (em.er_min >> 8) & 0xFF
            meta[META_EXEC_OFF + 2] = em.er_max & 0xFF
            meta[META_EXEC_OFF + 3] = (em.er_max >> 8) & 0xFF
            meta[META_EXEC_OFF + 4] = 1 if em.exec_flag else 0


def apply_write(state: DeviceState, addr: int, byte: int) -> WriteResult:
    """Store one byte through the memory backbone.

    Suppressed (memory untouched) while the chip-enable gate is raised or
    when the target is any ROM kind.  Raises UnmappedAddressError for gap
    addresses.
    """
    if not 0 <= byte <= 0xFF:
        raise ValueError(f"byte value {byte!r} out of range")
    kind = state.layout.classify(addr)
    if kind is None:
        raise UnmappedAddressError(f"0x{addr:04X}")
    if state.chip_gate_active or kind in ROM_KINDS:
        return WriteResult.SUPPRESSED
    region = state.layout.region(kind)
    state.mem[kind][addr - region.start] = byte
    return WriteResult.APPLIED
