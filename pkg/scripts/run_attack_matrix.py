#!/usr/bin/env python3
"""Fire one minimal attack per violation kind and tabulate the outcome.

For each of the ten kinds this builds a fresh device, replays a single
hostile bus cycle, and prints which register bit latched, which prevention
action fired, and whether the access reached memory.
"""

import argparse

from rares_sim.detector import AccessEvent, ViolationKind, decode_bits
from rares_sim.memory import GoldenImage, RegionKind
from rares_sim.scenario import Scenario, TraceStep, run
from rares_sim.attestation import hmac_sha256
from rares_sim.memory import build_layout
from rares_sim.prevention import default_binding

V = ViolationKind

ATTACKS = {
    V.IRQ_RAM: AccessEvent(pc=0x4000, irq=True),
    V.IRQ_STACK: AccessEvent(pc=0x6000, irq=True),
    V.DMA_RAM_WR: AccessEvent(pc=0x6000, wen=True, dma_en=True, dma_addr=0x4000),
    V.DMA_RAM_RD: AccessEvent(pc=0x6000, ren=True, dma_en=True, dma_addr=0x4000),
    V.DMA_STACK_RD: AccessEvent(pc=0xE000, ren=True, dma_en=True, dma_addr=0x0200),
    V.DMA_ROM_RD: AccessEvent(pc=0x4000, ren=True, dma_en=True, dma_addr=0x6A00),
    V.CPU_RAM_WR: AccessEvent(pc=0x6000, wen=True, daddr=0x4000),
    V.CPU_RAM_RD: AccessEvent(pc=0x6000, ren=True, daddr=0x4000),
    V.CPU_STACK_RD: AccessEvent(pc=0xE000, ren=True, daddr=0x0200),
    V.CPU_ROM_RD: AccessEvent(pc=0x4000, ren=True, daddr=0x6A00),
}


def single_attack_scenario(kind: ViolationKind) -> Scenario:
    layout = build_layout()
    key = bytes(range(32))
    image = bytes(layout.region(RegionKind.FLASH).size)
    return Scenario(
        name=f"attack-{kind.name.lower()}",
        layout=layout,
        key=key,
        golden=GoldenImage(image=image, reference_digest=hmac_sha256(key, image)),
        region_contents={RegionKind.FLASH: image},
        binding=default_binding(),
        pox=None,
        attest_requests=[],
        trace=[TraceStep(cycle=1, event=ATTACKS[kind], data=0xFF)],
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--json", action="store_true", help="print full machine reports")
    args = parser.parse_args()

    header = f"{'kind':<14} {'bit':<16} {'ctrl':>6}  {'action':<24} {'mem':<10} exit"
    print(header)
    print("-" * len(header))
    for kind in V:
        report = run(single_attack_scenario(kind))
        row = report.rows[0]
        applied = next(rec for rec in row.actions if rec.applied)
        bits = " ".join(decode_bits(row.ctrl_after))
        print(
            f"{kind.name:<14} {bits:<16} 0x{row.ctrl_after:04X}  "
            f"{applied.action.label():<24} {row.mem_effect:<10} {report.exit_class}"
        )
        if args.json:
            print(report.to_json())


if __name__ == "__main__":
    main()
