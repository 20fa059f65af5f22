#!/usr/bin/env python3
"""Framed challenge/response walkthrough between a verifier and a device.

Runs a short proof-of-execution window on the device, then performs the
attestation exchange over the length-prefixed wire format (in-memory byte
streams standing in for the transport) and verifies the answer on the
verifier side.
"""

import argparse
import io
import secrets

from rares_sim.attestation import (
    decode_report,
    encode_request,
    pox_begin,
    pox_end,
    read_frame,
    serve_request,
    verify_report,
    AttestRequest,
    write_frame,
)
from rares_sim.detector import AccessEvent, step
from rares_sim.scenario import build_device, parse_scenario


SCENARIO = """
{
  "name": "attest-demo",
  "golden": {"image": "deadbeefcafef00d"},
  "regions": {"app_ram": "112233445566778899aabbccddeeff00"}
}
"""


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--tamper", action="store_true",
                        help="flip one device byte after the verifier snapshot")
    parser.add_argument("--seed-nonce", help="fixed 32-byte hex nonce (default: random)")
    args = parser.parse_args()

    device = build_device(parse_scenario(SCENARIO))

    # verifier's reference view of the region it will challenge
    expected = device.region_bytes(0x4000, 0x403F)

    # the device runs a measured stretch of app code
    pox_begin(device, 0x4000, 0x40FF)
    for i in range(8):
        step(device, AccessEvent(pc=0x4000 + 2 * i))
    pox_end(device)

    if args.tamper:
        from rares_sim.memory import RegionKind
        device.mem[RegionKind.APP_RAM][5] ^= 0x80
        print("! device memory tampered behind the verifier's back\n")

    nonce = bytes.fromhex(args.seed_nonce) if args.seed_nonce else secrets.token_bytes(32)
    request = AttestRequest(nonce=nonce, region_start=0x4000, region_end=0x403F)

    # verifier -> device
    to_device = io.BytesIO()
    write_frame(to_device, encode_request(request))
    wire_out = to_device.getvalue()
    print(f"verifier -> device  ({len(wire_out)} bytes)")
    print(f"  {wire_out.hex()}")

    # device answers
    to_device.seek(0)
    answer_payload = serve_request(device, read_frame(to_device))
    to_verifier = io.BytesIO()
    write_frame(to_verifier, answer_payload)
    wire_back = to_verifier.getvalue()
    print(f"device -> verifier  ({len(wire_back)} bytes)")
    print(f"  {wire_back.hex()}")

    # verifier checks
    to_verifier.seek(0)
    report = decode_report(read_frame(to_verifier))
    verdict = verify_report(device.key(), request, report, expected, require_exec=True)
    print()
    print(f"exec_flag: {report.exec_flag}")
    print(f"window:    0x{report.er_min:04X}-0x{report.er_max:04X}")
    print(f"tag:       {report.tag.hex()}")
    print(f"verdict:   {'ACCEPT' if verdict else 'REJECT'}")


if __name__ == "__main__":
    main()
