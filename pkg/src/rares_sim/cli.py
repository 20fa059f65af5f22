"""Command-line front end.

    rares-sim run SCENARIO [--format text|json] [--snapshot-pre-clear]
    rares-sim boot SCENARIO [--format text|json]
    rares-sim attest SCENARIO --nonce HEX [--start A --end A] [--require-exec]

Exit codes: 0 clean, 1 scenario/usage error, 2 violations detected (or a
failed attestation verdict), 3 unrecoverable device.  JSON output goes to
stdout with nothing else mixed in; diagnostics go to stderr.

The RARES_SIM_SEED environment variable is accepted for forward
compatibility with randomized workloads; the simulator itself is fully
deterministic and does not consume it.
"""

from __future__ import annotations

import argparse
import enum
import json
import os
import sys

from .attestation import NONCE_SIZE, AttestRequest, verify_report
from .memory import DeviceState, RegionKind
from .scenario import (
    AttestAt,
    Scenario,
    ScenarioError,
    build_device,
    parse_scenario_file,
    run,
)
from .secureboot import BootOutcome, fsbl_boot


class ExitStatus(enum.IntEnum):
    OK = 0
    USAGE = 1
    VIOLATIONS = 2
    UNRECOVERABLE = 3


_EXIT_BY_CLASS = {
    "clean": ExitStatus.OK,
    "violations": ExitStatus.VIOLATIONS,
    "unrecoverable": ExitStatus.UNRECOVERABLE,
}


class _Parser(argparse.ArgumentParser):
    # scenario/usage problems are exit code 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(int(ExitStatus.USAGE), f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rares-sim", description="attack-resilient device simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="boot the device and replay a bus trace")
    p_run.add_argument("scenario", help="path to a .rares.json scenario")
    p_run.add_argument("--format", choices=("text", "json"), default="text")
    p_run.add_argument(
        "--snapshot-pre-clear",
        action="store_true",
        help="include the control-register snapshot taken before any recovery clears it",
    )

    p_boot = sub.add_parser("boot", help="run secure boot only")
    p_boot.add_argument("scenario", help="path to a .rares.json scenario")
    p_boot.add_argument("--format", choices=("text", "json"), default="text")

    p_att = sub.add_parser(
        "attest", help="replay the trace, then challenge the device and verify the answer"
    )
    p_att.add_argument("scenario", help="path to a .rares.json scenario")
    p_att.add_argument("--nonce", required=True, help="challenge nonce, 32-byte hex")
    p_att.add_argument("--start", help="attested region start (default: app RAM start)")
    p_att.add_argument("--end", help="attested region end (default: app RAM end)")
    p_att.add_argument(
        "--require-exec",
        action="store_true",
        help="verdict additionally requires a clean proof-of-execution flag",
    )
    p_att.add_argument("--format", choices=("text", "json"), default="text")
    return parser


def _load(path: str) -> Scenario:
    try:
        return parse_scenario_file(path)
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror or exc}") from None


def _boot_fresh(scenario: Scenario) -> tuple[DeviceState, "BootReport"]:
    state = build_device(scenario)
    return state, fsbl_boot(state)


def cmd_run(args) -> int:
    report = run(_load(args.scenario))
    if args.format == "json":
        sys.stdout.write(report.to_json())
    else:
        sys.stdout.write(report.to_text(show_pre_clear=args.snapshot_pre_clear))
    return _EXIT_BY_CLASS[report.exit_class]


def cmd_boot(args) -> int:
    scenario = _load(args.scenario)
    _, boot = _boot_fresh(scenario)
    if args.format == "json":
        payload = {
            "scenario": scenario.name,
            "outcome": boot.outcome.value,
            "attempts": boot.attempts,
            "digests": [
                {"computed": computed.hex(), "reference": reference.hex()}
                for computed, reference in boot.digests
            ],
        }
        sys.stdout.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    else:
        sys.stdout.write(f"boot: {boot.outcome.value} attempts={boot.attempts}\n")
        for computed, reference in boot.digests:
            sys.stdout.write(
                f"  digest computed={computed.hex()} reference={reference.hex()}\n"
            )
    if boot.outcome is BootOutcome.UNRECOVERABLE:
        return ExitStatus.UNRECOVERABLE
    return ExitStatus.OK


def cmd_attest(args) -> int:
    scenario = _load(args.scenario)
    try:
        nonce = bytes.fromhex(args.nonce)
    except ValueError:
        raise ScenarioError(f"--nonce: bad hex {args.nonce!r}") from None
    if len(nonce) != NONCE_SIZE:
        raise ScenarioError(f"--nonce: must be {NONCE_SIZE} bytes, got {len(nonce)}")

    app = scenario.layout.region(RegionKind.APP_RAM)
    try:
        start = int(args.start, 0) if args.start is not None else app.start
        end = int(args.end, 0) if args.end is not None else app.end
    except ValueError:
        raise ScenarioError("--start/--end: bad address") from None
    start_kind = scenario.layout.classify(start)
    if start > end or start_kind is None or scenario.layout.classify(end) is not start_kind:
        raise ScenarioError("--start/--end must lie within one mapped region")
    request = AttestRequest(nonce=nonce, region_start=start, region_end=end)

    # The verifier's reference view of the region: a freshly booted device.
    ref_state, ref_boot = _boot_fresh(scenario)
    if ref_boot.outcome is BootOutcome.UNRECOVERABLE:
        sys.stderr.write("attest: device image is unrecoverable\n")
        return ExitStatus.UNRECOVERABLE
    expected = ref_state.region_bytes(start, end)

    # Challenge the device after it has lived through the scenario trace.
    challenge_cycle = (scenario.trace[-1].cycle + 1) if scenario.trace else 1
    scenario.attest_requests = list(scenario.attest_requests) + [
        AttestAt(cycle=challenge_cycle, request=request)
    ]
    report = run(scenario)
    if report.exit_class == "unrecoverable":
        sys.stderr.write("attest: device became unrecoverable during the trace\n")
        return ExitStatus.UNRECOVERABLE
    answer = report.attest_answers[-1]
    verdict = verify_report(
        scenario.key, request, answer.report, expected, require_exec=args.require_exec
    )

    if args.format == "json":
        payload = {
            "scenario": scenario.name,
            "nonce": nonce.hex(),
            "region_start": f"0x{start:04X}",
            "region_end": f"0x{end:04X}",
            "exec_flag": answer.report.exec_flag,
            "er_min": f"0x{answer.report.er_min:04X}",
            "er_max": f"0x{answer.report.er_max:04X}",
            "tag": answer.report.tag.hex(),
            "verdict": verdict,
        }
        sys.stdout.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    else:
        r = answer.report
        sys.stdout.write(
            f"attest: region=0x{start:04X}-0x{end:04X} exec_flag={str(r.exec_flag).lower()} "
            f"er=0x{r.er_min:04X}-0x{r.er_max:04X}\n"
            f"tag: {r.tag.hex()}\n"
            f"verdict: {'pass' if verdict else 'FAIL'}\n"
        )
    return ExitStatus.OK if verdict else ExitStatus.VIOLATIONS


def main(argv=None) -> int:
    # Reserved for future randomized workloads; validated but not consumed.
    seed = os.environ.get("RARES_SIM_SEED")
    if seed is not None:
        try:
            int(seed)
        except ValueError:
            sys.stderr.write(f"warning: ignoring non-integer RARES_SIM_SEED={seed!r}\n")

    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": cmd_run, "boot": cmd_boot, "attest": cmd_attest}
    try:
        return int(handlers[args.command](args))
    except ScenarioError as exc:
        sys.stderr.write(f"rares-sim: {exc}\n")
        return int(ExitStatus.USAGE)


if __name__ == "__main__":
    sys.exit(main())
