"""Command-line entry point: ``beran <command> ...``.

Exit status: 0 on success, 1 when a handshake, scenario or ledger check
fails, 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import List, Optional

from . import bemutual as bm
from . import bench, crypto, ledger, simnet

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# identity files


def identity_to_json(kp: crypto.KeyPair) -> str:
    return json.dumps({
        "suite": kp.suite.kind.value,
        "public_key": kp.public_key.hex(),
        "private_key": kp.private_key.hex(),
        "bc_address": kp.bc_address.hex(),
    }, indent=2) + "\n"


def load_identity(path) -> crypto.KeyPair:
    try:
        d = json.loads(Path(path).read_text())
        kp = crypto.KeyPair(crypto.get_suite(d["suite"]), bytes.fromhex(d["public_key"]),
                            bytes.fromhex(d["private_key"]))
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read identity {path}: {exc}") from None
    if "bc_address" in d and d["bc_address"] != kp.bc_address.hex():
        raise UsageError(f"{path}: bc_address does not match public_key")
    return kp


def _seed(text: Optional[str]):
    if text is None:
        return None
    return int(text) if text.lstrip("-").isdigit() else text.encode()


def _write(path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from None


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


# --------------------------------------------------------------------------
# commands


def cmd_keygen(args) -> int:
    kp = crypto.generate_keypair(args.suite, _seed(args.seed))
    _write(args.out, identity_to_json(kp))
    print(kp.bc_address.hex())
    return EXIT_OK


def _load_chain(path) -> List[ledger.Block]:
    blocks = []
    for lineno, line in enumerate(_read(path).splitlines(), 1):
        if not line.strip():
            continue
        try:
            blocks.append(ledger.Block.from_line(line))
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: unreadable block: {exc}") from None
    if not blocks:
        raise UsageError(f"{path}: empty chain")
    return blocks


def cmd_ledger(args) -> int:
    if args.action == "register":
        kp = load_identity(args.identity)
        path = Path(args.chain)
        led = ledger.Ledger.from_export(_read(path)) if path.exists() else ledger.Ledger(
            {kp.bc_address: args.balance})
        phys = (ledger.PhysicalAddress.ipv6(args.ipv6) if args.ipv6 else ledger.PhysicalAddress.mac(args.mac))
        seq = led.index.sequences.get(kp.bc_address, -1) + 1
        try:
            led.submit_binding(ledger.make_binding(kp, phys, seq, led.height + 1))
        except ledger.LedgerRejected as exc:
            print(f"rejected: {exc.reason.value}", file=sys.stderr)
            return EXIT_FAILED
        block = led.commit_block()
        _write(path, led.export())
        print(f"block {block.height} {block.block_hash.hex()}")
        return EXIT_OK

    chain = _load_chain(args.chain)
    bad = ledger.verify_chain(chain)
    if args.action == "verify":
        if bad is not None:
            print(f"invalid: block {bad}")
            return EXIT_FAILED
        print(f"valid: {len(chain)} blocks, head {chain[-1].block_hash.hex()}")
        return EXIT_OK
    if bad is not None:
        print(f"invalid: block {bad}", file=sys.stderr)
        return EXIT_FAILED
    led = ledger.Ledger(chain=chain)
    if args.action == "export":
        _write(args.out, led.export())
        print(args.out)
        return EXIT_OK
    # inspect
    print(f"height {led.height}")
    print(f"head {chain[-1].block_hash.hex()}")
    for bc, record in sorted(led.index.bindings.items()):
        print(f"binding {bc.hex()} {record.physical_address} seq={record.sequence_number} "
              f"balance={led.balance(bc)}")
    for bc, amount in sorted(led.index.balances.items()):
        if bc not in led.index.bindings:
            print(f"account {bc.hex()} balance={amount}")
    return EXIT_OK


_TAMPER_FIELDS = {
    "sender_address": (1, "signed_sender_address"),
    "nonce1": (1, "nonce1"),
    "signature1": (1, "signature"),
    "public_key1": (1, "sender_public_key"),
    "responder_address": (2, "responder_address"),
    "nonce2": (2, "nonce2"),
    "signature2": (2, "signature"),
    "key_material": (3, "encrypted_key_material"),
}


def _flip(value):
    if isinstance(value, crypto.Signature):
        return crypto.Signature(value.suite, _flip(value.value), value.labels)
    if isinstance(value, ledger.PhysicalAddress):
        return ledger.PhysicalAddress(value.kind, _flip(value.value))
    return bytes([value[0] ^ 0x01]) + bytes(value[1:])


def _handshake_parties(args):
    suite = crypto.get_suite(args.suite)
    seed = args.seed or 0
    alice = bm.Party(crypto.generate_keypair(suite, f"alice/{seed}".encode()),
                     ledger.PhysicalAddress.ipv6("fe80::a"))
    bob = bm.Party(crypto.generate_keypair(suite, f"bob/{seed}".encode()),
                   ledger.PhysicalAddress.ipv6("fe80::b"))
    return alice, bob


def cmd_handshake(args) -> int:
    alice, bob = _handshake_parties(args)
    if args.action == "demo":
        result = bm.run_handshake(alice, bob)
        for i, msg in enumerate(result.messages, 1):
            print(f"msg{i} {type(msg).__name__} concrete={len(bm.encode(msg)) * 8}b "
                  f"accounted={bm.paper_size_bits(msg)}b")
        if not result.keys_match:
            print("keys differ")
            return EXIT_FAILED
        print(f"Established key={result.initiator_key.fingerprint()}")
        return EXIT_OK

    step, attr = _TAMPER_FIELDS[args.field]
    a_state, m1 = bm.initiate(alice, bob.bc_address)
    try:
        if step == 1:
            m1 = dataclasses.replace(m1, **{attr: _flip(getattr(m1, attr))})
        b_state, m2 = bm.respond(bob, m1, alice.bc_address)
        if step == 2:
            m2 = dataclasses.replace(m2, **{attr: _flip(getattr(m2, attr))})
        m3, _ = bm.confirm(a_state, m2)
        if step == 3:
            m3 = dataclasses.replace(m3, **{attr: _flip(getattr(m3, attr))})
        bm.finalize(b_state, m3)
    except bm.HandshakeFailure as exc:
        print(f"Failed:{exc.reason.value} (tampered {args.field})")
        return EXIT_FAILED
    print(f"tampering with {args.field} went undetected")
    return EXIT_OK


def cmd_scenario(args) -> int:
    try:
        config = simnet.load_config(args.config)
        if args.seed is not None:
            config["seed"] = args.seed
        sim, trace = simnet.run_config(config)
    except (OSError, simnet.ConfigError) as exc:
        raise UsageError(str(exc)) from None
    _write(args.out, trace.text())
    if args.frames:
        _write(args.frames, "".join(l + "\n" for l in trace.frames))
    print(trace.events[-1].line())
    return EXIT_OK if trace.established else EXIT_FAILED


def _params(args) -> bench.ParamTable:
    if not args.params:
        return bench.ParamTable()
    try:
        return bench.ParamTable.from_file(args.params)
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(f"bad --params file: {exc}") from None


def _default_out(stem: str, fmt: str) -> str:
    return f"{stem}.{'csv' if fmt == 'csv' else 'json'}"


def cmd_bench(args) -> int:
    params = _params(args)
    timings = measured = None
    if args.kind == "compute":
        if args.paper_timings:
            timings = dict(bench.PAPER_TIMINGS)
        elif args.timings:
            try:
                timings = crypto.parse_timings(_read(args.timings))
            except ValueError as exc:
                raise UsageError(f"bad --timings file: {exc}") from None
        else:
            timings = {k: crypto.measure_primitives(s, args.repetitions) for k, s in crypto.SUITES.items()}
            if args.timings_out:
                _write(args.timings_out, crypto.format_timings(list(timings.values())))
        if not args.paper_timings:
            measured = {k: bench.measure_beran_handshake(s, args.repetitions).signals_us
                        for k, s in crypto.SUITES.items()}
    try:
        reports = bench.build_reports(params, timings, measured, args.cert_mode, args.accounting)
    except bench.MissingTiming as exc:
        raise UsageError(f"missing timing: {exc}") from None
    out = args.out or _default_out(f"bench_{args.kind}", args.format)
    try:
        bench.emit_report(reports, args.format, out)
    except OSError as exc:
        raise UsageError(f"cannot write {out}: {exc}") from None
    for r in reports:
        extra = "" if r.predicted_us is None else f" predicted={r.predicted_us:.1f}us"
        print(f"{r.protocol.value:6} {r.suite.kind.value:13} {r.total_bytes:5d} bytes{extra}")
    return EXIT_OK


def cmd_report(args) -> int:
    """Deterministic summary: Table-style sizes plus predictions from the reference timings."""
    reports = bench.build_reports(_params(args), dict(bench.PAPER_TIMINGS), cert_mode=args.cert_mode)
    out = args.out or _default_out("report", args.format)
    _write(out, bench.render_report(reports, args.format))
    print(out)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="beran", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate an identity and print its BC address")
    p.add_argument("--suite", default="EllipticCurve")
    p.add_argument("--seed", help="deterministic seed (integer or text)")
    p.add_argument("--out", default="identity.json")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("ledger", help="inspect, verify, export or extend a chain file")
    p.add_argument("action", choices=["inspect", "verify", "export", "register"])
    p.add_argument("--chain", default="ledger.jsonl")
    p.add_argument("--out", default="ledger_export.jsonl")
    p.add_argument("--identity", help="identity file (register)")
    p.add_argument("--mac", default="02:00:00:00:00:01")
    p.add_argument("--ipv6")
    p.add_argument("--balance", type=int, default=10, help="genesis balance when creating a chain")
    p.set_defaults(func=cmd_ledger)

    p = sub.add_parser("handshake", help="run the handshake in-process")
    p.add_argument("action", choices=["demo", "tamper"])
    p.add_argument("--suite", default="EllipticCurve")
    p.add_argument("--seed", type=int)
    p.add_argument("--field", choices=sorted(_TAMPER_FIELDS), default="nonce1")
    p.set_defaults(func=cmd_handshake)

    p = sub.add_parser("scenario", help="run a simulated scenario")
    p.add_argument("action", choices=["run"])
    p.add_argument("config")
    p.add_argument("--out", default="trace.txt")
    p.add_argument("--frames", help="also write a frame hex dump here")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("bench", help="communication or computation overhead report")
    p.add_argument("kind", choices=["comm", "compute"])
    p.add_argument("--params", help="JSON file overriding field lengths (bits)")
    p.add_argument("--timings", help="timings file: '<primitive> <suite> <microseconds>' lines")
    p.add_argument("--timings-out", help="write the locally measured timings here")
    p.add_argument("--paper-timings", action="store_true", help="use the published reference timings")
    p.add_argument("--repetitions", type=int, default=100)
    p.add_argument("--cert-mode", choices=bench.CERT_MODES, default="raw-pk")
    p.add_argument("--accounting", choices=bench.ACCOUNTING_MODES, default="paper")
    p.add_argument("--format", choices=["csv", "structured-text"], default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="full overhead table with reference timings")
    p.add_argument("--params")
    p.add_argument("--cert-mode", choices=bench.CERT_MODES, default="raw-pk")
    p.add_argument("--format", choices=["csv", "structured-text"], default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if getattr(args, "repetitions", 1) < 1:
            raise UsageError("--repetitions must be >= 1")
        if args.command == "ledger" and args.action == "register" and not args.identity:
            raise UsageError("ledger register needs --identity")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
