import dataclasses
import json
import subprocess
import sys

import pytest

from beran.bench import ParamTable
from beran.cli import main
from conftest import CONFIGS, GOLDEN


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_keygen_deterministic(tmp_path, capsys):
    c1, out1, _ = run(capsys, "keygen", "--seed", "5", "--out", tmp_path / "a.json")
    c2, out2, _ = run(capsys, "keygen", "--seed", "5", "--out", tmp_path / "b.json")
    assert c1 == c2 == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    addr = out1.strip()
    assert addr == out2.strip() and len(addr) == 68
    assert addr == addr.lower() and int(addr, 16) >= 0


def test_keygen_suites_differ_in_key_length(tmp_path, capsys):
    run(capsys, "keygen", "--suite", "EllipticCurve", "--seed", "1", "--out", tmp_path / "ec.json")
    run(capsys, "keygen", "--suite", "FiniteField", "--seed", "1", "--out", tmp_path / "ff.json")
    ec = json.loads((tmp_path / "ec.json").read_text())
    ff = json.loads((tmp_path / "ff.json").read_text())
    assert len(bytes.fromhex(ec["public_key"])) == 32
    assert len(bytes.fromhex(ff["public_key"])) == 384


def test_keygen_unwritable(tmp_path, capsys):
    code, _, err = run(capsys, "keygen", "--out", tmp_path / "nope" / "id.json")
    assert code == 2 and "error" in err


def test_ledger_register_inspect_verify_export(tmp_path, capsys):
    ident, chain = tmp_path / "id.json", tmp_path / "chain.jsonl"
    run(capsys, "keygen", "--seed", "9", "--out", ident)
    code, out, _ = run(capsys, "ledger", "register", "--identity", ident, "--chain", chain)
    assert code == 0 and out.startswith("block 1 ")
    code, out, _ = run(capsys, "ledger", "register", "--identity", ident, "--chain", chain, "--ipv6", "2001:db8::1")
    assert code == 0 and out.startswith("block 2 ")
    code, out, _ = run(capsys, "ledger", "verify", "--chain", chain)
    assert code == 0 and out.startswith("valid: 3 blocks")
    code, out, _ = run(capsys, "ledger", "inspect", "--chain", chain)
    assert code == 0 and "height 2" in out and "seq=1" in out and "balance=10" in out
    code, _, _ = run(capsys, "ledger", "export", "--chain", chain, "--out", tmp_path / "x.jsonl")
    assert code == 0 and (tmp_path / "x.jsonl").read_text() == chain.read_text()


def test_ledger_verify_detects_tamper(tmp_path, capsys):
    ident, chain = tmp_path / "id.json", tmp_path / "chain.jsonl"
    run(capsys, "keygen", "--seed", "9", "--out", ident)
    run(capsys, "ledger", "register", "--identity", ident, "--chain", chain)
    text = chain.read_text()
    chain.write_text(text.replace('"timestamp": 1', '"timestamp": 2').replace('"timestamp":1', '"timestamp":2'))
    assert chain.read_text() != text
    code, out, _ = run(capsys, "ledger", "verify", "--chain", chain)
    assert code == 1 and out.startswith("invalid")


def test_ledger_usage_errors(tmp_path, capsys):
    assert run(capsys, "ledger", "register", "--chain", tmp_path / "c")[0] == 2
    assert run(capsys, "ledger", "verify", "--chain", tmp_path / "missing")[0] == 2


def test_handshake_demo(capsys):
    code, out, _ = run(capsys, "handshake", "demo", "--seed", "1")
    assert code == 0 and "Established key=" in out
    assert "accounted=1296b" in out and "accounted=1552b" in out


@pytest.mark.parametrize("field,reason", [("nonce1", "FieldMismatch"), ("signature1", "SignatureInvalid"), ("public_key1", "AddressKeyMismatch"),
                                          ("responder_address", "FieldMismatch"),
                                          ("key_material", "DecryptFailed")])
def test_handshake_tamper(capsys, field, reason):
    code, out, _ = run(capsys, "handshake", "tamper", "--field", field)
    assert code == 1 and out.startswith(f"Failed:{reason}")


@pytest.mark.parametrize("name,code", [("emergency", 0), ("emergency_cross_du", 0), ("d2d", 0),
                                       ("emergency_callee_unregistered", 1)])
def test_scenario_matches_golden(tmp_path, capsys, name, code):
    out = tmp_path / "trace.txt"
    got, _, _ = run(capsys, "scenario", "run", CONFIGS / f"{name}.json", "--out", out)
    assert got == code
    assert out.read_text() == (GOLDEN / f"{name}.trace").read_text()


def test_scenario_repeatable(tmp_path, capsys):
    for name in ("a", "b"):
        run(capsys, "scenario", "run", CONFIGS / "emergency.json", "--out", tmp_path / name,
            "--frames", tmp_path / f"{name}.frames", "--seed", "99")
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()
    assert (tmp_path / "a.frames").read_bytes() == (tmp_path / "b.frames").read_bytes()


def test_scenario_bad_config(tmp_path, capsys):
    cfg = json.loads((CONFIGS / "emergency.json").read_text())
    cfg["links"].append({"id": "x", "a": "ue1", "b": "ghost"})
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(cfg))
    assert run(capsys, "scenario", "run", path, "--out", tmp_path / "t")[0] == 2
    assert run(capsys, "scenario", "run", tmp_path / "missing.json")[0] == 2


def test_bench_comm(tmp_path, capsys):
    out = tmp_path / "comm.csv"
    code, stdout, _ = run(capsys, "bench", "comm", "--out", out)
    assert code == 0
    rows = out.read_text().splitlines()
    assert any(r.startswith("BeRan,EllipticCurve,") and ",2848,356," in r for r in rows)
    assert any(r.startswith("Tls13,EllipticCurve,") and ",2560,320," in r for r in rows)


def test_bench_params_linear(tmp_path, capsys):
    params = tmp_path / "p.json"
    params.write_text(json.dumps({k: 3 * v for k, v in dataclasses.asdict(ParamTable()).items()}))
    run(capsys, "bench", "comm", "--out", tmp_path / "base.json", "--format", "structured-text")
    run(capsys, "bench", "comm", "--params", params, "--out", tmp_path / "x3.json", "--format", "structured-text")
    base = json.loads((tmp_path / "base.json").read_text())
    tripled = json.loads((tmp_path / "x3.json").read_text())
    assert [3 * r["total_bits"] for r in base] == [r["total_bits"] for r in tripled]


def test_bench_compute_reference_timings(tmp_path, capsys):
    out = tmp_path / "c.csv"
    code, _, _ = run(capsys, "bench", "compute", "--paper-timings", "--out", out)
    assert code == 0
    assert any(r.startswith("BeRan,EllipticCurve,") and ",233.000," in r for r in out.read_text().splitlines())


def test_bench_compute_local_timings(tmp_path, capsys):
    out, tout = tmp_path / "c.csv", tmp_path / "t.txt"
    code, _, _ = run(capsys, "bench", "compute", "--repetitions", "3", "--out", out, "--timings-out", tout)
    assert code == 0 and tout.read_text()
    beran = [r.split(",") for r in out.read_text().splitlines() if r.startswith("BeRan,")]
    assert all(float(r[7]) > 0 and float(r[8]) > 0 for r in beran)
    # feeding the written timings back reproduces the predicted column
    out2 = tmp_path / "c2.csv"
    assert run(capsys, "bench", "compute", "--timings", tout, "--repetitions", "3", "--out", out2)[0] == 0
    pred = lambda p: [r.split(",")[7] for r in p.read_text().splitlines()[1:]]
    assert pred(out) == pred(out2)


def test_report_default_name(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code, out, _ = run(capsys, "report")
    assert code == 0 and out.strip() == "report.csv"
    assert (tmp_path / "report.csv").read_text().startswith("protocol,suite,mode,")


@pytest.mark.parametrize("argv", [[], ["bench", "memory"], ["keygen", "--bogus"], ["bench", "comm", "--repetitions", "0"],
                                  ["handshake", "demo", "--suite", "RSA-1"]])
def test_usage_errors(capsys, argv):
    assert main(argv) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "beran", "keygen", "--seed", "3", "--out", str(tmp_path / "i.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and len(proc.stdout.strip()) == 68
