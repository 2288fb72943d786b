"""Print the communication and predicted computation overhead table and write it as CSV."""

import argparse
from pathlib import Path

from beran import bench


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/overheads.csv")
    parser.add_argument("--cert-mode", choices=bench.CERT_MODES, default="raw-pk")
    args = parser.parse_args()

    reports = bench.build_reports(timings=dict(bench.PAPER_TIMINGS), cert_mode=args.cert_mode)
    print(f"{'protocol':8} {'suite':14} {'signals (bits)':44} {'bytes':>6} {'predicted us':>13}")
    for r in reports:
        signals = "+".join(str(b) for b in r.signal_bits)
        print(f"{r.protocol.value:8} {r.suite.kind.value:14} {signals:44} {r.total_bytes:6d} {r.predicted_us:13.1f}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    bench.emit_report(reports, "csv", out)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
