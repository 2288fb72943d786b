"""Run the bundled emergency scenarios and the D2D handshake, printing each trace."""

import argparse
from pathlib import Path

from beran import simnet

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SCENARIOS = ("emergency", "emergency_cross_du", "emergency_callee_unregistered", "d2d")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="results/traces")
    parser.add_argument("--quiet", action="store_true", help="print only the outcome line")
    args = parser.parse_args()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in SCENARIOS:
        _, trace = simnet.run_config(simnet.load_config(CONFIGS / f"{name}.json"))
        (out_dir / f"{name}.trace").write_text(trace.text())
        print(f"== {name}: {len(trace.events)} events")
        print(trace.lines()[-1] if args.quiet else trace.text(), end="\n" if args.quiet else "")


if __name__ == "__main__":
    main()
