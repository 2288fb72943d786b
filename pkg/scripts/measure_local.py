"""Measure primitive and handshake timings on this host and compare them with the composition model."""

import argparse

from beran import bench, crypto


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repetitions", type=int, default=200)
    parser.add_argument("--ff-repetitions", type=int, default=100)
    args = parser.parse_args()

    for suite, reps in (("EllipticCurve", args.repetitions), ("FiniteField", args.ff_repetitions)):
        check = bench.self_consistency(suite, repetitions=reps)
        timing = bench.measure_beran_handshake(suite, repetitions=reps)
        t = check.timings
        print(f"{suite}: sign {t.t_sign:.1f}us verify {t.t_verify:.1f}us hash {t.t_hash:.2f}us")
        print(f"  signals 1-2 measured {check.measured_us:.1f}us, predicted {check.predicted_us:.1f}us, "
              f"error {100 * check.relative_error:.1f}%")
        print(f"  full handshake median {timing.total_us:.1f}us (message 3 {timing.confirm_us:.1f}us)")
    print()
    print(crypto.format_timings([crypto.measure_primitives(s, 50) for s in crypto.SUITES.values()]), end="")


if __name__ == "__main__":
    main()
