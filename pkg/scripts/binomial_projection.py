#!/usr/bin/env python3
"""Project terminal wealth for a daily win/lose process at several horizons.

Uses a classifier precision as the win probability and prints the expected
wealth, the per-step growth with its martingale flag, and the Wald expected
log growth for each horizon.
"""

import argparse

from optioncast.binomial import (
    BinomialSpec,
    enumerate_tree,
    expected_wealth,
    martingale_check,
    wald_log_expectation,
)
from optioncast.fusion import REFERENCE_PRECISIONS


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--precision", type=float, default=REFERENCE_PRECISIONS["cnn"],
                        help="win probability (default: the cnn reference precision)")
    parser.add_argument("--ror", type=float, default=2.0)
    parser.add_argument("--rol", type=float, default=0.5)
    parser.add_argument("--capital", type=float, default=1.0)
    parser.add_argument("--horizons", type=int, nargs="+", default=[1, 5, 10, 21])
    args = parser.parse_args()

    check = martingale_check(
        BinomialSpec(p=args.precision, ror=args.ror, rol=args.rol, initial=args.capital)
    )
    flag = "martingale" if check.is_martingale else "not a martingale"
    print(
        f"p={args.precision} ror={args.ror} rol={args.rol}: "
        f"per-step growth {check.per_step_growth:.6f} ({flag})"
    )
    for days in args.horizons:
        spec = BinomialSpec(
            p=args.precision, ror=args.ror, rol=args.rol,
            initial=args.capital, days=days,
        )
        expectation = expected_wealth(spec)
        log_growth = wald_log_expectation(spec, float(days))
        line = (
            f"  {days:>3} day(s): expected wealth {expectation:>12.6f}, "
            f"expected log growth {log_growth:+.6f}"
        )
        if days <= 12:
            tail = enumerate_tree(spec).outcomes
            line += f", outcome range [{tail[0][0]:.4f}, {tail[-1][0]:.4f}]"
        print(line)


if __name__ == "__main__":
    main()
