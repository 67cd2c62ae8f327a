#!/usr/bin/env python3
"""Print the beta = 0.3 operating-region margin tables to stdout.

Equivalent to `ftnlab margins --config configs/margins.yaml` but without
touching the filesystem; handy for eyeballing a code change.
"""

import argparse

from ftnlab.separability import margin_report

TAUS = (0.6, 0.7, 0.8, 0.9)
SNRS = (0, 2, 4, 6, 8)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--beta", type=float, default=0.3)
    parser.add_argument("--n", type=int, default=100, help="block length")
    parser.add_argument("--raw", action="store_true",
                        help="print raw signed aggregates instead of the "
                             "clamped table values")
    args = parser.parse_args()

    reports = {r.tau: r
               for r in margin_report(args.beta, TAUS, SNRS, N=args.n)}

    def fmt(pair):
        return "%.2f, %.2f" % pair

    print(f"Linear margins (beta={args.beta}, N={args.n})")
    print("tau      " + "".join(f"{tau:>14.1f}" for tau in TAUS))
    row = []
    for tau in TAUS:
        rep = reports[tau]
        pair = (rep.delta_max, rep.delta_ave) if args.raw else rep.table_linear()
        row.append(f"{fmt(pair):>14}")
    print("max, ave " + "".join(row))

    print(f"\nGaussian margins (beta={args.beta}, N={args.n})")
    print("SNR(dB)  " + "".join(f"{tau:>14.1f}" for tau in TAUS))
    for i, snr in enumerate(SNRS):
        row = []
        for tau in TAUS:
            rep = reports[tau]
            pair = ((rep.gaussian_max(i), rep.gaussian_ave(i)) if args.raw
                    else rep.table_gaussian(i))
            row.append(f"{fmt(pair):>14}")
        print(f"{snr:<9}" + "".join(row))


if __name__ == "__main__":
    main()
