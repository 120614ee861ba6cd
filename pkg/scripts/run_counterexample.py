#!/usr/bin/env python3
"""Reproduce the lower Fefferman-Phong failure of the rank-one radial weight.

The annulus energy ratio grows linearly in R for the rank-one weight while
the identity-weight control stays flat at the constant-weight bound 2^n.
"""

import argparse

from mwlab import ineqlab


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--R", default="10,20,40,80")
    args = ap.parse_args()
    Rs = [float(v) for v in args.R.split(",")]

    res = ineqlab.counterexample_fp_failure(Rs)
    ctrl = ineqlab.counterexample_fp_failure(Rs, control=True)
    print(f"{'R':>8} {'ratio (rank-one)':>18} {'ratio (identity)':>18}")
    for a, b in zip(res["rows"], ctrl["rows"]):
        print(f"{a['R']:8.1f} {a['ratio']:18.4f} {b['ratio']:18.4f}")
    print(f"\nlog-log slope: rank-one {res['slope']:.3f} (expect ~1), "
          f"identity {ctrl['slope']:.3f} (expect ~0)")


if __name__ == "__main__":
    main()
