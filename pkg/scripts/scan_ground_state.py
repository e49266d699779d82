"""Ground energy against the closed form over a range of opening angles."""
import argparse
import csv
import math
import sys

import numpy as np

from robinsector.analysis import monotone_verdict, scan_alpha


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alphas", default="0.3,0.5,0.5235987755982988,0.7853981633974483,1.0,1.2,1.3")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    alphas = [float(a) for a in args.alphas.split(",")]
    scan = scan_alpha(alphas, k=1, jobs=args.jobs)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["alpha", "E1", "E1_extrapolated", "exact", "rel_err", "enc_lo", "enc_hi", "count", "flag"])
    for a, ev, ex, enc, c, f in zip(scan.alphas, scan.eigenvalues, scan.extrapolated, scan.enclosures,
                                    scan.counts, scan.flags):
        exact = -1 / math.sin(a) ** 2
        w.writerow([a, ev[0], ex[0], exact, abs(ev[0] / exact - 1), enc[0][0], enc[0][1], c, f])
    print("# adjacent enclosures disjoint and increasing:", all(monotone_verdict(scan)), file=sys.stderr)


if __name__ == "__main__":
    np.set_printoptions(precision=10)
    main()
