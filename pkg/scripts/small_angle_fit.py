"""Fit alpha^2 E_n = lambda_0 + lambda_1 alpha^2 + ... at small angles."""
import argparse

import numpy as np

from robinsector.analysis import boundedness_constant, fit_scan, lambda1_quadrature, scan_alpha


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lo", type=float, default=0.04)
    ap.add_argument("--hi", type=float, default=0.16)
    ap.add_argument("--points", type=int, default=8)
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--order", type=int, default=2)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    alphas = np.geomspace(args.lo, args.hi, args.points)
    scan = scan_alpha(alphas, k=args.k, jobs=args.jobs)
    a = np.asarray(scan.alphas)
    print("alpha," + ",".join(f"alpha2_E{n}" for n in range(1, args.k + 1)))
    for i, x in enumerate(a):
        print(f"{x:.6f}," + ",".join(f"{x * x * scan.column(n, True)[i]:.10f}" for n in range(1, args.k + 1)))
    C = boundedness_constant(a, {n: scan.column(n, True) for n in range(1, args.k + 1)})
    print(f"# boundedness constant C = {C:.5f}")
    for n in range(1, args.k + 1):
        fit = fit_scan(scan, n, args.order)
        coef = ", ".join(f"{c:.8f}" for c in fit.coefficients)
        print(f"# n={n}: lambda_j = [{coef}] (condition {fit.condition:.2e}); "
              f"exact lambda_0 = {-1 / (2 * n - 1) ** 2:.8f}, quadrature lambda_1 = {lambda1_quadrature(n):.8f}")


if __name__ == "__main__":
    main()
