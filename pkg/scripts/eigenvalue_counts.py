"""Number of eigenvalues below -1 as the angle shrinks."""
import argparse

from robinsector.analysis import count_below, count_growth, min_count_estimate
from robinsector.discretization import build_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alphas", default="0.03,0.05,0.07,0.1,0.14,0.2,0.3,0.5")
    ap.add_argument("--r-max", type=float, default=60.0)
    ap.add_argument("--n-r", type=int, default=1600)
    ap.add_argument("--C", type=float, default=0.35, help="boundedness constant for the lower estimate")
    args = ap.parse_args()
    alphas = sorted(float(a) for a in args.alphas.split(","))
    grid = build_grid(0.0, args.r_max, args.n_r, 1.0025, 16)
    counts = [count_below(a, grid=grid) for a in alphas]
    print("alpha,count,alpha_times_count,lower_estimate")
    for a, c in zip(alphas, counts):
        print(f"{a},{c},{a * c:.4f},{min_count_estimate(a, args.C)}")
    print(f"# min N(alpha) alpha = {count_growth(alphas, counts)[0]:.4f}")


if __name__ == "__main__":
    main()
