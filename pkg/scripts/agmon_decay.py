"""Radial decay rate of the ground state against sqrt(-1 - E)."""
import argparse
import math

from robinsector.analysis import agmon_decay_rate, converge_sector


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alphas", default="0.3,0.5235987755982988,0.7853981633974483,1.0,1.3")
    args = ap.parse_args()
    print("alpha,E,rate,target,ratio,goodness")
    for a in (float(x) for x in args.alphas.split(",")):
        sol = converge_sector(a, keep_pencil=True)
        fit = agmon_decay_rate(sol.results[0], sol.pencil)
        t = math.sqrt(-1 - sol.values[0])
        print(f"{a:.6f},{sol.values[0]:.8f},{fit.rate:.6f},{t:.6f},{fit.rate / t:.4f},{fit.goodness:.6f}",
              flush=True)


if __name__ == "__main__":
    main()
