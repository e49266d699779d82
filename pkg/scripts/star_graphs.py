"""Direct spectra of star graphs next to the decoupled-sector bound."""
import argparse
import math

from robinsector.stargraph import StarGraph, verify_counting

PI = math.pi
STARS = {
    "one ray": (0.0,),
    "two rays, gap pi/3": (0.0, PI / 3),
    "two rays, gap pi/2": (0.0, PI / 2),
    "two rays, gap 2pi/3": (0.0, 2 * PI / 3),
    "two rays, gap 3pi/4": (0.0, 3 * PI / 4),
    "equilateral": (0.0, 2 * PI / 3, 4 * PI / 3),
    "cross": (0.0, PI / 2, PI, 3 * PI / 2),
    "narrow fan": (0.0, 0.3, PI),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--only", help="substring filter on the star name")
    args = ap.parse_args()
    print("star,direct_count,bound,sector_counts,E")
    for name, ang in STARS.items():
        if args.only and args.only not in name:
            continue
        rep = verify_counting(StarGraph(ang))
        ev = ";".join(f"{e:.6f}" for e in rep.direct_eigenvalues)
        per = ";".join(str(c) for c in rep.sector_counts)
        print(f"{name},{rep.direct_count},{rep.bound},{per},{ev}", flush=True)


if __name__ == "__main__":
    main()
