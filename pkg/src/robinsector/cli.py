"""Command line: ``robinsector <command> [flags]``.

Every run writes its tables (CSV and/or JSON), optional plots, and the fully
resolved configuration with its SHA-256 into the output directory.
Exit codes: 0 success, 2 usage, 3 non-convergence, 4 invariant violation.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (MeshBudget, agmon_decay_rate, converge_sector, count_below, count_growth,
                       default_jobs, fit_scan, lambda1_quadrature, monotone_verdict, scan_alpha)
from .discretization import SectorProblem, assemble_sector, build_grid, nodal_values
from .eigensolver import SolverConfig, certify_quasimode, dense_solve, solve_lowest
from .interval import (DomainError, IntervalProblem, d_e1_d_gamma, e1_interval, e2_interval, phi_of_gamma,
                       solve_m)
from .pencil import ConfigurationError, write_triplets
from .stargraph import CountingViolation, StarGraph, default_star_grid, verify_counting

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED, EXIT_INVARIANT = 0, 2, 3, 4
FORMATS = ("csv", "json", "svg", "pgm")

DEFAULTS = {
    "out": "results",
    "formats": "csv,json",
    "jobs": None,
    "gamma": 1.0,
    "L": 1.0,
    "scan_L": None,
    "scan_gamma": None,
    "alpha": math.pi / 4,
    "alphas": "0.3,0.5,0.7853981633974483,1.0,1.3",
    "k": 1,
    "n": 1,
    "order": 2,
    "angles": "0,1.5707963267948966",
    "r_max": None,
    "n_r": 200,
    "n_theta": 8,
    "grading": 1.01,
    "theta_grading": None,
    "max_level": 3,
    "rel_tol": 1e-4,
    "tol": 1e-8,
    "max_iter": 400,
    "preconditioner": "incomplete-factor",
    "log_alpha": False,
    "dump_pencil": False,
    "heatmap": False,
}
# keys that do not change any number in the outputs
_UNHASHED = {"out", "jobs", "formats", "config"}


class UsageError(Exception):
    pass


# -- parsing -------------------------------------------------------------------------

def parse_range(spec: str) -> list[float]:
    """``a,b,c`` or ``lo:hi:linear:n`` / ``lo:hi:geometric:n``; integer ``lo:hi`` steps by one."""
    spec = str(spec).strip()
    if ":" not in spec:
        return [float(s) for s in spec.split(",") if s.strip()]
    parts = spec.split(":")
    if len(parts) == 2:
        lo, hi = (int(p) for p in parts)
        return [float(v) for v in range(lo, hi + 1)]
    if len(parts) != 4:
        raise UsageError(f"bad range {spec!r}")
    lo, hi, kind, n = float(parts[0]), float(parts[1]), parts[2], int(parts[3])
    if kind == "linear":
        return np.linspace(lo, hi, n).tolist()
    if kind == "geometric":
        return np.geomspace(lo, hi, n).tolist()
    raise UsageError(f"range kind must be linear or geometric, got {kind!r}")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file with flat keys; flags override it")
    common.add_argument("--out")
    common.add_argument("--formats", help="comma list from csv,json,svg,pgm")
    common.add_argument("--jobs", type=int)
    common.add_argument("--gamma", type=float)
    common.add_argument("--r-max", dest="r_max", type=float)
    common.add_argument("--n-r", dest="n_r", type=int)
    common.add_argument("--n-theta", dest="n_theta", type=int)
    common.add_argument("--grading", type=float)
    common.add_argument("--theta-grading", dest="theta_grading", type=float)
    common.add_argument("--max-level", dest="max_level", type=int)
    common.add_argument("--rel-tol", dest="rel_tol", type=float)
    common.add_argument("--tol", type=float)
    common.add_argument("--max-iter", dest="max_iter", type=int)
    common.add_argument("--preconditioner", choices=("incomplete-factor", "diagonal", "none"))
    common.add_argument("--dump-pencil", dest="dump_pencil", action="store_true")

    p = argparse.ArgumentParser(prog="robinsector", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("interval", parents=[common], argument_default=argparse.SUPPRESS)
    s.add_argument("--L", type=float)
    s.add_argument("--scan-L", dest="scan_L")
    s.add_argument("--scan-gamma", dest="scan_gamma")
    s = sub.add_parser("sector", parents=[common], argument_default=argparse.SUPPRESS)
    s.add_argument("--alpha", type=float)
    s.add_argument("--k", type=int)
    s.add_argument("--heatmap", action="store_true")
    s = sub.add_parser("scan", parents=[common], argument_default=argparse.SUPPRESS)
    s.add_argument("--alphas")
    s.add_argument("--k", type=int)
    s.add_argument("--log-alpha", dest="log_alpha", action="store_true")
    s = sub.add_parser("fit", parents=[common], argument_default=argparse.SUPPRESS)
    s.add_argument("--alphas")
    s.add_argument("--n", type=int)
    s.add_argument("--order", type=int)
    s = sub.add_parser("count", parents=[common], argument_default=argparse.SUPPRESS)
    s.add_argument("--alphas")
    s = sub.add_parser("stargraph", parents=[common], argument_default=argparse.SUPPRESS)
    s.add_argument("--angles")
    s = sub.add_parser("certify", parents=[common], argument_default=argparse.SUPPRESS)
    s.add_argument("--alpha", type=float)
    return p


def resolve_config(argv) -> dict:
    """Defaults, then the JSON config file, then explicit flags."""
    ns = vars(_parser().parse_args(argv))
    cfg = dict(DEFAULTS)
    if "config" in ns:
        try:
            with open(ns["config"]) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        unknown = set(file_cfg) - set(DEFAULTS) - {"command"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    cfg.update({k: v for k, v in ns.items() if k != "config"})
    fmts = [f for f in str(cfg["formats"]).split(",") if f]
    if not set(fmts) <= set(FORMATS):
        raise UsageError(f"formats must be drawn from {FORMATS}")
    cfg["formats"] = ",".join(fmts)
    return cfg


def config_hash(cfg: dict) -> str:
    core = {k: v for k, v in cfg.items() if k not in _UNHASHED}
    blob = json.dumps(core, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# -- emitters ------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return v


def write_json(path: Path, obj) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(_jsonable(obj), fh, sort_keys=True, indent=1)
        fh.write("\n")


def write_svg(path: Path, series: dict, xlabel: str, ylabel: str, log_x: bool = False,
              width: int = 640, height: int = 400) -> None:
    """Line plot of ``{label: (x, y)}``."""
    pad = 56
    xs = np.concatenate([np.asarray(x, float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, float) for _, y in series.values()])
    ok = np.isfinite(xs) & np.isfinite(ys)
    if log_x:
        ok &= xs > 0
    if not np.any(ok):
        raise ValueError("nothing to plot")
    tx = np.log10 if log_x else (lambda v: np.asarray(v, float))
    x0, x1 = float(np.min(tx(xs[ok]))), float(np.max(tx(xs[ok])))
    y0, y1 = float(np.min(ys[ok])), float(np.max(ys[ok]))
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    def px(x):
        return pad + (tx(x) - x0) / (x1 - x0) * (width - 2 * pad)

    def py(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
           'fill="none" stroke="black"/>',
           f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle">{xlabel}</text>',
           f'<text x="14" y="{height / 2}" transform="rotate(-90 14 {height / 2})" '
           f'text-anchor="middle">{ylabel}</text>',
           f'<text x="{pad}" y="{height - pad + 16}" font-size="11">{_fmt(10**x0 if log_x else x0)[:8]}</text>',
           f'<text x="{width - pad}" y="{height - pad + 16}" font-size="11" text-anchor="end">'
           f'{_fmt(10**x1 if log_x else x1)[:8]}</text>',
           f'<text x="{pad - 4}" y="{height - pad}" font-size="11" text-anchor="end">{_fmt(y0)[:8]}</text>',
           f'<text x="{pad - 4}" y="{pad + 10}" font-size="11" text-anchor="end">{_fmt(y1)[:8]}</text>']
    for i, (label, (x, y)) in enumerate(series.items()):
        x, y = np.asarray(x, float), np.asarray(y, float)
        m = np.isfinite(x) & np.isfinite(y) & ((x > 0) if log_x else True)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[m], y[m]))
        c = colors[i % len(colors)]
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{width - pad - 4}" y="{pad + 16 * (i + 1)}" fill="{c}" font-size="12" '
                   f'text-anchor="end">{label}</text>')
    out.append("</svg>")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


def write_pgm(path: Path, image: np.ndarray) -> None:
    """Binary 16-bit greymap (P5, maxval 65535, big-endian), scaled to the maximum."""
    a = np.abs(np.asarray(image, dtype=float))
    peak = a.max()
    q = np.zeros(a.shape, dtype=">u2") if peak == 0 else np.round(a / peak * 65535).astype(">u2")
    h, w = q.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(q.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    head = data.split(maxsplit=4)
    if head[0] != b"P5":
        raise ValueError("not a binary greymap")
    w, h, maxval = int(head[1]), int(head[2]), int(head[3])
    raw = head[4]
    dtype = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(raw, dtype=dtype, count=w * h).reshape(h, w)


# -- commands ------------------------------------------------------------------------

def _budget(cfg) -> MeshBudget:
    return MeshBudget(n_r0=int(cfg["n_r"]), n_theta0=int(cfg["n_theta"]), grading0=float(cfg["grading"]),
                      theta_grading0=cfg["theta_grading"], max_level=int(cfg["max_level"]),
                      rel_tol=float(cfg["rel_tol"]), r_max=cfg["r_max"])


def _solver(cfg) -> SolverConfig:
    return SolverConfig(tolerance=float(cfg["tol"]), max_iterations=int(cfg["max_iter"]),
                        preconditioner=cfg["preconditioner"])


def _guard(f, *a):
    try:
        return f(*a)
    except (DomainError, ArithmeticError):
        return float("nan")


def cmd_interval(cfg):
    Ls = parse_range(cfg["scan_L"]) if cfg["scan_L"] else [float(cfg["L"])]
    gs = parse_range(cfg["scan_gamma"]) if cfg["scan_gamma"] else [float(cfg["gamma"])]
    cols = ["L", "gamma", "m", "E1", "E2", "dE1_dgamma", "phi_of_gammaL", "asymptotic_gap"]
    rows = []
    for L in Ls:
        for g in gs:
            p = IntervalProblem(L, g)
            if g == 0:
                m, e1 = 0.0, 0.0
            else:
                m = _guard(solve_m, g * L)
                e1 = _guard(e1_interval, p)
            e2 = _guard(e2_interval, p)
            de = -1.0 / L if g == 0 else _guard(d_e1_d_gamma, p)
            phi = _guard(phi_of_gamma, g * L) if g > 0 else float("nan")
            gap = e1 + g**2 + 4 * g**2 * math.exp(-2 * g * L)
            rows.append([L, g, m, e1, e2, de, phi, gap])
    return {"columns": cols, "rows": rows}, EXIT_OK


def cmd_sector(cfg, outdir: Path):
    alpha, k, gamma = float(cfg["alpha"]), int(cfg["k"]), float(cfg["gamma"])
    sol = converge_sector(alpha, k, gamma, _budget(cfg), _solver(cfg), keep_pencil=True)
    cols = ["alpha", "gamma", "n", "E", "E_extrapolated", "enclosure_lo", "enclosure_hi", "residual",
            "closed_form_E1", "count_below_threshold", "agmon_rate", "agmon_bound", "n_r", "n_theta", "n_dof",
            "converged"]
    rows = []
    n_r, n_t, n_dof, _ = sol.history[-1]
    for j, (v, e, enc) in enumerate(zip(sol.values, sol.extrapolated, sol.enclosures)):
        res = sol.results[j]
        try:
            rate = agmon_decay_rate(res, sol.pencil).rate
        except ValueError:
            rate = float("nan")
        rows.append([alpha, gamma, j + 1, v, e, enc[0], enc[1], res.residual, -gamma**2 / math.sin(alpha) ** 2,
                     sol.count, rate, 0.9 * math.sqrt(max(-gamma**2 - v, 0.0)), n_r, n_t, n_dof, sol.converged])
    extra = {}
    if cfg["dump_pencil"]:
        write_triplets(sol.pencil, outdir / "sector_K.txt", outdir / "sector_M.txt")
    if cfg["heatmap"] or "pgm" in cfg["formats"]:
        if sol.results:
            extra["heatmap"] = np.abs(nodal_values(sol.pencil, sol.results[0].vector)).T
    code = EXIT_OK if sol.converged and sol.values else EXIT_NONCONVERGED
    return {"columns": cols, "rows": rows, "history": sol.history}, code, extra


def cmd_scan(cfg):
    alphas = parse_range(cfg["alphas"])
    k = int(cfg["k"])
    scan = scan_alpha(alphas, k, _budget(cfg), float(cfg["gamma"]), _solver(cfg), int(cfg["jobs"]))
    cols = ["alpha", "n", "E", "E_extrapolated", "enclosure_lo", "enclosure_hi", "count_below_threshold",
            "n_dof", "flag"]
    rows = []
    for i, a in enumerate(scan.alphas):
        for j, (v, e, enc) in enumerate(zip(scan.eigenvalues[i], scan.extrapolated[i], scan.enclosures[i])):
            rows.append([a, j + 1, v, e, enc[0], enc[1], scan.counts[i], scan.mesh_metadata[i][-1][2],
                         scan.flags[i]])
    verdict = monotone_verdict(scan, 1)
    series = {f"E{n}": (scan.alphas, scan.column(n)) for n in range(1, k + 1)}
    code = EXIT_OK
    if not all(verdict):
        code = EXIT_INVARIANT
    elif any(f != "converged" for f in scan.flags):
        code = EXIT_NONCONVERGED
    return {"columns": cols, "rows": rows, "monotone_E1": verdict}, code, {"series": series}


def cmd_fit(cfg):
    alphas = parse_range(cfg["alphas"])
    n, order = int(cfg["n"]), int(cfg["order"])
    if max(alphas) > 0.2:
        raise UsageError("expansion fits need alphas <= 0.2")
    scan = scan_alpha(alphas, n, _budget(cfg), 1.0, _solver(cfg), int(cfg["jobs"]))
    fit = fit_scan(scan, n, order)
    lam1 = lambda1_quadrature(n)
    cols = ["n", "order", "j", "lambda_j", "condition", "residual_norm", "lambda1_quadrature"]
    rows = [[n, order, j, c, fit.condition, fit.residual_norm, lam1] for j, c in enumerate(fit.coefficients)]
    code = EXIT_OK if all(f == "converged" for f in scan.flags) else EXIT_NONCONVERGED
    series = {f"alpha^2 E{n}": (scan.alphas, np.asarray(scan.alphas) ** 2 * scan.column(n, True))}
    return {"columns": cols, "rows": rows}, code, {"series": series}


def cmd_count(cfg):
    alphas = sorted(parse_range(cfg["alphas"]))
    g = float(cfg["gamma"])
    grid = build_grid(0.0, (cfg["r_max"] or 60.0) / g, max(int(cfg["n_r"]), 1600), 1.0025,
                      max(int(cfg["n_theta"]), 16))
    counts = [count_below(a, -1.0, g, grid) for a in alphas]
    cols = ["alpha", "count", "alpha_times_count"]
    rows = [[a, c, a * c] for a, c in zip(alphas, counts)]
    try:
        kappa, _ = count_growth(alphas, counts)
    except ValueError:
        return {"columns": cols, "rows": rows}, EXIT_INVARIANT, {}
    return {"columns": cols, "rows": rows, "kappa_hat": kappa}, EXIT_OK, {}


def cmd_stargraph(cfg, outdir: Path):
    angles = parse_range(cfg["angles"])
    star = StarGraph(tuple(angles), float(cfg["gamma"]))
    grid = None
    if cfg["r_max"] is not None:
        grid = build_grid(0.0, float(cfg["r_max"]), int(cfg["n_r"]), float(cfg["grading"]),
                          max(int(cfg["n_theta"]), 2 * len(angles)), float(cfg["theta_grading"] or 1.0))
    try:
        rep = verify_counting(star, grid)
    except CountingViolation as exc:
        write_json(outdir / "stargraph_violation.json", exc.report.__dict__)
        return {"columns": [], "rows": []}, EXIT_INVARIANT, {}
    if cfg["dump_pencil"]:
        from .discretization import assemble_stargraph
        write_triplets(assemble_stargraph(star.angles, star.gamma, grid or default_star_grid(star)),
                       outdir / "stargraph_K.txt", outdir / "stargraph_M.txt")
    cols = ["n", "E", "enclosure_lo", "enclosure_hi", "direct_count", "bound"]
    rows = [[j + 1, v, enc[0], enc[1], rep.direct_count, rep.bound]
            for j, (v, enc) in enumerate(zip(rep.direct_eigenvalues, rep.enclosures))]
    return {"columns": cols, "rows": rows, "sector_counts": rep.sector_counts, "mesh": rep.meta}, EXIT_OK, {}


def cmd_certify(cfg):
    """Quasimode bound for the ground pair of one sector pencil, checked against a dense solve."""
    alpha, gamma = float(cfg["alpha"]), float(cfg["gamma"])
    r_max = cfg["r_max"] or 16.0 / (gamma * math.sqrt(1 / math.sin(alpha) ** 2 - 1 + 0.05))
    grid = build_grid(0.0, r_max, int(cfg["n_r"]), float(cfg["grading"]), int(cfg["n_theta"]),
                      float(cfg["theta_grading"] or 1.0))
    pencil = assemble_sector(SectorProblem(alpha, gamma), grid)
    res = solve_lowest(pencil, 1, _solver(cfg))[0]
    c = 1.0 - pencil.lower_bound
    cert = certify_quasimode(pencil.shifted(c), pencil.M, res.vector, res.value + c)
    dense = float(dense_solve(pencil)[0]) if pencil.n <= 3000 else float("nan")
    lo, hi = (cert.interval[0] - c, cert.interval[1] - c) if cert.informative else (float("nan"),) * 2
    cols = ["alpha", "E", "epsilon", "enclosure_lo", "enclosure_hi", "width", "dense_E", "n_dof"]
    rows = [[alpha, res.value, cert.epsilon, lo, hi, hi - lo, dense, pencil.n]]
    code = EXIT_OK if cert.informative else EXIT_NONCONVERGED
    if cert.informative and math.isfinite(dense) and not lo - 1e-12 <= dense <= hi + 1e-12:
        code = EXIT_INVARIANT
    return {"columns": cols, "rows": rows}, code, {}


def run(argv=None) -> int:
    try:
        cfg = resolve_config(argv)
    except UsageError as exc:
        print(f"robinsector: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if cfg["jobs"] is None:
        cfg["jobs"] = default_jobs()
    cmd = cfg["command"]
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    h = config_hash(cfg)
    try:
        if cmd == "interval":
            report, code = cmd_interval(cfg)
            extra = {}
        elif cmd in ("sector", "stargraph"):
            report, code, extra = (cmd_sector if cmd == "sector" else cmd_stargraph)(cfg, outdir)
        else:
            report, code, extra = {"scan": cmd_scan, "fit": cmd_fit, "count": cmd_count,
                                   "certify": cmd_certify}[cmd](cfg)
    except (UsageError, ConfigurationError, DomainError, ValueError) as exc:
        print(f"robinsector: {exc}", file=sys.stderr)
        return EXIT_USAGE
    fmts = cfg["formats"].split(",")
    resolved = {k: v for k, v in cfg.items() if k != "jobs"}
    report = {"command": cmd, "version": __version__, "config_hash": h, "config": resolved, **report}
    write_json(outdir / "config.json", {"config": resolved, "config_hash": h, "version": __version__})
    if "csv" in fmts:
        write_csv(outdir / f"{cmd}.csv", report["columns"] + ["config_hash"],
                  [list(r) + [h] for r in report["rows"]])
    if "json" in fmts:
        write_json(outdir / f"{cmd}.json", report)
    if "svg" in fmts and "series" in extra:
        write_svg(outdir / f"{cmd}.svg", extra["series"], "alpha", "eigenvalue", bool(cfg["log_alpha"]))
    if ("pgm" in fmts or cfg.get("heatmap")) and "heatmap" in extra:
        write_pgm(outdir / f"{cmd}_eigenfunction.pgm", extra["heatmap"])
    for row in report["rows"]:
        print(",".join(_fmt(v) for v in row))
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
