"""Command-line entry point: `liouville solve | moments | analyze`.

Configuration comes from an optional JSON file (--config) with flag
overrides; flags win.  Angles and rho values accept a "pi" suffix
("7pi", "0.5pi").  Outputs are deterministic for a fixed seed: JSON with
sorted keys, RFC-4180 CSV with a final config record, and every file embeds
the resolved configuration and the tool version.

Exit codes: 0 success, 1 configuration error, 2 computational failure,
3 verification failure (a certificate failed its independent re-check).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .barycenters import (
    Barycenter,
    count_preimages,
    det_A2k,
    invert_moments,
    moment_map,
    phi_k,
    project_Xi,
    random_barycenter,
)
from .concentration import AlternativeReport, detect_alternative, verify_alternative_report
from .functionals import SingularConfig, nearest_critical
from .measures import CircleMeasure, DiskDensity, kr_distance
from .solver import continuation, necessary_condition_sphere, pohozaev_residual_disk
from .testfn import testfn_disk_report

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_COMPUTE = 2
EXIT_VERIFY = 3


def parse_pi(text: str) -> float:
    """Parse a float with optional 'pi' suffix: '7pi' -> 7*pi."""
    s = str(text).strip().lower()
    if s.endswith("pi"):
        head = s[:-2].strip()
        return (float(head) if head else 1.0) * np.pi
    return float(s)


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_json(path: Path, payload: dict, config: dict) -> None:
    doc = {"version": __version__, "config": config, "results": payload}
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def write_csv(path: Path, header: list[str], rows: list[list], config: dict) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
        w.writerow(["#config", json.dumps({"version": __version__, **config}, sort_keys=True)])


def _svg_polyline(path: Path, xs, ys, title: str) -> None:
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    w, h, pad = 640, 400, 40
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    sx = lambda x: pad + (w - 2 * pad) * (x - x0) / max(x1 - x0, 1e-300)
    sy = lambda y: h - pad - (h - 2 * pad) * (y - y0) / max(y1 - y0, 1e-300)
    pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
    body = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">'
        f'<rect width="{w}" height="{h}" fill="white"/>'
        f'<text x="{w//2}" y="20" text-anchor="middle" font-size="14">{title}</text>'
        f'<polyline points="{pts}" fill="none" stroke="black" stroke-width="1.5"/></svg>'
    )
    path.write_text(body + "\n", encoding="utf-8")


def _svg_heatmap(path: Path, grid: np.ndarray, title: str) -> None:
    n1, n2 = grid.shape
    cell = max(2, 480 // max(n1, n2))
    w, h = n2 * cell + 60, n1 * cell + 60
    lo, hi = float(grid.min()), float(grid.max())
    rects = []
    for i in range(n1):
        for j in range(n2):
            f = (grid[i, j] - lo) / max(hi - lo, 1e-300)
            c = int(255 * (1 - f))
            rects.append(
                f'<rect x="{30 + j * cell}" y="{30 + i * cell}" width="{cell}" height="{cell}" '
                f'fill="rgb({c},{c},255)"/>'
            )
    body = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">'
        f'<rect width="{w}" height="{h}" fill="white"/>'
        f'<text x="{w//2}" y="20" text-anchor="middle" font-size="14">{title}</text>'
        + "".join(rects)
        + "</svg>"
    )
    path.write_text(body + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_solve(args, config) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        branch = continuation(
            rho_start=config["rho_start"],
            rho_end=config["rho_end"],
            alpha=config["alpha"],
            n_steps=config["steps"],
            m=config["grid_m"],
            keep_solutions=True,
        )
    except (RuntimeError, ValueError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    rows = [
        [p.rho, p.max_u, p.mass, p.pohozaev_margin, p.residual] for p in branch.points
    ]
    write_csv(out / "branch.csv", ["rho", "max_u", "mass", "pohozaev_margin", "residual"], rows, config)
    poho_rows = []
    for sol in branch.solutions:
        lhs, rhs, resid, margin = pohozaev_residual_disk(sol)
        poho_rows.append([sol.rho, lhs, rhs, resid, margin])
    write_csv(out / "pohozaev.csv", ["rho", "lhs", "rhs", "residual", "margin"], poho_rows, config)
    write_json(
        out / "branch.json",
        {
            "alpha": branch.alpha,
            "termination": branch.termination,
            "rho_star": branch.rho_star,
            "threshold_4pi_1_plus_alpha": branch.threshold,
            "nearest_lambda": branch.nearest_lambda,
            "lambda_distance": branch.lambda_distance,
            "points": rows,
        },
        config,
    )
    if args.svg:
        _svg_polyline(
            out / "branch.svg",
            [p.rho for p in branch.points],
            [p.max_u for p in branch.points],
            "max u along the branch",
        )
    print(
        f"branch: {branch.termination}; rho*="
        f"{branch.rho_star if branch.rho_star is not None else 'n/a'}; "
        f"nearest quantization value {branch.nearest_lambda:.6f}"
    )
    return EXIT_OK


def cmd_moments(args, config) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng_seed = config["seed"]
    if args.moments_cmd == "roundtrip":
        rng = np.random.default_rng(rng_seed)
        k = config["k"]
        worst = 0.0
        for _ in range(config["trials"]):
            sig = random_barycenter(k, rng)
            rec = invert_moments(moment_map(sig, k))
            worst = max(worst, kr_distance(sig.as_measure(), rec.as_measure(), "circle"))
        write_json(out / "roundtrip.json", {"k": k, "trials": config["trials"], "max_kr_error": worst}, config)
        print(f"roundtrip k={k}: max KR error {worst:.3e}")
        return EXIT_OK
    if args.moments_cmd == "degree":
        k = config["k"]
        kfact = math.factorial(k)
        rng = np.random.default_rng(rng_seed)
        w = 0.12 + 0.6 * rng.dirichlet(np.ones(k))
        w = w / (w.sum() + 0.35)  # interior target, away from the coincidence set
        target = phi_k(w * np.exp(1j * rng.uniform(0, 2 * np.pi, k)))
        count, _ = count_preimages(target, n_starts=config["starts"], seed=rng_seed)
        write_json(
            out / "degree.json",
            {
                "k": k,
                "expected_factorial": kfact,
                "count": count,
                "target": [[z.real, z.imag] for z in target],
            },
            config,
        )
        print(f"degree check k={k}: {count} preimages (k! = {kfact})")
        return EXIT_OK
    if args.moments_cmd == "project":
        try:
            text = Path(config["input"]).read_text(encoding="utf-8")
        except OSError as exc:
            print(f"cannot read input: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        doc = json.loads(text)
        measure = DiskDensity.from_json(text) if doc.get("domain") == "disk" else CircleMeasure.from_json(text)
        try:
            point, bary = project_Xi(measure, config["k"], eps_proj=config["eps_proj"])
        except ValueError as exc:
            print(f"projection failed: {exc}", file=sys.stderr)
            return EXIT_COMPUTE
        write_json(
            out / "projection.json",
            {
                "point_on_sphere": [[z.real, z.imag] for z in point],
                "barycenter": json.loads(bary.to_json()),
            },
            config,
        )
        print(f"projected onto S_{config['k']}: {bary.order} atoms")
        return EXIT_OK
    if args.moments_cmd == "det-scan":
        k = config["k"]
        n = config["scan_n"]
        thetas = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        fixed = np.linspace(0.0, 2 * np.pi, k, endpoint=False)[2:]
        dets = np.empty((n, n))
        rows = []
        for i, t1 in enumerate(thetas):
            for j, t2 in enumerate(thetas):
                dets[i, j] = det_A2k(np.concatenate([[t1, t2], fixed]))
                rows.append([t1, t2, dets[i, j]])
        write_csv(out / "det_scan.csv", ["theta1", "theta2", "det_A2k"], rows, config)
        if args.svg:
            _svg_heatmap(out / "det_scan.svg", np.abs(dets), "|det A_2k| over (theta1, theta2)")
        diag = max(abs(dets[i, i]) for i in range(n))
        print(f"det-scan k={k}: max |det| on the diagonal {diag:.3e}")
        return EXIT_OK
    print("unknown moments subcommand", file=sys.stderr)
    return EXIT_CONFIG


def cmd_analyze(args, config) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.analyze_cmd == "alternative":
        try:
            text = Path(config["input"]).read_text(encoding="utf-8")
            f = DiskDensity.from_json(text)
        except (OSError, ValueError, KeyError) as exc:
            print(f"cannot read density: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        report = detect_alternative(
            f,
            k=config["k"],
            delta=config["delta"],
            tau_k=config["tau_k"],
            sigma0=config["sigma0"],
            c1=config["c1"],
            n_parts=config["n_parts"],
        )
        ok = verify_alternative_report(f, report)
        write_json(out / "alternative.json", {"report": report.to_json_dict(), "reverified": ok}, config)
        print(f"alternative: {report.verdict} (re-verified: {ok})")
        return EXIT_OK if ok else EXIT_VERIFY
    if args.analyze_cmd == "testfn":
        k = config["k"]
        rng = np.random.default_rng(config["seed"])
        sig = random_barycenter(k, rng) if k > 1 else Barycenter([0.9], [1.0])
        cfg = SingularConfig(alphas=(config["alpha"],), rho=config["rho"])
        rows = []
        for lam in config["lambdas"]:
            rep = testfn_disk_report(lam, sig, cfg, want_kr=True)
            rows.append([lam, rep.functional, rep.kr_to_sigma])
        write_csv(out / "testfn.csv", ["lambda", "I_rho", "d_KR"], rows, config)
        write_json(
            out / "testfn.json",
            {"rows": rows, "sigma": json.loads(sig.to_json()), "nearest_lambda": nearest_critical((config["alpha"],), config["rho"])[0]},
            config,
        )
        trend = "decreasing" if rows[-1][1] < rows[0][1] else "increasing"
        print(f"testfn k={k} rho={config['rho']:.4f}: I is {trend}; final d_KR={rows[-1][2]:.4f}")
        return EXIT_OK
    if args.analyze_cmd == "sphere-nec":
        try:
            verdict = necessary_condition_sphere(config["rho"], config["a1"], config["a2"])
        except ValueError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        write_json(
            out / "sphere_nec.json",
            {"rho": config["rho"], "alpha1": config["a1"], "alpha2": config["a2"], "satisfied": verdict},
            config,
        )
        print(f"necessary condition: {'PASS' if verdict else 'FAIL'}")
        return EXIT_OK
    print("unknown analyze subcommand", file=sys.stderr)
    return EXIT_CONFIG


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------


def _resolved(args, file_cfg: dict, spec: dict, optional: set[str] = frozenset()) -> dict:
    """Merge defaults, config file, and CLI flags (flags win)."""
    out = {}
    for key, (default, conv) in spec.items():
        val = file_cfg.get(key, default)
        flag = getattr(args, key, None)
        if flag is not None:
            val = flag
        if val is None:
            if key in optional:
                out[key] = None
                continue
            raise ValueError(f"missing required option --{key.replace('_', '-')}")
        out[key] = conv(val)
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="liouville", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its entries")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--svg", action="store_true", help="emit SVG diagrams")
    sub = ap.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("solve", help="radial continuation with blow-up detection", parents=[common])
    s.add_argument("--alpha", type=parse_pi)
    s.add_argument("--rho-start", dest="rho_start", type=parse_pi)
    s.add_argument("--rho-end", dest="rho_end", type=parse_pi)
    s.add_argument("--steps", type=int)
    s.add_argument("--grid-m", dest="grid_m", type=int)

    m = sub.add_parser("moments", help="barycenter moment-map checks")
    msub = m.add_subparsers(dest="moments_cmd", required=True)
    for name in ("roundtrip", "degree", "project", "det-scan"):
        p = msub.add_parser(name, parents=[common])
        p.add_argument("--k", type=int)
        p.add_argument("--seed", type=int)
        if name == "roundtrip":
            p.add_argument("--trials", type=int)
        if name == "degree":
            p.add_argument("--starts", type=int)
        if name == "project":
            p.add_argument("--input")
            p.add_argument("--eps-proj", dest="eps_proj", type=float)
        if name == "det-scan":
            p.add_argument("--scan-n", dest="scan_n", type=int)

    a = sub.add_parser("analyze", help="concentration and threshold analyses")
    asub = a.add_subparsers(dest="analyze_cmd", required=True)
    p = asub.add_parser("alternative", parents=[common])
    p.add_argument("--input")
    p.add_argument("--k", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--tau-k", dest="tau_k", type=float)
    p.add_argument("--sigma0", type=float)
    p.add_argument("--c1", type=float)
    p.add_argument("--n-parts", dest="n_parts", type=int)
    p = asub.add_parser("testfn", parents=[common])
    p.add_argument("--k", type=int)
    p.add_argument("--rho", type=parse_pi)
    p.add_argument("--alpha", type=parse_pi)
    p.add_argument("--lambdas")
    p.add_argument("--seed", type=int)
    p = asub.add_parser("sphere-nec", parents=[common])
    p.add_argument("--rho", type=parse_pi)
    p.add_argument("--a1", type=parse_pi)
    p.add_argument("--a2", type=parse_pi)

    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0

    file_cfg = {}
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG

    try:
        if args.cmd == "solve":
            config = _resolved(
                args,
                file_cfg,
                {
                    "alpha": (None, float),
                    "rho_start": (None, float),
                    "rho_end": (None, float),
                    "steps": (120, int),
                    "grid_m": (4097, int),
                },
            )
            return cmd_solve(args, config)
        if args.cmd == "moments":
            spec = {"k": (None, int), "seed": (0, int)}
            if args.moments_cmd == "roundtrip":
                spec["trials"] = (100, int)
            if args.moments_cmd == "degree":
                spec["starts"] = (500, int)
            if args.moments_cmd == "project":
                spec["input"] = (None, str)
                spec["eps_proj"] = (0.05, float)
            if args.moments_cmd == "det-scan":
                spec["scan_n"] = (48, int)
            config = _resolved(args, file_cfg, spec)
            return cmd_moments(args, config)
        if args.cmd == "analyze":
            if args.analyze_cmd == "alternative":
                config = _resolved(
                    args,
                    file_cfg,
                    {
                        "input": (None, str),
                        "k": (None, int),
                        "delta": (0.05, float),
                        "tau_k": (0.05, float),
                        "sigma0": (None, float),
                        "c1": (10.0, float),
                        "n_parts": (None, int),
                    },
                    optional={"sigma0", "n_parts"},
                )
                return cmd_analyze(args, config)
            if args.analyze_cmd == "testfn":
                config = _resolved(
                    args,
                    file_cfg,
                    {
                        "k": (1, int),
                        "rho": (None, float),
                        "alpha": (2.5, float),
                        "lambdas": ("100,1000,10000", lambda s: [parse_pi(x) for x in str(s).split(",")]),
                        "seed": (0, int),
                    },
                )
                return cmd_analyze(args, config)
            if args.analyze_cmd == "sphere-nec":
                config = _resolved(
                    args, file_cfg, {"rho": (None, float), "a1": (None, float), "a2": (None, float)}
                )
                return cmd_analyze(args, config)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"computational failure: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    print("unknown command", file=sys.stderr)
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
