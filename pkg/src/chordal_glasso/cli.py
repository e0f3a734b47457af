"""Command-line front end: gen, solve, check and bench."""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import statistics
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, mmio
from .datagen import GenConfig, banded_pattern, generate, make_rng, random_chordal_pattern, random_graph
from .errors import ChordalGlassoError, NotChordal, NotCompletable, TooLarge
from .glasso import check_equivalence, solve
from .reference import dense_glasso

log = logging.getLogger("chordal_glasso")

SCHEMA_PREFIX = "chordal-glasso"
SCHEMA_VERSION = 1
EXIT_OK, EXIT_ERROR, EXIT_NOT_CHORDAL, EXIT_NOT_COMPLETABLE = 0, 1, 2, 3
THREADS_ENV = "CHORDAL_GLASSO_THREADS"


def schema_id(kind: str) -> str:
    return f"{SCHEMA_PREFIX}/{kind}/v{SCHEMA_VERSION}"


def _clean(obj):
    """JSON-ready copy: numpy scalars unwrapped, non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(obj) -> str:
    # json uses repr() for floats, which is the shortest round-trip form
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def _write_json(path, obj) -> None:
    text = dumps(obj)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="ascii")


def sidecar_path(out) -> Path:
    p = Path(out)
    return p.with_suffix(".json") if p.suffix and p.suffix != ".json" else Path(str(p) + ".json")


# --------------------------------------------------------------------------
# gen


def _gen_config(args) -> GenConfig:
    return GenConfig(
        seed=args.seed,
        edge_low=args.edge_low,
        edge_high=args.edge_high,
        noise_bound=args.noise,
        normalize=not args.no_normalize,
        margin=args.margin,
    )


def cmd_gen(args) -> int:
    cfg = _gen_config(args)
    pattern = mmio.read_pattern(args.pattern)
    g = generate(pattern, cfg)
    mmio.write_matrix(args.output, g.to_sparse())
    side = {
        "schema": schema_id("gen"),
        "pattern": str(args.pattern),
        "d": pattern.d,
        "seed": cfg.seed,
        "attempt": g.attempt,
        "edge_low": cfg.edge_low,
        "edge_high": cfg.edge_high,
        "noise_bound": cfg.noise_bound,
        "margin": cfg.margin,
        "normalize": cfg.normalize,
        "n_edges": g.pattern.n_edges,
        "n_fill": len(g.fill_edges),
        "edge_min": g.edge_min,
        "noise_max": g.noise_max,
        "lambda_recommended": g.lambda_recommended,
    }
    _write_json(sidecar_path(args.output), side)
    return EXIT_OK


# --------------------------------------------------------------------------
# solve / check


def _oracle_row(sigma, lam, objective):
    try:
        o = dense_glasso(sigma, lam)
    except TooLarge as exc:
        return {"error": str(exc)}
    return {
        "objective": o.objective,
        "gap": abs(objective - o.objective) / abs(o.objective),
        "converged": o.converged,
        "iterations": o.iterations,
    }


def solve_report(sol, source=None, oracle=None) -> dict:
    cert = sol.certificate
    return {
        "schema": schema_id("solve"),
        "input": None if source is None else str(source),
        "d": sol.d,
        "lambda": sol.lam,
        "k": sol.spectrum.k,
        "status": sol.status,
        "objective": sol.objective,
        "n_components": len(sol.components),
        "w": sol.w,
        "nnz_offdiag": sol.s_opt.pattern.n_edges,
        "certificate": None if cert is None else cert.to_dict(),
        "kkt": None if sol.kkt is None else dict(sol.kkt.to_dict(), passed=sol.kkt.passed, tol=sol.kkt.tol),
        "timings_ms": sol.timings,
        "oracle": oracle,
    }


def _chordal_error(exc: NotChordal) -> int:
    msg = str(exc)
    if exc.witness:
        msg += "; induced cycle: " + " ".join(str(v + 1) for v in exc.witness)
    print(f"error: {msg} (rerun with --force-embedding for an approximate solution)", file=sys.stderr)
    return EXIT_NOT_CHORDAL


def cmd_solve(args) -> int:
    sigma = mmio.read_matrix(args.input)
    try:
        sol = solve(sigma, args.lam, force_embedding=args.force_embedding, dense_limit=args.dense_limit)
    except NotChordal as exc:
        return _chordal_error(exc)
    except NotCompletable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_COMPLETABLE
    if args.output:
        mmio.write_matrix(args.output, sol.s_opt)
    oracle = _oracle_row(sigma, args.lam, sol.objective) if args.oracle else None
    _write_json(args.report, solve_report(sol, args.input, oracle))
    return EXIT_OK


def cmd_check(args) -> int:
    sigma = mmio.read_matrix(args.input)
    cert = check_equivalence(sigma, args.lam, dense_limit=args.dense_limit)
    out = {
        "schema": schema_id("check"),
        "input": str(args.input),
        "lambda": args.lam,
        "k": cert.k,
        "sigma1": cert.sigma1,
        "sigma_next": cert.sigma_next,
        "alpha": cert.alpha,
        "n_components": cert.n_components,
        "certificate": cert.to_dict(),
        "diagnostics": cert.finite_diagnostics(),
    }
    _write_json(args.report, out)
    return EXIT_OK


def cmd_oracle(args) -> int:
    sigma = mmio.read_matrix(args.input)
    o = dense_glasso(sigma, args.lam)
    if args.output:
        mmio.write_matrix(args.output, mmio.SymSparseMatrix.from_dense(o.solution))
    _write_json(args.report, {
        "objective": o.objective,
        "iterations": o.iterations,
        "converged": o.converged,
        "final_step_norm": o.final_step_norm,
    })
    return EXIT_OK


# --------------------------------------------------------------------------
# bench


def _case_pattern(case: dict, base: Path):
    if "pattern" in case:
        return mmio.read_pattern(base / case["pattern"])
    gen = case["generator"]
    kind = gen["kind"]
    rng = make_rng(int(case.get("seed", 0)), 1)
    if kind == "banded":
        return banded_pattern(int(gen["d"]), int(gen["w"]))
    if kind == "random_chordal":
        return random_chordal_pattern(int(gen["d"]), int(gen["w"]), rng)
    if kind == "random":
        return random_graph(int(gen["d"]), float(gen["p"]), rng)
    raise ValueError(f"unknown generator kind {kind!r}")


def run_case(case: dict, base: Path, oracle_limit: int) -> dict:
    """Generate, solve and (when small enough) compare against the dense oracle.

    Only the solve itself (block solves plus assembly) is reported as
    ``solve_time_ms``; the certificate is timed separately.
    """
    row = {"name": case["name"], "d": None, "max_clique": None, "solve_time_ms": None,
           "certify_time_ms": None, "certificate_status": None, "opt_gap": None, "error": None}
    try:
        pattern = _case_pattern(case, base)
        cfg = GenConfig(
            seed=int(case.get("seed", 0)),
            edge_low=float(case.get("edge_low", 0.50)),
            edge_high=float(case.get("edge_high", 0.55)),
            noise_bound=float(case.get("noise", 0.20)),
        )
        g = generate(pattern, cfg)
        lam = float(case.get("lambda", g.lambda_recommended))
        row["d"] = pattern.d
        repeat = max(1, int(case.get("repeat", 1)))
        times = []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for _ in range(repeat):
                sol = solve(g.sigma, lam, certify=False, dense_limit=0)
                times.append(sol.timings["solve_ms"])
            t0 = time.perf_counter()
            cert = check_equivalence(g.sigma, lam)
            row["certify_time_ms"] = (time.perf_counter() - t0) * 1e3
        row["solve_time_ms"] = statistics.median(times)
        row["max_clique"] = sol.w + 1
        row["certificate_status"] = cert.cond_1iii.value
        row["lambda"] = lam
        row["objective"] = sol.objective
        if pattern.d <= oracle_limit:
            o = dense_glasso(g.sigma, lam)
            row["opt_gap"] = abs(sol.objective - o.objective) / abs(o.objective)
    except Exception as exc:  # recorded per case; the run continues
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_bench(cases: list, base: Path, oracle_limit: int, workers: int = 1) -> list:
    if workers > 1 and len(cases) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(cases))) as ex:
            rows = list(ex.map(run_case, cases, [base] * len(cases), [oracle_limit] * len(cases)))
    else:
        rows = [run_case(c, base, oracle_limit) for c in cases]
    return sorted(rows, key=lambda r: r["name"])


def _cell(v, fmt="{:.3g}"):
    if v is None:
        return ""
    if isinstance(v, float):
        return fmt.format(v)
    return str(v)


def format_table(rows: list) -> str:
    cols = [("name", "name"), ("d", "d"), ("max_clique", "clique"), ("solve_time_ms", "solve_ms"),
            ("certify_time_ms", "cert_ms"), ("certificate_status", "certificate"), ("opt_gap", "opt_gap"),
            ("error", "error")]
    cells = [[h for _, h in cols]] + [[_cell(r.get(k)) for k, _ in cols] for r in rows]
    widths = [max(len(c[i]) for c in cells) for i in range(len(cols))]
    lines = ["  ".join(c[i].ljust(widths[i]) for i in range(len(cols))).rstrip() for c in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def cmd_bench(args) -> int:
    path = Path(args.cases)
    doc = json.loads(path.read_text())
    cases = doc["cases"] if isinstance(doc, dict) else doc
    names = [c["name"] for c in cases]
    if len(set(names)) != len(names):
        raise ValueError("case names must be unique")
    rows = run_bench(cases, path.parent, args.oracle_limit, _threads())
    report = {"schema": schema_id("bench"), "oracle_limit": args.oracle_limit, "cases": rows}
    if args.report:
        _write_json(args.report, report)
    if args.format == "json":
        _write_json(None, report)
    else:
        sys.stdout.write(format_table(rows))
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chordal-glasso", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, metavar="{gen,solve,check,bench}")

    g = sub.add_parser("gen", help="generate a synthetic correlation matrix from a pattern")
    g.add_argument("--pattern", required=True, help="Matrix Market pattern file")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--edge-low", type=float, default=0.50)
    g.add_argument("--edge-high", type=float, default=0.55)
    g.add_argument("--noise", type=float, default=0.20)
    g.add_argument("--margin", type=float, default=0.01, help="diagonal dominance margin")
    g.add_argument("--no-normalize", action="store_true", help="skip rescaling to unit diagonal")
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve the graphical lasso for a correlation matrix")
    s.add_argument("--input", required=True)
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--force-embedding", action="store_true",
                   help="solve non-chordal components on a chordal embedding (approximate)")
    s.add_argument("--oracle", action="store_true", help="also run the dense reference solver")
    s.add_argument("--dense-limit", type=int, default=2000)
    s.add_argument("-o", "--output", help="write S as Matrix Market")
    s.add_argument("--report", help="JSON report path (default: stdout)")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("check", help="certify that thresholding recovers the GL support")
    c.add_argument("--input", required=True)
    c.add_argument("--lambda", dest="lam", type=float, required=True)
    c.add_argument("--dense-limit", type=int, default=2000)
    c.add_argument("--report", help="JSON output path (default: stdout)")
    c.set_defaults(func=cmd_check)

    b = sub.add_parser("bench", help="generate, solve and time a list of cases")
    b.add_argument("--cases", required=True, help="JSON case list")
    b.add_argument("--oracle-limit", type=int, default=50, help="largest d compared against the dense oracle")
    b.add_argument("--format", choices=["table", "json"], default="table")
    b.add_argument("--report", help="also write the JSON report here")
    b.set_defaults(func=cmd_bench)

    o = sub.add_parser("oracle")  # undocumented: dense reference solve
    o.add_argument("--input", required=True)
    o.add_argument("--lambda", dest="lam", type=float, required=True)
    o.add_argument("-o", "--output")
    o.add_argument("--report")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except NotChordal as exc:
        return _chordal_error(exc)
    except NotCompletable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_COMPLETABLE
    except (ChordalGlassoError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
