"""Command-line driver.

    python3 -m asdvar conjugate --fn f.json --at 1,2
    python3 -m asdvar asd-check --lagrangian L.json --samples 100
    python3 -m asdvar solve-stationary --config problem.json --out report.json
    python3 -m asdvar solve-flow --config flow.json --out report.json --csv path.csv
    python3 -m asdvar demo matinv --n 10 --seed 7 --out outdir/

Exit codes: 0 certified, 2 converged but uncertified, 3 not converged or
I/O failure, 1 malformed config.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional

import numpy as np

from .convex_core import check_keys, conjugate_eval, make_catalog_fn, make_set
from .evolution import Path, TimeGrid, solve_coupled_flow, solve_semiconvex_flow
from .lagrangian import asd_residual, make_lagrangian
from .linops import make_linop
from .policy import DEFAULT_POLICY, NumericPolicy
from .stationary import (SolveReport, minimize_asd, solve_anti_hamiltonian, solve_fenchel_rockafellar,
                         solve_inclusion, solve_linear_nonsym, solve_variational_inequality)

EXIT_OK, EXIT_CONFIG, EXIT_UNCERTIFIED, EXIT_FAILED = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _num(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = "%.17g" % x
    # keep floats recognizable as floats after a round trip
    if all(c not in s for c in ".eE"):
        s += ".0"
    return s


def dumps(obj, indent: int = 0) -> str:
    """JSON with sorted keys and 17 significant digits for every float."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(obj[k], indent + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(float(obj))
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def path_csv(path: Path) -> str:
    d = path.dim
    lines = [",".join(["t"] + [f"x{k}" for k in range(d)])]
    for t, row in zip(path.t, path.values):
        lines.append(",".join(_num(float(v)) for v in [t, *row]))
    return "\n".join(lines) + "\n"


def emit(report: dict, path: Optional[str], csv: Optional[Path] = None, csv_path: Optional[str] = None):
    """Write the report as JSON (stdout when path is None) and the path as CSV."""
    text = dumps(report) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)
    if csv is not None and csv_path is not None:
        with open(csv_path, "w") as fh:
            fh.write(path_csv(csv))


def load_json(path: str) -> dict:
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: {e}") from e


def config_hash(cfg) -> str:
    return hashlib.sha256(dumps(cfg).encode()).hexdigest()[:16]


def _vector(s: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in s.split(",")])
    except ValueError as e:
        raise ConfigError(f"bad vector {s!r}") from e


# ---------------------------------------------------------------------------
# report helpers
# ---------------------------------------------------------------------------


def report_dict(rep: SolveReport, cfg=None) -> dict:
    d = rep.as_dict()
    d["certificate"] = {"gap": rep.gap, "fy_residual": rep.fy_residual,
                        "checks": dict(rep.check_results), "certified": rep.certified}
    if cfg is not None:
        d["config_hash"] = config_hash(cfg)
    return d


def exit_code(reps: List[SolveReport]) -> int:
    if any(not r.converged for r in reps):
        return EXIT_FAILED
    if any(not r.certified for r in reps):
        return EXIT_UNCERTIFIED
    return EXIT_OK


def _certificate_line(name: str, rep: SolveReport):
    checks = " ".join(f"{k}={v:.3e}" for k, v in sorted(rep.check_results.items()))
    print(f"{name}: gap={rep.gap:.3e} fy_residual={rep.fy_residual:.3e} "
          f"certified={rep.certified} {checks}".rstrip())


def _policy(cfg: dict) -> NumericPolicy:
    over = cfg.get("policy", {})
    allowed = set(NumericPolicy.__dataclass_fields__)
    extra = set(over) - allowed
    if extra:
        raise ConfigError(f"unknown policy keys {sorted(extra)}")
    return DEFAULT_POLICY.with_(**over)


def _keys(cfg: dict, table: dict, what: str):
    try:
        check_keys(cfg, {k: v | {"policy"} for k, v in table.items()}, what)
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _mat(v):
    return make_linop(v).A


# ---------------------------------------------------------------------------
# stationary configs
# ---------------------------------------------------------------------------


_STATIONARY = {
    "asd": {"lagrangian", "Lambda"},
    "linear": {"A", "y"},
    "inclusion": {"A", "phi", "f"},
    "vi": {"a_form", "set", "f"},
    "fenchel_rockafellar": {"phi", "psi", "A"},
    "anti_hamiltonian": {"phi", "A", "B1", "B2"},
}


def _stationary_builder(cfg: dict) -> Callable[[], SolveReport]:
    _keys(cfg, _STATIONARY, "problem")
    pol = _policy(cfg)
    k = cfg["kind"]
    try:
        if k == "asd":
            L = make_lagrangian(cfg["lagrangian"])
            Lam = _mat(cfg["Lambda"]) if "Lambda" in cfg else None
            return lambda: minimize_asd(L, Lam, policy=pol)
        if k == "linear":
            A, y = make_linop(cfg["A"]), np.asarray(cfg["y"], float)
            return lambda: solve_linear_nonsym(A, y, pol)
        if k == "inclusion":
            A, phi, f = make_linop(cfg["A"]), make_catalog_fn(cfg["phi"]), np.asarray(cfg["f"], float)
            return lambda: solve_inclusion(A, phi, f, pol)
        if k == "vi":
            a, K = make_linop(cfg["a_form"]), make_set(cfg["set"])
            f = np.asarray(cfg["f"], float)
            return lambda: solve_variational_inequality(a, K, f, pol)
        if k == "fenchel_rockafellar":
            phi, psi, A = make_catalog_fn(cfg["phi"]), make_catalog_fn(cfg["psi"]), make_linop(cfg["A"])
            return lambda: solve_fenchel_rockafellar(phi, psi, A, pol)
        phi = make_catalog_fn(cfg["phi"])
        A, B1, B2 = make_linop(cfg["A"]), make_linop(cfg["B1"]), make_linop(cfg["B2"])
        return lambda: solve_anti_hamiltonian(phi, A, B1, B2, pol)
    except KeyError as e:
        raise ConfigError(f"missing key {e}") from e
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e


# ---------------------------------------------------------------------------
# flow configs
# ---------------------------------------------------------------------------


_FLOW = {
    "semiconvex_flow": {"phi", "A", "f", "u0", "T", "N", "omega", "metric"},
    "coupled_flow": {"phi", "A", "B1", "B2", "f", "g", "x0", "y0", "T", "N"},
}


def _flow_builder(cfg: dict):
    _keys(cfg, _FLOW, "flow")
    pol = _policy(cfg)
    try:
        grid = TimeGrid(float(cfg["T"]), int(cfg["N"]))
        if cfg["kind"] == "semiconvex_flow":
            phi = make_catalog_fn(cfg["phi"]) if cfg.get("phi") is not None else None
            A = _mat(cfg["A"]) if "A" in cfg else None
            f = np.asarray(cfg["f"], float) if "f" in cfg else None
            G = np.asarray(cfg["metric"], float) if "metric" in cfg else None
            u0 = np.asarray(cfg["u0"], float)
            w = float(cfg.get("omega", 0.0))
            return lambda: solve_semiconvex_flow(phi, A, w, u0, grid, f, G, pol)
        phi = make_catalog_fn(cfg["phi"])
        A, B1, B2 = _mat(cfg["A"]), _mat(cfg["B1"]), _mat(cfg["B2"])
        f, g = np.asarray(cfg["f"], float), np.asarray(cfg["g"], float)
        x0, y0 = np.asarray(cfg["x0"], float), np.asarray(cfg["y0"], float)
        return lambda: solve_coupled_flow(phi, A, B1, B2, f, g, x0, y0, grid, pol)
    except KeyError as e:
        raise ConfigError(f"missing key {e}") from e
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e


# ---------------------------------------------------------------------------
# demos
# ---------------------------------------------------------------------------


def _rngs(seed: int, k: int) -> List[np.random.Generator]:
    # counter-based streams, one per independent task
    return [np.random.Generator(np.random.Philox(s)) for s in np.random.SeedSequence(seed).spawn(k)]


def num_threads() -> int:
    try:
        return max(1, int(os.environ.get("ASDVAR_NUM_THREADS", "1")))
    except ValueError:
        return 1


def random_coercive_matrix(rng: np.random.Generator, n: int) -> np.ndarray:
    """Matrix whose symmetric part dominates the identity."""
    B = rng.standard_normal((n, n))
    C = rng.standard_normal((n, n))
    return np.eye(n) + B @ B.T / n + (C - C.T)


def _demo_matinv(args):
    count = args.count
    gens = _rngs(args.seed, count)

    def one(rng):
        A = random_coercive_matrix(rng, args.n)
        y = rng.standard_normal(args.n)
        rep = solve_linear_nonsym(A, y)
        rep.check_results["direct_error"] = float(np.linalg.norm(rep.minimizer - np.linalg.solve(A, y)))
        return rep

    with ThreadPoolExecutor(max_workers=num_threads()) as ex:
        reps = list(ex.map(one, gens))
    worst = max(reps, key=lambda r: r.gap)
    summary = SolveReport(worst.minimizer, max(r.gap for r in reps), max(r.fy_residual for r in reps),
                          sum(r.iterations for r in reps), all(r.converged for r in reps),
                          all(r.certified for r in reps), min(r.tol_gap for r in reps), False, "newton",
                          {"direct_error": max(r.check_results["direct_error"] for r in reps)},
                          {"instances": count, "n": args.n})
    return {"matinv": (summary, None)}


def _demo_transport(args):
    from .pde_demos import Grid1D, demo_transport_stationary
    g = Grid1D(args.n)
    rep = demo_transport_stationary(g)
    rep.check_results["nodal_error"] = float(np.max(np.abs(rep.minimizer - np.exp(-g.x))))
    return {"transport": (rep, None)}


def _demo_implicit(args):
    from .pde_demos import Grid1D, demo_implicit_transport
    return {"implicit-transport": (demo_implicit_transport(Grid1D(args.n)), None)}


def _demo_heat(args):
    from .pde_demos import Grid1D, demo_heat_flow
    g = Grid1D(args.n)
    u0 = np.sin(np.pi * g.x)
    path, rep = demo_heat_flow(g, 1.0, 0.0, u0, TimeGrid(0.1, args.steps))
    return {"heat": (rep, path)}


def _demo_porous(args):
    from .pde_demos import Grid1D, demo_porous_media
    g = Grid1D(args.n)
    u0 = np.sin(np.pi * g.x)
    path, rep = demo_porous_media(g, 1.0, 0.0, u0, TimeGrid(0.1, args.steps))
    return {"porous": (rep, path)}


def _demo_obstacle(args):
    from .convex_core import Box
    from .pde_demos import demo_obstacle_flow
    path, rep = demo_obstacle_flow(np.eye(1), Box(1.0, 2.0), None, [2.0], TimeGrid(2.0, args.steps))
    return {"obstacle": (rep, path)}


def _demo_rotation(args):
    from .convex_core import Quadratic
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    path, rep = solve_semiconvex_flow(Quadratic(np.eye(2)), A, 0.0, [1.0, 0.0], TimeGrid(1.0, args.steps))
    return {"rotation": (rep, path)}


def _demo_random_flow(args):
    # a random coercive linear flow from a seeded start
    from .convex_core import Quadratic
    rng = _rngs(args.seed, 1)[0]
    d = 3
    A = random_coercive_matrix(rng, d) - np.eye(d)
    u0 = rng.standard_normal(d)
    path, rep = solve_semiconvex_flow(Quadratic(np.eye(d)), A, 0.0, u0, TimeGrid(1.0, args.steps))
    return {"random-flow": (rep, path)}


DEMOS: Dict[str, Callable] = {
    "matinv": _demo_matinv,
    "transport": _demo_transport,
    "implicit-transport": _demo_implicit,
    "heat": _demo_heat,
    "porous": _demo_porous,
    "obstacle": _demo_obstacle,
    "rotation": _demo_rotation,
    "random-flow": _demo_random_flow,
}


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_conjugate(args) -> int:
    cfg = load_json(args.fn)
    try:
        fn = make_catalog_fn(cfg)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e
    p = _vector(args.at)
    if p.size != fn.dim:
        raise ConfigError(f"point has {p.size} entries, function dimension is {fn.dim}")
    r = conjugate_eval(fn, p, mode=args.mode)
    out = {"value": r.value, "kind": r.kind, "converged": r.converged, "residual": r.residual,
           "point": p, "config_hash": config_hash(cfg)}
    emit(out, args.out)
    return EXIT_OK if r.converged else EXIT_FAILED


def _cmd_asd_check(args) -> int:
    cfg = load_json(args.lagrangian)
    try:
        L = make_lagrangian(cfg)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e
    r = asd_residual(L, samples=args.samples, seed=args.seed, radius=args.radius)
    out = {"residual": r.value, "skipped": r.skipped, "samples": r.samples, "tol": args.tol,
           "passed": bool(r.value <= args.tol), "config_hash": config_hash(cfg)}
    emit(out, args.out)
    print(f"asd_residual={r.value:.3e} skipped={r.skipped}", file=sys.stderr)
    return EXIT_OK if r.value <= args.tol else EXIT_UNCERTIFIED


def _cmd_stationary(args) -> int:
    cfg = load_json(args.config)
    job = _stationary_builder(cfg)
    rep = job()
    _certificate_line(cfg["kind"], rep)
    emit(report_dict(rep, cfg), args.out)
    return exit_code([rep])


def _cmd_flow(args) -> int:
    cfg = load_json(args.config)
    job = _flow_builder(cfg)
    path, rep = job()
    _certificate_line(cfg["kind"], rep)
    emit(report_dict(rep, cfg), args.out, path, args.csv)
    return exit_code([rep])


def _cmd_demo(args) -> int:
    names = list(DEMOS) if args.name == "all" else [args.name]
    if args.name != "all" and args.name not in DEMOS:
        raise ConfigError(f"unknown demo {args.name!r}; choose from {sorted(DEMOS)} or 'all'")
    results = {}
    for name in names:
        results.update(DEMOS[name](args))
    if args.out is not None:
        os.makedirs(args.out, exist_ok=True)
    reps = []
    for name, (rep, path) in results.items():
        reps.append(rep)
        _certificate_line(name, rep)
        cfg = {"demo": name, "n": args.n, "steps": args.steps, "seed": args.seed, "count": args.count}
        d = report_dict(rep, cfg)
        if args.out is None:
            emit(d, None)
        else:
            emit(d, os.path.join(args.out, f"{name}.json"), path, os.path.join(args.out, f"{name}.csv"))
    return exit_code(reps)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="asdvar", description="Self-dual variational solvers")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("conjugate", help="evaluate a Legendre conjugate")
    c.add_argument("--fn", required=True)
    c.add_argument("--at", required=True, help="comma-separated point")
    c.add_argument("--mode", default="auto", choices=["auto", "exact", "numeric"])
    c.add_argument("--out")

    a = sub.add_parser("asd-check", help="sample the anti-self-duality residual")
    a.add_argument("--lagrangian", required=True)
    a.add_argument("--samples", type=int, default=100)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--radius", type=float, default=1.0)
    a.add_argument("--tol", type=float, default=1e-6)
    a.add_argument("--out")

    s = sub.add_parser("solve-stationary", help="zero-gap stationary solve")
    s.add_argument("--config", required=True)
    s.add_argument("--out")

    f = sub.add_parser("solve-flow", help="path-space flow solve")
    f.add_argument("--config", required=True)
    f.add_argument("--out")
    f.add_argument("--csv")

    d = sub.add_parser("demo", help="run a named demo (or 'all')")
    d.add_argument("name")
    d.add_argument("--n", type=int, default=17)
    d.add_argument("--steps", type=int, default=50)
    d.add_argument("--count", type=int, default=20)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out")
    return ap


_COMMANDS = {"conjugate": _cmd_conjugate, "asd-check": _cmd_asd_check,
             "solve-stationary": _cmd_stationary, "solve-flow": _cmd_flow, "demo": _cmd_demo}


def run(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    t0 = time.perf_counter()
    try:
        code = _COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_FAILED
    except (ValueError, np.linalg.LinAlgError) as e:
        print(f"solve failed: {e}", file=sys.stderr)
        return EXIT_FAILED
    print(f"wall time {time.perf_counter() - t0:.3f}s", file=sys.stderr)
    return code


def main():
    sys.exit(run(sys.argv[1:]))
