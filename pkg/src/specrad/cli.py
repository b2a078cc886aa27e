"""Command-line front end.

Every subcommand prints one JSON document on standard output (``rank`` can
print CSV instead).  Exit codes: 0 on success, 1 when the computation or
the input data fail (a JSON error object is printed), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import time
import warnings

import numpy as np

from . import __version__
from .eigen import PerronPair, ReducibleMatrixWarning, SolverOptions, perron_pair
from .graph import load_edge_list, strongly_connected_components
from .impact import plan_json, recommend_interventions, write_plan_csv
from .perturbation import KINDS, PerturbationSpec, build_perturbation, log10_heatmap, perturbed_perron, write_heatmap_csv
from .sis import SisParams, epidemic_threshold, simulate_sis, threshold_sweep, write_trajectory_csv
from .toeplitz import (
    MaskChain,
    TridiagToeplitz,
    build_mask_chain,
    make_circulant,
    project_to_toeplitz_cone,
    symmetrized_toeplitz_perron,
    toeplitz_perron,
)


class _Formatter:
    """Rounds floats for output: six decimals, or six significant digits for
    magnitudes below 1e-3 so small residuals stay visible."""

    def __init__(self, precision: str):
        self.full = precision == "full"

    def number(self, x: float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if self.full or x == 0:
            return x
        if abs(x) < 1e-3:
            return float(f"{x:.6g}")
        return round(x, 6)

    def text(self, x: float) -> str:
        y = self.number(x)
        return y if isinstance(y, str) else repr(y)

    def tree(self, obj):
        if isinstance(obj, dict):
            return {k: self.tree(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [self.tree(v) for v in obj]
        if isinstance(obj, np.ndarray):
            return [self.tree(v) for v in obj.tolist()]
        if isinstance(obj, (bool, np.bool_)):
            return bool(obj)
        if isinstance(obj, (int, np.integer)):
            return int(obj)
        if isinstance(obj, (float, np.floating)):
            return self.number(float(obj))
        return obj


class _Timer:
    def __init__(self):
        self.marks: dict[str, float] = {}

    def __call__(self, name: str):
        timer = self

        class _Span:
            def __enter__(self):
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                timer.marks[name] = timer.marks.get(name, 0.0) + time.perf_counter() - self.t

        return _Span()


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("SPECRAD_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise SystemExit(f"SPECRAD_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def _opts(args) -> SolverOptions:
    return SolverOptions(tol=args.tol, max_iterations=args.max_iterations)


def _load(args, timer):
    if not os.path.exists(args.file):
        raise FileNotFoundError(f"file not found: {args.file}")
    with timer("load"):
        A, loops = load_edge_list(args.file, format=args.format, index_base=args.index_base)
    scc = strongly_connected_components(A)
    descriptor = {
        "path": args.file,
        "format": args.format,
        "n": A.n,
        "m": A.m,
        "self_loops_dropped": loops,
        "irreducible": scc.is_irreducible,
        "strong_components": scc.component_count,
    }
    return A, descriptor


def _perron_summary(pair: PerronPair, vectors: bool = False) -> dict:
    return pair.to_dict(vectors=vectors)


def _solve(A, args, timer) -> PerronPair:
    with timer("perron"), warnings.catch_warnings():
        warnings.simplefilter("ignore", ReducibleMatrixWarning)
        return perron_pair(A, _opts(args))


def _report(args, body: dict, timer) -> dict:
    out = {"tool": "specrad", "version": __version__, "command": args.command}
    out.update(body)
    if args.timings:
        out["timings_seconds"] = dict(timer.marks)
    return out


# -- subcommands ------------------------------------------------------------------


def cmd_analyze(args, timer, fmt):
    A, desc = _load(args, timer)
    pair = _solve(A, args, timer)
    return _report(
        args,
        {
            "input": desc,
            "perron": _perron_summary(pair, args.vectors),
            "epidemic_threshold": epidemic_threshold(pair),
        },
        timer,
    )


def cmd_rank(args, timer, fmt):
    A, desc = _load(args, timer)
    if args.mode == "downweight" and args.epsilon is None:
        raise ValueError("--epsilon is required in downweight mode")
    pair = _solve(A, args, timer)
    with timer("rank"):
        plan = recommend_interventions(
            A,
            pair,
            top_k=args.top_k,
            mode=args.mode,
            epsilon=1.0 if args.epsilon is None else args.epsilon,
            require_irreducible=not args.no_irreducibility_check,
            exact_rescore=args.exact,
            symmetric_mode=args.symmetric,
            opts=_opts(args),
            threads=_threads(args),
            allow_reducible=args.allow_reducible,
        )
    if args.output_format == "csv":
        buf = io.StringIO()
        write_plan_csv(plan, buf, args.index_base, fmt.text)
        return buf.getvalue()
    return _report(
        args,
        {"input": desc, "perron": _perron_summary(pair), "plan": plan.to_dict(args.index_base)},
        timer,
    )


def cmd_perturb(args, timer, fmt):
    A, desc = _load(args, timer)
    pair = _solve(A, args, timer)
    with timer("perturb"):
        new, rep = perturbed_perron(A, PerturbationSpec(args.kind, args.epsilon), _opts(args), pair)
    return _report(
        args,
        {
            "input": desc,
            "perron": _perron_summary(pair),
            "perturbed_perron": _perron_summary(new),
            "report": rep.to_dict(),
        },
        timer,
    )


def cmd_toeplitz(args, timer, fmt):
    T = TridiagToeplitz(args.n, args.sub, args.super_)
    with timer("closed_form"):
        pair = toeplitz_perron(T)
    body = {
        "toeplitz": {"n": T.n, "t_sub": T.t_sub, "t_super": T.t_super},
        "perron": _perron_summary(pair, args.vectors),
        "rho": pair.rho,
    }
    if args.symmetrize:
        body["symmetrized_rho"] = symmetrized_toeplitz_perron(T)
    if args.circulant:
        with timer("circulant"):
            C = perron_pair(make_circulant(T), _opts(args))
        body["circulant"] = {"perron": _perron_summary(C), "rho": C.rho}
        body["rho"] = C.rho
    return _report(args, body, timer)


def cmd_mask(args, timer, fmt):
    chain = MaskChain.from_csv(args.profile)
    A = build_mask_chain(chain)
    pair = _solve(A, args, timer)
    T = project_to_toeplitz_cone(A)
    with timer("rank"):
        plan = recommend_interventions(
            A,
            pair,
            top_k=args.top_k,
            mode="downweight",
            epsilon=args.epsilon,
            exact_rescore=args.exact,
            opts=_opts(args),
            threads=_threads(args),
        )
    ranked = plan.to_dict(1)["ranked"]
    labels = chain.labels
    for row, e in zip(ranked, plan.ranked):
        # edge h -> k carries what k exhales towards h
        row["from_person"] = labels[e.edge.k]
        row["to_person"] = labels[e.edge.h]
    return _report(
        args,
        {
            "input": {"path": args.profile, "people": chain.n},
            "perron": _perron_summary(pair),
            "epidemic_threshold": epidemic_threshold(pair),
            "toeplitz_projection": {"t_sub": T.t_sub, "t_super": T.t_super, "rho": toeplitz_perron(T).rho},
            "plan": {**plan.to_dict(1), "ranked": ranked},
        },
        timer,
    )


def _sweep_values(text: str) -> list[float]:
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise ValueError(f"--sweep expects B1:B2:STEP, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise ValueError("--sweep needs B1 <= B2 and STEP > 0")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + i * step for i in range(count)]


def cmd_sis(args, timer, fmt):
    A, desc = _load(args, timer)
    pair = _solve(A, args, timer)
    body = {"input": desc, "rho": pair.rho, "epidemic_threshold": epidemic_threshold(pair)}
    if args.sweep:
        with timer("sweep"):
            points = threshold_sweep(
                A, _sweep_values(args.sweep), args.delta, args.s0, args.t_end, args.dt, _threads(args)
            )
        body["sweep"] = [
            {"beta": p.beta, "beta_over_delta": p.ratio, "max_final": p.max_final, "died_out": p.died_out}
            for p in points
        ]
    else:
        if args.beta is None:
            raise ValueError("--beta is required unless --sweep is given")
        with timer("simulate"):
            traj = simulate_sis(A, SisParams(args.beta, args.delta, args.s0, args.t_end, args.dt), args.record_every)
        body["beta"] = args.beta
        body["delta"] = args.delta
        body["trajectory"] = traj.summary()
        if args.trajectory:
            with open(args.trajectory, "w", newline="") as f:
                write_trajectory_csv(traj, f, fmt.text)
            body["trajectory_csv"] = args.trajectory
    return _report(args, body, timer)


def cmd_heatmap(args, timer, fmt):
    if args.file is not None:
        A, desc = _load(args, timer)
        pair = _solve(A, args, timer)
    else:
        if None in (args.n, args.sub, args.super_):
            raise ValueError("give FILE or all of --n, --sub and --super")
        A = TridiagToeplitz(args.n, args.sub, args.super_)
        desc = {"toeplitz": {"n": A.n, "t_sub": A.t_sub, "t_super": A.t_super}}
        pair = toeplitz_perron(A)
    E = build_perturbation(A, pair, args.kind)
    grid = log10_heatmap(E)
    with open(args.out, "w", newline="") as f:
        write_heatmap_csv(grid, f)
    row, col = np.unravel_index(int(np.argmax(grid)), grid.shape)
    return _report(
        args,
        {
            "input": desc,
            "kind": args.kind,
            "out": args.out,
            "max_entry": {"row": int(row) + 1, "col": int(col) + 1, "log10": float(grid[row, col])},
        },
        timer,
    )


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--precision", choices=["6", "full"], default="6",
                        help="6 decimal places (default) or full precision")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $SPECRAD_THREADS or all cores)")
    common.add_argument("--timings", action="store_true", help="add wall-clock timings to the report")
    common.add_argument("--tol", type=float, default=SolverOptions.tol, help="relative residual tolerance")
    common.add_argument("--max-iterations", type=int, default=SolverOptions.max_iterations)

    graph = argparse.ArgumentParser(add_help=False)
    graph.add_argument("--format", choices=["tsv-edges", "matrix-market"], default="tsv-edges")
    graph.add_argument("--index-base", type=int, choices=[0, 1], default=1,
                       help="index base of node ids in TSV input and in reported edges")

    p = argparse.ArgumentParser(prog="specrad", description="Spectral radius analysis of nonnegative networks.")
    p.add_argument("--version", action="version", version=f"specrad {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common, graph], help="Perron root, vectors and condition number")
    a.add_argument("file")
    a.add_argument("--vectors", action="store_true", help="include u and v")
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("rank", parents=[common, graph], help="rank edges by spectral impact")
    r.add_argument("file")
    r.add_argument("--top-k", type=int, default=10)
    r.add_argument("--epsilon", type=float, default=None, help="fraction of weight removed, in (0, 1]")
    r.add_argument("--mode", choices=["downweight", "remove"], default="downweight")
    r.add_argument("--exact", action="store_true", help="recompute rho for each ranked edge")
    r.add_argument("--symmetric", action="store_true", help="treat (h,k) and (k,h) as one undirected edge")
    r.add_argument("--allow-reducible", action="store_true")
    r.add_argument("--no-irreducibility-check", action="store_true")
    r.add_argument("--output-format", choices=["json", "csv"], default="json")
    r.set_defaults(func=cmd_rank)

    q = sub.add_parser("perturb", parents=[common, graph], help="rho(A + eps E) for a worst-case E")
    q.add_argument("file")
    q.add_argument("--kind", choices=KINDS, required=True)
    q.add_argument("--epsilon", type=float, required=True)
    q.set_defaults(func=cmd_perturb)

    t = sub.add_parser("toeplitz", parents=[common], help="closed-form tridiagonal Toeplitz analysis")
    t.add_argument("--n", type=int, required=True)
    t.add_argument("--sub", type=float, required=True, help="subdiagonal value")
    t.add_argument("--super", dest="super_", type=float, required=True, help="superdiagonal value")
    t.add_argument("--circulant", action="store_true", help="also close the chain into a cycle")
    t.add_argument("--symmetrize", action="store_true", help="also report the symmetrized radius")
    t.add_argument("--vectors", action="store_true")
    t.set_defaults(func=cmd_toeplitz)

    m = sub.add_parser("mask", parents=[common], help="mask chain from a person_id,w_in,w_out profile")
    m.add_argument("profile")
    m.add_argument("--top-k", type=int, default=5)
    m.add_argument("--epsilon", type=float, default=0.1)
    m.add_argument("--exact", action="store_true")
    m.set_defaults(func=cmd_mask)

    s = sub.add_parser("sis", parents=[common, graph], help="SIS epidemic simulation or threshold sweep")
    s.add_argument("file")
    s.add_argument("--beta", type=float)
    s.add_argument("--delta", type=float, required=True)
    s.add_argument("--s0", type=float, default=0.1, help="initial infection level of every node")
    s.add_argument("--t-end", type=float, default=100.0)
    s.add_argument("--dt", type=float, default=None)
    s.add_argument("--sweep", metavar="B1:B2:STEP")
    s.add_argument("--record-every", type=int, default=1)
    s.add_argument("--trajectory", metavar="CSV", help="write the trajectory to this file")
    s.set_defaults(func=cmd_sis)

    h = sub.add_parser("heatmap", parents=[common, graph], help="log10 entries of a perturbation matrix")
    h.add_argument("file", nargs="?")
    h.add_argument("--kind", choices=KINDS, required=True)
    h.add_argument("--out", required=True)
    h.add_argument("--n", type=int)
    h.add_argument("--sub", type=float)
    h.add_argument("--super", dest="super_", type=float)
    h.set_defaults(func=cmd_heatmap)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    fmt = _Formatter(args.precision)
    timer = _Timer()
    try:
        out = args.func(args, timer, fmt)
    except (OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        err = {"error": str(exc), "type": type(exc).__name__, "command": args.command}
        sys.stdout.write(json.dumps(err) + "\n")
        return 1
    if isinstance(out, str):
        sys.stdout.write(out)
    else:
        sys.stdout.write(json.dumps(fmt.tree(out), indent=2) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
