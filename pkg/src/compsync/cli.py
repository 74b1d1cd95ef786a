"""Command-line front end: ``synth``, ``verify``, ``simulate`` and ``reproduce``.

Exit codes: 0 success, 1 verification or simulation failure, 2 bad
configuration or input.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import graphs
from . import io
from . import scenario as scn
from .collection import synthesize_free, synthesize_graph, verify_collection
from .errors import (
    CompsyncError,
    ConfigError,
    Diverged,
    InfeasibleCollection,
    InvalidGain,
    InvalidMatrix,
    InvalidOrder,
    InvalidSpectrum,
    NotConnected,
    NotSimultaneous,
    SingularDecoupling,
)
from .lyapunov import certification_report, gain_lower_bound

log = logging.getLogger("compsync")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
CONFIG_ERRORS = (ConfigError, InvalidOrder, InvalidSpectrum, NotConnected, InvalidMatrix, InvalidGain, FileNotFoundError)
RUN_ERRORS = (Diverged, SingularDecoupling, InfeasibleCollection, NotSimultaneous)

REPRODUCTIONS = {
    "vanderpol": ["vanderpol-uncoupled", "vanderpol"],
    "linosc": ["linosc-uncoupled", "linosc-pd", "linosc-pd-disturbed", "linosc-pid-disturbed"],
}


def _margin(text: str):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"margin must be a number or comma list, got {text!r}") from None
    return vals[0] if len(vals) == 1 else tuple(vals)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _print_report(rep, stream=sys.stdout) -> None:
    for ch in rep.checks:
        mark = "PASS" if ch.passed else "FAIL"
        print(f"{mark}  {ch.name:<40s} value={ch.value:.6e}  threshold={ch.threshold:.3e}", file=stream)
    for note in rep.notes:
        print(f"note  {note}", file=stream)


def cmd_synth(args) -> int:
    out = _out(args)
    if args.free:
        if args.agents is None:
            raise ConfigError("--free needs --agents")
        top = None if args.top_eigs is None else [float(v) for v in args.top_eigs.split(",")]
        coll = synthesize_free(args.agents, args.order, top_eigs=top, margin=args.margin)
        L_graph, schedule = None, None
    else:
        if args.graph is None:
            raise ConfigError("give --graph kind:N or --free")
        g = graphs.parse_graph_spec(args.graph, seed=args.seed)
        L_graph = graphs.laplacian(g, args.scale)
        coll, schedule = synthesize_graph(L_graph, args.order, margin=args.margin)
    rep = verify_collection(coll, graph=L_graph)
    doc = io.collection_to_dict(coll)
    if schedule is not None:
        doc["schedule"] = {"rho_bar": schedule.rho_bar.tolist(), "gains": schedule.gains.tolist()}
    io.write_json(out / "collection.json", doc)
    (out / "collection.txt").write_text(io.format_matrices(coll.L))
    io.write_json(out / "report.json", {"type": "verification", **rep.as_dict()})
    if args.verbose:
        _print_report(rep)
    eig = coll.lam[1 : coll.n + 1, 1:]
    print(f"collection N={coll.N} n={coll.n} kind={coll.kind}")
    for k in range(coll.n):
        print(f"  L_{k + 1} nontrivial eigenvalues: " + " ".join(f"{v:.6g}" for v in eig[k]))
    print(f"verification: {'PASS' if rep.passed else 'FAIL'} ({len(rep.failures())} failed of {len(rep.checks)})")
    return EXIT_OK if rep.passed else EXIT_FAIL


def _load_graph(spec: str, seed: int):
    path = Path(spec)
    if path.exists():
        return io.parse_matrices(path.read_text())[0]
    return graphs.laplacian(graphs.parse_graph_spec(spec, seed=seed))


def cmd_verify(args) -> int:
    out = _out(args)
    coll = io.load_collection(args.collection)
    graph = None if args.graph is None else _load_graph(args.graph, args.seed)
    rep = verify_collection(coll, graph=graph)
    doc = {"type": "verification", "collection": rep.as_dict()}
    try:
        l = args.gain if args.gain is not None else gain_lower_bound(coll, args.w)
    except (InfeasibleCollection, InvalidGain) as exc:
        rep.notes.append(f"Lyapunov certificates skipped: {exc}")
        l = None
    if l is not None:
        cert = certification_report(coll, l, trials=args.trials, seed=args.seed)
        doc["lyapunov"] = {"gain": l, "w": args.w, **cert.as_dict()}
        rep.checks.extend(cert.checks)
    else:
        rep.add("lyapunov.gain_available", 0.0, 0.0, False)
    doc["passed"] = rep.passed
    io.write_json(out / "report.json", doc)
    _print_report(rep)
    print(f"verification: {'PASS' if rep.passed else 'FAIL'}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def _run_one(cfg, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "scenario.json", {k: v for k, v in cfg.to_dict().items() if k != "schema_version"})
    res = scn.run(cfg)
    io.write_trajectory_csv(out / "trajectory.csv", res.record)
    io.write_summary_csv(out / "summary.csv", res.record)
    if res.collection is not None:
        io.write_json(out / "collection.json", io.collection_to_dict(res.collection))
        io.write_json(out / "controller.json", io.controller_to_dict(res.controller))
    io.write_json(out / "summary.json", {"type": "simulation_summary", **res.summary})
    return res.summary


def _describe(summary: dict) -> str:
    parts = [f"{summary['scenario']}: final error_norm {summary['final_error_norm']:.3e}"]
    if "gain" in summary:
        parts.append(f"gain l {summary['gain']:.6g} (bound {summary['gain_bound']:.6g}, w {summary['w']:.4g})")
    if "lyapunov" in summary:
        parts.append("V nonincreasing" if summary["lyapunov"]["nonincreasing"] else "V increased")
    return "; ".join(parts)


def _load_config(args):
    if args.preset is not None:
        cfg = scn.preset(args.preset)
    else:
        cfg = scn.ScenarioConfig.from_dict(io.read_json(args.config))
    if args.t_end is not None:
        doc = cfg.to_dict()
        doc["t_end"] = args.t_end
        cfg = scn.ScenarioConfig.from_dict(doc)
    return cfg


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    summary = _run_one(cfg, _out(args))
    print(_describe(summary))
    if summary.get("collection_verified") is False:
        return EXIT_FAIL
    return EXIT_OK


def cmd_reproduce(args) -> int:
    out = _out(args)
    results = {}
    for name in REPRODUCTIONS[args.example]:
        results[name] = _run_one(scn.preset(name), out / name)
        print(_describe(results[name]))
    table = {
        name: {k: s.get(k) for k in ("final_error_norm", "initial_error_norm", "gain", "gain_bound", "w")}
        for name, s in results.items()
    }
    if args.example == "linosc":
        pd = results["linosc-pd-disturbed"]["final_error_norm"]
        pid = results["linosc-pid-disturbed"]["final_error_norm"]
        table["disturbance_rejection_ratio"] = pd / pid if pid > 0 else float("inf")
    io.write_json(out / "comparison.json", {"type": "reproduction", "example": args.example, "runs": table})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="compsync", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="synthesize and verify a coupling collection")
    s.add_argument("--graph", help="kind:N with kind in path, cycle, complete, random-connected")
    s.add_argument("--order", type=int, required=True)
    s.add_argument("--margin", type=_margin, default=None)
    s.add_argument("--scale", type=float, default=1.0, help="multiplier on the graph Laplacian")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--free", action="store_true", help="unconstrained collection instead of a graph one")
    s.add_argument("--agents", type=int)
    s.add_argument("--top-eigs", help="comma list of top-order eigenvalues (free mode)")
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_synth)

    v = sub.add_parser("verify", help="verify a collection file and certify its Lyapunov function")
    v.add_argument("collection", help="collection JSON or matrix text file")
    v.add_argument("--graph", help="kind:N or a matrix text file holding the graph Laplacian")
    v.add_argument("--w", type=float, default=0.0, help="weak-Lipschitz constant used for the gain")
    v.add_argument("--gain", type=float, default=None)
    v.add_argument("--trials", type=int, default=100)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", default=".")
    v.set_defaults(func=cmd_verify)

    m = sub.add_parser("simulate", help="run one scenario")
    src = m.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(scn.PRESETS))
    src.add_argument("--config", help="scenario JSON file")
    m.add_argument("--t-end", type=float, default=None)
    m.add_argument("--out", default=".")
    m.set_defaults(func=cmd_simulate)

    r = sub.add_parser("reproduce", help="run every variant of a numerical example")
    r.add_argument("example", choices=sorted(REPRODUCTIONS))
    r.add_argument("--out", default=".")
    r.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "margin", None) is None and args.command == "synth":
        args.margin = 0.5 if args.free else 0.9
    try:
        return args.func(args)
    except CONFIG_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RUN_ERRORS as exc:
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except CompsyncError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
