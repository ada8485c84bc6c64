"""Command-line entry point: ``tarski validate|sections|run|gen-graph|intent``."""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import io
from .dynamics import lyapunov_energy
from .formula import FormulaSyntaxError, parse_formula
from .harness import (
    ConfigError,
    ExperimentConfig,
    format_energy,
    generate_geometric_graph,
    run_experiment,
    validate_document,
)
from .kripke import ModelError, intent
from .lattice import LatticeError
from .sheaf import MODES, SheafError, StateSpaceTooLarge, enumerate_sections, is_section

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
_EXPECTED = (io.FileFormatError, LatticeError, SheafError, StateSpaceTooLarge, ConfigError,
             ModelError, FormulaSyntaxError, KeyError, ValueError, OSError)


def _cmd_validate(args) -> int:
    try:
        doc = io.load_json(args.file)
        ok, report = validate_document(doc)
    except _EXPECTED as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(report)
    return EXIT_OK if ok else EXIT_FAIL


def _cmd_sections(args) -> int:
    sheaf = io.sheaf_from_description(io.load_json(args.sheaf))
    sections = enumerate_sections(sheaf, cap=args.cap, mode=args.mode)
    for x in sections:
        if not is_section(sheaf, x, args.mode):
            raise RuntimeError(f"enumerated assignment {x} is not a section")
        energy = format_energy(lyapunov_energy(sheaf, x, mode=args.mode))
        print(" ".join(str(v) for v in x) + f"\tenergy={energy}")
    print(f"{len(sections)} sections")
    return EXIT_OK


def _cmd_run(args) -> int:
    path = Path(args.config)
    data = io.load_json(path)
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if os.environ.get("TARSKI_SEED"):
        data["seed"] = int(os.environ["TARSKI_SEED"])
    cfg = ExperimentConfig.from_dict(data)
    out = args.out or cfg.output or "."
    result = run_experiment(cfg, out_dir=out, base_dir=path.parent)
    converged = sum(r["terminal_status"] == "ConvergedToSection" for r in result.summary["trials"])
    print(f"{len(result.trials)} trials, {converged} converged; wrote {Path(out) / 'trace.csv'} "
          f"and {Path(out) / 'summary.json'}")
    return EXIT_OK


def _cmd_gen_graph(args) -> int:
    graph = generate_geometric_graph(args.n, args.radius, args.seed)
    text = io.format_edge_list(graph)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.points:
        Path(args.points).write_text(
            "vertex,x,y\n" + "".join(f"{i},{x!r},{y!r}\n" for i, (x, y) in enumerate(graph.points.tolist())))
    return EXIT_OK


def _cmd_intent(args) -> int:
    model = io.model_from_description(io.load_json(args.model))
    mask = intent(model, parse_formula(args.formula))
    print(json.dumps(sorted(s for s in range(model.n_states) if mask >> s & 1)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tarski", description="Asynchronous lattice-valued gossip simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a lattice, sheaf or model file")
    p.add_argument("file")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("sections", help="list every section of a sheaf")
    p.add_argument("sheaf")
    p.add_argument("--cap", type=int, default=10**6, help="maximum state-space size")
    p.add_argument("--mode", choices=MODES, default="primal")
    p.set_defaults(func=_cmd_sections)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default: config 'output' or '.')")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("gen-graph", help="random geometric graph as an edge list")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.add_argument("--points", help="also write point coordinates as CSV")
    p.set_defaults(func=_cmd_gen_graph)

    p = sub.add_parser("intent", help="states of a model satisfying a formula")
    p.add_argument("model")
    p.add_argument("formula")
    p.set_defaults(func=_cmd_intent)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _EXPECTED as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
