"""Command-line entry points: run experiments and inspect their pieces.

Exit codes: 0 success, 2 bad configuration or input, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

from .config import DESK_SCALE, FULL_SCALE, VARIANT_NAMES, ConfigError, ExperimentConfig

OUT_ENV = "ANALOGICAL_RL_OUT"

CURVE_COLUMNS = ("variant", "replicate", "block", "points", "n_exemplars", "n_schemas",
                 "mean_abs_v_states", "mean_abs_v_schemas", "mean_u_states", "mean_u_schemas")
SUMMARY_COLUMNS = ("variant", "block", "mean_points", "se_points")

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3

log = logging.getLogger("analogical_rl")


class UsageError(Exception):
    pass


# flag name -> config field, for flags that simply overwrite a field
_OVERRIDES = {
    "replicates": "replicates", "blocks": "blocks", "games_per_block": "games_per_block", "seed": "seed",
    "beta": "beta", "theta": "theta", "backend": "backend", "epsilon": "epsilon", "gamma": "gamma",
    "tau": "tau", "induction_k": "induction_k", "min_induction_samples": "min_induction_samples",
    "mac_top_n": "mac_top_n", "mac_p": "mac_p", "tie_break": "tie_break", "eval_policy": "eval_policy",
    "learning_sides": "learning_sides", "schema_value": "schema_value", "threads": "threads",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="analogical-rl", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train and evaluate model variants")
    run.add_argument("--config", help="JSON file of config values; flags override it")
    run.add_argument("--out", help=f"output directory (default: ${OUT_ENV})")
    run.add_argument("--variants", help=f"comma-separated subset of {','.join(VARIANT_NAMES)}")
    scale = run.add_mutually_exclusive_group()
    scale.add_argument("--full", action="store_true", help="64 replicates x 5000 blocks")
    scale.add_argument("--desk", action="store_true", help="8 replicates x 500 blocks")
    for name, typ in (("replicates", int), ("blocks", int), ("games-per-block", int), ("seed", int),
                      ("beta", float), ("theta", float), ("epsilon", float), ("gamma", float),
                      ("tau", float), ("induction-k", float), ("min-induction-samples", int),
                      ("mac-top-n", int), ("mac-p", float), ("threads", int)):
        run.add_argument(f"--{name}", type=typ)
    run.add_argument("--backend", choices=("DIFFERENCE", "PHI"))
    run.add_argument("--tie-break", choices=("RANDOM", "FIRST"))
    run.add_argument("--eval-policy", choices=("GREEDY", "SOFTMAX"))
    run.add_argument("--learning-sides", choices=("BOTH", "FIRST"))
    run.add_argument("--schema-value", choices=("INDUCTION", "DECISION"),
                     help="estimate a new schema starts from: after this game's learning, or at the move")
    run.add_argument("--no-svg", action="store_true", help="skip the chart")

    dump = sub.add_parser("dump-pool", help="list a saved pool, highest attention first")
    dump.add_argument("pool_file")

    solve = sub.add_parser("solve", help="game value and best moves of a position")
    solve.add_argument("board", nargs="+", help='e.g. "XO./.X./..O" or "XO./.X./..O X"')

    sim = sub.add_parser("similarity", help="similarity and best mapping between two boards or schemas")
    sim.add_argument("a")
    sim.add_argument("b")
    sim.add_argument("--backend", choices=("DIFFERENCE", "PHI"), default="DIFFERENCE")
    sim.add_argument("--generator", choices=("SYMMETRY_8", "IDENTITY", "EXHAUSTIVE"), default="SYMMETRY_8")
    sim.add_argument("--beta", type=float, default=1.0)
    sim.add_argument("--theta", type=float, default=1.0)
    return p


# --- run ------------------------------------------------------------------


def config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    if args.full:
        cfg.replicates, cfg.blocks = FULL_SCALE["replicates"], FULL_SCALE["blocks"]
    if args.desk:
        cfg.replicates, cfg.blocks = DESK_SCALE["replicates"], DESK_SCALE["blocks"]
    if args.variants is not None:
        cfg.variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    for flag, name in _OVERRIDES.items():
        value = getattr(args, flag)
        if value is not None:
            setattr(cfg, name, value)
    out = args.out or cfg.out or os.environ.get(OUT_ENV)
    if not out:
        raise UsageError(f"run: --out is required (or set {OUT_ENV})")
    cfg.out = out
    return cfg.validate()


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def write_outputs(result, out: Path, svg: bool = True) -> None:
    from .memory import dump_pool

    cfg = result.config
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json())

    with open(out / "curves.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for variant in cfg.variants:
            for rep in result.replicates[variant]:
                for c in rep.curve:
                    w.writerow([variant] + [_fmt(getattr(c, k)) for k in CURVE_COLUMNS[1:]])

    summary = result.summary()
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in summary:
            w.writerow([_fmt(x) for x in row])

    with open(out / "inductions.jsonl", "w") as fh:
        for variant in cfg.variants:
            for rep in result.replicates[variant]:
                for event in rep.inductions:
                    record = {"variant": variant, "replicate": rep.replicate, **event}
                    fh.write(json.dumps(record, sort_keys=True) + "\n")

    pools = out / "pools"
    pools.mkdir(exist_ok=True)
    for variant in cfg.variants:
        for rep in result.replicates[variant]:
            dump_pool(rep.pool, pools / f"{variant}_{rep.replicate:03d}.txt")

    if svg:
        write_svg(summary, cfg.variants, out / "curves.svg")


def write_svg(summary, variants, path: Path) -> None:
    """Mean points per block for each variant, with a standard-error band."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    plt.rcParams["svg.hashsalt"] = "analogical-rl"
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for variant in variants:
        rows = [r for r in summary if r[0] == variant]
        blocks = np.array([r[1] for r in rows]) + 1
        mean = np.array([r[2] for r in rows])
        se = np.array([r[3] for r in rows])
        line, = ax.plot(blocks, mean, label=variant, linewidth=1)
        ax.fill_between(blocks, mean - se, mean + se, color=line.get_color(), alpha=0.2, linewidth=0)
    ax.set_xlabel("block (10 training games)")
    ax.set_ylabel("points per evaluation pair")
    ax.set_ylim(0, 9)
    ax.legend(loc="lower right", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_run(args) -> int:
    from .harness import run_experiment

    cfg = config_from_args(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"{out}: not writable")

    def progress(res):
        pts = [c.points for c in res.curve[-50:]]
        log.info("%s replicate %d done: last-%d mean points %.2f, %d schemas",
                 res.variant, res.replicate, len(pts), sum(pts) / len(pts), res.pool.n_schemas)

    result = run_experiment(cfg, progress)
    write_outputs(result, out, svg=not args.no_svg)
    print(f"wrote {out}")
    return EXIT_OK


# --- inspection -----------------------------------------------------------


def cmd_dump_pool(args) -> int:
    from .memory import load_pool

    pool = load_pool(args.pool_file)
    order = sorted(range(len(pool)), key=lambda i: (-pool.u[i], int(pool.ids[i])))
    for i in order:
        e = pool[i]
        rows = "/".join(e.text()[k:k + 3] for k in (0, 3, 6))
        print(f"{rows}  v={e.v:+.4f}  u={e.u:.4f}  {e.origin.value}")
    return EXIT_OK


def cmd_solve(args) -> int:
    from .solver import solve
    from .tictactoe import format_board, outcome, Outcome, parse_board

    board = parse_board(" ".join(args.board))
    table = solve()
    print(f"value: {table.value(board).name}")
    if outcome(board) is Outcome.ONGOING:
        for move in table.best_moves[board]:
            print(f"best: {format_board(move)}")
    return EXIT_OK


def _structure(text: str):
    from .relational import Kind, structure_from_cells
    from .tictactoe import parse_cells

    c = parse_cells(text)
    kind = Kind.SCHEMA if min(c) < 0 else Kind.STATE
    return structure_from_cells(c, kind)


def cmd_similarity(args) -> int:
    from .relational import Backend, Generator, SimilarityParams, analogical_similarity

    a, b = _structure(args.a), _structure(args.b)
    params = SimilarityParams(args.beta, args.theta, Backend[args.backend])
    sim, mapping = analogical_similarity(a, b, params, Generator[args.generator])
    print(f"similarity: {sim!r}")
    if params.backend is Backend.DIFFERENCE:
        print(f"differences: {int(-mapping.score)}")
    else:
        print(f"score: {mapping.score!r}")
    if mapping.symmetry is not None:
        print(f"symmetry: {mapping.symmetry}")
    print("objects: " + " ".join(f"{x}->{y}" for x, y in sorted(mapping.objects.items())))
    return EXIT_OK


COMMANDS = {"run": cmd_run, "dump-pool": cmd_dump_pool, "solve": cmd_solve, "similarity": cmd_similarity}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
