"""Command line entry point ``rps``.

Exit codes: 0 when every requested cell succeeded, 2 when some cell failed,
1 on a config or data error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .harness import CellResult, ConfigError, RunArtifacts
from .market_data import DataError

log = logging.getLogger("rps.cli")

EXIT_OK, EXIT_ERROR, EXIT_PARTIAL = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rps", description="Portfolio selection experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("config", help="experiment config (.json, .yaml or .yml)")
        sp.add_argument("--seed", type=int, help="use this single seed instead of the config's list")
        sp.add_argument("--out", help="output directory (overrides output_dir)")
        return sp

    add("run", "full experiment: select, weight, rank, evaluate, stability")
    add("select", "write candidate subsets to subsets.csv")
    sp = add("weight", "weight subsets from a subsets file into weights.csv")
    sp.add_argument("--subsets", help="subsets file (default <out>/subsets.csv)")
    sp = add("evaluate", "rank weighted portfolios on train and evaluate them on test")
    sp.add_argument("--weights", help="weights file (default <out>/weights.csv)")
    add("stability", "noise and time stability of the correlation-based strategies")
    return p


def _cmd_run(cfg, market, args) -> int:
    art = harness.run_experiment(cfg, market)
    harness.emit_reports(art, cfg.output_dir)
    for c in art.cells:
        state = "ok" if c.ok else f"FAILED ({c.error})"
        print(f"{c.method}: {len(c.portfolios)} portfolios, {state}")
    return EXIT_OK if art.ok else EXIT_PARTIAL


def _cmd_select(cfg, market, args) -> int:
    rows, failed = [], False
    for spec in cfg.strategies:
        try:
            cands = harness.select_candidates(spec, cfg, market)
        except Exception as exc:  # noqa: BLE001
            log.error("%s selection failed: %s", spec.name, exc)
            failed = True
            continue
        rows.extend((spec.name, int(c.subset.provenance.get("seed", 0)), c.subset.assets) for c in cands)
    path = harness.write_text(cfg.output_dir, "subsets.csv", harness.subsets_text(rows))
    print(f"{len(rows)} subsets -> {path}")
    return EXIT_PARTIAL if failed else EXIT_OK


def _cmd_weight(cfg, market, args) -> int:
    src = args.subsets or Path(cfg.output_dir) / "subsets.csv"
    rows, failed = [], False
    subsets = harness.read_subsets(src)
    for strategy in dict.fromkeys(s for s, _, _ in subsets):
        if strategy == "sa":
            log.warning("sa subsets skipped: annealing produces its own weights, use 'run'")
            continue
        group = [a for s, _, a in subsets if s == strategy]
        for w in cfg.weighters:
            for pid, assets in enumerate(group):
                try:
                    rows.append((strategy, w, pid, harness.weigh(w, list(assets), cfg, market)))
                except Exception as exc:  # noqa: BLE001
                    log.warning("%s/%s: skipping %s: %s", strategy, w, ";".join(assets), exc)
                    failed = True
    path = harness.write_text(cfg.output_dir, "weights.csv", harness.weights_text(rows))
    print(f"{len(rows)} portfolios -> {path}")
    return EXIT_PARTIAL if failed else EXIT_OK


def _cmd_evaluate(cfg, market, args) -> int:
    src = args.weights or Path(cfg.output_dir) / "weights.csv"
    cells = []
    for (strategy, weighter), portfolios in harness.read_weights(src).items():
        cell = CellResult(strategy, weighter, harness.method_label(strategy, weighter), n_candidates=len(portfolios))
        weighted = [(w, {"strategy": strategy}) for w in portfolios]
        try:
            cells.append(harness.rank_and_evaluate(cell, weighted, cfg, market))
        except Exception as exc:  # noqa: BLE001
            cells.append(harness.failed_cell(strategy, weighter, exc))
    art = RunArtifacts(cfg.echo(), cells, [], [c.method for c in cells if not c.ok], [])
    harness.emit_reports(art, cfg.output_dir)
    return EXIT_OK if art.ok else EXIT_PARTIAL


def _cmd_stability(cfg, market, args) -> int:
    records, failures = harness.run_stability(cfg, market)
    for test in ("noise", "time"):
        rows = [[r.method, r.seed, repr(r.score)] for r in records if r.test == test]
        harness.write_text(cfg.output_dir, f"stability_{test}.csv", harness.csv_text(["Method", "Seed", "Score"], rows))
    for r in records:
        print(f"{r.method} {r.test} seed={r.seed}: {r.score:.4f}")
    return EXIT_PARTIAL if failures else EXIT_OK


COMMANDS = {
    "run": _cmd_run,
    "select": _cmd_select,
    "weight": _cmd_weight,
    "evaluate": _cmd_evaluate,
    "stability": _cmd_stability,
}


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = harness.load_config(args.config).with_overrides(args.seed, args.out)
        market = harness.load_market(cfg)
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        return COMMANDS[args.command](cfg, market, args)
    except (ConfigError, DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
