"""Command line entry point.

    rdpptd simulate --config run.cfg [--preset fig6] [--seed 1 2] [--tasks 200]
                    [--out DIR] [--trace] [--jobs 4]
    rdpptd validate --config run.cfg [--preset fig6]

Exit codes: 0 success, 1 configuration error, 2 runtime abort. The output
directory defaults to ``$RDPPTD_OUT_DIR`` when set, else ``./out``; ``--out``
wins over both.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path
from typing import Sequence

from rdpptd.errors import ConfigError
from rdpptd.harness.config import ScenarioConfig, explicit_keys
from rdpptd.harness.emit import emit
from rdpptd.harness.presets import PRESET_NAMES, expand_preset
from rdpptd.harness.scenario import run_scenario

OUT_DIR_ENV = "RDPPTD_OUT_DIR"
DEFAULT_OUT_DIR = "out"

log = logging.getLogger("rdpptd")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rdpptd", description="privacy-preserving crowdsensing truth discovery simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run scenarios and write results")
    sim.add_argument("--config", required=True, help="key = value config file")
    sim.add_argument("--preset", choices=PRESET_NAMES)
    sim.add_argument("--seed", type=int, nargs="+", dest="seeds")
    sim.add_argument("--tasks", type=int, help="measured task count (CI-scale runs)")
    sim.add_argument("--out", help=f"output directory (default ${OUT_DIR_ENV} or ./{DEFAULT_OUT_DIR})")
    sim.add_argument("--trace", action="store_true", help="write transcript.jsonl")
    sim.add_argument("--jobs", type=int, default=1, help="worker processes per scenario")
    sim.add_argument("-v", "--verbose", action="store_true")

    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("--config", required=True)
    val.add_argument("--preset", choices=PRESET_NAMES)
    return ap


def resolve_configs(
    path: str, preset: str | None, seeds: Sequence[int] | None = None,
    tasks: int | None = None, trace: bool = False,
) -> list[ScenarioConfig]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    overrides = explicit_keys(text)
    if seeds:
        overrides["seeds"] = tuple(seeds)
    if tasks is not None:
        overrides["tasks"] = tasks
    if trace:
        overrides["trace"] = True
    if preset:
        return expand_preset(preset, overrides)
    return [ScenarioConfig(**overrides)]


def out_dir(flag: str | None) -> Path:
    return Path(flag or os.environ.get(OUT_DIR_ENV) or DEFAULT_OUT_DIR)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        if args.command == "validate":
            configs = resolve_configs(args.config, args.preset)
        else:
            if args.jobs < 1:
                raise ConfigError("--jobs must be >= 1")
            configs = resolve_configs(args.config, args.preset, args.seeds, args.tasks, args.trace)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    if args.command == "validate":
        for cfg in configs:
            ext = f" (extensions: {', '.join(cfg.extensions)})" if cfg.extensions else ""
            print(f"ok {cfg.scenario}: {len(cfg.seeds)} seeds, {cfg.rounds} rounds{ext}")
        return 0

    results = []
    try:
        for cfg in configs:
            t0 = time.perf_counter()
            results.append((cfg, run_scenario(cfg, args.jobs)))
            log.info("%s done in %.1fs", cfg.scenario, time.perf_counter() - t0)
        written = emit(results, out_dir(args.out), trace=any(c.trace for c in configs))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # any module abort fails the run with context
        print(f"runtime abort: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    for p in written:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
