"""Output files: results.csv, config.json, pool.csv and transcript.jsonl."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

from rdpptd.errors import DomainError
from rdpptd.harness.config import ScenarioConfig
from rdpptd.harness.scenario import ResultRow, SeedRun, all_rows

RESULT_FIELDS = tuple(f.name for f in dataclasses.fields(ResultRow))


def format_real(x: float) -> str:
    if math.isnan(x):
        return "nan"
    return f"{x:.10g}"


def results_csv(rows: Sequence[ResultRow]) -> str:
    if not rows:
        raise DomainError("no result rows to emit")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(RESULT_FIELDS)
    for r in rows:
        w.writerow(
            [
                r.scenario,
                r.seed,
                r.round,
                r.method,
                format_real(r.rmse),
                format_real(r.mean_quality),
                format_real(r.reputation_mae),
                r.excluded_count,
            ]
        )
    return buf.getvalue()


def pool_csv(runs: Iterable[tuple[str, SeedRun, int]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario", "seed", "pseudonym", "category", "true_reputation"])
    for scenario, run, seed in runs:
        for p in run.pool:
            w.writerow([scenario, seed, p.pseudonym, p.category, format_real(p.true_reputation)])
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def emit(
    results: Sequence[tuple[ScenarioConfig, Sequence[SeedRun]]],
    out_dir: str | Path,
    trace: bool = False,
) -> list[Path]:
    """Write all outputs for ``results`` (one entry per scenario) to ``out_dir``."""
    rows = all_rows([run for _, runs in results for run in runs])
    text = results_csv(rows)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = [out / "results.csv", out / "config.json", out / "pool.csv"]
        _write(written[0], text)
        configs = [cfg.to_dict() for cfg, _ in results]
        _write(written[1], json.dumps(configs if len(configs) > 1 else configs[0], indent=2, sort_keys=True) + "\n")
        _write(
            written[2],
            pool_csv((cfg.scenario, run, seed) for cfg, runs in results for run, seed in zip(runs, cfg.seeds)),
        )
        if trace:
            lines = [line for _, runs in results for run in runs for line in run.transcript]
            written.append(out / "transcript.jsonl")
            _write(written[-1], "".join(line + "\n" for line in lines))
    except OSError as exc:
        raise OSError(f"cannot write outputs to {out}: {exc}") from exc
    return written
