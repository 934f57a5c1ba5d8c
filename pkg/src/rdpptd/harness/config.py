"""Scenario configuration: typed dataclass, flat ``key = value`` text format.

Format: one ``key = value`` per line, ``#`` starts a comment, blank lines
are ignored. Sequences are comma separated. ``none`` clears an optional
value. Unknown keys are errors. Example::

    scenario = fig9_theta0.8
    pool_size = 200
    workers_per_task = 10
    methods = crh, rtd
    theta = 0.8
    colluded = true
    seeds = 1, 2, 3, 4, 5
"""

from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from rdpptd.errors import ConfigError

ALL_METHODS = ("mean", "median", "weighted_mean", "crh", "rtd", "rdpp_td")
PLAIN_METHODS = ALL_METHODS[:-1]

# values used by the reference experiments; anything else is echoed as an extension
DOCUMENTED_VALUES = {
    "pool_size": (200, 400, 600),
    "workers_per_task": (10, 20, 30),
    "lam": (10.0, 20.0, 30.0, 40.0),
    "theta": (0.0, 0.2, 0.4, 0.6, 0.8),
    "xi": (0.2, 0.3, 0.4, 0.5),
    "rep_threshold": (0.3, 0.4, 0.5),
}


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "custom"
    pool_size: int = 200
    workers_per_task: int = 10
    # candidates per task; plain methods aggregate the first workers_per_task
    candidates_per_task: int = 30
    tasks: int = 1500
    tasks_per_round: int = 50
    # unreported history rounds (no attack) that build reputations
    warmup_rounds: int = 0
    methods: tuple[str, ...] = ALL_METHODS
    lam: float = 10.0
    theta: float = 0.0
    xi: float = 0.2
    colluded: bool = False
    collusion_offset_min: float = 10.0
    collusion_offset_max: float = 25.0
    collusion_jitter: float = 0.1
    rep_threshold: float = 0.5
    gamma: float | None = None
    delta: float = 1e-6
    max_iters: int = 100
    budget: float = 100.0
    additive_bound: float | None = None
    multiplicative_max: float = 8.0
    small_noise_frac: float = 0.02
    small_noise_floor: float = 0.2
    large_noise_frac: float = 0.20
    large_noise_floor: float = 2.0
    wide_half_width: float = 30.0
    truth_min: float = 5.0
    truth_max: float = 35.0
    ground_truth_path: str | None = None
    in_window_prob: float = 0.9
    liar_prob: float = 0.5
    planted: tuple[float, ...] = ()
    planted_per_level: int = 10
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    trace: bool = False

    def __post_init__(self) -> None:
        validate(self)

    @property
    def rounds(self) -> int:
        return -(-self.tasks // self.tasks_per_round)

    def replace(self, **changes: Any) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    @property
    def extensions(self) -> list[str]:
        """Fields set outside the documented experiment values."""
        return [k for k, ok in DOCUMENTED_VALUES.items() if getattr(self, k) not in ok]

    def to_dict(self) -> dict[str, Any]:
        d = {f.name: _plain(getattr(self, f.name)) for f in dataclasses.fields(self)}
        d["extensions"] = self.extensions
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _plain(v: Any) -> Any:
    return list(v) if isinstance(v, tuple) else v


def validate(cfg: ScenarioConfig) -> None:
    def need(cond: bool, msg: str) -> None:
        if not cond:
            raise ConfigError(msg)

    need(cfg.pool_size >= 1, "pool_size must be >= 1")
    need(cfg.workers_per_task >= 2, "workers_per_task must be >= 2")
    need(cfg.candidates_per_task >= cfg.workers_per_task, "candidates_per_task < workers_per_task")
    need(cfg.tasks >= 1 and cfg.tasks_per_round >= 1, "tasks and tasks_per_round must be >= 1")
    need(cfg.warmup_rounds >= 0, "warmup_rounds must be >= 0")
    need(len(cfg.methods) > 0, "methods must be nonempty")
    bad = [m for m in cfg.methods if m not in ALL_METHODS]
    need(not bad, f"unknown methods {bad}; choose from {list(ALL_METHODS)}")
    need(len(set(cfg.methods)) == len(cfg.methods), "duplicate methods")
    need(cfg.lam > 1, "lam must exceed 1")
    need(0.0 <= cfg.theta <= 1.0, "theta must lie in [0, 1]")
    need(0.0 < cfg.xi < 1.0, "xi must lie in (0, 1)")
    need(0 <= cfg.collusion_offset_min <= cfg.collusion_offset_max, "bad collusion offset range")
    need(cfg.collusion_jitter >= 0, "collusion_jitter must be >= 0")
    need(0.0 <= cfg.rep_threshold <= 1.0, "rep_threshold must lie in [0, 1]")
    need(cfg.gamma is None or cfg.gamma > 0, "gamma must be positive")
    need(cfg.delta > 0 and cfg.max_iters >= 1, "need delta > 0 and max_iters >= 1")
    need(cfg.budget >= 0, "budget must be >= 0")
    need(cfg.additive_bound is None or cfg.additive_bound > 0, "additive_bound must be positive")
    need(cfg.multiplicative_max >= 1, "multiplicative_max must be >= 1")
    need(
        min(cfg.small_noise_frac, cfg.small_noise_floor, cfg.large_noise_frac, cfg.large_noise_floor)
        >= 0,
        "noise parameters must be >= 0",
    )
    need(cfg.wide_half_width > 0, "wide_half_width must be positive")
    need(cfg.truth_min <= cfg.truth_max, "truth_min exceeds truth_max")
    need(0.0 <= cfg.in_window_prob <= 1.0 and 0.0 <= cfg.liar_prob <= 1.0, "bad probability")
    need(all(0.0 <= c <= 1.0 for c in cfg.planted), "planted reputations must lie in [0, 1]")
    need(cfg.planted_per_level >= 1, "planted_per_level must be >= 1")
    need(len(cfg.seeds) > 0, "at least one seed required")


_FIELDS = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
_HINTS = typing.get_type_hints(ScenarioConfig)


def _convert(key: str, raw: str) -> Any:
    hint = _HINTS[key]
    text = raw.strip()
    args = typing.get_args(hint)
    optional = type(None) in args
    if optional:
        if text.lower() in ("", "none"):
            return None
        hint = next(a for a in args if a is not type(None))
    origin = typing.get_origin(hint)
    try:
        if origin is tuple:
            (inner, _) = typing.get_args(hint)
            items = [t.strip() for t in text.split(",") if t.strip()]
            return tuple(_scalar(inner, t) for t in items)
        return _scalar(hint, text)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} ({exc})") from None


def _scalar(tp: Any, text: str) -> Any:
    if tp is bool:
        low = text.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError("expected a boolean")
    if tp is int:
        return int(text)
    if tp is float:
        return float(text)
    return text


def parse_config_text(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    values: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, raw)
    base = base or ScenarioConfig()
    return dataclasses.replace(base, **values)


def load_config(path: str | Path, base: ScenarioConfig | None = None) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, base)



def explicit_keys(text: str) -> dict[str, Any]:
    """Values for the keys set in ``text``; used to layer a file over a preset."""
    cfg = parse_config_text(text)
    keys = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if "=" in line:
            keys.append(line.split("=", 1)[0].strip())
    return {k: getattr(cfg, k) for k in keys}
