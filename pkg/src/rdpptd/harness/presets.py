"""Named scenario presets replicating the reference experiment designs.

Each preset expands to a list of configs, one per parameter combination,
named ``<preset>_<param><value>...``. Overrides are applied to every member.
"""

from __future__ import annotations

from typing import Any, Callable

from rdpptd.errors import ConfigError
from rdpptd.harness.config import ScenarioConfig

# history rounds (no attack) so attack scenarios start from learned reputations
ATTACK_WARMUP_ROUNDS = 20
FIG8_ROUNDS = 200


def _fig6(base: ScenarioConfig) -> list[ScenarioConfig]:
    return [base.replace(scenario=f"fig6_N{n}", pool_size=n) for n in (200, 400, 600)]


def _fig7(base: ScenarioConfig) -> list[ScenarioConfig]:
    return [base.replace(scenario=f"fig7_lam{lam:g}", lam=float(lam)) for lam in (10, 20, 30)]


def _fig8(base: ScenarioConfig) -> list[ScenarioConfig]:
    return [base.replace(scenario="fig8", planted=(0.4, 0.6, 0.8), planted_per_level=10)]


def _fig9(base: ScenarioConfig) -> list[ScenarioConfig]:
    return [
        base.replace(scenario=f"fig9_theta{th:g}_k{k}", theta=th, workers_per_task=k,
                     candidates_per_task=3 * k, colluded=True)
        for th in (0.2, 0.4, 0.6, 0.8)
        for k in (10, 20, 30)
    ]


def _fig10(base: ScenarioConfig) -> list[ScenarioConfig]:
    return [
        base.replace(scenario=f"fig10_theta{th:g}_xi{xi:g}_lam{lam:g}", theta=th, xi=xi,
                     lam=float(lam), colluded=True)
        for th in (0.4, 0.6, 0.8)
        for xi in (0.2, 0.3, 0.4, 0.5)
        for lam in (10, 20, 30, 40)
    ]


def _fig11(base: ScenarioConfig) -> list[ScenarioConfig]:
    return [
        base.replace(scenario=f"fig11_thr{thr:g}_theta{th:g}", rep_threshold=thr, theta=th)
        for thr in (0.3, 0.4, 0.5)
        for th in (0.2, 0.4, 0.6, 0.8)
    ]


# (expander, preset-level defaults)
_PRESETS: dict[str, tuple[Callable[[ScenarioConfig], list[ScenarioConfig]], dict[str, Any]]] = {
    "fig6": (_fig6, dict(tasks=1500)),
    "fig7": (_fig7, dict(tasks=1000)),
    "fig8": (_fig8, dict(tasks=FIG8_ROUNDS * 50)),
    "fig9": (_fig9, dict(tasks=1000, warmup_rounds=ATTACK_WARMUP_ROUNDS,
                         methods=("mean", "median", "weighted_mean", "crh", "rtd"))),
    "fig10": (_fig10, dict(tasks=1000, warmup_rounds=ATTACK_WARMUP_ROUNDS, methods=("rtd",))),
    "fig11": (_fig11, dict(tasks=1000, warmup_rounds=ATTACK_WARMUP_ROUNDS, xi=0.5,
                           colluded=True, methods=("rtd", "rdpp_td"))),
}

PRESET_NAMES = tuple(_PRESETS)


def expand_preset(name: str, overrides: dict[str, Any] | None = None) -> list[ScenarioConfig]:
    """Configs for preset ``name``.

    ``overrides`` beat preset defaults but not the preset's own sweep axes.
    """
    if name not in _PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {list(PRESET_NAMES)}")
    expander, defaults = _PRESETS[name]
    overrides = dict(overrides or {})
    overrides.pop("scenario", None)
    base = ScenarioConfig(**{**defaults, **overrides})
    return expander(base)
