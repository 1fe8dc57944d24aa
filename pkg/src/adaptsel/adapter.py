"""Per-frame aggregation, smoothing and hysteresis switching."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import objectives as obj
from .objectives import EDModelParams, NormalizationBounds
from .scene import ArmModel, ContextFrame
from .techniques import ActivationRegion

OBJECTIVES = ("speed", "accuracy", "comfort", "familiarity")


@dataclass(frozen=True)
class AdapterConfig:
    techniques: tuple[str, ...]
    initial_technique: str
    k_speed: float = 0.5
    k_accuracy: float = 0.2
    k_comfort: float = 0.15
    k_familiarity: float = 0.15
    r_c: float = 20.0
    alpha: float = 0.8
    window: int = 20
    required: int = 15
    margin_threshold: float = 0.0
    beta: float = 1.0
    familiarity: dict[str, float] = field(default_factory=dict)
    bounds: NormalizationBounds | None = None
    ed_params: EDModelParams = field(default_factory=EDModelParams)
    arm: ArmModel = field(default_factory=ArmModel)
    dominant: str = "right"

    def __post_init__(self):
        if self.required > self.window:
            raise ValueError("required frames n must not exceed the window w")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        weights = (self.k_speed, self.k_accuracy, self.k_comfort, self.k_familiarity)
        if any(k < 0 or not math.isfinite(k) for k in weights):
            raise ValueError("weights must be finite and non-negative")
        if sum(weights) <= 0:
            raise ValueError("weight sum must be positive")
        if self.initial_technique not in self.techniques:
            raise ValueError("initial technique must be among the configured techniques")
        for t in self.techniques:
            if t not in self.familiarity:
                raise ValueError(f"missing familiarity constant for {t!r}")
        if self.bounds is None:
            object.__setattr__(
                self, "bounds", obj.default_bounds(self.r_c, self.beta, self.arm)
            )

    @property
    def weights(self) -> dict[str, float]:
        return {
            "speed": self.k_speed,
            "accuracy": self.k_accuracy,
            "comfort": self.k_comfort,
            "familiarity": self.k_familiarity,
        }

    def hash(self) -> str:
        doc = {
            "techniques": list(self.techniques),
            "initial": self.initial_technique,
            "weights": self.weights,
            "r_c": self.r_c,
            "alpha": self.alpha,
            "window": self.window,
            "required": self.required,
            "t_o": self.margin_threshold,
            "beta": self.beta,
            "familiarity": self.familiarity,
            "ed": [
                list(self.ed_params.mu_coeffs),
                list(self.ed_params.sigma_x_coeffs),
                list(self.ed_params.sigma_y_coeffs),
                self.ed_params.mu_sign,
            ],
        }
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def application_preset(**overrides) -> AdapterConfig:
    """Three-technique configuration used by the interactive application."""
    base = dict(
        techniques=("RayCasting", "StickyRay", "RayCursor"),
        initial_technique="RayCasting",
        k_speed=0.5,
        k_accuracy=0.2,
        k_comfort=0.15,
        k_familiarity=0.15,
        familiarity=dict(obj.APPLICATION_FAMILIARITY),
    )
    base.update(overrides)
    return AdapterConfig(**base)


def study_preset(**overrides) -> AdapterConfig:
    """Two-technique performance configuration (StickyRay + RayCursor)."""
    base = dict(
        techniques=("StickyRay", "RayCursor"),
        initial_technique="StickyRay",
        k_speed=0.5,
        k_accuracy=0.2,
        k_comfort=0.2,
        k_familiarity=0.1,
        familiarity=dict(obj.STUDY_FAMILIARITY),
    )
    base.update(overrides)
    return AdapterConfig(**base)


PRESETS = {"application": application_preset, "study": study_preset}


@dataclass(frozen=True)
class AdapterState:
    current: str
    smoothed: dict[str, dict[str, float]] | None = None
    window: tuple[tuple[str, float], ...] = ()

    @staticmethod
    def initial(config: AdapterConfig) -> "AdapterState":
        return AdapterState(current=config.initial_technique)


@dataclass(frozen=True)
class TargetScore:
    target_id: str
    normalized: dict[str, float]
    w: float
    a: float


@dataclass(frozen=True)
class FrameDecision:
    scores: dict[str, dict[str, float]]  # technique -> objective/overall
    optimal: str
    current: str  # technique in effect after this frame
    margin: float  # overall(optimal) - overall(previous current)
    switched: bool
    new_technique: str | None
    breakdown: dict[str, list[TargetScore]] = field(default_factory=dict)


def _normalized_arrays(
    technique: str,
    regions: list[ActivationRegion],
    ctx: ContextFrame,
    config: AdapterConfig,
) -> tuple[float, list[ActivationRegion], np.ndarray, np.ndarray, np.ndarray]:
    """Normalized speed/accuracy/comfort arrays over the selectable regions."""
    bounds = config.bounds
    fam = obj.score_familiarity(technique, config.familiarity)
    fam_n = bounds.familiarity.apply(fam)
    selectable = [r for r in regions if r.selectable]
    comforts = obj.score_comfort_batch(
        ctx.posture,
        ctx.frame,
        np.asarray([(r.aim_center.h, r.aim_center.v) for r in selectable]).reshape(-1, 2),
        config.arm,
        config.beta,
    )
    if not selectable:
        empty = np.zeros(0)
        return fam_n, selectable, empty, empty, empty
    a_arr = np.array([r.a for r in selectable])
    w_arr = np.array([r.w for r in selectable])
    boxes = np.array([r.box for r in selectable])
    speeds = obj.score_speed_batch(a_arr, w_arr)
    accuracies = obj.score_accuracy_batch(a_arr, w_arr, boxes, config.ed_params)

    def norm(b, raw):
        return np.clip((raw - b.s_min) / (b.s_max - b.s_min), 0.0, 1.0)

    return (
        fam_n,
        selectable,
        norm(bounds.speed, speeds),
        norm(bounds.accuracy, accuracies),
        norm(bounds.comfort, comforts),
    )


def score_technique_targets(
    technique: str,
    regions: list[ActivationRegion],
    ctx: ContextFrame,
    config: AdapterConfig,
) -> list[TargetScore]:
    """Normalized per-target objective vectors for one technique.

    Unselectable (empty-region) targets score 0 on speed, accuracy and
    comfort; familiarity is the technique constant regardless.
    """
    fam_n, selectable, speeds_n, accuracies_n, comforts_n = _normalized_arrays(
        technique, regions, ctx, config
    )
    normalized = {
        region.target_id: {
            "speed": float(speeds_n[k]),
            "accuracy": float(accuracies_n[k]),
            "comfort": float(comforts_n[k]),
            "familiarity": fam_n,
        }
        for k, region in enumerate(selectable)
    }
    out = []
    for region in regions:
        if not region.selectable:
            out.append(
                TargetScore(
                    region.target_id,
                    {"speed": 0.0, "accuracy": 0.0, "comfort": 0.0, "familiarity": fam_n},
                    0.0,
                    0.0,
                )
            )
            continue
        out.append(
            TargetScore(
                region.target_id, normalized[region.target_id], region.w, region.a
            )
        )
    return out


def _technique_aggregate(
    technique: str,
    regions: list[ActivationRegion],
    ctx: ContextFrame,
    config: AdapterConfig,
) -> dict[str, float] | None:
    """Aggregate objective means without per-target score objects.

    Matches aggregate(score_technique_targets(...)) up to float summation
    order; unselectable regions contribute zeros to the means.
    """
    if not regions:
        return None
    fam_n, _, speeds_n, accuracies_n, comforts_n = _normalized_arrays(
        technique, regions, ctx, config
    )
    n = len(regions)
    return {
        "speed": float(np.sum(speeds_n)) / n,
        "accuracy": float(np.sum(accuracies_n)) / n,
        "comfort": float(np.sum(comforts_n)) / n,
        "familiarity": fam_n,
    }


def aggregate(target_scores: list[TargetScore]) -> dict[str, float] | None:
    """Unweighted mean per objective; None when there are no targets."""
    if not target_scores:
        return None
    return {
        o: sum(t.normalized[o] for t in target_scores) / len(target_scores)
        for o in OBJECTIVES
    }


def smooth(
    aggregated: dict[str, float], previous: dict[str, float] | None, alpha: float
) -> dict[str, float]:
    """Exponential smoothing; the first frame initializes to the aggregate."""
    if previous is None:
        return dict(aggregated)
    return {
        o: alpha * aggregated[o] + (1.0 - alpha) * previous[o] for o in OBJECTIVES
    }


def overall_score(smoothed: dict[str, float], config: AdapterConfig) -> float:
    w = config.weights
    return sum(w[o] * smoothed[o] for o in OBJECTIVES)


def decide(
    state: AdapterState,
    smoothed: dict[str, dict[str, float]],
    config: AdapterConfig,
    breakdown: dict[str, list[TargetScore]] | None = None,
) -> tuple[FrameDecision, AdapterState]:
    """Weighted-sum argmax plus the n-of-w switching window.

    Ties prefer the current technique, then configuration order.  A switch
    clears the window, so no further switch can occur for n frames.
    """
    overalls = {t: overall_score(smoothed[t], config) for t in config.techniques}
    ranked = sorted(
        config.techniques,
        key=lambda t: (
            -overalls[t],
            0 if t == state.current else 1,
            config.techniques.index(t),
        ),
    )
    optimal = ranked[0]
    margin = overalls[optimal] - overalls[state.current]
    window = (state.window + ((optimal, margin),))[-config.window :]
    switched = False
    new_technique = None
    current = state.current
    if optimal != current:
        supporting = sum(
            1
            for (t, m) in window
            if t == optimal and m > config.margin_threshold
        )
        if supporting >= config.required:
            switched = True
            new_technique = optimal
            current = optimal
            window = ()
    new_state = AdapterState(current=current, smoothed=smoothed, window=window)
    scores = {
        t: {**smoothed[t], "overall": overalls[t]} for t in config.techniques
    }
    decision = FrameDecision(
        scores=scores,
        optimal=optimal,
        current=current,
        margin=margin,
        switched=switched,
        new_technique=new_technique,
        breakdown=breakdown or {},
    )
    return decision, new_state


def step(
    ctx: ContextFrame,
    technique_regions: dict[str, list[ActivationRegion]],
    config: AdapterConfig,
    state: AdapterState,
    with_breakdown: bool = False,
) -> tuple[FrameDecision, AdapterState]:
    """Full pipeline: score, normalize, aggregate, smooth, decide.

    An empty interaction space freezes the smoothed state and retains the
    current technique without touching the switching window.
    """
    missing = [t for t in config.techniques if t not in technique_regions]
    if missing:
        raise ValueError(f"missing regions for configured technique(s): {missing}")
    if not ctx.targets:
        if state.smoothed is None:
            scores = {
                t: {o: 0.0 for o in OBJECTIVES} | {"overall": 0.0}
                for t in config.techniques
            }
            decision = FrameDecision(
                scores=scores,
                optimal=state.current,
                current=state.current,
                margin=0.0,
                switched=False,
                new_technique=None,
            )
            return decision, state
        scores = {
            t: {**state.smoothed[t], "overall": overall_score(state.smoothed[t], config)}
            for t in config.techniques
        }
        decision = FrameDecision(
            scores=scores,
            optimal=state.current,
            current=state.current,
            margin=0.0,
            switched=False,
            new_technique=None,
        )
        return decision, state

    breakdown: dict[str, list[TargetScore]] = {}
    smoothed: dict[str, dict[str, float]] = {}
    for tech in config.techniques:
        if with_breakdown:
            target_scores = score_technique_targets(
                tech, technique_regions[tech], ctx, config
            )
            agg = aggregate(target_scores)
            breakdown[tech] = target_scores
        else:
            agg = _technique_aggregate(tech, technique_regions[tech], ctx, config)
        prev = state.smoothed.get(tech) if state.smoothed else None
        smoothed[tech] = smooth(agg, prev, config.alpha)
    return decide(state, smoothed, config, breakdown if with_breakdown else None)
