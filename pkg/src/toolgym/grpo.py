"""Group-relative policy-optimization arithmetic, model-free.

Operates on supplied rewards and per-token log-probabilities only:

    A_i        = (r_i - mean(r)) / max(std(r), eps)        population std
    objective  = sum_i sum_j min(m A_i, clip(m, 1-e, 1+e) A_i) / (G |tau_i|)
                 - beta * KL
    m          = exp(logp_new - logp_old)
    KL         uses the non-negative estimator r - log r - 1 with
                 r = exp(logp_ref - logp_new), same 1/(G |tau_i|) weighting.

Sums use math.fsum, so results are deterministic regardless of iteration
chunking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import DegenerateGroup, InvalidArgument, MissingReference, ShapeMismatch


@dataclass(frozen=True)
class RewardGroup:
    rewards: tuple[float, ...]

    def __init__(self, rewards: Sequence[float]):
        object.__setattr__(self, "rewards", tuple(float(r) for r in rewards))

    @property
    def size(self) -> int:
        return len(self.rewards)


@dataclass(frozen=True)
class GrpoConfig:
    clip_eps: float = 0.2
    kl_coef: float = 0.0
    std_epsilon: float = 1e-8

    def __post_init__(self):
        if not (0.0 < self.clip_eps < 1.0):
            raise InvalidArgument(f"clip_eps must be in (0, 1), got {self.clip_eps}")
        if self.kl_coef < 0:
            raise InvalidArgument(f"kl_coef must be >= 0, got {self.kl_coef}")
        if self.std_epsilon <= 0:
            raise InvalidArgument("std_epsilon must be positive")


@dataclass
class TokenBatch:
    """Per-trajectory token log-probabilities under the relevant policies."""

    logp_new: list[list[float]]
    logp_old: list[list[float]]
    logp_ref: Optional[list[list[float]]] = None

    def __post_init__(self):
        if len(self.logp_new) != len(self.logp_old):
            raise ShapeMismatch("logp_new and logp_old differ in trajectory count")
        for i, (new, old) in enumerate(zip(self.logp_new, self.logp_old)):
            if len(new) != len(old):
                raise ShapeMismatch(f"trajectory {i}: paired token lengths differ")
            if len(new) == 0:
                raise ShapeMismatch(f"trajectory {i} is empty")
        if self.logp_ref is not None:
            if len(self.logp_ref) != len(self.logp_new):
                raise ShapeMismatch("logp_ref differs in trajectory count")
            for i, (new, ref) in enumerate(zip(self.logp_new, self.logp_ref)):
                if len(new) != len(ref):
                    raise ShapeMismatch(f"trajectory {i}: reference lengths differ")

    @property
    def size(self) -> int:
        return len(self.logp_new)


def group_advantages(group: RewardGroup, cfg: GrpoConfig = GrpoConfig()) -> list[float]:
    """Normalize rewards against their group's mean and population std.

    All-equal groups yield all-zero advantages (the std floor guards the
    division; the zero numerator does the rest).
    """
    g = group.size
    if g < 2:
        raise DegenerateGroup(f"group size must be >= 2, got {g}")
    mean = math.fsum(group.rewards) / g
    var = math.fsum((r - mean) ** 2 for r in group.rewards) / g
    denom = max(math.sqrt(var), cfg.std_epsilon)
    return [(r - mean) / denom for r in group.rewards]


def clipped_surrogate(
    batch: TokenBatch,
    advantages: Sequence[float],
    cfg: GrpoConfig = GrpoConfig(),
) -> float:
    """Value of the clipped surrogate objective over the batch."""
    if len(advantages) != batch.size:
        raise ShapeMismatch(
            f"{batch.size} trajectories but {len(advantages)} advantages"
        )
    g = batch.size
    terms = []
    for adv, new, old in zip(advantages, batch.logp_new, batch.logp_old):
        weight = 1.0 / (g * len(new))
        for lp_new, lp_old in zip(new, old):
            ratio = math.exp(lp_new - lp_old)
            clipped = min(max(ratio, 1.0 - cfg.clip_eps), 1.0 + cfg.clip_eps)
            terms.append(weight * min(ratio * adv, clipped * adv))
    value = math.fsum(terms)
    if cfg.kl_coef > 0:
        value -= cfg.kl_coef * kl_penalty(batch)
    return value


def kl_penalty(batch: TokenBatch) -> float:
    """Non-negative KL estimate of new vs reference policy."""
    if batch.logp_ref is None:
        raise MissingReference("token batch carries no reference log-probs")
    g = batch.size
    terms = []
    for new, ref in zip(batch.logp_new, batch.logp_ref):
        weight = 1.0 / (g * len(new))
        for lp_new, lp_ref in zip(new, ref):
            log_ratio = lp_ref - lp_new
            terms.append(weight * (math.exp(log_ratio) - log_ratio - 1.0))
    return math.fsum(terms)
