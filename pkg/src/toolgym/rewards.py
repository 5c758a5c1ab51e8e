"""Trajectory reward computation.

Three components combine into the total:

    total = format_gate * (lambda_tool * tool_mean + lambda_acc * acc)

The format gate is the product of per-turn format flags: one malformed turn
anywhere zeroes the whole trajectory. Each attempted tool call earns a
hierarchical score in [0, 4] (encapsulation, then name validity, then the
fraction of correct parameter names, then the fraction of valid parameter
values); the tool component is the mean over tool-calling turns, 0 when
there are none. Accuracy is granted only for the final answer.

The adaptive variant is asymmetric: a correct answer earns the full reward
regardless of tool usage; an incorrect answer earns tool-quality credit
only, and an incorrect answer without any tool call earns nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvalidArgument
from .protocol import CallDiagnostics, Trajectory, ValidationReport


@dataclass(frozen=True)
class RewardWeights:
    lambda_tool: float = 2.0
    lambda_acc: float = 1.0
    acc_scale: float = 1.0
    adaptive: bool = False

    def __post_init__(self):
        if self.lambda_tool < 0 or self.lambda_acc < 0:
            raise InvalidArgument("reward weights must be >= 0")
        if self.lambda_tool == 0 and self.lambda_acc == 0:
            raise InvalidArgument("at least one reward weight must be positive")


@dataclass
class RewardBreakdown:
    format: int                      # 0 | 1, product of per-turn flags
    per_call_scores: list[float] = field(default_factory=list)
    tool: float = 0.0                # mean of per_call_scores, 0 when no calls
    acc: float = 0.0
    total: float = 0.0
    turn_count: int = 0              # number of tool-calling turns (T)

    def to_dict(self) -> dict:
        return {
            "format": self.format,
            "per_call_scores": list(self.per_call_scores),
            "tool": self.tool,
            "acc": self.acc,
            "total": self.total,
            "turn_count": self.turn_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RewardBreakdown":
        return cls(
            format=d["format"],
            per_call_scores=list(d["per_call_scores"]),
            tool=d["tool"],
            acc=d["acc"],
            total=d["total"],
            turn_count=d["turn_count"],
        )


def score_tool_call(diag: CallDiagnostics) -> float:
    """Hierarchical 0-4 score for one attempted tool call."""
    if not diag.wrapped:
        return 0.0
    if not diag.name_known:
        return 1.0
    total = diag.param_total
    if total == 0:
        return 4.0
    if diag.param_name_hits < total:
        return 2.0 + diag.param_name_hits / total
    return 3.0 + diag.param_value_hits / total


def trajectory_reward(
    traj: Trajectory,
    report: ValidationReport,
    answer_correct: bool,
    weights: RewardWeights,
) -> RewardBreakdown:
    """Full breakdown for one trajectory given its validation report."""
    fmt = 1 if report.all_formatted else 0
    per_call = [score_tool_call(d) for d in report.calls]
    t = len(per_call)
    tool = sum(per_call) / t if t else 0.0
    acc = weights.acc_scale if answer_correct else 0.0
    breakdown = RewardBreakdown(
        format=fmt, per_call_scores=per_call, tool=tool, acc=acc, turn_count=t
    )
    if weights.adaptive:
        breakdown.total = adaptive_total(breakdown, answer_correct, weights)
    else:
        breakdown.total = fmt * (weights.lambda_tool * tool + weights.lambda_acc * acc)
    return breakdown


def adaptive_total(
    breakdown: RewardBreakdown, answer_correct: bool, weights: RewardWeights
) -> float:
    """Asymmetric total: full credit when correct, tool credit otherwise."""
    fmt = breakdown.format
    if answer_correct:
        return fmt * (
            weights.lambda_tool * 4.0 + weights.lambda_acc * weights.acc_scale
        )
    if breakdown.turn_count >= 1:
        return fmt * weights.lambda_tool * breakdown.tool
    return 0.0
