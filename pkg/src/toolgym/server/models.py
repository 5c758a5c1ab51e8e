"""Pydantic request/response models for the HTTP episode server."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from ..episodes import EpisodeConfig
from ..rewards import RewardWeights


class RewardConfigModel(BaseModel):
    lambda_tool: float = 2.0
    lambda_acc: float = 1.0
    acc_scale: float = 1.0
    adaptive: bool = False

    def to_core(self) -> RewardWeights:
        return RewardWeights(
            lambda_tool=self.lambda_tool,
            lambda_acc=self.lambda_acc,
            acc_scale=self.acc_scale,
            adaptive=self.adaptive,
        )


class EpisodeConfigModel(BaseModel):
    task: Literal["vsp_nav", "vsp_verify", "jigsaw", "guiqa_fixture"] = "vsp_nav"
    seed: int = 0
    size: int = Field(default=4, ge=3, le=9)
    hole_count: Optional[int] = None
    cell_px: int = Field(default=100, ge=10)
    source_px: int = Field(default=300, ge=30)
    gui_elements: int = Field(default=6, ge=2)
    reward: RewardConfigModel = Field(default_factory=RewardConfigModel)
    randomize_seed: Optional[int] = None
    max_turns: int = Field(default=10, ge=1)
    verify_require_goal: bool = True
    inline_images: bool = False

    def to_core(self) -> EpisodeConfig:
        return EpisodeConfig(
            task=self.task,
            seed=self.seed,
            size=self.size,
            hole_count=self.hole_count,
            cell_px=self.cell_px,
            source_px=self.source_px,
            gui_elements=self.gui_elements,
            reward=self.reward.to_core(),
            randomize_seed=self.randomize_seed,
            max_turns=self.max_turns,
            verify_require_goal=self.verify_require_goal,
            inline_images=self.inline_images,
        )


class GroupCreateModel(EpisodeConfigModel):
    n: int = Field(default=4, ge=1)


class StepRequest(BaseModel):
    text: str


class EpisodeHandle(BaseModel):
    id: str
    system_prompt: str
    user_prompt: str
    image_ids: list[str]
    config: dict
    ground_truth: dict
    images_base64: Optional[list[str]] = None  # populated when inline_images


class GroupHandles(BaseModel):
    episodes: list[EpisodeHandle]


class StepResponse(BaseModel):
    status: str
    observation: str
    new_image_id: Optional[str] = None
    breakdown: Optional[dict] = None
    answer_correct: Optional[bool] = None
    turn_index: int = 0
    format_ok: bool = True
    tool_ok: Optional[bool] = None
    new_image_base64: Optional[str] = None


class DeleteResponse(BaseModel):
    deleted: str
