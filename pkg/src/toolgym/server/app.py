"""HTTP episode server: FastAPI wiring over the EpisodeService core.

Endpoints (error bodies always carry {"error_kind": ...}):

    POST   /episodes                 create one episode
    POST   /episodes/group           create n episodes over the same instance
    POST   /episodes/{id}/step       advance one turn with raw policy text
    GET    /episodes/{id}            full snapshot (turns, breakdown, truth)
    DELETE /episodes/{id}            drop an episode and its images
    GET    /images/{image_id}        PNG bytes
    GET    /tools?seed=              canonical or seed-randomized schemas
    GET    /metrics                  service counters
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from ..episodes import EpisodeService, EpisodeState
from ..errors import ToolGymError
from .models import (
    DeleteResponse,
    EpisodeConfigModel,
    EpisodeHandle,
    GroupCreateModel,
    GroupHandles,
    StepRequest,
    StepResponse,
)

_STATUS_BY_KIND = {
    "NoSuchEpisode": 404,
    "EpisodeFinished": 409,
    "Busy": 409,
    "InfeasibleConfig": 400,
    "InvalidArgument": 400,
}


def _handle(service: EpisodeService, state: EpisodeState) -> EpisodeHandle:
    return EpisodeHandle(
        id=state.id,
        system_prompt=state.system_prompt,
        user_prompt=state.user_prompt,
        image_ids=list(state.image_ids),
        config=state.config.to_dict(),
        ground_truth=state.ground_truth,
        images_base64=(
            service.images_base64(state) if state.config.inline_images else None
        ),
    )


def create_app(service: Optional[EpisodeService] = None) -> FastAPI:
    app = FastAPI(title="toolgym", version="0.1.0")
    app.state.service = service or EpisodeService()

    @app.exception_handler(ToolGymError)
    async def toolgym_error_handler(request: Request, exc: ToolGymError):
        status = _STATUS_BY_KIND.get(exc.error_kind, 400)
        return JSONResponse(
            status_code=status,
            content={"error_kind": exc.error_kind, "detail": exc.message},
        )

    svc = lambda: app.state.service  # noqa: E731

    @app.post("/episodes", response_model=EpisodeHandle)
    def create_episode(cfg: EpisodeConfigModel):
        service = svc()
        return _handle(service, service.create_episode(cfg.to_core()))

    @app.post("/episodes/group", response_model=GroupHandles)
    def create_group(cfg: GroupCreateModel):
        service = svc()
        states = service.create_group(cfg.to_core(), cfg.n)
        return GroupHandles(episodes=[_handle(service, s) for s in states])

    @app.post("/episodes/{episode_id}/step", response_model=StepResponse)
    def step(episode_id: str, body: StepRequest):
        outcome = svc().step(episode_id, body.text)
        return StepResponse(
            status=outcome.status,
            observation=outcome.observation,
            new_image_id=outcome.new_image_id,
            breakdown=outcome.breakdown.to_dict() if outcome.breakdown else None,
            answer_correct=outcome.answer_correct,
            turn_index=outcome.turn_index,
            format_ok=outcome.format_ok,
            tool_ok=outcome.tool_ok,
            new_image_base64=outcome.new_image_base64,
        )

    @app.get("/episodes/{episode_id}")
    def get_episode(episode_id: str):
        return svc().snapshot(episode_id)

    @app.delete("/episodes/{episode_id}", response_model=DeleteResponse)
    def delete_episode(episode_id: str):
        svc().delete_episode(episode_id)
        return DeleteResponse(deleted=episode_id)

    @app.get("/images/{image_id}")
    def get_image(image_id: str):
        return Response(content=svc().get_image(image_id), media_type="image/png")

    @app.get("/tools")
    def list_tools(seed: Optional[int] = None):
        return {"tools": svc().list_tools(seed)}

    @app.get("/metrics")
    def metrics():
        return svc().metrics()

    return app
