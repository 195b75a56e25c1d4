"""HTTP surface of the forced-choice evaluation service."""

from __future__ import annotations

import os

from fastapi import FastAPI, HTTPException, Query
from fastapi.staticfiles import StaticFiles

from .schemas import (DonePayload, ItemResult, JudgmentAck, JudgmentIn,
                      ResultsSummary, StimulusPayload)
from .store import JudgmentStore, reference_is_a


def create_app(store: JudgmentStore, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="orderlab forced-choice evaluation")
    app.state.store = store

    @app.get("/api/health")
    def health():
        return {"status": "ok", "items": len(store.pool)}

    @app.get("/api/items/next", response_model=StimulusPayload | DonePayload)
    def next_item(participant: str = Query(min_length=1)):
        if not store.pool:
            raise HTTPException(status_code=500, detail="no stimulus pool loaded")
        judged = len(store.judged_by(participant))
        item = store.next_item(participant)
        if item is None:
            return DonePayload(judged=judged, total=len(store.pool))
        ref_a = reference_is_a(item.item_id, store.seed)
        return StimulusPayload(
            item_id=item.item_id,
            context=item.context,
            option_a=item.reference if ref_a else item.variant,
            option_b=item.variant if ref_a else item.reference,
            judged=judged,
            total=len(store.pool),
        )

    @app.post("/api/judgments", response_model=JudgmentAck)
    def record_judgment(judgment: JudgmentIn):
        try:
            store.record(judgment.participant, judgment.item_id, judgment.choice)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return JudgmentAck(accepted=True, participant=judgment.participant,
                           item_id=judgment.item_id, choice=judgment.choice)

    @app.get("/api/results", response_model=ResultsSummary)
    def results():
        summary = store.summarize()
        summary["items"] = [ItemResult(**row) for row in summary["items"]]
        return ResultsSummary(**summary)

    if ui_dir and os.path.isdir(ui_dir):
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
