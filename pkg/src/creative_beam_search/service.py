"""HTTP front door for the preference study.

The creation response is deliberately blind: it carries only the record
id and the two texts in display order, never which arm produced which.
Everything the operator needs (arms, overlap flags) lives in the log file.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .study import (
    AlreadyAnsweredError,
    Arm,
    RecordNotFoundError,
    StudyService,
    compute_stats,
    random_retention_probability,
)

RANDOM_RETENTION_BASELINE = float(random_retention_probability(4, 4))


class CreateComparisonIn(BaseModel):
    prompt: str


class PreferenceIn(BaseModel):
    choice: Literal["first", "second", "same"]


def create_app(service: StudyService, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="creative-beam-search study service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.post("/api/comparisons")
    def create_comparison(body: CreateComparisonIn):
        if not body.prompt.strip():
            raise HTTPException(status_code=400, detail="prompt must be non-empty")
        try:
            record = service.new_comparison(body.prompt)
        except Exception as exc:  # generation failure: nothing was persisted
            raise HTTPException(status_code=500, detail=f"generation failed: {exc}")
        first, second = (
            (record.cbs_text, record.std_text)
            if record.first_shown is Arm.CBS
            else (record.std_text, record.cbs_text)
        )
        return {"id": record.id, "first": first, "second": second}

    @app.post("/api/comparisons/{record_id}/preference")
    def submit_preference(record_id: str, body: PreferenceIn):
        try:
            service.submit_preference(record_id, body.choice)
        except RecordNotFoundError:
            raise HTTPException(status_code=404, detail=f"no comparison {record_id}")
        except AlreadyAnsweredError:
            raise HTTPException(status_code=409, detail="preference already recorded")
        return {"status": "recorded"}

    @app.get("/api/stats")
    def stats():
        answered = service.answered_records()
        table = compute_stats(answered).to_dict() if answered else None
        return {
            "n": len(answered),
            "table": table,
            "random_retention_baseline": RANDOM_RETENTION_BASELINE,
        }

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
