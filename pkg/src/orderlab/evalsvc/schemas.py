"""Wire models for the forced-choice judgment service.

StimulusPayload deliberately has no field that could reveal which option
is the corpus reference; that assignment lives only server-side.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class StimulusPayload(BaseModel):
    item_id: str
    context: str
    option_a: str
    option_b: str
    judged: int
    total: int
    done: bool = False


class DonePayload(BaseModel):
    done: bool = True
    judged: int
    total: int


class JudgmentIn(BaseModel):
    participant: str = Field(min_length=1)
    item_id: str
    choice: str


class JudgmentAck(BaseModel):
    accepted: bool
    participant: str
    item_id: str
    choice: str


class ItemResult(BaseModel):
    item_id: str
    votes_for_reference: int
    votes_total: int
    human_label: int | None
    model_chose_reference: bool


class ResultsSummary(BaseModel):
    n_items: int
    n_judged_items: int
    n_judgments: int
    items: list[ItemResult]
    human_corpus_pct: float | None
    model_corpus_pct: float | None
    model_human_pct: float | None
    pearson_model_human: float | None
    pearson_model_corpus: float | None
