"""Stimulus pool and crash-safe judgment log for the forced-choice task.

Judgments persist as an append-only NDJSON log, fsynced before the request
is acknowledged and replayed on startup; the latest record per
(participant, item) wins.  Option A/B assignment is a deterministic
function of (item id, service seed) so restarts and concurrent
participants always see the same presentation.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass

from ..analysis import pearson
from ..rng import SplitMix64


@dataclass(frozen=True)
class StimulusItem:
    item_id: str
    context: str
    reference: str
    variant: str
    model_prediction: str  # "reference" or "variant"


def load_pool(lines) -> list[StimulusItem]:
    """Parse the stimulus file: item_id, context, reference, variant, model_prediction."""
    items = []
    seen = set()
    for row_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise ValueError("stimulus row %d: expected 5 columns, got %d"
                             % (row_no, len(parts)))
        item_id, context, reference, variant, pred = parts
        if item_id in seen:
            raise ValueError("duplicate item id %r" % item_id)
        if pred not in ("reference", "variant"):
            raise ValueError("stimulus row %d: bad model_prediction %r" % (row_no, pred))
        if reference == variant:
            raise ValueError("stimulus row %d: options are identical" % row_no)
        seen.add(item_id)
        items.append(StimulusItem(item_id, context, reference, variant, pred))
    items.sort(key=lambda it: it.item_id)
    return items


def reference_is_a(item_id: str, seed: int) -> bool:
    """Deterministic A/B assignment for an item under the service seed."""
    return SplitMix64(seed, "ab/" + item_id).next_u64() % 2 == 0


class JudgmentStore:
    """Replayed state + serialized appends over the NDJSON log."""

    def __init__(self, pool: list[StimulusItem], log_path: str, seed: int = 0):
        self.pool = pool
        self.by_id = {item.item_id: item for item in pool}
        self.log_path = log_path
        self.seed = seed
        self._lock = threading.Lock()
        # latest choice per (participant, item): "A" or "B"
        self.choices: dict[tuple[str, str], str] = {}
        self._replay()

    def _replay(self) -> None:
        if not os.path.exists(self.log_path):
            return
        with open(self.log_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                if rec["item_id"] in self.by_id:
                    self.choices[(rec["participant"], rec["item_id"])] = rec["choice"]

    def record(self, participant: str, item_id: str, choice: str) -> None:
        if item_id not in self.by_id:
            raise KeyError("unknown item %r" % item_id)
        if choice not in ("A", "B"):
            raise ValueError("choice must be 'A' or 'B', got %r" % choice)
        rec = {"participant": participant, "item_id": item_id,
               "choice": choice, "ts": time.time()}
        with self._lock:
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            self.choices[(participant, item_id)] = choice

    def snapshot(self) -> dict[tuple[str, str], str]:
        """Point-in-time copy of the choice map; safe under concurrent appends."""
        with self._lock:
            return dict(self.choices)

    def judged_by(self, participant: str) -> set[str]:
        return {iid for (pid, iid) in self.snapshot() if pid == participant}

    def next_item(self, participant: str) -> StimulusItem | None:
        done = self.judged_by(participant)
        for item in self.pool:  # pool is sorted by item id
            if item.item_id not in done:
                return item
        return None

    def chose_reference(self, item_id: str, choice: str) -> bool:
        ref_a = reference_is_a(item_id, self.seed)
        return (choice == "A") == ref_a

    def summarize(self) -> dict:
        return summarize_choices(self.pool, self.snapshot(), self.seed)


def summarize_choices(pool: list[StimulusItem],
                      choices: dict[tuple[str, str], str],
                      seed: int) -> dict:
    """Vote counts, majority labels, agreement percentages and correlations.

    The human label of an item is 1 iff strictly more than half of its
    votes chose the reference.  Correlations use the A/B encoding (did the
    chooser pick option A) so the corpus side is not a constant vector.
    """
    items = []
    model_ref: list[bool] = []
    human_labels: list[int] = []
    # A/B-encoded indicator vectors over judged items
    ref_a_vec: list[float] = []
    model_a_vec: list[float] = []
    human_a_vec: list[float] = []
    n_judgments = 0
    for item in pool:
        votes = [c for (pid, iid), c in choices.items() if iid == item.item_id]
        n_judgments += len(votes)
        ref_a = reference_is_a(item.item_id, seed)
        ref_choice = "A" if ref_a else "B"
        votes_ref = sum(1 for c in votes if c == ref_choice)
        chose_ref = item.model_prediction == "reference"
        label = None
        if votes:
            label = 1 if votes_ref * 2 > len(votes) else 0
            human_labels.append(label)
            model_ref.append(chose_ref)
            ref_a_vec.append(1.0 if ref_a else 0.0)
            model_a_vec.append(1.0 if chose_ref == ref_a else 0.0)
            majority_a = sum(1 for c in votes if c == "A") * 2 > len(votes)
            human_a_vec.append(1.0 if majority_a else 0.0)
        items.append({
            "item_id": item.item_id,
            "votes_for_reference": votes_ref,
            "votes_total": len(votes),
            "human_label": label,
            "model_chose_reference": chose_ref,
        })
    n_judged = len(human_labels)
    pct = lambda xs: 100.0 * sum(xs) / len(xs) if xs else None  # noqa: E731
    summary = {
        "n_items": len(pool),
        "n_judged_items": n_judged,
        "n_judgments": n_judgments,
        "items": items,
        # the corpus label of every item is "reference", so agreement with the
        # corpus is the rate at which the judge (human or model) chose it
        "human_corpus_pct": pct([h == 1 for h in human_labels]),
        "model_corpus_pct": pct([m for m in model_ref]),
        "model_human_pct": pct([int(m) == h for m, h in zip(model_ref, human_labels)]),
        "pearson_model_human": pearson(model_a_vec, human_a_vec) if n_judged >= 2 else None,
        "pearson_model_corpus": pearson(model_a_vec, ref_a_vec) if n_judged >= 2 else None,
    }
    return summary


def replay_log(pool: list[StimulusItem], log_path: str) -> dict[tuple[str, str], str]:
    """Offline reconstruction of the latest-wins choice map from the raw log."""
    ids = {item.item_id for item in pool}
    choices: dict[tuple[str, str], str] = {}
    if os.path.exists(log_path):
        with open(log_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    rec = json.loads(line)
                    if rec["item_id"] in ids:
                        choices[(rec["participant"], rec["item_id"])] = rec["choice"]
    return choices
