from .app import create_app
from .store import (JudgmentStore, StimulusItem, load_pool, reference_is_a,
                    replay_log, summarize_choices)

__all__ = [
    "create_app", "JudgmentStore", "StimulusItem", "load_pool",
    "reference_is_a", "replay_log", "summarize_choices",
]
