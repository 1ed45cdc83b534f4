"""Dataset layer: episode containers, recorder, on-disk storage, corpus."""

from .corpus import (FULL_SCALE_TABLE, PlanCell, build_corpus, derive_seed,
                     iter_episodes, load_manifest, plan_from_table)
from .episode import (ACTION_DIM, CHUNK_SIZE, MAX_EPISODE_FRAMES,
                      MIN_EPISODE_FRAMES, ChunkSample, Episode, Frame,
                      chunk_episode, chunk_stage_info, denormalize_state,
                      normalize_state)
from .recorder import record_episode, replay_trace
from .storage import episodes_equal, load_episode, save_episode

__all__ = [
    "ACTION_DIM", "CHUNK_SIZE", "MAX_EPISODE_FRAMES", "MIN_EPISODE_FRAMES",
    "ChunkSample", "Episode", "Frame", "FULL_SCALE_TABLE", "PlanCell",
    "build_corpus", "chunk_episode", "chunk_stage_info", "denormalize_state",
    "derive_seed", "episodes_equal", "iter_episodes", "load_episode",
    "load_manifest", "normalize_state", "plan_from_table", "record_episode",
    "replay_trace", "save_episode",
]
