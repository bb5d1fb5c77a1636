"""Re-ranking algorithms: CP, XQ, FS, DM and the plain top-n baseline."""

from __future__ import annotations

from typing import Mapping

from popcal.data import Dataset
from popcal.itemknn import CandidateList
from popcal.partition import Partition, profile_distribution
from popcal.rerank.base import (
    RankedList,
    RerankConfig,
    normalized_scores,
    read_lists,
    top_n,
    write_lists,
)
from popcal.rerank.calibrated import cp_rerank
from popcal.rerank.divergence import js_divergence, kl_divergence
from popcal.rerank.fair import fs_rerank, minimum_protected
from popcal.rerank.flow import MinCostFlow, InfeasibleFlow, discrepancy, dm_rerank, uniform_target
from popcal.rerank.xquad import xq_rerank

ALGORITHMS = ("none", "cp", "xq", "fs", "dm")

__all__ = [
    "ALGORITHMS", "RankedList", "RerankConfig", "MinCostFlow", "InfeasibleFlow",
    "cp_rerank", "xq_rerank", "fs_rerank", "dm_rerank", "js_divergence", "kl_divergence",
    "minimum_protected", "discrepancy", "uniform_target", "normalized_scores",
    "top_n", "rerank_all", "read_lists", "write_lists",
]


def rerank_all(algo: str, cands: Mapping[str, CandidateList], train: Dataset, part: Partition,
               cfg: RerankConfig, target: Mapping[str, int] | None = None) -> dict[str, RankedList]:
    """Apply one re-ranker to every user's candidate list."""
    if algo == "none":
        return {u: top_n(c, min(cfg.n, len(c))) for u, c in cands.items()}
    if algo == "dm":
        return dm_rerank(cands, cfg, target)
    out = {}
    for u, c in cands.items():
        if algo == "cp":
            out[u] = cp_rerank(c, profile_distribution(train.profile(u), part), part, cfg)
        elif algo == "xq":
            out[u] = xq_rerank(c, profile_distribution(train.profile(u), part), part, cfg)
        elif algo == "fs":
            out[u] = fs_rerank(c, part, cfg)
        else:
            raise ValueError(f"unknown algorithm {algo!r}")
    return out
