"""Personalised long-tail promotion in the style of xQuAD.

Items are either head (``H``) or long tail (``M`` and ``T`` together). A
category earns its propensity-weighted bonus only until the list contains an
item from it.
"""

from __future__ import annotations

import numpy as np

from popcal.itemknn import CandidateList
from popcal.partition import Partition
from popcal.rerank.base import RankedList, RerankConfig, clip_n, normalized_scores


def head_tail_propensity(profile_dist, part: Partition) -> np.ndarray:
    """Collapse an H/M/T distribution to (head, long tail)."""
    p = np.asarray(profile_dist, dtype=float)
    head = part.groups.index("H")
    return np.array([p[head], p.sum() - p[head]])


def xq_rerank(cands: CandidateList, profile_dist, part: Partition, cfg: RerankConfig) -> RankedList:
    n = clip_n(cands, cfg.n)
    prop = head_tail_propensity(profile_dist, part)
    rel = normalized_scores(cands)
    is_tail = np.array([part[i] != "H" for i in cands.items], dtype=int)
    # stable: equal scores keep the base recommender's order
    order = sorted(range(len(cands)), key=lambda j: -rel[j])

    covered = np.zeros(2, dtype=bool)
    chosen = []
    remaining = list(order)
    for _ in range(n):
        best, best_val = None, -np.inf
        for j in remaining:
            c = is_tail[j]
            bonus = 0.0 if covered[c] else prop[c]
            val = (1.0 - cfg.lam) * rel[j] + cfg.lam * bonus
            if val > best_val:
                best, best_val = j, val
        chosen.append(best)
        remaining.remove(best)
        covered[is_tail[best]] = True
    return RankedList(cands.user, tuple(cands.items[j] for j in chosen), f"xq:{cfg.digest()}")
