"""Calibrated popularity re-ranking.

Greedy maximum-marginal-relevance selection that trades summed normalised
relevance against the Jensen-Shannon divergence between the user's profile
popularity distribution and the popularity distribution of the list.
"""

from __future__ import annotations

import math

from popcal.itemknn import CandidateList
from popcal.partition import Partition
from popcal.rerank.base import RankedList, RerankConfig, clip_n, normalized_scores
from popcal.rerank.divergence import js_divergence_small


def objective(rel_sum: float, group_counts, target, lam: float) -> float:
    """``(1 - lam) * rel_sum - lam * JS(target, list distribution)``."""
    size = sum(group_counts)
    q = [c / size for c in group_counts]
    return (1.0 - lam) * rel_sum - lam * js_divergence_small(target, q)


def cp_rerank(cands: CandidateList, profile_dist, part: Partition, cfg: RerankConfig) -> RankedList:
    """Greedily build a size-``n`` list calibrated to ``profile_dist``.

    At each step every remaining candidate is scored by the objective of the
    list extended with it; the best one is appended. Ties go to the higher
    normalised score, then to the earlier candidate.
    """
    n = clip_n(cands, cfg.n)
    target = [float(x) for x in profile_dist]
    rel = normalized_scores(cands).tolist()
    groups = [part.index(i) for i in cands.items]
    k = len(part.groups)
    # stable: equal scores keep the base recommender's order
    order = sorted(range(len(cands)), key=lambda j: -rel[j])

    counts = [0] * k
    rel_sum = 0.0
    chosen: list[int] = []
    remaining = list(order)
    for _ in range(n):
        best, best_val = None, -math.inf
        for j in remaining:
            counts[groups[j]] += 1
            val = objective(rel_sum + rel[j], counts, target, cfg.lam)
            counts[groups[j]] -= 1
            if val > best_val:
                best, best_val = j, val
        chosen.append(best)
        remaining.remove(best)
        counts[groups[best]] += 1
        rel_sum += rel[best]
    return RankedList(cands.user, tuple(cands.items[j] for j in chosen), f"cp:{cfg.digest()}")
