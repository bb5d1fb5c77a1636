"""Ranked group fairness re-ranking (FA*IR style).

Long-tail items (``M`` and ``T``) are the protected group. A binomial test
fixes, for every prefix length, the minimum number of protected items the
prefix must contain; the two score-ordered queues are merged so that every
prefix passes.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy.stats import binom

from popcal.itemknn import CandidateList
from popcal.partition import Partition
from popcal.rerank.base import RankedList, RerankConfig, clip_n

_log = logging.getLogger(__name__)


def minimum_protected(n: int, p: float, alpha: float) -> np.ndarray:
    """Minimum protected count for prefixes 1..n.

    Entry ``j - 1`` is the smallest ``t`` with ``P(X <= t) > alpha`` for
    ``X ~ Binomial(j, p)``: fewer protected items than that would be
    rejected at significance ``alpha``.
    """
    if not 0 < p < 1:
        raise ValueError("p must be in (0, 1)")
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    table = np.zeros(n, dtype=int)
    for j in range(1, n + 1):
        t = 0
        # the tolerance keeps exact ties such as P(X <= 0) = 0.05 = alpha on the
        # rejecting side despite float rounding
        while binom.cdf(t, j, p) <= alpha + 1e-12:
            t += 1
        table[j - 1] = t
    return table


def fs_rerank(cands: CandidateList, part: Partition, cfg: RerankConfig) -> RankedList:
    n = clip_n(cands, cfg.n)
    need = minimum_protected(n, cfg.fs_p, cfg.fs_alpha)
    # candidates arrive score-sorted, so each queue is too
    protected = [i for i in cands.items if part[i] != "H"]
    unprotected = [i for i in cands.items if part[i] == "H"]
    rank = {i: pos for pos, i in enumerate(cands.items)}

    out: list[str] = []
    n_prot = 0
    pi = ui = 0
    short = False
    for j in range(n):
        must_protect = n_prot < need[j]
        take_prot = False
        if pi < len(protected) and (must_protect or ui >= len(unprotected)):
            take_prot = True
        elif pi < len(protected) and ui < len(unprotected):
            take_prot = rank[protected[pi]] < rank[unprotected[ui]]
        elif must_protect:
            short = True
        if take_prot:
            out.append(protected[pi])
            pi += 1
            n_prot += 1
        else:
            out.append(unprotected[ui])
            ui += 1
    if short:
        _log.warning("user %s: not enough protected candidates to satisfy the fairness table", cands.user)
    return RankedList(cands.user, tuple(out), f"fs:{cfg.digest()}")
