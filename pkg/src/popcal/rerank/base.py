"""Shared types and helpers for the re-rankers."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from popcal.itemknn import CandidateList

_log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RerankConfig:
    lam: float = 0.0
    n: int = 10
    m: int = 100
    fs_p: float = 0.5
    fs_alpha: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must be in [0, 1]")
        if self.n <= 0 or self.m <= 0 or self.n > self.m:
            raise ValueError("need 0 < n <= m")

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha1(blob).hexdigest()[:10]


@dataclass(frozen=True)
class RankedList:
    user: str
    items: tuple[str, ...]
    provenance: str = field(default="", compare=False)

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)


def normalized_scores(cands: CandidateList) -> np.ndarray:
    """Min-max normalise candidate scores to [0, 1]; constant scores map to 1."""
    s = np.asarray(cands.scores, dtype=float)
    if len(s) == 0:
        return s
    lo, hi = s.min(), s.max()
    if hi - lo <= 0:
        return np.ones_like(s)
    return (s - lo) / (hi - lo)


def clip_n(cands: CandidateList, n: int) -> int:
    if len(cands) == 0:
        raise ValueError(f"user {cands.user}: empty candidate list")
    if n > len(cands):
        _log.warning("user %s: only %d candidates for n=%d", cands.user, len(cands), n)
        return len(cands)
    return n


def top_n(cands: CandidateList, n: int, provenance: str = "none") -> RankedList:
    return RankedList(cands.user, tuple(cands.items[:n]), provenance)


def write_lists(lists: dict[str, RankedList], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for u in sorted(lists):
            for rank, item in enumerate(lists[u].items, start=1):
                f.write(f"{u}\t{item}\t{rank}\n")


def read_lists(path: str | Path) -> dict[str, RankedList]:
    rows: dict[str, list[tuple[int, str]]] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                u, i, rank = line.rstrip("\r\n").split("\t")
                rows.setdefault(u, []).append((int(rank), i))
    return {u: RankedList(u, tuple(i for _, i in sorted(r))) for u, r in rows.items()}
