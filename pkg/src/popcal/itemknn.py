"""Item-based k-nearest-neighbour collaborative filtering."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from popcal.data import Dataset

_log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CandidateList:
    user: str
    items: tuple[str, ...]
    scores: tuple[float, ...]

    def __len__(self):
        return len(self.items)

    def top(self, n: int) -> list[str]:
        return list(self.items[:n])


@dataclass(frozen=True, eq=False)
class ItemKNN:
    """Fitted item-item similarity model.

    ``neighbors`` is a CSR matrix whose row ``i`` holds the (at most ``k``)
    retained neighbours of item ``i`` with their similarity. Similarity values
    are symmetric; neighbour sets need not be.
    """

    items: tuple[str, ...]
    neighbors: sp.csr_matrix
    k: int
    shrinkage: float

    def similarity(self, a: str, b: str) -> float:
        ia, ib = self.items.index(a), self.items.index(b)
        return float(self.neighbors[ia, ib])


def _rating_matrix(train: Dataset, items: list[str], users: list[str]) -> sp.csr_matrix:
    uidx = {u: n for n, u in enumerate(users)}
    iidx = {i: n for n, i in enumerate(items)}
    f = train.frame
    rows = f["user"].map(uidx).to_numpy()
    cols = f["item"].map(iidx).to_numpy()
    return sp.csr_matrix((f["rating"].to_numpy(float), (rows, cols)), shape=(len(users), len(items)))


def cosine_similarity(train: Dataset, shrinkage: float = 10.0) -> tuple[list[str], np.ndarray]:
    """Dense item-item cosine similarity with co-rater shrinkage, zero diagonal."""
    items, users = train.items, train.users
    R = _rating_matrix(train, items, users).tocsc()
    B = R.copy()
    B.data[:] = 1.0
    dots = (R.T @ R).toarray()
    co = (B.T @ B).toarray()
    norms = np.sqrt(np.asarray(R.multiply(R).sum(axis=0)).ravel())
    denom = np.outer(norms, norms)
    with np.errstate(divide="ignore", invalid="ignore"):
        sim = np.where(denom > 0, dots / denom, 0.0)
        if shrinkage > 0:
            sim = sim * co / (co + shrinkage)
    np.fill_diagonal(sim, 0.0)
    return items, sim


def fit(train: Dataset, k: int = 40, shrinkage: float = 10.0) -> ItemKNN:
    """Fit cosine item-KNN, keeping the top ``k`` neighbours of each item."""
    if len(train) == 0:
        raise ValueError("empty train set")
    if k <= 0:
        raise ValueError("k must be positive")
    items, sim = cosine_similarity(train, shrinkage)
    n = len(items)
    rows, cols, vals = [], [], []
    for i in range(n):
        row = sim[i]
        nz = np.flatnonzero(row)
        if len(nz) > k:
            # largest similarity first, lower index on ties
            order = np.lexsort((nz, -row[nz]))
            nz = np.sort(nz[order[:k]])
        rows.extend([i] * len(nz))
        cols.extend(nz)
        vals.extend(row[nz])
    W = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return ItemKNN(tuple(items), W, k, shrinkage)


def score_all(model: ItemKNN, train: Dataset, users: Iterable[str] | None = None):
    """Weighted-average predictions for ``users`` over all model items.

    Returns ``(users, scores, scored)`` with dense ``scores`` and a boolean
    ``scored`` mask marking items that share at least one neighbour with the
    user's profile.
    """
    users = list(train.users if users is None else users)
    unknown = set(train.items) - set(model.items)
    if unknown:
        train = train.restrict_items(model.items)
    if users != train.users:
        train = Dataset(train.frame[train.frame["user"].isin(set(users))])
    R = _rating_matrix(train, list(model.items), users)
    ind = R.copy()
    ind.data[:] = 1.0
    W = model.neighbors
    num = (R @ W.T).toarray()
    den = (ind @ abs(W).T).toarray()
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = np.where(den > 0, num / den, 0.0)
    scored = (den > 0) & (ind.toarray() == 0)
    return users, scores, scored


def recommend_all(model: ItemKNN, train: Dataset, m: int = 100,
                  users: Iterable[str] | None = None) -> dict[str, CandidateList]:
    """Top-``m`` unseen items per user.

    Ties on score go to the more popular item (train count), then the lower
    item id.
    """
    users, scores, scored = score_all(model, train, users)
    items = np.array(model.items)
    counts = train.item_counts.reindex(list(model.items)).fillna(0).to_numpy()
    id_rank = np.arange(len(items))  # model.items is sorted
    out = {}
    for row, u in enumerate(users):
        if not train.profile(u):
            raise ValueError(f"user {u} has an empty profile")
        cand = np.flatnonzero(scored[row])
        # rounding keeps float noise from overriding the popularity tie-break
        s = np.round(scores[row, cand], 12)
        order = np.lexsort((id_rank[cand], -counts[cand], -s))[:m]
        chosen = cand[order]
        if len(chosen) < m:
            _log.debug("user %s: only %d scoreable items", u, len(chosen))
        out[u] = CandidateList(u, tuple(str(i) for i in items[chosen]), tuple(float(x) for x in scores[row, chosen]))
    return out


def recommend(model: ItemKNN, u: str, train: Dataset, m: int = 100) -> CandidateList:
    if u not in train.profiles():
        raise ValueError(f"user {u} has an empty profile")
    return recommend_all(model, train, m, [u])[u]


def write_candidates(cands: dict[str, CandidateList], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for u in sorted(cands):
            c = cands[u]
            for rank, (i, s) in enumerate(zip(c.items, c.scores), start=1):
                f.write(f"{u}\t{i}\t{s:.17g}\t{rank}\n")


def read_candidates(path: str | Path) -> dict[str, CandidateList]:
    rows: dict[str, list[tuple[int, str, float]]] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            u, i, s, rank = line.rstrip("\r\n").split("\t")
            rows.setdefault(u, []).append((int(rank), i, float(s)))
    out = {}
    for u, entries in rows.items():
        entries.sort()
        out[u] = CandidateList(u, tuple(e[1] for e in entries), tuple(e[2] for e in entries))
    return out
