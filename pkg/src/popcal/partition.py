"""Popularity groups for items, suppliers and users.

Items and suppliers are split into head/mid/tail groups by their share of
train ratings; users are split into three equal bins by how strongly their
profile leans towards head items.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from popcal.data import Dataset, SupplierMap

ITEM_GROUPS = ("H", "M", "T")
SUPPLIER_GROUPS = ("S1", "S2", "S3")
USER_GROUPS = ("G1", "G2", "G3")


@dataclass(frozen=True)
class Partition:
    """Assignment of entities to ordered popularity groups."""

    groups: tuple[str, ...]
    assignment: dict[str, str]
    rating_share: dict[str, float]

    def __getitem__(self, key: str) -> str:
        return self.assignment[key]

    def __contains__(self, key: str) -> bool:
        return key in self.assignment

    def members(self, label: str) -> list[str]:
        return sorted(k for k, v in self.assignment.items() if v == label)

    def index(self, key: str) -> int:
        return self.groups.index(self.assignment[key])

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for key in sorted(self.assignment):
                f.write(f"{key}\t{self.assignment[key]}\n")

    @classmethod
    def read(cls, path: str | Path, groups: Sequence[str], shares: Mapping[str, float] | None = None) -> "Partition":
        assignment = {}
        with open(path, encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    key, label = line.rstrip("\r\n").split("\t")
                    assignment[key] = label
        shares = dict(shares) if shares else {g: float("nan") for g in groups}
        return cls(tuple(groups), assignment, shares)


# Item and supplier partitions share a representation.
PopularityPartition = Partition
SupplierPartition = Partition


@dataclass(frozen=True)
class UserGroups:
    assignment: dict[str, str]
    sizes: tuple[int, int, int]
    groups: tuple[str, ...] = USER_GROUPS

    def __getitem__(self, user: str) -> str:
        return self.assignment[user]

    def members(self, label: str) -> list[str]:
        return sorted(u for u, g in self.assignment.items() if g == label)

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for u in sorted(self.assignment):
                f.write(f"{u}\t{self.assignment[u]}\n")

    @classmethod
    def read(cls, path: str | Path) -> "UserGroups":
        assignment = {}
        with open(path, encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    u, g = line.rstrip("\r\n").split("\t")
                    assignment[u] = g
        sizes = tuple(sum(1 for g in assignment.values() if g == lab) for lab in USER_GROUPS)
        return cls(assignment, sizes)


def _check_shares(head_share, tail_share):
    if not (head_share > 0 and tail_share > 0 and head_share + tail_share < 1):
        raise ValueError("need 0 < head_share, tail_share and head_share + tail_share < 1")


def partition_counts(counts: Mapping[str, float], labels: Sequence[str],
                     head_share: float = 0.2, tail_share: float = 0.2) -> Partition:
    """Split entities into three groups by rating count.

    Entities are ordered by count descending, then id ascending. The head is
    the shortest prefix holding at least ``head_share`` of all ratings; the
    tail is the longest suffix holding at most ``tail_share``; the rest is the
    middle group.
    """
    _check_shares(head_share, tail_share)
    if not counts:
        raise ValueError("no ratings to partition")
    order = sorted(counts, key=lambda k: (-counts[k], k))
    c = np.array([counts[k] for k in order], dtype=float)
    total = c.sum()
    if total <= 0:
        raise ValueError("no ratings to partition")
    n = len(order)
    share = c / total
    cum = np.cumsum(share)
    # small epsilon so exact 20% boundaries survive float summation
    eps = 1e-12
    n_head = int(np.searchsorted(cum, head_share - eps, side="left")) + 1
    n_head = min(n_head, n)
    suffix = np.cumsum(share[::-1])
    n_tail = int(np.searchsorted(suffix, tail_share + eps, side="right"))
    n_tail = min(n_tail, n - n_head)
    head, mid, tail = labels
    assignment = {}
    for pos, key in enumerate(order):
        if pos < n_head:
            assignment[key] = head
        elif pos >= n - n_tail:
            assignment[key] = tail
        else:
            assignment[key] = mid
    rating_share = {lab: 0.0 for lab in labels}
    for key, s in zip(order, share):
        rating_share[assignment[key]] += float(s)
    return Partition(tuple(labels), assignment, rating_share)


def partition_items(train: Dataset, head_share: float = 0.2, tail_share: float = 0.2) -> Partition:
    if len(train) == 0:
        raise ValueError("empty train set")
    counts = train.item_counts.to_dict()
    return partition_counts(counts, ITEM_GROUPS, head_share, tail_share)


def partition_suppliers(train: Dataset, smap: SupplierMap,
                        head_share: float = 0.2, tail_share: float = 0.2) -> Partition:
    if len(train) == 0:
        raise ValueError("empty train set")
    counts: dict[str, float] = {}
    for item, n in train.item_counts.items():
        sup = smap[item]
        counts[sup] = counts.get(sup, 0) + n
    return partition_counts(counts, SUPPLIER_GROUPS, head_share, tail_share)


def profile_distribution(profile: Mapping[str, float], part: Partition) -> np.ndarray:
    """Rating-weighted share of a profile falling in each group."""
    if not profile:
        raise ValueError("empty profile")
    p = np.zeros(len(part.groups))
    for item, r in profile.items():
        p[part.index(item)] += r
    total = p.sum()
    if total <= 0:
        # all-zero ratings carry no weight; fall back to counts
        for item in profile:
            p[part.index(item)] += 1.0
        total = p.sum()
    return p / total


def list_distribution(items: Iterable[str], part: Partition) -> np.ndarray:
    """Fraction of list items in each group."""
    q = np.zeros(len(part.groups))
    for item in items:
        q[part.index(item)] += 1.0
    n = q.sum()
    if n == 0:
        raise ValueError("empty list")
    return q / n


def balanced_sizes(n: int, bins: int = 3) -> tuple[int, ...]:
    base, rem = divmod(n, bins)
    return tuple(base + (1 if b < rem else 0) for b in range(bins))


def partition_users(train: Dataset, part: Partition) -> UserGroups:
    """Sort users by (p(H), p(M), p(T)) descending and cut into three bins."""
    users = train.users
    if len(users) < 3:
        raise ValueError("need at least 3 users to form user groups")
    dists = {u: profile_distribution(train.profile(u), part) for u in users}
    order = sorted(users, key=lambda u: (*(-dists[u]), u))
    sizes = balanced_sizes(len(order))
    assignment = {}
    start = 0
    for label, size in zip(USER_GROUPS, sizes):
        for u in order[start:start + size]:
            assignment[u] = label
        start += size
    return UserGroups(assignment, sizes)
