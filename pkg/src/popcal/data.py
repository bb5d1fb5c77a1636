"""Rating data loading, play-count conversion, filtering and splitting.

All rating data is held in a :class:`Dataset`, a thin immutable wrapper over a
pandas frame with ``user``, ``item`` and ``rating`` columns. User and item ids
are kept as strings throughout.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import pandas as pd

_log = logging.getLogger(__name__)

DELIMITERS = {"tab": "\t", "\\t": "\t", "comma": ",", "colons": "::"}


class DataError(ValueError):
    """Raised for malformed or degenerate input data."""


class Interaction(NamedTuple):
    user: str
    item: str
    value: float
    timestamp: int | None = None


@dataclass(frozen=True, eq=False)
class Dataset:
    """Deduplicated user-item ratings.

    The frame is copied and sorted on construction so that two datasets built
    from the same ratings in different orders compare and serialize
    identically.
    """

    frame: pd.DataFrame

    def __post_init__(self):
        df = self.frame.loc[:, ["user", "item", "rating"]].copy()
        df["user"] = df["user"].astype(str)
        df["item"] = df["item"].astype(str)
        df["rating"] = df["rating"].astype(float)
        if df.duplicated(["user", "item"]).any():
            raise DataError("dataset contains duplicate (user, item) pairs")
        if (df["rating"] < 0).any():
            raise DataError("ratings must be non-negative")
        df = df.sort_values(["user", "item"], kind="mergesort").reset_index(drop=True)
        object.__setattr__(self, "frame", df)

    @classmethod
    def from_triples(cls, triples: Iterable[tuple]) -> "Dataset":
        rows = [(str(u), str(i), float(r)) for u, i, r in triples]
        return cls(pd.DataFrame(rows, columns=["user", "item", "rating"]))

    def __len__(self):
        return len(self.frame)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.frame.equals(other.frame)

    @cached_property
    def users(self) -> list[str]:
        return sorted(self.frame["user"].unique())

    @cached_property
    def items(self) -> list[str]:
        return sorted(self.frame["item"].unique())

    @cached_property
    def _profiles(self) -> dict[str, dict[str, float]]:
        out: dict[str, dict[str, float]] = {}
        for u, i, r in self.frame.itertuples(index=False):
            out.setdefault(u, {})[i] = r
        return out

    def profile(self, user: str) -> dict[str, float]:
        """Map of item -> rating for one user (empty if unknown)."""
        return self._profiles.get(user, {})

    def profiles(self) -> dict[str, dict[str, float]]:
        return self._profiles

    @cached_property
    def item_counts(self) -> pd.Series:
        """Number of ratings per item."""
        return self.frame.groupby("item").size()

    def restrict_items(self, items: Iterable[str]) -> "Dataset":
        keep = set(items)
        return Dataset(self.frame[self.frame["item"].isin(keep)])

    def write(self, path: str | Path) -> None:
        self.frame.to_csv(path, sep="\t", header=False, index=False)

    @classmethod
    def read(cls, path: str | Path) -> "Dataset":
        """Read a canonical tab-separated user/item/rating file."""
        return cls(
            pd.read_csv(
                path, sep="\t", header=None, names=["user", "item", "rating"],
                dtype={"user": str, "item": str, "rating": float},
            )
        )


@dataclass(frozen=True)
class SupplierMap:
    assignment: dict[str, str] = field(default_factory=dict)

    def __getitem__(self, item: str) -> str:
        return self.assignment[item]

    def __contains__(self, item: str) -> bool:
        return item in self.assignment

    def __len__(self):
        return len(self.assignment)

    @property
    def suppliers(self) -> list[str]:
        return sorted(set(self.assignment.values()))

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for item in sorted(self.assignment):
                f.write(f"{item}\t{self.assignment[item]}\n")


@dataclass(frozen=True)
class SplitDataset:
    train: Dataset
    test: Dataset
    seed: int


def _delimiter(delim: str) -> str:
    return DELIMITERS.get(delim, delim)


def load_ratings(path: str | Path, delim: str = "::") -> list[Interaction]:
    """Parse a rating file into interactions, in file order.

    Each non-blank line must contain ``user, item, value`` and optionally an
    integer timestamp, separated by ``delim``.
    """
    delim = _delimiter(delim)
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split(delim)
            if len(parts) not in (3, 4):
                raise DataError(f"line {lineno}: expected 3 or 4 fields, got {len(parts)}")
            try:
                value = float(parts[2])
                ts = int(parts[3]) if len(parts) == 4 and parts[3].strip() else None
            except ValueError as exc:
                raise DataError(f"line {lineno}: {exc}") from None
            if value < 0 or math.isnan(value):
                raise DataError(f"line {lineno}: negative or missing value")
            out.append(Interaction(parts[0].strip(), parts[1].strip(), value, ts))
    if not out:
        raise DataError("no interactions")
    return out


def explicit_ratings(interactions: Sequence[Interaction]) -> Dataset:
    """Build a dataset from explicit ratings; the last value wins on repeats."""
    ratings: dict[tuple[str, str], float] = {}
    for it in interactions:
        ratings[(it.user, it.item)] = it.value
    return Dataset.from_triples((u, i, r) for (u, i), r in ratings.items())


def frequency_to_ratings(interactions: Sequence[Interaction]) -> Dataset:
    """Turn play counts into 1-5 ratings by within-user quantile.

    Counts are summed per (user, item). Within each user, an item's rating is
    ``ceil(5 * pct)`` where ``pct`` is the fraction of the user's distinct
    items played at most as often (tied items share the top rank of their
    tie group).
    """
    if not interactions:
        raise DataError("no interactions")
    df = pd.DataFrame(
        [(it.user, it.item, it.value) for it in interactions],
        columns=["user", "item", "count"],
    )
    counts = df.groupby(["user", "item"], sort=True)["count"].sum().reset_index()
    counts = counts[counts["count"] > 0]
    pct = counts.groupby("user")["count"].rank(method="max", pct=True)
    # guard against 0.6000000001-style float noise pushing a rating up
    rating = np.ceil(np.round(pct.to_numpy() * 5, 9)).clip(1, 5)
    counts = counts.assign(rating=rating)
    return Dataset(counts[["user", "item", "rating"]])


def filter_min_profile(d: Dataset, min_profile: int = 20) -> Dataset:
    """Drop users with fewer than ``min_profile`` ratings (single pass)."""
    if min_profile <= 0:
        return d
    sizes = d.frame.groupby("user")["item"].transform("size")
    kept = d.frame[sizes >= min_profile]
    if kept.empty:
        raise DataError("filter removed all users")
    n_users = d.frame["user"].nunique() - kept["user"].nunique()
    _log.info("min-profile filter removed %d users", n_users)
    return Dataset(kept)


def split(d: Dataset, ratio: float = 0.8, seed: int = 0) -> SplitDataset:
    """Per-user random train/test split.

    Each user keeps ``round(ratio * |profile|)`` ratings in train, but never
    fewer than one.
    """
    if not 0 < ratio < 1:
        raise ValueError("ratio must be in (0, 1)")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for user, idx in d.frame.groupby("user", sort=True).indices.items():
        n = len(idx)
        if n == 1:
            _log.warning("user %s has a single rating; kept in train", user)
        n_train = max(1, min(n, int(math.floor(ratio * n + 0.5))))
        perm = rng.permutation(idx)
        train_idx.extend(perm[:n_train])
        test_idx.extend(perm[n_train:])
    frame = d.frame
    return SplitDataset(
        Dataset(frame.iloc[sorted(train_idx)]),
        Dataset(frame.iloc[sorted(test_idx)]),
        seed,
    )


def read_supplier_file(path: str | Path, delim: str = "\t") -> SupplierMap:
    delim = _delimiter(delim)
    assignment: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split(delim)
            if len(parts) != 2:
                raise DataError(f"line {lineno}: expected item and supplier")
            item, sup = parts[0].strip(), parts[1].strip()
            if item in assignment and assignment[item] != sup:
                raise DataError(f"item {item} has conflicting suppliers {assignment[item]!r} and {sup!r}")
            assignment[item] = sup
    return SupplierMap(assignment)


def attach_suppliers(smap: SupplierMap, d: Dataset) -> tuple[SupplierMap, Dataset]:
    """Restrict the map to ``d``'s items and ``d`` to mapped items."""
    items = d.items
    mapped = [i for i in items if i in smap]
    dropped = len(items) - len(mapped)
    _log.info("dropped %d items with no supplier", dropped)
    restricted = SupplierMap({i: smap[i] for i in mapped})
    if dropped:
        d = d.restrict_items(mapped)
    return restricted, d


def load_supplier_map(path: str | Path, d: Dataset, delim: str = "\t") -> tuple[SupplierMap, Dataset]:
    return attach_suppliers(read_supplier_file(path, delim), d)
