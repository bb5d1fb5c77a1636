"""Overall and per-stakeholder evaluation of recommendation lists."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from popcal.data import Dataset, SupplierMap
from popcal.partition import Partition, UserGroups, list_distribution, profile_distribution
from popcal.rerank.base import RankedList
from popcal.rerank.divergence import js_divergence

_log = logging.getLogger(__name__)

Lists = Mapping[str, RankedList]

TABLE_COLUMNS = ("precision", "agg_div", "lc", "gini", "esf", "ipd", "upd", "spd")


@dataclass
class MetricsReport:
    precision: float
    agg_div: float
    lc: float
    gini: float
    esf: float
    ipd: float
    upd: float
    spd: float
    ipd_groups: dict[str, float] = field(default_factory=dict)
    upd_groups: dict[str, float] = field(default_factory=dict)
    spd_groups: dict[str, float] = field(default_factory=dict)
    exposure: pd.DataFrame | None = field(default=None, repr=False)

    def row(self) -> dict[str, float]:
        out = {c: getattr(self, c) for c in TABLE_COLUMNS}
        for prefix, groups in (("ipd", self.ipd_groups), ("upd", self.upd_groups), ("spd", self.spd_groups)):
            for g, v in groups.items():
                out[f"{prefix}_{g}"] = v
        return out


def combined(lists: Lists) -> Counter:
    """Frequency of every item in the concatenation of all lists."""
    return Counter(i for lst in lists.values() for i in lst.items)


def precision_at_n(lists: Lists, test: Dataset, n: int | None = None, min_rating: float | None = None) -> float:
    """Mean fraction of each list found in the user's test ratings.

    Users without test ratings are skipped. ``n`` defaults to each list's
    own length.
    """
    total, evaluated, skipped = 0.0, 0, 0
    for u in sorted(lists):
        relevant = test.profile(u)
        if min_rating is not None:
            relevant = {i: r for i, r in relevant.items() if r >= min_rating}
        if not relevant:
            skipped += 1
            continue
        items = lists[u].items
        size = n if n is not None else len(items)
        if size == 0:
            skipped += 1
            continue
        total += sum(1 for i in items[:size] if i in relevant) / size
        evaluated += 1
    if skipped:
        _log.info("precision: skipped %d users with no test ratings", skipped)
    if evaluated == 0:
        raise ValueError("no evaluable users")
    return total / evaluated


def agg_div(lists: Lists, catalog: Sequence[str]) -> float:
    return len(set(combined(lists))) / len(catalog)


def long_tail_coverage(lists: Lists, part: Partition) -> float:
    tail = {i for i, g in part.assignment.items() if g != part.groups[0]}
    if not tail:
        return 0.0
    return len(set(combined(lists)) & tail) / len(tail)


def gini(lists: Lists, catalog: Sequence[str]) -> float:
    """Gini index of recommendation frequency; 0 is perfectly even exposure.

    Catalog items never recommended count with frequency zero.
    """
    n = len(catalog)
    if n < 2:
        raise ValueError("gini needs at least two catalog items")
    freq = combined(lists)
    total = sum(freq.values())
    if total == 0:
        raise ValueError("no recommendations")
    p = np.sort(np.array([freq.get(i, 0) for i in catalog], dtype=float)) / total
    k = np.arange(1, n + 1)
    return float(np.sum((2 * k - n - 1) * p) / (n - 1))


def supplier_bin_counts(lists: Lists, sup_part: Partition, smap: SupplierMap) -> dict[str, int]:
    counts = {g: 0 for g in sup_part.groups}
    for lst in lists.values():
        for i in lst.items:
            counts[sup_part[smap[i]]] += 1
    return counts


def esf(lists: Lists, sup_part: Partition, smap: SupplierMap) -> float:
    counts = supplier_bin_counts(lists, sup_part, smap)
    return float(sum(math.sqrt(c) for c in counts.values()))


def _deviation(rec_counts: Mapping[str, float], rating_counts: Mapping[str, float],
               groups: Sequence[str], slots: float) -> tuple[dict[str, float], float]:
    total = sum(rating_counts.values())
    per = {g: rec_counts.get(g, 0) / slots - rating_counts.get(g, 0) / total for g in groups}
    return per, sum(abs(v) for v in per.values()) / len(groups)


def _slots(lists: Lists, n: int | None) -> int:
    if n is None:
        return sum(len(lst) for lst in lists.values())
    return n * len(lists)


def ipd(lists: Lists, train: Dataset, part: Partition, n: int | None = None) -> tuple[dict[str, float], float]:
    """Item popularity deviation: per group ``q(c) - p(c)`` and mean absolute value.

    ``q(c)`` is the group's share of the ``n * |U|`` recommendation slots and
    ``p(c)`` its share of train ratings. ``n`` defaults to the actual number
    of slots filled.
    """
    rec = Counter(part[i] for lst in lists.values() for i in lst.items)
    rated = Counter()
    for item, c in train.item_counts.items():
        rated[part[item]] += c
    return _deviation(rec, rated, part.groups, _slots(lists, n))


def spd(lists: Lists, train: Dataset, sup_part: Partition, smap: SupplierMap,
        n: int | None = None) -> tuple[dict[str, float], float]:
    """Supplier popularity deviation, analogous to :func:`ipd` over supplier groups."""
    rec = Counter(sup_part[smap[i]] for lst in lists.values() for i in lst.items)
    rated = Counter()
    for item, c in train.item_counts.items():
        rated[sup_part[smap[item]]] += c
    return _deviation(rec, rated, sup_part.groups, _slots(lists, n))


def user_miscalibration(lists: Lists, train: Dataset, part: Partition) -> dict[str, float]:
    """JS divergence between each user's profile and list distributions."""
    out = {}
    for u, lst in lists.items():
        if len(lst) == 0:
            continue
        out[u] = js_divergence(profile_distribution(train.profile(u), part), list_distribution(lst.items, part))
    return out


def upd(lists: Lists, train: Dataset, part: Partition, users: UserGroups) -> tuple[dict[str, float], float]:
    """User popularity deviation: mean miscalibration per user group, then across groups."""
    per_user = user_miscalibration(lists, train, part)
    per_group = {}
    for g in users.groups:
        vals = [per_user[u] for u in users.members(g) if u in per_user]
        if vals:
            per_group[g] = float(np.mean(vals))
    if not per_group:
        raise ValueError("no users to evaluate")
    return per_group, sum(per_group.values()) / len(per_group)


def per_user_table(lists: Lists, train: Dataset, test: Dataset, part: Partition, users: UserGroups,
                   n: int | None = None) -> pd.DataFrame:
    """Per user: group, precision (NaN without test ratings) and miscalibration.

    Raw values for running significance tests outside this package.
    """
    mis = user_miscalibration(lists, train, part)
    rows = []
    for u in sorted(lists):
        items = lists[u].items
        relevant = test.profile(u)
        size = n if n is not None else len(items)
        prec = sum(1 for i in items[:size] if i in relevant) / size if relevant and size else float("nan")
        rows.append((u, users.assignment.get(u, ""), prec, mis.get(u, float("nan"))))
    return pd.DataFrame(rows, columns=["user", "group", "precision", "miscalibration"])


def exposure_table(lists: Lists, train: Dataset, part: Partition) -> pd.DataFrame:
    """Per item: train count, group and share of users it was recommended to."""
    freq = combined(lists)
    n_users = len(lists)
    counts = train.item_counts
    rows = [(i, int(counts[i]), part[i], freq.get(i, 0) / n_users) for i in sorted(part.assignment)]
    return pd.DataFrame(rows, columns=["item", "train_count", "group", "exposure"])


def evaluate(lists: Lists, train: Dataset, test: Dataset, part: Partition, users: UserGroups,
             sup_part: Partition | None = None, smap: SupplierMap | None = None,
             n: int | None = None) -> MetricsReport:
    """Compute every metric for one set of lists.

    The catalog is the set of train items. Supplier metrics are NaN when no
    supplier data is given.
    """
    catalog = sorted(part.assignment)
    ipd_g, ipd_v = ipd(lists, train, part, n)
    upd_g, upd_v = upd(lists, train, part, users)
    if sup_part is not None and smap is not None:
        spd_g, spd_v = spd(lists, train, sup_part, smap, n)
        esf_v = esf(lists, sup_part, smap)
    else:
        spd_g, spd_v, esf_v = {}, float("nan"), float("nan")
    return MetricsReport(
        precision=precision_at_n(lists, test, n),
        agg_div=agg_div(lists, catalog),
        lc=long_tail_coverage(lists, part),
        gini=gini(lists, catalog),
        esf=esf_v,
        ipd=ipd_v,
        upd=upd_v,
        spd=spd_v,
        ipd_groups=ipd_g,
        upd_groups=upd_g,
        spd_groups=spd_g,
        exposure=exposure_table(lists, train, part),
    )
