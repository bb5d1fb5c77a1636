"""Synthetic long-tailed rating data with known popularity propensities."""

from __future__ import annotations

import numpy as np

from popcal.data import Dataset, SupplierMap


def generate_synthetic(users: int = 500, items: int = 300, suppliers: int = 60,
                       pareto_exponent: float = 1.5, seed: int = 0,
                       profile_range: tuple[int, int] = (10, 30), unary: bool = True,
                       supplier_noise: float = 0.1, supplier_skew: float = 0.0) -> tuple[Dataset, SupplierMap]:
    """Sample a rating dataset with power-law item popularity.

    Item ``k`` (0-based popularity rank) has weight ``(k + 1) ** -pareto_exponent``.
    Each user draws a head propensity ``theta ~ U(0, 1)`` and picks a profile
    without replacement from the mixture ``theta * popularity + (1 - theta) *
    uniform``. By default the feedback is unary (every rating is 1). With
    ``unary=False`` ratings are 1-5: popular picks of head-leaning users and
    niche picks of niche-leaning users are rated higher.

    Suppliers own items with their own power-law weights, so a few suppliers
    own many items. Ownership follows item popularity except for a
    ``supplier_noise`` fraction of items whose owners are shuffled.
    """
    if min(users, items, suppliers) < 3:
        raise ValueError("users, items and suppliers must all be >= 3")
    rng = np.random.default_rng(seed)
    width = len(str(max(users, items, suppliers) - 1))
    item_ids = [f"i{k:0{width}d}" for k in range(items)]
    user_ids = [f"u{k:0{width}d}" for k in range(users)]
    sup_ids = [f"s{k:0{width}d}" for k in range(suppliers)]

    pop = (np.arange(1, items + 1, dtype=float)) ** -pareto_exponent
    pop /= pop.sum()
    uniform = np.full(items, 1.0 / items)
    # popularity percentile of each item, 1 for the most popular
    head_score = 1.0 - np.arange(items) / max(items - 1, 1)

    lo, hi = profile_range
    hi = min(hi, items - 1)
    lo = min(lo, hi)
    rows = []
    for u in user_ids:
        theta = rng.uniform()
        w = theta * pop + (1.0 - theta) * uniform
        size = int(rng.integers(lo, hi + 1))
        picked = rng.choice(items, size=size, replace=False, p=w)
        # affinity in [0, 1]: how well the item's popularity fits the user
        affinity = 1.0 - np.abs(head_score[picked] - theta)
        ratings = np.clip(np.rint(1 + 4 * affinity + rng.normal(0, 0.75, size)), 1, 5)
        if unary:
            ratings[:] = 1.0
        rows.extend((u, item_ids[k], float(r)) for k, r in zip(picked, ratings))

    sw = (np.arange(1, suppliers + 1, dtype=float)) ** -supplier_skew
    sw /= sw.sum()
    owner = rng.choice(suppliers, size=items, p=sw)
    # every supplier owns at least one item
    owner[rng.permutation(items)[:suppliers]] = np.arange(suppliers)
    # popular suppliers own the popular items, up to a shuffled minority
    owner = np.sort(owner)
    mixed = rng.choice(items, size=int(supplier_noise * items), replace=False)
    owner[mixed] = owner[rng.permutation(mixed)]
    smap = SupplierMap({item_ids[k]: sup_ids[owner[k]] for k in range(items)})
    return Dataset.from_triples(rows), smap


def head_share_of_top(d: Dataset, top_fraction: float) -> float:
    """Share of all ratings held by the most-rated ``top_fraction`` of items."""
    counts = np.sort(d.item_counts.to_numpy())[::-1]
    k = max(1, int(round(top_fraction * len(counts))))
    return float(counts[:k].sum() / counts.sum())
