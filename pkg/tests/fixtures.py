"""Small hand-made and random evaluation fixtures shared by the test modules."""

from __future__ import annotations

import numpy as np

from popcal.itemknn import CandidateList
from popcal.data import Dataset, SupplierMap
from popcal.partition import partition_items, partition_suppliers, partition_users
from popcal.rerank import RankedList


class Fixture:
    def __init__(self, train, test, smap, lists, n):
        self.train, self.test, self.smap, self.n = train, test, smap, n
        self.lists = {u: RankedList(u, tuple(items)) for u, items in lists.items()}
        self.part = partition_items(train)
        self.sup_part = partition_suppliers(train, smap)
        self.users = partition_users(train, self.part)

    @property
    def plain_lists(self):
        return {u: list(lst.items) for u, lst in self.lists.items()}


def fixed_fixture() -> Fixture:
    """5 users, 8 items, 3 suppliers, lists of length 3."""
    train = Dataset.from_triples([
        ("u1", "a", 5), ("u1", "b", 4), ("u1", "c", 3), ("u1", "d", 1),
        ("u2", "a", 4), ("u2", "b", 5), ("u2", "e", 2),
        ("u3", "a", 3), ("u3", "c", 4), ("u3", "f", 5), ("u3", "g", 1),
        ("u4", "a", 5), ("u4", "b", 2), ("u4", "h", 4),
        ("u5", "a", 1), ("u5", "b", 3), ("u5", "c", 4), ("u5", "d", 5), ("u5", "e", 2),
    ])
    test = Dataset.from_triples([
        ("u1", "e", 4), ("u1", "f", 3),
        ("u2", "c", 5),
        ("u3", "b", 2), ("u3", "h", 4),
        ("u4", "c", 3), ("u4", "d", 1),
        ("u5", "f", 4),
    ])
    smap = SupplierMap({"a": "s1", "b": "s1", "c": "s2", "d": "s2", "e": "s3", "f": "s3", "g": "s3", "h": "s2"})
    lists = {
        "u1": ["e", "f", "g"],
        "u2": ["c", "d", "a"],
        "u3": ["b", "h", "d"],
        "u4": ["c", "e", "f"],
        "u5": ["f", "g", "h"],
    }
    return Fixture(train, test, smap, lists, 3)


def random_fixture(seed: int) -> Fixture:
    rng = np.random.default_rng(seed)
    n_users = int(rng.integers(3, 9))
    n_items = int(rng.integers(6, 16))
    n = int(rng.integers(1, 4))
    items = [f"i{k:02d}" for k in range(n_items)]
    weights = 1.0 / np.arange(1, n_items + 1)
    weights /= weights.sum()
    train_rows, test_rows, lists = [], [], {}
    for u in range(n_users):
        user = f"u{u}"
        k = int(rng.integers(2, n_items - n))
        picked = rng.choice(n_items, k, replace=False, p=weights)
        n_test = max(1, k // 4) if rng.random() < 0.85 else 0
        for pos, j in enumerate(picked):
            row = (user, items[j], float(rng.integers(1, 6)))
            (test_rows if pos < n_test else train_rows).append(row)
        held = set(picked[n_test:])
        pool = [j for j in range(n_items) if j not in held]
        lists[user] = [items[j] for j in rng.choice(pool, n, replace=False)]
    train = Dataset.from_triples(train_rows)
    # every item needs a train rating to be in the catalog
    for j, item in enumerate(items):
        if item not in train.items:
            train_rows.append((f"x{j}", item, 3.0))
    train = Dataset.from_triples(train_rows)
    n_sup = int(rng.integers(3, 6))
    smap = SupplierMap({i: f"s{int(rng.integers(n_sup))}" for i in items})
    lists = {u: lst for u, lst in lists.items()}
    # filler users need lists too so every train user is evaluated alike
    for u in train.users:
        if u not in lists:
            prof = set(train.profile(u))
            pool = [i for i in items if i not in prof]
            lists[u] = [pool[int(x)] for x in rng.choice(len(pool), n, replace=False)]
    return Fixture(train, Dataset.from_triples(test_rows), smap, lists, n)


def random_dm_instance(rng):
    users = [f"u{k}" for k in range(rng.integers(1, 6))]
    n_items = int(rng.integers(2, 9))
    n = int(rng.integers(1, 3))
    all_c = {}
    for u in users:
        size = int(rng.integers(n, min(n_items, 4) + 1))
        items = rng.choice(n_items, size, replace=False)
        all_c[u] = CandidateList(u, tuple(f"i{k}" for k in items), tuple(float(x) for x in np.sort(rng.random(size))[::-1]))
    pool = sorted({i for c in all_c.values() for i in c.items})
    budget = n * len(users)
    target = {}
    for i in pool:
        target[i] = int(rng.integers(0, 3))
    while sum(target.values()) > budget:
        i = pool[int(rng.integers(len(pool)))]
        target[i] = max(0, target[i] - 1)
    return all_c, n, target
