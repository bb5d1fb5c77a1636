"""Independent reference computations used to check the library.

Everything here is written straight from the metric and objective
definitions with plain loops, exact arithmetic where it is cheap, and no
imports from the code paths under test beyond the plain data containers.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

from mpmath import mp, mpf, log as mplog


def js_exact(p, q, dps=50) -> float:
    """Jensen-Shannon divergence, base 2, evaluated term by term in high precision."""
    with mp.workdps(dps):
        P = [mpf(x) for x in p]
        Q = [mpf(x) for x in q]
        M = [(a + b) / 2 for a, b in zip(P, Q)]
        kl_pm = sum((a * mplog(a / m, 2) for a, m in zip(P, M) if a > 0), mpf(0))
        kl_qm = sum((b * mplog(b / m, 2) for b, m in zip(Q, M) if b > 0), mpf(0))
        return float(kl_pm / 2 + kl_qm / 2)


def binom_cdf_exact(t: int, n: int, p: float) -> Fraction:
    p = Fraction(p).limit_denominator(10_000)
    return sum((math.comb(n, x) * p**x * (1 - p) ** (n - x) for x in range(t + 1)), Fraction(0))


def min_protected_exact(n: int, p: float, alpha: float) -> list[int]:
    a = Fraction(alpha).limit_denominator(10_000)
    table = []
    for j in range(1, n + 1):
        t = 0
        while binom_cdf_exact(t, j, p) <= a:
            t += 1
        table.append(t)
    return table


def minmax(scores):
    lo, hi = min(scores), max(scores)
    if hi == lo:
        return [1.0] * len(scores)
    return [(s - lo) / (hi - lo) for s in scores]


def calibration_objective(subset, rel, groups, target, lam, k=3) -> float:
    """(1 - lam) * sum of relevance - lam * JS(target, group distribution of subset)."""
    q = [0.0] * k
    for j in subset:
        q[groups[j]] += 1.0 / len(subset)
    return (1 - lam) * sum(rel[j] for j in subset) - lam * js_exact(target, q, dps=30)


def best_subset(rel, groups, target, lam, n, k=3):
    best = None
    for subset in itertools.combinations(range(len(rel)), n):
        val = calibration_objective(subset, rel, groups, target, lam, k)
        if best is None or val > best[0]:
            best = (val, subset)
    return best


def min_discrepancy(cands: dict[str, list[str]], n: int, target: dict[str, int]) -> int:
    """Smallest total shortfall over every way of giving each user n of its candidates."""
    users = sorted(cands)
    options = [list(itertools.combinations(cands[u], n)) for u in users]
    best = None
    for choice in itertools.product(*options):
        counts: dict[str, int] = {}
        for picked in choice:
            for i in picked:
                counts[i] = counts.get(i, 0) + 1
        d = sum(max(0, t - counts.get(i, 0)) for i, t in target.items())
        if best is None or d < best:
            best = d
    return best


# --- metrics, straight from the definitions -------------------------------

def naive_precision(lists, test_profiles, n):
    vals = []
    for u, items in lists.items():
        rel = test_profiles.get(u, {})
        if not rel:
            continue
        hits = 0
        for i in items[:n]:
            if i in rel:
                hits += 1
        vals.append(hits / n)
    return sum(vals) / len(vals)


def naive_agg_div(lists, catalog):
    seen = set()
    for items in lists.values():
        for i in items:
            seen.add(i)
    return len(seen) / len(catalog)


def naive_lc(lists, item_group):
    tail = [i for i, g in item_group.items() if g in ("M", "T")]
    seen = set()
    for items in lists.values():
        for i in items:
            if item_group[i] in ("M", "T"):
                seen.add(i)
    return len(seen) / len(tail)


def naive_gini(lists, catalog):
    L = [i for items in lists.values() for i in items]
    shares = sorted(L.count(i) / len(L) for i in catalog)
    n = len(catalog)
    return sum((2 * k - n - 1) * shares[k - 1] for k in range(1, n + 1)) / (n - 1)


def pairwise_gini(lists, catalog):
    """Mean absolute difference form of the Gini coefficient."""
    L = [i for items in lists.values() for i in items]
    p = [L.count(i) / len(L) for i in catalog]
    n = len(p)
    return sum(abs(a - b) for a in p for b in p) / (2 * (n - 1) * sum(p))


def naive_esf(lists, supplier_of, supplier_group, groups=("S1", "S2", "S3")):
    total = 0.0
    for g in groups:
        c = 0
        for items in lists.values():
            for j in items:
                if supplier_group[supplier_of[j]] == g:
                    c += 1
        total += math.sqrt(c)
    return total


def naive_deviation(lists, train_profiles, group_of, groups, n):
    """Per-group q - p and mean absolute deviation, with slots = n * |U|."""
    slots = n * len(lists)
    n_ratings = sum(len(p) for p in train_profiles.values())
    per = {}
    for g in groups:
        q = sum(1 for items in lists.values() for j in items if group_of(j) == g) / slots
        p = sum(1 for prof in train_profiles.values() for j in prof if group_of(j) == g) / n_ratings
        per[g] = q - p
    return per, sum(abs(v) for v in per.values()) / len(groups)


def naive_upd(lists, train_profiles, item_group, user_group):
    per_group = {}
    for g in ("G1", "G2", "G3"):
        vals = []
        for u, items in lists.items():
            if user_group[u] != g:
                continue
            prof = train_profiles[u]
            w = {c: sum(r for i, r in prof.items() if item_group[i] == c) for c in "HMT"}
            tot = sum(w.values())
            P = [w[c] / tot for c in "HMT"]
            Q = [sum(1 for i in items if item_group[i] == c) / len(items) for c in "HMT"]
            vals.append(js_exact(P, Q, dps=30))
        if vals:
            per_group[g] = sum(vals) / len(vals)
    return per_group, sum(per_group.values()) / len(per_group)
