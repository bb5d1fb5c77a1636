"""Jensen-Shannon divergence between discrete distributions."""

from __future__ import annotations

import math

import numpy as np


def kl_divergence(p, q) -> float:
    """Base-2 KL divergence; terms with ``p == 0`` contribute nothing."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    mask = p > 0
    return float(np.sum(p[mask] * np.log2(p[mask] / q[mask])))


def js_divergence(p, q) -> float:
    """Base-2 Jensen-Shannon divergence, bounded in [0, 1]."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    m = 0.5 * (p + q)
    value = 0.5 * kl_divergence(p, m) + 0.5 * kl_divergence(q, m)
    return min(max(value, 0.0), 1.0)


def js_divergence_small(p, q) -> float:
    """Same as :func:`js_divergence` for short plain sequences, without numpy overhead."""
    total = 0.0
    for a, b in zip(p, q):
        m = 0.5 * (a + b)
        if a > 0:
            total += a * math.log2(a / m)
        if b > 0:
            total += b * math.log2(b / m)
    return min(max(0.5 * total, 0.0), 1.0)
