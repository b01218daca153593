"""Clustering agreement and gradient-estimation error."""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgument

__all__ = ["ari", "mean_ari", "gradient_mse"]


def _pairs(counts: np.ndarray) -> float:
    counts = np.asarray(counts, dtype=float)
    return float(np.sum(counts * (counts - 1.0)) / 2.0)


def ari(a, b) -> float:
    """Adjusted Rand index of two labelings (Hubert-Arabie form).

    Returns 0 when the index is undefined, i.e. when the maximum and the
    expected index coincide (for example both labelings are a single cluster).
    """
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise InvalidArgument(f"label vectors differ in length: {a.size} vs {b.size}")
    if a.size == 0:
        raise InvalidArgument("label vectors are empty")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)

    index = _pairs(table)
    sum_a = _pairs(table.sum(axis=1))
    sum_b = _pairs(table.sum(axis=0))
    total = _pairs([a.size])
    expected = sum_a * sum_b / total if total else 0.0
    maximum = 0.5 * (sum_a + sum_b)
    if maximum == expected:
        return 0.0
    return (index - expected) / (maximum - expected)


def mean_ari(labels, truths) -> float:
    """Average ARI of ``labels`` against each of several ground truths."""
    truths = list(truths)
    if not truths:
        raise InvalidArgument("no ground truths given")
    return float(np.mean([ari(t, labels) for t in truths]))


def gradient_mse(estimate, truth, eval_points) -> float:
    """Mean over points of the squared Euclidean gradient error.

    ``estimate`` and ``truth`` are callables mapping an (m, d) batch to (m, d).
    A 1-d ``eval_points`` array is read as m scalar points.
    """
    x = np.asarray(eval_points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] == 0:
        raise InvalidArgument("no evaluation points")
    g_hat = np.asarray(estimate(x), dtype=float).reshape(x.shape)
    g_true = np.asarray(truth(x), dtype=float).reshape(x.shape)
    if not np.all(np.isfinite(g_true)):
        raise InvalidArgument("true gradient is undefined at some evaluation points")
    return float(np.mean(np.sum((g_hat - g_true) ** 2, axis=1)))
