"""Batch-means and batch-jackknife error bars for correlated chains."""

import numpy as np

MIN_BATCHES = 16
DEFAULT_BATCHES = 32


class InsufficientBatchesError(ValueError):
    """Too few batches for a batch-means error estimate."""


def batch_labels(n_records, n_chains, n_batches=DEFAULT_BATCHES, min_batches=MIN_BATCHES):
    """Assign each ``(record, chain)`` sample a batch id (``-1`` = dropped tail).

    Each chain is cut into ``ceil(n_batches / n_chains)`` contiguous batches of
    equal length, so chains never share a batch.
    """
    per_chain = max(1, -(-n_batches // n_chains))
    length = n_records // per_chain
    if length == 0:
        per_chain, length = n_records, 1
    total = per_chain * n_chains
    if total < min_batches:
        raise InsufficientBatchesError(
            f"{total} batches available (need >= {min_batches}); run more chains or record longer"
        )
    labels = np.full((n_records, n_chains), -1, dtype=int)
    block = np.arange(per_chain * length) // length
    labels[: per_chain * length] = block[:, None] * n_chains + np.arange(n_chains)[None, :]
    return labels


def batch_means(values, labels):
    """Mean of ``values`` inside each batch; ``values`` shaped like ``labels``."""
    n = labels.max() + 1
    mask = labels >= 0
    sums = np.bincount(labels[mask], weights=values[mask], minlength=n)
    counts = np.bincount(labels[mask], minlength=n)
    return sums / counts


def mean_se(values, labels=None):
    """Grand mean and batch-means standard error of a ``(n_records, n_chains)`` series."""
    values = np.asarray(values, dtype=float)
    if labels is None:
        labels = batch_labels(*values.shape)
    bm = batch_means(values, labels)
    return float(values[labels >= 0].mean()), float(bm.std(ddof=1) / np.sqrt(len(bm)))


def jackknife(stat, arrays, labels):
    """Delete-one-batch jackknife of ``stat(*flat_arrays)``.

    Returns ``(estimate, standard_error)``; ``estimate`` uses every labelled sample.
    """
    mask = labels >= 0
    flat = [np.asarray(a)[mask] for a in arrays]
    lab = labels[mask]
    est = stat(*flat)
    n = lab.max() + 1
    reps = np.array([stat(*[a[lab != b] for a in flat]) for b in range(n)])
    se = np.sqrt((n - 1) / n * np.sum((reps - reps.mean(axis=0)) ** 2, axis=0))
    return est, se
