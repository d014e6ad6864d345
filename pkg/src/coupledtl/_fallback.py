"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``."""
import numpy as np


def hard_threshold(a, tau):
    a = np.asarray(a, dtype=np.float64)
    out = np.zeros_like(a)
    if tau == 0 or a.size == 0:
        return out
    # stable sort on -|a| keeps the lowest row index first among equal magnitudes
    order = np.argsort(-np.abs(a), axis=0, kind="stable")[:tau]
    cols = np.broadcast_to(np.arange(a.shape[1]), order.shape)
    out[order, cols] = a[order, cols]
    return out


def label_min(dist, label_idx, n_labels):
    dist = np.asarray(dist, dtype=np.float64)
    out = np.full((dist.shape[0], n_labels), np.inf)
    if dist.shape[1] == 0:
        return out
    order = np.argsort(label_idx, kind="stable")
    sorted_labels = label_idx[order]
    starts = np.flatnonzero(np.r_[True, sorted_labels[1:] != sorted_labels[:-1]])
    out[:, sorted_labels[starts]] = np.minimum.reduceat(dist[:, order], starts, axis=1)
    return out
