"""Planted coupled-domain data for verification.

Per-subject latent codes ``Z1`` are mapped into the second domain by a known
map ``M1`` and pushed back to feature space through known transforms::

    Z2 = M1 Z1,    X_i = T_i^{-1} Z_i + noise

so the ground truth ``(T1, T2, M1, M2 = M1^{-1})`` is available to tests.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InfeasibleSpecError

MAX_RETRIES = 10


@dataclass(frozen=True)
class SyntheticSpec:
    """``noise`` is relative: per-entry std is ``noise`` times the RMS of the clean data."""

    dim: int = 32
    subjects: int = 100
    samples: int = 5
    noise: float = 0.0
    cond_bound: float = 50.0
    seed: int = 0
    tau: Optional[int] = None

    def __post_init__(self):
        if self.dim < 1 or self.subjects < 1 or self.samples < 1:
            raise ValueError("dim, subjects and samples must be >= 1")
        if not self.noise >= 0:
            raise ValueError("noise must be >= 0")
        if self.tau is not None and not 1 <= self.tau <= self.dim:
            raise ValueError(f"tau must lie in [1, {self.dim}]")
        if not 0 <= self.seed < 1 << 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class GroundTruth:
    t1: np.ndarray
    t2: np.ndarray
    m12: np.ndarray
    m21: np.ndarray
    z1: np.ndarray
    z2: np.ndarray


def _orthogonal(rng, d):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def conditioned_matrix(rng, d: int, bound: float) -> np.ndarray:
    """Random ``d x d`` matrix with condition number at most ``bound``."""
    if not bound >= 1:
        raise InfeasibleSpecError(f"condition bound must be >= 1, got {bound}")
    for _ in range(MAX_RETRIES):
        s = np.exp(rng.uniform(0.0, np.log(bound), size=d))
        a = (_orthogonal(rng, d) * s) @ _orthogonal(rng, d).T
        if np.linalg.cond(a) <= bound * (1 + 1e-9):
            return a
    raise InfeasibleSpecError(f"could not draw a matrix with condition <= {bound}")


def subject_labels(subjects: int, samples: int) -> list:
    width = len(str(subjects - 1))
    return [f"s{j:0{width}d}" for j in range(subjects) for _ in range(samples)]


def gen_synthetic_coupled(spec: SyntheticSpec):
    """Return ``(x1, x2, labels, GroundTruth)``; deterministic for a fixed seed.

    Columns are grouped by subject: subject ``j`` owns columns
    ``j*samples .. (j+1)*samples - 1``.
    """
    rng = np.random.default_rng(spec.seed)
    d = spec.dim
    t1 = conditioned_matrix(rng, d, spec.cond_bound)
    t2 = conditioned_matrix(rng, d, spec.cond_bound)
    m12 = conditioned_matrix(rng, d, spec.cond_bound)
    m21 = np.linalg.inv(m12)

    latent = rng.standard_normal((d, spec.subjects))
    if spec.tau is not None:
        keep = np.argsort(rng.random((d, spec.subjects)), axis=0)[: spec.tau]
        mask = np.zeros_like(latent, dtype=bool)
        mask[keep, np.arange(spec.subjects)] = True
        latent = np.where(mask, latent, 0.0)
    z1 = np.repeat(latent, spec.samples, axis=1)
    z2 = m12 @ z1
    x1 = np.linalg.solve(t1, z1)
    x2 = np.linalg.solve(t2, z2)
    if spec.noise > 0:
        for x in (x1, x2):
            rms = np.sqrt(np.mean(x * x))
            x += spec.noise * rms * rng.standard_normal(x.shape)
    labels = subject_labels(spec.subjects, spec.samples)
    return x1, x2, labels, GroundTruth(t1, t2, m12, m21, z1, z2)


def split_columns(subjects: int, samples: int):
    """Column indices for ``(train, gallery, probe)``.

    With at least three samples per subject the last two are held out (one
    gallery, one probe) and the rest train; otherwise every column is used
    in all three splits.
    """
    n = subjects * samples
    if samples < 3:
        idx = np.arange(n)
        return idx, idx, idx
    pos = np.arange(n) % samples
    return (
        np.flatnonzero(pos < samples - 2),
        np.flatnonzero(pos == samples - 2),
        np.flatnonzero(pos == samples - 1),
    )
