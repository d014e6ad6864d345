"""Closed-set identification: gallery enrollment, probe ranking, CMC curves.

Distances are computed column-to-column; a subject's distance to a probe
is the minimum over that subject's enrolled columns. Ties in the ranking
are broken by the order in which labels were first enrolled.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from . import kernels
from .errors import DataError, ShapeError
from .fileutil import atomic_write
from .transform import as_feature_matrix

METRICS = ("euclidean", "cosine")

RANKING_COLUMNS = (
    "probe_index",
    "probe_label",
    "rank_of_true",
    "n_gallery_labels",
    "best_label",
    "best_distance",
    "ranked_labels",
)
CMC_COLUMNS = ("rank", "accuracy")


@dataclass(frozen=True)
class Gallery:
    codes: np.ndarray
    labels: tuple
    metric: str
    label_order: tuple
    label_index: np.ndarray

    @property
    def size(self) -> int:
        return self.codes.shape[1]

    @property
    def n_labels(self) -> int:
        return len(self.label_order)


@dataclass(frozen=True)
class MatchResult:
    probe_label: str
    ranking: tuple  # ((label, distance), ...), distance ascending
    rank_of_true: Optional[int]


@dataclass(frozen=True)
class CmcCurve:
    accuracies: np.ndarray  # accuracies[k-1] is the rank-k accuracy
    n_probes: int

    def at(self, k: int) -> float:
        return float(self.accuracies[k - 1])


def _check_labels(labels, n, what):
    labels = tuple(str(lab) for lab in labels)
    if len(labels) != n:
        raise ShapeError(f"{what}: {len(labels)} labels for {n} columns")
    if any(lab == "" for lab in labels):
        raise DataError(f"{what}: labels must be non-empty strings")
    return labels


def enroll(codes, labels: Sequence[str], metric: str = "euclidean") -> Gallery:
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")
    codes = as_feature_matrix(codes, "gallery codes")
    labels = _check_labels(labels, codes.shape[1], "gallery")
    if metric == "cosine" and np.any(np.linalg.norm(codes, axis=0) == 0):
        raise DataError("cosine metric: gallery contains a zero-norm column")
    order = tuple(dict.fromkeys(labels))
    position = {lab: i for i, lab in enumerate(order)}
    index = np.array([position[lab] for lab in labels], dtype=np.intp)
    return Gallery(codes, labels, metric, order, index)


def identify(gallery: Gallery, probe_codes, probe_labels: Sequence[str]) -> list:
    probe_codes = as_feature_matrix(probe_codes, "probe codes")
    if probe_codes.shape[0] != gallery.codes.shape[0]:
        raise ShapeError(
            f"probe dimension {probe_codes.shape[0]} != gallery dimension {gallery.codes.shape[0]}"
        )
    probe_labels = _check_labels(probe_labels, probe_codes.shape[1], "probe")
    if gallery.metric == "cosine" and np.any(np.linalg.norm(probe_codes, axis=0) == 0):
        raise DataError("cosine metric: probe set contains a zero-norm column")
    dist = cdist(probe_codes.T, gallery.codes.T, metric=gallery.metric)
    per_label = kernels.label_min(dist, gallery.label_index, gallery.n_labels)
    position = {lab: i for i, lab in enumerate(gallery.label_order)}
    results = []
    for p, true in enumerate(probe_labels):
        row = per_label[p]
        order = np.argsort(row, kind="stable")
        ranking = tuple((gallery.label_order[i], float(row[i])) for i in order)
        rank = None
        if true in position:
            rank = int(np.flatnonzero(order == position[true])[0]) + 1
        results.append(MatchResult(true, ranking, rank))
    return results


def _ranks(results) -> np.ndarray:
    if not results:
        raise DataError("no match results")
    # absent true labels never count as a hit
    return np.array([np.inf if r.rank_of_true is None else r.rank_of_true for r in results])


def rank_k_accuracy(results, k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    ranks = _ranks(results)
    return np.count_nonzero(ranks <= k) / len(ranks)


def cmc_compute(results, max_rank: Optional[int] = None) -> CmcCurve:
    ranks = _ranks(results)
    n_labels = len(results[0].ranking)
    if max_rank is None:
        max_rank = n_labels
    if max_rank < 1:
        raise ValueError("max_rank must be >= 1")
    if max_rank > n_labels:
        raise ValueError(f"max_rank {max_rank} exceeds the {n_labels} gallery labels")
    acc = np.array([np.count_nonzero(ranks <= k) / len(ranks) for k in range(1, max_rank + 1)])
    return CmcCurve(acc, len(ranks))


def write_rankings_csv(path, results) -> None:
    with atomic_write(path, newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RANKING_COLUMNS)
        for i, r in enumerate(results):
            best_label, best_dist = r.ranking[0]
            w.writerow([
                i,
                r.probe_label,
                "" if r.rank_of_true is None else r.rank_of_true,
                len(r.ranking),
                best_label,
                repr(best_dist),
                ";".join(lab for lab, _ in r.ranking),
            ])


def read_rankings_csv(path) -> list:
    """Read back a rankings file. Only the top distance is stored, so
    ranking entries after the first carry ``nan`` distances."""
    results = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RANKING_COLUMNS:
            raise DataError(f"{path}: expected columns {','.join(RANKING_COLUMNS)}")
        for line, row in enumerate(reader, start=2):
            try:
                labels = row["ranked_labels"].split(";")
                n = int(row["n_gallery_labels"])
                rank = int(row["rank_of_true"]) if row["rank_of_true"] else None
                best = float(row["best_distance"])
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}:{line}: malformed row ({exc})") from exc
            if len(labels) != n:
                raise DataError(f"{path}:{line}: ranked_labels has {len(labels)} entries, expected {n}")
            ranking = ((labels[0], best),) + tuple((lab, float("nan")) for lab in labels[1:])
            results.append(MatchResult(row["probe_label"], ranking, rank))
    if not results:
        raise DataError(f"{path}: no rankings")
    return results


def write_cmc_csv(path, curve: CmcCurve) -> None:
    with atomic_write(path, newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CMC_COLUMNS)
        for k, acc in enumerate(curve.accuracies, start=1):
            w.writerow([k, repr(float(acc))])
