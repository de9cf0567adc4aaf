"""Distances, cluster statistics, utterance scores and projections."""

from collections import Counter
from dataclasses import dataclass
import math
import warnings

import numpy as np
from scipy.special import betainc


def dist(a, b) -> float:
    """Euclidean distance between two context patterns."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def _pair_distances(patterns: np.ndarray) -> np.ndarray:
    patterns = np.asarray(patterns, dtype=np.float64)
    if patterns.ndim != 2 or patterns.shape[0] < 2:
        raise ValueError("need at least two patterns")
    n = patterns.shape[0]
    out = []
    for k in range(n - 1):
        diff = patterns[k + 1:] - patterns[k]
        out.append(np.sqrt(np.sum(diff * diff, axis=1)))
    return np.concatenate(out)


def d_avg(patterns) -> float:
    """Mean distance over all unordered pattern pairs."""
    return float(np.mean(_pair_distances(patterns)))


def d_rel(patterns) -> float:
    """Geometric mean of pair distances relative to their average.

    1.0 means all pair distances are equal (the best possible spread);
    degenerate sets with a zero pair distance report 0.0.
    """
    dists = _pair_distances(patterns)
    avg = float(np.mean(dists))
    if avg == 0.0 or np.any(dists == 0.0):
        return 0.0
    return float(np.exp(np.mean(np.log(dists / avg))))


def _grouped(patterns, labels) -> dict:
    patterns = np.asarray(patterns, dtype=np.float64)
    if len(labels) != patterns.shape[0]:
        raise ValueError("one label per pattern required")
    groups: dict = {}
    for pat, lab in zip(patterns, labels):
        groups.setdefault(lab, []).append(pat)
    return {lab: np.asarray(ps) for lab, ps in groups.items()}


def d_inter(patterns, labels) -> float:
    """Mean within-label pair distance, averaged over the labels.

    Labels with a single member cannot contribute a pair and are skipped
    with a warning.
    """
    groups = _grouped(patterns, labels)
    per_label = []
    for lab, ps in groups.items():
        if ps.shape[0] < 2:
            warnings.warn(f"label {lab!r} has a single pattern; skipped")
            continue
        per_label.append(d_avg(ps))
    if not per_label:
        raise ValueError("no label has two or more patterns")
    return float(np.mean(per_label))


def d_intra(patterns, labels) -> float:
    """Mean pairwise distance between the label centroids."""
    groups = _grouped(patterns, labels)
    if len(groups) < 2:
        raise ValueError("need at least two labels")
    centroids = np.asarray([ps.mean(axis=0) for ps in groups.values()])
    return d_avg(centroids)


# ---------------------------------------------------------------------------
# Utterance scores


def edit_distance(produced, target, insertion: int = 1, deletion: int = 1,
                  substitution: int = 2) -> int:
    """Weighted Levenshtein distance between two symbol sequences."""
    m, n = len(produced), len(target)
    prev = [j * insertion for j in range(n + 1)]
    for i in range(1, m + 1):
        cur = [i * deletion] + [0] * n
        for j in range(1, n + 1):
            sub = prev[j - 1] + (0 if produced[i - 1] == target[j - 1]
                                 else substitution)
            cur[j] = min(prev[j] + deletion, cur[j - 1] + insertion, sub)
        prev = cur
    return prev[n]


def normalized_edit_distance(produced, target) -> float:
    """Edit distance divided by the target length."""
    return edit_distance(produced, target) / max(len(target), 1)


def f1_word(produced, target) -> float:
    """Multiset word F1 of one produced utterance against its target."""
    if not produced or not target:
        return 0.0
    overlap = sum((Counter(produced) & Counter(target)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(produced)
    recall = overlap / len(target)
    return 2.0 * precision * recall / (precision + recall)


def f1_word_mean(pairs) -> float:
    """Mean per-utterance word F1 over (produced, target) pairs."""
    scores = [f1_word(p, t) for p, t in pairs]
    if not scores:
        raise ValueError("empty pair list")
    return float(np.mean(scores))


def mixed(metric_train: float, metric_test: float) -> float:
    """Equal-weight combination of a training and a test measurement."""
    return 0.5 * (metric_train + metric_test)


# ---------------------------------------------------------------------------
# Projection and significance


@dataclass
class PcaResult:
    coords: np.ndarray       # (n, k) projected coordinates
    components: np.ndarray   # (k, dims) principal directions
    explained: np.ndarray    # (k,) fractions of total variance
    degenerate: bool = False


def pca_project(patterns, k: int = 2) -> PcaResult:
    """Mean-centred projection onto the top-k principal components.

    Components carry a deterministic sign (their largest-magnitude
    loading is positive); explained fractions are relative to the total
    variance, so they are non-increasing and sum to at most 1.
    """
    x = np.asarray(patterns, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need at least two patterns")
    k = min(k, x.shape[1])
    centred = x - x.mean(axis=0)
    cov = centred.T @ centred / (x.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    eigvals = np.clip(eigvals[::-1], 0.0, None)
    eigvecs = eigvecs[:, ::-1]
    total = float(eigvals.sum())
    if total == 0.0:
        return PcaResult(coords=np.zeros((x.shape[0], k)),
                         components=np.zeros((k, x.shape[1])),
                         explained=np.zeros(k), degenerate=True)
    components = []
    for idx in range(k):
        vec = eigvecs[:, idx]
        if vec[np.argmax(np.abs(vec))] < 0:
            vec = -vec
        components.append(vec)
    components = np.asarray(components)
    return PcaResult(coords=centred @ components.T, components=components,
                     explained=eigvals[:k] / total)


@dataclass
class TTestResult:
    statistic: float
    dof: float
    p_value: float
    degenerate: bool = False


def two_sample_t(a, b) -> TTestResult:
    """Welch's unequal-variance t test, two-sided.

    The p value comes from the regularised incomplete beta function.
    When both samples have zero variance the test is degenerate and the
    p value collapses to 1 (equal means) or 0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("each sample needs at least two values")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if va == 0.0 and vb == 0.0:
        p = 1.0 if a.mean() == b.mean() else 0.0
        return TTestResult(statistic=math.inf if p == 0.0 else 0.0,
                           dof=float(a.size + b.size - 2), p_value=p,
                           degenerate=True)
    sa, sb = va / a.size, vb / b.size
    t = (a.mean() - b.mean()) / math.sqrt(sa + sb)
    dof = (sa + sb) ** 2 / (sa ** 2 / (a.size - 1) + sb ** 2 / (b.size - 1))
    p = float(betainc(dof / 2.0, 0.5, dof / (dof + t * t)))
    return TTestResult(statistic=float(t), dof=float(dof), p_value=p)
