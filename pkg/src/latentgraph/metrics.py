"""Recovery-quality metrics over binarized edge supports."""

from __future__ import annotations

import numpy as np

from .graphs import Gso, GsoKind, InvalidInputError


def binarize(s_hat, rel_threshold: float = 0.1, laplacian: bool = False) -> frozenset:
    """Edge support of a (weighted) shift-operator estimate.

    Keeps unordered pairs whose magnitude exceeds ``rel_threshold`` times the
    largest off-diagonal magnitude. Laplacian-kind inputs have their
    off-diagonal sign flipped first, so edges are read from the negated
    couplings. Accepts a Gso (kind drives the flip) or a plain matrix.
    """
    if isinstance(s_hat, Gso):
        laplacian = s_hat.kind in (GsoKind.LAPLACIAN, GsoKind.LAPLACIAN_RELAXED)
        s_hat = s_hat.matrix
    m = np.asarray(s_hat, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInputError("expected a square matrix")
    off = -m if laplacian else m.copy()
    np.fill_diagonal(off, 0.0)
    mags = np.abs(off)
    peak = float(mags.max()) if mags.size else 0.0
    if peak == 0.0:
        return frozenset()
    rows, cols = np.where(np.triu(mags > rel_threshold * peak, k=1))
    return frozenset((int(i), int(j)) for i, j in zip(rows, cols))


def edge_set_from_adjacency(adjacency: np.ndarray, tol: float = 0.5) -> frozenset:
    """Edge set of a ground-truth (binary) adjacency block."""
    a = np.asarray(adjacency, dtype=float)
    rows, cols = np.where(np.triu(np.abs(a) > tol, k=1))
    return frozenset((int(i), int(j)) for i, j in zip(rows, cols))


def fscore(est: frozenset, truth: frozenset) -> tuple:
    """(F-score, precision, recall) of an estimated edge set against the truth.

    Conventions for degenerate sets: an empty estimate against a nonempty
    truth scores zero precision; two empty sets score a perfect 1.
    """
    est, truth = frozenset(est), frozenset(truth)
    if not est and not truth:
        return 1.0, 1.0, 1.0
    tp = len(est & truth)
    precision = tp / len(est) if est else 0.0
    recall = tp / len(truth) if truth else 0.0
    if precision + recall == 0.0:
        return 0.0, precision, recall
    return 2.0 * precision * recall / (precision + recall), precision, recall


def nmi(est: frozenset, truth: frozenset, n_nodes: int) -> float:
    """Normalized mutual information between edge-membership indicators.

    Every unordered node pair is one sample with two binary labels (member
    of the estimate / member of the truth); NMI is the mutual information
    normalized by the geometric mean of the marginal entropies. Degenerate
    zero-entropy marginals give 1 when the indicator vectors are identical
    and 0 otherwise.
    """
    if n_nodes < 2:
        raise InvalidInputError("need at least two nodes")
    total = n_nodes * (n_nodes - 1) // 2
    n11 = len(est & truth)
    n10 = len(est) - n11
    n01 = len(truth) - n11
    n00 = total - n11 - n10 - n01
    joint = np.array([[n00, n01], [n10, n11]], dtype=float) / total
    pe = joint.sum(axis=1)
    pt = joint.sum(axis=0)

    def entropy(p):
        nz = p[p > 0.0]
        return float(-(nz * np.log(nz)).sum())

    he, ht = entropy(pe), entropy(pt)
    if he == 0.0 or ht == 0.0:
        return 1.0 if est == truth else 0.0
    mi = 0.0
    for a in (0, 1):
        for b in (0, 1):
            if joint[a, b] > 0.0:
                mi += joint[a, b] * np.log(joint[a, b] / (pe[a] * pt[b]))
    return float(mi / np.sqrt(he * ht))


def perfect_recovery(est: frozenset, truth: frozenset) -> bool:
    """True iff the estimated support matches the ground truth exactly."""
    return frozenset(est) == frozenset(truth)


def top_edge_curve(s_hat: np.ndarray, truth: frozenset, max_k: int) -> list:
    """Fraction of true edges among the k strongest estimated pairs, k = 1..max_k.

    Pairs are ranked by absolute weight, ties broken lexicographically for
    determinism. Returns a list of (k, fraction-of-top-k-that-are-true).
    """
    m = np.asarray(s_hat, dtype=float)
    n = m.shape[0]
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if max_k > len(pairs):
        raise InvalidInputError(f"max_k={max_k} exceeds {len(pairs)} candidate pairs")
    order = sorted(pairs, key=lambda p: (-abs(m[p[0], p[1]]), p))
    curve = []
    hits = 0
    for k, pair in enumerate(order[:max_k], start=1):
        hits += pair in truth
        curve.append((k, hits / k))
    return curve


def relative_error(est: np.ndarray, truth: np.ndarray) -> float:
    """Frobenius relative error; utility only, not an acceptance metric."""
    t = np.asarray(truth, dtype=float)
    denom = np.linalg.norm(t)
    err = float(np.linalg.norm(np.asarray(est, dtype=float) - t))
    return err if denom == 0.0 else err / denom
