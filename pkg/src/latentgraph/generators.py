"""Synthetic instance generators: random graphs, hidden-node selection, and
the signal/covariance models used by the benchmark sweeps.

Every generator is a pure function of an explicit integer seed, so fixed
seeds give bit-reproducible instances and distinct seeds can run in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .graphs import (
    CovEstimate,
    Gso,
    GsoKind,
    InvalidInputError,
    NodePartition,
    SignalMatrix,
)

MAX_GRAPH_RETRIES = 100


class GenerationError(RuntimeError):
    """Raised when repeated draws cannot produce a graph without isolated nodes."""


@dataclass(frozen=True)
class ErdosRenyi:
    """Bernoulli(p) edges, independently on the upper triangle."""

    p: float

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError("edge probability must lie in (0, 1]")


@dataclass(frozen=True)
class Rbf:
    """Gaussian kernel on uniform points in the unit square, thresholded and binarized."""

    sigma: float = 0.5
    threshold: float = 0.75

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ValueError("kernel length-scale must be positive")
        if not 0.0 <= self.threshold < 1.0:
            raise ValueError("threshold must lie in [0, 1)")


GraphModel = ErdosRenyi | Rbf


class HiddenPolicy(Enum):
    UNIFORM_RANDOM = "uniform"
    MIN_DEGREE = "min_degree"


def gen_graph(model: GraphModel, n: int, rng_seed: int) -> Gso:
    """Draw an unweighted adjacency with no isolated node.

    Redraws (fresh placements / coin flips) up to MAX_GRAPH_RETRIES times
    until every node has at least one neighbor.
    """
    if n < 2:
        raise InvalidInputError("need at least two nodes")
    rng = np.random.default_rng(rng_seed)
    for _ in range(MAX_GRAPH_RETRIES):
        if isinstance(model, ErdosRenyi):
            upper = rng.random((n, n)) < model.p
            adj = np.triu(upper, k=1).astype(float)
            adj = adj + adj.T
        else:
            points = rng.random((n, 2))
            diff = points[:, None, :] - points[None, :, :]
            dist2 = np.sum(diff * diff, axis=-1)
            kernel = np.exp(-dist2 / (2.0 * model.sigma**2))
            adj = (kernel >= model.threshold).astype(float)
            np.fill_diagonal(adj, 0.0)
        if adj.sum(axis=1).min() >= 1.0:
            return Gso(adj, GsoKind.ADJACENCY)
    raise GenerationError(
        f"no isolated-node-free graph after {MAX_GRAPH_RETRIES} draws (n={n}, model={model})"
    )


def select_hidden(adjacency: Gso, n_hidden: int, policy: HiddenPolicy, rng_seed: int) -> NodePartition:
    """Choose which nodes stay unobserved.

    MIN_DEGREE takes the n_hidden smallest-degree nodes with ties broken by
    lowest index; UNIFORM_RANDOM samples without replacement.
    """
    n = adjacency.n
    if not 0 <= n_hidden < n:
        raise InvalidInputError(f"hidden count must satisfy 0 <= H < {n}")
    if n_hidden == 0:
        return NodePartition(observed=tuple(range(n)), hidden=())
    if policy is HiddenPolicy.MIN_DEGREE:
        degrees = adjacency.matrix.sum(axis=1)
        order = np.argsort(degrees, kind="stable")
        hidden = sorted(int(i) for i in order[:n_hidden])
    else:
        # permutation prefix: uniform without replacement, and nested across
        # hidden counts for a fixed seed (the H-sweep then uses common draws)
        rng = np.random.default_rng(rng_seed)
        hidden = sorted(int(i) for i in rng.permutation(n)[:n_hidden])
    observed = tuple(i for i in range(n) if i not in set(hidden))
    return NodePartition(observed=observed, hidden=tuple(hidden))


def _sorted_eigh(matrix: np.ndarray):
    eigvals, eigvecs = np.linalg.eigh(matrix)
    return eigvals, eigvecs


def gen_smooth_signals(laplacian: Gso, n_samples: int, rng_seed: int) -> SignalMatrix:
    """Low-pass factor signals X = V Z with Z ~ N(0, pinv(Lambda)).

    Spectral modes with (numerically) zero eigenvalue get zero variance, so
    the constant mode of a connected graph carries no energy.
    """
    if n_samples < 1:
        raise InvalidInputError("need at least one sample")
    eigvals, eigvecs = _sorted_eigh(laplacian.matrix)
    scale = max(eigvals[-1], 1.0)
    std = np.where(eigvals > 1e-10 * scale, 1.0 / np.sqrt(np.maximum(eigvals, 1e-300)), 0.0)
    rng = np.random.default_rng(rng_seed)
    z = rng.standard_normal((laplacian.n, n_samples)) * std[:, None]
    return SignalMatrix(eigvecs @ z)


def gen_bandlimited_signals(
    laplacian: Gso, band_size: int, band_start: int, n_samples: int, rng_seed: int
) -> SignalMatrix:
    """Signals spanned by ``band_size`` consecutive Laplacian eigenvectors.

    Eigenvalues sorted ascending, so band_start=0 activates the smoothest
    modes and sliding the band upward raises the local variation.
    """
    n = laplacian.n
    if band_size < 1 or band_start < 0 or band_start + band_size > n:
        raise InvalidInputError(f"band [{band_start}, {band_start + band_size}) out of range for N={n}")
    _, eigvecs = _sorted_eigh(laplacian.matrix)
    rng = np.random.default_rng(rng_seed)
    z = rng.standard_normal((band_size, n_samples))
    return SignalMatrix(eigvecs[:, band_start : band_start + band_size] @ z)


def _filter_polynomial(s: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    out = coeffs[-1] * np.eye(s.shape[0])
    for c in coeffs[-2::-1]:
        out = s @ out + c * np.eye(s.shape[0])
    return out


def cov_poly(gso: Gso, order: int, rng_seed: int, coeffs=None) -> CovEstimate:
    """Ensemble covariance C = (sum_l h_l S^l)^2 from unit-norm random coefficients.

    PSD by construction and commuting with the shift operator. ``coeffs``
    overrides the random draw (used by the degenerate closed-form checks).
    """
    if order < 0:
        raise InvalidInputError("filter order must be nonnegative")
    if coeffs is None:
        rng = np.random.default_rng(rng_seed)
        coeffs = rng.standard_normal(order + 1)
    coeffs = np.asarray(coeffs, dtype=float)
    coeffs = coeffs / np.linalg.norm(coeffs)
    h = _filter_polynomial(gso.matrix, coeffs)
    c = h @ h
    return CovEstimate((c + c.T) / 2.0, num_samples=None, is_ensemble=True)


def gen_stationary_signals(gso: Gso, order: int, n_samples: int, rng_seed: int) -> SignalMatrix:
    """White noise filtered through the random polynomial filter.

    Draws the same coefficients as :func:`cov_poly` for the same seed, so the
    sample covariance of these signals converges to that ensemble covariance.
    """
    if n_samples < 1:
        raise InvalidInputError("need at least one sample")
    rng = np.random.default_rng(rng_seed)
    coeffs = rng.standard_normal(order + 1)
    coeffs = coeffs / np.linalg.norm(coeffs)
    h = _filter_polynomial(gso.matrix, coeffs)
    z = rng.standard_normal((gso.n, n_samples))
    return SignalMatrix(h @ z)


def sample_gaussian(cov: CovEstimate, n_samples: int, rng_seed: int) -> SignalMatrix:
    """Zero-mean Gaussian samples with the given (possibly singular) covariance."""
    if n_samples < 1:
        raise InvalidInputError("need at least one sample")
    eigvals, eigvecs = np.linalg.eigh(cov.matrix)
    root = np.sqrt(np.maximum(eigvals, 0.0))
    rng = np.random.default_rng(rng_seed)
    z = rng.standard_normal((cov.n, n_samples))
    return SignalMatrix(eigvecs @ (root[:, None] * z))


def cov_mrf(gso: Gso, delta: float | None, sigma_margin: float, rng_seed: int) -> CovEstimate:
    """Ensemble covariance C = (sigma I + delta S)^{-1}.

    sigma is set to -delta * lambda_min(S) (clipped at 0) plus
    ``sigma_margin``, so the precision's smallest eigenvalue equals the
    margin. ``delta=None`` draws delta uniformly from [0.5, 1.5].
    """
    if sigma_margin <= 0.0:
        raise InvalidInputError("sigma margin must be positive")
    if delta is None:
        delta = float(np.random.default_rng(rng_seed).uniform(0.5, 1.5))
    if delta <= 0.0:
        raise InvalidInputError("delta must be positive")
    s = gso.matrix
    lam_min = float(np.linalg.eigvalsh(s)[0])
    sigma = max(0.0, -delta * lam_min) + sigma_margin
    precision = sigma * np.eye(s.shape[0]) + delta * s
    c = np.linalg.inv(precision)
    return CovEstimate((c + c.T) / 2.0, num_samples=None, is_ensemble=True)


def sample_covariance(signals: SignalMatrix, center: bool = False) -> CovEstimate:
    """Sample covariance X X^T / M.

    No mean subtraction by default: the synthetic models are zero-mean by
    construction. Pass ``center=True`` for real datasets.
    """
    x = signals.data
    if center:
        x = x - x.mean(axis=1, keepdims=True)
    c = x @ x.T / x.shape[1]
    return CovEstimate((c + c.T) / 2.0, num_samples=signals.n_samples, is_ensemble=False)


def add_awgn(signals: SignalMatrix, noise_power: float, rng_seed: int) -> SignalMatrix:
    """Add white Gaussian noise with per-entry variance noise_power * mean signal power.

    The normalization makes ``noise_power`` a noise-to-signal power ratio; a
    zero signal therefore stays exactly zero.
    """
    if noise_power < 0.0:
        raise InvalidInputError("noise power must be nonnegative")
    x = signals.data
    mean_power = float(np.sum(x * x)) / x.size
    std = np.sqrt(noise_power * mean_power)
    rng = np.random.default_rng(rng_seed)
    return SignalMatrix(x + std * rng.standard_normal(x.shape))
