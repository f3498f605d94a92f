"""Proximal operators, feasible-set parametrizations and projections, and the
backtracking block proximal-gradient engine shared by every estimator.

The engine minimizes a sum of one smooth term (evaluated over all blocks;
return +inf outside the domain, e.g. for log barriers) and one prox-able
nonsmooth term per block. Steps are accepted only when the full objective
does not increase, so the recorded objective trace of a convex problem is
monotone nonincreasing up to floating-point slack.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

from .graphs import Gso, GsoKind


class DivergenceError(RuntimeError):
    """Non-finite objective; usually a misconfigured penalty_step."""


class InvalidParamError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """Iteration and tolerance controls for the splitting engine."""

    max_iters: int = 2000
    rel_tol: float = 1e-6
    penalty_step: float = 1.0
    verbose: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidParamError("max_iters must be >= 1")
        if self.rel_tol <= 0.0:
            raise InvalidParamError("rel_tol must be positive")
        if self.penalty_step <= 0.0:
            raise InvalidParamError("penalty_step must be positive")


# ---------------------------------------------------------------------------
# elementwise / spectral proximal operators


def svt(matrix: np.ndarray, tau: float) -> np.ndarray:
    """Singular value thresholding: the proximal operator of tau * nuclear norm.

    Minimizes tau*||Z||_* + 0.5*||Z - matrix||_F^2.
    """
    if tau < 0.0:
        raise InvalidParamError("tau must be nonnegative")
    m = np.asarray(matrix, dtype=float)
    if tau == 0.0:
        return m.copy()
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    return (u * np.maximum(s - tau, 0.0)) @ vt


def group_col_shrink(matrix: np.ndarray, tau: float) -> np.ndarray:
    """Column-wise shrinkage: the proximal operator of tau * ||.||_{2,1}.

    Each column c maps to c * max(1 - tau/||c||_2, 0); zero columns stay zero.
    """
    if tau < 0.0:
        raise InvalidParamError("tau must be nonnegative")
    m = np.asarray(matrix, dtype=float)
    norms = np.linalg.norm(m, axis=0)
    scale = np.where(norms > 0.0, np.maximum(1.0 - tau / np.where(norms > 0.0, norms, 1.0), 0.0), 0.0)
    return m * scale[None, :]


def soft_threshold_weighted(matrix: np.ndarray, weights, tau: float) -> np.ndarray:
    """Entrywise soft thresholding with per-entry weights: prox of tau*sum W_ij |M_ij|."""
    m = np.asarray(matrix, dtype=float)
    w = np.asarray(weights, dtype=float)
    if w.ndim and w.shape != m.shape:
        raise InvalidParamError(f"weight shape {w.shape} does not match matrix shape {m.shape}")
    if np.any(w < 0.0) or tau < 0.0:
        raise InvalidParamError("weights and tau must be nonnegative")
    return np.sign(m) * np.maximum(np.abs(m) - tau * w, 0.0)


def reweight_from(s_prev: np.ndarray, delta: float) -> np.ndarray:
    """Reweighting map W_ij = 1 / (|S_ij| + delta) for iterative sparsification."""
    if delta <= 0.0:
        raise InvalidParamError("delta must be positive")
    return 1.0 / (np.abs(np.asarray(s_prev, dtype=float)) + delta)


def project_nonneg(v: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(v, dtype=float), 0.0)


def project_nonpos(v: np.ndarray) -> np.ndarray:
    return np.minimum(np.asarray(v, dtype=float), 0.0)


def prox_neg_log(v: np.ndarray, tau: float) -> np.ndarray:
    """Exact scalar prox of -tau*sum(log x_i): positive root of x^2 - v x - tau = 0."""
    if tau < 0.0:
        raise InvalidParamError("tau must be nonnegative")
    v = np.asarray(v, dtype=float)
    return 0.5 * (v + np.sqrt(v * v + 4.0 * tau))


def prox_hinge_trace(matrix: np.ndarray, tau: float, offset: float) -> np.ndarray:
    """Prox of tau * max(2*tr(K) + offset, 0) over square matrices K."""
    m = np.asarray(matrix, dtype=float)
    n = m.shape[0]
    val = 2.0 * np.trace(m) + offset
    if val <= 0.0:
        return m.copy()
    shift = min(tau, val / (4.0 * n))
    out = m.copy()
    idx = np.arange(n)
    out[idx, idx] -= 2.0 * shift
    return out


def prox_psd_trace(matrix: np.ndarray, tau: float) -> np.ndarray:
    """Prox of tau*||B||_* restricted to symmetric PSD matrices.

    On the PSD cone the nuclear norm is the trace, so the prox shifts the
    eigenvalues down by tau and clips at zero.
    """
    m = np.asarray(matrix, dtype=float)
    m = (m + m.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(m)
    shifted = np.maximum(eigvals - tau, 0.0)
    return (eigvecs * shifted) @ eigvecs.T


def dykstra_prox(proxes, v: np.ndarray, tau: float, max_sweeps: int = 80, tol: float = 1e-12) -> np.ndarray:
    """Prox of a sum of convex functions by cyclic Dykstra iterations.

    ``proxes`` is a sequence of callables (point, tau) -> point, each the
    exact prox of one summand.
    """
    x = np.asarray(v, dtype=float).copy()
    incs = [np.zeros_like(x) for _ in proxes]
    for _ in range(max_sweeps):
        x_prev = x
        for k, p in enumerate(proxes):
            y = x + incs[k]
            x = p(y, tau)
            incs[k] = y - x
        if np.abs(x - x_prev).max() <= tol * (1.0 + np.abs(x).max()):
            break
    return x


# ---------------------------------------------------------------------------
# Laplacian parametrization


@dataclass(frozen=True)
class EdgeStructure:
    """Cached index arrays for the upper-triangle edge parametrization."""

    n: int
    rows: np.ndarray
    cols: np.ndarray
    incidence: np.ndarray  # n x p, entry 1 when the edge touches the node
    node_edges: tuple      # per-node arrays of incident edge positions

    @property
    def n_edges(self) -> int:
        return self.rows.size


@lru_cache(maxsize=None)
def edge_structure(n: int) -> EdgeStructure:
    rows, cols = np.triu_indices(n, k=1)
    p = rows.size
    incidence = np.zeros((n, p))
    incidence[rows, np.arange(p)] = 1.0
    incidence[cols, np.arange(p)] = 1.0
    node_edges = tuple(np.flatnonzero(incidence[i]) for i in range(n))
    rows.setflags(write=False)
    cols.setflags(write=False)
    incidence.setflags(write=False)
    return EdgeStructure(n=n, rows=rows, cols=cols, incidence=incidence, node_edges=node_edges)


def _order_from_edge_count(p: int) -> int:
    n = int(round((1.0 + np.sqrt(1.0 + 8.0 * p)) / 2.0))
    if n * (n - 1) // 2 != p:
        raise InvalidParamError(f"{p} is not a triangular number of edges")
    return n


@dataclass(frozen=True)
class LaplacianParam:
    """Exact parametrization of the (relaxed) combinatorial Laplacian sets.

    ``w`` holds the nonnegative upper-triangle edge weights; ``d_extra`` an
    optional nonnegative diagonal surplus. With d_extra = 0 the materialized
    matrix has zero row sums; otherwise row sums equal d_extra, which keeps
    the relaxed row-sum condition satisfied by construction.
    """

    w: np.ndarray
    d_extra: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        n = _order_from_edge_count(w.size)
        if w.size and w.min() < 0.0:
            raise InvalidParamError("edge weights must be nonnegative")
        object.__setattr__(self, "w", w.copy())
        if self.d_extra is not None:
            e = np.asarray(self.d_extra, dtype=float)
            if e.shape != (n,):
                raise InvalidParamError(f"d_extra must have length {n}")
            if e.size and e.min() < 0.0:
                raise InvalidParamError("diagonal surplus must be nonnegative")
            object.__setattr__(self, "d_extra", e.copy())

    @property
    def n(self) -> int:
        return _order_from_edge_count(self.w.size)


def build_laplacian(w: np.ndarray, d_extra: np.ndarray | None, struct: EdgeStructure) -> np.ndarray:
    """Raw (validation-free) materialization for solver hot paths."""
    n = struct.n
    lap = np.zeros((n, n))
    lap[struct.rows, struct.cols] = -w
    lap[struct.cols, struct.rows] = -w
    diag = struct.incidence @ w
    if d_extra is not None:
        diag = diag + d_extra
    lap[np.arange(n), np.arange(n)] = diag
    return lap


def laplacian_adjoint(grad_matrix: np.ndarray, struct: EdgeStructure) -> np.ndarray:
    """Adjoint of w -> L(w): maps a matrix gradient to an edge-weight gradient."""
    g = grad_matrix
    d = np.diag(g)
    return d[struct.rows] + d[struct.cols] - g[struct.rows, struct.cols] - g[struct.cols, struct.rows]


def materialize_laplacian(param: LaplacianParam) -> Gso:
    """Materialize the parametrized matrix as a (relaxed) Laplacian GSO."""
    struct = edge_structure(param.n)
    lap = build_laplacian(param.w, param.d_extra, struct)
    relaxed = param.d_extra is not None and float(np.max(param.d_extra)) > 0.0
    return Gso(lap, GsoKind.LAPLACIAN_RELAXED if relaxed else GsoKind.LAPLACIAN)


def laplacian_param_from_matrix(matrix: np.ndarray, tol: float = 1e-9) -> LaplacianParam:
    """Extract (w, d_extra) from a matrix already in the (relaxed) Laplacian set."""
    m = np.asarray(matrix, dtype=float)
    n = m.shape[0]
    struct = edge_structure(n)
    off = m[struct.rows, struct.cols]
    if off.size and off.max() > tol:
        raise InvalidParamError("matrix has positive off-diagonal entries")
    w = np.maximum(-off, 0.0)
    d_extra = np.maximum(m.sum(axis=1), 0.0)
    if float(np.max(d_extra, initial=0.0)) <= tol:
        return LaplacianParam(w=w, d_extra=None)
    return LaplacianParam(w=w, d_extra=d_extra)


# ---------------------------------------------------------------------------
# projection onto {s >= 0, row sums >= floor}


class RowSumFloorProjection:
    """Euclidean projection onto {s >= 0, (R s)_i >= floor for every node}.

    R is the node-edge incidence of the complete upper-triangle edge vector,
    so the set encodes nonnegative adjacencies whose every row sums to at
    least ``floor``. Solved through a semismooth Newton method on the dual
    multipliers (warm-started across calls; the active rows of an iterative
    solver barely move between consecutive projections), falling back to
    plain dual coordinate ascent whenever Newton stalls.
    """

    def __init__(self, n: int, floor: float = 1.0, tol: float = 1e-11, max_sweeps: int = 500):
        self.struct = edge_structure(n)
        self.floor = float(floor)
        self.tol = float(tol)
        self.max_sweeps = int(max_sweeps)
        self.lam = np.zeros(n)

    def _kkt_ok(self, lam, gap):
        if gap.max() > self.tol:
            return False
        return bool(np.all((lam <= 0.0) | (gap >= -1e-7)))

    def __call__(self, y: np.ndarray, tau: float = 0.0) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        r = self.struct.incidence
        quick = np.maximum(y, 0.0)
        if (r @ quick).min() >= self.floor - self.tol:
            self.lam[:] = 0.0
            return quick
        lam = np.maximum(self.lam, 0.0)
        v = y + r.T @ lam
        x = np.maximum(v, 0.0)
        if self._kkt_ok(lam, self.floor - r @ x):
            return x
        for outer in range(30):
            # one ascent sweep repairs rows whose incident edges all sit below
            # zero (the reduced Newton system is singular there), then Newton
            # polishes the regular active set
            lam = self._ascent_sweeps(y, lam, 1)
            v = y + r.T @ lam
            x = np.maximum(v, 0.0)
            gap = self.floor - r @ x
            if self._kkt_ok(lam, gap):
                self.lam = lam
                return x
            active = (lam > 0.0) | (gap > self.tol)
            supp = v > 0.0
            ra = r[np.ix_(active, supp)]
            mat = ra @ ra.T
            rhs = self.floor - ra @ y[supp]
            try:
                sol = np.linalg.solve(mat + 1e-13 * np.eye(mat.shape[0]), rhs)
            except np.linalg.LinAlgError:
                continue
            new_lam = np.zeros_like(lam)
            new_lam[active] = np.maximum(sol, 0.0)
            # damp when the Newton guess worsens feasibility (degenerate sets)
            v_new = y + r.T @ new_lam
            gap_new = self.floor - r @ np.maximum(v_new, 0.0)
            if gap_new.max() > max(gap.max(), self.tol) and outer > 3:
                new_lam = (new_lam + lam) / 2.0
            lam = new_lam
        lam = self._ascent_sweeps(y, lam, self.max_sweeps)
        self.lam = lam
        return np.maximum(y + r.T @ lam, 0.0)

    def _ascent_sweeps(self, y, lam, n_sweeps):
        struct = self.struct
        v = y + struct.incidence.T @ lam
        for _ in range(n_sweeps):
            max_delta = 0.0
            for i in range(struct.n):
                idx = struct.node_edges[i]
                base = v[idx] - lam[i]
                new_lam = _row_multiplier(base, self.floor)
                delta = new_lam - lam[i]
                if delta != 0.0:
                    v[idx] += delta
                    lam[i] = new_lam
                    max_delta = max(max_delta, abs(delta))
            if max_delta <= self.tol:
                break
        return lam


def _row_multiplier(base: np.ndarray, floor: float) -> float:
    """Smallest lam >= 0 with sum(max(0, base + lam)) >= floor (0 if already met)."""
    vals = base.tolist()
    if sum(v for v in vals if v > 0.0) >= floor:
        return 0.0
    vals.sort(reverse=True)
    cum = 0.0
    m = len(vals)
    for k, v in enumerate(vals, start=1):
        cum += v
        lam = (floor - cum) / k
        if v + lam >= 0.0 and (k == m or vals[k] + lam < 0.0):
            return lam if lam > 0.0 else 0.0
    lam = (floor - cum) / m
    return lam if lam > 0.0 else 0.0


# ---------------------------------------------------------------------------
# composite solver


class SolveStatus(Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"


def commutator_operator(c: np.ndarray, struct: EdgeStructure, laplacian: bool = False) -> np.ndarray:
    """Dense matrix of the map s -> vec(C S(s) - S(s) C) over edge vectors.

    S(s) is the symmetric zero-diagonal matrix holding s on the (upper)
    triangle, or the combinatorial Laplacian built from s when ``laplacian``
    is set. The commutator of two symmetric matrices is skew, so the map
    lands in the skew subspace.
    """
    n = struct.n
    op = np.zeros((n * n, struct.n_edges))
    m = np.zeros((n, n))
    for p in range(struct.n_edges):
        i, j = int(struct.rows[p]), int(struct.cols[p])
        m[:] = 0.0
        m[:, j] += c[:, i]
        m[:, i] += c[:, j]
        m[j, :] -= c[i, :]
        m[i, :] -= c[j, :]
        if laplacian:
            # L-edge: diagonal picks up +1 at (i,i) and (j,j), off-diagonal -1
            m *= -1.0
            m[:, i] += c[:, i]
            m[:, j] += c[:, j]
            m[i, :] -= c[i, :]
            m[j, :] -= c[j, :]
        op[:, p] = m.ravel()
    return op


@dataclass
class AdmmResult:
    s: np.ndarray
    coupling: np.ndarray
    objective_trace: np.ndarray
    status: SolveStatus
    n_iters: int
    warm: dict | None = None


def solve_edge_coupled_admm(
    lin: np.ndarray,
    a_op: np.ndarray,
    offset: np.ndarray,
    coupling_prox,
    coupling_value,
    projection,
    cfg: SolverConfig,
    s0: np.ndarray,
    gram_factor=None,
    warm: dict | None = None,
) -> AdmmResult:
    """Consensus ADMM for  min  lin's + g(A s + offset)  over a feasible edge set.

    ``a_op`` is the dense matrix of the linear coupling (rows index the
    vectorized coupled matrix), ``coupling_prox(v, mu)`` the exact prox of g
    with quadratic weight mu/2, ``projection`` the Euclidean projector onto
    the feasible set. Splitting variables mirror both the feasible set and
    the coupled matrix, so the linear solve factors once per call and the
    penalty strength inside g never stiffens the iteration.
    """
    from scipy.linalg import cho_factor, cho_solve

    p_dim = lin.size
    factor = gram_factor if gram_factor is not None else cho_factor(
        np.eye(p_dim) + a_op.T @ a_op, lower=False
    )
    s = np.asarray(s0, dtype=float).copy()
    if warm:
        mu = warm["mu"]
        z = warm["z"].copy()
        u = warm["u"].copy()
        big_z = warm["big_z"].copy()
        big_u = warm["big_u"].copy()
    else:
        mu = cfg.penalty_step
        z = s.copy()
        u = np.zeros(p_dim)
        big_z = a_op @ s + offset
        big_u = np.zeros_like(big_z)

    def objective(edge_vec):
        return float(lin @ edge_vec) + coupling_value(a_op @ edge_vec + offset)

    trace = [objective(z)]
    status = SolveStatus.MAX_ITERS
    n_iters = cfg.max_iters
    for it in range(cfg.max_iters):
        rhs = (z - u) + a_op.T @ (big_z - big_u - offset) - lin / mu
        s = cho_solve(factor, rhs)
        a_s = a_op @ s + offset
        z_old, big_z_old = z, big_z
        z = projection(s + u)
        big_z = coupling_prox(a_s + big_u, mu)
        u = u + s - z
        big_u = big_u + a_s - big_z
        trace.append(objective(z))
        r_primal = np.sqrt(float(np.sum((s - z) ** 2)) + float(np.sum((a_s - big_z) ** 2)))
        r_dual = mu * np.sqrt(float(np.sum((z - z_old) ** 2)) + float(np.sum((big_z - big_z_old) ** 2)))
        scale = max(
            np.sqrt(float(np.sum(s**2)) + float(np.sum(a_s**2))),
            np.sqrt(float(np.sum(z**2)) + float(np.sum(big_z**2))),
            1e-12,
        )
        if r_primal <= cfg.rel_tol * scale and r_dual <= cfg.rel_tol * scale * mu:
            status = SolveStatus.CONVERGED
            n_iters = it + 1
            break
        if it % 10 == 9:
            if r_primal > 10.0 * r_dual / mu:
                mu *= 2.0
                u /= 2.0
                big_u /= 2.0
            elif r_dual / mu > 10.0 * r_primal:
                mu /= 2.0
                u *= 2.0
                big_u *= 2.0
    return AdmmResult(
        s=z,
        coupling=(a_op @ z + offset),
        objective_trace=np.asarray(trace),
        status=status,
        n_iters=n_iters,
        warm={"mu": mu, "z": z, "u": u, "big_z": big_z, "big_u": big_u},
    )


@dataclass
class ConsensusTerm:
    """One affine consensus constraint z = G x with an exact prox for its g."""

    matrix: np.ndarray          # m_i x n
    prox: object                # (v, mu) -> argmin g(z) + mu/2 ||z - v||^2
    value: object               # g(z), for the reported objective trace


@dataclass
class ConsensusResult:
    x: np.ndarray
    z: list
    objective_trace: np.ndarray
    status: SolveStatus
    n_iters: int


def solve_consensus_admm(
    quad_diag: np.ndarray,
    lin: np.ndarray,
    terms: list,
    cfg: SolverConfig,
    x0: np.ndarray,
    smooth_value=None,
) -> ConsensusResult:
    """Consensus ADMM for  min 0.5 x'diag(q)x + lin'x + sum_i g_i(G_i x).

    Each g_i needs only its exact prox; the x-update is a single linear
    solve with a cached factorization (refreshed when the penalty weight
    adapts). Solves the convex program to its global optimum; the reported
    trace evaluates the true objective at the consensus iterate.
    """
    from scipy.linalg import cho_factor, cho_solve

    n = x0.size
    mu = cfg.penalty_step
    gram = sum(t.matrix.T @ t.matrix for t in terms)

    def factorize(mu_val):
        return cho_factor(np.diag(quad_diag / mu_val) + gram, lower=False)

    factor = factorize(mu)
    x = np.asarray(x0, dtype=float).copy()
    z = [t.matrix @ x for t in terms]
    u = [np.zeros(t.matrix.shape[0]) for t in terms]

    def objective(x_vec):
        val = 0.5 * float(quad_diag @ (x_vec * x_vec)) + float(lin @ x_vec)
        if smooth_value is not None:
            val += smooth_value(x_vec)
        for t in terms:
            val += float(t.value(t.matrix @ x_vec))
        return val

    trace = [objective(x)]
    status = SolveStatus.MAX_ITERS
    n_iters = cfg.max_iters
    for it in range(cfg.max_iters):
        rhs = -lin / mu
        for t, zi, ui in zip(terms, z, u):
            rhs += t.matrix.T @ (zi - ui)
        x = cho_solve(factor, rhs)
        r_primal_sq = 0.0
        r_dual_sq = 0.0
        scale_sq = 1e-24
        for k, t in enumerate(terms):
            gx = t.matrix @ x
            z_old = z[k]
            z[k] = t.prox(gx + u[k], mu)
            u[k] = u[k] + gx - z[k]
            r_primal_sq += float(np.sum((gx - z[k]) ** 2))
            r_dual_sq += float(np.sum((z[k] - z_old) ** 2))
            scale_sq = max(scale_sq, float(np.sum(gx * gx)), float(np.sum(z[k] ** 2)))
        trace.append(objective(x))
        scale = np.sqrt(scale_sq)
        if np.sqrt(r_primal_sq) <= cfg.rel_tol * scale and np.sqrt(r_dual_sq) <= cfg.rel_tol * scale:
            status = SolveStatus.CONVERGED
            n_iters = it + 1
            break
        if it % 20 == 19:
            rp, rd = np.sqrt(r_primal_sq), np.sqrt(r_dual_sq)
            if rp > 10.0 * rd and mu < 1e6:
                mu *= 2.0
                u = [ui / 2.0 for ui in u]
                factor = factorize(mu)
            elif rd > 10.0 * rp and mu > 1e-6:
                mu /= 2.0
                u = [ui * 2.0 for ui in u]
                factor = factorize(mu)
    return ConsensusResult(
        x=x, z=z, objective_trace=np.asarray(trace), status=status, n_iters=n_iters
    )


@dataclass
class ProxTerm:
    """A prox-able nonsmooth term: its value and exact proximal operator."""

    fn: object
    prox: object


@dataclass
class Block:
    """One variable block: initial point plus an optional nonsmooth term.

    ``exact`` bypasses the proximal-gradient step with a closed-form block
    minimizer (a callable on the state dict); exact minimization cannot
    increase the objective, so descent is preserved.
    """

    name: str
    init: np.ndarray
    term: ProxTerm | None = None
    step: float | None = None
    exact: object = None


@dataclass
class CompositeProblem:
    """Objective = smooth_value(state) + sum of per-block nonsmooth terms.

    ``smooth_value`` may return +inf outside the domain (log barriers,
    log-det); rejected by backtracking. ``smooth_grad(state, name)`` returns
    the partial gradient with respect to one block. When ``state`` is given,
    the engine stores its iterates in that dict, which lets prox closures
    read the other blocks' current values (coupled nonsmooth terms).
    """

    blocks: list
    smooth_value: object
    smooth_grad: object
    state: dict | None = None


@dataclass
class SolveResult:
    blocks: dict
    objective_trace: np.ndarray
    status: SolveStatus
    n_iters: int


_MAX_BACKTRACKS = 60
_STEP_GROWTH = 1.3


def solve_composite(problem: CompositeProblem, cfg: SolverConfig) -> SolveResult:
    """Cyclic backtracking proximal-gradient descent over the blocks.

    Every accepted step decreases the full objective (up to 1e-12 relative
    slack), so the trace is monotone for convex problems. Stops when the
    stacked iterate moves less than rel_tol in relative norm, or when no
    block can make progress.
    """
    state = problem.state if problem.state is not None else {}
    state.clear()
    for b in problem.blocks:
        state[b.name] = np.array(b.init, dtype=float)
    steps = {b.name: (b.step if b.step is not None else cfg.penalty_step) for b in problem.blocks}
    # reference steps: movement is measured as if taken at this step size, so
    # a backtracked (tiny) step cannot masquerade as convergence
    ref_steps = dict(steps)
    term_vals = {}
    for b in problem.blocks:
        term_vals[b.name] = float(b.term.fn(state[b.name])) if b.term is not None else 0.0
    smooth = float(problem.smooth_value(state))
    if not np.isfinite(smooth):
        raise DivergenceError("starting point lies outside the smooth term's domain")
    total = smooth + sum(term_vals.values())
    trace = [total]
    status = SolveStatus.MAX_ITERS
    n_iters = cfg.max_iters

    for it in range(cfg.max_iters):
        delta_sq = 0.0
        base_sq = 0.0
        any_progress = False
        for b in problem.blocks:
            x = state[b.name]
            base_sq += float(np.sum(x * x))
            slack = 1e-12 * (1.0 + abs(total))
            if b.exact is not None:
                cand = np.asarray(b.exact(state), dtype=float)
                state[b.name] = cand
                new_smooth = float(problem.smooth_value(state))
                cand_term = float(b.term.fn(cand)) if b.term is not None else 0.0
                new_total = new_smooth + cand_term + sum(
                    v for k, v in term_vals.items() if k != b.name
                )
                if np.isfinite(new_total) and new_total <= total + slack:
                    diff = cand - x
                    delta_sq += float(np.sum(diff * diff))
                    term_vals[b.name] = cand_term
                    total = new_total
                    if np.any(diff):
                        any_progress = True
                else:
                    state[b.name] = x
                continue
            grad = problem.smooth_grad(state, b.name)
            t = steps[b.name]
            accepted = False
            for _ in range(_MAX_BACKTRACKS):
                moved = x - t * grad
                cand = b.term.prox(moved, t) if b.term is not None else moved
                state[b.name] = cand
                new_smooth = float(problem.smooth_value(state))
                if np.isfinite(new_smooth):
                    cand_term = float(b.term.fn(cand)) if b.term is not None else 0.0
                    new_total = new_smooth + cand_term + sum(
                        v for k, v in term_vals.items() if k != b.name
                    )
                    if new_total <= total + slack:
                        accepted = True
                        break
                t *= 0.5
            if accepted:
                diff = cand - x
                scale_up = min(ref_steps[b.name] / max(t, 1e-300), 1e3)
                delta_sq += float(np.sum(diff * diff)) * max(scale_up, 1.0) ** 2
                term_vals[b.name] = cand_term
                total = new_total
                steps[b.name] = min(t * _STEP_GROWTH, 1e8 * ref_steps[b.name])
                if np.any(diff):
                    any_progress = True
            else:
                state[b.name] = x
                steps[b.name] = max(steps[b.name] * 0.5, 1e-300)
        if not np.isfinite(total):
            raise DivergenceError("objective became non-finite; check penalty_step")
        trace.append(total)
        if cfg.verbose and (it % 50 == 0 or it == cfg.max_iters - 1):
            print(f"iter {it:5d} objective {total:.6e}")
        rel_change = np.sqrt(delta_sq) / max(np.sqrt(base_sq), 1e-12)
        if rel_change < cfg.rel_tol or not any_progress:
            status = SolveStatus.CONVERGED
            n_iters = it + 1
            break

    return SolveResult(
        blocks=state,
        objective_trace=np.asarray(trace),
        status=status,
        n_iters=n_iters,
    )
