"""Topology estimators over an observed covariance block.

All estimators take an O x O covariance (sample or ensemble), a
hyperparameter bundle and a solver configuration, and return an
InferenceResult holding the estimated observed shift block plus latent
diagnostics. Estimators are deterministic given their inputs.

The covariance is internally rescaled to unit spectral norm, so the
regularization weights are interpreted on that scale and transfer across
generative models; latent estimates (K, r, cross-covariance factors) are
scaled back to the original units on return.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graphs import CovEstimate, Gso, GsoKind, InvalidInputError
from .prox import (
    Block,
    CompositeProblem,
    EdgeStructure,
    ProxTerm,
    RowSumFloorProjection,
    SolveStatus,
    SolverConfig,
    build_laplacian,
    commutator_operator,
    ConsensusTerm,
    dykstra_prox,
    edge_structure,
    group_col_shrink,
    laplacian_adjoint,
    project_nonneg,
    prox_hinge_trace,
    prox_neg_log,
    prox_psd_trace,
    reweight_from,
    soft_threshold_weighted,
    solve_composite,
    solve_consensus_admm,
    solve_edge_coupled_admm,
    svt,
)


class DegenerateProblemError(ValueError):
    """The data admits no informative solution (e.g. zero covariance, no barrier)."""


@dataclass(frozen=True)
class SolverHyperparams:
    """Regularization weights and iteration counts shared by the estimators.

    All weights are interpreted against a covariance rescaled to unit
    spectral norm. ``rho_c`` is the penalized stand-in for the robust
    commutativity tolerance; ``rho`` plays the same role inside the
    factorized alternating scheme.
    """

    alpha: float = 0.01
    beta: float = 0.1
    gamma_nuc: float = 1.0
    gamma_21: float = 1.0
    eta: float = 0.1
    nu: float = 1.0
    rho: float = 100.0
    rho_c: float = 100.0
    delta_rw: float = 1e-3
    lambda1: float = 0.05
    lambda2: float = 0.5
    h_bound: int = 1
    t_rw: int = 5

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma_nuc", "gamma_21", "eta", "nu", "rho",
                     "rho_c", "lambda1", "lambda2"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative")
        if self.delta_rw <= 0.0:
            raise ValueError("delta_rw must be positive")
        if self.h_bound < 1:
            raise ValueError("h_bound must be >= 1")
        if self.t_rw < 1:
            raise ValueError("t_rw must be >= 1")

    def replace(self, **kwargs) -> "SolverHyperparams":
        from dataclasses import replace as _replace

        return _replace(self, **kwargs)


@dataclass
class InferenceResult:
    """Estimated observed shift block plus latent diagnostics."""

    s_o_hat: np.ndarray
    kind: GsoKind
    k_hat: np.ndarray | None = None
    factors: tuple | None = None  # (s_oh_hat, c_oh_hat)
    r_hat: float = 0.0
    b_hat: np.ndarray | None = None
    objective_trace: np.ndarray = field(default_factory=lambda: np.empty(0))
    status: SolveStatus = SolveStatus.CONVERGED
    lv_violation: bool = False


def _cov_matrix(cov) -> np.ndarray:
    if not isinstance(cov, CovEstimate):
        cov = CovEstimate(np.asarray(cov, dtype=float))
    return np.asarray(cov.matrix, dtype=float)


def _spectral_scale(c: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(c)[-1])


def _snap_small(m: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    out = m.copy()
    out[np.abs(out) < tol] = 0.0
    return out


def _fix_sign(u: np.ndarray, vt: np.ndarray) -> tuple:
    """Make the first nonzero entry of each left singular vector positive."""
    u = u.copy()
    vt = vt.copy()
    for j in range(u.shape[1]):
        col = u[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12 * max(np.abs(col).max(), 1e-300))
        if nz.size and col[nz[0]] < 0.0:
            u[:, j] = -col
            vt[j, :] = -vt[j, :]
    return u, vt


def _init_factors(k_norm: np.ndarray, h: int) -> tuple:
    """Split a latent-coupling estimate into sign-feasible rank-one factors.

    The coupling recovered by the convex solve is essentially skew, whose
    singular pairs are rotation-degenerate, so "top singular vectors" does
    not pin the factors down. Each column is chosen greedily: rotate within
    the leading pair to maximize the nonnegative mass of the cross-shift
    direction, clamp it, fit the covariance-side factor by least squares,
    and deflate. Factor scales absorb the square root of the fitted
    magnitude on each side.
    """
    o = k_norm.shape[0]
    s_oh = np.zeros((o, h))
    c_oh = np.zeros((o, h))
    residual = k_norm.copy()
    thetas = np.linspace(0.0, 2.0 * np.pi, 64, endpoint=False)
    for j in range(h):
        u, sing, vt = np.linalg.svd(residual)
        u, vt = _fix_sign(u, vt)
        if sing[0] <= 1e-14:
            break
        v1 = vt[0]
        v2 = vt[1] if residual.shape[0] > 1 and sing[1] > 1e-14 * sing[0] else np.zeros(o)
        best, best_score = v1, -np.inf
        for theta in thetas:
            cand = np.cos(theta) * v1 + np.sin(theta) * v2
            score = float(np.sum(np.maximum(cand, 0.0) ** 2))
            if score > best_score:
                best_score, best = score, cand
        s_dir = np.maximum(best, 0.0)
        nrm = np.linalg.norm(s_dir)
        if nrm <= 1e-14:
            break
        s_dir = s_dir / nrm
        c_fit = residual @ s_dir
        mag = np.linalg.norm(c_fit)
        if mag <= 1e-14:
            break
        root = np.sqrt(mag)
        s_oh[:, j] = root * s_dir
        c_oh[:, j] = c_fit / root
        residual = residual - np.outer(c_fit, s_dir)
    return s_oh, c_oh


# ---------------------------------------------------------------------------
# smooth-signal family


def _transpose_perm(o: int) -> np.ndarray:
    """Permutation matrix of the transpose on raveled o x o matrices."""
    perm = np.zeros((o * o, o * o))
    idx = np.arange(o * o)
    perm[idx, (idx % o) * o + idx // o] = 1.0
    return perm


def _smooth_family(
    c_mat: np.ndarray,
    hp: SolverHyperparams,
    cfg: SolverConfig,
    *,
    relaxed_set: bool,
    gamma_nuc: float,
    gamma_21: float,
    rho_c: float,
    fix_k_zero: bool,
) -> InferenceResult:
    """Shared solver for the smoothness-based estimators.

    Estimates a (relaxed) combinatorial Laplacian through the exact edge
    parametrization, by consensus ADMM with one exact prox per nonsmooth
    piece: the sign clamp, the log barrier on node degrees (scalar prox),
    the nonnegative local-variation constraint (its slack minimized out,
    leaving a scalar hinge), the latent norms, and the quadratic
    commutativity penalty when present. When both latent penalties are zero
    the latent block is disabled entirely (plain smooth learning).
    """
    o = c_mat.shape[0]
    if o < 2:
        raise InvalidInputError("need at least two observed nodes")
    scale = _spectral_scale(c_mat)
    if scale <= 0.0:
        if hp.beta <= 0.0:
            raise DegenerateProblemError("zero covariance with no log barrier")
        scale = 1.0
    c_bar = c_mat / scale
    struct = edge_structure(o)
    rows, cols = struct.rows, struct.cols
    diag_c = np.diag(c_bar)
    # per-edge smoothness cost: C_ii + C_jj - 2 C_ij, nonnegative for PSD C
    c_edge = diag_c[rows] + diag_c[cols] - 2.0 * c_bar[rows, cols]
    alpha, beta = hp.alpha, hp.beta
    use_k = not (fix_k_zero or (gamma_nuc == 0.0 and gamma_21 == 0.0))

    p_dim = struct.n_edges
    e_dim = o if relaxed_set else 0
    k_dim = o * o if use_k else 0
    n = p_dim + e_dim + k_dim
    sl_w = slice(0, p_dim)
    sl_e = slice(p_dim, p_dim + e_dim)
    sl_k = slice(p_dim + e_dim, n)

    quad_diag = np.zeros(n)
    quad_diag[sl_w] = 4.0 * alpha

    terms = []
    # sign clamp on (w, e)
    g_clamp = np.zeros((p_dim + e_dim, n))
    g_clamp[:, : p_dim + e_dim] = np.eye(p_dim + e_dim)
    terms.append(ConsensusTerm(g_clamp, lambda v, mu: project_nonneg(v), lambda v: 0.0))
    # log barrier on node degrees (exact scalar prox)
    g_bar = np.zeros((o, n))
    g_bar[:, sl_w] = struct.incidence
    if relaxed_set:
        g_bar[:, sl_e] = np.eye(o)
    terms.append(
        ConsensusTerm(
            g_bar,
            lambda v, mu: prox_neg_log(v, beta / mu),
            lambda v: -beta * float(np.log(np.clip(v, 1e-300, None)).sum()),
        )
    )
    # nonnegative local variation: slack minimized out, leaving a scalar
    # hinge of the data-plus-latent-trace value
    g_lv = np.zeros((1, n))
    g_lv[0, sl_w] = c_edge
    if relaxed_set:
        g_lv[0, sl_e] = diag_c
    if use_k:
        g_lv[0, sl_k] = 2.0 * np.eye(o).ravel()

    def hinge_prox(v, mu):
        val = v[0]
        if val <= 0.0:
            return v.copy()
        return np.array([val - 1.0 / mu if val >= 1.0 / mu else 0.0])

    terms.append(ConsensusTerm(g_lv, hinge_prox, lambda v: max(float(v[0]), 0.0)))
    if use_k:
        g_norm = np.zeros((o * o, n))
        g_norm[:, sl_k] = np.eye(o * o)
        norm_proxes = []
        if gamma_nuc > 0.0:
            norm_proxes.append(lambda m, tt: svt(m, gamma_nuc * tt))
        if gamma_21 > 0.0:
            norm_proxes.append(lambda m, tt: group_col_shrink(m, gamma_21 * tt))

        def norm_prox(v, mu):
            m = v.reshape(o, o)
            if len(norm_proxes) == 1:
                return norm_proxes[0](m, 1.0 / mu).ravel()
            return dykstra_prox(norm_proxes, m, 1.0 / mu).ravel()

        def norm_value(v):
            m = v.reshape(o, o)
            val = 0.0
            if gamma_nuc > 0.0:
                val += gamma_nuc * float(np.linalg.svd(m, compute_uv=False).sum())
            if gamma_21 > 0.0:
                val += gamma_21 * float(np.linalg.norm(m, axis=0).sum())
            return val

        terms.append(ConsensusTerm(g_norm, norm_prox, norm_value))
        if rho_c > 0.0:
            # penalized commutativity residual, corrected by the skew part of
            # the latent coupling
            g_comm = np.zeros((o * o, n))
            g_comm[:, sl_w] = commutator_operator(c_bar, struct, laplacian=True)
            g_comm[:, sl_k] = np.eye(o * o) - _transpose_perm(o)
            terms.append(
                ConsensusTerm(
                    g_comm,
                    lambda v, mu: (mu * v) / (mu + 2.0 * rho_c),
                    lambda v: rho_c * float(v @ v),
                )
            )

    x0 = np.zeros(n)
    x0[sl_w] = 1.0 / (o - 1)
    result = solve_consensus_admm(quad_diag, np.zeros(n), terms, cfg, x0)

    feas = result.z[0]
    w_hat = np.maximum(feas[:p_dim], 0.0)
    e_hat = np.maximum(feas[p_dim:], 0.0) if relaxed_set else None
    lap_hat = _snap_small(build_laplacian(w_hat, e_hat, struct))
    k_hat = result.z[3].reshape(o, o).copy() if use_k else None
    lv_part = float(c_edge @ w_hat) + (float(diag_c @ e_hat) if relaxed_set else 0.0)
    if use_k:
        lv_part += 2.0 * float(np.trace(k_hat))
    r_hat = max(0.0, -lv_part)
    kind = GsoKind.LAPLACIAN_RELAXED if relaxed_set else GsoKind.LAPLACIAN
    return InferenceResult(
        s_o_hat=lap_hat,
        kind=kind,
        k_hat=scale * k_hat if k_hat is not None else None,
        r_hat=scale * r_hat,
        objective_trace=result.objective_trace,
        status=result.status,
        lv_violation=bool(lv_part + r_hat < -1e-9),
    )


def infer_gsm_lo(cov, hp: SolverHyperparams, cfg: SolverConfig, fix_k_zero: bool = False) -> InferenceResult:
    """Smooth-signal inference of the observed Laplacian block over the relaxed set.

    The estimated block carries a nonnegative diagonal surplus (row sums
    >= 0) absorbing edges toward hidden nodes; the latent trace coupling is
    regularized by the nuclear norm.
    """
    c_mat = _cov_matrix(cov)
    return _smooth_family(
        c_mat, hp, cfg,
        relaxed_set=True,
        gamma_nuc=hp.gamma_nuc,
        gamma_21=0.0,
        rho_c=0.0,
        fix_k_zero=fix_k_zero,
    )


def infer_gsm(cov, hp: SolverHyperparams, cfg: SolverConfig, variant: str = "both",
              fix_k_zero: bool = False) -> InferenceResult:
    """Smooth-signal inference of the Laplacian of the observed adjacency.

    ``variant`` selects the latent regularizer: "lr" (nuclear norm), "gl"
    (column-group shrinkage) or "both". Zero latent penalties (or
    ``fix_k_zero``) reduce to plain smooth learning without a latent block.
    """
    c_mat = _cov_matrix(cov)
    gamma_nuc, gamma_21 = _variant_gammas(hp, variant)
    return _smooth_family(
        c_mat, hp, cfg,
        relaxed_set=False,
        gamma_nuc=gamma_nuc,
        gamma_21=gamma_21,
        rho_c=0.0,
        fix_k_zero=fix_k_zero,
    )


def infer_gsm_st(cov, hp: SolverHyperparams, cfg: SolverConfig, variant: str = "lr",
                 fix_k_zero: bool = False) -> InferenceResult:
    """Joint smooth-and-stationary inference: smooth objective plus the
    penalized commutativity residual tying the Laplacian to the covariance."""
    c_mat = _cov_matrix(cov)
    gamma_nuc, gamma_21 = _variant_gammas(hp, variant)
    return _smooth_family(
        c_mat, hp, cfg,
        relaxed_set=False,
        gamma_nuc=gamma_nuc,
        gamma_21=gamma_21,
        rho_c=hp.rho_c,
        fix_k_zero=fix_k_zero,
    )


def _variant_gammas(hp: SolverHyperparams, variant: str) -> tuple:
    v = variant.lower()
    if v == "lr":
        return hp.gamma_nuc, 0.0
    if v == "gl":
        return 0.0, hp.gamma_21
    if v == "both":
        return hp.gamma_nuc, hp.gamma_21
    raise ValueError(f"unknown variant {variant!r} (expected lr, gl or both)")


# ---------------------------------------------------------------------------
# stationary family


def _stationary_solve(
    c_bar: np.ndarray,
    weights: np.ndarray,
    eta: float,
    rho_c: float,
    cfg: SolverConfig,
    s0: np.ndarray | None,
    gso_set: str,
):
    """Weighted-l1 commutativity solve in normalized covariance units.

    The latent coupling K has a closed-form minimizer given S (the nuclear
    prox of half the commutator, restricted to skew matrices), so it is
    eliminated analytically: what remains is a single projected-gradient
    block over the edge weights with a smooth spectral penalty on the
    commutator's singular values. The weighted l1 term is linear on the
    sign-constrained feasible set and folds into the gradient; sparsity
    still lands on exact zeros through the feasible-set projection.
    """
    o = c_bar.shape[0]
    struct = edge_structure(o)
    rows, cols = struct.rows, struct.cols
    w_sym = (weights + weights.T) / 2.0
    if gso_set == "adjacency":
        lin = 2.0 * w_sym[rows, cols]
    elif gso_set == "laplacian":
        lin = 2.0 * w_sym[rows, cols] + np.diag(w_sym)[rows] + np.diag(w_sym)[cols]
    else:
        raise ValueError(f"unknown gso_set {gso_set!r}")
    tau = eta / (8.0 * rho_c) if rho_c > 0.0 else 0.0

    def s_matrix(s):
        if gso_set == "adjacency":
            m = np.zeros((o, o))
            m[rows, cols] = s
            m[cols, rows] = s
            return m
        return build_laplacian(s, None, struct)

    def sigma_cost(sig):
        # optimal-K cost per commutator singular value: nuclear part above the
        # Huber crossover 2 tau, quadratic residual below it
        return eta * np.maximum(sig / 2.0 - tau, 0.0).sum() + rho_c * np.sum(
            np.minimum(sig, 2.0 * tau) ** 2
        )

    def coupling_value(zvec):
        if rho_c <= 0.0:
            return 0.0
        sig = np.linalg.svd(zvec.reshape(o, o), compute_uv=False)
        return float(sigma_cost(sig))

    def coupling_prox(vvec, mu):
        if rho_c <= 0.0:
            return vvec
        u, sig, vt = np.linalg.svd(vvec.reshape(o, o))
        quad = mu * sig / (mu + 2.0 * rho_c)
        linr = sig - eta / (2.0 * mu)
        new_sig = np.where(quad <= 2.0 * tau, quad, np.where(linr >= 2.0 * tau, linr, 2.0 * tau))
        return ((u * new_sig) @ vt).ravel()

    projection = RowSumFloorProjection(o, floor=1.0)
    if s0 is None:
        s0 = np.full(struct.n_edges, 1.0 / (o - 1))
    a_op = commutator_operator(c_bar, struct, laplacian=(gso_set == "laplacian"))
    result = solve_edge_coupled_admm(
        lin, a_op, np.zeros(o * o), coupling_prox, coupling_value, projection, cfg, s0
    )
    s_hat = result.s
    m_hat = (a_op @ s_hat).reshape(o, o)
    k_hat = svt(-m_hat / 2.0, tau) if rho_c > 0.0 else np.zeros((o, o))
    return s_hat, k_hat, s_matrix, result


def infer_gst(cov, hp: SolverHyperparams, cfg: SolverConfig, gso_set: str = "adjacency") -> InferenceResult:
    """Stationarity-based inference: sparse shift block plus a low-rank latent
    coupling, tied to the covariance through the penalized commutativity
    residual. The default feasible set is the adjacency set with unit
    row-sum floor; the Laplacian variant uses the edge parametrization with
    the same floor on the degrees."""
    return _gst_weighted(cov, np.array(1.0), hp, cfg, gso_set)


def _gst_weighted(cov, weights, hp, cfg, gso_set, s0=None) -> InferenceResult:
    c_mat = _cov_matrix(cov)
    o = c_mat.shape[0]
    scale = _spectral_scale(c_mat)
    c_bar = c_mat / scale if scale > 0.0 else c_mat
    w_full = np.broadcast_to(np.asarray(weights, dtype=float), (o, o)).copy()
    s_hat, k_hat, s_matrix, result = _stationary_solve(
        c_bar, w_full, hp.eta, hp.rho_c, cfg, s0, gso_set
    )
    s_mat = _snap_small(s_matrix(s_hat))
    kind = GsoKind.ADJACENCY if gso_set == "adjacency" else GsoKind.LAPLACIAN
    return InferenceResult(
        s_o_hat=s_mat,
        kind=kind,
        k_hat=scale * k_hat,
        objective_trace=result.objective_trace,
        status=result.status,
    )


def infer_gst_rw(cov, hp: SolverHyperparams, cfg: SolverConfig, gso_set: str = "adjacency") -> InferenceResult:
    """Reweighted stationarity-based inference.

    Runs ``t_rw`` rounds of the weighted-l1 solve; round one uses unit
    weights (the plain convex solve) and each subsequent round reweights
    entries by the reciprocal of the previous estimate, sharpening sparsity.
    """
    c_mat = _cov_matrix(cov)
    o = c_mat.shape[0]
    weights = np.ones((o, o))
    s0 = None
    traces = []
    last = None
    struct = edge_structure(o)
    for _ in range(hp.t_rw):
        last = _gst_weighted(c_mat, weights, hp, cfg, gso_set, s0=s0)
        traces.append(last.objective_trace)
        weights = reweight_from(last.s_o_hat, hp.delta_rw)
        if gso_set == "adjacency":
            s0 = last.s_o_hat[struct.rows, struct.cols]
        else:
            s0 = -last.s_o_hat[struct.rows, struct.cols]
    last.objective_trace = np.concatenate(traces)
    return last


def infer_gst_fact(cov, hp: SolverHyperparams, cfg: SolverConfig,
                   init_hp: SolverHyperparams | None = None,
                   init_cfg: SolverConfig | None = None) -> InferenceResult:
    """Factorized stationarity-based inference by alternating block updates.

    Replaces the latent coupling with its explicit factors (the
    observed-hidden shift and covariance blocks) and cycles three updates:
    a reweighted sparse solve for the observed block, a sign-constrained
    reweighted ridge solve for the cross shift block, and a closed-form
    ridge solve for the cross covariance block. Each update minimizes a
    global upper bound of the factorized objective from the current iterate,
    so the objective trace is monotone nonincreasing and the iterates
    converge to a stationary point.

    ``init_hp`` configures the convex initialization solve (which plays a
    different role than the alternating scheme and wants its own weights);
    it defaults to ``hp``.
    """
    c_mat = _cov_matrix(cov)
    o = c_mat.shape[0]
    h = hp.h_bound
    scale = _spectral_scale(c_mat)
    c_bar = c_mat / scale if scale > 0.0 else c_mat
    struct = edge_structure(o)
    rows, cols = struct.rows, struct.cols
    delta = hp.delta_rw
    eta, nu, rho = hp.eta, hp.nu, hp.rho

    # init: convex solve (own, deeper budget), then split the coupling into
    # rank-h factors
    if init_cfg is None:
        init_cfg = SolverConfig(
            max_iters=max(4000, cfg.max_iters),
            rel_tol=min(1e-9, cfg.rel_tol),
            penalty_step=cfg.penalty_step,
        )
    base = _gst_weighted(c_mat, np.ones((o, o)), init_hp or hp, init_cfg, "adjacency")
    k_norm = base.k_hat / scale if scale > 0.0 else base.k_hat
    s_oh, c_oh = _init_factors(k_norm, h)
    s_edge = base.s_o_hat[rows, cols]

    inner_cfg = SolverConfig(
        max_iters=80, rel_tol=max(cfg.rel_tol * 0.1, 1e-10), penalty_step=cfg.penalty_step
    )
    a_op = commutator_operator(c_bar, struct)
    from scipy.linalg import cho_factor

    gram_factor = cho_factor(np.eye(struct.n_edges) + a_op.T @ a_op, lower=False)

    def s_matrix(s):
        m = np.zeros((o, o))
        m[rows, cols] = s
        m[cols, rows] = s
        return m

    def objective(s, s_oh_cur, c_oh_cur):
        s_mat = s_matrix(s)
        e_mat = c_bar @ s_mat + c_oh_cur @ s_oh_cur.T - s_mat @ c_bar - s_oh_cur @ c_oh_cur.T
        val = float(np.log(np.abs(s_mat) + delta).sum())
        val += eta * float(np.sum(s_oh_cur * s_oh_cur))
        val += nu * float(np.log(np.abs(s_oh_cur) + delta).sum())
        val += eta * float(np.sum(c_oh_cur * c_oh_cur))
        val += rho * float(np.sum(e_mat * e_mat))
        return val

    trace = [objective(s_edge, s_oh, c_oh)]
    status = SolveStatus.MAX_ITERS
    n_outer = cfg.max_iters
    projection = RowSumFloorProjection(o, floor=1.0)
    warm_admm = None
    warmup = True

    for it in range(cfg.max_iters):
        s_prev, s_oh_prev, c_oh_prev = s_edge, s_oh, c_oh

        # step 1: observed block, reweighted l1 + commutativity (ADMM with a
        # descent guard against the current iterate). Skipped on the first
        # cycle so the factors adapt to the initialization before the
        # observed block trusts them.
        if not warmup:
            w_o = reweight_from(s_matrix(s_edge), delta)
            lin = 2.0 * w_o[rows, cols]
            b_mat = c_oh @ s_oh.T
            d_off = (b_mat - b_mat.T).ravel()

            def surrogate1(s):
                e_vec = a_op @ s + d_off
                return float(lin @ s) + rho * float(e_vec @ e_vec)

            res1 = solve_edge_coupled_admm(
                lin,
                a_op,
                d_off,
                lambda v, mu: (mu * v) / (mu + 2.0 * rho),
                lambda zvec: rho * float(zvec @ zvec),
                projection,
                inner_cfg,
                s_edge,
                gram_factor=gram_factor,
                warm=warm_admm,
            )
            warm_admm = res1.warm
            if surrogate1(res1.s) <= surrogate1(s_edge):
                s_edge = res1.s
        warmup = False
        s_mat_cur = s_matrix(s_edge)
        m_mat = c_bar @ s_mat_cur - s_mat_cur @ c_bar

        # step 2: cross shift block, reweighted l1 + ridge + commutativity
        w_oh = nu * reweight_from(s_oh, delta)

        def sv2(state):
            x = state["x"]
            e_mat = m_mat + c_oh @ x.T - x @ c_oh.T
            return float(np.sum(w_oh * x)) + eta * float(np.sum(x * x)) + rho * float(np.sum(e_mat * e_mat))

        def sg2(state, name):
            x = state["x"]
            e_mat = m_mat + c_oh @ x.T - x @ c_oh.T
            return w_oh + 2.0 * eta * x - 4.0 * rho * (e_mat @ c_oh)

        res2 = solve_composite(
            CompositeProblem(
                blocks=[Block("x", s_oh,
                              term=ProxTerm(fn=lambda x: 0.0, prox=lambda y, t: project_nonneg(y)),
                              step=1.0 / (2.0 * eta + 16.0 * rho + 1.0))],
                smooth_value=sv2,
                smooth_grad=sg2,
            ),
            inner_cfg,
        )
        s_oh = res2.blocks["x"]

        # step 3: cross covariance block, strictly convex ridge, closed form
        c_oh = _solve_cross_cov(m_mat, s_oh, eta, rho)

        trace.append(objective(s_edge, s_oh, c_oh))
        if trace[-1] > trace[-2] + 1e-8 * (1.0 + abs(trace[-2])):
            raise AssertionError(
                f"alternating objective increased at cycle {it}: {trace[-2]} -> {trace[-1]}"
            )
        num = np.sqrt(
            float(np.sum((s_edge - s_prev) ** 2))
            + float(np.sum((s_oh - s_oh_prev) ** 2))
            + float(np.sum((c_oh - c_oh_prev) ** 2))
        )
        den = max(
            np.sqrt(float(np.sum(s_prev**2)) + float(np.sum(s_oh_prev**2)) + float(np.sum(c_oh_prev**2))),
            1e-12,
        )
        if num / den < cfg.rel_tol:
            status = SolveStatus.CONVERGED
            n_outer = it + 1
            break

    s_hat = _snap_small(s_matrix(s_edge))
    return InferenceResult(
        s_o_hat=s_hat,
        kind=GsoKind.ADJACENCY,
        k_hat=scale * (c_oh @ s_oh.T),
        factors=(s_oh.copy(), scale * c_oh),
        objective_trace=np.asarray(trace),
        status=status,
    )


def _solve_cross_cov(m_mat: np.ndarray, s_oh: np.ndarray, eta: float, rho: float) -> np.ndarray:
    """Minimize eta*||C||_F^2 + rho*||M + C S^T - S C^T||_F^2 over C (O x H)."""
    o, h = s_oh.shape

    def apply_map(c):
        e_mat = c @ s_oh.T - s_oh @ c.T
        return 2.0 * rho * (e_mat @ s_oh) + eta * c

    dim = o * h
    op = np.empty((dim, dim))
    basis = np.zeros((o, h))
    for j in range(dim):
        basis.flat[j] = 1.0
        op[:, j] = apply_map(basis).ravel()
        basis.flat[j] = 0.0
    rhs = (-2.0 * rho * (m_mat @ s_oh)).ravel()
    sol = np.linalg.solve(op + 1e-12 * np.eye(dim), rhs)
    return sol.reshape(o, h)


# ---------------------------------------------------------------------------
# baselines


def correlation_network(cov, threshold: float) -> InferenceResult:
    """Direct-method baseline: threshold the observed covariance itself."""
    if threshold < 0.0:
        raise ValueError("threshold must be nonnegative")
    c = _cov_matrix(cov).copy()
    np.fill_diagonal(c, 0.0)
    adj = (np.abs(c) > threshold).astype(float)
    return InferenceResult(s_o_hat=adj, kind=GsoKind.ADJACENCY)


def lvgl(cov, lambda1: float, lambda2: float, cfg: SolverConfig) -> InferenceResult:
    """Latent-variable sparse precision baseline.

    Maximizes the penalized Gaussian log-likelihood of a precision matrix
    split into a sparse part minus a PSD low-rank part. The log-det term acts
    as a barrier keeping the difference positive definite; the low-rank block
    is handled with the exact PSD-restricted nuclear prox.
    """
    if lambda1 <= 0.0 or lambda2 <= 0.0:
        raise ValueError("lambda1 and lambda2 must be positive")
    c_mat = _cov_matrix(cov)
    return _logdet_solve(c_mat, lambda1, lambda2, cfg, with_lowrank=True)


def glasso(cov, lambda1: float, cfg: SolverConfig) -> InferenceResult:
    """Sparse precision baseline (the latent-variable model with B fixed to zero).

    ``lambda1 = 0`` is allowed and gives the unpenalized maximum-likelihood
    precision.
    """
    if lambda1 < 0.0:
        raise ValueError("lambda1 must be nonnegative")
    c_mat = _cov_matrix(cov)
    return _logdet_solve(c_mat, lambda1, 0.0, cfg, with_lowrank=False)


def _logdet_solve(c_mat, lambda1, lambda2, cfg, with_lowrank):
    o = c_mat.shape[0]
    # mean-eigenvalue normalization keeps the precision-style solution at
    # unit scale, where the l1 weights are meaningful
    scale = float(np.trace(c_mat)) / o
    c_bar = c_mat / scale if scale > 0.0 else c_mat

    def chol_logdet(m):
        # keep a safe margin from the PD boundary so gradients stay bounded
        try:
            np.linalg.cholesky(m - 1e-8 * np.eye(o))
            chol = np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            return None
        return 2.0 * float(np.log(np.diag(chol)).sum())

    def smooth_value(state):
        diff = state["p"] - state["b"] if with_lowrank else state["p"]
        ld = chol_logdet(diff)
        if ld is None:
            return np.inf
        return -ld + float(np.sum(c_bar * diff))

    def smooth_grad(state, name):
        diff = state["p"] - state["b"] if with_lowrank else state["p"]
        inv = np.linalg.inv(diff)
        inv = (inv + inv.T) / 2.0
        if name == "p":
            return -inv + c_bar
        return inv - c_bar

    p0 = np.linalg.inv(c_bar + (lambda1 + 0.1) * np.eye(o))
    blocks = [
        Block("p", (p0 + p0.T) / 2.0,
              term=ProxTerm(fn=lambda p: lambda1 * float(np.abs(p).sum()),
                            prox=lambda y, t: soft_threshold_weighted(y, np.ones_like(y), lambda1 * t))),
    ]
    if with_lowrank:
        blocks.append(
            Block("b", np.zeros((o, o)),
                  term=ProxTerm(fn=lambda b: lambda2 * float(np.trace(b)),
                                prox=lambda y, t: prox_psd_trace(y, lambda2 * t))),
        )
    problem = CompositeProblem(blocks=blocks, smooth_value=smooth_value, smooth_grad=smooth_grad)
    result = solve_composite(problem, cfg)
    p_hat = (result.blocks["p"] + result.blocks["p"].T) / 2.0
    b_hat = result.blocks.get("b")
    return InferenceResult(
        s_o_hat=_snap_small(p_hat),
        kind=GsoKind.GENERIC,
        b_hat=b_hat if with_lowrank else None,
        objective_trace=result.objective_trace,
        status=result.status,
    )


# ---------------------------------------------------------------------------
# robustness-penalty calibration


def calibrate_rho_c(cov, hp: SolverHyperparams, cfg: SolverConfig, target_residual: float,
                    solver=infer_gst, lo: float = 1e-2, hi: float = 1e6,
                    max_steps: int = 20, rel_tol: float = 0.25):
    """Bisection on log(rho_c) so the solution's commutativity residual matches a target.

    The penalized formulation stands in for a hard residual bound; given a
    target residual (in normalized covariance units) this helper finds a
    penalty weight whose solution lands within ``rel_tol`` of it. Returns
    the calibrated hyperparameters and the final result.
    """
    from .graphs import commutativity_residual as _resid

    c_mat = _cov_matrix(cov)
    scale = _spectral_scale(c_mat)
    c_bar = c_mat / scale if scale > 0.0 else c_mat

    def residual_at(rho_c):
        res = solver(c_mat, hp.replace(rho_c=rho_c), cfg)
        k_norm = res.k_hat / scale if (res.k_hat is not None and scale > 0.0) else np.zeros_like(c_bar)
        return _resid(c_bar, res.s_o_hat, k_norm), res

    lo_v, hi_v = np.log(lo), np.log(hi)
    best = None
    for _ in range(max_steps):
        mid = np.exp((lo_v + hi_v) / 2.0)
        resid, res = residual_at(mid)
        best = (hp.replace(rho_c=mid), res)
        if abs(resid - target_residual) <= rel_tol * target_residual:
            break
        if resid > target_residual:
            lo_v = np.log(mid)  # larger penalty shrinks the residual
        else:
            hi_v = np.log(mid)
    return best
