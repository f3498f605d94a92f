"""Acceptance gate: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
summary. The quantitative criteria run the bundled benchmark configs at 30
trials (20 seeds per band for the spectral sweep) with the registry's pinned
hyperparameters; tolerance values are fixed here, not calibrated at runtime.
"""

import os
import time
from dataclasses import replace

import numpy as np
import pytest

from latentgraph import metrics
from latentgraph.estimators import SolverHyperparams, infer_gst, infer_gst_fact, infer_gst_rw
from latentgraph.experiments import (
    GST_DEFAULTS,
    GST_FACT_DEFAULTS,
    build_instance,
    default_spec,
    replicate_config,
    rows_to_csv,
    run_sweep,
)
from latentgraph.generators import (
    HiddenPolicy,
    Rbf,
    cov_poly,
    gen_graph,
    select_hidden,
)
from latentgraph.graphs import (
    CovEstimate,
    block_partition,
    commutativity_residual,
    smoothness_block_decomposition,
    NodePartition,
)
from latentgraph.matio import load_matrix, save_matrix
from latentgraph.prox import SolverConfig, group_col_shrink, soft_threshold_weighted, svt


def announce(criterion: int, ok: bool, detail: str):
    print(f"\nACCEPTANCE {criterion:2d} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def median_by(rows, estimator, axis_field, metric="fscore"):
    out = {}
    for row in rows:
        if row["estimator"] != estimator or row[metric] == "":
            continue
        out.setdefault(row[axis_field], []).append(float(row[metric]))
    return {k: float(np.median(v)) for k, v in out.items()}


def ratio_by(rows, estimator, axis_field):
    out = {}
    for row in rows:
        if row["estimator"] != estimator or row["perfect"] == "":
            continue
        out.setdefault(row[axis_field], []).append(int(row["perfect"]))
    return {k: float(np.mean(v)) for k, v in out.items()}


def nonincreasing(seq, slack=0.02, max_inversions=1):
    inversions = sum(1 for a, b in zip(seq, seq[1:]) if b > a + 1e-12)
    big = sum(1 for a, b in zip(seq, seq[1:]) if b > a + slack)
    return big == 0 and inversions <= max_inversions or (big == 0 and inversions <= max_inversions)


def golden_section(fun, lo, hi, iters=120):
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - phi * (b - a), a + phi * (b - a)
    for _ in range(iters):
        if fun(c) < fun(d):
            b, d = d, c
            c = b - phi * (b - a)
        else:
            a, c = c, d
            d = a + phi * (b - a)
    return (a + b) / 2.0


class TestCriterion1ProxOracles:
    def test_prox_operators_match_oracles(self):
        start = time.time()
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(100):
            m = rng.standard_normal((5, 4)) * rng.uniform(0.2, 3.0)
            tau = rng.uniform(0.05, 1.5)
            # nuclear prox against the Moreau-decomposition oracle
            u, s, vt = np.linalg.svd(m, full_matrices=False)
            oracle = m - (u * np.minimum(s, tau)) @ vt
            worst = max(worst, float(np.abs(svt(m, tau) - oracle).max()))
        for _ in range(100):
            m = rng.standard_normal((4, 3)) * rng.uniform(0.2, 2.0)
            tau = rng.uniform(0.05, 1.5)
            got = group_col_shrink(m, tau)
            for j in range(m.shape[1]):
                c = m[:, j]
                nrm = np.linalg.norm(c)
                k = golden_section(lambda k: tau * abs(k) * nrm + 0.5 * (k - 1) ** 2 * nrm**2, -0.5, 1.5)
                worst = max(worst, float(np.abs(got[:, j] - k * c).max()))
        for _ in range(100):
            m = rng.standard_normal((3, 3))
            w = rng.uniform(0.0, 2.0, size=(3, 3))
            tau = rng.uniform(0.05, 1.5)
            got = soft_threshold_weighted(m, w, tau)
            for idx in np.ndindex(3, 3):
                x = golden_section(
                    lambda x: tau * w[idx] * abs(x) + 0.5 * (x - m[idx]) ** 2,
                    -abs(m[idx]) - 1.0,
                    abs(m[idx]) + 1.0,
                )
                worst = max(worst, abs(got[idx] - x))
        elapsed = time.time() - start
        ok = worst < 1e-6 and elapsed < 10.0
        announce(1, ok, f"prox oracle suite: worst deviation {worst:.2e}, {elapsed:.1f}s (< 10 s)")


class TestCriterion2AlgebraicIdentities:
    def test_decomposition_and_block_commutation(self):
        rng = np.random.default_rng(1)
        worst_dec = 0.0
        for _ in range(100):
            c = rng.standard_normal((20, 20))
            c = (c + c.T) / 2
            lap = rng.standard_normal((20, 20))
            lap = (lap + lap.T) / 2
            hidden = tuple(sorted(rng.permutation(20)[:5].tolist()))
            observed = tuple(i for i in range(20) if i not in hidden)
            part = NodePartition(observed=observed, hidden=hidden)
            terms = smoothness_block_decomposition(c, lap, part)
            err = abs(sum(terms) - float(np.trace(c @ lap)))
            worst_dec = max(worst_dec, err / (np.linalg.norm(c) * np.linalg.norm(lap)))
        worst_comm = 0.0
        for seed in range(20):
            g = gen_graph(Rbf(), 20, seed)
            part = select_hidden(g, 3, HiddenPolicy.MIN_DEGREE, seed)
            cov = cov_poly(g, 3, seed + 100)
            cb = block_partition(cov.matrix, part)
            sb = block_partition(g.matrix, part)
            k = cb.upper_right @ sb.upper_right.T
            resid = commutativity_residual(cb.upper_left, sb.upper_left, k)
            scale = (np.linalg.norm(cb.upper_left) * np.linalg.norm(sb.upper_left)) ** 2
            worst_comm = max(worst_comm, resid / scale)
        ok = worst_dec <= 1e-10 and worst_comm <= 1e-15
        announce(2, ok, f"identities: decomposition {worst_dec:.2e} (<=1e-10), block commutation {worst_comm:.2e} (<=1e-15)")


class TestCriterion3AlternatingDescent:
    def test_descent_and_stabilization(self):
        start = time.time()
        hp = SolverHyperparams(**GST_FACT_DEFAULTS)
        init_hp = hp.replace(**GST_DEFAULTS)
        cfg = SolverConfig(max_iters=2000, rel_tol=1e-6)
        monotone = 0
        converged = 0
        n_inst = 50
        for seed in range(n_inst):
            g = gen_graph(Rbf(), 20, seed)
            part = select_hidden(g, 1, HiddenPolicy.MIN_DEGREE, seed)
            cb = block_partition(cov_poly(g, 1, seed + 100).matrix, part)
            res = infer_gst_fact(
                CovEstimate(cb.upper_left, is_ensemble=True), hp, cfg, init_hp=init_hp
            )
            tr = res.objective_trace
            monotone += bool(np.all(np.diff(tr) <= 1e-8 * (1.0 + np.abs(tr[:-1]))))
            converged += res.status.value == "converged"
        elapsed = time.time() - start
        ok = monotone == n_inst and converged >= 0.95 * n_inst and elapsed < 600.0
        announce(
            3,
            ok,
            f"alternating scheme: monotone {monotone}/{n_inst}, converged {converged}/{n_inst} "
            f"(>=95%), {elapsed:.0f}s (< 600 s)",
        )


@pytest.fixture(scope="module")
def fig1a_rows():
    return run_sweep(replicate_config("fig1a"))


class TestCriterion4HiddenCountTrend:
    def test_fig1a_levels_margins_decay(self, fig1a_rows):
        med_lr = median_by(fig1a_rows, "gsm-lr", "h")
        med_gl = median_by(fig1a_rows, "gsm-gl", "h")
        med_gsm = median_by(fig1a_rows, "gsm", "h")
        hs = sorted(med_lr)
        seq_lr = [med_lr[h] for h in hs]
        seq_gl = [med_gl[h] for h in hs]
        level_ok = seq_lr[0] >= 0.75 and seq_gl[0] >= 0.75
        margin_ok = (
            med_lr[hs[0]] >= med_gsm[hs[0]] + 0.02 and med_gl[hs[0]] >= med_gsm[hs[0]] + 0.02
        )
        trend_ok = nonincreasing(seq_lr) and nonincreasing(seq_gl)
        ok = level_ok and margin_ok and trend_ok
        announce(
            4,
            ok,
            f"fig1a: lr medians {np.round(seq_lr, 3).tolist()}, gl {np.round(seq_gl, 3).tolist()}, "
            f"gsm@H1 {med_gsm[hs[0]]:.3f}; level>=0.75 {level_ok}, margin>=0.02 {margin_ok}, "
            f"nonincreasing {trend_ok}",
        )


class TestCriterion5ModelDiscrimination:
    def test_fig3a_poly_vs_mrf(self):
        poly = replace(replicate_config("fig3a"), sweep_values=(1,))
        mrf = replace(replicate_config("fig3a-mrf"), sweep_values=(1,))
        rows_poly = run_sweep(poly)
        rows_mrf = run_sweep(mrf)
        lvgl_mrf = ratio_by(rows_mrf, "lvgl", "h")[1]
        lvgl_poly = ratio_by(rows_poly, "lvgl", "h")[1]
        gst_poly = ratio_by(rows_poly, "gst", "h")[1]
        fact_poly = ratio_by(rows_poly, "gst-fact", "h")[1]
        ok = (
            lvgl_mrf >= 0.5
            and lvgl_poly <= 0.05
            and fact_poly >= gst_poly
            and gst_poly >= 0.3
        )
        announce(
            5,
            ok,
            f"fig3a H=1: lvgl mrf {lvgl_mrf:.2f} (>=0.5), lvgl poly {lvgl_poly:.2f} (<=0.05), "
            f"gst poly {gst_poly:.2f} (>=0.3), fact {fact_poly:.2f} (>= gst)",
        )


class TestCriterion6SampleComplexity:
    def test_fig3b_trend(self):
        config = replicate_config("fig3b")
        config = replace(
            config, estimators=tuple(s for s in config.estimators if s.name == "gst-fact")
        )
        rows = run_sweep(config)
        ratios = ratio_by(rows, "gst-fact", "m")
        ms = sorted(ratios)
        seq = [ratios[m] for m in ms]
        inv_big = sum(1 for a, b in zip(seq, seq[1:]) if a > b + 0.05)
        gain = seq[-1] - seq[0]
        ok = inv_big == 0 and sum(1 for a, b in zip(seq, seq[1:]) if a > b + 1e-12) <= 1 and gain >= 0.3
        announce(
            6,
            ok,
            f"fig3b sample trend: ratios {np.round(seq, 3).tolist()} over M={ms}; "
            f"nondecreasing (<=1 inversion <=0.05) and gain {gain:.2f} >= 0.3",
        )


class TestCriterion7JointAssumptionGain:
    def test_fig3c_h3(self):
        config = replace(replicate_config("fig3c"), sweep_values=(3,))
        rows = run_sweep(config)
        r_st_lr = ratio_by(rows, "gsm-st-lr", "h")[3]
        r_st_gl = ratio_by(rows, "gsm-st-gl", "h")[3]
        r_lr = ratio_by(rows, "gsm-lr", "h")[3]
        r_gl = ratio_by(rows, "gsm-gl", "h")[3]
        f_st_lr = median_by(rows, "gsm-st-lr", "h")[3]
        f_st_gl = median_by(rows, "gsm-st-gl", "h")[3]
        ok = (
            r_st_lr >= 0.4
            and r_st_gl >= 0.4
            and r_st_lr >= 2.0 * r_lr
            and r_st_gl >= 2.0 * r_gl
            and f_st_lr >= 0.98
            and f_st_gl >= 0.98
        )
        announce(
            7,
            ok,
            f"fig3c H=3: st ratios {r_st_lr:.2f}/{r_st_gl:.2f} (>=0.4, >=2x {r_lr:.2f}/{r_gl:.2f}), "
            f"st median F {f_st_lr:.3f}/{f_st_gl:.3f} (>=0.98)",
        )


class TestCriterion8SmoothnessSensitivity:
    def test_fig1c_band_decay(self):
        rows = run_sweep(replicate_config("fig1c"))
        means = {}
        for row in rows:
            if row["estimator"] != "gsm-lr" or row["fscore"] == "":
                continue
            means.setdefault(int(row["band_start"]), []).append(float(row["fscore"]))
        bands = sorted(means)
        mean_by_band = [float(np.mean(means[b])) for b in bands]
        low = float(np.mean(mean_by_band[:5]))
        high = float(np.mean(mean_by_band[-5:]))
        ok = low - high >= 0.15
        announce(
            8,
            ok,
            f"fig1c: mean F over 5 lowest bands {low:.3f} vs 5 highest {high:.3f} "
            f"(gap {low - high:.3f} >= 0.15)",
        )


class TestCriterion9ReweightingSparsity:
    def test_nonzero_count_nonincreasing(self):
        hp = SolverHyperparams(**dict(GST_DEFAULTS, t_rw=3, delta_rw=1e-3))
        cfg = SolverConfig(max_iters=2500, rel_tol=1e-8)
        wins = 0
        n_inst = 50
        for seed in range(n_inst):
            g = gen_graph(Rbf(), 20, seed)
            part = select_hidden(g, 1, HiddenPolicy.MIN_DEGREE, seed)
            cb = block_partition(cov_poly(g, 1, seed + 100).matrix, part)
            cov = CovEstimate(cb.upper_left, is_ensemble=True)
            plain = infer_gst(cov, hp, cfg)
            rw = infer_gst_rw(cov, hp, cfg)
            nnz_plain = int((np.abs(plain.s_o_hat) > 1e-6).sum())
            nnz_rw = int((np.abs(rw.s_o_hat) > 1e-6).sum())
            wins += nnz_rw <= nnz_plain
        ok = wins >= 0.9 * n_inst
        announce(9, ok, f"reweighting sparsity: nonincreasing nonzeros in {wins}/{n_inst} (>=90%)")


class TestCriterion10DeterminismAndFormats:
    def test_replay_and_roundtrip(self, tmp_path):
        config = replicate_config("fig1a", trials=2)
        csv_a = rows_to_csv(run_sweep(config))
        csv_b = rows_to_csv(run_sweep(config))
        replay_ok = csv_a == csv_b
        rng = np.random.default_rng(3)
        rt_ok = True
        for trial in range(10):
            m = rng.standard_normal((7, 5)) * 10.0 ** rng.integers(-6, 7)
            path = tmp_path / f"m{trial}.csv"
            save_matrix(m, path)
            rt_ok &= np.array_equal(load_matrix(path), m)
        ok = replay_ok and rt_ok
        announce(
            10,
            ok,
            f"determinism: byte-identical replay {replay_ok}, lossless CSV round trip {rt_ok}",
        )


class TestCriterion11RealDataOptional:
    def test_swiss_temperature_parity(self):
        data_dir = os.environ.get("LATENTGRAPH_SWISS_DIR")
        if not data_dir:
            pytest.skip(
                "optional real-data criterion: set LATENTGRAPH_SWISS_DIR to a directory with "
                "signals.csv (stations x months), altitudes.csv (one per station), and "
                "observed.csv (observed station indices)"
            )
        from latentgraph.generators import sample_covariance
        from latentgraph.graphs import SignalMatrix
        from latentgraph.matio import altitude_graph, load_vector
        from latentgraph.experiments import ESTIMATORS

        signals = load_matrix(os.path.join(data_dir, "signals.csv"))
        altitudes = load_vector(os.path.join(data_dir, "altitudes.csv"))
        observed = [int(i) for i in load_vector(os.path.join(data_dir, "observed.csv"))]
        truth_graph = altitude_graph(altitudes, 300.0)
        truth = metrics.edge_set_from_adjacency(
            truth_graph.matrix[np.ix_(observed, observed)]
        )
        cov = sample_covariance(SignalMatrix(signals[observed]), center=True)

        def fscore_of(name):
            spec = default_spec(name, max_iters=2000, rel_tol=1e-7)
            runner, _ = ESTIMATORS[name]
            result = runner(cov, spec)
            support = metrics.binarize(result.s_o_hat, 0.1, laplacian=True)
            return metrics.fscore(support, truth)[0]

        f_lr = fscore_of("gsm-lr")
        f_base = fscore_of("gsm")
        ok = f_lr >= f_base
        announce(11, ok, f"real data: gsm-lr F {f_lr:.4f} >= baseline F {f_base:.4f}")
