import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np
import pytest

from hetqkd import (
    FrameMeta,
    QuadratureFrame,
    SimConfig,
    build_pm_covariance,
    empirical_covariance,
    estimate_excess_noise,
    generate_frame,
    load_frame_csv,
    save_frame_csv,
)
from hetqkd.simulator import CHUNK_SAMPLES, _chunk_generator, _ROWS

from oracles import covariance_entry_se


class TestDeterminism:
    def test_same_seed_same_frame(self, lab_link):
        cfg = SimConfig(params=lab_link, m=10_000, seed=5)
        a, b = generate_frame(cfg, 3), generate_frame(cfg, 3)
        for col in ("x_a", "p_a", "x_b", "p_b"):
            assert np.array_equal(getattr(a, col), getattr(b, col))

    def test_distinct_frames_and_seeds_differ(self, lab_link):
        cfg = SimConfig(params=lab_link, m=4_000, seed=5)
        other_frame = generate_frame(cfg, 4)
        other_seed = generate_frame(replace(cfg, seed=6), 3)
        base = generate_frame(cfg, 3)
        assert not np.array_equal(base.x_b, other_frame.x_b)
        assert not np.array_equal(base.x_b, other_seed.x_b)

    def test_sample_to_counter_mapping_independent_of_m(self, lab_link):
        # Frame content is a pure function of (seed, frame, sample index):
        # a longer frame extends a shorter one without changing its prefix.
        short = generate_frame(SimConfig(params=lab_link, m=CHUNK_SAMPLES, seed=9), 1)
        longer = generate_frame(
            SimConfig(params=lab_link, m=CHUNK_SAMPLES + 4321, seed=9), 1
        )
        assert np.array_equal(longer.x_b[:CHUNK_SAMPLES], short.x_b)

    def test_parallel_chunks_reproduce_sequential(self, lab_link):
        cfg = SimConfig(params=lab_link, m=3 * CHUNK_SAMPLES + 100, seed=12)
        sequential = generate_frame(cfg, 0)

        n_chunks = (cfg.m + CHUNK_SAMPLES - 1) // CHUNK_SAMPLES
        draws = [None] * n_chunks

        def work(chunk):
            lo = chunk * CHUNK_SAMPLES
            hi = min(lo + CHUNK_SAMPLES, cfg.m)
            draws[chunk] = _chunk_generator(cfg.seed, 0, chunk).standard_normal(
                (len(_ROWS), hi - lo)
            )

        with ThreadPoolExecutor(max_workers=4) as pool:
            list(pool.map(work, reversed(range(n_chunks))))
        x_a = np.concatenate([d[0] for d in draws]) * math.sqrt(cfg.params.v_a)
        assert np.array_equal(x_a, sequential.x_a)


class TestModelFidelity:
    def test_empirical_matches_analytic(self, lab_link):
        m = 300_000
        frame = generate_frame(SimConfig(params=lab_link, m=m, seed=1001), 0)
        emp = empirical_covariance(frame).mat
        ana = build_pm_covariance(lab_link).mat
        se = covariance_entry_se(ana, m)
        assert np.all(np.abs(emp - ana) < 5.0 * se)

    def test_bob_cross_term_is_vacuum_free(self, lab_link):
        # The anticorrelated beamsplitter vacuum cancels in <x_B p_B>; if a
        # vacuum unit leaked in, the empirical value would sit tens of
        # standard errors away from the model.
        m = 1_000_000
        frame = generate_frame(SimConfig(params=lab_link, m=m, seed=77), 0)
        emp = empirical_covariance(frame)
        ana = build_pm_covariance(lab_link)
        se = covariance_entry_se(ana.mat, m)[2, 3]
        assert abs(emp.s_bx_bp - ana.s_bx_bp) < 5.0 * se
        tau = math.sqrt(lab_link.tau_x * lab_link.tau_p)
        vacuum_shift = tau * math.sin(lab_link.delta)
        assert vacuum_shift > 20.0 * se

    def test_standard_error_shrinks_with_m(self, lab_link):
        ana = build_pm_covariance(lab_link).mat

        def rms_error(m, seed):
            emp = empirical_covariance(
                generate_frame(SimConfig(params=lab_link, m=m, seed=seed), 0)
            ).mat
            return math.sqrt(np.mean((emp - ana) ** 2))

        errors_small = np.mean([rms_error(20_000, s) for s in range(8)])
        errors_large = np.mean([rms_error(80_000, s) for s in range(8)])
        assert errors_large < errors_small

    def test_noise_reconstruction_from_simulated_data(self, lab_link):
        m = 500_000
        frame = generate_frame(SimConfig(params=lab_link, m=m, seed=404), 0)
        got = estimate_excess_noise(
            frame, "crosscorr", lab_link.eta, lab_link.tau_x, lab_link.tau_p
        )
        # eta*eps reconstruction: allow five standard errors of the
        # conditional cross-correlation estimate.
        se = 5.0 * 2.0 / math.sqrt(m) / (
            lab_link.eta * math.sqrt(lab_link.tau_x * lab_link.tau_p)
            * abs(math.sin(lab_link.delta))
        )
        assert abs(got - lab_link.eps) < se


class TestEmpiricalCovariance:
    def test_permutation_invariance(self, lab_link):
        frame = generate_frame(SimConfig(params=lab_link, m=6_000, seed=2), 0)
        perm = np.random.default_rng(0).permutation(frame.m)
        shuffled = QuadratureFrame(
            x_a=frame.x_a[perm], p_a=frame.p_a[perm],
            x_b=frame.x_b[perm], p_b=frame.p_b[perm],
        )
        assert np.allclose(
            empirical_covariance(frame).mat, empirical_covariance(shuffled).mat,
            atol=1e-12,
        )

    def test_degenerate_frame_rejected(self):
        ones = np.ones(100)
        rng = np.random.default_rng(1)
        frame = QuadratureFrame(
            x_a=ones, p_a=rng.normal(size=100),
            x_b=rng.normal(size=100), p_b=rng.normal(size=100),
        )
        with pytest.raises(ValueError, match="degenerate frame"):
            empirical_covariance(frame)

    def test_single_sample_rejected(self):
        one = np.ones(1)
        frame = QuadratureFrame(x_a=one, p_a=one, x_b=one, p_b=one)
        with pytest.raises(ValueError, match="two samples"):
            empirical_covariance(frame)

    def test_non_finite_rejected(self):
        col = np.ones(10)
        bad = col.copy()
        bad[3] = np.inf
        with pytest.raises(ValueError, match="non-finite"):
            QuadratureFrame(x_a=bad, p_a=col, x_b=col, p_b=col)


class TestFramePersistence:
    def test_round_trip_bit_exact(self, lab_link, tmp_path):
        frame = generate_frame(SimConfig(params=lab_link, m=500, seed=8), 0)
        path = tmp_path / "frame.csv"
        save_frame_csv(frame, path)
        loaded = load_frame_csv(path)
        for col in ("x_a", "p_a", "x_b", "p_b"):
            assert np.array_equal(getattr(loaded, col), getattr(frame, col))
        assert loaded.meta.seed == 8
        assert loaded.meta.params == lab_link
        assert loaded.meta.in_snu is True

    def test_header_validated(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c,d\n1,2,3,4\n")
        with pytest.raises(ValueError, match="header"):
            load_frame_csv(path)

    def test_column_count_validated(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x_a,p_a,x_b,p_b\n1.0,2.0,3.0\n")
        with pytest.raises(ValueError, match="4 columns"):
            load_frame_csv(path)

    def test_finiteness_validated(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x_a,p_a,x_b,p_b\n1.0,2.0,inf,4.0\n")
        with pytest.raises(ValueError, match="non-finite"):
            load_frame_csv(path)

    def test_meta_optional(self, tmp_path):
        path = tmp_path / "plain.csv"
        path.write_text("x_a,p_a,x_b,p_b\n1.0,2.0,3.0,4.0\n0.5,0.1,0.2,0.9\n")
        frame = load_frame_csv(path)
        assert frame.m == 2
        assert frame.meta == FrameMeta()
