import math
from dataclasses import replace

import numpy as np
import pytest

from hetqkd import (
    CovMat4,
    PhysicalParams,
    alice_transform_angles,
    apply_transform_gamma,
    build_pm_covariance,
    ignorant_mi,
    lost_mi_approx,
    mi_decomposition,
    true_mi,
)

from conftest import random_params
from oracles import gaussian_mi_bits


class TestIgnorantMi:
    def test_balanced_one_bit(self, balanced_ideal):
        g = build_pm_covariance(balanced_ideal)
        assert ignorant_mi(g) == pytest.approx(1.0, abs=1e-12)

    def test_no_correlation(self):
        assert ignorant_mi(CovMat4(np.eye(4))) == 0.0

    def test_ten_degrees_golden(self, balanced_ideal):
        g = build_pm_covariance(replace(balanced_ideal, theta=math.radians(10.0)))
        value = ignorant_mi(g)
        assert value < 1.0
        assert value == pytest.approx(0.9785702047456319, abs=1e-12)


class TestTrueMi:
    def test_balanced_equals_ignorant(self, balanced_ideal):
        g = build_pm_covariance(balanced_ideal)
        assert true_mi(g) == pytest.approx(ignorant_mi(g), abs=1e-12)

    def test_conjugate_rotation_preserves_mi(self, balanced_ideal):
        p = replace(balanced_ideal, theta=math.radians(10.0), phi=math.radians(-10.0))
        g = build_pm_covariance(p)
        assert true_mi(g) == pytest.approx(1.0, abs=1e-9)
        assert true_mi(g) == pytest.approx(gaussian_mi_bits(g.mat), abs=1e-9)

    def test_single_angle_between_bounds(self, balanced_ideal):
        p = replace(balanced_ideal, theta=math.radians(10.0))
        g = build_pm_covariance(p)
        assert ignorant_mi(g) < true_mi(g) < 1.0

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            g = build_pm_covariance(random_params(rng))
            assert true_mi(g) == pytest.approx(gaussian_mi_bits(g.mat), abs=1e-9)

    def test_invariant_under_invertible_local_maps(self):
        rng = np.random.default_rng(19)
        for _ in range(40):
            g = build_pm_covariance(random_params(rng))
            ref = true_mi(g)
            m = rng.normal(size=(2, 2))
            while abs(np.linalg.det(m)) < 0.1:
                m = rng.normal(size=(2, 2))
            side = rng.integers(2)
            full = np.eye(4)
            if side == 0:
                full[:2, :2] = m
            else:
                full[2:, 2:] = m
            pushed = CovMat4(full @ g.mat @ full.T)
            assert true_mi(pushed) == pytest.approx(ref, abs=1e-9)

    def test_ignorant_never_exceeds_true(self):
        rng = np.random.default_rng(29)
        for _ in range(200):
            g = build_pm_covariance(random_params(rng))
            assert ignorant_mi(g) <= true_mi(g) + 1e-9


class TestMiDecomposition:
    def test_balanced_collapse(self, balanced_ideal):
        d = mi_decomposition(build_pm_covariance(balanced_ideal))
        assert d.i_bb == pytest.approx(0.0, abs=1e-12)
        assert d.i_bb_cond == pytest.approx(0.0, abs=1e-12)
        assert d.snr_term == pytest.approx(d.mi_true, abs=1e-12)

    def test_identity_holds_at_ten_degrees(self, balanced_ideal):
        p = replace(balanced_ideal, theta=math.radians(10.0))
        d = mi_decomposition(build_pm_covariance(p))
        assert d.mi_true == pytest.approx(
            d.snr_term - d.i_bb + d.i_bb_cond, abs=1e-9
        )
        assert d.mi_true == pytest.approx(true_mi(build_pm_covariance(p)), abs=1e-12)

    def test_identity_random(self):
        rng = np.random.default_rng(41)
        for _ in range(100):
            d = mi_decomposition(build_pm_covariance(random_params(rng)))
            assert d.mi_true == pytest.approx(
                d.snr_term - d.i_bb + d.i_bb_cond, abs=1e-9
            )
            assert d.mi_true >= d.mi_ignorant - 1e-9


class TestLostMiApprox:
    def test_conjugate_pair_vanishes(self, lab_link):
        p = replace(lab_link, theta=math.radians(7.0), phi=math.radians(-7.0))
        assert lost_mi_approx(p) == pytest.approx(0.0, abs=1e-15)

    def test_matches_exact_for_ideal_receiver(self):
        p = PhysicalParams(
            eta=0.4467, eps=0.005, theta=math.radians(10.0), phi=0.0,
            eta_d=1.0, eta_bs=0.5, alpha=1.0, v_a=3.3, beta=0.95,
        )
        exact = mi_decomposition(build_pm_covariance(p)).i_bb
        assert lost_mi_approx(p) == pytest.approx(exact, rel=0.1)

    def test_monotone_in_angle_sum(self, lab_link):
        values = [
            lost_mi_approx(replace(lab_link, theta=math.radians(d), phi=0.0))
            for d in np.linspace(0.5, 30.0, 30)
        ]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_non_negative_small_noise_regime(self):
        for eta in np.linspace(0.1, 1.0, 7):
            for eps in (0.0, 0.005, 0.01):
                for d in (1.0, 10.0, 25.0):
                    p = PhysicalParams(
                        eta=float(eta), eps=eps, theta=math.radians(d), phi=0.0,
                        eta_d=1.0, eta_bs=0.5, alpha=1.0, v_a=3.3, beta=0.95,
                    )
                    assert lost_mi_approx(p) >= 0.0


class TestOverestimationHazard:
    def test_symmetrize_after_transform_exceeds_true_mi(self, lab_link):
        gamma = build_pm_covariance(lab_link)
        transformed = apply_transform_gamma(gamma, alice_transform_angles(gamma))
        # ignorant_mi reads only co-variances and diagonals, which is the
        # symmetrized value of the transformed matrix.
        assert ignorant_mi(transformed) > true_mi(gamma)
