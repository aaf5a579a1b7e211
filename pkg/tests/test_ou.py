"""Noise-channel tests: exact transitions, stationary law, moment identities.

Statistical assertions use fixed seeds; closed-form numbers were pinned with
mpmath at 40 digits, and integrals are cross-checked by adaptive quadrature
and Monte Carlo.
"""

import math

import mpmath
import numpy as np
import pytest
from scipy import integrate, signal, stats

from sveisbk import (DegenerateStationary, OuParams, RngStream,
                     abs_expm1_bound, ou_exp_moment, ou_stationary_density,
                     ou_stationary_sample, ou_step_exact, ou_transition)

mpmath.mp.dps = 40


def ou_path(z0, n_steps, dt, p, seed, index=0):
    """Path of exact transitions, vectorized through an IIR recursion."""
    decay, sd = ou_transition(dt, p)
    noise = RngStream(seed, index).standard_normal(n_steps)
    # z_n = decay * z_{n-1} + sd * xi_n, seeded with z_0
    path, _ = signal.lfilter([sd], [1.0, -decay], noise,
                             zi=np.array([decay * z0]))
    return np.concatenate([[z0], path])


class TestRngStream:
    def test_reproducible(self):
        a = RngStream(42, 3).standard_normal(64)
        b = RngStream(42, 3).standard_normal(64)
        assert np.array_equal(a, b)

    def test_batch_equals_scalar_sequence(self):
        batch = RngStream(42, 3).standard_normal(16)
        stream = RngStream(42, 3)
        singles = np.array([stream.standard_normal() for _ in range(16)])
        assert np.array_equal(batch, singles)

    def test_distinct_streams_differ(self):
        a = RngStream(42, 0).standard_normal(64)
        b = RngStream(42, 1).standard_normal(64)
        assert not np.array_equal(a, b)

    def test_draws_bounded_and_standard(self):
        draws = RngStream(0, 0).standard_normal(200_000)
        assert np.max(np.abs(draws)) < 8.3
        assert stats.kstest(draws, "norm").pvalue > 0.01


class TestStepExact:
    def test_deterministic_decay(self):
        p = OuParams(theta=1.0, delta=0.0)
        out = ou_step_exact(1.0, math.log(2.0), p, RngStream(5))
        assert out == 0.5

    def test_determinism_contract(self):
        p = OuParams(theta=0.8, delta=0.6)
        a = ou_step_exact(0.3, 0.25, p, RngStream(9, 2))
        b = ou_step_exact(0.3, 0.25, p, RngStream(9, 2))
        assert a == b

    def test_one_step_law_ks(self):
        # z' ~ N(z0 * e^{-theta dt}, delta^2 (1 - e^{-2 theta dt})/(2 theta))
        p = OuParams(theta=0.7, delta=0.9)
        z0, dt = 1.3, 0.37
        draws = ou_step_exact(np.full(100_000, z0), dt, p, RngStream(12))
        decay, sd = ou_transition(dt, p)
        standardized = (draws - z0 * decay) / sd
        assert stats.kstest(standardized, "norm").pvalue > 0.01

    def test_long_dt_limit_is_stationary(self):
        p = OuParams(theta=0.5, delta=1.0)  # stationary variance 1
        draws = ou_step_exact(np.zeros(100_000), 1e3, p, RngStream(21))
        assert stats.kstest(draws, "norm").pvalue > 0.01

    def test_semigroup_composition(self):
        # Two steps dt1 then dt2 give the same conditional law as dt1 + dt2.
        rng = np.random.default_rng(33)
        for _ in range(100):
            p = OuParams(theta=float(rng.uniform(0.2, 3.0)),
                         delta=float(rng.uniform(0.05, 1.5)))
            dt1 = float(rng.uniform(0.01, 2.0))
            dt2 = float(rng.uniform(0.01, 2.0))
            d1, s1 = ou_transition(dt1, p)
            d2, s2 = ou_transition(dt2, p)
            d12, s12 = ou_transition(dt1 + dt2, p)
            assert d1 * d2 == pytest.approx(d12, rel=1e-12)
            assert s2 ** 2 + d2 ** 2 * s1 ** 2 == pytest.approx(
                s12 ** 2, rel=1e-12)


class TestStationary:
    def test_sample_moments(self):
        p = OuParams(theta=0.5, delta=1.0)
        draws = ou_stationary_sample(p, RngStream(17), 100_000)
        assert 0.98 <= float(np.var(draws)) <= 1.02
        assert -0.02 <= float(np.mean(draws)) <= 0.02

    def test_degenerate_sampling(self):
        with pytest.raises(DegenerateStationary):
            ou_stationary_sample(OuParams(theta=1.0, delta=0.0), RngStream(0))

    def test_density_value(self):
        p = OuParams(theta=1.0, delta=1.0)
        expected = 1.0 / mpmath.sqrt(mpmath.pi)
        assert float(expected) == pytest.approx(0.564189583547756287, rel=1e-15)
        assert ou_stationary_density(0.0, p) == pytest.approx(
            float(expected), rel=1e-14)

    def test_density_symmetry(self):
        p = OuParams(theta=0.7, delta=1.3)
        z = np.random.default_rng(3).normal(size=50)
        assert np.array_equal(ou_stationary_density(z, p),
                              ou_stationary_density(-z, p))

    def test_density_normalized_by_quadrature(self):
        p = OuParams(theta=0.8, delta=1.1)
        half_width = 10.0 * p.delta / math.sqrt(p.theta)
        total, err = integrate.quad(
            lambda z: ou_stationary_density(z, p), -half_width, half_width)
        assert err < 1e-10
        assert abs(total - 1.0) <= 1e-8

    def test_density_degenerate(self):
        with pytest.raises(DegenerateStationary):
            ou_stationary_density(0.0, OuParams(theta=1.0, delta=0.0))


class TestExpMoment:
    def test_zero_exponent(self):
        assert ou_exp_moment(0.0, OuParams(theta=0.4, delta=1.2)) == 1.0

    def test_example_value_and_quadrature(self):
        p = OuParams(theta=1.0, delta=1.0)
        assert ou_exp_moment(2.0, p) == pytest.approx(math.e, rel=1e-14)
        by_quad, err = integrate.quad(
            lambda z: math.exp(2.0 * z) * ou_stationary_density(z, p),
            -12.0, 12.0)
        assert err < 1e-9
        assert ou_exp_moment(2.0, p) == pytest.approx(by_quad, rel=1e-8)

    def test_monte_carlo_oracle_a4(self):
        p = OuParams(theta=1.0, delta=1.0)
        draws = ou_stationary_sample(p, RngStream(29), 200_000)
        values = np.exp(4.0 * draws)
        se = float(np.std(values) / math.sqrt(values.size))
        assert abs(float(np.mean(values)) - ou_exp_moment(4.0, p)) <= 3.0 * se


class TestAbsExpm1Bound:
    def test_delta_zero(self):
        assert abs_expm1_bound(OuParams(theta=0.7, delta=0.0)) == 0.0

    def test_example_extended_precision(self):
        expected = mpmath.sqrt(mpmath.e - 2 * mpmath.exp(mpmath.mpf(1) / 4) + 1)
        assert float(expected) == pytest.approx(1.072488226081555763, rel=1e-15)
        assert abs_expm1_bound(OuParams(theta=1.0, delta=1.0)) == pytest.approx(
            float(expected), rel=1e-14)

    def test_moment_identity(self):
        rng = np.random.default_rng(51)
        for _ in range(100):
            p = OuParams(theta=float(rng.uniform(0.2, 3.0)),
                         delta=float(rng.uniform(0.0, 1.5)))
            lhs = abs_expm1_bound(p) ** 2
            rhs = ou_exp_moment(2.0, p) - 2.0 * ou_exp_moment(1.0, p) + 1.0
            assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-15)

    def test_bounds_monte_carlo_mean(self):
        p = OuParams(theta=1.0, delta=1.0)
        draws = ou_stationary_sample(p, RngStream(31), 100_000)
        mc = float(np.mean(np.abs(np.expm1(draws))))
        assert mc <= abs_expm1_bound(p)


class TestErgodicity:
    def test_time_average_of_exp2z(self):
        # (1/T) integral of e^{2z} converges to the stationary moment.
        theta, delta = 0.7, 0.8
        p = OuParams(theta=theta, delta=delta)
        dt = 0.01 / theta
        n = int(round(1e4 / theta / dt))
        z = ou_path(0.0, n, dt, p, seed=61)
        y = np.exp(2.0 * z)
        avg = float(np.trapezoid(y, dx=dt) / (n * dt))
        assert avg == pytest.approx(ou_exp_moment(2.0, p), rel=0.05)

    def test_time_average_of_z_vanishes(self):
        p = OuParams(theta=0.7, delta=0.8)
        dt = 0.01 / p.theta
        n = int(round(1e4 / p.theta / dt))
        z = ou_path(0.0, n, dt, p, seed=67)
        avg = float(np.trapezoid(z, dx=dt) / (n * dt))
        sd_avg = p.delta / p.theta / math.sqrt(n * dt)
        assert abs(avg) <= 4.0 * sd_avg

    def test_path_histogram_matches_density(self):
        # Chi-square against the stationary density on near-independent
        # samples: burn-in 10/theta, then thin to 5/theta spacing.
        theta, delta = 1.0, 1.0
        p = OuParams(theta=theta, delta=delta)
        dt = 0.01 / theta
        n = 2_000_000
        z = ou_path(0.0, n, dt, p, seed=71)
        burn = int(10.0 / theta / dt)
        thin = int(5.0 / theta / dt)
        samples = z[burn::thin]
        sd = delta / math.sqrt(2.0 * theta)
        edges = stats.norm.ppf(np.linspace(0.001, 0.999, 26), scale=sd)
        counts, _ = np.histogram(samples, bins=edges)
        cdf = stats.norm.cdf(edges, scale=sd)
        probs = np.diff(cdf) / (cdf[-1] - cdf[0])
        inside = int(counts.sum())
        pvalue = stats.chisquare(counts, probs * inside).pvalue
        assert pvalue > 0.01
