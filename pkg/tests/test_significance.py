import numpy as np
import pytest
from scipy import integrate
from scipy.special import gammaln

from causalbench.series import MultivariateTimeSeries
from causalbench.significance import (
    draw_shift_ensemble,
    f_cdf,
    surrogate_pvalue,
    surrogate_test,
    time_shift_surrogate,
)


class TestTimeShift:
    def test_definition(self):
        out = time_shift_surrogate(np.array([1, 2, 3, 4, 5]), 2)
        np.testing.assert_array_equal(out, [3, 4, 5, 1, 2])

    def test_identity_shift_rejected(self):
        with pytest.raises(ValueError):
            time_shift_surrogate(np.arange(5), 5)
        with pytest.raises(ValueError):
            time_shift_surrogate(np.arange(5), 0)

    def test_marginal_preserved(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=101)
        for d in (1, 17, 100):
            np.testing.assert_array_equal(
                np.sort(time_shift_surrogate(x, d)), np.sort(x)
            )


class TestSurrogatePvalue:
    # direct evaluations of p = 1 - (r0 - 0.326)/(M + 1 + 0.348) with M = 100
    def test_original_largest(self):
        p = surrogate_pvalue(2.0, np.linspace(0, 1, 100))
        assert p == pytest.approx(1 - (101 - 0.326) / 101.348, abs=1e-6)
        assert p == pytest.approx(0.00665, abs=1e-5)

    def test_middle_rank(self):
        surr = np.concatenate([np.arange(50) - 100.0, np.arange(50) + 100.0])
        p = surrogate_pvalue(0.0, surr)  # r0 = 51
        assert p == pytest.approx(0.5, abs=1e-3)

    def test_original_smallest(self):
        p = surrogate_pvalue(-1.0, np.linspace(0, 1, 100))
        assert p == pytest.approx(0.99335, abs=1e-5)

    def test_ties_count_against_original(self):
        # constant measure: all surrogates equal the original -> r0 = 1
        p = surrogate_pvalue(1.0, np.ones(100))
        assert p == pytest.approx(0.99335, abs=1e-5)

    def test_monotone_in_rank(self):
        surr = np.arange(100.0)
        pvals = [surrogate_pvalue(v, surr) for v in (-1.0, 10.5, 50.5, 98.5, 1000.0)]
        assert all(a > b for a, b in zip(pvals, pvals[1:]))


class TestSurrogateTest:
    @staticmethod
    def _corr_measure(series, x, y):
        # lag-1 cross correlation, a cheap stand-in for TE
        a, b = series.column(x), series.column(y)
        return float(np.corrcoef(a[:-1], b[1:])[0, 1])

    def test_constant_measure_never_significant(self):
        rng = np.random.default_rng(1)
        s = MultivariateTimeSeries(rng.normal(size=(256, 2)))
        p = surrogate_test(s, lambda s_, x, y: 1.0, 0, 1, M=100, seed=0)
        assert p > 0.9

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(2)
        s = MultivariateTimeSeries(rng.normal(size=(256, 2)))
        p1 = surrogate_test(s, self._corr_measure, 0, 1, M=50, seed=7)
        p2 = surrogate_test(s, self._corr_measure, 0, 1, M=50, seed=7)
        assert p1 == p2

    def test_power_on_coupled_pair(self):
        rng = np.random.default_rng(3)
        rejected = 0
        for trial in range(20):
            e = rng.standard_normal((512, 2))
            x = e[:, 0]
            y = np.empty(512)
            y[0] = e[0, 1]
            y[1:] = 0.9 * x[:-1] + e[1:, 1]
            s = MultivariateTimeSeries(np.column_stack([x, y]))
            p = surrogate_test(s, self._corr_measure, 0, 1, M=100, seed=trial)
            rejected += p < 0.05
        assert rejected == 20

    def test_null_size(self):
        rng = np.random.default_rng(4)
        rejected = 0
        trials = 200
        for trial in range(trials):
            s = MultivariateTimeSeries(rng.standard_normal((256, 2)))
            p = surrogate_test(s, self._corr_measure, 0, 1, M=100, seed=trial)
            rejected += p < 0.05
        assert 0.02 <= rejected / trials <= 0.08

    def test_shift_range_avoids_near_identity(self):
        ens = draw_shift_ensemble(np.arange(2048), M=500, seed=0)
        assert ens.shifts.min() >= 2048 // 20
        assert ens.shifts.max() <= 19 * 2048 // 20

    def test_requires_enough_surrogates(self):
        rng = np.random.default_rng(5)
        s = MultivariateTimeSeries(rng.normal(size=(64, 2)))
        with pytest.raises(ValueError):
            surrogate_test(s, self._corr_measure, 0, 1, M=5)


def _f_density(x, d1, d2):
    logpdf = (
        0.5 * (d1 * np.log(d1) + d2 * np.log(d2))
        + (d1 / 2 - 1) * np.log(x)
        - 0.5 * (d1 + d2) * np.log(d2 + d1 * x)
        - (gammaln(d1 / 2) + gammaln(d2 / 2) - gammaln((d1 + d2) / 2))
    )
    return np.exp(logpdf)


class TestFCdf:
    def test_zero(self):
        assert f_cdf(0.0, 3, 7) == 0.0
        assert f_cdf(-1.0, 3, 7) == 0.0

    def test_f11_median(self):
        # ratio of two identical chi-square(1) variables has median 1
        assert f_cdf(1.0, 1, 1) == pytest.approx(0.5, abs=1e-12)

    def test_against_quadrature(self):
        for d1, d2 in [(5, 100), (1, 10), (4, 30)]:
            for x in (0.2, 0.7, 1.0, 1.8, 3.5):
                want, err = integrate.quad(_f_density, 0, x, args=(d1, d2), epsabs=1e-12)
                assert abs(f_cdf(x, d1, d2) - want) < 1e-8
