import math

import numpy as np
import pytest
from scipy import integrate
from scipy import stats as sps

import gibbsgap.simple_gibbs as sgi
from gibbsgap.data_io import SimConfig, simulate
from gibbsgap.distributions import log_pdf
from gibbsgap.model_core import Hyperparams, ThetaStats, summarize
from gibbsgap.simple_gibbs import (
    AuxSample,
    MuA,
    SimpleModelTraceChain,
    aux_location_variance,
    draw_muA_given_theta,
    draw_theta_full,
    draw_theta_stats,
    draw_trace_sample,
    gibbs_step,
    log_weight,
)

H = Hyperparams(a=2.0, b=1.0, V=1.0)


def _data(n, seed=11, A=1.0, V=1.0):
    return simulate(SimConfig(n=n, r=1, A_true=A, V_true=V, seed=seed), return_raw=True)


class TestBlockDraws:
    def test_variance_marginal_matches_conditional_law(self):
        st = ThetaStats(theta_bar=0.4, ss=3.0)
        rng = np.random.default_rng(0)
        draws = np.array([draw_muA_given_theta(st, H, 10, rng).A for _ in range(10_000)])
        ref = sps.invgamma(H.a + 4.5, scale=H.b + 1.5)
        assert sps.kstest(draws, ref.cdf).pvalue > 1e-3

    def test_location_centers_on_theta_bar(self):
        st = ThetaStats(theta_bar=1.7, ss=2.0)
        rng = np.random.default_rng(1)
        mus = np.array([draw_muA_given_theta(st, H, 20, rng).mu for _ in range(100_000)])
        se = mus.std(ddof=1) / math.sqrt(mus.size)
        assert abs(mus.mean() - 1.7) < 3 * se

    def test_variance_mean_hand_case(self):
        # ss=0, b=1, a=2, n=3: the conditional is InverseGamma(3, 1), mean 1/2.
        st = ThetaStats(theta_bar=0.0, ss=0.0)
        h = Hyperparams(a=2.0, b=1.0, V=1.0)
        rng = np.random.default_rng(2)
        draws = np.array([draw_muA_given_theta(st, h, 3, rng).A for _ in range(100_000)])
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - 0.5) < 3 * se


class TestCompressedDraw:
    def test_centered_case(self):
        d = summarize(np.full(20, 0.8), 1)  # delta = 0
        rng = np.random.default_rng(3)
        draws = np.array(
            [draw_theta_stats(MuA(mu=0.8, A=1.0), d, H, rng).theta_bar for _ in range(50_000)]
        )
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - 0.8) < 3 * se

    def test_sum_of_squares_mean_identity(self):
        # A=V=1, n=100, delta=50: phi = 50/4, E[SS] = 0.5*(99 + 2*phi) = 62.
        d = summarize(np.concatenate([[math.sqrt(50 * 100 / 99)], np.zeros(99)]), 1)
        assert d.delta == pytest.approx(50.0)
        rng = np.random.default_rng(4)
        ss = np.array(
            [draw_theta_stats(MuA(mu=0.0, A=1.0), d, H, rng).ss for _ in range(100_000)]
        )
        phi = 1.0 * 50.0 / (2.0 * 1.0 * 2.0)
        expected = 0.5 * (99 + 2 * phi)
        se = ss.std(ddof=1) / math.sqrt(ss.size)
        assert abs(ss.mean() - expected) < 3 * se

    def test_rejects_replicated_data(self):
        d = summarize([[0.0, 1.0], [1.0, 2.0]], 2)
        with pytest.raises(ValueError, match="r=1"):
            draw_theta_stats(MuA(0.0, 1.0), d, H, np.random.default_rng(0))


class TestFullVectorDraw:
    def test_coordinate_means_and_independence(self):
        y = np.array([0.0, 1.0, -2.0, 0.5, 3.0])
        mu_a = MuA(mu=0.3, A=2.0)
        rng = np.random.default_rng(5)
        n_draws = 40_000
        out = np.array([draw_theta_full(mu_a, y, H, rng) for _ in range(n_draws)])
        target = (H.V * mu_a.mu + mu_a.A * y) / (mu_a.A + H.V)
        se = out.std(axis=0, ddof=1) / math.sqrt(n_draws)
        assert np.all(np.abs(out.mean(axis=0) - target) < 3 * se)
        # off-diagonal covariance consistent with independence
        c = np.cov(out[:, 0], out[:, 1])[0, 1]
        se_cov = out[:, 0].std() * out[:, 1].std() / math.sqrt(n_draws)
        assert abs(c) < 3 * se_cov


@pytest.mark.parametrize("n", [5, 50])
def test_fast_path_equals_full_path(n):
    """The compressed draw and the summarized full-vector draw must agree in
    law: KS per coordinate plus first and second (and mixed) moments."""
    d, y = _data(n, seed=n)
    mu_a = MuA(mu=0.3, A=1.0)
    n_draws = 100_000
    rng_fast = np.random.default_rng(100 + n)
    fast = np.array(
        [
            (s.theta_bar, s.ss)
            for s in (draw_theta_stats(mu_a, d, H, rng_fast) for _ in range(n_draws))
        ]
    )
    rng_full = np.random.default_rng(200 + n)
    full = np.empty((n_draws, 2))
    for i in range(n_draws):
        th = draw_theta_full(mu_a, y, H, rng_full)
        tb = th.mean()
        full[i] = (tb, np.sum((th - tb) ** 2))

    assert sps.ks_2samp(fast[:, 0], full[:, 0]).pvalue > 1e-3
    assert sps.ks_2samp(fast[:, 1], full[:, 1]).pvalue > 1e-3
    for moment in (
        lambda a: a[:, 0],
        lambda a: a[:, 1],
        lambda a: a[:, 0] ** 2,
        lambda a: a[:, 1] ** 2,
        lambda a: a[:, 0] * a[:, 1],
    ):
        mf, mg = moment(fast), moment(full)
        se = math.sqrt(mf.var(ddof=1) / n_draws + mg.var(ddof=1) / n_draws)
        assert abs(mf.mean() - mg.mean()) < 3 * se


class TestGibbsStep:
    def test_fixed_seed_gives_identical_trajectory(self):
        d = _data(30)[0]
        runs = []
        for _ in range(2):
            rng = np.random.default_rng(77)
            st = ThetaStats(0.0, 1.0)
            runs.append([(st := gibbs_step(st, d, H, rng)) for _ in range(50)])
        assert all(a == b for a, b in zip(*runs))

    def test_state_invariant_holds(self):
        d = _data(10)[0]
        rng = np.random.default_rng(8)
        st = ThetaStats(5.0, 0.0)
        for _ in range(1000):
            st = gibbs_step(st, d, H, rng)
            assert st.ss >= 0.0

    def test_two_long_runs_agree_on_stationary_mean(self):
        d = _data(40)[0]
        steps, burn = 100_000, 1000

        def run(seed):
            rng = np.random.default_rng(seed)
            st = ThetaStats(0.0, 1.0)
            vals = np.empty(steps)
            for i in range(steps):
                st = gibbs_step(st, d, H, rng)
                vals[i] = st.theta_bar
            return vals[burn:]

        a, b = run(1), run(2)
        se = math.sqrt(_batch_means_se(a) ** 2 + _batch_means_se(b) ** 2)
        assert abs(a.mean() - b.mean()) < 4 * se

    def test_million_step_seed_stability_of_time_averages(self):
        # Time-averages of both the variance component and the state mean
        # must be seed-stable within batch-means Monte Carlo error.
        d = _data(25)[0]
        steps, burn = 1_000_000, 2000

        def run(seed):
            rng = np.random.default_rng(seed)
            st = ThetaStats(0.0, 1.0)
            a_vals = np.empty(steps)
            t_vals = np.empty(steps)
            for i in range(steps):
                mu_a = draw_muA_given_theta(st, H, d.n, rng)
                st = draw_theta_stats(mu_a, d, H, rng)
                a_vals[i] = mu_a.A
                t_vals[i] = st.theta_bar
            return a_vals[burn:], t_vals[burn:]

        a1, t1 = run(31)
        a2, t2 = run(32)
        for x1, x2 in ((a1, a2), (t1, t2)):
            se = math.sqrt(_batch_means_se(x1) ** 2 + _batch_means_se(x2) ** 2)
            assert abs(x1.mean() - x2.mean()) < 4 * se


def _batch_means_se(x, batches=50):
    m = len(x) // batches
    means = x[: m * batches].reshape(batches, m).mean(axis=1)
    return means.std(ddof=1) / math.sqrt(batches)


class TestWeight:
    def test_aux_location_variance_value(self):
        d = _data(4)[0]
        assert aux_location_variance(1.0, d, Hyperparams(2.0, 1.0, 1.0)) == pytest.approx(2.5)

    def test_addends_match_quadrature_normalized_kernels(self):
        """Each of the four weight addends is a normalized density; check the
        analytic normalizers against numerical quadrature of the bare kernels."""
        d = _data(6)[0]
        st = ThetaStats(theta_bar=0.4, ss=2.2)
        A = 0.9
        shape = H.a + (d.n - 1) / 2.0
        scale = H.b + st.ss / 2.0
        def ig_normalizer(s, c):
            # substitute u = 1/x: the reciprocal-scale kernel integrates as a
            # Gamma kernel, which quadrature handles to full precision
            hi = (s + 50.0 * math.sqrt(s) + 50.0) / c
            z, _ = integrate.quad(
                lambda u: u ** (s - 1) * math.exp(-c * u), 0.0, hi,
                epsabs=1e-12, epsrel=1e-12, limit=300,
            )
            return z

        def normal_normalizer(center, variance):
            sd = math.sqrt(variance)
            z, _ = integrate.quad(
                lambda x: math.exp(-((x - center) ** 2) / (2 * variance)),
                center - 12 * sd, center + 12 * sd, epsabs=1e-12, epsrel=1e-12, limit=300,
            )
            return z

        aux_var = aux_location_variance(A, d, H)
        cases = [
            # (log_pdf value at x, unnormalized kernel, quadrature normalizer)
            (
                lambda x: log_pdf(sgi.cond_A_given_theta(st, H, d.n), x),
                lambda x: x ** (-shape - 1) * math.exp(-scale / x),
                ig_normalizer(shape, scale),
            ),
            (
                lambda x: log_pdf(sgi.cond_mu_given_theta_A(st, A, d.n), x),
                lambda x: math.exp(-((x - st.theta_bar) ** 2) / (2 * A / d.n)),
                normal_normalizer(st.theta_bar, A / d.n),
            ),
            (
                lambda x: log_pdf(sgi.InverseGamma(H.a, H.b), x),
                lambda x: x ** (-H.a - 1) * math.exp(-H.b / x),
                ig_normalizer(H.a, H.b),
            ),
            (
                lambda x: log_pdf(sgi.Normal(d.y_bar, aux_var), x),
                lambda x: math.exp(-((x - d.y_bar) ** 2) / (2 * aux_var)),
                normal_normalizer(d.y_bar, aux_var),
            ),
        ]
        for lp, kernel, z in cases:
            for x in (0.3, 0.7, 1.1, 1.9, 3.4):
                expected = math.log(kernel(x)) - math.log(z)
                assert lp(x) == pytest.approx(expected, rel=1e-10, abs=1e-10)

    def test_weight_finite_on_aux_support(self):
        d = _data(8)[0]
        rng = np.random.default_rng(12)
        for _ in range(1000):
            s = draw_trace_sample(1, d, H, rng)
            assert math.isfinite(log_weight(s, d, H))


class TestTraceSample:
    def test_l1_runs_no_gibbs_steps(self, monkeypatch):
        calls = []
        orig = sgi.gibbs_step
        monkeypatch.setattr(
            sgi, "gibbs_step", lambda *a, **k: calls.append(1) or orig(*a, **k)
        )
        d = _data(5)[0]
        s = draw_trace_sample(1, d, H, np.random.default_rng(0))
        assert calls == []
        assert isinstance(s, AuxSample)

    def test_l3_runs_exactly_two_gibbs_steps(self, monkeypatch):
        calls = []
        orig = sgi.gibbs_step
        monkeypatch.setattr(
            sgi, "gibbs_step", lambda *a, **k: calls.append(1) or orig(*a, **k)
        )
        d = _data(5)[0]
        draw_trace_sample(3, d, H, np.random.default_rng(0))
        assert len(calls) == 2

    def test_aux_variance_marginal_matches_prior(self):
        d = _data(12)[0]
        rng = np.random.default_rng(13)
        draws = np.array([draw_trace_sample(1, d, H, rng).mu_a.A for _ in range(10_000)])
        assert sps.kstest(draws, sps.invgamma(H.a, scale=H.b).cdf).pvalue > 1e-3

    def test_small_n_rejected(self):
        d = summarize([0.0, 1.0], 1)
        with pytest.raises(ValueError, match="trace-class.*n >= 3"):
            draw_trace_sample(2, d, H, np.random.default_rng(0))
        with pytest.raises(ValueError, match="trace-class"):
            SimpleModelTraceChain(d, H)

    def test_batch_weights_agree_with_scalar_path(self):
        d = _data(20)[0]
        chain = SimpleModelTraceChain(d, H)
        n_draws = 20_000
        batch = np.exp(chain.draw_log_weights(2, n_draws, np.random.default_rng(14)))
        rng = np.random.default_rng(15)
        scalar = np.exp(
            [chain.log_weight(chain.draw_aux_and_state(2, rng)) for _ in range(n_draws)]
        )
        se = math.sqrt(batch.var(ddof=1) / n_draws + scalar.var(ddof=1) / n_draws)
        assert abs(batch.mean() - scalar.mean()) < 4 * se
