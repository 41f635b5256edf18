import math

import numpy as np
import pytest

from nomalink import corrchan, outage
from nomalink.errors import DomainError
from nomalink.outage import (
    PowerAllocation,
    RatePlan,
    asymptotic_outage,
    diversity_order,
    dmt_gain,
    exact_outage,
    goodput,
    outage_lower_bound,
    outage_report,
    phi_table,
    theta_table,
)
from nomalink.optim import default_power_allocation

from conftest import make_config


def single_link(snr_db, rate=1.0):
    """N_t = N_r = M = K = 1, unit path loss."""
    cfg = corrchan.SystemConfig(n_t=1, n_r=1, n_streams=1, snr_db=snr_db)
    clusters = corrchan.sort_clusters([(1.0, 0.0)], cfg.alpha, cfg.k_friis)
    corr = corrchan.correlation_pair(cfg)
    power = PowerAllocation(np.array([[1.0]]))
    rates = RatePlan(np.array([[rate]]))
    return cfg, clusters, corr, power, rates


class TestTypeInvariants:
    def test_power_rows_must_sum_to_stream_share(self):
        with pytest.raises(DomainError):
            PowerAllocation(np.array([[0.3, 0.3]]))  # sums to 0.6, not 1/M
        with pytest.raises(DomainError):
            PowerAllocation(np.array([[1.2, -0.2]]))

    def test_rates_must_be_positive(self):
        with pytest.raises(DomainError):
            RatePlan(np.array([[1.0, 0.0]]))

    def test_goodput_rejects_bad_probabilities(self):
        rates = RatePlan(np.array([[1.0]]))
        with pytest.raises(DomainError):
            goodput(np.array([[1.5]]), rates)

    def test_tables_are_immutable(self):
        power = PowerAllocation(np.array([[0.2, 0.8]]))
        with pytest.raises(ValueError):
            power.zeta[0, 0] = 0.5
        table = theta_table(power, RatePlan(np.array([[1.0, 1.0]])))
        with pytest.raises(ValueError):
            table.theta[0, 0] = 1.0


class TestThetaTable:
    def test_two_cluster_example(self):
        power = PowerAllocation(np.array([[0.2, 0.8]]))
        rates = RatePlan(np.array([[1.0, 1.0]]))
        table = theta_table(power, rates)
        assert table.theta[0, 1] == pytest.approx(0.6)
        assert table.theta[0, 0] == pytest.approx(0.2)
        assert table.argmin[0, 0] == 0
        assert table.feasible

    def test_single_cluster(self):
        power = PowerAllocation(np.array([[0.5], [0.5]]))
        rates = RatePlan(np.array([[2.0], [1.0]]))
        table = theta_table(power, rates)
        assert table.theta[0, 0] == pytest.approx(0.5 / 3.0)
        assert table.theta[1, 0] == pytest.approx(0.5)

    def test_infeasible_flagged_not_raised(self):
        power = PowerAllocation(np.array([[0.5, 0.5]]))
        rates = RatePlan(np.array([[1.0, 2.0]]))
        table = theta_table(power, rates)
        assert table.theta[0, 1] < 0
        assert not table.feasible

    def test_dimension_mismatch(self):
        power = PowerAllocation(np.array([[0.5, 0.5]]))
        rates = RatePlan(np.array([[1.0]]))
        with pytest.raises(DomainError):
            theta_table(power, rates)

    def test_argmin_nondecreasing(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            k = rng.integers(2, 6)
            m = rng.integers(1, 4)
            raw = rng.uniform(0.05, 1.0, size=(m, k))
            zeta = raw / raw.sum(axis=1, keepdims=True) / m
            power = PowerAllocation(zeta)
            rates = RatePlan(rng.uniform(0.2, 2.5, size=(m, k)))
            table = theta_table(power, rates)
            assert np.all(np.diff(table.argmin, axis=1) >= 0)
            # min over a shrinking set is nondecreasing in k
            assert np.all(np.diff(table.theta, axis=1) >= 0)


class TestExactOutage:
    def test_exponential_closed_form(self):
        cfg, clusters, corr, power, rates = single_link(10.0, rate=1.0)
        table = theta_table(power, rates)
        p = exact_outage(0, 0, cfg, clusters, corr, table)
        assert p == pytest.approx(1.0 - math.exp(-0.1), abs=1e-12)

    def test_high_snr_limit(self):
        cfg, clusters, corr, power, rates = single_link(200.0, rate=1.0)
        table = theta_table(power, rates)
        assert exact_outage(0, 0, cfg, clusters, corr, table) < 1e-15

    def test_infeasible_returns_one(self):
        power = PowerAllocation(np.array([[0.5, 0.5]]))
        rates = RatePlan(np.array([[1.0, 2.0]]))
        cfg = make_config(1)
        clusters = corrchan.sort_clusters([(10, 0), (0, 20)], cfg.alpha, cfg.k_friis)
        corr = corrchan.correlation_pair(cfg)
        table = theta_table(power, rates)
        assert exact_outage(0, 0, cfg, clusters, corr, table) == 1.0

    def test_nonincreasing_in_snr(self, paper_v):
        # 50 dB is the bottom of the series' supported domain for M >= 2
        # with these margins; below it the cancellation error is raised.
        for m_streams in (1, 2, 3):
            cfg0 = make_config(m_streams)
            corr = corrchan.correlation_pair(cfg0)
            rates = RatePlan.broadcast(2.0, m_streams, 4)
            power = default_power_allocation(0.7, rates, m_streams, 4)
            table = theta_table(power, rates)
            vals = []
            for snr in np.linspace(50, 140, 10):
                cfg = make_config(m_streams, snr_db=snr)
                vals.append(exact_outage(0, 0, cfg, paper_v.clusters, corr, table))
            assert np.all(np.diff(vals) <= 0)

    @pytest.mark.parametrize("m_streams", [1, 2, 3])
    def test_high_snr_slope_matches_diversity(self, paper_v, m_streams):
        cfg0 = make_config(m_streams)
        corr = corrchan.correlation_pair(cfg0)
        rates = RatePlan.broadcast(2.0, m_streams, 4)
        power = default_power_allocation(0.7, rates, m_streams, 4)
        table = theta_table(power, rates)
        xs, ys = [], []
        for snr in np.arange(90.0, 110.01, 2.5):
            cfg = make_config(m_streams, snr_db=snr)
            p = exact_outage(0, 0, cfg, paper_v.clusters, corr, table)
            xs.append(snr / 10.0)
            ys.append(math.log10(p))
        slope = np.polyfit(xs, ys, 1)[0]
        d = 3 - m_streams + 1
        assert abs(slope + d) / d < 0.05

    def test_mc_agreement_uncorrelated(self, paper_v):
        # With rho = 0 the formula is exact; 3 standard errors at 1e6.
        from nomalink.mcsim import TrialPlan, estimate_outage
        import dataclasses

        cfg = make_config(3, snr_db=70.0, rho=0.0)
        sc = dataclasses.replace(
            paper_v, system=cfg, corr=corrchan.correlation_pair(cfg)
        )
        table = theta_table(sc.power, sc.rates)
        p_exact = exact_outage(0, 0, cfg, sc.clusters, sc.corr, table)
        est = estimate_outage(0, 0, TrialPlan(trials=10**6, seed=42), sc)
        assert abs(p_exact - est.p_hat) <= 3 * est.std_err

    @pytest.mark.xfail(
        strict=True,
        reason="for M>1 the determinant form is an approximation that is "
        "biased under receive correlation; measured z ~ -129 sigma at "
        "rho=0.5, 70 dB, 1e6 trials",
    )
    def test_mc_agreement_reference_config(self, paper_v):
        from nomalink.mcsim import TrialPlan, estimate_outage

        table = theta_table(paper_v.power, paper_v.rates)
        p_exact = exact_outage(
            0, 0, paper_v.system, paper_v.clusters, paper_v.corr, table
        )
        est = estimate_outage(0, 0, TrialPlan(trials=10**6, seed=42), paper_v)
        assert abs(p_exact - est.p_hat) <= 3 * est.std_err


class TestPhiTable:
    def test_m1_uncorrelated_reference(self):
        cfg = corrchan.SystemConfig(n_t=3, n_r=3, n_streams=1, rho_r=0.0, snr_db=10.0)
        clusters = corrchan.sort_clusters([(1.0, 0.0)], cfg.alpha, cfg.k_friis)
        corr = corrchan.correlation_pair(cfg)
        phi = phi_table(cfg, clusters, corr)
        gbar = cfg.gamma_bar
        assert phi.phi[0, 0] == pytest.approx((1 / gbar) ** 3 / 6.0, rel=1e-12)

    def test_m1_single_antenna(self):
        cfg, clusters, corr, _, _ = single_link(10.0)
        phi = phi_table(cfg, clusters, corr)
        assert phi.phi[0, 0] == pytest.approx(1.0 / cfg.gamma_bar, rel=1e-12)

    def test_snr_scaling_exponent(self, paper_v):
        for m_streams, want in ((1, 3), (2, 2), (3, 1)):
            lo = make_config(m_streams, snr_db=80.0)
            hi = make_config(m_streams, snr_db=90.0)
            corr = corrchan.correlation_pair(lo)
            p_lo = phi_table(lo, paper_v.clusters, corr).phi
            p_hi = phi_table(hi, paper_v.clusters, corr).phi
            ratio = p_lo / p_hi
            assert np.allclose(np.log10(ratio), want, atol=1e-10)

    def test_asymptote_fit_oracle(self, paper_v):
        # Fit log10 p_exact = a + b log10(gamma) on [80, 100] dB and match
        # both the slope and the level of phi * theta^-d.
        m_streams = 2
        corr = corrchan.correlation_pair(make_config(m_streams))
        rates = RatePlan.broadcast(2.0, m_streams, 4)
        power = default_power_allocation(0.7, rates, m_streams, 4)
        table = theta_table(power, rates)
        xs, ys = [], []
        for snr in np.arange(80.0, 100.01, 2.0):
            cfg = make_config(m_streams, snr_db=snr)
            p = exact_outage(0, 0, cfg, paper_v.clusters, corr, table)
            xs.append(snr / 10.0)
            ys.append(math.log10(p))
        slope, intercept = np.polyfit(xs, ys, 1)
        d = 3 - m_streams + 1
        assert abs(slope + d) / d < 0.02
        cfg_ref = make_config(m_streams, snr_db=100.0)
        phi = phi_table(cfg_ref, paper_v.clusters, corr)
        predicted = phi.phi[0, 0] * table.theta[0, 0] ** (-d)
        fitted = 10 ** (intercept + slope * 10.0)
        assert abs(fitted - predicted) / predicted < 0.05

    def test_positive_entries(self, paper_v):
        rng = np.random.default_rng(6)
        for _ in range(20):
            m_streams = int(rng.integers(1, 4))
            cfg = make_config(m_streams, rho=float(rng.uniform(0, 0.9)))
            corr = corrchan.correlation_pair(cfg)
            phi = phi_table(cfg, paper_v.clusters, corr)
            assert np.all(phi.phi > 0)


class TestAsymptoticOutage:
    def test_direct_formula(self):
        phi = outage.PhiTable(phi=np.array([[1e-6]]), decay=2)
        theta = outage.ThetaTable(theta=np.array([[0.1]]), argmin=np.array([[0]]))
        assert asymptotic_outage(0, 0, phi, theta) == pytest.approx(1e-4)

    def test_large_theta_limit(self):
        phi = outage.PhiTable(phi=np.array([[1e-6]]), decay=2)
        theta = outage.ThetaTable(theta=np.array([[1e9]]), argmin=np.array([[0]]))
        assert asymptotic_outage(0, 0, phi, theta) < 1e-20

    def test_clamped(self):
        phi = outage.PhiTable(phi=np.array([[10.0]]), decay=2)
        theta = outage.ThetaTable(theta=np.array([[0.1]]), argmin=np.array([[0]]))
        assert asymptotic_outage(0, 0, phi, theta) == 1.0
        assert asymptotic_outage(0, 0, phi, theta, clamp=False) == pytest.approx(1e3)

    def test_pure_power_law_slope(self, paper_v):
        for m_streams in (1, 2, 3):
            d = 3 - m_streams + 1
            corr = corrchan.correlation_pair(make_config(m_streams))
            rates = RatePlan.broadcast(2.0, m_streams, 4)
            power = default_power_allocation(0.7, rates, m_streams, 4)
            table = theta_table(power, rates)
            vals = []
            for snr in (95.0, 105.0):
                cfg = make_config(m_streams, snr_db=snr)
                phi = phi_table(cfg, paper_v.clusters, corr)
                vals.append(asymptotic_outage(0, 0, phi, table))
            slope = (math.log10(vals[1]) - math.log10(vals[0])) / 1.0
            assert abs(slope + d) < 1e-6

    def test_agreement_with_exact_at_100db(self, paper_v):
        for m_streams in (1, 2, 3):
            cfg = make_config(m_streams, snr_db=100.0)
            corr = corrchan.correlation_pair(cfg)
            rates = RatePlan.broadcast(2.0, m_streams, 4)
            power = default_power_allocation(0.7, rates, m_streams, 4)
            table = theta_table(power, rates)
            phi = phi_table(cfg, paper_v.clusters, corr)
            for ki in range(4):
                pe = exact_outage(0, ki, cfg, paper_v.clusters, corr, table)
                pa = asymptotic_outage(0, ki, phi, table)
                assert abs(pa - pe) / pe < 0.10


class TestGoodput:
    def test_limits(self):
        rates = RatePlan(np.array([[1.0, 2.0], [0.5, 1.5]]))
        assert goodput(np.zeros((2, 2)), rates) == pytest.approx(5.0)
        assert goodput(np.ones((2, 2)), rates) == 0.0

    def test_summation_oracle(self, paper_v):
        rep = outage_report(
            paper_v.system, paper_v.clusters, paper_v.corr,
            paper_v.power, paper_v.rates,
        )
        manual = 0.0
        for mi in range(3):
            for ki in range(4):
                manual += (1.0 - rep.p_exact_approx[mi, ki]) * paper_v.rates.rates[mi, ki]
        assert rep.goodput_exact == pytest.approx(manual, rel=1e-12)

    def test_linear_in_rates(self):
        rng = np.random.default_rng(7)
        p = rng.uniform(0, 1, size=(2, 3))
        r0 = rng.uniform(0.5, 2.0, size=(2, 3))
        bump = np.zeros((2, 3))
        bump[1, 2] = 1.0
        for delta in (0.25, 0.5, 1.0):
            g0 = goodput(p, RatePlan(r0))
            g1 = goodput(p, RatePlan(r0 + delta * bump))
            assert g1 - g0 == pytest.approx(delta * (1 - p[1, 2]), rel=1e-12)


class TestDiversityAndDmt:
    @pytest.mark.parametrize("m,expected", [(1, 3), (3, 1)])
    def test_diversity_order(self, m, expected):
        assert diversity_order(make_config(m)) == expected

    def test_equal_streams_unity(self):
        cfg = corrchan.SystemConfig(n_t=4, n_r=4, n_streams=4)
        assert diversity_order(cfg) == 1

    def test_fixed_power_example(self):
        # All power exponents zero forces r_2..K = 0; the near cluster
        # trades diversity for its multiplexing gain.
        cfg = make_config(2)  # d = 2
        gains = dmt_gain([0.4, 0.0, 0.0], [0.0, 0.0, 0.0], cfg)
        assert np.allclose(gains, [2 * 0.6, 2.0, 2.0])

    def test_zero_gains(self):
        cfg = make_config(2)
        assert np.allclose(dmt_gain([0.0, 0.0], [0.0, 0.0], cfg), [2.0, 2.0])

    def test_direct_formula(self):
        cfg = make_config(2)  # N_r=3, M=2
        gains = dmt_gain([0.2, 0.3], [0.5, 0.0], cfg)
        assert np.allclose(gains, [0.6, 1.4])

    def test_constraint_violations(self):
        cfg = make_config(2)
        with pytest.raises(DomainError):
            dmt_gain([0.0, 0.0], [0.0, 0.1], cfg)  # upsilon_K != 0
        with pytest.raises(DomainError):
            dmt_gain([0.0, 0.6], [0.5, 0.0], cfg)  # r_2 > upsilon_1
        with pytest.raises(DomainError):
            dmt_gain([0.0, 0.0], [0.1, 0.2, 0.0], cfg)

    def test_random_feasible_nondecreasing(self):
        cfg = make_config(1)
        rng = np.random.default_rng(8)
        for _ in range(50):
            k = int(rng.integers(2, 6))
            drops = rng.uniform(0, 0.2, size=k - 1)
            u = np.concatenate([np.cumsum(drops[::-1])[::-1], [0.0]])
            r = np.empty(k)
            r[0] = rng.uniform(0, 1 - u[0])
            r[1:] = rng.uniform(0, 1) * (u[:-1] - u[1:])
            gains = dmt_gain(r, u, cfg)
            assert np.all(np.diff(gains) >= -1e-12)


class TestLowerBound:
    def test_vanishes_with_rate(self):
        phi = outage.PhiTable(phi=np.array([[1e-4]]), decay=2)
        small = outage_lower_bound(0, 0, phi, RatePlan(np.array([[1e-9]])))
        assert small < 1e-20

    def test_m1_single_antenna_form(self):
        phi = outage.PhiTable(phi=np.array([[1e-3]]), decay=1)
        rates = RatePlan(np.array([[2.0]]))
        assert outage_lower_bound(0, 0, phi, rates) == pytest.approx(1e-3 * 3.0)


class TestOutageReport:
    def test_flags_infeasible_and_clamped(self):
        cfg = make_config(1, snr_db=10.0)
        clusters = corrchan.sort_clusters([(10, 0), (0, 20)], cfg.alpha, cfg.k_friis)
        corr = corrchan.correlation_pair(cfg)
        power = PowerAllocation(np.array([[0.5, 0.5]]))
        rates = RatePlan(np.array([[1.0, 2.0]]))  # infeasible at k=2
        rep = outage_report(cfg, clusters, corr, power, rates)
        flags = dict(rep.flags)
        assert outage.FLAG_INFEASIBLE in flags[(0, 1)]
        assert rep.p_exact_approx[0, 1] == 1.0
        # at 10 dB the asymptote exceeds one and is clamped
        assert outage.FLAG_CLAMPED in flags[(0, 0)]
        assert rep.p_asym[0, 0] == 1.0
