import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

import ckpsim as ck
from ckpsim import CT, CF, PF
from ckpsim.analysis import (harvest_states, loglog_slope, metrics,
                             reliability_ratio, standard_bound,
                             tau_statistics, wilson_interval)

from conftest import evolve_state


def explicit(parents, labels, eps=0, p="1/2", k=2):
    return ck.new_state(ck.Params.make(eps, p, k),
                        ck.ExplicitInit(parents, labels))


class TestMetrics:
    def test_counts_on_hand_tree(self):
        state = explicit([-1, 0, 1, 0], [CF, CT, CT, PF])
        m = metrics(state)
        assert (m.n_nodes, m.n_pt, m.n_pf) == (4, 3, 1)
        assert m.n_true_pt == 0 and m.n_false_pt == 3
        assert m.n_components == 1 and m.max_component == 3
        assert m.m_t == 3  # the whole subtree of the CF root
        assert m.height == 2
        assert not m.extinct

    def test_invariants_on_evolved_states(self, evolved_states):
        for state in evolved_states:
            m = metrics(state)
            assert m.n_nodes == m.n_pt + m.n_pf
            assert m.n_pt == m.n_true_pt + m.n_false_pt
            assert m.max_component <= m.n_false_pt
            assert m.iuni <= m.uni
            assert m.m_t >= m.max_component or m.n_components == 0

    def test_univalent_counting(self):
        # 0 CF - 1 CT - 2 CT - 3 CT chain plus a second child of 0:
        # univalent nodes have exactly one PT child
        state = explicit([-1, 0, 1, 2, 0], [CF, CT, CT, CT, CT])
        m = metrics(state)
        # 1 and 2 are univalent; 2 has no univalent strict descendant
        assert m.uni == 2
        assert m.iuni == 1


class TestDriftCertificates:
    def test_singleton_phi_exp_drift_closed_form(self):
        # from the CF root alone: no check keeps child (phi 1 -> 4),
        # check kills both. E[delta] = (1-p)*3 + p*(-1) = 3 - 4p
        for p in (Fraction(1, 2), Fraction(6, 7), Fraction(1, 5)):
            state = ck.new_state(ck.Params.make(0, p, 4),
                                 ck.SimpleRootCF())
            cert = ck.drift_certificate(state, "exp")
            assert cert.exact_expected_delta == 3 - 4 * p
            assert cert.satisfied == (3 - 4 * p < 0)

    def test_singleton_phi_lc_drift_closed_form(self):
        # singleton component: E[delta] = (1-p)*1 + p*(-1) = 1 - 2p
        for p in (Fraction(1, 10), Fraction(1, 4)):
            state = ck.new_state(ck.Params.make(0, p, 2),
                                 ck.SimpleRootCF())
            cert = ck.drift_certificate(state, "lc",
                                        claimed_bound=standard_bound(
                                            "lc", state.params))
            assert cert.exact_expected_delta == 1 - 2 * p
            assert cert.satisfied
            assert cert.max_abs_delta == 1

    def test_certificate_matches_manual_enumeration(self):
        state = explicit([-1, 0, 0], [CF, CT, CT], p="1/3", k=2)
        base = ck.phi_exp(state)
        expected = Fraction(0)
        for pr, o in ck.one_step_support(state):
            nxt = state.copy()
            from ckpsim.evolution import apply_outcome
            apply_outcome(nxt, o)
            expected += pr * (ck.phi_exp(nxt) - base)
        cert = ck.drift_certificate(state, "exp")
        assert cert.exact_expected_delta == expected

    def test_subtree_restriction_renormalizes(self):
        state = explicit([-1, 0, 0, 1], [CT, CF, CT, CT], eps="1/10")
        cert = ck.drift_certificate(state, "lc", restrict_to_subtree=1)
        # restricted support only contains parents 1 and 3
        assert cert.support_size < len(ck.one_step_support(state))

    def test_extinct_state_rejected(self):
        state = explicit([-1], [PF])
        with pytest.raises(ck.ExtinctError):
            ck.drift_certificate(state, "exp")

    def test_vacuous_state_rejected(self):
        state = explicit([-1], [CT], eps="1/10")
        with pytest.raises(ValueError):
            ck.drift_certificate(state, "exp")


def test_standard_bounds():
    prm = ck.Params.make(0, "1/5", 2)
    assert standard_bound("lc", prm) == Fraction(1, 10)
    assert standard_bound("exp", prm) == 0
    with pytest.raises(ValueError):
        standard_bound("nope", prm)


def test_harvest_states_properties():
    prm = ck.Params.make(0, "1/5", 5)
    states = harvest_states(prm, ck.SimpleRootCF(), 25, 7, t_cap=32,
                            require=lambda s: ck.phi_exp(s) > 0)
    assert len(states) == 25
    assert all(not s.extinct for s in states)
    assert all(ck.phi_exp(s) > 0 for s in states)
    assert len({s.digest() for s in states}) > 10  # actually diverse
    # deterministic in the seed
    again = harvest_states(prm, ck.SimpleRootCF(), 25, 7, t_cap=32,
                           require=lambda s: ck.phi_exp(s) > 0)
    assert [s.digest() for s in again] == [s.digest() for s in states]


def test_harvest_gives_up_on_impossible_filter():
    prm = ck.Params.make(0, "1/5", 5)
    with pytest.raises(RuntimeError):
        harvest_states(prm, ck.SimpleRootCF(), 3, 7, t_cap=8,
                       require=lambda s: False)


class TestWilson:
    def test_against_statsmodels_free_closed_form(self):
        # spot value checked against the standard Wilson formula
        low, high = wilson_interval(8, 10)
        assert low == pytest.approx(0.4901625, abs=1e-6)
        assert high == pytest.approx(0.9433178, abs=1e-6)

    def test_boundaries(self):
        assert wilson_interval(0, 50)[0] == 0.0
        assert wilson_interval(50, 50)[1] == 1.0
        low, _ = wilson_interval(1, 50)
        assert low > 0.0


class TestUrnOracle:
    def test_closed_form_moments_match_scipy_betabinom(self):
        for t0, t in [(10, 90), (5, 20), (3, 7)]:
            o = ck.polya_urn_oracle(t0, t)
            rv = stats.betabinom(t, 1, t0 - 1)
            assert float(o.mean) == pytest.approx(rv.mean(), rel=1e-12)
            second = rv.var() + rv.mean() ** 2
            assert float(o.second_moment) == pytest.approx(second,
                                                           rel=1e-12)

    def test_quoted_values(self):
        o = ck.polya_urn_oracle(10, 90)
        assert o.mean == 9
        assert o.second_moment == Fraction(90 * (180 + 9), 10 * 11)

    def test_sampler_distribution_matches_betabinom(self):
        t0, t, n = 6, 30, 20000
        o = ck.polya_urn_oracle(t0, t)
        vals = np.array([o.sample(ck.split(31, i)) for i in range(n)])
        rv = stats.betabinom(t, 1, t0 - 1)
        assert vals.min() >= 0 and vals.max() <= t
        expected = rv.pmf(np.arange(t + 1)) * n
        observed = np.bincount(vals, minlength=t + 1).astype(float)
        # pool sparse tail cells so the chi-square test is valid
        keep = expected >= 5
        obs = np.append(observed[keep], observed[~keep].sum())
        exp = np.append(expected[keep], expected[~keep].sum())
        chi2, pval = stats.chisquare(obs, exp * obs.sum() / exp.sum())
        assert pval > 1e-4

    def test_validation(self):
        with pytest.raises(ValueError):
            ck.polya_urn_oracle(1, 5)


class TestTau:
    def test_exact_tail_law(self):
        # with the length-3 univalent start and k = 2, no check can
        # reach the tracked node before it gains a second child, so
        # P(tau > t) = prod (2i+1)/(2i+3) = 1/(2t+1) exactly
        stats_ = tau_statistics("1/2", 3, 30000, 99, cap=256)
        for t in (1, 2, 5, 10, 20):
            exact = 1 / (2 * t + 1)
            se = math.sqrt(exact * (1 - exact) / stats_.trials)
            assert abs(stats_.tail_at(t) - exact) < 5 * se

    def test_tail_slope_near_minus_one(self):
        stats_ = tau_statistics("1/2", 3, 30000, 99, cap=1100)
        grid = [10, 30, 100, 300, 1000]
        ys = [stats_.tail_at(t) for t in grid]
        assert loglog_slope(grid, ys) == pytest.approx(-1.0, abs=0.2)


def test_survival_estimate_fields():
    est = ck.survival_estimate(ck.Params.make(0, "1/5", 5),
                               ck.SimpleRootCF(), 60, 2000, 5)
    assert est.trials == 60
    assert 0 <= est.wilson_low <= est.frequency <= est.wilson_high <= 1
    assert est.survived + len(est.extinction_times) == est.trials
    assert all(0 <= t <= 2000 for t in est.extinction_times)


def test_survival_estimate_tracks_first_cf_subtree():
    est = ck.survival_estimate(ck.Params.make("3/10", "9/10", 2),
                               ck.GeneralRootCT(), 40, 500, 6)
    # with heavy checking nearly every error subtree dies while the
    # tree itself keeps growing
    assert est.frequency < 0.5


def test_reliability_ratio():
    recs = [metrics(evolve_state("1/20", "19/20", 10, 500, seed=s))
            for s in range(5)]
    mean, se = reliability_ratio(recs)
    assert 0 <= mean < 0.5
    assert se >= 0
    with pytest.raises(ValueError):
        reliability_ratio([])
