import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from rffb import bounds, mclab
from rffb.errors import DomainError, InvalidArgument, PreconditionError

GAMMA = bounds.GAMMA


def test_wilson_interval_against_reference():
    # reference values from the score-interval formula via scipy's binomtest
    for k, n in ((0, 20_000), (3, 100), (50, 100), (100, 100)):
        lo, hi = mclab.wilson_interval(k, n)
        ref = stats.binomtest(k, n).proportion_ci(0.95, method="wilson")
        assert lo == pytest.approx(ref.low, abs=1e-12)
        assert hi == pytest.approx(ref.high, abs=1e-12)


@given(st.integers(1, 10 ** 6).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))))
def test_proportion_invariants(kn):
    k, n = kn
    est = mclab.proportion(k, n)
    assert 0.0 <= est.ci_low <= est.p_hat <= est.ci_high <= 1.0
    assert est.failures <= est.trials


def test_wilson_rejects_bad_counts():
    with pytest.raises(InvalidArgument):
        mclab.wilson_interval(5, 3)


def test_huge_epsilon_never_fails():
    est = mclab.estimate_error_probability(10, 50, 2.5, 1000, 1)
    assert est.failures == 0 and est.p_hat == 0.0


def test_error_probability_matches_trial_records():
    recs = mclab.trial_records(2.0, 20, 0.3, 300, 5, grid_points=mclab.mc_grid_points(2.0, 0.3))
    est = mclab.estimate_error_probability(2.0, 20, 0.3, 300, 5)
    assert est.failures == sum(r.exceeded for r in recs)
    assert all(r.exceeded == (r.sup_value >= 0.3) for r in recs)
    assert [r.trial_index for r in recs] == list(range(300))


def test_error_probability_is_worker_invariant():
    a = mclab.certified_sups(3.0, 50, 1200, 17, grid_points=100, jobs=1)
    b = mclab.certified_sups(3.0, 50, 1200, 17, grid_points=100, jobs=3)
    assert np.array_equal(a, b)


def test_small_envelope_cell():
    eps = bounds.epsilon_for_bound(5, 1000, 0.2)
    est = mclab.estimate_error_probability(5, 1000, eps, 1000, 3)
    assert est.ci_low <= bounds.thm1(5, 1000, eps)


def test_mc_grid_is_capped_and_pads_about_a_quarter_epsilon():
    assert mclab.mc_grid_points(10, 1e-6) == 40960
    M = mclab.mc_grid_points(10, 0.1)
    pad = mclab.TYPICAL_LIPSCHITZ * 10 / (M - 1) / 2
    assert 0.2 * 0.1 <= pad <= 0.25 * 0.1


def test_expected_sup_cell():
    mean, se = mclab.estimate_expected_sup(1, 1024, 200, 12)
    assert mean < bounds.expected_sup_bound(1, 1024) == pytest.approx(0.1316, abs=1e-4)
    assert se > 0


def test_expected_sup_decreases_with_D():
    means = [mclab.estimate_expected_sup(2, D, 100, 4) for D in (64, 256, 1024)]
    for (m1, s1), (m2, s2) in zip(means, means[1:]):
        assert m2 <= m1 + 2 * math.hypot(s1, s2)


def test_trial_normals_do_not_depend_on_the_split():
    whole = mclab.trial_normals(3, 0, 1300, 3)
    parts = np.concatenate([mclab.trial_normals(3, a, c, 3) for a, c in ((0, 1), (1, 499), (499, 1300))])
    assert np.array_equal(whole, parts)
    assert np.abs(whole.mean()) < 0.05 and abs(whole.std() - 1) < 0.05


def test_lipschitz_variance():
    chk = mclab.check_lipschitz_variance(16, 5, 26, 20_000, 8)
    assert chk.max_variance <= chk.cap * 1.05
    assert chk.within_cap
    zero = mclab.check_lipschitz_variance(4, 0.0 + 1e-9, 2, 100, 1)
    assert zero.max_variance < 1e-15


def test_lipschitz_variance_halves_with_D():
    v = [mclab.check_lipschitz_variance(D, 5, 26, 20_000, 9).max_variance for D in (8, 16)]
    assert v[1] / v[0] == pytest.approx(0.5, rel=0.1)


def test_lipschitz_variance_worker_invariant():
    a = mclab.check_lipschitz_variance(4, 5, 11, 1500, 2, jobs=1)
    b = mclab.check_lipschitz_variance(4, 5, 11, 1500, 2, jobs=2)
    assert a == b


def test_parameter_identity():
    p = mclab.parameter_identity(1.0, 2, 100_000, 3)
    assert p.target == pytest.approx(0.606531, abs=1e-6)
    assert p.pre_root_target == pytest.approx(0.367879, abs=1e-6)
    assert abs(p.pre_root_mean - p.pre_root_target) <= 4 / math.sqrt(100_000)
    p = mclab.parameter_identity(1.0, 4, 100_000, 4)
    assert p.pre_root_target == pytest.approx(0.135335, abs=1e-6)
    assert abs(p.pre_root_mean - p.pre_root_target) <= 4 / math.sqrt(100_000)
    p = mclab.parameter_identity(0.0, 3, 10, 1)
    assert p.estimate == p.target == 1.0
    with pytest.raises(PreconditionError, match="noise floor"):
        mclab.parameter_identity(1.5, 4, 100, 1)


def test_affinity_closed_properties():
    assert mclab.affinity_closed(2.0, 2.0, 5) == 1.0
    v = mclab.affinity_closed(GAMMA, 1.0, 2)
    assert 0.5 * math.exp(-1) <= v < 1
    assert mclab.affinity_closed(1.0, GAMMA, 2) == v
    with pytest.raises(DomainError):
        mclab.affinity_closed(0.0, 1.0, 2)


@settings(max_examples=100)
@given(st.floats(0.01, 100.0), st.floats(0.01, 100.0), st.integers(1, 60), st.floats(0.01, 100.0))
def test_affinity_is_scale_invariant_and_above_floor(s1, s2, D, a):
    v = mclab.affinity_closed(s1, s2, D)
    assert mclab.affinity_closed(a * s1, a * s2, D) == pytest.approx(v, abs=1e-10)
    kl = bounds.kl_scaled_isotropic(min(s1, s2) / max(s1, s2), D)
    assert v >= 0.5 * math.exp(-kl) - 1e-15
    assert 0.0 < v <= 1.0


def test_affinity_one_dimensional_oracle():
    # D = 1: integrate min of two normal densities numerically
    from scipy import integrate
    s1, s2 = 0.3, 2.0
    f = lambda x: min(stats.norm.pdf(x, scale=math.sqrt(s1)), stats.norm.pdf(x, scale=math.sqrt(s2)))
    c = math.sqrt(mclab.crossing_radius_sq(s1, s2, 1))
    val = 2 * (integrate.quad(f, 0, c)[0] + integrate.quad(f, c, np.inf)[0])
    assert mclab.affinity_closed(s1, s2, 1) == pytest.approx(val, abs=1e-9)


@pytest.mark.parametrize("rho", [0.1, GAMMA, 0.5, 0.9])
@pytest.mark.parametrize("D", [1, 5])
def test_three_way_agreement(rho, D):
    closed = mclab.affinity_closed(rho, 1.0, D)
    mc = mclab.affinity_mc(rho, 1.0, D, 200_000, 11)
    np_ = mclab.neyman_pearson_error(rho, 1.0, D, 200_000, 12)
    assert abs(mc.value - closed) <= 4 * mc.stderr + 1e-12
    assert abs(np_.value - closed) <= 4 * np_.stderr
    assert mc.value >= 0.5 * math.exp(-bounds.kl_scaled_isotropic(rho, D)) - 3 * mc.stderr


def test_identical_pair_is_degenerate():
    assert mclab.affinity_mc(1.0, 1.0, 3, 100, 1).value == 1.0
    assert mclab.neyman_pearson_error(1.0, 1.0, 3, 100, 1).value == 1.0


def test_neyman_pearson_threshold_is_optimal():
    best = mclab.neyman_pearson_error(GAMMA, 1.0, 2, 100_000, 5)
    for t in (-1.0, -0.3, -0.1, 0.1, 0.3, 1.0):
        other = mclab.threshold_test_error(GAMMA, 1.0, 2, 100_000, 5, t)
        assert other.value >= best.value - 3 * best.stderr


def test_two_point_pair():
    p = mclab.two_point_pair(GAMMA * 4, 4.0, 3)
    assert p.kl == pytest.approx(1.5, abs=1e-10)
    assert p.affinity >= 0.5 * math.exp(-p.kl)
    assert p.k1 == pytest.approx(math.exp(-GAMMA * 2))


def test_lecam_floor_experiment():
    rep = mclab.lecam_floor_experiment(3.0, 2, 20_000, 6)
    assert rep.floor == pytest.approx(0.027347, abs=1e-5)
    assert rep.floor <= rep.intermediate <= 1.0
    assert rep.passed
    assert 0.3 <= rep.empirical <= 0.5
    rep4 = mclab.lecam_floor_experiment(3.0, 4, 1000, 6)
    assert rep4.floor == pytest.approx(rep.floor / math.e, rel=1e-12)
