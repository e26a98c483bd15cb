"""Annealed exponents: entropy, tilted/transfer bounds, intermittency."""

import numpy as np
import pytest

import driftpam as dp
from driftpam import (ConfigError, FiniteMeasure, MarkovMeasure, ModelParams,
                      PotentialModel)

H1 = ModelParams(1.0, 1.0)
TP = dp.normalize(PotentialModel("two_point", a=1.0, q=0.5))
ETA = dp.measure_from_model(TP)


def lambda1_oracle():
    """Root of log <1/(1 - xi - beta)> at the h=1 benchmark:
    (1/2)(1/(1-b) + 1/(2-b)) = 1 gives b = 1 - 1/sqrt(2)."""
    return -(1.0 - np.sqrt(0.5))


# -- entropy ----------------------------------------------------------------

def test_relative_entropy_zero_iff_equal():
    assert dp.relative_entropy(ETA, ETA) == 0.0
    mu = FiniteMeasure((0.0, -1.0), (0.7, 0.3))
    assert dp.relative_entropy(mu, ETA) > 0
    # oracle: sum mu log(mu/eta)
    want = 0.7 * np.log(0.7 / 0.5) + 0.3 * np.log(0.3 / 0.5)
    assert dp.relative_entropy(mu, ETA) == pytest.approx(want, abs=1e-14)


def test_relative_entropy_not_abs_cont():
    mu = FiniteMeasure((0.0, -2.0), (0.5, 0.5))
    assert dp.relative_entropy(mu, ETA) == np.inf


def test_product_rate_is_single_site_entropy():
    mu = FiniteMeasure((0.0, -1.0), (0.9, 0.1))
    assert dp.product_rate(mu, ETA) == dp.relative_entropy(mu, ETA)


def test_entropy_chain_identity_product():
    mu = FiniteMeasure((0.0, -1.0), (0.8, 0.2))
    for n in (1, 2, 3):
        lhs, rhs = dp.entropy_chain_identity(mu, ETA, n)
        assert lhs == pytest.approx(rhs, abs=1e-10)
        assert lhs == pytest.approx(n * dp.relative_entropy(mu, ETA),
                                    abs=1e-10)


def test_entropy_chain_identity_markov():
    nu = MarkovMeasure((0.0, -1.0), ((0.6, 0.4), (0.2, 0.8)))
    for n in (1, 2, 3):
        lhs, rhs = dp.entropy_chain_identity(nu, ETA, n)
        assert lhs == pytest.approx(rhs, abs=1e-10)


# -- tilted product bound ---------------------------------------------------

def simplex_grid_oracle(params, eta, beta, p, n=401):
    """Direct sup over two-atom product measures mu = (m, 1-m) of
    L(beta, mu) - H(mu|eta)/p on a dense grid."""
    atoms, ew = eta.arrays()
    f = np.array([dp.annealed._site_log_weight(params, a, beta)
                  for a in atoms])
    best = -np.inf
    for m in np.linspace(0.0, 1.0, n):
        mw = np.array([m, 1.0 - m])
        ok = mw > 0
        ent = np.sum(mw[ok] * np.log(mw[ok] / ew[ok]))
        best = max(best, float(mw @ f) - ent / p)
    return best


def test_tilted_matches_simplex_grid():
    for p in (0.5, 1.0, 2.0):
        for beta in (-0.5, 0.0, 0.3):
            tv = dp.lp_sup_tilted(H1, ETA, beta, p)
            oracle = simplex_grid_oracle(H1, ETA, beta, p)
            assert tv.value == pytest.approx(oracle, abs=1e-4)
            assert tv.value >= oracle - 1e-12


def test_tilted_closed_form_h1():
    # (1/p) log < (kappa/(kappa - xi - beta))^p >
    p, beta = 2.0, 0.1
    tv = dp.lp_sup_tilted(H1, ETA, beta, p)
    want = np.log(0.5 * (1 / (1 - beta)) ** p
                  + 0.5 * (1 / (2 - beta)) ** p) / p
    assert tv.value == pytest.approx(want, abs=1e-13)
    assert tv.bound == "exact"


def test_tilted_bound_flag():
    # product-measure value is certified exact only at h = 1
    assert dp.lp_sup_tilted(H1, ETA, 0.1, 1.0).bound == "exact"
    assert dp.lp_sup_tilted(ModelParams(1.0, 0.6), ETA, 0.1, 1.0).bound == \
        "lower"


def test_tilted_maximizer_attains_value():
    tv = dp.lp_sup_tilted(H1, ETA, 0.1, 1.5)
    mu = tv.maximizer
    f = np.array([dp.annealed._site_log_weight(H1, a, 0.1)
                  for a in mu.arrays()[0]])
    attained = float(mu.arrays()[1] @ f) - dp.relative_entropy(mu, ETA) / 1.5
    assert attained == pytest.approx(tv.value, abs=1e-12)


def test_tilted_p_to_zero_recovers_annealed_mean():
    # p -> 0: (1/p) log <w^p> -> <log w>
    beta = 0.1
    want = 0.5 * np.log(1 / (1 - beta)) + 0.5 * np.log(1 / (2 - beta))
    got = dp.lp_sup_tilted(H1, ETA, beta, 1e-8).value
    assert got == pytest.approx(want, abs=1e-6)


def test_L_of_product():
    mu = FiniteMeasure((0.0, -1.0), (0.25, 0.75))
    beta = 0.2
    want = 0.25 * np.log(1 / (1 - beta)) + 0.75 * np.log(1 / (2 - beta))
    assert dp.L_of_product(H1, beta, mu).mean == pytest.approx(want,
                                                               abs=1e-12)


# -- transfer operator ------------------------------------------------------

def test_transfer_depth1_equals_tilted():
    for params in (H1, ModelParams(1.0, 0.6)):
        tv = dp.lp_sup_tilted(params, ETA, 0.05, 2.0)
        val, op = dp.lp_sup_transfer(params, ETA, 0.05, 2.0, depth=1)
        assert val == pytest.approx(tv.value, abs=1e-12)
        assert op.size == 1


def test_transfer_depth_ladder_decreasing():
    # deeper windows only tighten the upper estimate at h < 1
    params = ModelParams(1.0, 0.6)
    vals = [dp.lp_sup_transfer(params, ETA, 0.1, 1.0, depth=d)[0]
            for d in (1, 2, 3, 4, 5)]
    diffs = np.diff(vals)
    assert np.all(diffs <= 1e-12)
    # and the increments shrink
    assert abs(diffs[-1]) < abs(diffs[0])


def test_transfer_perron_bracket():
    params = ModelParams(1.0, 0.6)
    val, op = dp.lp_sup_transfer(params, ETA, 0.1, 2.0, depth=4)
    lo, hi = op.root_bracket
    assert lo <= op.perron_root <= hi
    assert val == pytest.approx(np.log(op.perron_root) / 2.0, abs=1e-12)


# -- lambda_p ---------------------------------------------------------------

def test_lambda1_benchmark():
    res = dp.lambda_annealed(TP, H1, 1.0)
    assert res.value == pytest.approx(lambda1_oracle(), abs=1e-10)


def test_lambda2_benchmark_vs_maxdrift():
    res = dp.lambda_annealed(TP, H1, 2.0)
    md = dp.lambda_annealed_maxdrift(TP, H1, 2)
    assert res.value == pytest.approx(md.value, abs=1e-10)
    assert res.value == pytest.approx(-0.2287701215812546, abs=1e-9)


def test_maxdrift_matches_tilted_p1():
    md = dp.lambda_annealed_maxdrift(TP, H1, 1)
    assert md.value == pytest.approx(lambda1_oracle(), abs=1e-10)


def test_maxdrift_rejects_noninteger_and_h_lt_1():
    with pytest.raises(ConfigError):
        dp.lambda_annealed_maxdrift(TP, H1, 1.5)
    with pytest.raises(ConfigError):
        dp.lambda_annealed_maxdrift(TP, ModelParams(1.0, 0.6), 1)


def test_lambda_annealed_noninteger_p_flagged_conjectured():
    res = dp.lambda_annealed(TP, H1, 1.5)
    assert "conjectur" in str(res.meta).lower()
    # still sandwiched between the neighboring integer moments
    l1 = dp.lambda_annealed(TP, H1, 1.0).value
    l2 = dp.lambda_annealed(TP, H1, 2.0).value
    assert l1 - 1e-12 <= res.value <= l2 + 1e-12


def test_lambda_annealed_degenerate_is_shift():
    m = dp.normalize(PotentialModel("degenerate", c=-0.4))
    for p in (0.5, 1.0, 3.0):
        assert dp.lambda_annealed(m, H1, p).value == pytest.approx(-0.4,
                                                                   abs=1e-12)


def test_lambda_annealed_markov_rejected():
    m = dp.normalize(PotentialModel("markov", states=(0.0, -1.0),
                                    transition=((0.7, 0.3), (0.3, 0.7))))
    with pytest.raises(ConfigError):
        dp.lambda_annealed(m, H1, 1.0)


def test_lambda_annealed_above_quenched():
    lam0 = dp.lambda_quenched(TP, H1).value
    for p in (0.5, 1.0, 2.0):
        assert dp.lambda_annealed(TP, H1, p).value >= lam0 - 1e-10


# -- intermittency ----------------------------------------------------------

def test_intermittency_scan_benchmark():
    curve = dp.intermittency_scan(TP, H1, (1.0, 2.0, 3.0, 4.0))
    assert curve.monotone
    assert curve.p_lambda_p_convex
    assert np.all(np.diff(curve.lambdas) > 0)
    assert curve.first_intermittent_p == 1.0   # lambda_1 > lambda_0 here
    assert curve.lambda0 == pytest.approx(-(3 - np.sqrt(5)) / 2, abs=1e-9)


def test_intermittency_degenerate_never():
    m = dp.normalize(PotentialModel("degenerate", c=-0.4))
    curve = dp.intermittency_scan(m, H1, (1.0, 2.0, 3.0))
    assert curve.first_intermittent_p is None
    assert np.allclose(curve.lambdas, -0.4, atol=1e-10)


def test_continuity_at_zero():
    ps, gaps, lam0, shrinking = dp.continuity_at_zero(TP, H1)
    # lambda_p -> lambda_0 monotonically along the decreasing p ladder
    assert shrinking
    assert np.all(np.diff(gaps) < 0)
    assert gaps[-1] < 0.02
    assert lam0 == pytest.approx(-(3 - np.sqrt(5)) / 2, abs=1e-9)
