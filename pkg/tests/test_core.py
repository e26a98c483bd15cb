"""Model parameters, potentials, environment sampling, beta_cr."""

import numpy as np
import pytest

import driftpam as dp
from driftpam import ConfigError, ModelParams, PotentialModel


def test_params_validation():
    p = ModelParams(kappa=1.0, h=0.6)
    assert p.p_right == pytest.approx(0.8)
    assert p.p_left == pytest.approx(0.2)
    with pytest.raises(ConfigError):
        ModelParams(kappa=-1.0, h=0.5)
    with pytest.raises(ConfigError):
        ModelParams(kappa=1.0, h=0.0)
    with pytest.raises(ConfigError):
        ModelParams(kappa=1.0, h=1.5)


def test_potential_validation():
    with pytest.raises(ConfigError):
        PotentialModel("two_point", a=-1.0, q=0.5)   # a must be > 0
    with pytest.raises(ConfigError):
        PotentialModel("two_point", a=1.0, q=1.5)
    with pytest.raises(ConfigError):
        PotentialModel("finite_support", atoms=(0.0, -1.0), weights=(0.5, 0.6))
    with pytest.raises(ConfigError):
        PotentialModel("uniform", b=2.0)   # support is [b, 0], b < 0
    with pytest.raises(ConfigError):
        PotentialModel("nope")


# -- normalization ----------------------------------------------------------

def test_normalize_degenerate():
    m = dp.normalize(PotentialModel("degenerate", c=-0.5))
    assert m.c == 0.0
    assert m.shift == -0.5
    assert m.is_normalized()


def test_normalize_finite_support():
    m = dp.normalize(PotentialModel("finite_support", atoms=(-1.0, -3.0),
                                    weights=(0.5, 0.5)))
    assert m.shift == -1.0
    assert m.esssup() == 0.0
    assert m.support_min() == pytest.approx(-2.0)


def test_normalize_idempotent():
    m = dp.normalize(PotentialModel("two_point", a=1.0, q=0.5))
    assert m.shift == 0.0
    assert dp.normalize(m).shift == 0.0


def test_require_normalized():
    m = PotentialModel("degenerate", c=-0.5)
    with pytest.raises(ConfigError):
        m.require_normalized()


# -- expectation ------------------------------------------------------------

def test_expectation_two_point():
    m = PotentialModel("two_point", a=1.0, q=0.25)
    # xi = 0 w.p. q, xi = -a w.p. 1-q
    assert dp.expectation(m, lambda x: x) == pytest.approx(-0.75)
    assert dp.expectation(m, lambda x: x ** 2) == pytest.approx(0.75)


def test_expectation_uniform():
    m = PotentialModel("uniform", b=-2.0)
    assert dp.expectation(m, lambda x: x) == pytest.approx(-1.0, abs=1e-10)
    assert dp.expectation(m, lambda x: x ** 2) == pytest.approx(4.0 / 3.0,
                                                                abs=1e-10)


def test_expectation_markov_stationary():
    m = PotentialModel("markov", states=(0.0, -1.0),
                       transition=((0.9, 0.1), (0.3, 0.7)))
    # stationary law: pi = (0.75, 0.25)
    assert dp.expectation(m, lambda x: x) == pytest.approx(-0.25)
    pi = m.stationary()
    assert pi == pytest.approx([0.75, 0.25])


# -- sampling ---------------------------------------------------------------

def test_site_uniforms_deterministic():
    sites = np.arange(-5, 20)
    u1 = dp.site_uniforms(42, sites)
    u2 = dp.site_uniforms(42, sites)
    assert np.array_equal(u1, u2)
    assert not np.array_equal(u1, dp.site_uniforms(43, sites))
    assert np.all((u1 >= 0) & (u1 < 1))


def test_sampling_window_coherence_iid():
    m = PotentialModel("two_point", a=1.0, q=0.5)
    big = dp.sample_environment(m, 7, -50, 200)
    small = dp.sample_environment(m, 7, 10, 60)
    assert np.array_equal(big.slice(10, 60), small.values)


def test_sampling_window_coherence_markov():
    m = PotentialModel("markov", states=(0.0, -1.0),
                       transition=((0.9, 0.1), (0.3, 0.7)))
    big = dp.sample_environment(m, 11, -100, 100)
    small = dp.sample_environment(m, 11, -20, 40)
    assert np.array_equal(big.slice(-20, 40), small.values)


def test_sampling_lln_two_point():
    m = PotentialModel("two_point", a=1.0, q=0.3)
    env = dp.sample_environment(m, 0, 0, 100_000)
    freq0 = np.mean(env.values == 0.0)
    # 4 sigma band around q
    assert abs(freq0 - 0.3) < 4 * np.sqrt(0.3 * 0.7 / 100_000)


def test_sampling_lln_uniform():
    m = PotentialModel("uniform", b=-2.0)
    env = dp.sample_environment(m, 0, 0, 100_000)
    assert abs(env.values.mean() + 1.0) < 4 * (2.0 / np.sqrt(12 * 100_000))
    assert env.values.min() >= -2.0 and env.values.max() <= 0.0


def test_sampling_lln_markov():
    m = PotentialModel("markov", states=(0.0, -1.0),
                       transition=((0.9, 0.1), (0.3, 0.7)))
    env = dp.sample_environment(m, 0, 0, 200_000)
    freq0 = np.mean(env.values == 0.0)
    assert abs(freq0 - 0.75) < 0.01
    # transition frequency 0 -> 0 should match the kernel
    v = env.values
    at0 = v[:-1] == 0.0
    assert abs(np.mean(v[1:][at0] == 0.0) - 0.9) < 0.01


def test_environment_window_lookup():
    m = PotentialModel("two_point", a=1.0, q=0.5)
    env = dp.sample_environment(m, 3, -2, 5)
    assert env.value(-2) == env.values[0]
    assert env.value(5) == env.values[-1]
    with pytest.raises(IndexError):
        env.value(6)


# -- shifts -----------------------------------------------------------------

def test_shift_environment_example():
    m = PotentialModel("finite_support", atoms=(0.0, -1.0, -2.0),
                       weights=(1 / 3, 1 / 3, 1 / 3))
    env = dp.sample_environment(m, 5, 0, 2)
    a, b, c = env.values
    sh = dp.shift_environment(env, 1)
    assert (sh.lo, sh.hi) == (0, 1)
    assert np.array_equal(sh.values, [b, c])
    sh2 = dp.shift_environment(env, -1)
    assert (sh2.lo, sh2.hi) == (1, 2)
    assert np.array_equal(sh2.values, [a, b])


def test_shift_roundtrip_identity():
    m = PotentialModel("two_point", a=1.0, q=0.5)
    env = dp.sample_environment(m, 9, -10, 10)
    back = dp.shift_environment(dp.shift_environment(env, 3), -3)
    assert np.array_equal(back.values, env.slice(back.lo, back.hi))


# -- beta_cr ----------------------------------------------------------------

def test_beta_cr_benchmark():
    bc = dp.beta_cr(ModelParams(1.0, 0.6),
                    PotentialModel("two_point", a=1.0, q=0.5))
    assert bc.exact
    assert float(bc) == pytest.approx(0.2, abs=1e-12)


def test_beta_cr_h1_is_kappa():
    bc = dp.beta_cr(ModelParams(2.5, 1.0),
                    PotentialModel("two_point", a=1.0, q=0.5))
    assert float(bc) == pytest.approx(2.5, abs=0)


def test_beta_cr_monotone_in_h():
    m = PotentialModel("two_point", a=1.0, q=0.5)
    vals = [float(dp.beta_cr(ModelParams(1.0, h), m))
            for h in np.linspace(0.1, 1.0, 10)]
    assert np.all(np.diff(vals) > 0)


def test_beta_cr_scales_with_kappa():
    m = PotentialModel("two_point", a=1.0, q=0.5)
    v1 = float(dp.beta_cr(ModelParams(1.0, 0.6), m))
    v3 = float(dp.beta_cr(ModelParams(3.0, 0.6), m))
    assert v3 == pytest.approx(3 * v1, rel=1e-12)


def test_beta_cr_markov_bracket():
    m = PotentialModel("markov", states=(0.0, -1.0),
                       transition=((0.9, 0.1), (0.3, 0.7)))
    bc = dp.beta_cr(ModelParams(1.0, 0.6), m)
    assert not bc.exact
    assert (bc.lower, bc.upper) == (0.0, 1.0)
    with pytest.raises(Exception):
        float(bc)
