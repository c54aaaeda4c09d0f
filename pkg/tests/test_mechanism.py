import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from anonattack.errors import ConfigError
from anonattack.mechanism import (
    PrivacyParams,
    clip_nonnegative,
    geometric_pmf,
    noise_scale,
    release,
    sample_geometric,
    sample_noise,
    verify_dp_ratio,
)
from anonattack.workload import CountWorkload


def _workload():
    values = np.array([[[3.0, 0.0], [1.0, 2.0]], [[4.0, 2.0], [0.0, 0.0]]])
    return CountWorkload(("a", "b"), (("x", "y"), ("p",)), ("u", "w"), values)


def test_params_validation():
    with pytest.raises(ConfigError):
        PrivacyParams(0.0)
    with pytest.raises(ConfigError):
        PrivacyParams(1.0, sensitivity=0)
    with pytest.raises(ConfigError):
        PrivacyParams(1.0, mechanism="gaussian")


def test_noise_scale():
    assert noise_scale(PrivacyParams(2.0, 4, "laplace")) == 2.0
    assert noise_scale(PrivacyParams(2.0, 4)) == pytest.approx(math.exp(-0.5))
    assert noise_scale(PrivacyParams(2.0, 4, "none")) == 0.0


@given(st.floats(0.0, 0.99))
def test_pmf_sums_to_one(alpha):
    # closed form: sum over |z| <= K of the pmf is 1 - 2 alpha^(K+1)/(1+alpha)
    K = 4000
    total = float(np.sum(geometric_pmf(alpha, np.arange(-K, K + 1))))
    assert total == pytest.approx(1 - 2 * alpha ** (K + 1) / (1 + alpha), abs=1e-9)


def test_pmf_values():
    assert geometric_pmf(0.5, 0) == pytest.approx(1 / 3)
    assert geometric_pmf(0.5, -2) == pytest.approx(1 / 12)


@pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9])
def test_sampler_matches_pmf(alpha):
    x = sample_geometric(alpha, np.random.default_rng(7), 100_000)
    K = int(np.ceil(np.log(1e-4) / np.log(alpha)))
    # bins: (-inf, -K], -K+1 .. K-1, [K, inf)
    observed = np.array([np.sum(x <= -K)] + [np.sum(x == z) for z in range(-K + 1, K)] + [np.sum(x >= K)])
    tail = alpha ** K / (1 + alpha)
    expected = np.array([tail] + [geometric_pmf(alpha, z) for z in range(-K + 1, K)] + [tail]) * len(x)
    assert expected.sum() == pytest.approx(len(x))
    _, p = stats.chisquare(observed, expected)
    assert p > 1e-3


def test_release_is_seeded_and_keeps_padding_zero():
    w = _workload()
    p = PrivacyParams(1.0, 2)
    a = release(w, p, np.random.default_rng(3))
    b = release(w, p, np.random.default_rng(3))
    assert np.array_equal(a.values, b.values)
    assert a.values[1, 1].tolist() == [0.0, 0.0]  # padding cell of attribute b
    assert not a.clipped
    assert np.all(a.values == np.round(a.values))


def test_release_none_is_identity():
    w = _workload()
    out = release(w, PrivacyParams(1.0, 2, "none"), np.random.default_rng(0))
    assert np.array_equal(out.values, w.values)


def test_clip():
    w = _workload().with_values(np.full((2, 2, 2), -3.0), clipped=False)
    c = clip_nonnegative(w)
    assert c.clipped and c.values.min() == 0.0


@pytest.mark.parametrize("eps", [0.01, 0.1, 1.0, 10.0])
@pytest.mark.parametrize("s", [1, 3, 5, 10])
def test_dp_ratio_bound(eps, s):
    r = verify_dp_ratio(PrivacyParams(eps, s), s, 40)
    assert r <= math.exp(eps) * (1 + 1e-9)
    # the bound is attained: a full L1 shift reaches exp(eps) exactly
    assert r == pytest.approx(math.exp(eps), rel=1e-9)


def test_dp_ratio_small_shift():
    assert verify_dp_ratio(PrivacyParams(1.0, 1), 0) == 1.0
    assert verify_dp_ratio(PrivacyParams(0.1, 5), 1) == pytest.approx(math.exp(0.1))


def test_dp_ratio_rejects_laplace():
    with pytest.raises(ConfigError):
        verify_dp_ratio(PrivacyParams(1.0, 1, "laplace"), 1)


@settings(max_examples=50)
@given(st.floats(0.01, 5.0), st.integers(1, 6), st.integers(-30, 30), st.integers(-6, 6))
def test_pointwise_ratio_property(eps, s, z, d):
    # single-coordinate shift within the sensitivity never exceeds exp(eps)
    d = max(-s, min(s, d))
    alpha = math.exp(-eps / s)
    ratio = geometric_pmf(alpha, z) / geometric_pmf(alpha, z - d)
    assert ratio <= math.exp(eps) * (1 + 1e-9)


def test_sampler_moments():
    rng = np.random.default_rng(1)
    g = sample_geometric(0.5, rng, 1_000_000)
    assert abs(np.mean(g == 0) - 1 / 3) < 0.005
    lap = sample_noise(PrivacyParams(0.5, 1, "laplace"), rng, 1_000_000)  # b = 2
    assert abs(lap.mean()) < 0.02


@given(st.floats(0.0, 0.99), st.integers(-50, 50))
def test_pmf_symmetric(alpha, z):
    assert geometric_pmf(alpha, z) == geometric_pmf(alpha, -z)


@given(st.floats(0.0, 0.98), st.floats(0.001, 0.01))
def test_pmf_zero_decreases_in_alpha(alpha, step):
    assert geometric_pmf(alpha, 0) > geometric_pmf(alpha + step, 0)
