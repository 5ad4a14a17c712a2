from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings, strategies as st

from randhold.errors import DomainError, ParameterError
from randhold.renewal import (
    Deterministic, Exponential, Gamma, Uniform, constants_of, distribution_from_dict, draw_until,
    grid_from_times, mean_age_integral, pi_of, sample_grid, stream_rng,
)

FAMILIES = [
    (Deterministic(0.7), None),
    (Uniform(0.0, 1.0), scipy.stats.uniform(0, 1)),
    (Uniform(0.2, 1.5), scipy.stats.uniform(0.2, 1.3)),
    (Exponential(2.0), scipy.stats.expon(scale=0.5)),
    (Gamma(2.5, 0.4), scipy.stats.gamma(2.5, scale=0.4)),
]


@pytest.mark.parametrize("dist,ref", FAMILIES)
def test_moments_match_scipy(dist, ref):
    for k in (1, 2, 3, 4):
        expected = dist.a**k if ref is None else ref.moment(k)
        assert dist.moment(k) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("dist,ref", FAMILIES)
def test_sample_moments(dist, ref):
    xi = dist.sample(np.random.default_rng(1), 200_000)
    assert np.all(xi > 0)
    assert xi.mean() == pytest.approx(dist.mean, abs=5 * math.sqrt(dist.variance / len(xi)) + 1e-12)


def test_mean_age_constants():
    assert constants_of(Exponential(1.0)).M == 1.0
    assert constants_of(Uniform(0, 1)).M == pytest.approx(1 / 3)
    assert constants_of(Deterministic(1.0)).M == 0.5
    k = constants_of(Gamma(2.0, 1.0))
    assert k.M == pytest.approx(6.0 / 4.0)
    assert k.variance == pytest.approx(2.0)


def test_parameter_validation():
    for bad in (lambda: Deterministic(0), lambda: Exponential(-1), lambda: Uniform(1, 1),
                lambda: Uniform(-0.1, 1), lambda: Gamma(0, 1), lambda: Uniform(0, 1, strict=True),
                lambda: Exponential(math.inf)):
        with pytest.raises(ParameterError):
            bad()


def test_uniform_redraws_exact_zero():
    class ZeroFirst:
        def __init__(self):
            self.calls = 0

        def uniform(self, a, b, size):
            self.calls += 1
            out = np.full(size, 0.5)
            if self.calls == 1:
                out[0] = 0.0
            return out

    fake = ZeroFirst()
    xi = Uniform(0.0, 1.0).sample(fake, 4)
    assert np.all(xi > 0) and fake.calls == 2


@pytest.mark.parametrize("dist,_", FAMILIES)
def test_dict_round_trip(dist, _):
    assert distribution_from_dict(dist.to_dict()) == dist


def test_dict_rejects_unknown():
    with pytest.raises(ParameterError):
        distribution_from_dict({"kind": "weibull", "k": 1})
    with pytest.raises(ParameterError):
        distribution_from_dict({"kind": "exponential", "lam": 1})


def test_deterministic_grid_example():
    g = sample_grid(Deterministic(1.0), 4, 1.0, seed=0)
    assert np.array_equal(g.times, [0, 0.25, 0.5, 0.75, 1.0])
    assert g.count == 4
    assert g.overshoot == 1.25
    assert np.allclose(g.gaps(), [0.25] * 4 + [0.0])


def test_boundary_point_is_counted():
    g = sample_grid(Deterministic(0.5), 2, 1.0, seed=0)
    assert g.times[-1] == 1.0 and g.count == 4


def test_scaling_identity_counts_agree():
    dist = Exponential(1.0)
    for seed in range(20):
        a = sample_grid(dist, 64, 1.5, seed)
        b = sample_grid(dist, 1, 96.0, seed)
        assert a.count == b.count
        assert np.allclose(a.times * 64, b.times)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 300), st.floats(0.0, 3.0), st.integers(0, 2**32), st.sampled_from([d for d, _ in FAMILIES]))
def test_grid_invariants(n, T, seed, dist):
    g = sample_grid(dist, n, T, seed)
    assert g.times[0] == 0.0
    assert np.all(np.diff(g.times) > 0) or g.count == 0
    assert g.times[-1] <= T
    assert g.overshoot > T
    assert len(g.xi) == g.count + 1
    assert np.allclose(np.cumsum(g.xi)[:-1] / n, g.times[1:])


def test_grid_reproducible_and_stream_separated():
    dist = Exponential(1.0)
    a, b = sample_grid(dist, 50, 1.0, 7, 3), sample_grid(dist, 50, 1.0, 7, 3)
    assert np.array_equal(a.times, b.times)
    c = sample_grid(dist, 50, 1.0, 7, 4)
    assert not np.array_equal(a.times, c.times)
    x = stream_rng(7, 3, 0).standard_normal(4)
    y = stream_rng(7, 3, 1).standard_normal(4)
    assert not np.array_equal(x, y)


def test_draw_until_crossing():
    xi, sums = draw_until(Exponential(1.0), np.random.default_rng(0), 1000.0)
    assert sums[-1] > 1000.0 and sums[-2] <= 1000.0
    assert np.allclose(np.cumsum(xi), sums)


def test_pi_of():
    g = grid_from_times([0.0, 0.3, 0.55], 1.0)
    assert pi_of(g, 0.0) == 0.0
    assert pi_of(g, 0.3) == 0.3
    assert pi_of(g, 0.5) == 0.3
    assert pi_of(g, 1.0) == 0.55
    assert np.array_equal(pi_of(g, np.array([0.1, 0.6])), [0.0, 0.55])
    with pytest.raises(DomainError):
        pi_of(g, 1.1)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=20), st.floats(0.01, 1.0))
def test_pi_of_is_last_point_below(gaps, t_frac):
    times = np.concatenate([[0.0], np.cumsum(gaps)])
    T = float(times[-1]) + 0.5
    g = grid_from_times(times, T)
    t = t_frac * T
    p = pi_of(g, t)
    assert p <= t and p in g.times
    assert not np.any((g.times > p) & (g.times <= t))


def test_mean_age_integral_closed_form():
    g = grid_from_times([0.0, 0.3, 0.55], 1.0)
    gaps = np.array([0.3, 0.25, 0.45])
    assert mean_age_integral(g) == pytest.approx(np.sum(gaps**2) / 2)
    assert mean_age_integral(g, 2.0) == pytest.approx(np.sum(gaps**3) / 3)
    # against brute-force quadrature of (s - pi(s))^p
    s = np.linspace(0, 1, 2_000_001)
    ages = s - pi_of(g, s)
    assert mean_age_integral(g, 1.5) == pytest.approx(np.trapezoid(ages**1.5, s), rel=1e-5)
    with pytest.raises(ParameterError):
        mean_age_integral(g, 0.0)


def test_grid_from_times_validation():
    with pytest.raises(ParameterError):
        grid_from_times([0.1, 0.2], 1.0)
    with pytest.raises(ParameterError):
        grid_from_times([0.0, 0.5, 0.4], 1.0)
    with pytest.raises(ParameterError):
        sample_grid(Exponential(1.0), 0, 1.0, 0)
