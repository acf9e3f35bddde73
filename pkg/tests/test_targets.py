import math

import mpmath
import numpy as np
import pytest
from scipy import integrate

import temperlab as tl
from temperlab.errors import NonFiniteValueError, UnsupportedNormalizerError
from temperlab.targets import (component_log_density, conditional_label_weights,
                               log_quadratic_normalizer, mixture_gradient,
                               mixture_potential, mixture_potential_batch)

from conftest import random_spec


def unit_spec(d=2):
    return tl.MixtureSpec(np.array([1.0]), np.zeros((1, d)), tl.quadratic_potential(d))


def test_potential_single_component_at_origin():
    assert mixture_potential(unit_spec(3), np.zeros(3)) == 0.0


def test_potential_symmetric_two_mode_at_origin():
    u = np.array([1.0, 0.0, 0.0])
    spec = tl.MixtureSpec(np.array([0.5, 0.5]), np.stack([u, -u]),
                          tl.quadratic_potential(3))
    assert mixture_potential(spec, np.zeros(3)) == pytest.approx(0.5, abs=1e-15)


def test_potential_far_separation_matches_high_precision():
    # separation 40 gives a second-component contribution of exp(-800)
    spec = tl.two_mode_spec(20.0, 1)
    got = mixture_potential(spec, spec.modes[0])
    with mpmath.workdps(60):
        expected = -mpmath.log(mpmath.mpf("0.5") * (1 + mpmath.e ** -800))
    assert abs(got - float(expected)) < 1e-12
    assert math.isfinite(got)


def test_potential_component_permutation_invariant(rng):
    spec = random_spec(rng, K=3, d=3)
    perm = np.array([2, 0, 1])
    spec_p = tl.MixtureSpec(spec.weights[perm], spec.modes[perm], spec.local)
    for _ in range(20):
        x = rng.normal(size=3)
        assert mixture_potential(spec, x) == pytest.approx(
            mixture_potential(spec_p, x), rel=1e-14)


def test_gradient_single_component_exact(rng):
    spec = tl.MixtureSpec(np.array([1.0]), np.array([[1.0, -2.0]]),
                          tl.diag_quadratic_potential([2.0, 0.5]))
    x = rng.normal(size=2)
    np.testing.assert_allclose(mixture_gradient(spec, x),
                               spec.local.gradient(x - spec.modes[0]), rtol=1e-15)


def test_gradient_symmetric_two_mode_zero_at_origin():
    spec = tl.two_mode_spec(1.0, 4)
    np.testing.assert_allclose(mixture_gradient(spec, np.zeros(4)), 0.0, atol=1e-16)


def test_gradient_matches_finite_differences(rng):
    # central differences of the potential, step 1e-5
    for _ in range(10):
        spec = random_spec(rng, diag=True)
        x = rng.normal(size=spec.d) * 2.0
        g = mixture_gradient(spec, x)
        fd = np.empty_like(g)
        h = 1e-5
        for k in range(spec.d):
            e = np.zeros(spec.d)
            e[k] = h
            fd[k] = (mixture_potential(spec, x + e) - mixture_potential(spec, x - e)) / (2 * h)
        np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-8)


def test_component_log_density_standard_gaussian_mode_height():
    d = 3
    spec = unit_spec(d)
    ladder = tl.Ladder(np.array([1.0]))
    val = component_log_density(spec, ladder, 0, 0, np.zeros(d), normalized=True)
    assert val == pytest.approx(-(d / 2) * math.log(2 * math.pi), rel=1e-14)


def test_component_log_density_unnormalized_at_mode(rng):
    spec = random_spec(rng, K=2, d=2, diag=True)
    ladder = tl.Ladder(np.array([0.3, 1.0]))
    assert component_log_density(spec, ladder, 0, 1, spec.modes[1]) == 0.0


def test_component_log_density_matches_quadrature():
    # beta = 0.5, d = 2: normalizer from independent 2-d quadrature
    spec = unit_spec(2)
    ladder = tl.Ladder(np.array([0.5, 1.0]))
    x = spec.modes[0] + np.array([1.0, 0.0])
    got = component_log_density(spec, ladder, 0, 0, x, normalized=True)
    z, err = integrate.dblquad(
        lambda y2, y1: math.exp(-0.5 * 0.5 * (y1 * y1 + y2 * y2)),
        -40, 40, lambda _: -40, lambda _: 40, epsabs=1e-10)
    assert err < 1e-8
    expected = -0.5 * 0.5 * 1.0 - math.log(z)
    assert got == pytest.approx(expected, abs=1e-8)


def test_component_log_density_normalized_requires_quadratic():
    local = tl.LocalPotential(value=lambda v: float(np.sum(np.cosh(v) - 1)),
                              gradient=lambda v: np.sinh(v),
                              smoothness=2.0, strong_convexity=0.5)
    spec = tl.MixtureSpec(np.array([1.0]), np.zeros((1, 2)), local)
    ladder = tl.Ladder(np.array([1.0]))
    with pytest.raises(UnsupportedNormalizerError):
        component_log_density(spec, ladder, 0, 0, np.zeros(2), normalized=True)


def test_label_weights_single_component():
    spec = unit_spec(2)
    ladder = tl.Ladder(np.array([1.0]))
    np.testing.assert_array_equal(
        conditional_label_weights(spec, ladder, 0, np.ones(2)), [1.0])


def test_label_weights_symmetric_half_half():
    spec = tl.two_mode_spec(1.0, 3)
    ladder = tl.Ladder(np.array([0.5, 1.0]))
    w = conditional_label_weights(spec, ladder, 0, np.zeros(3))
    np.testing.assert_allclose(w, [0.5, 0.5], atol=1e-15)


def test_label_weights_small_beta_limit(rng):
    spec = random_spec(rng, K=3, d=2)
    ladder = tl.Ladder(np.array([1e-8, 1.0]))
    w = conditional_label_weights(spec, ladder, 0, rng.normal(size=2) * 3)
    np.testing.assert_allclose(w, spec.weights, atol=1e-6)


def test_label_weights_simplex_and_extreme_separation(rng):
    spec = tl.two_mode_spec(20.0, 1)
    ladder = tl.Ladder(np.array([1.0]))
    w = conditional_label_weights(spec, ladder, 0, spec.modes[0])
    assert abs(w.sum() - 1.0) < 1e-12
    assert np.all(np.isfinite(w)) and w[0] > 1 - 1e-12


def test_gradient_mixture_vs_local_bound(rng):
    # drift displacement stays below L * D on 1000 draws in the sampling ball
    spec = random_spec(rng, K=3, d=3, diag=True)
    L, m, D = spec.local.smoothness, spec.local.strong_convexity, spec.D
    radius = 3 * D + 3 / math.sqrt(m)
    for _ in range(1000):
        x = rng.normal(size=3)
        x *= rng.uniform(0, radius) / max(np.linalg.norm(x), 1e-12)
        gap = np.linalg.norm(mixture_gradient(spec, x) - spec.local.gradient(x))
        assert gap <= L * D + 1e-9


def test_potential_second_order_upper_bound(rng):
    spec = random_spec(rng, K=2, d=4, diag=True)
    L = spec.local.smoothness
    for _ in range(1000):
        x = rng.normal(size=4) * 4
        y = rng.normal(size=4) * 4
        lhs = (mixture_potential(spec, y) - mixture_potential(spec, x)
               - float(np.dot(mixture_gradient(spec, x), y - x)))
        assert lhs <= 0.5 * L * float(np.sum((y - x) ** 2)) + 1e-9


def test_local_potential_pair_bounds(rng):
    spec = random_spec(rng, K=1, d=3, diag=True)
    f, g = spec.local.value, spec.local.gradient
    L, m = spec.local.smoothness, spec.local.strong_convexity
    for _ in range(1000):
        x = rng.normal(size=3) * 3
        y = rng.normal(size=3) * 3
        gap = f(y) - f(x) - float(np.dot(g(x), y - x))
        nn = 0.5 * float(np.sum((y - x) ** 2))
        assert m * nn - 1e-9 <= gap <= L * nn + 1e-9
        assert np.linalg.norm(np.asarray(g(x)) - np.asarray(g(y))) <= \
            L * np.linalg.norm(x - y) + 1e-9


def test_non_finite_input_raises():
    spec = unit_spec(2)
    with pytest.raises(NonFiniteValueError):
        mixture_potential(spec, np.array([np.inf, 0.0]))


def test_non_finite_component_names_index():
    calls = {"n": 0}

    def bad_value(v):
        calls["n"] += 1
        return math.inf if calls["n"] > 1 else 0.0

    local = tl.LocalPotential(value=bad_value, gradient=lambda v: v,
                              smoothness=1.0, strong_convexity=1.0)
    spec = tl.MixtureSpec(np.array([0.5, 0.5]), np.zeros((2, 2)), local)
    with pytest.raises(NonFiniteValueError, match="component 1"):
        mixture_potential(spec, np.zeros(2))


def test_weights_must_be_simplex():
    with pytest.raises(ValueError):
        tl.MixtureSpec(np.array([0.6, 0.6]), np.zeros((2, 2)),
                       tl.quadratic_potential(2))
    with pytest.raises(ValueError):
        tl.MixtureSpec(np.array([1.0, 0.0]), np.zeros((2, 2)),
                       tl.quadratic_potential(2))


def test_derived_quantities():
    spec = tl.MixtureSpec(np.array([0.25, 0.75]),
                          np.array([[3.0, 4.0], [0.0, 0.0]]),
                          tl.quadratic_potential(2))
    assert spec.D == 5.0
    assert spec.w_min == 0.25
    assert spec.K == 2 and spec.d == 2


def test_diag_quadratic_constants():
    local = tl.diag_quadratic_potential([0.5, 2.0])
    assert local.strong_convexity == 0.5 and local.smoothness == 2.0
    loose = tl.diag_quadratic_potential([1.0], smoothness=4.0, strong_convexity=0.5)
    assert loose.condition_number == 8.0
    with pytest.raises(ValueError):
        tl.diag_quadratic_potential([1.0, 3.0], smoothness=2.0)


def test_batch_potential_matches_scalar(rng):
    spec = random_spec(rng, K=3, d=2, diag=True)
    X = rng.normal(size=(50, 2)) * 3
    batch = mixture_potential_batch(spec, X)
    single = [mixture_potential(spec, x) for x in X]
    np.testing.assert_allclose(batch, single, rtol=1e-13)


def test_quadratic_normalizer_value():
    local = tl.diag_quadratic_potential([2.0, 0.5])
    got = log_quadratic_normalizer(local, 0.7)
    expected = 0.5 * (math.log(2 * math.pi / (0.7 * 2.0))
                      + math.log(2 * math.pi / (0.7 * 0.5)))
    assert got == pytest.approx(expected, rel=1e-14)


def test_label_weights_invariant_under_log_weight_shift(rng):
    # one simplex, expressed through differently shifted log-weights
    logw = rng.normal(size=3)
    modes = np.arange(6, dtype=float).reshape(3, 2)
    ladder = tl.Ladder(np.array([1.0]))
    x = np.array([0.3, -0.2])
    base = None
    for shift in (0.0, 50.0, 700.0):
        e = (logw - shift) - (logw - shift).max()
        w = np.exp(e)
        spec = tl.MixtureSpec(w / w.sum(), modes, tl.quadratic_potential(2))
        out = conditional_label_weights(spec, ladder, 0, x)
        if base is None:
            base = out
        else:
            np.testing.assert_allclose(out, base, rtol=1e-12)
            assert np.argmax(out) == np.argmax(base)
