import math

import numpy as np
import pytest
from scipy import integrate

import temperlab as tl
from temperlab.errors import InvalidArgumentError
from temperlab.ladder import (F_overlap, build_ladder, gaussian_closed_forms,
                              gaussian_kl_exact, overlap_diagnostics,
                              step_sizes, design_report,
                              tempered_kl_quadrature)


def test_build_ladder_reference_case():
    lad = build_ladder(1.0, 1.0, 4, 1.0)
    assert lad.T == 5
    assert lad.ratio == pytest.approx(1.5, abs=1e-15)
    assert lad.betas[0] == pytest.approx(1.5 ** -4, rel=1e-14)
    assert lad.betas[0] <= 0.25


@pytest.mark.parametrize("L,m,d,D", [(1, 1, 1, 0.5), (2, 1, 3, 2.0),
                                     (4, 1, 1, 10.0), (1, 0.5, 8, 1.0)])
def test_build_ladder_shape(L, m, d, D):
    lad = build_ladder(L, m, d, D)
    assert lad.betas[-1] == 1.0
    assert np.all(np.diff(lad.betas) > 0)


def test_build_ladder_floor_condition_after_extension():
    lad = build_ladder(4.0, 1.0, 1, 10.0)
    assert lad.betas[0] <= 1.0 / 1600.0


def test_build_ladder_degenerate_displacement():
    lad = build_ladder(1.0, 1.0, 3, 0.0)
    assert lad.T == 1
    np.testing.assert_array_equal(lad.betas, [1.0])


def test_build_ladder_design_conditions():
    # beta_1 <= 1/(4 L D^2) and ratio <= 1 + 1/(kappa sqrt(d)) everywhere
    for d in (1, 2, 5, 10):
        for D in (1.0, 2.0, 4.0, 8.0):
            for kappa in (1.0, 2.0, 4.0):
                lad = build_ladder(kappa, 1.0, d, D)
                assert lad.betas[0] <= 1.0 / (4 * kappa * D * D) * (1 + 1e-12)
                cap = 1.0 + 1.0 / (kappa * math.sqrt(d))
                assert lad.max_ratio() <= cap * (1 + 1e-12)


def test_geometric_ratio_consistency():
    lad = build_ladder(2.0, 1.0, 3, 3.0)
    ratios = lad.betas[1:] / lad.betas[:-1]
    np.testing.assert_allclose(ratios, lad.ratio, rtol=1e-12)


def test_ladder_validation():
    with pytest.raises(ValueError):
        tl.Ladder(np.array([0.5, 0.9]))  # last must be 1
    with pytest.raises(ValueError):
        tl.Ladder(np.array([0.9, 0.5, 1.0]))  # not increasing
    with pytest.raises(ValueError):
        tl.Ladder(np.array([0.5, 1.0]), zeta=np.zeros(3))


def test_level_weights_from_zeta():
    lad = tl.Ladder(np.array([0.5, 1.0]), zeta=np.array([0.0, math.log(3.0)]))
    np.testing.assert_allclose(lad.level_weights(), [0.25, 0.75], rtol=1e-14)
    assert lad.r_min() == pytest.approx(0.25)
    assert lad.r_tilde() == pytest.approx(1.0 / 3.0)


def test_overlap_diagnostics_floor_example():
    spec = tl.two_mode_spec(1.0, 2)
    lad = tl.Ladder(np.array([0.25, 1.0]))
    out = overlap_diagnostics(spec, lad)
    assert out["hellinger_floor"] == pytest.approx(math.exp(-0.125), rel=1e-12)


def test_overlap_diagnostics_single_level():
    spec = tl.two_mode_spec(1.0, 2)
    out = overlap_diagnostics(spec, tl.Ladder(np.array([1.0])))
    assert out["kl_ceiling"] == 0.0
    assert out["overlap_margin"] <= 1.0


def test_overlap_diagnostics_ceiling_example():
    # d=4, kappa=1, uniform ratio 1.5 -> ceiling (4/4) * 0.25
    spec = tl.two_mode_spec(1.0, 4)
    betas = 1.5 ** np.arange(-3, 1).astype(float)
    out = overlap_diagnostics(spec, tl.Ladder(betas))
    assert out["kl_ceiling"] == pytest.approx(0.25, rel=1e-12)
    assert out["one_minus_sqrt_kl"] == pytest.approx(0.5, rel=1e-12)


def test_step_sizes_reference_values():
    spec = tl.two_mode_spec(1.0, 4)
    lad = build_ladder(1.0, 1.0, 4, 1.0)
    out = step_sizes(spec, lad, alpha=0.5, q_adj=0.5, eta=math.e, eps=1e-2)
    assert out["rwm_h"] == pytest.approx(0.25, rel=1e-14)
    assert out["tau"] == pytest.approx(1.0 / 8.0, rel=1e-14)


def test_step_sizes_radius_dimension_branch():
    # K=1 at the origin, single level: pick eps so the log term drops below d
    spec = tl.MixtureSpec(np.array([1.0]), np.zeros((1, 4)),
                          tl.quadratic_potential(4))
    lad = tl.Ladder(np.array([1.0]))
    out = step_sizes(spec, lad, alpha=0.5, q_adj=0.5, eta=math.e, eps=300.0)
    assert out["R"] == pytest.approx(4.0, rel=1e-14)


def test_step_sizes_argument_validation():
    spec = tl.two_mode_spec(1.0, 2)
    lad = build_ladder(1.0, 1.0, 2, 1.0)
    with pytest.raises(InvalidArgumentError):
        step_sizes(spec, lad, 0.5, 0.5, eta=math.e, eps=-1.0)
    with pytest.raises(InvalidArgumentError):
        step_sizes(spec, lad, 0.5, 0.5, eta=0.5, eps=1e-2)
    with pytest.raises(InvalidArgumentError):
        step_sizes(spec, lad, 0.5, 0.5, eta=math.e, eps=1e-2, c=0.5)


def test_F_overlap_values():
    assert F_overlap(0.0, 7) == 1.0
    assert F_overlap(0.5, 4) == pytest.approx(0.96, abs=1e-12)
    assert F_overlap(0.5, 48) <= math.exp(-0.25) + 1e-12


def test_F_overlap_monotone():
    rhos = np.linspace(0.0, 3.0, 200)
    for d in (1, 2, 10):
        vals = [F_overlap(r, d) for r in rhos]
        assert np.all(np.diff(vals) <= 1e-15)
    assert F_overlap(1.0, 4) >= F_overlap(1.0, 8)


def test_F_overlap_envelope_grid():
    rhos = np.linspace(0.0, 0.5, 1000)
    for d in (1, 2, 8, 48):
        for r in rhos:
            assert F_overlap(r, d) <= math.exp(-r * r * d / 48.0) + 1e-12


def test_gaussian_closed_forms_identical():
    out = gaussian_closed_forms(0.7, 0.7, [1.0, 2.0], [1.0, 2.0])
    assert out["hellinger"] == 1.0
    assert out["kl"] == 0.0


def test_gaussian_hellinger_example_and_quadrature():
    # beta = beta' = 1, separation^2 = 4 -> exp(-1/2); oracle via 1-d quadrature
    out = gaussian_closed_forms(1.0, 1.0, [2.0], [0.0])
    assert out["hellinger"] == pytest.approx(math.exp(-0.5), rel=1e-12)

    def integrand(x):
        p = math.exp(-0.5 * (x - 2.0) ** 2) / math.sqrt(2 * math.pi)
        q = math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
        return math.sqrt(p * q)

    val, err = integrate.quad(integrand, -30, 30, epsabs=1e-12)
    assert out["hellinger"] == pytest.approx(val, abs=1e-8)


def test_gaussian_kl_quadrature_matches_closed_form():
    out = gaussian_closed_forms(1.0, 1.5, np.zeros(2), np.zeros(2))
    exact = gaussian_kl_exact(1.0, 1.5, 2)
    assert out["kl"] == pytest.approx(exact, abs=1e-8)
    # reversed direction is the other KL
    rev = gaussian_closed_forms(1.5, 1.0, np.zeros(2), np.zeros(2))
    assert rev["kl"] == pytest.approx(gaussian_kl_exact(1.5, 1.0, 2), abs=1e-8)


def test_kl_quadrature_breakpoints_and_mean_shift():
    val = tempered_kl_quadrature(0.3, 1.0, lambda z: 3.0 / (2 * z * z),
                                 breakpoints=[0.5, 0.7])
    assert val == pytest.approx(gaussian_kl_exact(0.3, 1.0, 3), abs=1e-9)
    shifted = gaussian_closed_forms(0.5, 1.0, [1.0, 0.0], [0.0, 0.0])
    assert shifted["kl"] == pytest.approx(gaussian_kl_exact(0.5, 1.0, 2, sep2=1.0),
                                          abs=1e-8)


def test_floor_and_ceiling_bracket_exact_values():
    # small version of the full acceptance grid
    for d, D, kappa in [(2, 1.0, 1.0), (3, 4.0, 2.0), (1, 8.0, 4.0)]:
        a = np.ones(d)
        a[0] = kappa
        local = tl.diag_quadratic_potential(a, smoothness=kappa, strong_convexity=1.0)
        modes = np.zeros((2, d))
        modes[0, 0] = D
        modes[1, 0] = -D
        spec = tl.MixtureSpec(np.array([0.5, 0.5]), modes, local)
        lad = build_ladder(kappa, 1.0, d, D)
        out = overlap_diagnostics(spec, lad)
        b1 = lad.betas[0]
        exact_h = math.exp(-b1 * kappa * (2 * D) ** 2 / 8.0)
        assert exact_h >= out["hellinger_floor"] - 1e-12
        exact_delta = 0.5 * max(
            gaussian_kl_exact(float(lad.betas[i]), float(lad.betas[i + 1]), d)
            for i in range(lad.T - 1))
        assert exact_delta <= out["kl_ceiling"] + 1e-12
        # exact KL of any adjacent pair stays below twice the ceiling
        assert 2 * exact_delta <= 2 * out["kl_ceiling"] + 1e-12


def test_design_report_csv_row():
    spec = tl.two_mode_spec(2.0, 3)
    lad = build_ladder(1.0, 1.0, 3, 2.0)
    rep = design_report(spec, lad)
    row = rep.csv_row()
    assert len(row) == len(rep.CSV_COLUMNS)
    assert row[0] == lad.T
    assert all(np.isfinite(v) for v in row[3:])


def test_truncated_prefix_keeps_values():
    lad = build_ladder(1.0, 1.0, 2, 4.0)
    pre = lad.truncated(3)
    np.testing.assert_array_equal(pre.betas, lad.betas[:3])
    assert pre.T == 3
    with pytest.raises(ValueError):
        lad.truncated(0)


def logcosh_potential():
    # smooth convex non-quadratic: f(x) = x^2/2 + 0.5 log cosh(x)
    eps = 0.5

    def value(v):
        v = np.atleast_1d(np.asarray(v, dtype=float))
        return float(0.5 * np.sum(v * v) + eps * np.sum(np.log(np.cosh(v))))

    def gradient(v):
        v = np.asarray(v, dtype=float)
        return v + eps * np.tanh(v)

    return tl.LocalPotential(value=value, gradient=gradient,
                             smoothness=1.0 + eps, strong_convexity=1.0)


def test_rejection_sampler_matches_gaussian_marginal():
    from scipy import stats
    from temperlab.ladder import tempered_rejection_sample
    local = tl.quadratic_potential(2)
    rng = np.random.default_rng(3)
    beta = 0.7
    xs = tempered_rejection_sample(local, 2, beta, 20_000, rng)
    for k in range(2):
        p = stats.kstest(xs[:, k] * math.sqrt(beta), "norm").pvalue
        assert p > 1e-3


def test_variance_plugin_matches_quadratic_identity():
    # rough path sanity: for any quadratic form, Var f = d / (2 z^2)
    from temperlab.ladder import variance_of_potential_mc
    local = tl.diag_quadratic_potential([1.0, 2.0, 0.5])
    rng = np.random.default_rng(11)
    for z in (0.4, 1.0):
        v = variance_of_potential_mc(local, 3, z, rng, n=40_000)
        assert v == pytest.approx(3.0 / (2 * z * z), rel=0.1)


def test_mc_kl_loose_agreement_with_closed_form():
    from temperlab.ladder import tempered_kl_mc
    local = tl.quadratic_potential(2)
    rng = np.random.default_rng(21)
    got = tempered_kl_mc(local, 2, 0.4, 1.0, rng, draws=90_000)
    exact = gaussian_kl_exact(0.4, 1.0, 2)
    assert got == pytest.approx(exact, rel=0.1)


def test_mc_kl_non_quadratic_against_quadrature_oracle():
    # d = 1: the tempered variance has a direct quadrature definition
    from temperlab.ladder import tempered_kl_mc
    local = logcosh_potential()
    rng = np.random.default_rng(5)
    beta, beta_p = 0.5, 1.0
    got = tempered_kl_mc(local, 1, beta, beta_p, rng, draws=120_000)

    def v_exact(z):
        f = lambda x: local.value(np.array([x]))
        zc = integrate.quad(lambda x: math.exp(-z * f(x)), -20, 20, epsabs=1e-12)[0]
        m1 = integrate.quad(lambda x: f(x) * math.exp(-z * f(x)), -20, 20,
                            epsabs=1e-12)[0] / zc
        m2 = integrate.quad(lambda x: f(x) ** 2 * math.exp(-z * f(x)), -20, 20,
                            epsabs=1e-12)[0] / zc
        return m2 - m1 * m1

    oracle = integrate.quad(lambda z: (beta_p - z) * v_exact(z), beta, beta_p,
                            epsabs=1e-10, limit=60)[0]
    assert got == pytest.approx(oracle, rel=0.15)
    # the same oracle also validates the analytic-quadratic shortcut is wrong
    # for this potential (v differs from d/(2 z^2)), guarding the dispatch
    assert abs(v_exact(1.0) - 0.5) > 0.02


def test_hellinger_floor_holds_for_random_mode_pairs(rng):
    from temperlab.ladder import gaussian_hellinger_affinity
    for _ in range(20):
        K, d = 3, 3
        w = rng.dirichlet(np.ones(K))
        modes = rng.uniform(-2.0, 2.0, (K, d))
        spec = tl.MixtureSpec(w, modes, tl.quadratic_potential(d))
        lad = build_ladder(1.0, 1.0, d, max(spec.D, 0.3))
        floor = overlap_diagnostics(spec, lad)["hellinger_floor"]
        b1 = float(lad.betas[0])
        for j in range(K):
            for jp in range(j + 1, K):
                aff = gaussian_hellinger_affinity(b1, b1, modes[j], modes[jp])
                assert aff >= floor - 1e-12


def test_ladder_component_kl_spans_levels():
    from temperlab.ladder import ladder_component_kl
    lad = build_ladder(1.0, 1.0, 2, 4.0)
    d = 2
    # adjacent level agrees with the direct closed form
    got = ladder_component_kl(lad, 0, 1, d)
    assert got == pytest.approx(
        gaussian_kl_exact(float(lad.betas[0]), float(lad.betas[1]), d), abs=1e-9)
    # spans with interior breakpoints, both directions
    wide = ladder_component_kl(lad, 0, lad.T - 1, d)
    assert wide == pytest.approx(
        gaussian_kl_exact(float(lad.betas[0]), 1.0, d), abs=1e-8)
    rev = ladder_component_kl(lad, lad.T - 1, 0, d)
    assert rev == pytest.approx(
        gaussian_kl_exact(1.0, float(lad.betas[0]), d), abs=1e-8)
    with pytest.raises(InvalidArgumentError):
        ladder_component_kl(lad, 0, lad.T, d)
