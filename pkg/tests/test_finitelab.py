import math

import numpy as np
import pytest

from temperlab import finitelab as fl
from temperlab.errors import (InvalidArgumentError, InvalidChainError,
                              InvalidPartitionError, InvalidProposalError,
                              SizeLimitError)


def two_state(p, q, pi=None):
    P = np.array([[1 - p, p], [q, 1 - q]])
    if pi is None:
        pi = np.array([q, p]) / (p + q)
    return fl.FiniteChain(P, pi)


def test_gap_two_state_closed_form():
    assert fl.spectral_gap(two_state(0.3, 0.2)) == pytest.approx(0.5, abs=1e-14)


def test_gap_identity_kernel_zero():
    ch = fl.FiniteChain(np.eye(4), np.full(4, 0.25))
    assert fl.spectral_gap(ch) == pytest.approx(0.0, abs=1e-14)


def test_gap_one_state_convention():
    ch = fl.FiniteChain(np.array([[1.0]]), np.array([1.0]))
    assert fl.spectral_gap(ch) == 1.0


def test_gap_bounded_by_random_dirichlet_quotients(rng):
    chain = fl.random_reversible_chain(rng, 8, make_lazy=False)
    gap = fl.spectral_gap(chain)
    quotients = []
    for _ in range(10_000):
        g = rng.standard_normal(8)
        v = fl.variance(chain.pi, g)
        if v > 1e-12:
            quotients.append(fl.dirichlet_form(chain, g) / v)
    assert min(quotients) >= gap - 1e-6
    # a perturbed eigenvector quotient pins the infimum from above
    root = np.sqrt(chain.pi)
    S = (root[:, None] * chain.P) / root[None, :]
    vals, vecs = np.linalg.eigh((S + S.T) / 2)
    g_star = vecs[:, -2] / root
    q_star = fl.dirichlet_form(chain, g_star) / fl.variance(chain.pi, g_star)
    assert q_star == pytest.approx(gap, abs=1e-10)


def test_gap_rejects_non_reversible():
    P = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
    pi = np.full(3, 1 / 3)
    with pytest.raises(InvalidChainError):
        fl.spectral_gap(fl.FiniteChain(P, pi))


def test_phi_two_state_uniform():
    ch = two_state(0.3, 0.3, pi=np.array([0.5, 0.5]))
    assert fl.s_conductance_exact(ch, 0.0) == pytest.approx(0.3, abs=1e-14)


def test_phi_monotone_in_s(rng):
    for _ in range(20):
        chain = fl.random_reversible_chain(rng, int(rng.integers(3, 10)))
        vals = fl.s_conductance_many(chain, [0.0, 0.05, 0.1, 0.2, 0.3])
        assert np.isfinite(vals[0])
        for lo, hi in zip(vals[:-1], vals[1:]):
            if math.isinf(lo):
                assert math.isinf(hi)  # family can only shrink further
            else:
                assert hi >= lo - 1e-12


def test_phi_matches_reversed_order_enumeration(rng):
    chain = fl.random_reversible_chain(rng, 10)
    s = 0.07
    got = fl.s_conductance_exact(chain, s)
    F = chain.flows()
    F = (F + F.T) / 2
    best = math.inf
    for mask in range(2 ** 10 - 1, 0, -1):
        inA = np.array([(mask >> k) & 1 for k in range(10)], dtype=bool)
        m = chain.pi[inA].sum()
        if s < m <= 0.5:
            flow = F[np.ix_(inA, ~inA)].sum()
            best = min(best, flow / (m - s))
    assert got == best


def test_phi_empty_admissible_family_is_inf():
    # one state hoards the mass: nothing lands in (s, 1/2]
    pi = np.array([0.9, 0.05, 0.05])
    Q = np.full((3, 3), 1 / 3)
    chain = fl.mh_finite(pi, Q)
    assert fl.s_conductance_exact(chain, 0.2) == math.inf


def test_phi_size_cap():
    n = 23
    with pytest.raises(SizeLimitError):
        fl.s_conductance_exact(
            fl.FiniteChain(np.eye(n), np.full(n, 1 / n)), 0.0)


def test_lazy_halves_gap_and_conductance(rng):
    chain = fl.random_reversible_chain(rng, 8, make_lazy=False)
    lz = fl.lazy(chain)
    assert fl.spectral_gap(lz) == pytest.approx(fl.spectral_gap(chain) / 2, abs=1e-12)
    for s in (0.0, 0.1):
        assert fl.s_conductance_exact(lz, s) == pytest.approx(
            fl.s_conductance_exact(chain, s) / 2, rel=1e-12)


def test_relabeling_invariance(rng):
    chain = fl.random_reversible_chain(rng, 7)
    perm = rng.permutation(7)
    chain_p = fl.FiniteChain(chain.P[np.ix_(perm, perm)], chain.pi[perm])
    assert fl.spectral_gap(chain_p) == pytest.approx(fl.spectral_gap(chain), abs=1e-12)
    for s in (0.0, 0.05):
        assert fl.s_conductance_exact(chain_p, s) == pytest.approx(
            fl.s_conductance_exact(chain, s), rel=1e-12)


def test_decompose_singletons_reproduce_chain(rng):
    chain = fl.random_reversible_chain(rng, 6)
    part = fl.Partition(np.arange(6))
    restricted, projected = fl.decompose(chain, part)
    np.testing.assert_allclose(projected.P, chain.P, atol=1e-12)
    np.testing.assert_allclose(projected.pi, chain.pi, atol=1e-14)
    for rc in restricted:
        assert rc.n == 1 and rc.P[0, 0] == 1.0


def test_decompose_single_block(rng):
    chain = fl.random_reversible_chain(rng, 5)
    restricted, projected = fl.decompose(chain, fl.Partition(np.zeros(5, dtype=int)))
    assert projected.n == 1 and projected.P[0, 0] == 1.0
    np.testing.assert_allclose(restricted[0].P, chain.P, atol=1e-12)


def test_decompose_outputs_reversible_and_stationary(rng):
    chain = fl.random_reversible_chain(rng, 12)
    part = fl.random_partition(rng, 12, 3)
    restricted, projected = fl.decompose(chain, part)
    for rc in restricted + [projected]:
        rc.require_reversible(1e-10)
        np.testing.assert_allclose(rc.pi @ rc.P, rc.pi, atol=1e-10)


def test_decompose_rejects_empty_block(rng):
    with pytest.raises(InvalidPartitionError):
        fl.Partition(np.array([0, 0, 2, 2]))  # block 1 missing


def test_decomposition_check_block_diagonal_trivial():
    # no cross flow: projected gap 0, all lower bounds collapse to 0
    P = np.zeros((4, 4))
    P[:2, :2] = [[0.6, 0.4], [0.4, 0.6]]
    P[2:, 2:] = [[0.7, 0.3], [0.3, 0.7]]
    chain = fl.FiniteChain(P, np.full(4, 0.25))
    rep = fl.decomposition_check(chain, fl.Partition([0, 0, 1, 1]),
                                 n_functions=20)
    assert rep.passed
    gd = [e for e in rep.entries if e.name == "gap-decomposition"][0]
    assert gd.rhs == 0.0


def test_decomposition_identity_tight(rng):
    chain = fl.random_reversible_chain(rng, 9)
    part = fl.random_partition(rng, 9, 3)
    rep = fl.decomposition_check(chain, part, n_functions=100, rng=rng)
    ident = [e for e in rep.entries if e.name == "dirichlet-decomposition-identity"][0]
    assert ident.rhs <= 1e-12  # worst relative identity gap over 100 functions
    assert rep.passed


def test_decomposition_campaign_small():
    out = fl.run_decomposition_campaign(n_chains=60, seed=909)
    assert out["passed"], out["worst_entry"]
    assert out["failures"] == 0


def test_mh_finite_uniform_target_symmetric_proposal():
    n = 5
    Q = np.full((n, n), 1.0 / n)
    chain = fl.mh_finite(np.full(n, 1.0 / n), Q)
    np.testing.assert_allclose(chain.P, Q, atol=1e-15)


def test_mh_finite_reversible_by_construction(rng):
    for _ in range(20):
        n = int(rng.integers(3, 9))
        pi = rng.dirichlet(np.ones(n))
        pi = 0.9 * pi + 0.1 / n
        pi /= pi.sum()
        S = rng.uniform(0.2, 1.0, (n, n))
        Q = (S + S.T) / 2
        Q /= Q.sum(axis=1, keepdims=True)
        chain = fl.mh_finite(pi, Q)
        assert chain.reversibility_defect() < 1e-12


def test_mh_finite_rejects_asymmetric_support():
    Q = np.array([[0.5, 0.5, 0.0], [0.25, 0.5, 0.25], [0.0, 0.5, 0.5]])
    Q[0, 2] = 0.0
    Q[2, 0] = 0.1
    Q[2, 1] = 0.4
    with pytest.raises(InvalidProposalError):
        fl.mh_finite(np.full(3, 1 / 3), Q)


def test_comparison_campaign_small():
    out = fl.run_comparison_campaign(n_pairs=25, seed=11)
    assert out["passed"]
    assert out["worst_margin"] >= -1e-12


def test_tv_bound_stationary_start_is_flat(rng):
    chain = fl.random_reversible_chain(rng, 6)
    rep = fl.tv_mixing_bound_check(chain, chain.pi.copy(), horizon=50)
    assert rep.passed
    worst = max(-e.lhs for e in rep.entries if e.name == "tv-rate-bound")
    assert worst <= 1e-9  # TV stays at zero, far below the bound


def test_tv_bound_requires_lazy(rng):
    chain = fl.random_reversible_chain(rng, 5, make_lazy=False)
    with pytest.raises(InvalidArgumentError):
        fl.tv_mixing_bound_check(chain, chain.pi, horizon=10)


def test_tv_two_state_exact_decay():
    p = 0.3
    lazy_cross = p / 2
    chain = fl.FiniteChain(np.array([[1 - lazy_cross, lazy_cross],
                                     [lazy_cross, 1 - lazy_cross]]),
                           np.array([0.5, 0.5]))
    nu = np.array([1.0, 0.0])
    dist = nu.copy()
    for t in range(1, 100):
        dist = dist @ chain.P
        tv = 0.5 * np.abs(dist - chain.pi).sum()
        assert tv == pytest.approx(0.5 * (1 - p) ** t, rel=1e-10)
    rep = fl.tv_mixing_bound_check(chain, nu, horizon=200)
    assert rep.passed


def test_tv_campaign_small():
    out = fl.run_tv_campaign(n_chains=15, seed=31, horizon=500)
    assert out["passed"]


def test_text_round_trip(rng):
    chain = fl.random_reversible_chain(rng, 6)
    again = fl.FiniteChain.from_text(chain.to_text())
    np.testing.assert_array_equal(again.P, chain.P)
    np.testing.assert_array_equal(again.pi, chain.pi)


def test_chain_validation_errors():
    with pytest.raises(InvalidChainError):
        fl.FiniteChain(np.array([[0.5, 0.4], [0.5, 0.5]]), np.array([0.5, 0.5]))
    with pytest.raises(InvalidChainError):
        fl.FiniteChain(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([1.5, -0.5]))
    bad_text = "2\n0.5 0.5\n0.5 0.5\n"
    with pytest.raises(InvalidChainError):
        fl.FiniteChain.from_text(bad_text)


def test_half_mass_subset_detection():
    chain = fl.FiniteChain(np.full((4, 4), 0.25), np.full(4, 0.25))
    found, mask, gap = fl.half_mass_subset(chain)
    assert found and gap <= 1e-15
    assert bin(mask).count("1") == 2


def test_campaign_workers_reproduce_sequential_results():
    seq = fl.run_decomposition_campaign(n_chains=30, seed=606, workers=1)
    par = fl.run_decomposition_campaign(n_chains=30, seed=606, workers=4)
    assert seq == par
