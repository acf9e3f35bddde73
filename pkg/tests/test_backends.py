"""Cross-backend checks: the compiled kernels and the pure-Python fallback
must produce bit-identical trajectories and matching subset scans."""

import numpy as np
import pytest

import temperlab as tl
from temperlab import _chainpy
from temperlab._backend import get_backend
from temperlab.finitelab import random_reversible_chain
from temperlab.tempering import AugState, TemperingConfig, TemperingState, run_chain

try:
    from temperlab import _speed
    HAVE_COMPILED = True
except ImportError:  # pragma: no cover
    HAVE_COMPILED = False

needs_compiled = pytest.mark.skipif(not HAVE_COMPILED,
                                    reason="compiled extension not built")


@needs_compiled
@pytest.mark.parametrize("kind,h", [("rwm", 0.5), ("mala", 0.01)])
def test_st_chain_bit_identical_across_backends(kind, h):
    spec = tl.two_mode_spec(4.0, 2)
    lad = tl.build_ladder(1.0, 1.0, 2, 4.0)
    cfg = TemperingConfig(proposal_kind=kind, h=h, alpha=0.4, q_adj=0.5,
                          lazy=True, seed=424242)
    init = TemperingState(0, spec.modes[0].copy())
    a = run_chain(init, spec, lad, cfg, 100_000, backend="compiled")
    b = run_chain(init, spec, lad, cfg, 100_000, backend="python")
    assert np.array_equal(a.xs, b.xs)
    assert np.array_equal(a.levels, b.levels)
    assert np.array_equal(a.move, b.move)
    assert np.array_equal(a.acc, b.acc)


@needs_compiled
@pytest.mark.parametrize("kind,h", [("rwm", 0.5), ("mala", 0.01)])
def test_aux_chain_bit_identical_across_backends(kind, h):
    spec = tl.MixtureSpec(np.array([0.3, 0.7]), np.array([[2.0, 0.0], [-2.0, 0.0]]),
                          tl.diag_quadratic_potential([1.0, 2.0]))
    lad = tl.Ladder(np.array([0.25, 0.5, 1.0]), zeta=np.array([0.1, 0.0, -0.1]))
    cfg = TemperingConfig(proposal_kind=kind, h=h, alpha=0.4, q_adj=0.5,
                          lazy=False, seed=7)
    init = AugState(0, 0, spec.modes[0].copy())
    a = run_chain(init, spec, lad, cfg, 60_000, backend="compiled")
    b = run_chain(init, spec, lad, cfg, 60_000, backend="python")
    assert np.array_equal(a.xs, b.xs)
    assert np.array_equal(a.levels, b.levels)
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.acc, b.acc)


@needs_compiled
def test_cut_scan_agrees_across_backends():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = int(rng.integers(2, 12))
        chain = random_reversible_chain(rng, n)
        F = chain.flows()
        F = (F + F.T) / 2
        s_list = [0.0, 0.05, 0.2]
        va, ma, fa, ha, hma = _speed.cut_scan(np.ascontiguousarray(F), chain.pi, s_list)
        vb, mb, fb, hb, hmb = _chainpy.cut_scan(F, chain.pi, s_list)
        np.testing.assert_array_equal(va, vb)
        np.testing.assert_array_equal(ma, mb)
        assert ha == hb and hma == hmb


def test_backend_selection_override():
    assert get_backend("python").BACKEND_NAME == "python"
    if HAVE_COMPILED:
        assert get_backend("compiled").BACKEND_NAME == "compiled"
    with pytest.raises(ValueError):
        get_backend("fortran")


@needs_compiled
def test_compiled_backend_is_faster():
    import time
    spec = tl.two_mode_spec(4.0, 2)
    lad = tl.build_ladder(1.0, 1.0, 2, 4.0)
    cfg = TemperingConfig(proposal_kind="rwm", h=0.5, seed=1)
    init = TemperingState(0, spec.modes[0].copy())
    n = 60_000
    t0 = time.perf_counter()
    run_chain(init, spec, lad, cfg, n, backend="compiled")
    t_c = time.perf_counter() - t0
    t0 = time.perf_counter()
    run_chain(init, spec, lad, cfg, n, backend="python")
    t_p = time.perf_counter() - t0
    assert t_c < t_p  # the whole point of the extension


@needs_compiled
def test_cut_scan_agrees_at_larger_sizes():
    rng = np.random.default_rng(77)
    chain = random_reversible_chain(rng, 16)
    F = chain.flows()
    F = np.ascontiguousarray((F + F.T) / 2)
    va, ma, _, ha, _ = _speed.cut_scan(F, chain.pi, [0.0, 0.1])
    vb, mb, _, hb, _ = _chainpy.cut_scan(F, chain.pi, [0.0, 0.1])
    np.testing.assert_array_equal(va, vb)
    np.testing.assert_array_equal(ma, mb)
    assert ha == hb


@needs_compiled
def test_cut_scan_near_cap_is_tractable():
    import time
    rng = np.random.default_rng(3)
    chain = random_reversible_chain(rng, 20)
    t0 = time.perf_counter()
    phi = fl_s_conductance(chain, 0.05)
    assert np.isfinite(phi) and phi > 0
    assert time.perf_counter() - t0 < 30.0


def fl_s_conductance(chain, s):
    from temperlab.finitelab import s_conductance_exact
    return s_conductance_exact(chain, s)
