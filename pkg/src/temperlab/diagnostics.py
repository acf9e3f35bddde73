"""Monte Carlo and quadrature verification of the continuous-space quantities:
projected-chain gap bound, swap-rate floors, gradient/acceptance inequalities,
and the two-Gaussian counterexample bounds.

Everything stochastic uses exact Gaussian component sampling (quadratic
potentials), batch means for standard errors, and a fixed 3-standard-error
slack; eigenvalue-type functionals get batch bootstraps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import stats

from .errors import InvalidArgumentError, UnsupportedNormalizerError
from .finitelab import FiniteChain, spectral_gap
from .ladder import F_overlap, Ladder, gaussian_kl_exact
from .targets import (MixtureSpec, component_exponent_batch, mixture_gradient,
                      mixture_potential, nearest_mode,
                      tempered_mixture_logpdf_batch)
from .tempering import ChainTrace, TemperingConfig

Array = np.ndarray


# ---------------------------------------------------------------------------
# Exact Gaussian overlap quantities for quadratic specs
# ---------------------------------------------------------------------------

def _require_quadratic(spec: MixtureSpec) -> Array:
    if spec.local.diag is None:
        raise UnsupportedNormalizerError(
            "this diagnostic needs the built-in quadratic potentials")
    return spec.local.diag


def exact_hellinger_level1(spec: MixtureSpec, ladder: Ladder) -> float:
    """Smallest Hellinger affinity between two component laws at the hottest
    level (equal covariances, so the affinity is a pure mean-shift factor)."""
    a = _require_quadratic(spec)
    b1 = float(ladder.betas[0])
    best = 1.0
    for j in range(spec.K):
        for jp in range(j + 1, spec.K):
            diff = spec.modes[j] - spec.modes[jp]
            quad = float(np.dot(a, diff * diff))
            best = min(best, math.exp(-b1 * quad / 8.0))
    return best


def exact_adjacent_kl_max(spec: MixtureSpec, ladder: Ladder) -> float:
    """Largest KL between adjacent-level component laws (mean cancels; the
    value depends only on the temperature ratio and dimension)."""
    _require_quadratic(spec)
    if ladder.T == 1:
        return 0.0
    d = spec.d
    best = 0.0
    for i in range(ladder.T - 1):
        b, bp = float(ladder.betas[i]), float(ladder.betas[i + 1])
        best = max(best, gaussian_kl_exact(b, bp, d))
    return best


def exact_overlap_quantities(spec: MixtureSpec, ladder: Ladder) -> dict:
    delta = 0.5 * exact_adjacent_kl_max(spec, ladder)
    h = exact_hellinger_level1(spec, ladder)
    return {"hellinger_exact": h, "delta_exact": delta}


def projected_gap_lower_bound(spec: MixtureSpec, ladder: Ladder,
                              alpha: float, q_adj: float) -> float:
    """(alpha r_tilde r_min q_adj / 4T) min(1 - sqrt(Delta), H^2) with the
    exact Gaussian overlap quantities."""
    q = exact_overlap_quantities(spec, ladder)
    h2 = q["hellinger_exact"] ** 2
    core = min(1.0 - math.sqrt(q["delta_exact"]), h2)
    return (alpha * ladder.r_tilde() * ladder.r_min() * q_adj
            / (4.0 * ladder.T)) * max(core, 0.0)


def swap_acceptance_floor(spec: MixtureSpec, ladder: Ladder,
                          r_tilde: Optional[float] = None) -> float:
    """r_tilde (1 - sqrt(Delta_exact)); pass the realized level-weight ratio
    (e.g. min/max occupancy) for a calibrated run."""
    delta = 0.5 * exact_adjacent_kl_max(spec, ladder)
    rt = ladder.r_tilde() if r_tilde is None else r_tilde
    return rt * max(1.0 - math.sqrt(delta), 0.0)


# ---------------------------------------------------------------------------
# Projected-chain Monte Carlo estimate
# ---------------------------------------------------------------------------

@dataclass
class ProjectedEstimate:
    """Estimated projected transition matrix on the (level, label) grid."""

    T: int
    K: int
    matrix: Array            # (T*K, T*K), flow-symmetrized, rows sum to 1
    se: Array                # entrywise standard errors (directed, pre-symmetrization)
    pi: Array                # stationary vector r_i w_j
    gap: float
    bound: float
    batch_means: dict        # directed entry -> per-batch mean integrand
    n_mc: int
    n_batches: int
    alpha: float
    q_adj: float

    def state(self, i: int, j: int) -> int:
        return i * self.K + j

    def entry(self, i: int, j: int, ip: int, jp: int) -> float:
        return float(self.matrix[self.state(i, j), self.state(ip, jp)])

    def bootstrap_gaps(self, n_boot: int, rng: np.random.Generator) -> Array:
        """Gap distribution under batch-resampling of every MC entry."""
        gaps = np.empty(n_boot)
        for b in range(n_boot):
            vals = {}
            for key, means in self.batch_means.items():
                idx = rng.integers(0, len(means), size=len(means))
                vals[key] = float(means[idx].mean())
            M = _assemble_projected(self.T, self.K, self.pi, vals,
                                    self.alpha, self.q_adj)
            gaps[b] = spectral_gap(FiniteChain(M, self.pi))
        return gaps


def _assemble_projected(T: int, K: int, pi: Array, raw: dict,
                        alpha: float, q_adj: float) -> Array:
    """Directed integrand means -> symmetrized reversible transition matrix."""
    n = T * K
    P = np.zeros((n, n))
    for (i, j, ip, jp), val in raw.items():
        if (ip, jp) == (i + 1, j) or (ip, jp) == (i - 1, j):
            P[i * K + j, ip * K + jp] = (alpha * q_adj / 2.0) * val
        elif ip == i and jp != j:
            P[i * K + j, ip * K + jp] = 0.5 * val
    F = pi[:, None] * P
    F = (F + F.T) / 2.0
    P = F / pi[:, None]
    np.fill_diagonal(P, 0.0)
    rs = P.sum(axis=1)
    if np.any(rs > 1.0):
        P /= max(1.0, rs.max())  # MC noise guard; keeps rows stochastic
        rs = P.sum(axis=1)
    np.fill_diagonal(P, 1.0 - rs)
    return P


def projected_chain_estimate(spec: MixtureSpec, ladder: Ladder,
                             config: TemperingConfig, n_mc: int = 10_000,
                             seed: int = 0, n_batches: int = 100) -> ProjectedEstimate:
    """Monte Carlo estimate of the projected chain on the (level, label) grid.

    Level-move entries average min(1, accept ratio) over exact component
    draws; label-move entries average the conditional label weight.  Flows
    are symmetrized before the gap is computed so the estimated chain is
    exactly reversible.
    """
    a = _require_quadratic(spec)
    if n_mc < 1000:
        raise InvalidArgumentError("n_mc too small for a stable estimate")
    from .tempering import stream
    rng = stream(seed, 31)
    T, K, d = ladder.T, spec.K, spec.d
    betas = ladder.betas
    r = ladder.level_weights()
    w = spec.weights
    log_r = np.log(r)
    # log normalizer of exp(-beta f): product of per-axis Gaussian constants
    log_c = np.array([0.5 * (d * math.log(2.0 * math.pi / b) - np.log(a).sum())
                      for b in betas])
    pi = np.concatenate([r[i] * w for i in range(T)])

    raw = {}
    ses = {}
    batch_means = {}
    scale = 1.0 / np.sqrt(a)

    def draw(i, j, size):
        return spec.modes[j] + (scale / math.sqrt(betas[i])) * rng.standard_normal((size, d))

    def record(key, integrand):
        means = integrand.reshape(n_batches, -1).mean(axis=1)
        raw[key] = float(integrand.mean())
        ses[key] = float(means.std(ddof=1) / math.sqrt(n_batches))
        batch_means[key] = means

    n_eff = (n_mc // n_batches) * n_batches
    for i in range(T):
        for j in range(K):
            xs = draw(i, j, n_eff)
            fj = 0.5 * np.einsum("k,nk->n", a, (xs - spec.modes[j]) ** 2)
            # level moves
            for ip in (i - 1, i + 1):
                if not 0 <= ip < T:
                    continue
                logacc = ((log_r[ip] - log_r[i]) + (log_c[i] - log_c[ip])
                          - (betas[ip] - betas[i]) * fj)
                record((i, j, ip, j), np.minimum(1.0, np.exp(np.minimum(logacc, 0.0))))
            # label moves: conditional weight of j' given (i, x)
            if K > 1:
                e = component_exponent_batch(spec, xs, beta=float(betas[i]))
                m = e.max(axis=1, keepdims=True)
                p = np.exp(e - m)
                p /= p.sum(axis=1, keepdims=True)
                for jp in range(K):
                    if jp == j:
                        continue
                    record((i, j, i, jp), p[:, jp])

    M = _assemble_projected(T, K, pi, raw, config.alpha, config.q_adj)
    gap = spectral_gap(FiniteChain(M, pi))
    bound = projected_gap_lower_bound(spec, ladder, config.alpha, config.q_adj)
    se = np.zeros((T * K, T * K))
    for (i, j, ip, jp), v in ses.items():
        factor = (config.alpha * config.q_adj / 2.0) if ip != i else 0.5
        se[i * K + j, ip * K + jp] = factor * v
    return ProjectedEstimate(T=T, K=K, matrix=M, se=se, pi=pi, gap=gap,
                             bound=bound, batch_means=batch_means,
                             n_mc=n_eff, n_batches=n_batches,
                             alpha=config.alpha, q_adj=config.q_adj)


def canonical_path_bound(projected: ProjectedEstimate, r: Array, w: Array) -> float:
    """Gap lower bound (1/2T) min(Lambda_1, Lambda_2) from the grid paths:
    temperature edges within a label, label edges at the hottest level."""
    T, K = projected.T, projected.K
    r = np.asarray(r, dtype=float)
    w = np.asarray(w, dtype=float)
    lam1 = math.inf
    for i in range(T - 1):
        for j in range(K):
            lam1 = min(lam1, r[i] * projected.entry(i, j, i + 1, j))
    lam2 = math.inf
    r_min = float(r.min())
    for j in range(K):
        for jp in range(K):
            if jp == j:
                continue
            lam2 = min(lam2, (r_min / w[jp]) * projected.entry(0, j, 0, jp))
    core = min(lam1, lam2)
    if not math.isfinite(core):
        return 0.0
    return core / (2.0 * T)


# ---------------------------------------------------------------------------
# Gradient / acceptance inequality suite
# ---------------------------------------------------------------------------

@dataclass
class BoundRecord:
    name: str
    samples: int
    min_margin: float
    violations: int
    lhs_at_tightest: float
    rhs_at_tightest: float

    def as_dict(self) -> dict:
        return {"name": self.name, "samples": self.samples,
                "min_margin": self.min_margin, "violations": self.violations,
                "lhs": self.lhs_at_tightest, "rhs": self.rhs_at_tightest}


@dataclass
class BoundReport:
    records: List[BoundRecord] = field(default_factory=list)
    slack: float = 1e-9
    extra: dict = field(default_factory=dict)

    def add(self, name: str, lhs_values: Array, rhs_values: Array) -> None:
        lhs_values = np.atleast_1d(np.asarray(lhs_values, dtype=float))
        rhs_values = np.broadcast_to(np.asarray(rhs_values, dtype=float),
                                     lhs_values.shape)
        margins = rhs_values - lhs_values
        worst = int(np.argmin(margins))
        self.records.append(BoundRecord(
            name=name, samples=len(margins),
            min_margin=float(margins[worst]),
            violations=int((margins < -self.slack).sum()),
            lhs_at_tightest=float(lhs_values[worst]),
            rhs_at_tightest=float(rhs_values[worst])))

    @property
    def passed(self) -> bool:
        return all(r.violations == 0 for r in self.records)

    def as_dict(self) -> dict:
        return {"passed": self.passed,
                "records": [r.as_dict() for r in self.records],
                **self.extra}


def inequality_suite(spec: MixtureSpec, ladder: Ladder, n_points: int,
                     rng: np.random.Generator) -> BoundReport:
    """Pointwise gradient and acceptance-ratio inequalities at random states.

    Sampling scale 3 (D + 1/sqrt(m)); temperatures uniform over the ladder
    range, drift constants c_h log-uniform in (1e-3, 1].  Every inequality
    must hold with slack >= -1e-9 at every sampled point.
    """
    L = spec.local.smoothness
    m = spec.local.strong_convexity
    D = spec.D
    d = spec.d
    report = BoundReport()
    width = 3.0 * (D + 1.0 / math.sqrt(m))

    xs = width * rng.standard_normal((n_points, d))
    ys = width * rng.standard_normal((n_points, d))
    zs = rng.standard_normal((n_points, d))
    betas = np.exp(rng.uniform(math.log(float(ladder.betas[0])), 0.0, n_points))
    js = rng.integers(0, spec.K, n_points)
    hs_small = np.exp(rng.uniform(math.log(1e-4), 0.0, n_points)) / L
    chs = np.exp(rng.uniform(math.log(1e-3), 0.0, n_points))

    grad_u = np.array([mixture_gradient(spec, x) for x in xs])
    grad_f = np.array([spec.local.gradient(x) for x in xs])
    pot_u = np.array([mixture_potential(spec, x) for x in xs])
    pot_u_y = np.array([mixture_potential(spec, y) for y in ys])

    # drift displacement of the mixture against the local gradient
    report.add("mixture-vs-local-gradient",
               np.linalg.norm(grad_u - grad_f, axis=1), L * D)

    # one-sided second-order growth of the mixture potential
    inner = np.einsum("nk,nk->n", grad_u, ys - xs)
    lhs = pot_u_y - pot_u - inner
    rhs = 0.5 * L * np.sum((ys - xs) ** 2, axis=1)
    report.add("mixture-smoothness", lhs, rhs)

    # gradient growth at a tempered state
    sb = np.sqrt(betas)
    xnorm = np.linalg.norm(xs, axis=1)
    growth = L * (sb * xnorm + D)
    gf_j = np.array([spec.local.gradient(xs[t] - spec.modes[js[t]])
                     for t in range(n_points)])
    report.add("local-gradient-growth", sb * np.linalg.norm(gf_j, axis=1), growth)
    report.add("mixture-gradient-growth", sb * np.linalg.norm(grad_u, axis=1), growth)

    # gradient growth at the proposal point y(x, z) = x - h grad U + sqrt(2h/beta) z
    y_prop = xs - hs_small[:, None] * grad_u + np.sqrt(2.0 * hs_small / betas)[:, None] * zs
    gu_y = np.array([mixture_gradient(spec, y) for y in y_prop])
    znorm = np.linalg.norm(zs, axis=1)
    rhs = (np.sqrt(2.0 * hs_small) * L * znorm + (1.0 + hs_small * L) * growth)
    report.add("proposal-gradient-growth", sb * np.linalg.norm(gu_y, axis=1), rhs)

    # drift map is non-expansive for h <= 1/L
    gf_y = np.array([spec.local.gradient(y) for y in ys])
    lhs = np.linalg.norm((xs - hs_small[:, None] * grad_f)
                         - (ys - hs_small[:, None] * gf_y), axis=1)
    report.add("drift-map-contraction", lhs, np.linalg.norm(xs - ys, axis=1))

    # acceptance lower bounds at the matched step size h = c_h / (L^2 (sqrt(b)|x| + D)^2)
    h_acc = chs / (L * L * (sb * xnorm + D) ** 2)
    y_acc = xs - h_acc[:, None] * grad_u + np.sqrt(2.0 * h_acc / betas)[:, None] * zs
    hl = h_acc * L
    f_x = np.array([spec.local.value(xs[t] - spec.modes[js[t]]) for t in range(n_points)])
    f_y = np.array([spec.local.value(y_acc[t] - spec.modes[js[t]]) for t in range(n_points)])
    lhs = betas * (f_x - f_y)
    rhs = -(hl * znorm ** 2 + (1.0 + hl) * np.sqrt(2.0 * chs) * znorm
            + (1.0 + hl / 2.0) * np.sqrt(chs))
    report.add("langevin-accept-target-bound", -lhs, -rhs)

    gu_yacc = np.array([mixture_gradient(spec, y) for y in y_acc])
    fw = np.sum(((y_acc - xs) + h_acc[:, None] * grad_u) ** 2, axis=1)
    bw = np.sum(((xs - y_acc) + h_acc[:, None] * gu_yacc) ** 2, axis=1)
    log_q_ratio = -(betas / (4.0 * h_acc)) * (bw - fw)
    rhs = -(hl * (1.0 + hl / 2.0) * znorm ** 2
            + (2.0 + 3.0 * hl + hl * hl) * np.sqrt(chs / 2.0) * znorm
            + (1.0 + hl / 2.0) ** 2 * chs)
    report.add("langevin-accept-proposal-bound", -log_q_ratio, -rhs)
    return report


# ---------------------------------------------------------------------------
# Two-Gaussian counterexample witness
# ---------------------------------------------------------------------------

def _require_counterexample_spec(spec: MixtureSpec) -> float:
    a = _require_quadratic(spec)
    if spec.K != 2 or not np.allclose(a, 1.0):
        raise InvalidArgumentError(
            "witness needs the equal-weight isotropic two-Gaussian target")
    if not np.allclose(spec.weights, 0.5):
        raise InvalidArgumentError("witness needs equal weights")
    D = spec.D
    want = np.zeros((2, spec.d))
    want[0, 0] = D
    want[1, 0] = -D
    if not np.allclose(spec.modes, want):
        raise InvalidArgumentError("witness needs modes +-(D, 0, ..., 0)")
    return D


def halfspace_flow_bound(beta1: float, D: float, d: int, h: float,
                         s: float) -> dict:
    """Closed-form conductance bound from the coordinate half-space cut."""
    if not 0.0 <= s < 0.5:
        raise InvalidArgumentError("s must lie in [0, 1/2)")
    core = (2.0 / (2.0 + h)) ** (d / 2.0) * math.exp(-beta1 * D * D / (2.0 + h))
    return {"numerator": 2.0 * core, "phi_bound": 4.0 / (1.0 - 2.0 * s) * core}


def spacing_flow_bound(ladder: Ladder, d: int, s: float) -> dict:
    """Conductance bound 16 min_i F(rho_i) from the loosest adjacent spacing;
    valid for s <= 1/(4T)."""
    if ladder.T == 1:
        return {"bound": math.inf, "s_admissible": s <= 0.25, "min_F": math.inf}
    rhos = ladder.betas[1:] / ladder.betas[:-1] - 1.0
    fmin = min(F_overlap(float(rho), d) for rho in rhos)
    return {"bound": 16.0 * fmin, "s_admissible": s <= 1.0 / (4.0 * ladder.T),
            "min_F": fmin}


def counterexample_witness(spec: MixtureSpec, ladder: Ladder, h: float,
                           s: float, n_mc: int = 10_000, seed: int = 0,
                           n_batches: int = 100) -> BoundReport:
    """Evaluate both closed-form conductance bounds and cross-check the
    half-space flow by stratified Monte Carlo.

    The flow across the separating half-space is estimated for the label-
    augmented mixture at every level with exact component draws; the target
    chain's flow sits inside [w_min, 1/w_min] times that (density sandwich),
    and the upper end must stay below the closed-form numerator within 3
    standard errors.
    """
    D = _require_counterexample_spec(spec)
    r = ladder.level_weights()
    if not np.allclose(r, 1.0 / ladder.T):
        raise InvalidArgumentError("witness assumes uniform level weights")
    from .tempering import stream
    rng = stream(seed, 47)
    d = spec.d
    T = ladder.T
    betas = ladder.betas
    w_min = spec.w_min

    n_eff = (max(n_mc, 1000) // n_batches) * n_batches
    level_means = np.empty((T, n_batches))
    for i in range(T):
        bi = float(betas[i])
        sig_prop = math.sqrt(2.0 * h / bi)
        acc = np.empty((2, n_eff))
        for j in range(2):
            xs = spec.modes[j] + rng.standard_normal((n_eff, d)) / math.sqrt(bi)
            ys = xs + sig_prop * rng.standard_normal((n_eff, d))
            lp_x = tempered_mixture_logpdf_batch(spec, xs, bi)
            lp_y = tempered_mixture_logpdf_batch(spec, ys, bi)
            cross = (xs[:, 0] > 0.0) & (ys[:, 0] < 0.0)
            acc[j] = np.where(cross, np.minimum(1.0, np.exp(np.minimum(lp_y - lp_x, 0.0))), 0.0)
        integrand = spec.weights[0] * acc[0] + spec.weights[1] * acc[1]
        level_means[i] = integrand.reshape(n_batches, -1).mean(axis=1)

    flow_batches = (r[:, None] * level_means).sum(axis=0)
    flow_aux = float(flow_batches.mean())
    flow_se = float(flow_batches.std(ddof=1) / math.sqrt(n_batches))
    upper = flow_aux / w_min
    upper_se = flow_se / w_min

    hs = halfspace_flow_bound(float(betas[0]), D, d, h, s)
    sp = spacing_flow_bound(ladder, d, s)

    report = BoundReport()
    report.add("halfspace-flow-vs-numerator",
               np.array([upper - 3.0 * upper_se]), np.array([hs["numerator"]]))
    report.extra = {
        "flow_aux": flow_aux, "flow_se": flow_se,
        "sandwich": [w_min * flow_aux, upper],
        "upper_se": upper_se,
        "numerator": hs["numerator"],
        "phi_bound_halfspace": hs["phi_bound"],
        "phi_bound_spacing": sp["bound"],
        "spacing_s_admissible": sp["s_admissible"],
        "n_mc_per_stratum": n_eff,
    }
    return report


# ---------------------------------------------------------------------------
# Cold-slice marginal fit
# ---------------------------------------------------------------------------

def integrated_autocorr_time(series: Array, window_factor: float = 5.0) -> float:
    """Self-consistent window estimate of the integrated autocorrelation time."""
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 4:
        return 1.0
    x = x - x.mean()
    nfft = 1 << int(n - 1).bit_length() + 1
    f = np.fft.rfft(x, n=nfft)
    acf = np.fft.irfft(f * np.conj(f), n=nfft)[:n].real
    if acf[0] <= 0:
        return 1.0
    rho = acf / acf[0]
    tau = 1.0
    for m in range(1, n):
        tau += 2.0 * rho[m]
        if m >= window_factor * tau:
            break
    return max(tau, 1.0)


def mixture_marginal_cdf(spec: MixtureSpec, coord: int, beta: float = 1.0):
    """Exact 1-d marginal CDF of the quadratic mixture along one coordinate."""
    a = _require_quadratic(spec)
    sd = 1.0 / math.sqrt(beta * a[coord])
    mus = spec.modes[:, coord]
    w = spec.weights

    def cdf(t):
        t = np.asarray(t, dtype=float)
        return np.sum(w[None, :] * stats.norm.cdf((t[..., None] - mus[None, :]) / sd),
                      axis=-1)

    return cdf


def marginal_fit(trace: ChainTrace, spec: MixtureSpec, level: int,
                 min_effective: int = 1000, burn_fraction: float = 0.1) -> dict:
    """Cold-slice goodness of fit: per-coordinate KS against the exact
    mixture marginal after autocorrelation thinning, plus nearest-mode
    occupancy against the weights."""
    ladder = trace.ladder
    if level != ladder.T - 1:
        raise InvalidArgumentError(
            "only the cold slice (top level) has an analytic marginal")
    _require_quadratic(spec)
    burn = int(burn_fraction * trace.n_steps)
    xs = trace.positions_at_level(level, skip=burn)
    if len(xs) < 10:
        raise InvalidArgumentError("too few cold-slice samples")
    iat = max(integrated_autocorr_time(xs[:, k]) for k in range(spec.d))
    step = max(1, int(math.ceil(iat)))
    thinned = xs[::step]
    n_eff = len(thinned)
    per_coord = []
    for k in range(spec.d):
        cdf = mixture_marginal_cdf(spec, k, beta=float(ladder.betas[-1]))
        res = stats.kstest(thinned[:, k], cdf)
        per_coord.append({"coord": k, "statistic": float(res.statistic),
                          "pvalue": float(res.pvalue)})
    labels = np.array([nearest_mode(spec, x) for x in xs])
    occupancy = np.bincount(labels, minlength=spec.K) / len(labels)
    max_dev = float(np.max(np.abs(occupancy - spec.weights)))
    return {
        "level": level,
        "n_raw": int(len(xs)),
        "iat": float(iat),
        "thin": step,
        "n_effective": n_eff,
        "effective_floor_met": n_eff >= min_effective,
        "ks": per_coord,
        "min_pvalue": min(p["pvalue"] for p in per_coord),
        "mode_occupancy": occupancy.tolist(),
        "weights": spec.weights.tolist(),
        "occupancy_max_dev": max_dev,
        "stuck": bool(occupancy.max() >= 0.95),
    }
