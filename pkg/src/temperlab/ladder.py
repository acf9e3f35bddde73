"""Inverse-temperature ladder construction and closed-form design diagnostics.

The geometric ladder uses T = ceil((kappa sqrt(d) + 1) log(4 L D^2 + 1))
levels at ratio 1 + 1/(kappa sqrt(d)), ending at beta_T = 1.  If the level
count leaves beta_1 above 1/(4 L D^2), extra levels are prepended at the
same ratio until the condition holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import InvalidArgumentError, NumericsError
from .targets import MixtureSpec

Array = np.ndarray


@dataclass
class Ladder:
    """Increasing inverse temperatures with beta_T = 1 and level pseudo-log-weights."""

    betas: Array
    zeta: Array = None
    ratio: Optional[float] = None
    prepended: int = 0

    def __post_init__(self):
        b = np.asarray(self.betas, dtype=float)
        if b.ndim != 1 or len(b) < 1:
            raise ValueError("betas must be a non-empty vector")
        if b[-1] != 1.0:
            raise ValueError(f"last inverse temperature must be exactly 1, got {b[-1]!r}")
        if len(b) > 1 and np.any(np.diff(b) <= 0):
            raise ValueError("inverse temperatures must be strictly increasing")
        if np.any(b <= 0):
            raise ValueError("inverse temperatures must be positive")
        self.betas = b
        if self.zeta is None:
            self.zeta = np.zeros(len(b))
        else:
            self.zeta = np.asarray(self.zeta, dtype=float)
            if self.zeta.shape != b.shape:
                raise ValueError("zeta must have one entry per level")

    @property
    def T(self) -> int:
        return len(self.betas)

    def level_weights(self) -> Array:
        """r_i proportional to exp(zeta_i), treating the pseudo-weights as exact."""
        z = self.zeta - self.zeta.max()
        r = np.exp(z)
        return r / r.sum()

    def r_min(self) -> float:
        return float(self.level_weights().min())

    def r_tilde(self) -> float:
        """min over level pairs of r_i' / r_i."""
        r = self.level_weights()
        return float(r.min() / r.max())

    def max_ratio(self) -> float:
        """Largest consecutive ratio; 1 for a single-level ladder."""
        if self.T == 1:
            return 1.0
        return float((self.betas[1:] / self.betas[:-1]).max())

    def with_zeta(self, zeta) -> "Ladder":
        """Copy with new pseudo-log-weights; keeps calibration prefixes valid."""
        zeta = np.asarray(zeta, dtype=float)
        if zeta.shape != self.betas.shape:
            raise ValueError("zeta must have one entry per level")
        lad = Ladder.__new__(Ladder)
        lad.betas = self.betas.copy()
        lad.zeta = zeta.copy()
        lad.ratio = self.ratio
        lad.prepended = self.prepended
        return lad

    def truncated(self, levels: int) -> "Ladder":
        """Prefix ladder on the first ``levels`` temperatures.

        Betas are kept as-is (the prefix top is generally below 1); used by
        the calibration bootstrap, which runs the sampler on growing prefixes.
        """
        if not 1 <= levels <= self.T:
            raise ValueError("invalid prefix length")
        b = self.betas[:levels].copy()
        lad = Ladder.__new__(Ladder)
        lad.betas = b
        lad.zeta = self.zeta[:levels].copy()
        lad.ratio = self.ratio
        lad.prepended = 0
        return lad


@dataclass
class DesignReport:
    """Closed-form ladder diagnostics plus tuned step sizes."""

    T: int
    beta1: float
    ratio: float
    hellinger_floor: float
    kl_ceiling: float
    overlap_margin: float
    rwm_h: float
    mala_h: float
    tau: float
    R: float

    CSV_COLUMNS = ("T", "beta1", "ratio", "hellinger_floor", "kl_ceiling",
                   "overlap_margin", "rwm_h", "mala_h", "tau", "R")

    def csv_row(self) -> list:
        return [getattr(self, c) for c in self.CSV_COLUMNS]


def build_ladder(L: float, m: float, d: int, D: float) -> Ladder:
    """Geometric ladder at ratio 1 + 1/(kappa sqrt(d)) ending at 1.

    Degenerate D = 0 collapses to the single level beta = 1.  Levels are
    prepended (recorded in ``prepended``) whenever the nominal level count
    leaves beta_1 above 1/(4 L D^2).
    """
    if not (L >= m > 0):
        raise InvalidArgumentError(f"need L >= m > 0, got L={L}, m={m}")
    if d < 1:
        raise InvalidArgumentError("dimension must be >= 1")
    if D < 0:
        raise InvalidArgumentError("mode displacement must be nonnegative")
    if D == 0.0:
        return Ladder(np.array([1.0]), ratio=1.0 + m / (L * math.sqrt(d)))

    kappa = L / m
    ratio = 1.0 + 1.0 / (kappa * math.sqrt(d))
    T = math.ceil((kappa * math.sqrt(d) + 1.0) * math.log(4.0 * L * D * D + 1.0))
    T = max(T, 1)
    threshold = 1.0 / (4.0 * L * D * D)

    def geometric(T):
        b = np.empty(T)
        b[-1] = 1.0
        for i in range(T - 2, -1, -1):
            b[i] = b[i + 1] / ratio
        return b

    betas = geometric(T)
    prepended = 0
    while T > 1 and betas[0] > threshold:
        T += 1
        prepended += 1
        betas = geometric(T)
    if T == 1 and betas[0] > threshold:
        # single nominal level but the floor condition still binds
        while betas[0] > threshold:
            T += 1
            prepended += 1
            betas = geometric(T)
    return Ladder(betas, ratio=ratio, prepended=prepended)


def F_overlap(rho: float, d: int) -> float:
    """Adjacent-level overlap factor (2 sqrt(1+rho) / (2+rho))^(d/2).

    Equals 1 at rho = 0 and decreases monotonically in rho and (for rho > 0)
    in d.
    """
    if rho < 0:
        raise InvalidArgumentError("rho must be nonnegative")
    return float((2.0 * math.sqrt(1.0 + rho) / (2.0 + rho)) ** (d / 2.0))


def gaussian_hellinger_affinity(beta: float, beta_p: float, mu, mu_p) -> float:
    """int sqrt(p q) for Gaussians N(mu, I/beta), N(mu', I/beta')."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    mu_p = np.atleast_1d(np.asarray(mu_p, dtype=float))
    d = len(mu)
    sep2 = float(np.sum((mu - mu_p) ** 2))
    scale = (2.0 * math.sqrt(beta * beta_p) / (beta + beta_p)) ** (d / 2.0)
    return scale * math.exp(-beta * beta_p * sep2 / (4.0 * (beta + beta_p)))


def gaussian_kl_exact(beta: float, beta_p: float, d: int, sep2: float = 0.0) -> float:
    """Closed-form KL( N(mu, I/beta) || N(mu', I/beta') ) with sep2 = ||mu-mu'||^2."""
    return (d / 2.0) * (beta_p / beta - 1.0 + math.log(beta / beta_p)) + 0.5 * beta_p * sep2


def tempered_kl_quadrature(
    beta: float,
    beta_p: float,
    variance_of_potential,
    breakpoints=None,
    tol: float = 1e-10,
) -> float:
    """KL between tempered densities via int_beta^beta' (beta' - z) v(z) dz.

    ``variance_of_potential`` is v(z), the variance of f(X) under the density
    proportional to exp(-z f); for any quadratic form it equals d / (2 z^2).
    The signed integral covers both orderings of (beta, beta').
    """
    if beta_p == beta:
        return 0.0
    lo, hi = min(beta, beta_p), max(beta, beta_p)
    pts = None
    if breakpoints is not None:
        pts = [b for b in breakpoints if lo < b < hi]
        if not pts:
            pts = None
    val, err = integrate.quad(
        lambda z: (beta_p - z) * variance_of_potential(z),
        beta, beta_p, epsabs=tol, limit=200, points=pts,
    )
    if err > max(tol, 1e-8 * abs(val)):
        raise NumericsError(f"KL quadrature residual {err:.3e} above tolerance {tol:.1e}")
    return float(val)


def gaussian_closed_forms(beta: float, beta_p: float, mu, mu_p, d: int = None,
                          breakpoints=None) -> dict:
    """Hellinger affinity and KL for the isotropic-quadratic component pair.

    The Hellinger affinity is the closed form; the KL is computed by adaptive
    quadrature of the exponential-family integral representation with
    v(z) = d / (2 z^2), plus the exact mean-shift term.  Pass the ladder's
    interior temperatures as ``breakpoints`` when the pair spans several
    levels (see ``ladder_component_kl``).
    """
    if beta <= 0 or beta_p <= 0:
        raise InvalidArgumentError("inverse temperatures must be positive")
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    mu_p = np.atleast_1d(np.asarray(mu_p, dtype=float))
    if d is None:
        d = len(mu)
    sep2 = float(np.sum((mu - mu_p) ** 2))
    hell = gaussian_hellinger_affinity(beta, beta_p, mu, mu_p)
    kl_scale = tempered_kl_quadrature(beta, beta_p, lambda z: d / (2.0 * z * z),
                                      breakpoints=breakpoints)
    kl = kl_scale + 0.5 * beta_p * sep2
    return {"hellinger": hell, "kl": kl}


def ladder_component_kl(ladder: Ladder, i: int, ip: int, d: int) -> float:
    """KL between same-mode component laws at two ladder levels.

    The quadrature interval is split at every intermediate ladder point so
    the adaptive rule respects the ladder geometry.
    """
    if not (0 <= i < ladder.T and 0 <= ip < ladder.T):
        raise InvalidArgumentError("level indices out of range")
    beta, beta_p = float(ladder.betas[i]), float(ladder.betas[ip])
    return tempered_kl_quadrature(beta, beta_p, lambda z: d / (2.0 * z * z),
                                  breakpoints=[float(b) for b in ladder.betas])


def overlap_diagnostics(spec: MixtureSpec, ladder: Ladder) -> dict:
    """Closed-form Hellinger floor, KL ceiling, and the resulting overlap margin.

    Both bounds are formulas in (L, kappa, d, D) and the ladder spacing, not
    estimates.  ``one_minus_sqrt_kl`` and ``nominal_margin_claim`` are reported
    side by side: the displayed spacing bound gives sqrt(ceiling) <= 1/2 under
    the design conditions (margin 1/2), while the design target commonly quoted
    for such ladders is 3/4; the report exposes both without reconciling them.
    """
    L = spec.local.smoothness
    kappa = spec.local.condition_number
    d = spec.d
    D = spec.D
    beta1 = float(ladder.betas[0])
    floor = math.exp(-beta1 * L * D * D / 2.0)
    ceil = (d * kappa * kappa / 4.0) * (ladder.max_ratio() - 1.0) ** 2
    one_minus = 1.0 - math.sqrt(ceil)
    margin = min(one_minus, floor * floor)
    conditions_hold = (
        L * D * D > 0.25
        and beta1 <= 1.0 / (4.0 * L * D * D) + 1e-12
        and ladder.max_ratio() <= 1.0 + 1.0 / (kappa * math.sqrt(d)) + 1e-12
    )
    return {
        "hellinger_floor": floor,
        "kl_ceiling": ceil,
        "overlap_margin": margin,
        "one_minus_sqrt_kl": one_minus,
        "nominal_margin_claim": 0.75 if conditions_hold else None,
    }


def step_sizes(
    spec: MixtureSpec,
    ladder: Ladder,
    alpha: float,
    q_adj: float,
    eta: float,
    eps: float,
    c: float = 0.01,
) -> dict:
    """Proposal step sizes and the mixing parameters (tau, R).

    rwm_h = 1/(L d); mala_h = c / (L^2 (D + R)^2 d) with
    R = (2/sqrt(m)) max(sqrt(d), sqrt(2 log(86 T eta / (tau r_min w_min eps)))),
    and tau = alpha (1 - alpha) q_adj r_tilde.  Level weights are taken from
    the ladder pseudo-weights treated as exact.
    """
    if eps <= 0:
        raise InvalidArgumentError("accuracy eps must be positive")
    if eta < 1:
        raise InvalidArgumentError("warm-start parameter eta must be >= 1")
    if not 0 < c <= 0.01:
        raise InvalidArgumentError("MALA constant c must lie in (0, 0.01]")
    if not 0 < alpha < 1:
        raise InvalidArgumentError("alpha must lie in (0, 1)")
    if not 0 < q_adj <= 0.5:
        raise InvalidArgumentError("q_adj must lie in (0, 1/2]")
    L = spec.local.smoothness
    m = spec.local.strong_convexity
    d = spec.d
    D = spec.D
    T = ladder.T
    r_min = ladder.r_min()
    r_tilde = ladder.r_tilde()
    tau = alpha * (1.0 - alpha) * q_adj * r_tilde
    log_arg = 86.0 * T * eta / (tau * r_min * spec.w_min * eps)
    R = (2.0 / math.sqrt(m)) * max(math.sqrt(d), math.sqrt(2.0 * math.log(log_arg)))
    rwm_h = 1.0 / (L * d)
    mala_h = c / (L * L * (D + R) ** 2 * d)
    return {"rwm_h": rwm_h, "mala_h": mala_h, "tau": tau, "R": R}


def design_report(
    spec: MixtureSpec,
    ladder: Ladder,
    alpha: float = 0.5,
    q_adj: float = 0.5,
    eta: float = math.e,
    eps: float = 1e-2,
    c: float = 0.01,
) -> DesignReport:
    ov = overlap_diagnostics(spec, ladder)
    st = step_sizes(spec, ladder, alpha, q_adj, eta, eps, c)
    return DesignReport(
        T=ladder.T,
        beta1=float(ladder.betas[0]),
        ratio=ladder.max_ratio(),
        hellinger_floor=ov["hellinger_floor"],
        kl_ceiling=ov["kl_ceiling"],
        overlap_margin=ov["overlap_margin"],
        rwm_h=st["rwm_h"],
        mala_h=st["mala_h"],
        tau=st["tau"],
        R=st["R"],
    )


def tempered_rejection_sample(local, d: int, beta: float, n: int, rng,
                              max_tries: int = 400) -> Array:
    """Exact draws from the density proportional to exp(-beta f) by rejection.

    Uses the strong-convexity Gaussian envelope exp(-beta m ||x||^2 / 2); the
    acceptance ratio is exp(-beta (f(x) - m ||x||^2 / 2)) <= 1.  Intended for
    the Monte Carlo variance plug-in on non-quadratic potentials; the analytic
    path should be preferred whenever available.
    """
    if d < 1 or n < 1:
        raise InvalidArgumentError("need positive dimension and draw count")
    m = local.strong_convexity
    out = np.empty((n, d))
    got = 0
    for _ in range(max_tries):
        need = n - got
        cand = rng.standard_normal((max(2 * need, 16), d)) / math.sqrt(beta * m)
        logacc = np.array([-beta * (local.value(c) - 0.5 * m * np.dot(c, c)) for c in cand])
        keep = np.log(rng.random(len(cand))) < logacc
        take = cand[keep][:need]
        out[got:got + len(take)] = take
        got += len(take)
        if got == n:
            return out
    raise NumericsError("rejection sampler failed to reach the requested draw count")


def variance_of_potential_mc(local, d: int, beta: float, rng,
                             n: int = 100_000) -> float:
    """Plug-in Monte Carlo estimate of Var f(X), X ~ exp(-beta f) (rough path)."""
    xs = tempered_rejection_sample(local, d, beta, n, rng)
    vals = np.array([local.value(x) for x in xs])
    return float(vals.var(ddof=1))


def tempered_kl_mc(local, d: int, beta: float, beta_p: float, rng,
                   draws: int = 100_000, grid: int = 9) -> float:
    """KL between tempered densities with a Monte Carlo variance plug-in.

    Estimates v(z) by exact rejection draws at ``grid`` points across
    [beta, beta'] and integrates (beta' - z) v(z) with Simpson's rule.  This
    is the rough path for potentials without an analytic variance; expect a
    few percent accuracy, not quadrature accuracy.
    """
    if beta_p == beta:
        return 0.0
    if grid < 3 or grid % 2 == 0:
        raise InvalidArgumentError("grid must be an odd count >= 3")
    lo, hi = min(beta, beta_p), max(beta, beta_p)
    zs = np.linspace(lo, hi, grid)
    per_point = max(draws // grid, 1000)
    vhat = np.array([variance_of_potential_mc(local, d, float(z), rng, per_point)
                     for z in zs])
    vals = (beta_p - zs) * vhat
    step = (hi - lo) / (grid - 1)
    simpson = vals[0] + vals[-1] + 4 * vals[1:-1:2].sum() + 2 * vals[2:-2:2].sum()
    total = step / 3.0 * simpson
    if beta > beta_p:
        total = -total
    return float(total)
