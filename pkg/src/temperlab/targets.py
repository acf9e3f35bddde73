"""Mixture targets: local potential, mixture potential/gradient, component densities.

The target density is pi*(x) proportional to sum_j w_j exp(-f(x - mu_j)),
where f is a smooth, strongly convex "local potential" minimized at the
origin with f(0) = 0.  All density arithmetic is done in log space with
max-shift stabilization so that mode separations far beyond exp(-700)
remain representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NonFiniteValueError, UnsupportedNormalizerError

Array = np.ndarray


@dataclass(frozen=True)
class LocalPotential:
    """Local potential f with declared smoothness/convexity constants.

    Invariants assumed (and testable on sampled pairs): f(0) = 0,
    grad f(0) = 0, and m/2 ||y-x||^2 <= f(y)-f(x)-<grad f(x), y-x>
    <= L/2 ||y-x||^2 with 0 < m <= L.

    ``diag`` is set for the built-in quadratic forms f(v) = sum_k a_k v_k^2 / 2;
    it enables analytic normalizers and the compiled chain kernels.
    """

    value: Callable[[Array], float]
    gradient: Callable[[Array], Array]
    smoothness: float
    strong_convexity: float
    diag: Optional[Array] = None

    def __post_init__(self):
        if not (0 < self.strong_convexity <= self.smoothness):
            raise ValueError(
                f"need 0 < m <= L, got m={self.strong_convexity}, L={self.smoothness}"
            )

    @property
    def condition_number(self) -> float:
        return self.smoothness / self.strong_convexity

    @property
    def is_quadratic(self) -> bool:
        return self.diag is not None


def quadratic_potential(d: int) -> LocalPotential:
    """Isotropic quadratic f(v) = ||v||^2 / 2 (L = m = 1)."""
    return diag_quadratic_potential(np.ones(d))


def diag_quadratic_potential(a, smoothness: Optional[float] = None,
                             strong_convexity: Optional[float] = None) -> LocalPotential:
    """Diagonal quadratic f(v) = sum_k a_k v_k^2 / 2.

    Defaults to the tight constants m = min a, L = max a; looser declared
    constants are accepted as long as they still bound the curvature.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or np.any(a <= 0):
        raise ValueError("diagonal coefficients must be a 1-d positive vector")
    L = float(a.max()) if smoothness is None else float(smoothness)
    m = float(a.min()) if strong_convexity is None else float(strong_convexity)
    if L < a.max() or m > a.min():
        raise ValueError("declared constants must bound the curvature range")

    def value(v: Array) -> float:
        return 0.5 * float(np.dot(a, np.asarray(v) ** 2))

    def gradient(v: Array) -> Array:
        return a * np.asarray(v)

    return LocalPotential(
        value=value,
        gradient=gradient,
        smoothness=L,
        strong_convexity=m,
        diag=a,
    )


@dataclass(frozen=True)
class MixtureSpec:
    """Weights, modes, and local potential defining the mixture target."""

    weights: Array
    modes: Array
    local: LocalPotential
    log_weights: Array = field(init=False, repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        mu = np.atleast_2d(np.asarray(self.modes, dtype=float))
        if w.ndim != 1 or w.shape[0] != mu.shape[0]:
            raise ValueError("weights and modes must agree on the component count")
        if np.any(w <= 0):
            raise ValueError("mixture weights must be strictly positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 within 1e-12, got {w.sum()!r}")
        if self.local.diag is not None and self.local.diag.shape[0] != mu.shape[1]:
            raise ValueError("local potential dimension does not match modes")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "modes", mu)
        object.__setattr__(self, "log_weights", np.log(w))

    @property
    def K(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.modes.shape[1]

    @property
    def D(self) -> float:
        """Maximum mode displacement max_j ||mu_j||."""
        return float(np.linalg.norm(self.modes, axis=1).max())

    @property
    def w_min(self) -> float:
        return float(self.weights.min())


def two_mode_spec(D: float, d: int, local: Optional[LocalPotential] = None) -> MixtureSpec:
    """Equal-weight two-component spec with modes +-(D, 0, ..., 0)."""
    mu = np.zeros((2, d))
    mu[0, 0] = D
    mu[1, 0] = -D
    return MixtureSpec(np.array([0.5, 0.5]), mu, local or quadratic_potential(d))


def _component_exponents(spec: MixtureSpec, x: Array) -> Array:
    """log w_j - f(x - mu_j) for every component, validating finiteness."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise NonFiniteValueError("non-finite position")
    e = np.empty(spec.K)
    for j in range(spec.K):
        fj = spec.local.value(x - spec.modes[j])
        if not math.isfinite(fj):
            raise NonFiniteValueError(f"local potential non-finite at component {j}")
        e[j] = spec.log_weights[j] - fj
    return e


def mixture_potential(spec: MixtureSpec, x: Array) -> float:
    """U(x) = -log sum_j w_j exp(-f(x - mu_j)), via a max-shifted log-sum-exp."""
    e = _component_exponents(spec, x)
    m = e.max()
    return float(-(m + math.log(np.exp(e - m).sum())))


def mixture_softmax(spec: MixtureSpec, x: Array) -> Array:
    """Posterior component responsibilities omega(x, .), a simplex vector."""
    e = _component_exponents(spec, x)
    e -= e.max()
    w = np.exp(e)
    return w / w.sum()


def mixture_gradient(spec: MixtureSpec, x: Array) -> Array:
    """grad U(x) = sum_j omega(x, j) grad f(x - mu_j), mixing weights in log space."""
    x = np.asarray(x, dtype=float)
    omega = mixture_softmax(spec, x)
    g = np.zeros(spec.d)
    for j in range(spec.K):
        gj = np.asarray(spec.local.gradient(x - spec.modes[j]), dtype=float)
        if not np.all(np.isfinite(gj)):
            raise NonFiniteValueError(f"local gradient non-finite at component {j}")
        g += omega[j] * gj
    return g


def log_quadratic_normalizer(local: LocalPotential, beta: float) -> float:
    """log integral of exp(-beta f) for the built-in quadratic forms.

    Each axis contributes a Gaussian normalizer with variance 1/(beta a_k).
    """
    if local.diag is None:
        raise UnsupportedNormalizerError(
            "analytic normalizer only available for the built-in quadratic potentials"
        )
    a = local.diag
    return float(0.5 * (len(a) * math.log(2.0 * math.pi / beta) - np.log(a).sum()))


def component_log_density(
    spec: MixtureSpec,
    ladder,
    i: int,
    j: int,
    x: Array,
    normalized: bool = False,
) -> float:
    """log of the level-i, label-j conditional density at x.

    Unnormalized value is -beta_i f(x - mu_j); with ``normalized`` the analytic
    quadratic normalizer is subtracted (levels and labels are 0-based).
    """
    betas = np.asarray(ladder.betas if hasattr(ladder, "betas") else ladder, dtype=float)
    if not 0 <= i < len(betas):
        raise IndexError(f"level index {i} out of range [0, {len(betas)})")
    if not 0 <= j < spec.K:
        raise IndexError(f"label index {j} out of range [0, {spec.K})")
    x = np.asarray(x, dtype=float)
    fj = spec.local.value(x - spec.modes[j])
    if not math.isfinite(fj):
        raise NonFiniteValueError(f"local potential non-finite at component {j}")
    val = -betas[i] * fj
    if normalized:
        val -= log_quadratic_normalizer(spec.local, betas[i])
    return float(val)


def conditional_label_weights(spec: MixtureSpec, ladder, i: int, x: Array) -> Array:
    """Full conditional over labels at level i: proportional to w_j exp(-beta_i f(x - mu_j))."""
    betas = np.asarray(ladder.betas if hasattr(ladder, "betas") else ladder, dtype=float)
    if not 0 <= i < len(betas):
        raise IndexError(f"level index {i} out of range [0, {len(betas)})")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise NonFiniteValueError("non-finite position")
    e = np.empty(spec.K)
    for j in range(spec.K):
        e[j] = spec.log_weights[j] - betas[i] * spec.local.value(x - spec.modes[j])
    e -= e.max()
    p = np.exp(e)
    return p / p.sum()


def nearest_mode(spec: MixtureSpec, x: Array) -> int:
    """Index of the closest mode in Euclidean distance."""
    d2 = np.sum((spec.modes - np.asarray(x)) ** 2, axis=1)
    return int(np.argmin(d2))


def component_exponent_batch(spec: MixtureSpec, X: Array, beta: float = 1.0) -> Array:
    """(n, K) matrix of log w_j - beta f(x - mu_j) for rows of X.

    Vectorized for the built-in quadratics, loops otherwise.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if spec.local.diag is not None:
        diff = X[:, None, :] - spec.modes[None, :, :]
        fj = 0.5 * np.einsum("k,njk->nj", spec.local.diag, diff * diff)
    else:
        fj = np.empty((X.shape[0], spec.K))
        for r, x in enumerate(X):
            for j in range(spec.K):
                fj[r, j] = spec.local.value(x - spec.modes[j])
    return spec.log_weights[None, :] - beta * fj


def mixture_potential_batch(spec: MixtureSpec, X: Array) -> Array:
    """U(x) for each row of X (same log-sum-exp path as the scalar version)."""
    e = component_exponent_batch(spec, X)
    m = e.max(axis=1)
    return -(m + np.log(np.exp(e - m[:, None]).sum(axis=1)))


def tempered_mixture_logpdf_batch(spec: MixtureSpec, X: Array, beta: float) -> Array:
    """Unnormalized log of sum_j w_j exp(-beta f(x - mu_j)) per row.

    This is the level-beta density of the label-augmented construction up to
    the common normalizer; ratios across positions at one level are exact.
    """
    e = component_exponent_batch(spec, X, beta=beta)
    m = e.max(axis=1)
    return m + np.log(np.exp(e - m[:, None]).sum(axis=1))
