"""Exact spectral-gap, s-conductance, and state-decomposition computations on
finite reversible chains.

Everything here is exact up to floating point: gaps come from symmetrized
eigendecompositions, s-conductance from Gray-code subset enumeration with the
winning subset re-summed in canonical order, and the decomposition /
comparison / TV-rate inequalities are evaluated with both sides reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ._backend import get_backend
from .errors import (InvalidArgumentError, InvalidChainError,
                     InvalidPartitionError, InvalidProposalError,
                     SizeLimitError)

Array = np.ndarray

ROW_SUM_TOL = 1e-12
REVERSIBILITY_TOL = 1e-10
HALF_MASS_TOL = 1e-12
ENUM_CAP = 22


@dataclass
class FiniteChain:
    """Row-stochastic transition matrix with its stationary vector."""

    P: Array
    pi: Array

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=float)
        self.pi = np.asarray(self.pi, dtype=float)
        n = self.P.shape[0]
        if self.P.shape != (n, n) or self.pi.shape != (n,):
            raise InvalidChainError("P must be square and pi of matching length")
        if np.any(self.P < -1e-15):
            raise InvalidChainError("negative transition probability")
        rs = self.P.sum(axis=1)
        if np.max(np.abs(rs - 1.0)) > ROW_SUM_TOL:
            raise InvalidChainError(
                f"rows must sum to 1 within {ROW_SUM_TOL:g}; worst {np.max(np.abs(rs - 1.0)):.3e}")
        if abs(self.pi.sum() - 1.0) > 1e-10 or np.any(self.pi <= 0):
            raise InvalidChainError("pi must be a strictly positive probability vector")

    @property
    def n(self) -> int:
        return len(self.pi)

    def flows(self) -> Array:
        """F[x, y] = pi_x P(x, y)."""
        return self.pi[:, None] * self.P

    def reversibility_defect(self) -> float:
        F = self.flows()
        return float(np.max(np.abs(F - F.T)))

    def require_reversible(self, tol: float = REVERSIBILITY_TOL) -> None:
        defect = self.reversibility_defect()
        if defect > tol:
            raise InvalidChainError(f"chain is not reversible: defect {defect:.3e} > {tol:g}")

    def is_lazy(self, tol: float = 1e-12) -> bool:
        return bool(np.min(np.diag(self.P)) >= 0.5 - tol)

    def to_text(self) -> str:
        lines = [str(self.n)]
        for row in self.P:
            lines.append(" ".join(repr(float(v)) for v in row))
        lines.append(" ".join(repr(float(v)) for v in self.pi))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FiniteChain":
        rows = [ln for ln in text.strip().splitlines() if ln.strip()]
        n = int(rows[0])
        if len(rows) != n + 2:
            raise InvalidChainError(f"expected {n + 2} lines, got {len(rows)}")
        P = np.array([[float(v) for v in rows[1 + k].split()] for k in range(n)])
        pi = np.array([float(v) for v in rows[n + 1].split()])
        return cls(P, pi)


def lazy(chain: FiniteChain) -> FiniteChain:
    """Half-hold version (P + I) / 2; halves both the gap and every Phi_s."""
    return FiniteChain((chain.P + np.eye(chain.n)) / 2.0, chain.pi)


def spectral_gap(chain: FiniteChain) -> float:
    """1 minus the second-largest eigenvalue of the pi-symmetrized matrix.

    For reversible chains this equals the Dirichlet-form infimum.  The
    one-state chain has no fluctuation to relax, so its gap is taken as 1.
    """
    chain.require_reversible()
    if chain.n == 1:
        return 1.0
    root = np.sqrt(chain.pi)
    S = (root[:, None] * chain.P) / root[None, :]
    vals = np.linalg.eigvalsh((S + S.T) / 2.0)
    return float(1.0 - vals[-2])


def dirichlet_form(chain: FiniteChain, g: Array) -> float:
    g = np.asarray(g, dtype=float)
    diff2 = (g[None, :] - g[:, None]) ** 2
    return float(0.5 * np.sum(chain.flows() * diff2))


def variance(pi: Array, g: Array) -> float:
    pi = np.asarray(pi, dtype=float)
    g = np.asarray(g, dtype=float)
    mean = float(np.dot(pi, g))
    return float(np.dot(pi, (g - mean) ** 2))


def _scan(chain: FiniteChain, s_values: Sequence[float]):
    if chain.n > ENUM_CAP:
        raise SizeLimitError(
            f"exact enumeration capped at n <= {ENUM_CAP}, got n = {chain.n}")
    F = chain.flows()
    F = (F + F.T) / 2.0  # reversible up to tolerance; symmetrize exactly
    backend = get_backend()
    return backend.cut_scan(np.ascontiguousarray(F), np.ascontiguousarray(chain.pi),
                            list(s_values))


def s_conductance_exact(chain: FiniteChain, s: float) -> float:
    """Exact s-conductance by subset enumeration (+inf when no subset is
    admissible, i.e. no mass falls in (s, 1/2])."""
    if not 0.0 <= s < 0.5:
        raise InvalidArgumentError("s must lie in [0, 1/2)")
    chain.require_reversible()
    values, _, _, _, _ = _scan(chain, [s])
    return float(values[0])


def s_conductance_many(chain: FiniteChain, s_values: Sequence[float]) -> Array:
    chain.require_reversible()
    values, _, _, _, _ = _scan(chain, list(s_values))
    return values


def half_mass_subset(chain: FiniteChain, tol: float = HALF_MASS_TOL):
    """(found, mask, gap): proper subset with pi(A) closest to 1/2."""
    _, _, _, gap, mask = _scan(chain, [0.0])
    return gap <= tol, int(mask), float(gap)


@dataclass
class Partition:
    """Block labels for a state decomposition; every block must be nonempty."""

    labels: Array

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)
        if self.labels.ndim != 1:
            raise InvalidPartitionError("labels must be a vector")
        blocks = np.unique(self.labels)
        if blocks.min() < 0 or blocks.max() >= len(self.labels):
            raise InvalidPartitionError("labels out of range")
        expected = np.arange(len(blocks))
        if not np.array_equal(blocks, expected):
            raise InvalidPartitionError(
                "labels must use every block index 0..n_blocks-1 (no empty blocks)")

    @property
    def n_blocks(self) -> int:
        return int(self.labels.max()) + 1

    def block(self, k: int) -> Array:
        return np.where(self.labels == k)[0]


def decompose(chain: FiniteChain, partition: Partition):
    """Restricted chains (escapes turned into holds) and the projected chain."""
    if len(partition.labels) != chain.n:
        raise InvalidPartitionError("partition length must match the chain")
    restricted: List[FiniteChain] = []
    nb = partition.n_blocks
    Pbar = np.zeros((nb, nb))
    pibar = np.zeros(nb)
    for k in range(nb):
        idx = partition.block(k)
        Pk = chain.P[np.ix_(idx, idx)].copy()
        escape = 1.0 - Pk.sum(axis=1)
        Pk[np.diag_indices_from(Pk)] += np.maximum(escape, 0.0)
        # renormalize away accumulated rounding so rows sum to exactly 1
        Pk /= Pk.sum(axis=1, keepdims=True)
        pik = chain.pi[idx] / chain.pi[idx].sum()
        restricted.append(FiniteChain(Pk, pik))
        pibar[k] = chain.pi[idx].sum()
        for l in range(nb):
            jdx = partition.block(l)
            Pbar[k, l] = float((chain.pi[idx, None] * chain.P[np.ix_(idx, jdx)]).sum()) / pibar[k]
    Pbar /= Pbar.sum(axis=1, keepdims=True)
    projected = FiniteChain(Pbar, pibar)
    return restricted, projected


def escape_sup(chain: FiniteChain, partition: Partition) -> float:
    """gamma: the largest one-step escape probability from any block."""
    g = 0.0
    for k in range(partition.n_blocks):
        idx = partition.block(k)
        inside = chain.P[np.ix_(idx, idx)].sum(axis=1)
        g = max(g, float((1.0 - inside).max()))
    return min(max(g, 0.0), 1.0)


def cross_dirichlet(chain: FiniteChain, partition: Partition, g: Array) -> float:
    """sum over k != l of the block-to-block Dirichlet contributions."""
    g = np.asarray(g, dtype=float)
    F = chain.flows()
    total = 0.0
    for k in range(partition.n_blocks):
        idx = partition.block(k)
        for l in range(partition.n_blocks):
            if k == l:
                continue
            jdx = partition.block(l)
            diff2 = (g[jdx][None, :] - g[idx][:, None]) ** 2
            total += float((F[np.ix_(idx, jdx)] * diff2).sum())
    return total


def mh_finite(target: Array, proposal: Array) -> FiniteChain:
    """Finite Metropolis-Hastings chain for a target simplex and proposal matrix.

    The proposal must be row-stochastic with symmetric support; the output is
    reversible with respect to the target by construction.
    """
    pi = np.asarray(target, dtype=float)
    Q = np.asarray(proposal, dtype=float)
    n = len(pi)
    if Q.shape != (n, n):
        raise InvalidProposalError("proposal shape must match the target")
    if np.any(Q < 0) or np.max(np.abs(Q.sum(axis=1) - 1.0)) > 1e-10:
        raise InvalidProposalError("proposal must be row-stochastic")
    if np.any((Q > 0) != (Q.T > 0)):
        raise InvalidProposalError("proposal support must be symmetric")
    if abs(pi.sum() - 1.0) > 1e-10 or np.any(pi <= 0):
        raise InvalidProposalError("target must be a strictly positive simplex vector")
    P = np.zeros((n, n))
    for x in range(n):
        for y in range(n):
            if x == y or Q[x, y] == 0.0:
                continue
            P[x, y] = Q[x, y] * min(1.0, pi[y] * Q[y, x] / (pi[x] * Q[x, y]))
        P[x, x] = 1.0 - P[x].sum()
    return FiniteChain(P, pi)


def random_reversible_chain(rng: np.random.Generator, n: int,
                            make_lazy: bool = True) -> FiniteChain:
    """Dirichlet target, symmetric random proposal, Metropolized, then lazy."""
    pi = rng.dirichlet(np.ones(n))
    # keep targets away from degenerate mass so conductance stays informative
    pi = 0.9 * pi + 0.1 / n
    pi = pi / pi.sum()
    S = rng.uniform(0.1, 1.0, size=(n, n))
    S = (S + S.T) / 2.0
    Q = S / S.sum(axis=1, keepdims=True)
    chain = mh_finite(pi, Q)
    return lazy(chain) if make_lazy else chain


def random_partition(rng: np.random.Generator, n: int, n_blocks: int) -> Partition:
    labels = rng.integers(0, n_blocks, size=n)
    labels[rng.permutation(n)[:n_blocks]] = np.arange(n_blocks)
    # compress in case a block still came out empty
    _, labels = np.unique(labels, return_inverse=True)
    return Partition(labels)


@dataclass
class CheckEntry:
    name: str
    lhs: float
    rhs: float
    severity: str = "fail"  # violations beyond slack become failures or warnings
    context: dict = field(default_factory=dict)
    slack: float = 1e-9

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs

    @property
    def ok(self) -> bool:
        if math.isinf(self.rhs) and self.rhs < 0:
            return True
        return self.lhs >= self.rhs - self.slack

    def as_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs,
                "margin": self.margin, "ok": self.ok, "severity": self.severity,
                **self.context}


@dataclass
class CheckReport:
    entries: List[CheckEntry] = field(default_factory=list)

    def add(self, entry: CheckEntry) -> None:
        self.entries.append(entry)

    @property
    def failures(self) -> List[CheckEntry]:
        return [e for e in self.entries if not e.ok and e.severity == "fail"]

    @property
    def warnings(self) -> List[CheckEntry]:
        return [e for e in self.entries if not e.ok and e.severity == "warn"]

    @property
    def passed(self) -> bool:
        return not self.failures

    def as_dict(self) -> dict:
        return {"passed": self.passed,
                "n_entries": len(self.entries),
                "n_failures": len(self.failures),
                "n_warnings": len(self.warnings),
                "entries": [e.as_dict() for e in self.entries]}


def _psi(restricted: List[FiniteChain], s: float) -> float:
    """Minimum s-conductance over restricted chains."""
    vals = [s_conductance_exact(rc, s) for rc in restricted]
    return min(vals)


def decomposition_check(chain: FiniteChain, partition: Partition,
                        s_values: Sequence[float] = (0.0, 0.05, 0.2),
                        n_functions: int = 100,
                        rng: Optional[np.random.Generator] = None,
                        equality_tol: float = 1e-12) -> CheckReport:
    """Verify the state-decomposition results on one chain and partition.

    Checks, with both sides recorded per entry:
      * conductance-decomposition: Phi_s(P) >= (lam_bar/8) Psi(lam_bar s/8);
        needs lam_bar <= 1 plus either an exact half-mass subset or
        Psi <= 4/3 (which forces the conclusion); otherwise violations are
        recorded as warnings, since finite chains often lack half-mass sets.
      * gap-decomposition: lam(P) >= (1/2) lam_bar min_k lam(P_k).
      * general conductance decomposition with the escape supremum gamma.
      * the Dirichlet-form split (an exact identity) and the variance bound,
        on ``n_functions`` random functions.
    """
    chain.require_reversible()
    rng = rng if rng is not None else np.random.default_rng(0)
    restricted, projected = decompose(chain, partition)
    lam = spectral_gap(chain)
    # eigensolver noise can leave a tiny negative gap on block-diagonal chains
    lam_bar = max(spectral_gap(projected), 0.0)
    lam_restr = [spectral_gap(rc) for rc in restricted]
    gamma = escape_sup(chain, partition)
    half_found, _, half_gap = half_mass_subset(chain)
    is_lazy = chain.is_lazy()
    report = CheckReport()

    report.add(CheckEntry(
        name="gap-decomposition", lhs=lam,
        rhs=0.5 * lam_bar * min(lam_restr),
        context={"lambda_bar": lam_bar, "min_restricted_gap": min(lam_restr)}))

    for s in s_values:
        phi = s_conductance_exact(chain, s)
        # main decomposition bound
        st = lam_bar * s / 8.0
        psi = _psi(restricted, st)
        rhs = (lam_bar / 8.0) * psi if math.isfinite(psi) else math.inf
        forced = lam_bar <= 1.0 + 1e-12 and (half_found or psi <= 4.0 / 3.0 + 1e-12)
        report.add(CheckEntry(
            name="conductance-decomposition", lhs=phi, rhs=rhs,
            severity="fail" if forced else "warn",
            context={"s": s, "s_tilde": st, "psi": psi, "lazy": is_lazy,
                     "lambda_bar": lam_bar, "half_mass_found": half_found,
                     "half_mass_gap": half_gap, "hypothesis_met": half_found and is_lazy}))
        # general variant: no half-mass or laziness hypotheses
        denom = 6.0 * gamma + 2.0 * lam_bar
        if denom > 0:
            sg = lam_bar * s / denom
            psig = _psi(restricted, sg)
            second = (lam_bar / denom) * psig if math.isfinite(psig) else math.inf
            rhs_g = min(lam_bar / 6.0, second)
        else:
            rhs_g = 0.0
        report.add(CheckEntry(
            name="general-conductance-decomposition", lhs=phi, rhs=rhs_g,
            context={"s": s, "gamma": gamma, "lambda_bar": lam_bar}))

    pibar = projected.pi
    worst_identity = 0.0
    for _ in range(n_functions):
        g = rng.standard_normal(chain.n)
        total = dirichlet_form(chain, g)
        cross = cross_dirichlet(chain, partition, g)
        within = sum(
            pibar[k] * dirichlet_form(restricted[k], g[partition.block(k)])
            for k in range(partition.n_blocks))
        split = 0.5 * cross + within
        worst_identity = max(worst_identity,
                             abs(total - split) / max(1.0, abs(total)))
        if lam_bar > 0:
            v = variance(chain.pi, g)
            vk = sum(pibar[k] * variance(restricted[k].pi, g[partition.block(k)])
                     for k in range(partition.n_blocks))
            rhs_v = 1.5 / lam_bar * cross + (3.0 * gamma / lam_bar + 1.0) * vk
            report.add(CheckEntry(name="variance-decomposition-bound",
                                  lhs=rhs_v, rhs=v,
                                  context={"note": "upper bound on variance"}))
    report.add(CheckEntry(
        name="dirichlet-decomposition-identity",
        lhs=equality_tol, rhs=worst_identity, slack=0.0,
        context={"n_functions": n_functions,
                 "worst_relative_gap": worst_identity}))
    return report


def tv_mixing_bound_check(chain: FiniteChain, nu: Array, horizon: int,
                          s_values: Sequence[float] = (0.0, 0.01, 0.1)) -> CheckReport:
    """Exact matrix-power TV against the warm-start conductance bound.

    Requires a lazy reversible chain; also records the two-sided relation
    lam/2 <= Phi_s (always) and Phi_s <= 1/(1-2s) (when an exact half-mass
    subset exists).
    """
    chain.require_reversible()
    if not chain.is_lazy():
        raise InvalidArgumentError("TV-rate bound applies to lazy chains")
    nu = np.asarray(nu, dtype=float)
    if nu.shape != chain.pi.shape or np.any(nu < 0) or abs(nu.sum() - 1.0) > 1e-10:
        raise InvalidArgumentError("nu must be a probability vector on the state space")
    eta = float(np.max(nu / chain.pi))
    phis = s_conductance_many(chain, s_values)
    lam = spectral_gap(chain)
    half_found, _, _ = half_mass_subset(chain)
    report = CheckReport()

    # worst (tv - bound) over the horizon, tracked per s
    dist = nu.copy()
    worst = np.full(len(s_values), -math.inf)
    worst_t = np.zeros(len(s_values), dtype=int)
    for t in range(1, horizon + 1):
        dist = dist @ chain.P
        tv = 0.5 * float(np.abs(dist - chain.pi).sum())
        for q, (s, phi) in enumerate(zip(s_values, phis)):
            if not math.isfinite(phi):
                continue
            bound = eta * s + eta * math.exp(-t * phi * phi / 2.0)
            if tv - bound > worst[q]:
                worst[q] = tv - bound
                worst_t[q] = t
    for q, (s, phi) in enumerate(zip(s_values, phis)):
        if not math.isfinite(phi):
            report.add(CheckEntry(name="tv-rate-bound", lhs=0.0, rhs=0.0,
                                  context={"s": s, "phi_s": None,
                                           "note": "no admissible subset"}))
            continue
        report.add(CheckEntry(name="tv-rate-bound", lhs=-worst[q], rhs=0.0,
                              context={"s": s, "phi_s": float(phi), "eta": eta,
                                       "worst_t": int(worst_t[q]),
                                       "horizon": horizon}))
        report.add(CheckEntry(name="gap-to-conductance", lhs=float(phi),
                              rhs=lam / 2.0, context={"s": s}))
        if half_found:
            report.add(CheckEntry(name="conductance-ceiling",
                                  lhs=1.0 / (1.0 - 2.0 * s), rhs=float(phi),
                                  context={"s": s}))
    return report


def run_decomposition_campaign(n_chains: int = 1000, seed: int = 2024,
                               n_min: int = 4, n_max: int = 12,
                               blocks: Tuple[int, int] = (2, 4),
                               s_values: Sequence[float] = (0.0, 0.05, 0.2),
                               n_functions: int = 100,
                               workers: int = 1) -> dict:
    """Randomized verification over lazy reversible chains and partitions.

    Each instance derives its own stream from (seed, index), so results are
    identical however the instances are sharded; ``workers`` > 1 runs them on
    a thread pool (the subset scans release the GIL).
    """
    from .tempering import stream

    def one(idx: int):
        rng = stream(seed, idx)
        n = int(rng.integers(n_min, n_max + 1))
        chain = random_reversible_chain(rng, n, make_lazy=True)
        nb = int(rng.integers(blocks[0], blocks[1] + 1))
        nb = min(nb, n)
        part = random_partition(rng, n, nb)
        return decomposition_check(chain, part, s_values=s_values,
                                   n_functions=n_functions, rng=rng)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(one, range(n_chains)))
    else:
        reports = [one(idx) for idx in range(n_chains)]

    failures = 0
    warnings = 0
    entries = 0
    worst_margin = math.inf
    worst = None
    for idx, rep in enumerate(reports):
        entries += len(rep.entries)
        failures += len(rep.failures)
        warnings += len(rep.warnings)
        for e in rep.entries:
            if e.severity == "fail" and math.isfinite(e.margin) and e.margin < worst_margin:
                worst_margin = e.margin
                worst = {"chain_index": idx, **e.as_dict()}
    return {"n_chains": n_chains, "entries_checked": entries,
            "failures": failures, "warnings": warnings,
            "worst_margin": None if worst is None else worst_margin,
            "worst_entry": worst, "passed": failures == 0}


def comparison_check(pi1: Array, pi2: Array, proposal: Array,
                     s_values: Sequence[float] = (0.0, 0.05, 0.2),
                     slack: float = 1e-12) -> CheckReport:
    """Two Metropolis-Hastings chains sharing one proposal: the one whose
    target is within a ratio band [c, 1/c] of the other keeps, up to c^2,
    both the spectral gap and the (shifted-s) conductance."""
    pi1 = np.asarray(pi1, dtype=float)
    pi2 = np.asarray(pi2, dtype=float)
    ratio = pi1 / pi2
    c = float(min(ratio.min(), 1.0 / ratio.max()))
    P1 = mh_finite(pi1, proposal)
    P2 = mh_finite(pi2, proposal)
    report = CheckReport()
    report.add(CheckEntry(name="gap-comparison", lhs=spectral_gap(P1),
                          rhs=c * c * spectral_gap(P2), slack=slack,
                          context={"c": c}))
    for s in s_values:
        phi1 = s_conductance_exact(P1, s)
        phi2 = s_conductance_exact(P2, c * s)
        if not math.isfinite(phi2):
            report.add(CheckEntry(name="conductance-comparison", lhs=0.0,
                                  rhs=0.0, slack=slack,
                                  context={"s": s, "c": c,
                                           "note": "no admissible subset for the reference"}))
            continue
        lhs = phi1 if math.isfinite(phi1) else math.inf
        report.add(CheckEntry(name="conductance-comparison", lhs=lhs,
                              rhs=c * c * phi2, slack=slack,
                              context={"s": s, "c": c}))
    return report


def run_comparison_campaign(n_pairs: int = 100, seed: int = 77,
                            n_min: int = 3, n_max: int = 10,
                            s_values: Sequence[float] = (0.0, 0.05, 0.2)) -> dict:
    from .tempering import stream

    failures = 0
    entries = 0
    worst_margin = math.inf
    for idx in range(n_pairs):
        rng = stream(seed, idx)
        n = int(rng.integers(n_min, n_max + 1))
        pi1 = rng.dirichlet(np.ones(n))
        pi1 = (0.9 * pi1 + 0.1 / n)
        pi1 = pi1 / pi1.sum()
        tilt = rng.uniform(-1.0, 1.0, size=n)
        pi2 = pi1 * np.exp(tilt)
        pi2 = pi2 / pi2.sum()
        S = rng.uniform(0.1, 1.0, size=(n, n))
        S = (S + S.T) / 2.0
        Q = S / S.sum(axis=1, keepdims=True)
        rep = comparison_check(pi1, pi2, Q, s_values=s_values)
        entries += len(rep.entries)
        failures += len(rep.failures)
        for e in rep.entries:
            if math.isfinite(e.margin):
                worst_margin = min(worst_margin, e.margin)
    return {"n_pairs": n_pairs, "entries_checked": entries,
            "failures": failures, "worst_margin": worst_margin,
            "passed": failures == 0}


def run_tv_campaign(n_chains: int = 100, seed: int = 501, horizon: int = 1000,
                    n_min: int = 4, n_max: int = 10,
                    s_values: Sequence[float] = (0.0, 0.01, 0.1)) -> dict:
    """Point-mass starts on the lowest-mass state of random lazy chains."""
    from .tempering import stream

    failures = 0
    entries = 0
    worst_margin = math.inf
    for idx in range(n_chains):
        rng = stream(seed, idx)
        n = int(rng.integers(n_min, n_max + 1))
        chain = random_reversible_chain(rng, n, make_lazy=True)
        nu = np.zeros(n)
        nu[int(np.argmin(chain.pi))] = 1.0
        rep = tv_mixing_bound_check(chain, nu, horizon, s_values=s_values)
        entries += len(rep.entries)
        failures += len(rep.failures)
        for e in rep.entries:
            if math.isfinite(e.margin):
                worst_margin = min(worst_margin, e.margin)
    return {"n_chains": n_chains, "entries_checked": entries,
            "failures": failures, "worst_margin": worst_margin,
            "passed": failures == 0}
