"""Iterative calibration of the level pseudo-weights.

The normalizer ratio between adjacent levels satisfies the importance
identity Z_{i+1}/Z_i = E_i[exp(-(beta_{i+1} - beta_i) U(X))], with the
expectation under the level-i tempered law.  Calibration bootstraps up the
ladder: run the sampler on the current prefix, estimate the next ratio from
the top-level samples, extend the pseudo-weights by minus the log ratio, and
repeat.  A final verification run checks that occupancy is near-uniform.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import InsufficientSamplesError, InvalidArgumentError
from .ladder import Ladder
from .targets import MixtureSpec, mixture_potential_batch
from .tempering import TemperingConfig, default_init, run_chain, stream

Array = np.ndarray

MIN_SAMPLES = 1000
BURN_IN_FRACTION = 0.1
_CAL_STREAM_BASE = 10_000
_VERIFY_STREAM = 20_000


@dataclass(frozen=True)
class RatioEstimate:
    """Normalizer ratio estimate with jackknife standard errors."""

    ratio: float
    se: float
    log_ratio: float
    log_se: float
    n: int


def estimate_level_ratio(samples: Array, spec: MixtureSpec, beta_i: float,
                         beta_next: float,
                         min_samples: int = MIN_SAMPLES,
                         blocks: Optional[int] = None) -> RatioEstimate:
    """Sample mean of exp(-(beta_next - beta_i) U(x)) over level-i draws.

    Computed in log space (max-shifted).  Standard errors come from a
    leave-one-block-out jackknife over contiguous blocks: on independent
    draws this matches the plain jackknife, and on chain slices the blocks
    absorb the autocorrelation the point-wise version would ignore.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    n = samples.shape[0]
    if n < min_samples:
        raise InsufficientSamplesError(
            f"need at least {min_samples} samples, got {n}")
    if beta_next < beta_i:
        raise InvalidArgumentError("need beta_next >= beta_i")
    if beta_next == beta_i:
        return RatioEstimate(ratio=1.0, se=0.0, log_ratio=0.0, log_se=0.0, n=n)
    if blocks is None:
        blocks = max(10, min(50, n // 20))
    blocks = min(blocks, n)
    if blocks < 2:
        raise InvalidArgumentError("need at least 2 jackknife blocks")
    a = -(beta_next - beta_i) * mixture_potential_batch(spec, samples)
    m = float(a.max())
    e = np.exp(a - m)
    s = float(e.sum())
    log_ratio = m + math.log(s / n)
    # leave-one-block-out means, still under the common shift m
    edges = np.linspace(0, n, blocks + 1).astype(int)
    block_sums = np.add.reduceat(e, edges[:-1])
    block_sizes = np.diff(edges)
    loo = (s - block_sums) / (n - block_sizes)
    log_loo = m + np.log(loo)
    B = blocks
    log_se = math.sqrt((B - 1) / B * float(((log_loo - log_loo.mean()) ** 2).sum()))
    ratio_loo = math.exp(m) * loo
    se = math.sqrt((B - 1) / B * float(((ratio_loo - ratio_loo.mean()) ** 2).sum()))
    return RatioEstimate(ratio=math.exp(log_ratio), se=se,
                         log_ratio=log_ratio, log_se=log_se, n=n)


@dataclass
class CalibrationReport:
    zeta: Array
    occupancy: Array
    ratio_estimates: List[RatioEstimate]
    budget_used: dict
    ok: bool
    occupancy_factor: float
    offending_levels: List[int] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "zeta": [float(z) for z in self.zeta],
            "occupancy": [float(o) for o in self.occupancy],
            "ratio_estimates": [
                {"ratio": r.ratio, "se": r.se, "log_ratio": r.log_ratio,
                 "log_se": r.log_se, "n": r.n} for r in self.ratio_estimates],
            "budget_used": self.budget_used,
            "ok": self.ok,
            "occupancy_factor": self.occupancy_factor,
            "offending_levels": self.offending_levels,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)


def calibrate_pseudo_weights(spec: MixtureSpec, ladder: Ladder,
                             config: TemperingConfig, per_level_budget: int,
                             verify_steps: int = 1_000_000,
                             occupancy_tolerance: float = 3.0,
                             min_samples: int = MIN_SAMPLES) -> CalibrationReport:
    """Bootstrap the pseudo-weights up the ladder, then verify occupancy.

    Stage i runs the sampler on the first i+1 levels with the weights found so
    far, discards a 10% burn-in, and estimates the next normalizer ratio from
    the level-i slice.  The verification run uses the full ladder and fresh
    randomness; occupancy within a factor ``occupancy_tolerance`` of uniform
    passes, anything else is reported (not raised) with the offending levels.
    """
    if per_level_budget < 10_000:
        raise InvalidArgumentError("per-level budget must be at least 10^4 steps")
    T = ladder.T
    zeta = np.zeros(T)
    estimates: List[RatioEstimate] = []
    stage_steps = []
    for i in range(T - 1):
        prefix = ladder.truncated(i + 1).with_zeta(zeta[: i + 1])
        rng = stream(config.seed, _CAL_STREAM_BASE + i)
        init = default_init(spec, prefix, rng)
        trace = run_chain(init, spec, prefix, config, per_level_budget,
                          stream_id=_CAL_STREAM_BASE + i)
        burn = int(BURN_IN_FRACTION * per_level_budget)
        xs = trace.positions_at_level(i, skip=burn)
        stage_steps.append(per_level_budget)
        est = estimate_level_ratio(xs, spec, float(ladder.betas[i]),
                                   float(ladder.betas[i + 1]),
                                   min_samples=min_samples)
        estimates.append(est)
        zeta[i + 1] = zeta[i] - est.log_ratio

    calibrated = ladder.with_zeta(zeta)
    if T == 1:
        occupancy = np.array([1.0])
        factor = 1.0
        offending: List[int] = []
    else:
        rng = stream(config.seed, _VERIFY_STREAM)
        init = default_init(spec, calibrated, rng)
        trace = run_chain(init, spec, calibrated, config, verify_steps,
                          stream_id=_VERIFY_STREAM)
        occupancy = trace.occupancy()
        with np.errstate(divide="ignore"):
            ratios = occupancy * T
            per_level = np.maximum(ratios, np.where(ratios > 0, 1.0 / ratios, np.inf))
        factor = float(per_level.max())
        offending = [int(i) for i in np.where(per_level > occupancy_tolerance)[0]]
    return CalibrationReport(
        zeta=zeta,
        occupancy=occupancy,
        ratio_estimates=estimates,
        budget_used={"per_level": stage_steps,
                     "verify": verify_steps if T > 1 else 0},
        ok=factor <= occupancy_tolerance,
        occupancy_factor=factor,
        offending_levels=offending,
    )
