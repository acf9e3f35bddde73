"""Simulated tempering chain, the augmented (level, label, position) chain,
and trajectory generation.

Both chains are Metropolis-Hastings samplers on top of shared proposal
machinery: with probability alpha a level move is proposed along the
adjacent-level kernel (rate q_adj each way, boundary mass held), otherwise a
position move from either the random-walk or the Langevin-drift proposal with
per-axis variance 2h/beta_i.  The Langevin drift is h * grad U(x) at every
level: the step size scales with temperature but the drift deliberately does
not, matching how a practitioner reuses one gradient routine across levels.

Move bookkeeping, variate layout and numerics live in the kernel backends
(``_chainpy`` / ``_speed``); this module owns configuration, dispatch,
summaries, and serialization.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ._backend import get_backend
from ._chainpy import (ACC_ACC, ACC_NUMREJ, ACC_REJ, MOVE_HOLD, MOVE_LABEL,
                       MOVE_SWAP_DOWN, MOVE_SWAP_UP, MOVE_X)
from . import _chainpy
from .errors import InvalidArgumentError, UnsupportedNormalizerError
from .ladder import Ladder
from .targets import (MixtureSpec, log_quadratic_normalizer, mixture_gradient,
                      mixture_potential, nearest_mode)

Array = np.ndarray

RWM = "rwm"
MALA = "mala"

MOVE_NAMES = {MOVE_HOLD: "hold", MOVE_X: "x-move", MOVE_SWAP_UP: "swap-up",
              MOVE_SWAP_DOWN: "swap-down", MOVE_LABEL: "label-move"}

_BLOCK = 1 << 16


def stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Counter-based generator keyed on (seed, stream id).

    Distinct stream ids give statistically independent streams for the same
    seed, which is how replicas derive their randomness.
    """
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
                    np.uint64(stream_id & 0xFFFFFFFFFFFFFFFF)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class TemperingConfig:
    proposal_kind: str = RWM
    h: float = 0.1
    alpha: float = 0.5
    q_adj: float = 0.5
    lazy: bool = False
    seed: int = 0
    zeta_override: Optional[Array] = None

    def __post_init__(self):
        if self.proposal_kind not in (RWM, MALA):
            raise InvalidArgumentError(f"unknown proposal kind {self.proposal_kind!r}")
        if self.h <= 0:
            raise InvalidArgumentError("step size h must be positive")
        if not 0 < self.alpha < 1:
            raise InvalidArgumentError("alpha must lie in (0, 1)")
        if not 0 < self.q_adj <= 0.5:
            raise InvalidArgumentError("q_adj must lie in (0, 1/2]")

    @property
    def kind_code(self) -> int:
        return 1 if self.proposal_kind == MALA else 0


@dataclass
class TemperingState:
    level: int
    x: Array

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)


@dataclass
class AugState:
    level: int
    label: int
    x: Array

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)


@dataclass(frozen=True)
class TraceRecord:
    step: int
    level: int
    label_nearest: int
    x1: float
    move_type: str
    accepted: bool

    def to_json(self) -> str:
        return json.dumps({
            "step": self.step, "level": self.level,
            "label_nearest": self.label_nearest, "x1": self.x1,
            "move_type": self.move_type, "accepted": self.accepted,
        })


def _zetas(ladder: Ladder, config: TemperingConfig) -> Array:
    if config.zeta_override is not None:
        z = np.asarray(config.zeta_override, dtype=float)
        if z.shape != ladder.betas.shape:
            raise InvalidArgumentError("zeta override length must match the ladder")
        return z
    return ladder.zeta


def default_init(spec: MixtureSpec, ladder: Ladder,
                 rng: np.random.Generator) -> TemperingState:
    """Hottest-level start: Gaussian around a uniformly chosen mode,
    per-axis variance 1/(beta_1 m)."""
    j = int(rng.integers(spec.K))
    scale = 1.0 / math.sqrt(ladder.betas[0] * spec.local.strong_convexity)
    x = spec.modes[j] + scale * rng.standard_normal(spec.d)
    return TemperingState(0, x)


@dataclass
class ChainTrace:
    """Dense per-step record of a chain run plus derived summaries.

    Row 0 holds the initial state; rows 1..n the post-step states.
    """

    spec: MixtureSpec
    ladder: Ladder
    config: TemperingConfig
    levels: Array
    xs: Array
    move: Array
    acc: Array
    labels: Optional[Array] = None
    augmented: bool = False
    backend: str = "python"
    stream_id: int = 0

    @property
    def n_steps(self) -> int:
        return len(self.levels) - 1

    def positions_at_level(self, level: int, skip: int = 0) -> Array:
        """Post-step positions while the chain sat at ``level``."""
        sel = self.levels[1 + skip:] == level
        return self.xs[1 + skip:][sel]

    def mode_projection(self) -> Array:
        """Inner product of positions with mu_1 - mu_2 (two-mode specs)."""
        if self.spec.K != 2:
            raise InvalidArgumentError("mode projection defined for K = 2")
        axis = self.spec.modes[0] - self.spec.modes[1]
        return self.xs @ axis

    def traversals(self) -> int:
        """Sign changes of the mode projection along the trajectory."""
        proj = self.mode_projection()
        sign = np.sign(proj)
        # carry the previous sign through exact zeros
        for t in range(1, len(sign)):
            if sign[t] == 0:
                sign[t] = sign[t - 1]
        return int(np.count_nonzero(np.diff(sign) != 0))

    def swap_acceptance(self) -> dict:
        """Per adjacent pair (i, i+1): attempted and accepted swap counts."""
        T = self.ladder.T
        attempts = np.zeros(T - 1, dtype=np.int64)
        accepted = np.zeros(T - 1, dtype=np.int64)
        prev = self.levels[:-1]
        move = self.move[1:]
        acc = self.acc[1:]
        up = move == MOVE_SWAP_UP
        down = move == MOVE_SWAP_DOWN
        for i in range(T - 1):
            sel = (up & (prev == i)) | (down & (prev == i + 1))
            attempts[i] = int(sel.sum())
            accepted[i] = int((acc[sel] == ACC_ACC).sum())
        return {"attempts": attempts, "accepted": accepted,
                "rates": np.where(attempts > 0, accepted / np.maximum(attempts, 1), np.nan)}

    def occupancy(self, skip: int = 0) -> Array:
        lv = self.levels[1 + skip:]
        if len(lv) == 0:
            lv = self.levels[:1]
        return np.bincount(lv, minlength=self.ladder.T) / len(lv)

    def numerical_rejects(self) -> int:
        return int((self.acc == ACC_NUMREJ).sum())

    def label_marginal(self) -> Array:
        if self.labels is None:
            raise InvalidArgumentError("label marginal requires an augmented-chain trace")
        lb = self.labels[1:]
        return np.bincount(lb, minlength=self.spec.K) / max(len(lb), 1)

    def summary(self, run_id: str = "run") -> dict:
        sw = self.swap_acceptance() if self.ladder.T > 1 else {
            "attempts": np.array([], dtype=np.int64),
            "accepted": np.array([], dtype=np.int64), "rates": np.array([])}
        out = {
            "run_id": run_id,
            "n_steps": self.n_steps,
            "seed": self.config.seed,
            "stream_id": self.stream_id,
            "backend": self.backend,
            "proposal": self.config.proposal_kind,
            "occupancy": self.occupancy().tolist(),
            "swap_attempts": sw["attempts"].tolist(),
            "swap_accepted": sw["accepted"].tolist(),
            "swap_rates": [None if np.isnan(v) else float(v) for v in sw["rates"]],
            "numerical_rejects": self.numerical_rejects(),
        }
        if self.spec.K == 2:
            out["mode_traversals"] = self.traversals()
        if self.augmented:
            out["label_marginal"] = self.label_marginal().tolist()
        return out

    def records(self, thin: int = 1):
        """TraceRecords at steps 0, thin, 2*thin, ... (step 0 is the start)."""
        if thin < 1:
            raise InvalidArgumentError("thin must be >= 1")
        recs = []
        for t in range(0, len(self.levels), thin):
            if self.augmented and self.labels is not None:
                lab = int(self.labels[t])
            else:
                lab = nearest_mode(self.spec, self.xs[t])
            recs.append(TraceRecord(
                step=t,
                level=int(self.levels[t]),
                label_nearest=lab,
                x1=float(self.xs[t, 0]),
                move_type=MOVE_NAMES[int(self.move[t])],
                accepted=bool(self.acc[t] != ACC_REJ and self.acc[t] != ACC_NUMREJ),
            ))
        return recs

    def to_jsonl(self, path, thin: int = 1) -> None:
        with open(path, "w") as fh:
            for rec in self.records(thin):
                fh.write(rec.to_json())
                fh.write("\n")


def _quadratic_log_c(spec: MixtureSpec, ladder: Ladder) -> Array:
    return np.array([log_quadratic_normalizer(spec.local, b) for b in ladder.betas])


def _generic_st_block(spec, betas, zetas, config, i0, x0, u, z,
                      out_level, out_x, out_move, out_acc):
    """Driver-compatible tempering block for arbitrary local potentials.

    Same variate layout and semantics as the kernel backends, but evaluates
    the mixture potential/gradient through the Python callables.
    """
    T = len(betas)
    kind = config.kind_code
    i = int(i0)
    x = np.array(x0, dtype=float)
    u_cur = mixture_potential(spec, x)
    grad = mixture_gradient(spec, x) if kind == 1 else None
    n = u.shape[0]
    for t in range(n):
        move = MOVE_HOLD
        acc = ACC_ACC
        if config.lazy and u[t, 0] < 0.5:
            pass
        elif u[t, 1] < config.alpha:
            if u[t, 2] < config.q_adj:
                ip, move = i - 1, MOVE_SWAP_DOWN
            elif u[t, 2] < 2.0 * config.q_adj:
                ip, move = i + 1, MOVE_SWAP_UP
            else:
                ip = i
            if ip < 0 or ip >= T:
                ip = i
            if ip == i:
                move = MOVE_HOLD
            else:
                logr = (zetas[ip] - zetas[i]) - (betas[ip] - betas[i]) * u_cur
                if math.log(u[t, 3]) < logr:
                    i = ip
                else:
                    acc = ACC_REJ
        else:
            move = MOVE_X
            sig = math.sqrt(2.0 * config.h / betas[i])
            if kind == 1:
                xp = (x - config.h * grad) + sig * z[t]
            else:
                xp = x + sig * z[t]
            try:
                u_prop = mixture_potential(spec, xp)
                grad_p = mixture_gradient(spec, xp) if kind == 1 else None
            except Exception:
                u_prop = math.inf
                grad_p = None
            if not math.isfinite(u_prop) or (kind == 1 and not np.all(np.isfinite(grad_p))):
                acc = ACC_NUMREJ
            else:
                logr = betas[i] * (u_cur - u_prop)
                if kind == 1:
                    fw = float(np.sum(((xp - x) + config.h * grad) ** 2))
                    bw = float(np.sum(((x - xp) + config.h * grad_p) ** 2))
                    logr += -(betas[i] / (4.0 * config.h)) * (bw - fw)
                if math.log(u[t, 3]) < logr:
                    x, u_cur, grad = xp, u_prop, grad_p
                else:
                    acc = ACC_REJ
        out_level[t] = i
        out_x[t] = x
        out_move[t] = move
        out_acc[t] = acc
    return i


def _generic_aux_block(spec, betas, zetas, log_c, config, i0, j0, x0, u, z,
                       out_level, out_label, out_x, out_move, out_acc):
    """Augmented-chain block for arbitrary local potentials (user log_c).

    Mirrors the kernel backends' semantics and variate layout.
    """
    T = len(betas)
    K = spec.K
    kind = config.kind_code
    i, j = int(i0), int(j0)
    x = np.array(x0, dtype=float)
    f_cur = spec.local.value(x - spec.modes[j])
    grad = None
    n = u.shape[0]
    for t in range(n):
        move = MOVE_HOLD
        acc = ACC_ACC
        if config.lazy and u[t, 0] < 0.5:
            pass
        elif u[t, 1] < 0.5:
            fvals = np.array([spec.local.value(x - spec.modes[l]) for l in range(K)])
            e = spec.log_weights - betas[i] * fvals
            e -= e.max()
            p = np.exp(e)
            p /= p.sum()
            cum = 0.0
            pick = K - 1
            for l in range(K):
                cum += p[l]
                if u[t, 2] < cum:
                    pick = l
                    break
            j = pick
            f_cur = float(fvals[j])
            grad = None
            move = MOVE_LABEL
        elif u[t, 2] < config.alpha:
            if u[t, 3] < config.q_adj:
                ip, move = i - 1, MOVE_SWAP_DOWN
            elif u[t, 3] < 2.0 * config.q_adj:
                ip, move = i + 1, MOVE_SWAP_UP
            else:
                ip = i
            if ip < 0 or ip >= T:
                ip = i
            if ip == i:
                move = MOVE_HOLD
            else:
                logr = ((zetas[ip] - zetas[i]) + (log_c[i] - log_c[ip])
                        - (betas[ip] - betas[i]) * f_cur)
                if math.log(u[t, 4]) < logr:
                    i = ip
                else:
                    acc = ACC_REJ
        else:
            move = MOVE_X
            sig = math.sqrt(2.0 * config.h / betas[i])
            if kind == 1:
                if grad is None:
                    grad = mixture_gradient(spec, x)
                xp = (x - config.h * grad) + sig * z[t]
            else:
                xp = x + sig * z[t]
            f_prop = spec.local.value(xp - spec.modes[j])
            grad_p = None
            ok = math.isfinite(f_prop)
            if ok and kind == 1:
                try:
                    grad_p = mixture_gradient(spec, xp)
                except Exception:
                    ok = False
            if not ok:
                acc = ACC_NUMREJ
            else:
                logr = betas[i] * (f_cur - f_prop)
                if kind == 1:
                    fw = float(np.sum(((xp - x) + config.h * grad) ** 2))
                    bw = float(np.sum(((x - xp) + config.h * grad_p) ** 2))
                    logr += -(betas[i] / (4.0 * config.h)) * (bw - fw)
                if math.log(u[t, 4]) < logr:
                    x, f_cur = xp, float(f_prop)
                    if kind == 1:
                        grad = grad_p
                else:
                    acc = ACC_REJ
        out_level[t] = i
        out_label[t] = j
        out_x[t] = x
        out_move[t] = move
        out_acc[t] = acc
    return i, j


def run_chain(init: Union[TemperingState, AugState], spec: MixtureSpec,
              ladder: Ladder, config: TemperingConfig, n_steps: int,
              thin: int = 1, stream_id: int = 0,
              log_c: Optional[Array] = None,
              backend: Optional[str] = None) -> ChainTrace:
    """Run one chain for ``n_steps`` transitions; deterministic given
    (config.seed, stream_id).

    A ``TemperingState`` start runs the simulated tempering chain over
    (level, position); an ``AugState`` start runs the augmented chain over
    (level, label, position), which needs analytic normalizers (built-in
    quadratics) or an explicit ``log_c`` table.
    """
    if n_steps < 0:
        raise InvalidArgumentError("n_steps must be nonnegative")
    if thin < 1:
        raise InvalidArgumentError("thin must be >= 1")
    augmented = isinstance(init, AugState)
    d = spec.d
    T = ladder.T
    zetas = _zetas(ladder, config)
    if not 0 <= init.level < T:
        raise InvalidArgumentError("initial level out of range")
    if augmented and not 0 <= init.label < spec.K:
        raise InvalidArgumentError("initial label out of range")

    levels = np.empty(n_steps + 1, dtype=np.int32)
    xs = np.empty((n_steps + 1, d), dtype=float)
    move = np.empty(n_steps + 1, dtype=np.int8)
    acc = np.empty(n_steps + 1, dtype=np.int8)
    labels = np.empty(n_steps + 1, dtype=np.int32) if augmented else None
    levels[0] = init.level
    xs[0] = init.x
    move[0] = MOVE_HOLD
    acc[0] = ACC_ACC
    if augmented:
        labels[0] = init.label

    quadratic = spec.local.diag is not None
    if augmented:
        if log_c is None:
            if not quadratic:
                raise UnsupportedNormalizerError(
                    "augmented chain needs analytic normalizers or a log_c table")
            log_c = _quadratic_log_c(spec, ladder)
        else:
            log_c = np.asarray(log_c, dtype=float)
            if log_c.shape != ladder.betas.shape:
                raise InvalidArgumentError("log_c must have one entry per level")

    kern = get_backend(backend)
    if not quadratic:
        kern = None  # generic python path (needs log_c for augmented runs)

    rng = stream(config.seed, stream_id)
    n_uni = 5 if augmented else 4
    i_cur = int(init.level)
    j_cur = int(init.label) if augmented else 0
    x_cur = np.array(init.x, dtype=float)

    done = 0
    while done < n_steps:
        nb = min(_BLOCK, n_steps - done)
        u = rng.random((nb, n_uni))
        z = rng.standard_normal((nb, d))
        lo, hi = 1 + done, 1 + done + nb
        if kern is None and augmented:
            i_cur, j_cur = _generic_aux_block(
                spec, ladder.betas, zetas, log_c, config, i_cur, j_cur, x_cur,
                u, z, levels[lo:hi], labels[lo:hi], xs[lo:hi], move[lo:hi],
                acc[lo:hi])
        elif kern is None:
            i_cur = _generic_st_block(
                spec, ladder.betas, zetas, config, i_cur, x_cur, u, z,
                levels[lo:hi], xs[lo:hi], move[lo:hi], acc[lo:hi])
        elif augmented:
            i_cur, j_cur = kern.aux_block(
                ladder.betas, zetas, log_c, spec.local.diag, spec.modes,
                spec.log_weights, config.alpha, config.q_adj, config.h,
                config.kind_code, int(config.lazy), i_cur, j_cur, x_cur, u, z,
                levels[lo:hi], labels[lo:hi], xs[lo:hi], move[lo:hi], acc[lo:hi])
        else:
            i_cur = kern.st_block(
                ladder.betas, zetas, spec.local.diag, spec.modes,
                spec.log_weights, config.alpha, config.q_adj, config.h,
                config.kind_code, int(config.lazy), i_cur, x_cur, u, z,
                levels[lo:hi], xs[lo:hi], move[lo:hi], acc[lo:hi])
        x_cur = xs[hi - 1].copy()
        done += nb

    name = kern.BACKEND_NAME if kern is not None else "python-generic"
    return ChainTrace(spec=spec, ladder=ladder, config=config, levels=levels,
                      xs=xs, move=move, acc=acc, labels=labels,
                      augmented=augmented, backend=name, stream_id=stream_id)


def st_step(state: TemperingState, spec: MixtureSpec, ladder: Ladder,
            config: TemperingConfig, rng: np.random.Generator):
    """One tempering transition; returns (new state, trace record)."""
    zetas = _zetas(ladder, config)
    d = spec.d
    u = rng.random((1, 4))
    z = rng.standard_normal((1, d))
    levels = np.empty(1, dtype=np.int32)
    xs = np.empty((1, d), dtype=float)
    move = np.empty(1, dtype=np.int8)
    acc = np.empty(1, dtype=np.int8)
    if spec.local.diag is not None:
        _chainpy.st_block(ladder.betas, zetas, spec.local.diag, spec.modes,
                          spec.log_weights, config.alpha, config.q_adj, config.h,
                          config.kind_code, int(config.lazy), state.level,
                          state.x, u, z, levels, xs, move, acc)
    else:
        _generic_st_block(spec, ladder.betas, zetas, config, state.level,
                          state.x, u, z, levels, xs, move, acc)
    new = TemperingState(int(levels[0]), xs[0].copy())
    rec = TraceRecord(step=1, level=new.level,
                      label_nearest=nearest_mode(spec, new.x),
                      x1=float(new.x[0]), move_type=MOVE_NAMES[int(move[0])],
                      accepted=bool(acc[0] == ACC_ACC))
    return new, rec


def aux_joint_step(state: AugState, spec: MixtureSpec, ladder: Ladder,
                   config: TemperingConfig, rng: np.random.Generator,
                   log_c: Optional[Array] = None) -> AugState:
    """One augmented-chain transition preserving the joint (level, label, x) law."""
    zetas = _zetas(ladder, config)
    if log_c is None:
        if spec.local.diag is None:
            raise UnsupportedNormalizerError(
                "augmented chain needs analytic normalizers or a log_c table")
        log_c = _quadratic_log_c(spec, ladder)
    else:
        log_c = np.asarray(log_c, dtype=float)
    d = spec.d
    u = rng.random((1, 5))
    z = rng.standard_normal((1, d))
    levels = np.empty(1, dtype=np.int32)
    labels = np.empty(1, dtype=np.int32)
    xs = np.empty((1, d), dtype=float)
    move = np.empty(1, dtype=np.int8)
    acc = np.empty(1, dtype=np.int8)
    if spec.local.diag is None:
        _generic_aux_block(spec, ladder.betas, zetas, log_c, config,
                           state.level, state.label, state.x, u, z,
                           levels, labels, xs, move, acc)
    else:
        _chainpy.aux_block(ladder.betas, zetas, log_c, spec.local.diag, spec.modes,
                           spec.log_weights, config.alpha, config.q_adj, config.h,
                           config.kind_code, int(config.lazy), state.level,
                           state.label, state.x, u, z, levels, labels, xs, move, acc)
    return AugState(int(levels[0]), int(labels[0]), xs[0].copy())


# ---------------------------------------------------------------------------
# Log-acceptance helpers shared by tests and the finite-bin reversibility check
# ---------------------------------------------------------------------------

def level_log_accept(betas, zetas, i: int, ip: int, potential_at_x: float) -> float:
    """log acceptance ratio of a level move at fixed x (adjacent kernel is
    symmetric, so the proposal term cancels)."""
    return float(zetas[ip] - zetas[i] - (betas[ip] - betas[i]) * potential_at_x)


def x_log_accept(beta: float, h: float, kind: str, x, xp,
                 pot_x: float, pot_xp: float, grad_x=None, grad_xp=None) -> float:
    """log acceptance ratio of a position move for a target with potential
    beta * pot and the shared proposal family."""
    logr = beta * (pot_x - pot_xp)
    if kind == MALA:
        x = np.asarray(x, float)
        xp = np.asarray(xp, float)
        fw = float(np.sum(((xp - x) + h * np.asarray(grad_x)) ** 2))
        bw = float(np.sum(((x - xp) + h * np.asarray(grad_xp)) ** 2))
        logr += -(beta / (4.0 * h)) * (bw - fw)
    return float(logr)


def rwm_log_proposal_density(beta: float, h: float, x, y) -> float:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    d = len(x)
    var = 2.0 * h / beta
    return float(-0.5 * d * math.log(2.0 * math.pi * var)
                 - np.sum((y - x) ** 2) / (2.0 * var))


def mala_log_proposal_density(beta: float, h: float, x, y, grad_x) -> float:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    d = len(x)
    var = 2.0 * h / beta
    mean = x - h * np.asarray(grad_x)
    return float(-0.5 * d * math.log(2.0 * math.pi * var)
                 - np.sum((y - mean) ** 2) / (2.0 * var))
