"""Pure-Python chain kernels: the fallback backend.

These mirror the compiled kernels in ``_speed.pyx`` operation for operation
(same loop order, same libm calls, same pre-drawn variate layout), so both
backends produce bit-identical trajectories from the same random blocks.
Keep the two files in sync when changing step semantics.

Variate layout per step:
  tempering chain: uniforms (lazy, move, direction, accept), d normals
  augmented chain: uniforms (lazy, branch, select, direction, accept), d normals

Move codes: 0 hold, 1 x-move, 2 swap-up, 3 swap-down, 4 label-move.
Accept codes: 0 rejected, 1 accepted, 2 numerical reject.
"""

from __future__ import annotations

import math

import numpy as np

MOVE_HOLD = 0
MOVE_X = 1
MOVE_SWAP_UP = 2
MOVE_SWAP_DOWN = 3
MOVE_LABEL = 4

ACC_REJ = 0
ACC_ACC = 1
ACC_NUMREJ = 2

BACKEND_NAME = "python"


def _mix_potential(adiag, modes, logw, x, scratch):
    """U(x) for the diagonal-quadratic mixture; scratch holds per-component exponents."""
    K = len(logw)
    d = len(adiag)
    m = -math.inf
    for j in range(K):
        acc = 0.0
        for k in range(d):
            dv = x[k] - modes[j][k]
            acc += adiag[k] * dv * dv
        e = logw[j] - 0.5 * acc
        scratch[j] = e
        if e > m:
            m = e
    if m == -math.inf or m != m:
        return math.inf
    s = 0.0
    for j in range(K):
        s += math.exp(scratch[j] - m)
    return -(m + math.log(s))


def _mix_gradient(adiag, modes, logw, x, scratch, grad):
    """grad U(x); returns False when any component is non-finite.

    ``scratch`` must already hold the exponents from ``_mix_potential`` at x.
    """
    K = len(logw)
    d = len(adiag)
    m = scratch[0]
    for j in range(1, K):
        if scratch[j] > m:
            m = scratch[j]
    s = 0.0
    for j in range(K):
        s += math.exp(scratch[j] - m)
    ok = True
    for k in range(d):
        g = 0.0
        for j in range(K):
            w = math.exp(scratch[j] - m) / s
            g += w * (adiag[k] * (x[k] - modes[j][k]))
        grad[k] = g
        if not math.isfinite(g):
            ok = False
    return ok


def st_block(betas, zetas, adiag, modes, logw, alpha, q_adj, h, kind, lazy,
             i0, x0, u, z, out_level, out_x, out_move, out_acc):
    """Run one block of simulated tempering steps.

    ``u`` is (n, 4) uniforms, ``z`` is (n, d) standard normals; outputs are
    filled per step with the post-step state.  Returns the final level.
    """
    betas = [float(v) for v in betas]
    zetas = [float(v) for v in zetas]
    adiag = [float(v) for v in adiag]
    modes = [[float(v) for v in row] for row in np.asarray(modes)]
    logw = [float(v) for v in logw]
    T = len(betas)
    d = len(adiag)
    K = len(logw)
    n = u.shape[0]
    ul = u.tolist()
    zl = z.tolist()
    x = [float(v) for v in x0]
    xp = [0.0] * d
    grad = [0.0] * d
    grad_p = [0.0] * d
    scratch = [0.0] * K
    i = int(i0)

    u_cur = _mix_potential(adiag, modes, logw, x, scratch)
    if not math.isfinite(u_cur):
        raise ValueError("initial state has non-finite potential")
    if kind == 1:
        if not _mix_gradient(adiag, modes, logw, x, scratch, grad):
            raise ValueError("initial state has non-finite gradient")

    for t in range(n):
        ut = ul[t]
        zt = zl[t]
        move = MOVE_HOLD
        acc = ACC_ACC
        if lazy and ut[0] < 0.5:
            pass  # lazy hold
        elif ut[1] < alpha:
            # level move proposed per the adjacent kernel; boundary mass holds
            if ut[2] < q_adj:
                ip = i - 1
                move = MOVE_SWAP_DOWN
            elif ut[2] < 2.0 * q_adj:
                ip = i + 1
                move = MOVE_SWAP_UP
            else:
                ip = i
            if ip < 0 or ip >= T:
                ip = i
            if ip == i:
                move = MOVE_HOLD
            else:
                logr = (zetas[ip] - zetas[i]) - (betas[ip] - betas[i]) * u_cur
                if math.log(ut[3]) < logr:
                    i = ip
                    acc = ACC_ACC
                else:
                    acc = ACC_REJ
        else:
            move = MOVE_X
            sig = math.sqrt(2.0 * h / betas[i])
            if kind == 1:
                for k in range(d):
                    xp[k] = (x[k] - h * grad[k]) + sig * zt[k]
            else:
                for k in range(d):
                    xp[k] = x[k] + sig * zt[k]
            u_prop = _mix_potential(adiag, modes, logw, xp, scratch)
            if not math.isfinite(u_prop):
                acc = ACC_NUMREJ
            else:
                grad_ok = True
                if kind == 1:
                    grad_ok = _mix_gradient(adiag, modes, logw, xp, scratch, grad_p)
                if not grad_ok:
                    acc = ACC_NUMREJ
                else:
                    logr = betas[i] * (u_cur - u_prop)
                    if kind == 1:
                        fw = 0.0
                        bw = 0.0
                        for k in range(d):
                            dfw = (xp[k] - x[k]) + h * grad[k]
                            dbw = (x[k] - xp[k]) + h * grad_p[k]
                            fw += dfw * dfw
                            bw += dbw * dbw
                        logr += -(betas[i] / (4.0 * h)) * (bw - fw)
                    if math.log(ut[3]) < logr:
                        for k in range(d):
                            x[k] = xp[k]
                        u_cur = u_prop
                        if kind == 1:
                            for k in range(d):
                                grad[k] = grad_p[k]
                        acc = ACC_ACC
                    else:
                        acc = ACC_REJ
        out_level[t] = i
        for k in range(d):
            out_x[t, k] = x[k]
        out_move[t] = move
        out_acc[t] = acc
    return i


def aux_block(betas, zetas, log_c, adiag, modes, logw, alpha, q_adj, h, kind, lazy,
              i0, j0, x0, u, z, out_level, out_label, out_x, out_move, out_acc):
    """Run one block of the augmented (level, label, position) chain.

    Label resamples draw from the full conditional and always accept; the
    remaining mass follows the tempering proposal with component-wise
    acceptance ratios that use the analytic normalizers ``log_c``.
    """
    betas = [float(v) for v in betas]
    zetas = [float(v) for v in zetas]
    log_c = [float(v) for v in log_c]
    adiag = [float(v) for v in adiag]
    modes = [[float(v) for v in row] for row in np.asarray(modes)]
    logw = [float(v) for v in logw]
    T = len(betas)
    d = len(adiag)
    K = len(logw)
    n = u.shape[0]
    ul = u.tolist()
    zl = z.tolist()
    x = [float(v) for v in x0]
    xp = [0.0] * d
    grad = [0.0] * d
    grad_p = [0.0] * d
    scratch = [0.0] * K
    fvals = [0.0] * K
    i = int(i0)
    j = int(j0)

    def f_at(xv, jj):
        acc = 0.0
        for k in range(d):
            dv = xv[k] - modes[jj][k]
            acc += adiag[k] * dv * dv
        return 0.5 * acc

    f_cur = f_at(x, j)
    have_grad = False

    for t in range(n):
        ut = ul[t]
        zt = zl[t]
        move = MOVE_HOLD
        acc = ACC_ACC
        if lazy and ut[0] < 0.5:
            pass
        elif ut[1] < 0.5:
            # Gibbs label resample from the full conditional, always accepted
            m = -math.inf
            for l in range(K):
                fvals[l] = f_at(x, l)
                e = logw[l] - betas[i] * fvals[l]
                scratch[l] = e
                if e > m:
                    m = e
            s = 0.0
            for l in range(K):
                s += math.exp(scratch[l] - m)
            cum = 0.0
            pick = K - 1
            for l in range(K):
                cum += math.exp(scratch[l] - m) / s
                if ut[2] < cum:
                    pick = l
                    break
            j = pick
            f_cur = fvals[j]
            have_grad = False
            move = MOVE_LABEL
        elif ut[2] < alpha:
            if ut[3] < q_adj:
                ip = i - 1
                move = MOVE_SWAP_DOWN
            elif ut[3] < 2.0 * q_adj:
                ip = i + 1
                move = MOVE_SWAP_UP
            else:
                ip = i
            if ip < 0 or ip >= T:
                ip = i
            if ip == i:
                move = MOVE_HOLD
            else:
                logr = ((zetas[ip] - zetas[i]) + (log_c[i] - log_c[ip])
                        - (betas[ip] - betas[i]) * f_cur)
                if math.log(ut[4]) < logr:
                    i = ip
                    acc = ACC_ACC
                else:
                    acc = ACC_REJ
        else:
            move = MOVE_X
            sig = math.sqrt(2.0 * h / betas[i])
            if kind == 1:
                if not have_grad:
                    _mix_potential(adiag, modes, logw, x, scratch)
                    if not _mix_gradient(adiag, modes, logw, x, scratch, grad):
                        raise ValueError("non-finite gradient at current state")
                    have_grad = True
                for k in range(d):
                    xp[k] = (x[k] - h * grad[k]) + sig * zt[k]
            else:
                for k in range(d):
                    xp[k] = x[k] + sig * zt[k]
            f_prop = f_at(xp, j)
            if not math.isfinite(f_prop):
                acc = ACC_NUMREJ
            else:
                grad_ok = True
                if kind == 1:
                    _mix_potential(adiag, modes, logw, xp, scratch)
                    grad_ok = _mix_gradient(adiag, modes, logw, xp, scratch, grad_p)
                if not grad_ok:
                    acc = ACC_NUMREJ
                else:
                    logr = betas[i] * (f_cur - f_prop)
                    if kind == 1:
                        fw = 0.0
                        bw = 0.0
                        for k in range(d):
                            dfw = (xp[k] - x[k]) + h * grad[k]
                            dbw = (x[k] - xp[k]) + h * grad_p[k]
                            fw += dfw * dfw
                            bw += dbw * dbw
                        logr += -(betas[i] / (4.0 * h)) * (bw - fw)
                    if math.log(ut[4]) < logr:
                        for k in range(d):
                            x[k] = xp[k]
                        f_cur = f_prop
                        if kind == 1:
                            for k in range(d):
                                grad[k] = grad_p[k]
                            have_grad = True
                        acc = ACC_ACC
                    else:
                        acc = ACC_REJ
        out_level[t] = i
        out_label[t] = j
        for k in range(d):
            out_x[t, k] = x[k]
        out_move[t] = move
        out_acc[t] = acc
    return i, j


def cut_scan(F, pi, s_list):
    """Exact subset scan for s-conductance via Gray-code enumeration.

    ``F`` is the symmetric flow matrix pi_x P(x, y); for each s the scan finds
    inf over subsets with mass in (s, 1/2] of flow(A, A^c) / (mass(A) - s).
    Returns (values, argmin bitmasks, found flags, half_gap, half_mask) where
    half_gap is the smallest |mass(A) - 1/2| seen and each returned value is
    recomputed exactly from its argmin subset in canonical index order.
    """
    F = np.asarray(F, dtype=float)
    pi = np.asarray(pi, dtype=float)
    n = len(pi)
    ns = len(s_list)
    rowsum = F.sum(axis=1)
    tvec = np.zeros(n)
    mass = 0.0
    flow = 0.0
    mask = 0
    best = [math.inf] * ns
    best_mask = [0] * ns
    found = [False] * ns
    half_gap = 0.5  # |mass - 1/2| for the empty set
    half_mask = 0
    for step in range(1, 1 << n):
        k = (step & -step).bit_length() - 1
        bit = 1 << k
        if mask & bit:
            flow -= rowsum[k] - 2.0 * tvec[k] + F[k, k]
            tvec -= F[:, k]
            mass -= pi[k]
            mask ^= bit
        else:
            flow += rowsum[k] - 2.0 * tvec[k] - F[k, k]
            tvec += F[:, k]
            mass += pi[k]
            mask ^= bit
        gap = abs(mass - 0.5)
        if gap < half_gap:
            half_gap = gap
            half_mask = mask
        for q in range(ns):
            s = s_list[q]
            if s < mass <= 0.5:
                ratio = flow / (mass - s)
                if ratio < best[q]:
                    best[q] = ratio
                    best_mask[q] = mask
                    found[q] = True
    # recompute winners exactly in canonical order (kills incremental drift)
    values = []
    for q in range(ns):
        if not found[q]:
            values.append(math.inf)
            continue
        idx = [k for k in range(n) if best_mask[q] >> k & 1]
        inA = np.zeros(n, dtype=bool)
        inA[idx] = True
        m_exact = float(pi[inA].sum())
        f_exact = float(F[np.ix_(inA, ~inA)].sum())
        values.append(f_exact / (m_exact - s_list[q]))
    return (np.array(values), np.array(best_mask, dtype=np.int64),
            np.array(found, dtype=bool), half_gap, half_mask)
