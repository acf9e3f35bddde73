# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled chain kernels: the fast backend.

Mirrors ``_chainpy.py`` operation for operation (same loop order, same libm
calls, same pre-drawn variate layout) so both backends produce bit-identical
trajectories from the same random blocks.  Keep the two files in sync when
changing step semantics.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, sqrt, isfinite, INFINITY

BACKEND_NAME = "compiled"

DEF MOVE_HOLD = 0
DEF MOVE_X = 1
DEF MOVE_SWAP_UP = 2
DEF MOVE_SWAP_DOWN = 3
DEF MOVE_LABEL = 4

DEF ACC_REJ = 0
DEF ACC_ACC = 1
DEF ACC_NUMREJ = 2


cdef double _mix_potential(double[::1] adiag, double[:, ::1] modes, double[::1] logw,
                           double* x, double* scratch) noexcept nogil:
    cdef Py_ssize_t K = logw.shape[0]
    cdef Py_ssize_t d = adiag.shape[0]
    cdef Py_ssize_t j, k
    cdef double m = -INFINITY
    cdef double acc, dv, e, s
    for j in range(K):
        acc = 0.0
        for k in range(d):
            dv = x[k] - modes[j, k]
            acc += adiag[k] * dv * dv
        e = logw[j] - 0.5 * acc
        scratch[j] = e
        if e > m:
            m = e
    if m == -INFINITY or m != m:
        return INFINITY
    s = 0.0
    for j in range(K):
        s += exp(scratch[j] - m)
    return -(m + log(s))


cdef bint _mix_gradient(double[::1] adiag, double[:, ::1] modes, double[::1] logw,
                        double* x, double* scratch, double* grad) noexcept nogil:
    cdef Py_ssize_t K = logw.shape[0]
    cdef Py_ssize_t d = adiag.shape[0]
    cdef Py_ssize_t j, k
    cdef double m = scratch[0]
    cdef double s, g, w
    cdef bint ok = True
    for j in range(1, K):
        if scratch[j] > m:
            m = scratch[j]
    s = 0.0
    for j in range(K):
        s += exp(scratch[j] - m)
    for k in range(d):
        g = 0.0
        for j in range(K):
            w = exp(scratch[j] - m) / s
            g += w * (adiag[k] * (x[k] - modes[j, k]))
        grad[k] = g
        if not isfinite(g):
            ok = False
    return ok


def st_block(double[::1] betas, double[::1] zetas, double[::1] adiag,
             double[:, ::1] modes, double[::1] logw,
             double alpha, double q_adj, double h, int kind, int lazy,
             int i0, double[::1] x0, double[:, ::1] u, double[:, ::1] z,
             int[::1] out_level, double[:, ::1] out_x,
             signed char[::1] out_move, signed char[::1] out_acc):
    cdef Py_ssize_t T = betas.shape[0]
    cdef Py_ssize_t d = adiag.shape[0]
    cdef Py_ssize_t K = logw.shape[0]
    cdef Py_ssize_t n = u.shape[0]
    cdef cnp.ndarray[double, ndim=1] xbuf = np.empty(d)
    cdef cnp.ndarray[double, ndim=1] xpbuf = np.empty(d)
    cdef cnp.ndarray[double, ndim=1] gbuf = np.empty(d)
    cdef cnp.ndarray[double, ndim=1] gpbuf = np.empty(d)
    cdef cnp.ndarray[double, ndim=1] sbuf = np.empty(K)
    cdef double* x = <double*> xbuf.data
    cdef double* xp = <double*> xpbuf.data
    cdef double* grad = <double*> gbuf.data
    cdef double* grad_p = <double*> gpbuf.data
    cdef double* scratch = <double*> sbuf.data
    cdef Py_ssize_t t, k
    cdef int i = i0, ip, move, acc
    cdef double u_cur, u_prop, sig, logr, fw, bw, dfw, dbw
    cdef bint grad_ok

    for k in range(d):
        x[k] = x0[k]
    u_cur = _mix_potential(adiag, modes, logw, x, scratch)
    if not isfinite(u_cur):
        raise ValueError("initial state has non-finite potential")
    if kind == 1:
        if not _mix_gradient(adiag, modes, logw, x, scratch, grad):
            raise ValueError("initial state has non-finite gradient")

    with nogil:
        for t in range(n):
            move = MOVE_HOLD
            acc = ACC_ACC
            if lazy and u[t, 0] < 0.5:
                pass
            elif u[t, 1] < alpha:
                if u[t, 2] < q_adj:
                    ip = i - 1
                    move = MOVE_SWAP_DOWN
                elif u[t, 2] < 2.0 * q_adj:
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
                    if log(u[t, 3]) < logr:
                        i = ip
                        acc = ACC_ACC
                    else:
                        acc = ACC_REJ
            else:
                move = MOVE_X
                sig = sqrt(2.0 * h / betas[i])
                if kind == 1:
                    for k in range(d):
                        xp[k] = (x[k] - h * grad[k]) + sig * z[t, k]
                else:
                    for k in range(d):
                        xp[k] = x[k] + sig * z[t, k]
                u_prop = _mix_potential(adiag, modes, logw, xp, scratch)
                if not isfinite(u_prop):
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
                        if log(u[t, 3]) < logr:
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
            out_move[t] = <signed char> move
            out_acc[t] = <signed char> acc
    return i


cdef double _f_at(double[::1] adiag, double[:, ::1] modes, double* xv,
                  Py_ssize_t jj) noexcept nogil:
    cdef Py_ssize_t d = adiag.shape[0]
    cdef Py_ssize_t k
    cdef double acc = 0.0, dv
    for k in range(d):
        dv = xv[k] - modes[jj, k]
        acc += adiag[k] * dv * dv
    return 0.5 * acc


def aux_block(double[::1] betas, double[::1] zetas, double[::1] log_c,
              double[::1] adiag, double[:, ::1] modes, double[::1] logw,
              double alpha, double q_adj, double h, int kind, int lazy,
              int i0, int j0, double[::1] x0, double[:, ::1] u, double[:, ::1] z,
              int[::1] out_level, int[::1] out_label, double[:, ::1] out_x,
              signed char[::1] out_move, signed char[::1] out_acc):
    cdef Py_ssize_t T = betas.shape[0]
    cdef Py_ssize_t d = adiag.shape[0]
    cdef Py_ssize_t K = logw.shape[0]
    cdef Py_ssize_t n = u.shape[0]
    cdef cnp.ndarray[double, ndim=1] xbuf = np.empty(d)
    cdef cnp.ndarray[double, ndim=1] xpbuf = np.empty(d)
    cdef cnp.ndarray[double, ndim=1] gbuf = np.empty(d)
    cdef cnp.ndarray[double, ndim=1] gpbuf = np.empty(d)
    cdef cnp.ndarray[double, ndim=1] sbuf = np.empty(K)
    cdef cnp.ndarray[double, ndim=1] fbuf = np.empty(K)
    cdef double* x = <double*> xbuf.data
    cdef double* xp = <double*> xpbuf.data
    cdef double* grad = <double*> gbuf.data
    cdef double* grad_p = <double*> gpbuf.data
    cdef double* scratch = <double*> sbuf.data
    cdef double* fvals = <double*> fbuf.data
    cdef Py_ssize_t t, k, l
    cdef int i = i0, j = j0, ip, move, acc, pick
    cdef double f_cur, f_prop, sig, logr, fw, bw, dfw, dbw, m, s, cum, e
    cdef bint have_grad = False, grad_ok, err_grad = False

    for k in range(d):
        x[k] = x0[k]
    f_cur = _f_at(adiag, modes, x, j)

    with nogil:
        for t in range(n):
            move = MOVE_HOLD
            acc = ACC_ACC
            if lazy and u[t, 0] < 0.5:
                pass
            elif u[t, 1] < 0.5:
                m = -INFINITY
                for l in range(K):
                    fvals[l] = _f_at(adiag, modes, x, l)
                    e = logw[l] - betas[i] * fvals[l]
                    scratch[l] = e
                    if e > m:
                        m = e
                s = 0.0
                for l in range(K):
                    s += exp(scratch[l] - m)
                cum = 0.0
                pick = K - 1
                for l in range(K):
                    cum += exp(scratch[l] - m) / s
                    if u[t, 2] < cum:
                        pick = l
                        break
                j = pick
                f_cur = fvals[j]
                have_grad = False
                move = MOVE_LABEL
            elif u[t, 2] < alpha:
                if u[t, 3] < q_adj:
                    ip = i - 1
                    move = MOVE_SWAP_DOWN
                elif u[t, 3] < 2.0 * q_adj:
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
                    if log(u[t, 4]) < logr:
                        i = ip
                        acc = ACC_ACC
                    else:
                        acc = ACC_REJ
            else:
                move = MOVE_X
                sig = sqrt(2.0 * h / betas[i])
                if kind == 1:
                    if not have_grad:
                        _mix_potential(adiag, modes, logw, x, scratch)
                        if not _mix_gradient(adiag, modes, logw, x, scratch, grad):
                            err_grad = True
                            break
                        have_grad = True
                    for k in range(d):
                        xp[k] = (x[k] - h * grad[k]) + sig * z[t, k]
                else:
                    for k in range(d):
                        xp[k] = x[k] + sig * z[t, k]
                f_prop = _f_at(adiag, modes, xp, j)
                if not isfinite(f_prop):
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
                        if log(u[t, 4]) < logr:
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
            out_move[t] = <signed char> move
            out_acc[t] = <signed char> acc
    if err_grad:
        raise ValueError("non-finite gradient at current state")
    return i, j


def cut_scan(double[:, ::1] F, double[::1] pi, s_list):
    """Exact subset scan for s-conductance via Gray-code enumeration.

    Same contract as the fallback version; winners are recomputed exactly in
    canonical index order.
    """
    cdef Py_ssize_t n = pi.shape[0]
    cdef Py_ssize_t ns = len(s_list)
    cdef cnp.ndarray[double, ndim=1] svals = np.asarray(s_list, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] rowsum_np = np.asarray(F).sum(axis=1)
    cdef double[::1] rowsum = rowsum_np
    cdef cnp.ndarray[double, ndim=1] tbuf = np.zeros(n)
    cdef double* tvec = <double*> tbuf.data
    cdef cnp.ndarray[double, ndim=1] bbuf = np.full(ns, np.inf)
    cdef double* best = <double*> bbuf.data
    cdef cnp.ndarray[cnp.int64_t, ndim=1] mbuf = np.zeros(ns, dtype=np.int64)
    cdef cnp.int64_t* best_mask = <cnp.int64_t*> mbuf.data
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] fbuf = np.zeros(ns, dtype=np.uint8)
    cdef cnp.uint8_t* found = <cnp.uint8_t*> fbuf.data
    cdef double mass = 0.0, flow = 0.0, half_gap = 0.5, gap, ratio, s
    cdef cnp.int64_t mask = 0, half_mask = 0, step, bit
    cdef Py_ssize_t k, q, mm
    cdef cnp.int64_t total = (<cnp.int64_t> 1) << n

    with nogil:
        for step in range(1, total):
            k = 0
            while not (step >> k) & 1:
                k += 1
            bit = (<cnp.int64_t> 1) << k
            if mask & bit:
                flow -= rowsum[k] - 2.0 * tvec[k] + F[k, k]
                for mm in range(n):
                    tvec[mm] -= F[mm, k]
                mass -= pi[k]
                mask ^= bit
            else:
                flow += rowsum[k] - 2.0 * tvec[k] - F[k, k]
                for mm in range(n):
                    tvec[mm] += F[mm, k]
                mass += pi[k]
                mask ^= bit
            gap = mass - 0.5
            if gap < 0.0:
                gap = -gap
            if gap < half_gap:
                half_gap = gap
                half_mask = mask
            for q in range(ns):
                s = svals[q]
                if s < mass and mass <= 0.5:
                    ratio = flow / (mass - s)
                    if ratio < best[q]:
                        best[q] = ratio
                        best_mask[q] = mask
                        found[q] = 1

    Fnp = np.asarray(F)
    pinp = np.asarray(pi)
    values = []
    for q in range(ns):
        if not found[q]:
            values.append(np.inf)
            continue
        inA = np.array([(best_mask[q] >> kk) & 1 for kk in range(n)], dtype=bool)
        m_exact = float(pinp[inA].sum())
        f_exact = float(Fnp[np.ix_(inA, ~inA)].sum())
        values.append(f_exact / (m_exact - svals[q]))
    return (np.array(values), mbuf.copy(), fbuf.astype(bool), half_gap,
            int(half_mask))
