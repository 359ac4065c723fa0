# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Backward-induction kernels over the dense budget lattice.

Arrays are indexed ``[t, b]`` with ``t`` in ``1..T+1`` (row 0 unused) and
``b`` in ``0..width``. At step ``t`` only budgets ``b <= width - (T-t+1)*gain``
are computed; the rest stay NaN because their successors fall off the array.
The arithmetic here mirrors ``_kernels_py`` operation for operation.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

ctypedef cnp.int64_t i64


def backward_optimal(const i64[:, ::1] rewards, const i64[::1] ptr, const i64[::1] out,
                     const double[::1] prob, Py_ssize_t width, i64 gain,
                     bint principal, double tie_tol, double prob_tol):
    cdef Py_ssize_t T = rewards.shape[0]
    cdef Py_ssize_t n_act = ptr.shape[0] - 1
    v_arr = np.full((T + 2, width + 1), np.nan)
    s_arr = np.full((T + 2, width + 1), np.nan)
    w_arr = np.full((T + 2, width + 1), np.nan)
    q_arr = np.full((T + 2, width + 1, n_act), np.nan)
    pol_arr = np.full((T + 2, width + 1), -1, dtype=np.int64)
    tie_arr = np.zeros((T + 2, width + 1), dtype=np.uint8)
    cdef double[:, ::1] v = v_arr
    cdef double[:, ::1] s = s_arr
    cdef double[:, ::1] w = w_arr
    cdef double[:, :, ::1] q = q_arr
    cdef i64[:, ::1] pol = pol_arr
    cdef cnp.uint8_t[:, ::1] tie = tie_arr

    qa_arr = np.empty(n_act)
    s1_arr = np.empty(n_act)
    sv_arr = np.empty(n_act)
    wr_arr = np.empty(n_act)
    cdef double[::1] qa = qa_arr
    cdef double[::1] s1 = s1_arr
    cdef double[::1] sv = sv_arr
    cdef double[::1] wr = wr_arr

    cdef Py_ssize_t t, b, a, k, lim, nb, chosen, n_cand
    cdef i64 rr, cl
    cdef double p, imm, cont, best, thresh, best_s1, scale

    for b in range(width + 1):
        v[T + 1, b] = 0.0
        w[T + 1, b] = 0.0
        s[T + 1, b] = 1.0 if b > 0 else 0.0

    for t in range(T, 0, -1):
        lim = width - (T - t + 1) * gain
        for b in range(lim + 1):
            if b == 0:
                v[t, 0] = 0.0
                s[t, 0] = 0.0
                w[t, 0] = 0.0
                pol[t, 0] = 0
                for a in range(n_act):
                    q[t, 0, a] = 0.0
                continue
            for a in range(n_act):
                imm = 0.0
                cont = 0.0
                s1[a] = 0.0
                sv[a] = 0.0
                wr[a] = 0.0
                for k in range(ptr[a], ptr[a + 1]):
                    p = prob[k]
                    rr = rewards[t - 1, out[k]]
                    cl = rr if rr > -b else -b
                    nb = b + cl
                    if principal:
                        imm = imm + p * rr
                    else:
                        imm = imm + p * cl
                    if nb > 0:
                        cont = cont + p * v[t + 1, nb]
                        s1[a] = s1[a] + p
                        sv[a] = sv[a] + p * s[t + 1, nb]
                        wr[a] = wr[a] + p * (cl * s[t + 1, nb] + w[t + 1, nb])
                qa[a] = imm + cont
                q[t, b, a] = qa[a]
            best = qa[0]
            for a in range(1, n_act):
                if qa[a] > best:
                    best = qa[a]
            scale = fabs(best)
            if scale < 1.0:
                scale = 1.0
            thresh = best - tie_tol * scale
            best_s1 = -1.0
            n_cand = 0
            for a in range(n_act):
                if qa[a] >= thresh:
                    n_cand += 1
                    if s1[a] > best_s1:
                        best_s1 = s1[a]
            chosen = 0
            for a in range(n_act):
                if qa[a] >= thresh and s1[a] >= best_s1 - prob_tol:
                    chosen = a
                    break
            pol[t, b] = chosen
            tie[t, b] = n_cand > 1
            v[t, b] = qa[chosen]
            s[t, b] = sv[chosen]
            w[t, b] = wr[chosen]
    return {"v": v_arr, "surv": s_arr, "wret": w_arr, "q": q_arr,
            "policy": pol_arr, "tie": tie_arr.astype(bool)}


def backward_evaluate(const i64[:, ::1] rewards, const i64[::1] ptr, const i64[::1] out,
                      const double[::1] prob, Py_ssize_t width, i64 gain,
                      bint principal, const i64[:, ::1] policy):
    cdef Py_ssize_t T = rewards.shape[0]
    cdef Py_ssize_t n_act = ptr.shape[0] - 1
    v_arr = np.full((T + 2, width + 1), np.nan)
    s_arr = np.full((T + 2, width + 1), np.nan)
    w_arr = np.full((T + 2, width + 1), np.nan)
    cdef double[:, ::1] v = v_arr
    cdef double[:, ::1] s = s_arr
    cdef double[:, ::1] w = w_arr
    cdef Py_ssize_t t, b, a, k, lim, nb
    cdef i64 rr, cl
    cdef double p, imm, cont, sv, wr

    for b in range(width + 1):
        v[T + 1, b] = 0.0
        w[T + 1, b] = 0.0
        s[T + 1, b] = 1.0 if b > 0 else 0.0

    for t in range(T, 0, -1):
        lim = width - (T - t + 1) * gain
        v[t, 0] = 0.0
        s[t, 0] = 0.0
        w[t, 0] = 0.0
        for b in range(1, lim + 1):
            a = policy[t, b]
            if a < 0 or a >= n_act:
                raise ValueError(f"policy has invalid action {a} at t={t}, b={b}")
            imm = 0.0
            cont = 0.0
            sv = 0.0
            wr = 0.0
            for k in range(ptr[a], ptr[a + 1]):
                p = prob[k]
                rr = rewards[t - 1, out[k]]
                cl = rr if rr > -b else -b
                nb = b + cl
                if principal:
                    imm = imm + p * rr
                else:
                    imm = imm + p * cl
                if nb > 0:
                    cont = cont + p * v[t + 1, nb]
                    sv = sv + p * s[t + 1, nb]
                    wr = wr + p * (cl * s[t + 1, nb] + w[t + 1, nb])
            v[t, b] = imm + cont
            s[t, b] = sv
            w[t, b] = wr
    return {"v": v_arr, "surv": s_arr, "wret": w_arr}
