"""Numpy fallback for the compiled backward-induction kernels.

Vectorised over budgets; every floating operation matches the compiled
kernel in operand order, so both backends agree bit for bit.
"""
import numpy as np


def _init(T, width, n_act=None):
    v = np.full((T + 2, width + 1), np.nan)
    s = np.full((T + 2, width + 1), np.nan)
    w = np.full((T + 2, width + 1), np.nan)
    v[T + 1] = 0.0
    w[T + 1] = 0.0
    s[T + 1] = 1.0
    s[T + 1, 0] = 0.0
    return v, s, w


def _action_terms(rewards_t, out, prob, lo, hi, b, v1, s1_next, w1, principal):
    imm = np.zeros(b.shape)
    cont = np.zeros(b.shape)
    s1 = np.zeros(b.shape)
    sv = np.zeros(b.shape)
    wr = np.zeros(b.shape)
    for k in range(lo, hi):
        p = prob[k]
        rr = rewards_t[out[k]]
        cl = np.maximum(-b, rr)
        nb = b + cl
        imm = imm + p * (rr if principal else cl)
        alive = nb > 0
        nbc = np.where(alive, nb, 0)
        cont = np.where(alive, cont + p * v1[nbc], cont)
        s1 = np.where(alive, s1 + p, s1)
        sv = np.where(alive, sv + p * s1_next[nbc], sv)
        wr = np.where(alive, wr + p * (cl * s1_next[nbc] + w1[nbc]), wr)
    return imm + cont, s1, sv, wr


def backward_optimal(rewards, ptr, out, prob, width, gain, principal, tie_tol, prob_tol):
    T = rewards.shape[0]
    n_act = len(ptr) - 1
    v, s, w = _init(T, width)
    q = np.full((T + 2, width + 1, n_act), np.nan)
    pol = np.full((T + 2, width + 1), -1, dtype=np.int64)
    tie = np.zeros((T + 2, width + 1), dtype=bool)
    for t in range(T, 0, -1):
        lim = width - (T - t + 1) * gain
        b = np.arange(1, lim + 1, dtype=np.int64)
        qa = np.empty((n_act, b.size))
        s1 = np.empty((n_act, b.size))
        sv = np.empty((n_act, b.size))
        wr = np.empty((n_act, b.size))
        for a in range(n_act):
            qa[a], s1[a], sv[a], wr[a] = _action_terms(
                rewards[t - 1], out, prob, ptr[a], ptr[a + 1], b,
                v[t + 1], s[t + 1], w[t + 1], principal,
            )
        best = qa.max(axis=0)
        thresh = best - tie_tol * np.maximum(np.abs(best), 1.0)
        cand = qa >= thresh
        best_s1 = np.where(cand, s1, -1.0).max(axis=0)
        ok = cand & (s1 >= best_s1 - prob_tol)
        chosen = ok.argmax(axis=0)
        cols = np.arange(b.size)
        q[t, 0, :] = 0.0
        q[t, 1 : lim + 1, :] = qa.T
        pol[t, 0] = 0
        pol[t, 1 : lim + 1] = chosen
        tie[t, 1 : lim + 1] = cand.sum(axis=0) > 1
        v[t, 0] = s[t, 0] = w[t, 0] = 0.0
        v[t, 1 : lim + 1] = qa[chosen, cols]
        s[t, 1 : lim + 1] = sv[chosen, cols]
        w[t, 1 : lim + 1] = wr[chosen, cols]
    return {"v": v, "surv": s, "wret": w, "q": q, "policy": pol, "tie": tie}


def backward_evaluate(rewards, ptr, out, prob, width, gain, principal, policy):
    T = rewards.shape[0]
    n_act = len(ptr) - 1
    v, s, w = _init(T, width)
    for t in range(T, 0, -1):
        lim = width - (T - t + 1) * gain
        b = np.arange(1, lim + 1, dtype=np.int64)
        acts = policy[t, 1 : lim + 1]
        bad = (acts < 0) | (acts >= n_act)
        if bad.any():
            j = int(np.flatnonzero(bad)[0])
            raise ValueError(f"policy has invalid action {acts[j]} at t={t}, b={j + 1}")
        vt = np.empty(b.size)
        st = np.empty(b.size)
        wt = np.empty(b.size)
        for a in range(n_act):
            m = acts == a
            if not m.any():
                continue
            qa, _, sv, wr = _action_terms(
                rewards[t - 1], out, prob, ptr[a], ptr[a + 1], b[m],
                v[t + 1], s[t + 1], w[t + 1], principal,
            )
            vt[m], st[m], wt[m] = qa, sv, wr
        v[t, 0] = s[t, 0] = w[t, 0] = 0.0
        v[t, 1 : lim + 1] = vt
        s[t, 1 : lim + 1] = st
        w[t, 1 : lim + 1] = wt
    return {"v": v, "surv": s, "wret": w}
