"""Hot loops: joint counting, Naive Bayes log-joint scoring, and the
within-group swap sweep of the deFinetti sampler.

Every kernel has a numba version (``*_nb``) and a pure-numpy version
(``*_np``). The public names dispatch to numba unless numba is missing or
``ANONATTACK_DISABLE_NUMBA=1`` is set in the environment before import.
Both versions perform the same floating-point operations in the same
order, so results agree bit for bit.

Conventions: ``X`` is an ``(n, m)`` int32 matrix of per-attribute value
codes where ``-1`` means "no value" (skipped); ``log_cond`` has shape
``(m, vmax, S)``; SA codes index the last axis.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAS_NUMBA = numba is not None
USE_NUMBA = HAS_NUMBA and os.environ.get("ANONATTACK_DISABLE_NUMBA", "0") not in ("1", "true", "yes")


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy implementations


def count_joint_np(X, y, vmax, n_sa):
    n, m = X.shape
    counts = np.zeros((m, vmax, n_sa), dtype=np.int64)
    for i in range(m):
        ok = (X[:, i] >= 0) & (y >= 0)
        flat = X[ok, i].astype(np.int64) * n_sa + y[ok]
        counts[i] = np.bincount(flat, minlength=vmax * n_sa).reshape(vmax, n_sa)
    return counts


def log_joint_np(X, log_cond, log_prior):
    n, m = X.shape
    out = np.empty((n, log_prior.shape[0]), dtype=np.float64)
    out[:] = log_prior
    for i in range(m):
        x = X[:, i]
        ok = x >= 0
        out += np.where(ok[:, None], log_cond[i, np.where(ok, x, 0), :], 0.0)
    return out


def swap_log_ratio_np(Xe, ra, rb, sa, sb, log_cond):
    """Log likelihood ratio of swapping SA values ``sa``/``sb`` of rows ``ra``/``rb``."""
    logr = np.zeros(len(ra), dtype=np.float64)
    for i in range(Xe.shape[1]):
        va = Xe[ra, i]
        vb = Xe[rb, i]
        oka = va >= 0
        okb = vb >= 0
        va = np.where(oka, va, 0)
        vb = np.where(okb, vb, 0)
        ta = np.where(oka, log_cond[i, va, sb] - log_cond[i, va, sa], 0.0)
        tb = np.where(okb, log_cond[i, vb, sa] - log_cond[i, vb, sb], 0.0)
        logr += ta + tb
    return logr


def sweep_np(Xc, Xe, assign, group_ptr, members, pos_a, pos_b, log_u, log_cond, counts):
    start = group_ptr[:-1]
    size = group_ptr[1:] - start
    live = np.flatnonzero(size >= 2)
    ra = members[start[live] + pos_a[live]]
    rb = members[start[live] + pos_b[live]]
    sa = assign[ra]
    sb = assign[rb]
    logr = swap_log_ratio_np(Xe, ra, rb, sa, sb, log_cond)
    acc = (sa != sb) & (log_u[live] < logr)
    ra, rb, sa, sb = ra[acc], rb[acc], sa[acc], sb[acc]
    assign[ra] = sb
    assign[rb] = sa
    for i in range(Xc.shape[1]):
        for rows, old, new in ((ra, sa, sb), (rb, sb, sa)):
            v = Xc[rows, i]
            ok = v >= 0
            np.add.at(counts[i], (v[ok], old[ok]), -1)
            np.add.at(counts[i], (v[ok], new[ok]), 1)
    return int(acc.sum())


# ---------------------------------------------------------------------------
# numba implementations


def _count_joint_loop(X, y, vmax, n_sa):
    n, m = X.shape
    counts = np.zeros((m, vmax, n_sa), dtype=np.int64)
    for r in range(n):
        s = y[r]
        if s < 0:
            continue
        for i in range(m):
            v = X[r, i]
            if v >= 0:
                counts[i, v, s] += 1
    return counts


def _log_joint_loop(X, log_cond, log_prior):
    n, m = X.shape
    n_sa = log_prior.shape[0]
    out = np.empty((n, n_sa), dtype=np.float64)
    for r in range(n):
        for s in range(n_sa):
            acc = log_prior[s]
            for i in range(m):
                v = X[r, i]
                if v >= 0:
                    acc += log_cond[i, v, s]
                else:
                    acc += 0.0
            out[r, s] = acc
    return out


def _sweep_loop(Xc, Xe, assign, group_ptr, members, pos_a, pos_b, log_u, log_cond, counts):
    m = Xe.shape[1]
    accepted = 0
    for g in range(group_ptr.shape[0] - 1):
        start = group_ptr[g]
        if group_ptr[g + 1] - start < 2:
            continue
        ra = members[start + pos_a[g]]
        rb = members[start + pos_b[g]]
        sa = assign[ra]
        sb = assign[rb]
        logr = 0.0
        for i in range(m):
            va = Xe[ra, i]
            vb = Xe[rb, i]
            ta = 0.0
            tb = 0.0
            if va >= 0:
                ta = log_cond[i, va, sb] - log_cond[i, va, sa]
            if vb >= 0:
                tb = log_cond[i, vb, sa] - log_cond[i, vb, sb]
            logr += ta + tb
        if sa == sb or not log_u[g] < logr:
            continue
        accepted += 1
        assign[ra] = sb
        assign[rb] = sa
        for i in range(m):
            va = Xc[ra, i]
            vb = Xc[rb, i]
            if va >= 0:
                counts[i, va, sa] -= 1
                counts[i, va, sb] += 1
            if vb >= 0:
                counts[i, vb, sb] -= 1
                counts[i, vb, sa] += 1
    return accepted


if HAS_NUMBA:
    count_joint_nb = numba.njit(cache=True)(_count_joint_loop)
    log_joint_nb = numba.njit(cache=True)(_log_joint_loop)
    sweep_nb = numba.njit(cache=True)(_sweep_loop)
else:  # pragma: no cover
    count_joint_nb = _count_joint_loop
    log_joint_nb = _log_joint_loop
    sweep_nb = _sweep_loop


if USE_NUMBA:
    count_joint = count_joint_nb
    log_joint = log_joint_nb
    sweep = sweep_nb
else:
    count_joint = count_joint_np
    log_joint = log_joint_np
    sweep = sweep_np
