"""Batched row-wise kernels for the closed-form mean families.

Every kernel takes a 2-D array ``X`` of shape ``(m, n)`` (``m`` input vectors
of length ``n``, all entries positive) and returns the ``m`` mean values.
Two implementations exist for each kernel: a vectorised numpy one and a
numba loop. :data:`gini_rows` / :data:`holder_rows` point at the numba
version unless ``MEANS_LAB_NUMBA=0``.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit

# exp() overflows past ~709.78; switch to log-space well before that.
LOG_OVERFLOW = 700.0
EQUAL_EXPONENT_TOL = 1e-12


def _finish(X, vals):
    lo = X.min(axis=1)
    hi = X.max(axis=1)
    vals = np.minimum(np.maximum(vals, lo), hi)
    const = lo == hi
    if const.any():
        vals[const] = X[const, 0]
    return vals


def _logsumexp(A):
    amax = A.max(axis=1, keepdims=True)
    return amax[:, 0] + np.log(np.exp(A - amax).sum(axis=1))


def gini_rows_numpy(X, q, r):
    X = np.asarray(X, dtype=np.float64)
    L = np.log(X)
    if abs(q - r) < EQUAL_EXPONENT_TOL:
        A = q * L
        W = np.exp(A - A.max(axis=1, keepdims=True))
        vals = np.exp((W * L).sum(axis=1) / W.sum(axis=1))
    elif max(abs(q), abs(r)) * np.abs(L).max(initial=0.0) > LOG_OVERFLOW:
        vals = np.exp((_logsumexp(q * L) - _logsumexp(r * L)) / (q - r))
    else:
        vals = ((X**q).sum(axis=1) / (X**r).sum(axis=1)) ** (1.0 / (q - r))
    return _finish(X, vals)


def holder_rows_numpy(X, p):
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[1]
    L = np.log(X)
    if p == 0.0:
        vals = np.exp(L.mean(axis=1))
    elif abs(p) * np.abs(L).max(initial=0.0) > LOG_OVERFLOW:
        vals = np.exp((_logsumexp(p * L) - math.log(n)) / p)
    else:
        vals = ((X**p).sum(axis=1) / n) ** (1.0 / p)
    return _finish(X, vals)


@njit
def _row_bounds(row):
    lo = row[0]
    hi = row[0]
    for v in row:
        if v < lo:
            lo = v
        if v > hi:
            hi = v
    return lo, hi


@njit
def gini_rows_numba(X, q, r):
    m, n = X.shape
    out = np.empty(m)
    big = max(abs(q), abs(r))
    for i in range(m):
        row = X[i]
        lo, hi = _row_bounds(row)
        if lo == hi:
            out[i] = row[0]
            continue
        lmax = max(abs(math.log(lo)), abs(math.log(hi)))
        if abs(q - r) < 1e-12:
            amax = q * math.log(row[0])
            for j in range(n):
                a = q * math.log(row[j])
                if a > amax:
                    amax = a
            sw = 0.0
            swl = 0.0
            for j in range(n):
                lj = math.log(row[j])
                w = math.exp(q * lj - amax)
                sw += w
                swl += w * lj
            v = math.exp(swl / sw)
        elif big * lmax > 700.0:
            aq = -np.inf
            ar = -np.inf
            for j in range(n):
                lj = math.log(row[j])
                aq = max(aq, q * lj)
                ar = max(ar, r * lj)
            sq = 0.0
            sr = 0.0
            for j in range(n):
                lj = math.log(row[j])
                sq += math.exp(q * lj - aq)
                sr += math.exp(r * lj - ar)
            v = math.exp((aq + math.log(sq) - ar - math.log(sr)) / (q - r))
        else:
            # one log per entry feeds both power sums
            sq = 0.0
            sr = 0.0
            for j in range(n):
                lj = math.log(row[j])
                sq += math.exp(q * lj)
                sr += math.exp(r * lj)
            v = (sq / sr) ** (1.0 / (q - r))
        out[i] = min(max(v, lo), hi)
    return out


@njit
def holder_rows_numba(X, p):
    m, n = X.shape
    out = np.empty(m)
    for i in range(m):
        row = X[i]
        lo, hi = _row_bounds(row)
        if lo == hi:
            out[i] = row[0]
            continue
        lmax = max(abs(math.log(lo)), abs(math.log(hi)))
        if p == 0.0:
            s = 0.0
            for j in range(n):
                s += math.log(row[j])
            v = math.exp(s / n)
        elif abs(p) * lmax > 700.0:
            amax = -np.inf
            for j in range(n):
                amax = max(amax, p * math.log(row[j]))
            s = 0.0
            for j in range(n):
                s += math.exp(p * math.log(row[j]) - amax)
            v = math.exp((amax + math.log(s) - math.log(n)) / p)
        else:
            s = 0.0
            for j in range(n):
                s += row[j] ** p
            v = (s / n) ** (1.0 / p)
        out[i] = min(max(v, lo), hi)
    return out


def _numba_entry(kernel):
    def run(X, *params):
        X = np.ascontiguousarray(X, dtype=np.float64)
        return kernel(X, *(float(v) for v in params))

    run.__name__ = kernel.__name__
    return run


if USE_NUMBA:
    gini_rows = _numba_entry(gini_rows_numba)
    holder_rows = _numba_entry(holder_rows_numba)
else:
    gini_rows = gini_rows_numpy
    holder_rows = holder_rows_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
