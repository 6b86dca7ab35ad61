"""Brute-force tensor operations on all ``2^(k+l)`` components.

Index value 0 here stands for coordinate 1 and index value 1 for
coordinate 2. These routines are independent of the canonical formulas and
serve as their oracle; they are deliberately written as plain loops over
index tuples and permutations.
"""

from __future__ import annotations

import itertools
from math import factorial

import numpy as np

MAX_ORDER = 8

__all__ = [
    "MAX_ORDER",
    "dense_from_table",
    "table_from_dense",
    "is_block_symmetric",
    "dense_sym",
    "dense_A",
    "dense_lambda",
    "dense_phi",
    "dense_sym_contract",
    "dense_covariant",
    "dense_d_prime",
]


def _check(m):
    if m > MAX_ORDER:
        raise ValueError(f"dense oracle capped at total order {MAX_ORDER}")


def _ones(idx):
    return sum(1 for i in idx if i == 0)


def dense_from_table(t, k, l):
    """Expand a canonical table into the full component array."""
    _check(k + l)
    out = np.zeros((2,) * (k + l), dtype=t.dtype)
    for idx in itertools.product((0, 1), repeat=k + l):
        out[idx] = t[_ones(idx[:k]), _ones(idx[k:])]
    return out


def table_from_dense(T, k, l):
    """Read the canonical table; assumes block symmetry."""
    t = np.zeros((k + 1, l + 1), dtype=T.dtype)
    for h in range(k + 1):
        for a in range(l + 1):
            idx = (0,) * h + (1,) * (k - h) + (0,) * a + (1,) * (l - a)
            t[h, a] = T[idx]
    return t


def is_block_symmetric(T, k, l, tol=0.0):
    for idx in itertools.product((0, 1), repeat=k + l):
        for p in itertools.permutations(range(k)):
            for q in itertools.permutations(range(l)):
                j = tuple(idx[i] for i in p) + tuple(idx[k + i] for i in q)
                if abs(T[idx] - T[j]) > tol:
                    return False
    return True


def dense_sym(T, axes=None):
    """Average ``T`` over all permutations of the given axes (default: all)."""
    n = T.ndim
    axes = list(range(n)) if axes is None else list(axes)
    acc = np.zeros_like(T)
    for p in itertools.permutations(axes):
        perm = list(range(n))
        for src, dst in zip(axes, p):
            perm[src] = dst
        acc = acc + np.transpose(T, perm)
    return np.asarray(acc / factorial(len(axes)), dtype=T.dtype)


def dense_A(T, k, l):
    out = np.zeros_like(T)
    for idx in itertools.product((0, 1), repeat=k + l):
        J = idx[k:]
        flipped = idx[:k] + tuple(1 - j for j in J)
        out[idx] = (-1) ** (l - _ones(J)) * T[flipped]
    return out


def dense_lambda(W, k, l, factor=1.0):
    """``sym_I sym_J (g_{i1 j1} W_{rest})`` with ``g = factor * delta``.

    ``W`` has orders ``(k - 1, l - 1)``.
    """
    _check(k + l)
    W = np.asarray(W)
    dtype = object if W.dtype == object else float
    g = np.array([[factor, 0], [0, factor]], dtype=dtype)
    raw = np.zeros((2,) * (k + l), dtype=dtype)
    for idx in itertools.product((0, 1), repeat=k + l):
        I, J = idx[:k], idx[k:]
        raw[idx] = g[I[0], J[0]] * W[I[1:] + J[1:]]
    raw = dense_sym(raw, range(k))
    return dense_sym(raw, range(k, k + l))


def _vector(v):
    v = np.asarray(v)
    return v if v.dtype == object else v.astype(float)


def dense_phi(T, k, l, v):
    v = _vector(v)
    s = np.array([v[1], -v[0]])
    total = 0
    for idx in itertools.product((0, 1), repeat=k + l):
        w = T[idx]
        for i in idx[:k]:
            w = w * v[i]
        for j in idx[k:]:
            w = w * s[j]
        total = total + w
    return total


def dense_sym_contract(T, v):
    v = _vector(v)
    total = 0
    for idx in itertools.product((0, 1), repeat=T.ndim):
        w = T[idx]
        for i in idx:
            w = w * v[i]
        total = total + w
    return total


def dense_covariant(U, dU, gamma):
    """``U_{I;p} = d_p U_I - sum_s G^q_{p i_s} U_{I, s -> q}``.

    ``dU[p]`` is the partial along ``x_{p+1}``; ``gamma[q, p, i]`` is
    ``G^q_{p i}``. The derivative index is the last axis of the result.
    """
    U, dU = np.asarray(U), np.asarray(dU)
    m = U.ndim
    out = np.zeros((2,) * (m + 1), dtype=object if U.dtype == object else float)
    for idx in itertools.product((0, 1), repeat=m):
        for p in range(2):
            val = dU[(p,) + idx]
            for s in range(m):
                for q in range(2):
                    j = idx[:s] + (q,) + idx[s + 1 :]
                    val -= gamma[q, p, idx[s]] * U[j]
            out[idx + (p,)] = val
    return out


def dense_d_prime(U, dU, gamma, k_minus_1, l):
    """``sym(i_1..i_k) U_{i_2..i_k j_1..j_l; i_1}``."""
    cov = dense_covariant(U, dU, gamma)
    m = cov.ndim
    # move the derivative slot to the front of the first block
    cov = np.moveaxis(cov, m - 1, 0)
    return dense_sym(cov, range(k_minus_1 + 1))
