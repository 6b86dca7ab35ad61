"""Pointwise algebra on canonical component tables.

A tensor in ``S^k x S^l`` over the plane is stored as a table ``t[..., h, a]``
of shape ``(..., k + 1, l + 1)``: the common value of every component whose
first block holds ``h`` ones and whose second block holds ``a`` ones. A fully
symmetric ``m``-tensor uses the table ``s[..., n]`` of shape ``(..., m + 1)``.

Every function accepts float arrays or ``dtype=object`` arrays of
:class:`fractions.Fraction`; in the latter case all weights are exact
rationals, which is how the exact identities are checked.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb

import numpy as np

__all__ = [
    "orders",
    "apply_A",
    "sym_table",
    "mixed_from_sym",
    "sym_A",
    "A_sym_A",
    "lam",
    "lam_matrix",
    "phi_contract",
    "sym_contract",
    "covariant_table",
    "d_prime_table",
    "d_s_table",
]


def orders(t):
    return t.shape[-2] - 1, t.shape[-1] - 1


def _exact(t) -> bool:
    return np.asarray(t).dtype == object


def _ratio(num, den, exact):
    return Fraction(num, den) if exact else num / den


def apply_A(t):
    """Flip ones and twos in the second block with sign ``(-1)^(l - a)``."""
    k, l = orders(t)
    sign = np.array([(-1) ** (l - a) for a in range(l + 1)])
    return t[..., :, ::-1] * sign


def sym_table(t):
    """Full symmetrization of a ``(k, l)`` table; returns ``s[..., n]``."""
    k, l = orders(t)
    m = k + l
    exact = _exact(t)
    out = np.zeros(t.shape[:-2] + (m + 1,), dtype=t.dtype)
    for h in range(k + 1):
        for a in range(l + 1):
            n = h + a
            out[..., n] = out[..., n] + _ratio(comb(k, h) * comb(l, a), comb(m, n), exact) * t[..., h, a]
    return out


def mixed_from_sym(s, k, l):
    """View a symmetric ``(k + l)``-table as a ``(k, l)`` table."""
    if s.shape[-1] != k + l + 1:
        raise ValueError("order mismatch")
    hh, aa = np.meshgrid(np.arange(k + 1), np.arange(l + 1), indexing="ij")
    return s[..., hh + aa]


def sym_A(t):
    return mixed_from_sym(sym_table(apply_A(t)), *orders(t))


def A_sym_A(t):
    return apply_A(sym_A(t))


def lam(w, factor=1):
    """Metric insertion for ``g = factor * delta``.

    ``w`` has orders ``(k - 1, l - 1)``; the result has orders ``(k, l)``.
    ``factor`` broadcasts against the leading axes of ``w``.
    """
    k, l = w.shape[-2], w.shape[-1]
    exact = _exact(w)
    out = np.zeros(w.shape[:-2] + (k + 1, l + 1), dtype=w.dtype)
    for h in range(k + 1):
        for a in range(l + 1):
            acc = 0
            if h >= 1 and a >= 1:
                acc = acc + _ratio(h * a, k * l, exact) * w[..., h - 1, a - 1]
            if h < k and a < l:
                acc = acc + _ratio((k - h) * (l - a), k * l, exact) * w[..., h, a]
            out[..., h, a] = acc
    return out * np.asarray(factor)[..., None, None]


def lam_matrix(k, l, factor=1.0):
    """Matrix of :func:`lam` on flattened tables, shape ``((k+1)(l+1), k l)``."""
    cols = []
    for i in range(k * l):
        e = np.zeros(k * l)
        e[i] = 1.0
        cols.append(lam(e.reshape(k, l), factor).ravel())
    return np.stack(cols, axis=1)


def _powers(v1, v2, n):
    # [v1^i v2^(n-i)] for i = 0..n, stacked on a new last axis
    p1 = [np.ones_like(v1)]
    p2 = [np.ones_like(v2)]
    for _ in range(n):
        p1.append(p1[-1] * v1)
        p2.append(p2[-1] * v2)
    return np.stack([p1[i] * p2[n - i] for i in range(n + 1)], axis=-1)


def phi_contract(t, v):
    """Contract ``k`` slots with ``v`` and ``l`` slots with ``rotate(v)``."""
    k, l = orders(t)
    v = np.asarray(v)
    v1, v2 = v[..., 0], v[..., 1]
    s1, s2 = v2, -v1
    exact = _exact(t)
    ck = np.array([comb(k, h) for h in range(k + 1)], dtype=object if exact else float)
    cl = np.array([comb(l, a) for a in range(l + 1)], dtype=object if exact else float)
    pv = _powers(v1, v2, k) * ck
    ps = _powers(s1, s2, l) * cl
    if exact:
        return np.sum(t * pv[..., :, None] * ps[..., None, :], axis=(-2, -1))
    return np.einsum("...ha,...h,...a->...", t, pv, ps)


def sym_contract(s, v):
    """Contract every slot of a symmetric table with ``v``."""
    m = s.shape[-1] - 1
    v = np.asarray(v)
    exact = _exact(s)
    cm = np.array([comb(m, n) for n in range(m + 1)], dtype=object if exact else float)
    return np.sum(s * _powers(v[..., 0], v[..., 1], m) * cm, axis=-1)


def covariant_table(u, du, gamma):
    """Covariant derivative ``D[..., p, h, a] = u_{I;p}`` at each pattern.

    Parameters
    ----------
    u : table of orders ``(k, l)``
    du : partials, shape ``(..., 2, k + 1, l + 1)``; ``du[..., p]`` is the
        derivative along ``x_{p+1}``
    gamma : Christoffel symbols ``(..., 2, 2, 2)`` indexed ``[q, p, i]``
    """
    k, l = orders(u)
    D = du.copy()
    z = np.zeros_like(u[..., :1, :])
    zl = np.zeros_like(u[..., :, :1])
    down1 = np.concatenate([z, u[..., :-1, :]], axis=-2)  # u[h-1, a]
    up1 = np.concatenate([u[..., 1:, :], z], axis=-2)  # u[h+1, a]
    down2 = np.concatenate([zl, u[..., :, :-1]], axis=-1)
    up2 = np.concatenate([u[..., :, 1:], zl], axis=-1)
    hk = np.arange(k + 1)[:, None]
    al = np.arange(l + 1)[None, :]
    for p in range(2):
        g11 = gamma[..., 0, p, 0][..., None, None]
        g21 = gamma[..., 1, p, 0][..., None, None]
        g12 = gamma[..., 0, p, 1][..., None, None]
        g22 = gamma[..., 1, p, 1][..., None, None]
        corr = (
            hk * (g11 * u + g21 * down1)
            + (k - hk) * (g12 * up1 + g22 * u)
            + al * (g11 * u + g21 * down2)
            + (l - al) * (g12 * up2 + g22 * u)
        )
        D[..., p, :, :] = D[..., p, :, :] - corr
    return D


def d_prime_table(D):
    """First-block symmetrization of ``D`` with the derivative slot first.

    ``D`` comes from a ``(k - 1, l)`` table; the result has orders ``(k, l)``.
    """
    km1, l = D.shape[-2] - 1, D.shape[-1] - 1
    k = km1 + 1
    exact = _exact(D)
    out = np.zeros(D.shape[:-3] + (k + 1, l + 1), dtype=D.dtype)
    for h in range(k + 1):
        acc = 0
        if h >= 1:
            acc = acc + _ratio(h, k, exact) * D[..., 0, h - 1, :]
        if h < k:
            acc = acc + _ratio(k - h, k, exact) * D[..., 1, h, :]
        out[..., h, :] = acc
    return out


def d_s_table(D):
    """Full symmetrization of ``D``; returns the symmetric table ``s[..., n]``."""
    km1, l = D.shape[-2] - 1, D.shape[-1] - 1
    m = km1 + l + 1
    exact = _exact(D)
    out = np.zeros(D.shape[:-3] + (m + 1,), dtype=D.dtype)
    for p in range(2):
        for h in range(km1 + 1):
            for a in range(l + 1):
                n = h + a + (1 if p == 0 else 0)
                out[..., n] = out[..., n] + _ratio(comb(km1, h) * comb(l, a), comb(m, n), exact) * D[..., p, h, a]
    return out
