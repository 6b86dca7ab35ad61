"""Mixed tensor fields on the disk and the operators acting on them.

A :class:`MixedTensorField` is a closure over points returning canonical
tables (see :mod:`mixtrans.tensor_algebra.canonical`), together with the
metric it lives on. Operators build new closures; nothing is gridded.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from math import comb
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from ..geometry import ConformalMetric, _check_disk, christoffels, flat
from . import canonical as cn
from . import dense as dn

__all__ = [
    "MixedTensorField",
    "constant_field",
    "polynomial_field",
    "random_polynomial_field",
    "boundary_vanishing",
    "basis_element",
    "basis_fH",
    "basis_fH0",
    "sym_block",
    "full_sym",
    "apply_A",
    "lambda_op",
    "cov_derivative",
    "cov_derivative_reference",
    "d_prime",
    "d_s",
    "phi_evaluate",
    "im_lambda_residual",
    "quasi_random",
    "disk_points",
]

FD_STEP = 1e-5


@dataclass(frozen=True)
class MixedTensorField:
    """A field in ``S^k M x S^l M``.

    Parameters
    ----------
    k, l : int
        Orders of the two symmetric blocks.
    values : callable
        ``x (..., 2) -> table (..., k + 1, l + 1)``.
    gradient : callable, optional
        ``x (..., 2) -> (..., 2, k + 1, l + 1)``. Missing gradients fall back
        to central differences with one Richardson refinement.
    metric : ConformalMetric
    """

    k: int
    l: int
    values: Callable[[np.ndarray], np.ndarray]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    metric: ConformalMetric = field(default_factory=flat)
    label: str = ""

    def __post_init__(self):
        if self.k < 0 or self.l < 0:
            raise ValueError("orders must be nonnegative")

    @property
    def shape(self):
        return (self.k + 1, self.l + 1)

    @property
    def analytic_gradient(self) -> bool:
        return self.gradient is not None

    def table(self, x):
        return np.asarray(self.values(np.asarray(x, dtype=float)))

    def partials(self, x):
        x = np.asarray(x, dtype=float)
        if self.gradient is not None:
            return np.asarray(self.gradient(x))

        def central(h):
            cols = []
            for i in range(2):
                e = np.zeros(2)
                e[i] = h
                cols.append((self.table(x + e) - self.table(x - e)) / (2 * h))
            return np.stack(cols, axis=-3)

        return (4 * central(FD_STEP / 2) - central(FD_STEP)) / 3

    def component(self, first, second, x):
        """Component ``f_{I J}(x)`` for 1-based index tuples."""
        first, second = tuple(first), tuple(second)
        if len(first) != self.k or len(second) != self.l or not set(first + second) <= {1, 2}:
            raise ValueError("index tuple does not match the field orders")
        t = self.table(x)
        return t[..., first.count(1), second.count(1)]

    def dense(self, x):
        """All ``2^(k+l)`` components at one point."""
        return dn.dense_from_table(self.table(np.asarray(x, dtype=float).reshape(2)), self.k, self.l)

    def _same(self, other):
        if not isinstance(other, MixedTensorField) or (other.k, other.l) != (self.k, self.l):
            raise ValueError("fields of different orders")

    def __add__(self, other):
        self._same(other)
        grad = None
        if self.gradient is not None and other.gradient is not None:
            grad = lambda x: self.partials(x) + other.partials(x)  # noqa: E731
        return replace(self, values=lambda x: self.table(x) + other.table(x), gradient=grad, label="")

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c):
        c = float(c)
        grad = None if self.gradient is None else (lambda x: c * self.partials(x))
        return replace(self, values=lambda x: c * self.table(x), gradient=grad, label="")

    __rmul__ = __mul__

    def on(self, metric: ConformalMetric) -> "MixedTensorField":
        return replace(self, metric=metric)


def constant_field(table, metric=None, label="") -> MixedTensorField:
    t = np.asarray(table, dtype=float)
    k, l = t.shape[0] - 1, t.shape[1] - 1

    def values(x):
        return np.broadcast_to(t, np.shape(x)[:-1] + t.shape).copy()

    def grad(x):
        return np.zeros(np.shape(x)[:-1] + (2,) + t.shape)

    return MixedTensorField(k, l, values, grad, metric or flat(), label)


def _monomials(x, exponents):
    """``V[..., m] = x1^i x2^j`` for the listed ``(i, j)`` pairs."""
    d1 = max(i for i, _ in exponents) + 1
    d2 = max(j for _, j in exponents) + 1
    p1 = [np.ones(x.shape[:-1])]
    p2 = [p1[0]]
    for _ in range(1, d1):
        p1.append(p1[-1] * x[..., 0])
    for _ in range(1, d2):
        p2.append(p2[-1] * x[..., 1])
    return np.stack([p1[i] * p2[j] for i, j in exponents], axis=-1)


def _mm(a, M):
    """``a @ M`` over the last axis, as one 2-D product."""
    lead = a.shape[:-1]
    return (a.reshape(-1, a.shape[-1]) @ M).reshape(lead + (M.shape[1],))


class _Polynomial:
    """Values and partials of polynomial components sharing one monomial basis.

    Only monomials with a nonzero coefficient are evaluated; the last
    evaluated point array is cached so a value call followed by a gradient
    call at the same points builds the basis once.
    """

    def __init__(self, c):
        K1, L1, d1, d2 = c.shape
        i = np.arange(d1)[:, None]
        j = np.arange(d2)[None, :]
        c1 = np.zeros_like(c)
        c2 = np.zeros_like(c)
        c1[:, :, :-1, :] = (c * i)[:, :, 1:, :]
        c2[:, :, :, :-1] = (c * j)[:, :, :, 1:]
        support = np.any(c != 0, axis=(0, 1)) | np.any(c1 != 0, axis=(0, 1)) | np.any(c2 != 0, axis=(0, 1))
        support[0, 0] = True
        self.exponents = [tuple(e) for e in np.argwhere(support)]
        sel = tuple(np.array(self.exponents).T)
        self.mv = c[:, :, sel[0], sel[1]].reshape(K1 * L1, -1).T
        self.mg = np.concatenate(
            [c1[:, :, sel[0], sel[1]].reshape(K1 * L1, -1), c2[:, :, sel[0], sel[1]].reshape(K1 * L1, -1)]
        ).T
        self.out = (K1, L1)
        self._cache = None

    def _basis(self, x):
        cache = self._cache
        if cache is not None and cache[0] is x:
            return cache[1]
        V = _monomials(x, self.exponents)
        self._cache = (x, V)
        return V

    def values(self, x):
        x = np.asarray(x, dtype=float)
        return _mm(self._basis(x), self.mv).reshape(x.shape[:-1] + self.out)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return _mm(self._basis(x), self.mg).reshape(x.shape[:-1] + (2,) + self.out)


def polynomial_field(coefficients, metric=None, label="") -> MixedTensorField:
    """Polynomial components with analytic partials.

    ``coefficients[h, a, i, j]`` multiplies ``x1^i x2^j`` in component
    ``(h, a)``.
    """
    c = np.asarray(coefficients, dtype=float)
    if c.ndim != 4:
        raise ValueError("coefficients must have shape (k+1, l+1, d1, d2)")
    k, l = c.shape[0] - 1, c.shape[1] - 1
    poly = _Polynomial(c)
    f = MixedTensorField(k, l, poly.values, poly.gradient, metric or flat(), label)
    object.__setattr__(f, "coefficients", c)
    return f


def boundary_vanishing(p: MixedTensorField) -> MixedTensorField:
    """Multiply a polynomial field by ``1 - |x|^2``."""
    c = getattr(p, "coefficients", None)
    if c is None:
        raise ValueError("boundary_vanishing needs a polynomial field")
    k1, l1, d1, d2 = c.shape
    out = np.zeros((k1, l1, d1 + 2, d2 + 2))
    out[:, :, :d1, :d2] += c
    out[:, :, 2:, :d2] -= c
    out[:, :, :d1, 2:] -= c
    return polynomial_field(out, p.metric, p.label)


def quasi_random(n, d, seed=0):
    """``n`` scrambled Halton draws in ``[-1, 1]^d``."""
    return 2.0 * qmc.Halton(d, scramble=True, seed=seed).random(n) - 1.0


def disk_points(n, seed=0, radius=1.0):
    """Quasi-random points in the disk of the given radius."""
    u = qmc.Halton(2, scramble=True, seed=seed).random(n)
    r = radius * np.sqrt(u[:, 0])
    t = 2 * np.pi * u[:, 1]
    return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)


def random_polynomial_field(k, l, degree=2, n=1, seed=0, metric=None, scale=1.0):
    """``n`` polynomial fields of total degree at most ``degree``."""
    d = degree + 1
    mask = np.add.outer(np.arange(d), np.arange(d)) <= degree
    dim = (k + 1) * (l + 1) * int(mask.sum())
    draws = quasi_random(n, dim, seed) * scale
    fields = []
    for row in draws:
        c = np.zeros((k + 1, l + 1, d, d))
        c[:, :, mask] = row.reshape(k + 1, l + 1, -1)
        fields.append(polynomial_field(c, metric))
    return fields


def basis_element(k, l, h, a, metric=None) -> MixedTensorField:
    """Averaged symmetric product with ``h`` (resp. ``a``) factors ``dx^1``.

    Components matching the pattern equal ``1 / (C(k, h) C(l, a))``.
    """
    if not (0 <= h <= k and 0 <= a <= l):
        raise IndexError(f"pattern ({h}, {a}) out of range for orders ({k}, {l})")
    t = np.zeros((k + 1, l + 1))
    t[h, a] = 1.0 / (comb(k, h) * comb(l, a))
    return constant_field(t, metric, label=f"e[{k},{l};{h},{a}]")


def _fH_start(k, l, H):
    if not 0 <= H <= k + l:
        raise IndexError(f"H={H} out of range 0..{k + l}")
    h0 = max(0, H - l)
    return h0, min(k, H) - h0


def basis_fH(k, l, H, j, metric=None) -> MixedTensorField:
    """The ``j``-th member of the family whose flipped total of ones is ``H``.

    First block: ``h0 + j`` ones; second block: ``H - h0 - j`` twos, with
    ``h0 = max(0, H - l)``. Covers both sub-cases ``H > min(k, l)``.
    """
    h0, jmax = _fH_start(k, l, H)
    if not 0 <= j <= jmax:
        raise IndexError(f"j={j} out of range 0..{jmax} for H={H}")
    h = h0 + j
    return basis_element(k, l, h, l - (H - h), metric)


def basis_fH0(k, l, H, metric=None) -> MixedTensorField:
    return basis_fH(k, l, H, 0, metric)


def basis_fH_count(k, l, H):
    return _fH_start(k, l, H)[1] + 1


def sym_block(f, block="all", k=None, l=None):
    """Symmetrize over ``"first"``, ``"last"`` or ``"all"`` indices.

    ``f`` is either a field (always block symmetric, so only ``"all"`` acts)
    or a raw component array of shape ``(2,) * (k + l)``.
    """
    if block not in ("first", "last", "all"):
        raise ValueError(f"unknown block {block!r}")
    if isinstance(f, MixedTensorField):
        if block != "all":
            return f
        k, l = f.k, f.l
        grad = None
        if f.gradient is not None:
            grad = lambda x: cn.mixed_from_sym(cn.sym_table(f.partials(x)), k, l)  # noqa: E731
        return replace(f, values=lambda x: cn.mixed_from_sym(cn.sym_table(f.table(x)), k, l), gradient=grad)
    T = np.asarray(f)
    if k is None or l is None:
        raise ValueError("raw arrays need k and l")
    axes = {"first": range(k), "last": range(k, k + l), "all": None}[block]
    return dn.dense_sym(T, axes)


def full_sym(f: MixedTensorField) -> MixedTensorField:
    """``Sym f`` as a symmetric field of order ``k + l`` (orders ``(k + l, 0)``)."""
    grad = None
    if f.gradient is not None:
        grad = lambda x: cn.sym_table(f.partials(x))[..., None]  # noqa: E731
    return MixedTensorField(
        f.k + f.l, 0, lambda x: cn.sym_table(f.table(x))[..., None], grad, f.metric, f"Sym({f.label})"
    )


def apply_A(f: MixedTensorField) -> MixedTensorField:
    grad = None
    if f.gradient is not None:
        grad = lambda x: cn.apply_A(f.partials(x))  # noqa: E731
    return replace(f, values=lambda x: cn.apply_A(f.table(x)), gradient=grad, label=f"A({f.label})")


@lru_cache(maxsize=None)
def _linear_map(name, in_shape):
    """Matrix of a constant-coefficient table map, built from the generic routine."""
    fn = {"lam": lambda t: cn.lam(t, 1.0), "d_prime": cn.d_prime_table}[name]
    n = int(np.prod(in_shape))
    cols = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        cols.append(np.asarray(fn(e.reshape(in_shape)), dtype=float).ravel())
    return np.stack(cols, axis=1)


@lru_cache(maxsize=None)
def _connection_map(k, l):
    """Matrix ``B`` with ``correction = (grad alpha (x) u) @ B``.

    For ``g = exp(2 alpha) delta`` the Christoffel symbols are linear in the
    gradient of alpha. Rows are indexed ``(r, j)`` (gradient direction, input
    component), columns ``(p, i)`` (derivative slot, output component). Built
    by running the generic routine on unit inputs.
    """
    eye = np.eye(2)
    K = (k + 1) * (l + 1)
    B = np.zeros((2, K, 2, K))
    for r in range(2):
        nr = eye[r]
        gamma = eye[:, :, None] * nr[None, None, :] + eye[:, None, :] * nr[None, :, None] - eye[None, :, :] * nr[:, None, None]
        for j in range(K):
            u = np.zeros(K)
            u[j] = 1.0
            D = cn.covariant_table(u.reshape(k + 1, l + 1), np.zeros((2, k + 1, l + 1)), gamma)
            B[r, j] = -D.reshape(2, K)
    return B.reshape(2 * K, 2 * K)


def _apply_lam(t, factor):
    k, l = t.shape[-2], t.shape[-1]
    M = _linear_map("lam", (k, l))
    flat_t = t.reshape(t.shape[:-2] + (k * l,))
    return _mm(flat_t, M.T).reshape(t.shape[:-2] + (k + 1, l + 1)) * np.asarray(factor)[..., None, None]


def lambda_op(w: MixedTensorField) -> MixedTensorField:
    """Metric insertion ``S^(k-1) x S^(l-1) -> S^k x S^l``."""
    metric = w.metric

    def values(x):
        return _apply_lam(w.table(x), metric.conformal_factor(x))

    grad = None
    if w.gradient is not None and metric.analytic_gradient:

        def grad(x):
            e2a = metric.conformal_factor(x)
            na = metric.gradient(x)
            base = _apply_lam(w.table(x), 1.0)
            dbase = _apply_lam(w.partials(x), 1.0)
            return e2a[..., None, None, None] * (dbase + 2 * na[..., :, None, None] * base[..., None, :, :])

    return MixedTensorField(w.k + 1, w.l + 1, values, grad, metric, f"lambda({w.label})")


def cov_derivative(u: MixedTensorField, x) -> np.ndarray:
    """``D[..., p, h, a] = u_{I;p}`` at ``x``; one extra unsymmetrized index."""
    x = np.asarray(x, dtype=float)
    _check_disk(x)
    K = (u.k + 1) * (u.l + 1)
    lead = x.shape[:-1]
    U = u.table(x).reshape(lead + (1, K))
    n = u.metric.gradient(x)[..., :, None]
    D = u.partials(x).reshape(lead + (2 * K,)) - _mm((n * U).reshape(lead + (2 * K,)), _connection_map(u.k, u.l))
    return D.reshape(lead + (2, u.k + 1, u.l + 1))


def cov_derivative_reference(u: MixedTensorField, x) -> np.ndarray:
    """Same as :func:`cov_derivative` through the explicit Christoffel table."""
    x = np.asarray(x, dtype=float)
    return cn.covariant_table(u.table(x), u.partials(x), christoffels(u.metric, x))


def d_prime(u: MixedTensorField) -> MixedTensorField:
    """``S^(k-1) x S^l -> S^k x S^l``, derivative symmetrized into the first block."""
    k, l = u.k + 1, u.l
    M = _linear_map("d_prime", (2, k, l + 1))

    def values(x):
        D = cov_derivative(u, x)
        lead = D.shape[:-3]
        return _mm(D.reshape(lead + (-1,)), M.T).reshape(lead + (k + 1, l + 1))

    return MixedTensorField(k, l, values, None, u.metric, f"d'({u.label})")


def d_s(u: MixedTensorField, as_mixed=True) -> MixedTensorField:
    """Full symmetrization of the covariant derivative.

    With ``as_mixed`` the result is viewed in ``S^(k+1) x S^l``; otherwise it
    is returned as a symmetric field of order ``k + l + 1``.
    """
    k, l = u.k + 1, u.l
    if as_mixed:
        vals = lambda x: cn.mixed_from_sym(cn.d_s_table(cov_derivative(u, x)), k, l)  # noqa: E731
        return MixedTensorField(k, l, vals, None, u.metric, f"ds({u.label})")
    return MixedTensorField(
        k + l, 0, lambda x: cn.d_s_table(cov_derivative(u, x))[..., None], None, u.metric, f"ds({u.label})"
    )


def phi_evaluate(f: MixedTensorField, x, v):
    """``f(v, ..., v, rotate(v), ..., rotate(v))`` at ``x``."""
    return cn.phi_contract(f.table(x), v)


def im_lambda_residual(f: MixedTensorField, x) -> np.ndarray:
    """Distance from ``f(x)`` to the image of the pointwise metric insertion.

    Euclidean norm on canonical components. Accepts one point or an array of
    points ``(n, 2)``.
    """
    if f.k < 1 or f.l < 1:
        raise ValueError("metric insertion needs k, l >= 1")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x.reshape(-1, 2)
    tables = f.table(pts).reshape(len(pts), -1)
    factors = f.metric.conformal_factor(pts)
    out = np.empty(len(pts))
    for i in range(len(pts)):
        out[i] = table_residual(tables[i].reshape(f.shape), factors[i])
    return out[0] if single else out


def table_residual(t, factor=1.0) -> float:
    """Least-squares distance of one canonical table from the image of ``lam``."""
    k, l = t.shape[0] - 1, t.shape[1] - 1
    M = cn.lam_matrix(k, l, factor)
    Q, _ = np.linalg.qr(M)
    b = np.asarray(t, dtype=float).ravel()
    r = b - Q @ (Q.T @ b)
    return float(np.linalg.norm(r))
