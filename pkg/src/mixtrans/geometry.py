"""Conformally Euclidean metrics on the closed unit disk and their geodesics.

The metric is ``g = exp(2 alpha(x)) (dx1^2 + dx2^2)``. Geodesics are traced
with fixed-step classic RK4 on the state ``(x, v)``; the exit from the disk is
located by bisection on the last step. All tracing is vectorized over a batch
of rays, and every RK4 stage is recorded so that line integrals can be
accumulated afterwards with exactly the weights an augmented ODE state would
receive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as P

__all__ = [
    "DomainError",
    "TrappedRayError",
    "ConformalMetric",
    "flat",
    "gaussian_bump",
    "polynomial_metric",
    "christoffels",
    "norm_g",
    "inner_g",
    "rotate",
    "InwardBoundaryPoint",
    "RayBundle",
    "GeodesicPath",
    "trace_rays",
    "trace_geodesic",
    "parallel_transport",
    "transport_bundle",
    "entry_points",
    "entry_directions",
    "SimplicityReport",
    "simplicity_diagnostic",
]

# RK4 stages of an exit step may overshoot the circle by O(step^4)
DISK_TOL = 1e-6
EXIT_TOL = 1e-12
FD_STEP = 1e-5


class DomainError(ValueError):
    """A point lies outside the closed unit disk."""


class TrappedRayError(RuntimeError):
    """A geodesic failed to leave the disk within the step cap."""

    def __init__(self, message, beta=None, phi=None):
        super().__init__(message)
        self.beta = beta
        self.phi = phi


def _check_disk(x):
    r2 = np.sum(np.asarray(x, dtype=float) ** 2, axis=-1)
    if np.any(r2 > (1.0 + DISK_TOL) ** 2):
        raise DomainError(f"point outside the closed unit disk (|x| = {math.sqrt(np.max(r2)):.12g})")


@dataclass(frozen=True)
class ConformalMetric:
    """The metric ``exp(2 alpha) * euclidean`` on the closed unit disk.

    Parameters
    ----------
    alpha : callable
        Maps points of shape ``(..., 2)`` to values of shape ``(...)``.
    grad_alpha : callable, optional
        Maps points of shape ``(..., 2)`` to partials of shape ``(..., 2)``.
        When omitted, central differences with step ``1e-5`` are used and
        :attr:`analytic_gradient` is False.
    name, params
        Preset bookkeeping, carried into sinogram metadata.
    simplicity_hint : float, optional
        Upper bound on ``|grad alpha|`` if known.
    """

    alpha: Callable[[np.ndarray], np.ndarray]
    grad_alpha: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)
    simplicity_hint: Optional[float] = None

    @property
    def analytic_gradient(self) -> bool:
        return self.grad_alpha is not None

    def log_factor(self, x):
        return np.asarray(self.alpha(np.asarray(x, dtype=float)), dtype=float)

    def conformal_factor(self, x):
        """``exp(2 alpha(x))``, the coefficient of the Euclidean metric."""
        return np.exp(2.0 * self.log_factor(x))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        if self.grad_alpha is not None:
            return np.asarray(self.grad_alpha(x), dtype=float)
        out = np.empty(x.shape, dtype=float)
        for i in range(2):
            e = np.zeros(2)
            e[i] = FD_STEP
            out[..., i] = (self.alpha(x + e) - self.alpha(x - e)) / (2 * FD_STEP)
        return out


def flat() -> ConformalMetric:
    """The Euclidean disk."""

    def alpha(x):
        return np.zeros(np.shape(x)[:-1])

    def grad(x):
        return np.zeros(np.shape(x))

    return ConformalMetric(alpha, grad, name="flat", params={}, simplicity_hint=0.0)


def gaussian_bump(amplitude=0.05, center=(0.0, 0.0), width=1.0) -> ConformalMetric:
    """``alpha(x) = amplitude * exp(-|x - center|^2 / width^2)``."""
    c = np.asarray(center, dtype=float)
    s2 = float(width) ** 2
    a = float(amplitude)

    def alpha(x):
        d = x - c
        return a * np.exp(-np.sum(d * d, axis=-1) / s2)

    def grad(x):
        d = x - c
        e = a * np.exp(-np.sum(d * d, axis=-1) / s2)
        return (-2.0 / s2) * e[..., None] * d

    hint = abs(a) * math.sqrt(2.0 / s2) * math.exp(-0.5)
    return ConformalMetric(
        alpha,
        grad,
        name="gaussian_bump",
        params={"amplitude": a, "center": list(map(float, c)), "width": float(width)},
        simplicity_hint=hint,
    )


def polynomial_metric(coefficients) -> ConformalMetric:
    """``alpha(x) = sum c[i, j] x1^i x2^j`` with analytic partials."""
    c = np.atleast_2d(np.asarray(coefficients, dtype=float))
    c1 = P.polyder(c, axis=0)
    c2 = P.polyder(c, axis=1)

    def alpha(x):
        return P.polyval2d(x[..., 0], x[..., 1], c)

    def grad(x):
        return np.stack(
            [P.polyval2d(x[..., 0], x[..., 1], c1), P.polyval2d(x[..., 0], x[..., 1], c2)], axis=-1
        )

    return ConformalMetric(alpha, grad, name="polynomial", params={"coefficients": c.tolist()})


def christoffels(metric: ConformalMetric, x) -> np.ndarray:
    """Christoffel symbols ``G[..., p, i, j]`` of ``exp(2 alpha) delta``.

    ``G^p_ij = delta_pi d_j alpha + delta_pj d_i alpha - delta_ij d_p alpha``.
    """
    x = np.asarray(x, dtype=float)
    _check_disk(x)
    n = metric.gradient(x)
    eye = np.eye(2)
    return (
        eye[:, :, None] * n[..., None, None, :]
        + eye[:, None, :] * n[..., None, :, None]
        - eye[None, :, :] * n[..., :, None, None]
    )


def inner_g(metric: ConformalMetric, x, u, v):
    return metric.conformal_factor(x) * np.sum(np.asarray(u) * np.asarray(v), axis=-1)


def norm_g(metric: ConformalMetric, x, v):
    return np.sqrt(inner_g(metric, x, v, v))


def rotate(v):
    """The rotation ``(v1, v2) -> (v2, -v1)``.

    It is orthogonal to ``v`` and norm preserving for every conformal metric.
    """
    v = np.asarray(v)
    return np.stack([v[..., 1], -v[..., 0]], axis=-1)


def _geodesic_rhs(metric, x, v):
    # x'' = -G(v, v) = -2 (v . grad a) v + |v|^2 grad a
    n = metric.gradient(x)
    vn = np.sum(v * n, axis=-1, keepdims=True)
    vv = np.sum(v * v, axis=-1, keepdims=True)
    return -2.0 * vn * v + vv * n


def _transport_rhs(metric, x, v, eta):
    n = metric.gradient(x)
    vn = np.sum(v * n, axis=-1, keepdims=True)
    en = np.sum(eta * n, axis=-1, keepdims=True)
    ve = np.sum(v * eta, axis=-1, keepdims=True)
    return -(v * en + eta * vn - ve * n)


@dataclass(frozen=True)
class InwardBoundaryPoint:
    """An inward unit vector at ``x = (cos beta, sin beta)``.

    ``phi`` is the angle from the inward Euclidean normal ``-x``, positive
    counterclockwise.
    """

    beta: float
    phi: float

    @property
    def x(self) -> np.ndarray:
        return np.array([math.cos(self.beta), math.sin(self.beta)])

    def is_tangential(self) -> bool:
        return abs(self.phi) >= math.pi / 2

    def direction(self, metric: ConformalMetric) -> np.ndarray:
        """The g-unit inward direction."""
        return entry_directions(metric, np.array([self.beta]), np.array([self.phi]))[0]


def entry_points(beta):
    beta = np.asarray(beta, dtype=float)
    return np.stack([np.cos(beta), np.sin(beta)], axis=-1)


def entry_directions(metric, beta, phi):
    beta = np.asarray(beta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    x = entry_points(beta)
    ang = beta + math.pi + phi
    scale = np.exp(-metric.log_factor(x))
    return scale[..., None] * np.stack([np.cos(ang), np.sin(ang)], axis=-1)


@dataclass
class RayBundle:
    """A batch of traced geodesics with their RK4 quadrature nodes.

    Attributes
    ----------
    beta, phi : ndarray, shape (n,)
    step : float
    nodes : ndarray, shape (S, n, 4, 4)
        State ``(x1, x2, v1, v2)`` at each RK4 stage of each step.
    weights : ndarray, shape (S, n, 4)
        ``h/6 * (1, 2, 2, 1)`` for the step size actually taken; zero after
        the ray has left the disk.
    samples : ndarray, shape (S + 1, n, 4)
        State at step boundaries; frozen at the exit state once a ray is out.
    times : ndarray, shape (S + 1, n)
    tau : ndarray, shape (n,)
    nsteps : ndarray, shape (n,)
        Number of recorded steps per ray, the last one being the partial
        exit step.
    """

    beta: np.ndarray
    phi: np.ndarray
    step: float
    nodes: np.ndarray
    weights: np.ndarray
    samples: np.ndarray
    times: np.ndarray
    tau: np.ndarray
    nsteps: np.ndarray

    @property
    def size(self) -> int:
        return len(self.beta)

    def integrate(self, integrand, chunk_points=20_000) -> np.ndarray:
        """Accumulate ``integrand(x, v)`` over every ray.

        Equivalent to carrying the integral as an extra RK4 state, since the
        integrand does not depend on the accumulated value.
        """
        S, n = self.weights.shape[:2]
        out = 0.0
        rows = max(1, chunk_points // max(1, 4 * n))
        for s0 in range(0, S, rows):
            blk = self.nodes[s0 : s0 + rows]
            vals = np.asarray(integrand(blk[..., :2], blk[..., 2:]), dtype=float)
            # trailing axes of a vector-valued integrand are carried through
            per_step = np.einsum("snq...,snq->sn...", vals, self.weights[s0 : s0 + rows])
            # step-by-step accumulation keeps each ray's sum independent of the batch
            for row in per_step:
                out = out + row
        return out if S else np.zeros(n)

    def path(self, i: int) -> "GeodesicPath":
        m = int(self.nsteps[i]) + 1
        return GeodesicPath(
            times=self.times[:m, i].copy(),
            x=self.samples[:m, i, :2].copy(),
            v=self.samples[:m, i, 2:].copy(),
            tau=float(self.tau[i]),
            step=self.step,
            beta=float(self.beta[i]),
            phi=float(self.phi[i]),
        )


@dataclass
class GeodesicPath:
    """Samples ``(t_i, x_i, v_i)`` of a single unit-speed geodesic.

    The last sample is the exit point at ``t = tau``; the final interval is
    shorter than ``step`` in general.
    """

    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    tau: float
    step: float
    beta: float = float("nan")
    phi: float = float("nan")

    def __len__(self):
        return len(self.times)


def _rk4_stages(metric, x, v, h):
    h = h[:, None]
    a1 = _geodesic_rhs(metric, x, v)
    x2, v2 = x + 0.5 * h * v, v + 0.5 * h * a1
    a2 = _geodesic_rhs(metric, x2, v2)
    x3, v3 = x + 0.5 * h * v2, v + 0.5 * h * a2
    a3 = _geodesic_rhs(metric, x3, v3)
    x4, v4 = x + h * v3, v + h * a3
    a4 = _geodesic_rhs(metric, x4, v4)
    xn = x + h / 6 * (v + 2 * v2 + 2 * v3 + v4)
    vn = v + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
    stages = np.stack(
        [
            np.concatenate([x, v], axis=-1),
            np.concatenate([x2, v2], axis=-1),
            np.concatenate([x3, v3], axis=-1),
            np.concatenate([x4, v4], axis=-1),
        ],
        axis=1,
    )
    return xn, vn, stages


def _exit_step(metric, x, v, h, tol=EXIT_TOL, max_iter=200):
    """Bisect for the step ``h'`` in ``(0, h]`` landing on ``|x|^2 = 1``."""
    lo = np.zeros_like(h)
    hi = h.copy()
    best = h.copy()
    done = np.zeros(h.shape, dtype=bool)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        xm, _, _ = _rk4_stages(metric, x, v, mid)
        g = np.sum(xm * xm, axis=-1) - 1.0
        hit = (np.abs(g) <= tol) & ~done
        best[hit] = mid[hit]
        done |= hit
        if done.all():
            break
        inside = g < 0
        lo = np.where(inside & ~done, mid, lo)
        hi = np.where(~inside & ~done, mid, hi)
        stalled = (hi - lo <= 4 * np.finfo(float).eps * h) & ~done
        best[stalled] = mid[stalled]
        done |= stalled
    return best


def trace_rays(
    metric: ConformalMetric,
    beta,
    phi,
    step: float,
    allow_tangential: bool = False,
) -> RayBundle:
    """Trace the geodesics entering at boundary angles ``beta`` with incidence ``phi``.

    Raises
    ------
    ValueError
        Non-positive step, or a tangential entry without ``allow_tangential``.
    TrappedRayError
        A ray needs more than ``20 / step`` steps.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    beta, phi = np.broadcast_arrays(beta, phi)
    beta, phi = beta.copy(), phi.copy()
    n = beta.size
    tangential = np.abs(phi) >= math.pi / 2
    if tangential.any() and not allow_tangential:
        i = int(np.flatnonzero(tangential)[0])
        raise ValueError(f"tangential entry at beta={beta[i]!r}, phi={phi[i]!r}")

    x = entry_points(beta)
    v = entry_directions(metric, beta, np.clip(phi, -math.pi / 2, math.pi / 2))
    active = ~tangential
    t = np.zeros(n)
    tau = np.zeros(n)
    nsteps = np.zeros(n, dtype=int)
    cap = int(math.ceil(10 * 2.0 / step))
    stage_w = np.array([1.0, 2.0, 2.0, 1.0]) / 6.0

    nodes, weights, samples, times = [], [], [np.concatenate([x, v], axis=-1)], [t.copy()]
    h_full = np.full(n, float(step))
    it = 0
    while active.any():
        if it >= cap:
            i = int(np.flatnonzero(active)[0])
            raise TrappedRayError(
                f"ray did not exit after {cap} steps (beta={beta[i]!r}, phi={phi[i]!r})",
                beta=float(beta[i]),
                phi=float(phi[i]),
            )
        it += 1
        h = np.where(active, h_full, 0.0)
        xn, vn, stages = _rk4_stages(metric, x, v, h)
        out = active & (np.sum(xn * xn, axis=-1) > 1.0)
        if out.any():
            idx = np.flatnonzero(out)
            hx = _exit_step(metric, x[idx], v[idx], h[idx])
            h[idx] = hx
            xe, ve, se = _rk4_stages(metric, x[idx], v[idx], hx)
            xn[idx], vn[idx], stages[idx] = xe, ve, se
        nodes.append(stages)
        weights.append(h[:, None] * stage_w[None, :])
        x = np.where(active[:, None], xn, x)
        v = np.where(active[:, None], vn, v)
        t = t + h
        nsteps += active
        tau = np.where(out, t, tau)
        active = active & ~out
        samples.append(np.concatenate([x, v], axis=-1))
        times.append(t.copy())

    if not nodes:
        nodes = np.zeros((0, n, 4, 4))
        weights = np.zeros((0, n, 4))
    else:
        nodes = np.stack(nodes)
        weights = np.stack(weights)
    return RayBundle(
        beta=beta,
        phi=phi,
        step=float(step),
        nodes=nodes,
        weights=weights,
        samples=np.stack(samples),
        times=np.stack(times),
        tau=tau,
        nsteps=nsteps,
    )


def trace_geodesic(
    metric: ConformalMetric, entry: InwardBoundaryPoint, step: float, allow_tangential=False
) -> GeodesicPath:
    """Trace a single geodesic; see :func:`trace_rays`."""
    return trace_rays(metric, [entry.beta], [entry.phi], step, allow_tangential).path(0)


def _transport_samples(metric, times, x, v, eta0):
    # times (m, n), x and v (m, n, 2), eta0 (n, 2); zero-length steps are no-ops
    eta = np.array(eta0, dtype=float)
    out = np.empty(x.shape)
    out[0] = eta
    acc = _geodesic_rhs(metric, x, v)
    for i in range(len(times) - 1):
        h = (times[i + 1] - times[i])[:, None]
        xa, va, xb, vb = x[i], v[i], x[i + 1], v[i + 1]
        xm = 0.5 * (xa + xb) + h / 8 * (va - vb)
        vm = 0.5 * (va + vb) + h / 8 * (acc[i] - acc[i + 1])
        k1 = _transport_rhs(metric, xa, va, eta)
        k2 = _transport_rhs(metric, xm, vm, eta + 0.5 * h * k1)
        k3 = _transport_rhs(metric, xm, vm, eta + 0.5 * h * k2)
        k4 = _transport_rhs(metric, xb, vb, eta + h * k3)
        eta = eta + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = eta
    return out


def parallel_transport(metric: ConformalMetric, path: GeodesicPath, eta0) -> np.ndarray:
    """Parallel transport of ``eta0`` along the samples of ``path``.

    Integrates ``eta' = -G(v, eta)`` with RK4 using only the stored samples;
    midpoint states come from cubic Hermite interpolation of the trajectory,
    so the result is independent of the tracer's internal stages.

    Returns
    -------
    ndarray, shape (len(path), 2)
    """
    eta0 = np.asarray(eta0, dtype=float).reshape(1, 2)
    out = _transport_samples(metric, path.times[:, None], path.x[:, None], path.v[:, None], eta0)
    return out[:, 0]


def transport_bundle(metric: ConformalMetric, bundle: RayBundle, eta0=None) -> np.ndarray:
    """Parallel transport along every ray of a bundle at once.

    ``eta0`` defaults to ``rotate(v(0))``. Returns shape ``(S + 1, n, 2)``
    aligned with ``bundle.samples``; values are frozen after exit.
    """
    x, v = bundle.samples[..., :2], bundle.samples[..., 2:]
    if eta0 is None:
        eta0 = rotate(v[0])
    return _transport_samples(metric, bundle.times, x, v, eta0)


@dataclass
class SimplicityReport:
    conjugate_point: bool
    trapped: bool
    message: str
    witness: Optional[tuple] = None

    @property
    def ok(self) -> bool:
        return not (self.conjugate_point or self.trapped)


def _gaussian_curvature(metric, x):
    # K = -exp(-2 alpha) * laplacian(alpha), by central differences of grad alpha
    lap = np.zeros(np.shape(x)[:-1])
    for i in range(2):
        e = np.zeros(2)
        e[i] = FD_STEP
        lap += (metric.gradient(x + e)[..., i] - metric.gradient(x - e)[..., i]) / (2 * FD_STEP)
    return -np.exp(-2 * metric.log_factor(x)) * lap


def simplicity_diagnostic(metric: ConformalMetric, fan=(64, 64), step=1e-2, phi_max=None) -> SimplicityReport:
    """Heuristic check for conjugate points along a fan of geodesics.

    Integrates the scalar Jacobi equation ``y'' + K y = 0`` with ``y(0) = 0``
    and ``y'(0) = 1`` along each traced ray and reports the first zero of
    ``y`` after the start. This is a diagnostic, not a proof of simplicity.
    """
    n_beta, n_phi = fan
    if phi_max is None:
        phi_max = math.pi / 2 * (1 - 1.0 / n_phi)
    b = 2 * math.pi * np.arange(n_beta) / n_beta
    p = -phi_max + 2 * phi_max * np.arange(n_phi) / n_phi
    B, F = np.meshgrid(b, p, indexing="ij")
    try:
        bundle = trace_rays(metric, B.ravel(), F.ravel(), step)
    except TrappedRayError as exc:
        return SimplicityReport(False, True, str(exc), (exc.beta, exc.phi))

    S = bundle.weights.shape[0]
    y = np.zeros(bundle.size)
    dy = np.ones(bundle.size)
    for s in range(S):
        h = bundle.weights[s, :, 0] * 6.0
        st = bundle.nodes[s]
        K1 = _gaussian_curvature(metric, st[:, 0, :2])
        K2 = _gaussian_curvature(metric, st[:, 1, :2])
        K3 = _gaussian_curvature(metric, st[:, 2, :2])
        K4 = _gaussian_curvature(metric, st[:, 3, :2])
        # RK4 on (y, y') with K at the recorded stage points
        k1y, k1d = dy, -K1 * y
        k2y, k2d = dy + 0.5 * h * k1d, -K2 * (y + 0.5 * h * k1y)
        k3y, k3d = dy + 0.5 * h * k2d, -K3 * (y + 0.5 * h * k2y)
        k4y, k4d = dy + h * k3d, -K4 * (y + h * k3y)
        y_new = y + h / 6 * (k1y + 2 * k2y + 2 * k3y + k4y)
        dy = dy + h / 6 * (k1d + 2 * k2d + 2 * k3d + k4d)
        moving = h > 0
        crossed = moving & (y_new <= 0) & (bundle.times[s] > 0)
        if crossed.any():
            i = int(np.flatnonzero(crossed)[0])
            return SimplicityReport(
                True,
                False,
                f"Jacobi field vanishes at t={bundle.times[s + 1, i]:.6g} "
                f"(beta={bundle.beta[i]:.6g}, phi={bundle.phi[i]:.6g})",
                (float(bundle.beta[i]), float(bundle.phi[i])),
            )
        y = np.where(moving, y_new, y)
    return SimplicityReport(False, False, "no conjugate point detected")
