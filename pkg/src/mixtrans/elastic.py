"""Shear-wave polarization in weakly anisotropic media.

A background isotropic medium with density ``rho`` and shear modulus ``mu``
carries shear rays along geodesics of ``(rho / mu) * g``. A small anisotropic
perturbation ``c`` rotates the polarization along a ray by the real phase

    theta = omega0 * integral of c(xi, v, xi, v) / (rho v_s^6) dt,

with ``xi = rotate(v)`` and ``v_s^2 = mu / rho``. To first order in
``omega0`` that phase is a mixed ray transform of order ``(2, 2)`` of the
field built by :func:`build_f_from_c`, which is what this module checks.
The imaginary unit is kept out of the numerics: the polarization factor is
``exp(-i theta)`` with ``theta`` real.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .geometry import ConformalMetric, GeodesicPath, InwardBoundaryPoint, flat, rotate, trace_rays
from .tensor_algebra.fields import (
    MixedTensorField,
    d_prime,
    disk_points,
    lambda_op,
    quasi_random,
)
from .transforms import FanGrid, mixed_integrand, sinogram, trace_grid
from .verification import CheckReport, TOL_QUADRATURE, kernel_pairs

__all__ = [
    "ElasticMedium",
    "RytovSolution",
    "shear_metric",
    "rytov_solve",
    "build_f_from_c",
    "symmetrize_stiffness",
    "check_linearization",
    "check_gauge",
    "isotropic",
    "constant_c_flat",
    "c1111_medium",
    "random_smooth_medium",
    "elastic_reports",
    "PRESETS",
]

SLOPE_RANGE = (1.7, 2.3)
TOL_REDUCTION = 1e-8
PHASE_FACTOR = "-1j"

Scalar = Union[float, Callable[[np.ndarray], np.ndarray]]


def _as_field(value, grad=None):
    """Return ``(values, gradient)`` callables; constants get a zero gradient."""
    if callable(value):
        return value, grad
    c = float(value)
    return (lambda x: np.full(np.shape(x)[:-1], c)), (lambda x: np.zeros(np.shape(x)))


def _stiffness(c):
    if c is None:
        t = np.zeros((2, 2, 2, 2))
        return lambda x: np.broadcast_to(t, np.shape(x)[:-1] + t.shape)
    if callable(c):
        return c
    t = np.asarray(c, dtype=float)
    if t.shape != (2, 2, 2, 2):
        raise ValueError("stiffness table must have shape (2, 2, 2, 2)")
    return lambda x: np.broadcast_to(t, np.shape(x)[:-1] + t.shape)


def symmetrize_stiffness(t):
    """Average a rank-4 table over ``c_jklm = c_kjlm = c_lmjk`` (and what they generate)."""
    t = np.asarray(t, dtype=float)
    perms = {(0, 1, 2, 3)}
    gens = [(1, 0, 2, 3), (2, 3, 0, 1)]
    while True:
        new = {tuple(p[g[i]] for i in range(4)) for p in perms for g in gens} | perms
        if new == perms:
            break
        perms = new
    return sum(np.transpose(t, p) for p in sorted(perms)) / len(perms)


@dataclass(frozen=True)
class ElasticMedium:
    """Isotropic background plus an anisotropic perturbation.

    Parameters
    ----------
    rho, mu : float or callable
        Density and shear modulus, positive on the disk. Callables map
        ``(..., 2)`` points to ``(...)``; ``rho_grad`` and ``mu_grad`` give
        their partials if known.
    lambda_lame : float or callable
        First Lame parameter; stored, not used by the shear computation.
    c : array (2, 2, 2, 2) or callable, optional
        Perturbation ``c_jklm``; a callable maps points to ``(..., 2, 2, 2, 2)``.
    omega0 : float
        Frequency scale of the linearization.
    base : ConformalMetric
        Background isothermal coordinates ``exp(2 alpha) * euclidean``.
    """

    rho: Scalar = 1.0
    mu: Scalar = 1.0
    lambda_lame: Scalar = 1.0
    c: object = None
    omega0: float = 1.0
    base: ConformalMetric = field(default_factory=flat)
    rho_grad: Optional[Callable] = None
    mu_grad: Optional[Callable] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")
        pts = np.concatenate([disk_points(64, seed=0), np.zeros((1, 2))])
        ratio = np.asarray(self.density(pts) / self.shear_modulus(pts))
        if not np.all(np.isfinite(ratio)) or np.any(ratio <= 0):
            raise ValueError("rho / mu must be positive on the disk")
        ct = self.stiffness(pts)
        err = max(
            np.max(np.abs(ct - np.swapaxes(ct, -4, -3))),
            np.max(np.abs(ct - np.moveaxis(ct, (-2, -1), (-4, -3)))),
        )
        if err > 1e-12 * max(1.0, float(np.max(np.abs(ct)))):
            raise ValueError(f"stiffness violates c_jklm = c_kjlm = c_lmjk (defect {err:.3g})")

    def density(self, x):
        return _as_field(self.rho)[0](np.asarray(x, dtype=float))

    def shear_modulus(self, x):
        return _as_field(self.mu)[0](np.asarray(x, dtype=float))

    def stiffness(self, x):
        return np.asarray(_stiffness(self.c)(np.asarray(x, dtype=float)), dtype=float)

    def shear_speed(self, x):
        """``v_s = sqrt(mu / rho)``."""
        return np.sqrt(self.shear_modulus(x) / self.density(x))

    def phase_weight(self, x):
        """``1 / (rho v_s^6) = rho^2 / mu^3``."""
        return self.density(x) ** 2 / self.shear_modulus(x) ** 3

    def with_omega0(self, omega0) -> "ElasticMedium":
        return replace(self, omega0=float(omega0))


def shear_metric(medium: ElasticMedium) -> ConformalMetric:
    """Conformal metric with exponent ``alpha + log(rho / mu) / 2``."""
    base = medium.base
    rho, rho_g = _as_field(medium.rho, medium.rho_grad)
    mu, mu_g = _as_field(medium.mu, medium.mu_grad)

    def alpha(x):
        return base.log_factor(x) + 0.5 * np.log(rho(x) / mu(x))

    grad = None
    if rho_g is not None and mu_g is not None and base.analytic_gradient:

        def grad(x):
            return base.gradient(x) + 0.5 * (rho_g(x) / rho(x)[..., None] - mu_g(x) / mu(x)[..., None])

    return ConformalMetric(alpha, grad, name=f"shear[{medium.name}]", params=dict(medium.params))


def _frame_contraction(ct, v):
    # c(xi, v, xi, v) with xi = rotate(v)
    xi = rotate(v)
    return np.einsum("...jlkm,...j,...l,...k,...m->...", ct, xi, v, xi, v)


def phase_integrand(medium: ElasticMedium):
    """``(x, v) -> omega0 / (rho v_s^6) * c(xi, v, xi, v)``."""
    w0 = medium.omega0
    return lambda x, v: w0 * medium.phase_weight(x) * _frame_contraction(medium.stiffness(x), v)


@dataclass
class RytovSolution:
    """Polarization in the ``(rotate(v), v)`` frame at both ends of one ray."""

    path: GeodesicPath
    zeta_a: np.ndarray
    zeta_b: np.ndarray
    phase: float
    omega0: float

    @property
    def remainder(self) -> float:
        """``|(zeta_1(b) - zeta_1(a)) zeta_1(a) + i theta zeta_1(a)^2|``."""
        z = self.zeta_a[0]
        return float(abs((self.zeta_b[0] - z) * z + 1j * self.phase * z * z))


def rytov_solve(medium: ElasticMedium, entry: InwardBoundaryPoint, step=1e-3, zeta_a=(1.0, 0.0), bundle=None):
    """Exact polarization transport along the shear ray through ``entry``.

    The first frame component picks up ``exp(-i theta)``; the second is
    constant. ``theta`` is accumulated at the RK4 stages of the ray.
    """
    metric = shear_metric(medium)
    if bundle is None:
        bundle = trace_rays(metric, [entry.beta], [entry.phi], step)
    theta = float(bundle.integrate(phase_integrand(medium))[0])
    za = np.asarray(zeta_a, dtype=complex)
    zb = np.array([np.exp(-1j * theta) * za[0], za[1]])
    return RytovSolution(bundle.path(0), za, zb, theta, medium.omega0)


def _f_table(ct):
    # f_jklm = (c_jlkm + c_jmkl) / 4 with (j, k) the first block and (l, m) the second
    F = (np.einsum("...jlkm->...jklm", ct) + np.einsum("...jmkl->...jklm", ct)) / 4.0
    out = np.empty(ct.shape[:-4] + (3, 3))
    for h in range(3):
        for a in range(3):
            idx = (0,) * h + (1,) * (2 - h) + (0,) * a + (1,) * (2 - a)
            out[..., h, a] = F[(Ellipsis,) + idx]
    return out, F


def build_f_from_c(medium: ElasticMedium) -> MixedTensorField:
    """Real part of the ``(2, 2)`` field whose transform linearizes the phase.

    ``f_jklm = (c_jlkm + c_jmkl) / (4 rho v_s^6)`` on the shear metric. The
    full field is ``-1j`` times this; the factor is stored as
    ``phase_factor``.
    """
    metric = shear_metric(medium)
    pts = np.concatenate([disk_points(16, seed=0), np.zeros((1, 2))])
    _, F = _f_table(medium.stiffness(pts))
    scale = max(1.0, float(np.max(np.abs(F))))
    for perm in [(1, 0, 2, 3), (0, 1, 3, 2)]:
        if np.max(np.abs(F - np.transpose(F, [0] + [1 + i for i in perm]))) > 1e-12 * scale:
            raise ValueError("f is not block symmetric; check the stiffness symmetries")

    def values(x):
        t, _ = _f_table(medium.stiffness(x))
        return t * medium.phase_weight(x)[..., None, None]

    f = MixedTensorField(2, 2, values, None, metric, f"f[{medium.name}]")
    object.__setattr__(f, "phase_factor", PHASE_FACTOR)
    return f


def _slope(omegas, rems):
    return float(np.polyfit(np.log(omegas), np.log(rems), 1)[0])


def check_linearization(
    medium: ElasticMedium,
    entry: InwardBoundaryPoint = InwardBoundaryPoint(math.pi, 0.0),
    omega0_list: Sequence[float] = (1e-1, 1e-2, 1e-3),
    step=1e-3,
    zeta_a=(1.0, 0.0),
    expected_phase_per_omega: Optional[float] = None,
) -> CheckReport:
    """Phase against ``2 omega0 L_22(f)`` and the ``O(omega0^2)`` remainder slope.

    ``expected_phase_per_omega`` adds an analytic oracle ``theta = value * omega0``.
    The reported residual is the worst reduction (or oracle) mismatch; the
    check fails if it exceeds 1e-8 or if the fitted slope leaves [1.7, 2.3].
    A medium with no perturbation has zero remainders and passes trivially.
    """
    omegas = [float(w) for w in omega0_list]
    if len(omegas) < 3 or any(omegas[i + 1] >= omegas[i] for i in range(len(omegas) - 1)):
        raise ValueError("need at least three decreasing omega0 values")
    metric = shear_metric(medium)
    bundle = trace_rays(metric, [entry.beta], [entry.phi], step)
    L = float(bundle.integrate(mixed_integrand(build_f_from_c(medium)))[0])
    thetas, rems, red = [], [], []
    for w0 in omegas:
        sol = rytov_solve(medium.with_omega0(w0), entry, step, zeta_a, bundle=bundle)
        thetas.append(sol.phase)
        rems.append(sol.remainder)
        red.append(abs(sol.phase - 2 * w0 * L))
        if expected_phase_per_omega is not None:
            red[-1] = max(red[-1], abs(sol.phase - expected_phase_per_omega * w0))
    trivial = all(r == 0 for r in rems)
    slope = float("nan") if trivial or any(r <= 0 for r in rems) else _slope(omegas, rems)
    slope_ok = trivial or SLOPE_RANGE[0] <= slope <= SLOPE_RANGE[1]
    worst = max(red)
    zb1 = [complex(np.exp(-1j * t) * complex(zeta_a[0])) for t in thetas]
    return CheckReport(
        f"linearization/{medium.name}",
        worst,
        TOL_REDUCTION,
        [{"beta": entry.beta, "phi": entry.phi, "omega0": omegas[int(np.argmax(red))]}],
        {
            "omega0": omegas,
            "theta": thetas,
            "L22": L,
            "remainder": rems,
            "slope": slope,
            "slope_range": list(SLOPE_RANGE),
            "zeta1_b_abs_defect": max(abs(abs(z) - abs(complex(zeta_a[0]))) for z in zb1),
        },
        passed=bool(worst <= TOL_REDUCTION and slope_ok),
    )


def check_gauge(medium: ElasticMedium, trials=2, seed=0, grid=FanGrid(16, 16), step=1e-3, bundles=None) -> CheckReport:
    """``L_22`` sinograms of ``f`` and ``f + d'u + lambda w`` agree."""
    f = build_f_from_c(medium)
    metric = f.metric
    if bundles is None:
        bundles = trace_grid(metric, grid, step)
    base = sinogram(f, grid=grid, step=step, bundles=bundles).values
    us, ws = kernel_pairs(2, 2, metric, trials, seed)
    diffs = []
    for u, w in zip(us, ws):
        g = f + d_prime(u) + lambda_op(w)
        diffs.append(np.abs(sinogram(g, grid=grid, step=step, bundles=bundles).values - base))
    diffs = np.array(diffs)
    i = int(np.argmax(diffs))
    t, ib, ip = np.unravel_index(i, diffs.shape)
    return CheckReport(
        f"gauge/{medium.name}",
        float(diffs.max()),
        TOL_QUADRATURE,
        [{"trial": int(t), "beta": float(grid.betas[ib]), "phi": float(grid.phis[ip])}],
        {"sinogram_max": float(np.max(np.abs(base)))},
    )


# ---------------------------------------------------------------- presets


def isotropic(rho=1.0, mu=1.0, lambda_lame=1.0, omega0=1.0) -> ElasticMedium:
    """No perturbation; the phase vanishes."""
    return ElasticMedium(rho, mu, lambda_lame, None, omega0, name="isotropic", params={"rho": rho, "mu": mu})


def constant_c_flat(omega0=1.0) -> ElasticMedium:
    """``c_1212 = 1`` and its symmetric images on the flat unit-speed disk.

    Along the horizontal diameter the frame contraction is 1, so the phase is
    ``2 omega0`` and the transform of the linearizing field is 1.
    """
    t = np.zeros((2, 2, 2, 2))
    for idx in [(0, 1, 0, 1), (1, 0, 1, 0), (0, 1, 1, 0), (1, 0, 0, 1)]:
        t[idx] = 1.0
    return ElasticMedium(1.0, 1.0, 1.0, t, omega0, name="constant_c_flat", params={"c1212": 1.0})


def c1111_medium(omega0=1.0) -> ElasticMedium:
    """Only ``c_1111 = 1``; ``f_1111 = 1/2``."""
    t = np.zeros((2, 2, 2, 2))
    t[0, 0, 0, 0] = 1.0
    return ElasticMedium(1.0, 1.0, 1.0, t, omega0, name="c1111", params={"c1111": 1.0})


def random_smooth_medium(seed=0, eps=0.05, omega0=1.0) -> ElasticMedium:
    """``rho = 1``, ``mu = exp(-2 eps |x|^2)`` and an affine symmetric ``c``."""
    q = quasi_random(3, 16, seed)
    C = [symmetrize_stiffness(row.reshape(2, 2, 2, 2)) for row in q]

    def c(x):
        x = np.asarray(x, dtype=float)
        return C[0] + x[..., 0, None, None, None, None] * C[1] + x[..., 1, None, None, None, None] * C[2]

    def mu(x):
        return np.exp(-2 * eps * np.sum(x * x, axis=-1))

    def mu_grad(x):
        return -4 * eps * mu(x)[..., None] * x

    def rho_grad(x):
        return np.zeros(np.shape(x))

    return ElasticMedium(
        1.0, mu, 1.0, c, omega0, flat(), rho_grad, mu_grad, name="random_smooth", params={"seed": seed, "eps": eps}
    )


PRESETS = {
    "isotropic": isotropic,
    "constant_c_flat": constant_c_flat,
    "c1111": c1111_medium,
    "random_smooth": random_smooth_medium,
}


def elastic_reports(seed=0, step=1e-3, omega0_list=(1e-1, 1e-2, 1e-3)):
    """Linearization on every preset and the gauge check on two of them."""
    out = [
        check_linearization(isotropic(), omega0_list=omega0_list, step=step),
        check_linearization(constant_c_flat(), omega0_list=omega0_list, step=step, expected_phase_per_omega=2.0),
        check_linearization(c1111_medium(), omega0_list=omega0_list, step=step, expected_phase_per_omega=0.0),
        check_linearization(random_smooth_medium(seed), InwardBoundaryPoint(0.3, 0.4), omega0_list, step),
        check_gauge(constant_c_flat(), seed=seed, step=step),
    ]
    return out
