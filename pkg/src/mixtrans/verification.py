"""Numeric checks of the kernel and structure identities for mixed ray transforms.

Every check returns a :class:`CheckReport` with the worst residual, the
tolerance it is held to and where the worst case occurred. Random inputs
come from scrambled Halton draws with a fixed seed, so reports are
reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .geometry import ConformalMetric, flat, gaussian_bump, rotate, trace_rays, transport_bundle
from .tensor_algebra import canonical as cn
from .tensor_algebra import fields as fl
from .tensor_algebra.fields import (
    MixedTensorField,
    apply_A,
    basis_fH,
    basis_fH0,
    basis_fH_count,
    boundary_vanishing,
    d_prime,
    d_s,
    disk_points,
    full_sym,
    im_lambda_residual,
    lambda_op,
    quasi_random,
    random_polynomial_field,
)
from .transforms import FanGrid, geodesic_integrand, mixed_integrand, reduction_sign, sinogram, trace_grid

__all__ = [
    "CheckReport",
    "TOL_ALGEBRA",
    "TOL_MEMBERSHIP",
    "TOL_QUADRATURE",
    "NEGATIVE_CONTROL_THRESHOLD",
    "NEGATIVE_CONTROL_PINNED",
    "kernel_pairs",
    "kernel_sinograms",
    "check_kernel_forward",
    "check_forward_reduction",
    "check_AsymA_structure",
    "check_ds_dprime",
    "check_commutation",
    "check_transport_lemma",
    "check_involution",
    "check_lambda_kernel",
    "check_negative_control",
    "order_pairs",
    "severity",
    "run_suite",
]

TOL_ALGEBRA = 1e-12
TOL_MEMBERSHIP = 1e-10
TOL_QUADRATURE = 1e-6
TOL_REDUCTION = 1e-10
TOL_DS = 1e-9
TOL_COMMUTE = 1e-10
TOL_TRANSPORT = 1e-8
TRANSPORT_NOISE_FLOOR = 1e-12

# a random (1, 1) polynomial field, seed 3, flat disk, 16 x 16 grid at step 1e-3
NEGATIVE_CONTROL_PINNED = 1.7566851522948919
NEGATIVE_CONTROL_THRESHOLD = 1e-2


@dataclass
class CheckReport:
    """Outcome of one identity check; ``passed`` iff ``max_residual <= tolerance``."""

    name: str
    max_residual: float
    tolerance: float
    witnesses: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    passed: Optional[bool] = None

    def __post_init__(self):
        self.max_residual = float(self.max_residual)
        if self.passed is None:
            self.passed = bool(self.max_residual <= self.tolerance)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def _report(name, residuals, tol, witness_of, **details):
    residuals = np.asarray(residuals, dtype=float).ravel()
    if residuals.size == 0:
        return CheckReport(name, 0.0, tol, [], details)
    i = int(np.argmax(residuals))
    return CheckReport(name, residuals[i], tol, [witness_of(i)], details)


def severity(r: CheckReport) -> float:
    """Residual relative to tolerance; exact checks count only when nonzero."""
    if r.tolerance > 0:
        return r.max_residual / r.tolerance
    return math.inf if r.max_residual > 0 else 0.0


def _merge(name, reports, tol=None, **details):
    """Combine sub-reports; passes iff every sub-report passes."""
    worst = max(reports, key=severity)
    sub = {r.name: {"max_residual": r.max_residual, "tolerance": r.tolerance, "pass": r.passed} for r in reports}
    return CheckReport(
        name,
        worst.max_residual,
        worst.tolerance if tol is None else tol,
        worst.witnesses,
        {"sub_checks": sub, **details},
        passed=all(r.passed for r in reports),
    )


def order_pairs(k_max: int, min_k=1, min_l=1):
    """All ``(k, l)`` with ``k >= min_k``, ``l >= min_l`` and ``k + l <= k_max``."""
    return [(k, l) for m in range(k_max + 1) for k in range(min_k, m + 1) for l in [m - k] if l >= min_l]


def _name(base, k=None, l=None, metric=None):
    parts = [base]
    if k is not None:
        parts.append(f"k={k},l={l}")
    if metric is not None:
        parts.append(metric.name)
    return "/".join(parts)


# ---------------------------------------------------------------- kernel battery


def kernel_pairs(k, l, metric, trials=8, seed=0, degree=2):
    """Random ``(u, w)`` with ``u`` vanishing on the boundary circle."""
    us = [boundary_vanishing(p) for p in random_polynomial_field(k - 1, l, degree, trials, seed, metric)]
    ws = random_polynomial_field(k - 1, l - 1, degree, trials, seed + 1, metric)
    return us, ws


def _stack_coefficients(fields_):
    cs = [f.coefficients for f in fields_]
    d1 = max(c.shape[2] for c in cs)
    d2 = max(c.shape[3] for c in cs)
    out = np.zeros((len(cs),) + cs[0].shape[:2] + (d1, d2))
    for i, c in enumerate(cs):
        out[i, :, :, : c.shape[2], : c.shape[3]] = c
    return out.reshape((-1,) + out.shape[2:])


class _KernelBatch:
    """Integrand of ``d'u_i + lambda w_i`` for a batch of polynomial pairs.

    Evaluates the same pipeline as ``mixed_integrand(d_prime(u) + lambda_op(w))``
    but shares the monomial basis, metric data and direction powers across the
    batch; the integrand returns one value per pair.
    """

    def __init__(self, us, ws, metric):
        self.B = len(us)
        self.k, self.l = us[0].k + 1, us[0].l
        self.metric = metric
        self.pu = fl._Polynomial(_stack_coefficients(us))
        self.pw = fl._Polynomial(_stack_coefficients(ws))
        self.Ku = self.k * (self.l + 1)
        self.Kw = self.k * self.l
        self.conn = fl._connection_map(self.k - 1, self.l)
        self.mdp = fl._linear_map("d_prime", (2, self.k, self.l + 1)).T
        self.mlam = fl._linear_map("lam", (self.k, self.l)).T

    def __call__(self, x, v):
        lead = x.shape[:-1]
        B, Ku = self.B, self.Ku
        U = self.pu.values(x).reshape(lead + (B, 1, Ku))
        dU = self.pu.gradient(x).reshape(lead + (2, B, Ku))
        dU = np.moveaxis(dU, -3, -2).reshape(lead + (B, 2 * Ku))
        n = self.metric.gradient(x)[..., None, :, None]
        D = dU - fl._mm((n * U).reshape(lead + (B, 2 * Ku)), self.conn)
        f = fl._mm(D, self.mdp)
        W = self.pw.values(x).reshape(lead + (B, self.Kw))
        f += fl._mm(W, self.mlam) * self.metric.conformal_factor(x)[..., None, None]
        return cn.phi_contract(f.reshape(lead + (B, self.k + 1, self.l + 1)), v[..., None, :])


def kernel_sinograms(us, ws, grid=FanGrid(16, 16), step=1e-3, bundles=None, threads=None) -> np.ndarray:
    """Sinograms of ``L(d'u_i + lambda w_i)``, shape ``(len(us), n_beta, n_phi)``.

    Polynomial pairs are evaluated as one batch; other fields fall back to
    one :func:`sinogram` per pair.
    """
    if not us:
        return np.zeros((0, grid.n_beta, grid.n_phi))
    metric = us[0].metric
    if bundles is None:
        bundles = trace_grid(metric, grid, step, threads)
    if all(hasattr(f, "coefficients") for f in list(us) + list(ws)):
        integrand = _KernelBatch(us, ws, metric)
        vals = np.concatenate([b.integrate(integrand) for b in bundles])  # (nodes, B)
        return vals.T.reshape(len(us), grid.n_beta, grid.n_phi)
    return np.stack([sinogram(d_prime(u) + lambda_op(w), grid=grid, bundles=bundles).values for u, w in zip(us, ws)])


def check_kernel_forward(
    k,
    l,
    metric: ConformalMetric = None,
    trials=8,
    seed=0,
    grid=FanGrid(16, 16),
    step=1e-3,
    pairs=None,
    bundles=None,
    threads=None,
    tol=TOL_QUADRATURE,
) -> CheckReport:
    """Sinogram max of ``L(d'u + lambda w)`` over random pairs.

    ``pairs`` overrides the random draw with explicit ``(us, ws)`` lists.
    """
    if k < 1 or l < 1:
        raise ValueError("kernel check needs k, l >= 1")
    metric = metric or flat()
    us, ws = pairs if pairs is not None else kernel_pairs(k, l, metric, trials, seed)
    sino = np.abs(kernel_sinograms(us, ws, grid, step, bundles, threads))
    betas, phis = grid.betas, grid.phis

    def witness(i):
        t, ib, ip = np.unravel_index(i, sino.shape)
        return {"trial": int(t), "beta": float(betas[ib]), "phi": float(phis[ip])}

    per_trial = [float(s.max()) for s in sino] if sino.size else []
    return _report(_name("kernel_forward", k, l, metric), sino, tol, witness, step=step, per_trial_max=per_trial)


def check_negative_control(
    k=1, l=1, seed=3, grid=FanGrid(16, 16), step=1e-3, threshold=NEGATIVE_CONTROL_THRESHOLD, bundles=None
) -> CheckReport:
    """A random field outside the kernel must produce a visible sinogram.

    Reported residual is ``threshold / max|L f|`` against tolerance 1, so the
    report passes iff the sinogram max reaches the threshold.
    """
    f = random_polynomial_field(k, l, 2, 1, seed, flat())[0]
    s = sinogram(f, grid=grid, step=step, bundles=bundles)
    peak = s.max_abs
    i = int(np.argmax(np.abs(s.values)))
    ib, ip = np.unravel_index(i, s.values.shape)
    return CheckReport(
        _name("negative_control", k, l, f.metric),
        threshold / peak if peak > 0 else math.inf,
        1.0,
        [{"beta": float(grid.betas[ib]), "phi": float(grid.phis[ip])}],
        {"sinogram_max": peak, "threshold": threshold},
    )


# ---------------------------------------------------------------- reduction to the geodesic transform


def _random_rays(n, seed):
    q = quasi_random(n, 2, seed)
    return math.pi * (q[:, 0] + 1.0), 1.4 * q[:, 1]


def check_forward_reduction(
    k, l, metric: ConformalMetric = None, trials=1, seed=0, n_rays=100, step=5e-3, n_points=1000, bundle=None
) -> CheckReport:
    """``L f`` against ``(-1)^l I(Sym A f)`` ray by ray on shared samples.

    Also checks the pointwise integrand identity at random ``(x, v)`` with
    ``|v|_g = 1``. The literal unsigned residual is kept in ``details``.
    """
    metric = metric or flat()
    sign = reduction_sign(l)
    if bundle is None:
        bundle = trace_rays(metric, *_random_rays(n_rays, seed), step)
    fs = random_polynomial_field(k, l, 2, trials, seed, metric)
    x = disk_points(n_points, seed, radius=0.999)
    ang = 2 * math.pi * quasi_random(n_points, 1, seed + 1)[:, 0]
    v = np.exp(-metric.log_factor(x))[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=-1)

    ray_res, lit_res, pt_res = [], [], []
    for f in fs:
        h = full_sym(apply_A(f))
        L = bundle.integrate(mixed_integrand(f))
        I = bundle.integrate(geodesic_integrand(h))
        ray_res.append(np.abs(L - sign * I))
        lit_res.append(np.abs(L - I))
        pt_res.append(np.abs(mixed_integrand(f)(x, v) - sign * geodesic_integrand(h)(x, v)))
    ray_res, pt_res = np.array(ray_res), np.array(pt_res)

    def ray_witness(i):
        t, r = np.unravel_index(i, ray_res.shape)
        return {"trial": int(t), "beta": float(bundle.beta[r]), "phi": float(bundle.phi[r])}

    def pt_witness(i):
        t, p = np.unravel_index(i, pt_res.shape)
        return {"trial": int(t), "x": x[p].tolist(), "v": v[p].tolist()}

    rays = _report("per_ray", ray_res, TOL_REDUCTION, ray_witness)
    pts = _report("pointwise", pt_res, TOL_ALGEBRA, pt_witness)
    return _merge(
        _name("forward_reduction", k, l, metric),
        [rays, pts],
        sign=sign,
        unsigned_max_residual=float(np.max(lit_res)) if lit_res else 0.0,
    )


# ---------------------------------------------------------------- structure identities


def _random_fraction_table(rng, shape, den=12):
    vals = rng.integers(-den, den + 1, size=shape)
    out = np.empty(shape, dtype=object)
    for idx in np.ndindex(shape):
        out[idx] = Fraction(int(vals[idx]), den)
    return out


def check_involution(k_max=3, seed=0) -> CheckReport:
    """``A(A t) = (-1)^l t`` on exact rational tables for all ``k, l <= k_max``."""
    rng = np.random.default_rng(seed)
    worst, wit = Fraction(0), []
    for k in range(k_max + 1):
        for l in range(k_max + 1):
            t = _random_fraction_table(rng, (k + 1, l + 1))
            diff = cn.apply_A(cn.apply_A(t)) - (-1) ** l * t
            m = max(abs(d) for d in diff.ravel())
            if m > worst or not wit:
                worst, wit = max(worst, m), [{"k": k, "l": l}]
    return CheckReport("involution", float(worst), 0.0, wit, {"exact": True})


def check_lambda_kernel(n=1000, seed=0, k_max=5, metric=None) -> CheckReport:
    """``Phi(lambda w)(x, v) = 0`` at random ``(w, x, v)``."""
    metric = metric or gaussian_bump()
    pairs = order_pairs(k_max)
    q = quasi_random(n, 3, seed)
    x = disk_points(n, seed + 1, radius=0.999)
    v = q[:, :2]
    res = np.zeros(n)
    for i, (k, l) in enumerate(pairs):
        sel = np.arange(i, n, len(pairs))
        w = quasi_random(len(sel), k * l, seed + 2 + i).reshape(-1, k, l)
        t = cn.lam(w, metric.conformal_factor(x[sel]))
        res[sel] = np.abs(cn.phi_contract(t, v[sel]))
    return _report(
        "lambda_kernel",
        res,
        TOL_ALGEBRA,
        lambda i: {"x": x[i].tolist(), "v": v[i].tolist(), "orders": list(pairs[i % len(pairs)])},
    )


def _membership(f: MixedTensorField, pts):
    return np.atleast_1d(im_lambda_residual(f, pts))


def check_AsymA_structure(k, l, metric=None, trials=16, seed=0, n_points=32) -> CheckReport:
    """Three sub-checks of ``f - (-1)^l A Sym A f`` lying in the image of ``lambda``.

    (a) random fields, pointwise membership at quasi-random points;
    (b) ``A Sym A (lambda w) = 0`` on exact rational tables;
    (c) the basis families: ``A Sym A f_H0 - (-1)^l f_H0`` and the recursion
        ``f_Hj - (-1)^j f_H0`` are in the image for every ``H`` and ``j``.
    """
    if k < 1 or l < 1:
        raise ValueError("structure check needs k, l >= 1")
    metric = metric or flat()
    pts = disk_points(n_points, seed, radius=0.999)
    s1 = (-1) ** (l + 1)

    res_a = []
    for f in random_polynomial_field(k, l, 2, trials, seed, metric):
        g = f + s1 * fl.apply_A(fl.sym_block(apply_A(f), "all"))
        res_a.append(_membership(g, pts))
    a = _report("random_fields", res_a, TOL_MEMBERSHIP, lambda i: {"trial": i // n_points, "x": pts[i % n_points].tolist()})

    rng = np.random.default_rng(seed)
    worst = Fraction(0)
    for _ in range(trials):
        w = _random_fraction_table(rng, (k, l))
        factor = Fraction(int(rng.integers(1, 20)), int(rng.integers(1, 20)))
        z = cn.A_sym_A(cn.lam(w, factor))
        worst = max([worst] + [abs(e) for e in z.ravel()])
    b = CheckReport("lambda_in_kernel_exact", float(worst), 0.0, [], {"exact": True})

    res_c, wit_c = [], []
    sign = (-1) ** l
    for H in range(k + l + 1):
        f0 = basis_fH0(k, l, H, metric)
        g = apply_A(fl.sym_block(apply_A(f0), "all")) - sign * f0
        res_c.append(_membership(g, pts).max())
        wit_c.append({"H": H, "family": "AsymA"})
        for j in range(1, basis_fH_count(k, l, H)):
            g = basis_fH(k, l, H, j, metric) - (-1) ** j * f0
            res_c.append(_membership(g, pts).max())
            wit_c.append({"H": H, "j": j, "family": "recursion"})
    c = _report("basis", res_c, TOL_MEMBERSHIP, lambda i: wit_c[i])
    return _merge(_name("AsymA_structure", k, l, metric), [a, b, c])


def check_ds_dprime(k, l, metric=None, trials=16, seed=0, n_points=32) -> CheckReport:
    """``A(d^s u - d'u)`` lies pointwise in the image of ``lambda``."""
    if k < 1 or l < 1:
        raise ValueError("needs k, l >= 1")
    metric = metric or flat()
    pts = disk_points(n_points, seed, radius=0.999)
    res = []
    for u in random_polynomial_field(k - 1, l, 3, trials, seed, metric):
        res.append(_membership(apply_A(d_s(u) - d_prime(u)), pts))
    return _report(
        _name("ds_dprime", k, l, metric),
        res,
        TOL_DS,
        lambda i: {"trial": i // n_points, "x": pts[i % n_points].tolist()},
    )


def check_commutation(k, l, metric=None, trials=16, seed=0, n_points=32, tol=TOL_COMMUTE) -> CheckReport:
    """Componentwise ``|d'(A u) - A(d'u)|``."""
    if k < 1:
        raise ValueError("needs k >= 1")
    metric = metric or flat()
    pts = disk_points(n_points, seed, radius=0.999)
    res = []
    for u in random_polynomial_field(k - 1, l, 3, trials, seed, metric):
        diff = d_prime(apply_A(u)).table(pts) - apply_A(d_prime(u)).table(pts)
        res.append(np.abs(diff).reshape(n_points, -1).max(axis=1))
    return _report(
        _name("commutation", k, l, metric),
        res,
        tol,
        lambda i: {"trial": i // n_points, "x": pts[i % n_points].tolist()},
    )


# ---------------------------------------------------------------- transport lemma


def _transport_deviation(metric, grid, step):
    B, F = grid.nodes()
    b = trace_rays(metric, B, F, step)
    eta = transport_bundle(metric, b)
    x, v = b.samples[..., :2], b.samples[..., 2:]
    dev = np.sqrt(metric.conformal_factor(x) * np.sum((eta - rotate(v)) ** 2, axis=-1))
    ortho = np.abs(metric.conformal_factor(x) * np.sum(eta * v, axis=-1))
    return dev.max(axis=0), ortho.max(axis=0), b


def check_transport_lemma(
    metric=None,
    fan=FanGrid(8, 8),
    steps: Sequence[float] = (1e-3, 5e-4),
    ratio_range=(12.0, 20.0),
    tol=TOL_TRANSPORT,
    noise_floor=TRANSPORT_NOISE_FLOOR,
) -> CheckReport:
    """Transported ``rotate(v(0))`` against ``rotate(v(t))`` on a fan of rays.

    The deviation at both steps must stay below ``tol`` and the orthogonality
    defect below ``tol``. The decay ratio between the two steps must lie in
    ``ratio_range``, unless the finer deviation is already at the round-off
    floor, where no order can be measured; ``details`` says which case held.
    """
    metric = metric or gaussian_bump()
    h1, h2 = steps
    d1, o1, b = _transport_deviation(metric, fan, h1)
    d2, o2, _ = _transport_deviation(metric, fan, h2)
    m1, m2 = float(d1.max()), float(d2.max())
    ratio = m1 / m2 if m2 > 0 else (math.inf if m1 > 0 else float("nan"))
    in_range = ratio_range[0] <= ratio <= ratio_range[1]
    at_floor = m2 <= noise_floor
    worst = max(m1, m2, float(o1.max()), float(o2.max()))
    i = int(np.argmax(d1))
    return CheckReport(
        _name("transport_lemma", metric=metric),
        worst,
        tol,
        [{"beta": float(b.beta[i]), "phi": float(b.phi[i])}],
        {
            "steps": [h1, h2],
            "deviation": [m1, m2],
            "orthogonality": [float(o1.max()), float(o2.max())],
            "ratio": ratio,
            "ratio_in_range": bool(in_range),
            "ratio_resolved": not at_floor,
        },
        passed=bool(worst <= tol and (in_range or at_floor)),
    )


# ---------------------------------------------------------------- suites


def _metrics():
    return [flat(), gaussian_bump()]


def run_suite(suite="all", k_max=5, seed=0, step=1e-3, threads=None, trials=8, grid=FanGrid(16, 16)):
    """Run a named battery; reports sorted by name.

    ``algebra``: involution, lambda kernel, structure, d^s/d', commutation.
    ``transforms``: forward reduction, kernel forward, transport lemma,
    negative control. ``elastic``: linearization and gauge checks.
    """
    if suite not in ("all", "algebra", "transforms", "elastic"):
        raise ValueError(f"unknown suite {suite!r}")
    reports = []
    if suite in ("all", "algebra"):
        reports.append(check_involution(min(3, k_max), seed))
        reports.append(check_lambda_kernel(1000, seed, k_max))
        for k, l in order_pairs(k_max):
            for metric in _metrics():
                reports.append(check_AsymA_structure(k, l, metric, 16, seed))
                reports.append(check_ds_dprime(k, l, metric, 16, seed))
                reports.append(check_commutation(k, l, metric, 16, seed))
    if suite in ("all", "transforms"):
        for metric in _metrics():
            bundle = trace_rays(metric, *_random_rays(100, seed), 5e-3)
            for k, l in order_pairs(k_max, 0, 0):
                reports.append(check_forward_reduction(k, l, metric, 1, seed, bundle=bundle))
            bundles = trace_grid(metric, grid, step, threads)
            for k, l in order_pairs(k_max):
                reports.append(check_kernel_forward(k, l, metric, trials, seed, grid, step, bundles=bundles))
            reports.append(check_transport_lemma(metric))
        reports.append(check_negative_control(grid=grid, step=step))
    if suite in ("all", "elastic"):
        from .elastic import elastic_reports

        reports.extend(elastic_reports(seed=seed, step=step))
    return sorted(reports, key=lambda r: r.name)
