"""Mixed and geodesic ray transforms, sinograms, and convergence probes.

Both transforms integrate a function on the unit sphere bundle along traced
geodesics. The integrand is accumulated at the recorded RK4 stages of the
geodesic, which is the same as carrying the integral as an extra RK4 state.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import ConformalMetric, InwardBoundaryPoint, RayBundle, trace_rays
from .tensor_algebra import MixedTensorField
from .tensor_algebra import canonical as cn

__all__ = [
    "mixed_integrand",
    "geodesic_integrand",
    "mixed_ray_transform",
    "geodesic_ray_transform",
    "transform_bundle",
    "FanGrid",
    "Sinogram",
    "sinogram",
    "ConvergenceResult",
    "convergence_probe",
    "reduction_sign",
    "trace_grid",
    "config_checksum",
]


def mixed_integrand(f: MixedTensorField):
    """``(x, v) -> f(v, .., v, rotate(v), .., rotate(v))``."""
    return lambda x, v: cn.phi_contract(f.table(x), v)


def geodesic_integrand(h: MixedTensorField):
    """``(x, v) -> h(v, .., v)`` for a fully symmetric field or table."""
    if h.l == 0:
        return lambda x, v: cn.sym_contract(h.table(x)[..., 0], v)
    # a mixed field is read through its full symmetrization
    return lambda x, v: cn.sym_contract(cn.sym_table(h.table(x)), v)


def reduction_sign(l: int) -> int:
    """Sign relating the two transforms: ``L f = (-1)^l I(Sym A f)``.

    With the rotation ``(v1, v2) -> (v2, -v1)`` the contraction against the
    rotated velocity equals ``(-1)^l`` times ``(A f)(v, ..., v)``.
    """
    return -1 if l % 2 else 1


def transform_bundle(bundle: RayBundle, integrand) -> np.ndarray:
    return bundle.integrate(integrand)


def _one_ray(metric, entry, step):
    if entry.is_tangential():
        return None
    return trace_rays(metric, [entry.beta], [entry.phi], step)


def mixed_ray_transform(f: MixedTensorField, entry: InwardBoundaryPoint, step=1e-3, bundle=None) -> float:
    """``L_{k,l} f`` at one inward boundary point; 0 at tangential entries."""
    bundle = bundle or _one_ray(f.metric, entry, step)
    if bundle is None:
        return 0.0
    return float(bundle.integrate(mixed_integrand(f))[0])


def geodesic_ray_transform(h: MixedTensorField, entry: InwardBoundaryPoint, step=1e-3, bundle=None) -> float:
    """``I_m h`` at one inward boundary point."""
    bundle = bundle or _one_ray(h.metric, entry, step)
    if bundle is None:
        return 0.0
    return float(bundle.integrate(geodesic_integrand(h))[0])


@dataclass(frozen=True)
class FanGrid:
    """Uniform fan-beam grid on the inward boundary bundle.

    ``beta_i = 2 pi i / n_beta`` and ``phi_j = -phi_max + 2 phi_max j / n_phi``;
    both rules nest when a count doubles.
    """

    n_beta: int
    n_phi: int
    phi_max: float = 1.4

    def __post_init__(self):
        if self.n_beta < 1 or self.n_phi < 1:
            raise ValueError("grid counts must be >= 1")
        if not 0 <= self.phi_max < math.pi / 2:
            raise ValueError("phi_max must lie in [0, pi/2)")

    @property
    def betas(self):
        return 2 * math.pi * (np.arange(self.n_beta) / self.n_beta)

    @property
    def phis(self):
        return -self.phi_max + 2 * self.phi_max * (np.arange(self.n_phi) / self.n_phi)

    def nodes(self):
        B, F = np.meshgrid(self.betas, self.phis, indexing="ij")
        return B.ravel(), F.ravel()


@dataclass
class Sinogram:
    """Transform values on a fan grid, row-major in beta then phi."""

    kind: str
    orders: tuple
    grid: FanGrid
    values: np.ndarray
    taus: np.ndarray
    step: float
    metric_name: str = ""
    metric_params: dict = field(default_factory=dict)

    CSV_HEADER = ("beta", "phi", "tau", "value")

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_HEADER)
        for i, b in enumerate(self.grid.betas):
            for j, p in enumerate(self.grid.phis):
                w.writerow([f"{b:.17g}", f"{p:.17g}", f"{self.taus[i, j]:.17g}", f"{self.values[i, j]:.17g}"])
        return buf.getvalue()

    @staticmethod
    def read_csv(text: str):
        """Parse CSV text into ``(beta, phi, tau, value)`` arrays."""
        rows = list(csv.reader(io.StringIO(text)))
        if tuple(rows[0]) != Sinogram.CSV_HEADER:
            raise ValueError(f"unexpected header {rows[0]!r}")
        data = np.array([[float(c) for c in r] for r in rows[1:]])
        return data.T if data.size else np.zeros((4, 0))

    def metadata(self, config_checksum: Optional[str] = None) -> dict:
        meta = {
            "kind": self.kind,
            "step": self.step,
            "grid": {"n_beta": self.grid.n_beta, "n_phi": self.grid.n_phi, "phi_max": self.grid.phi_max},
            "metric": {"preset": self.metric_name, "params": self.metric_params},
            "max_abs_value": self.max_abs,
            "tau_range": [float(np.min(self.taus)), float(np.max(self.taus))] if self.taus.size else [0.0, 0.0],
            "config_checksum": config_checksum,
        }
        if self.kind == "mixed":
            meta["k"], meta["l"] = self.orders
        else:
            meta["m"] = self.orders[0]
        return meta

    def write(self, csv_path, json_path=None, config_checksum=None):
        """Write the CSV (and JSON metadata) atomically."""
        _atomic_write(csv_path, self.to_csv())
        if json_path is not None:
            _atomic_write(json_path, json.dumps(self.metadata(config_checksum), indent=2, sort_keys=True) + "\n")


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def config_checksum(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _resolve_threads(threads):
    if threads is None:
        threads = int(os.environ.get("MIXTRANS_THREADS", "1") or 1)
    if threads == 0:
        threads = os.cpu_count() or 1
    return max(1, threads)


def trace_grid(metric: ConformalMetric, grid: FanGrid, step: float, threads=None, chunk=64):
    """Trace every node of ``grid``; returns a list of bundles over ray chunks."""
    B, F = grid.nodes()
    spans = [(s, min(s + chunk, len(B))) for s in range(0, len(B), chunk)]

    def work(span):
        s, e = span
        return trace_rays(metric, B[s:e], F[s:e], step)

    threads = _resolve_threads(threads)
    if threads == 1:
        return [work(sp) for sp in spans]
    with ThreadPoolExecutor(threads) as ex:
        return list(ex.map(work, spans))


def sinogram(
    field_: MixedTensorField,
    kind: str = "mixed",
    grid: FanGrid = FanGrid(16, 16),
    step: float = 1e-3,
    bundles=None,
    threads=None,
) -> Sinogram:
    """Evaluate a transform on every node of a fan grid.

    ``kind`` is ``"mixed"`` (``L_{k,l}``) or ``"geodesic"`` (``I_m`` of a
    symmetric field). Precomputed ``bundles`` from :func:`trace_grid` may be
    passed to reuse traced rays across fields.
    """
    if kind == "mixed":
        integrand, orders = mixed_integrand(field_), (field_.k, field_.l)
    elif kind == "geodesic":
        integrand, orders = geodesic_integrand(field_), (field_.k + field_.l,)
    else:
        raise ValueError(f"unknown transform kind {kind!r}")
    if bundles is None:
        bundles = trace_grid(field_.metric, grid, step, threads)
    values = np.concatenate([b.integrate(integrand) for b in bundles])
    taus = np.concatenate([b.tau for b in bundles])
    shape = (grid.n_beta, grid.n_phi)
    return Sinogram(
        kind,
        orders,
        grid,
        values.reshape(shape),
        taus.reshape(shape),
        float(step),
        field_.metric.name,
        dict(field_.metric.params),
    )


@dataclass
class ConvergenceResult:
    steps: list
    values: list
    differences: list
    order: float
    resolved: bool
    message: str = ""


def convergence_probe(
    f: MixedTensorField,
    entry: InwardBoundaryPoint,
    steps: Sequence[float],
    kind: str = "mixed",
    exact: Optional[float] = None,
    noise_floor: float = 1e-13,
) -> ConvergenceResult:
    """Observed order of the quadrature from a geometric sequence of steps.

    Without ``exact`` the successive differences are used (self-convergence);
    with it, the errors against ``exact``.
    """
    steps = [float(s) for s in steps]
    if len(steps) < 3:
        raise ValueError("need at least three step sizes")
    ratios = [steps[i] / steps[i + 1] for i in range(len(steps) - 1)]
    if not all(r > 1 for r in ratios) or max(ratios) - min(ratios) > 1e-9 * max(ratios):
        raise ValueError("steps must decrease in geometric progression")
    r = ratios[0]
    fn = mixed_ray_transform if kind == "mixed" else geodesic_ray_transform
    vals = [fn(f, entry, s) for s in steps]
    if exact is None:
        diffs = [abs(vals[i] - vals[i + 1]) for i in range(len(vals) - 1)]
    else:
        diffs = [abs(v - exact) for v in vals]
    scale = max(1.0, max(abs(v) for v in vals))
    if min(diffs) <= noise_floor * scale:
        return ConvergenceResult(steps, vals, diffs, float("nan"), False, "order not resolved: differences at noise floor")
    if any(diffs[i + 1] >= diffs[i] for i in range(len(diffs) - 1)):
        return ConvergenceResult(steps, vals, diffs, float("nan"), False, "order not resolved: non-monotone differences")
    orders = [math.log(diffs[i] / diffs[i + 1]) / math.log(r) for i in range(len(diffs) - 1)]
    return ConvergenceResult(steps, vals, diffs, orders[-1], True, "")
