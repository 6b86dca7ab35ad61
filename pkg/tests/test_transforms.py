"""Mixed and geodesic ray transforms, sinograms and the convergence probe."""

import json
import math

import numpy as np
import pytest

from mixtrans.geometry import InwardBoundaryPoint, flat, gaussian_bump, trace_rays
from mixtrans.tensor_algebra import (
    apply_A,
    basis_element,
    boundary_vanishing,
    constant_field,
    d_prime,
    full_sym,
    lambda_op,
    polynomial_field,
    random_polynomial_field,
)
from mixtrans.transforms import (
    FanGrid,
    Sinogram,
    config_checksum,
    convergence_probe,
    geodesic_ray_transform,
    mixed_ray_transform,
    reduction_sign,
    sinogram,
    trace_grid,
)

CENTRE = InwardBoundaryPoint(0.0, 0.0)


def test_scalar_one_gives_length():
    one = constant_field(np.ones((1, 1)))
    assert mixed_ray_transform(one, CENTRE, 1e-2) == pytest.approx(2.0, abs=1e-10)
    assert geodesic_ray_transform(one, CENTRE, 1e-2) == pytest.approx(2.0, abs=1e-10)


def test_dx1_dx2_on_central_chord():
    # v = (-1, 0), rotate(v) = (0, 1): f(v, rotate v) = -1 along a chord of length 2
    f = basis_element(1, 1, 1, 0)
    assert mixed_ray_transform(f, CENTRE, 1e-2) == pytest.approx(-2.0, abs=1e-10)


def test_tangential_entry_is_zero():
    f = basis_element(1, 1, 0, 0)
    assert mixed_ray_transform(f, InwardBoundaryPoint(0.0, math.pi / 2)) == 0.0
    assert geodesic_ray_transform(f, InwardBoundaryPoint(0.0, -2.0)) == 0.0


@pytest.mark.parametrize("k,l", [(1, 1), (2, 1), (1, 2), (2, 2)])
def test_lambda_image_is_invisible(k, l, metric):
    w = random_polynomial_field(k - 1, l - 1, 2, 1, 3, metric)[0]
    f = lambda_op(w)
    for e in [InwardBoundaryPoint(0.3, 0.2), InwardBoundaryPoint(2.5, -1.0)]:
        assert abs(mixed_ray_transform(f, e, 1e-2)) < 1e-8


@pytest.mark.parametrize("k,l", [(1, 1), (2, 1), (1, 3)])
def test_potential_is_invisible(k, l, metric):
    u = boundary_vanishing(random_polynomial_field(k - 1, l, 2, 1, 4, metric)[0])
    f = d_prime(u)
    for e in [InwardBoundaryPoint(1.0, 0.1), InwardBoundaryPoint(4.0, 0.9)]:
        assert abs(mixed_ray_transform(f, e, 1e-3)) < 1e-6


@pytest.mark.parametrize("k,l", [(1, 1), (2, 1), (1, 2), (3, 2)])
def test_mixed_equals_signed_geodesic_of_sym_A(k, l, metric):
    f = random_polynomial_field(k, l, 2, 1, 8, metric)[0]
    e = InwardBoundaryPoint(0.9, -0.3)
    lhs = mixed_ray_transform(f, e, 1e-2)
    rhs = reduction_sign(l) * geodesic_ray_transform(full_sym(apply_A(f)), e, 1e-2)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_reduction_sign():
    assert [reduction_sign(l) for l in range(4)] == [1, -1, 1, -1]


def test_flat_constant_sinogram_is_chord_length():
    s = sinogram(constant_field(np.ones((1, 1))), "mixed", FanGrid(4, 6), 1e-2)
    want = np.tile(2 * np.cos(FanGrid(4, 6).phis), (4, 1))
    np.testing.assert_allclose(s.values, want, atol=1e-10)
    np.testing.assert_allclose(s.taus, want, atol=1e-10)


def test_lambda_sinogram_is_small():
    m = gaussian_bump()
    f = lambda_op(random_polynomial_field(0, 0, 2, 1, 0, m)[0])
    s = sinogram(f, "mixed", FanGrid(16, 16), 1e-2)
    assert s.max_abs <= 1e-8


def test_sinogram_nests_when_grid_doubles():
    f = random_polynomial_field(1, 1, 2, 1, 5, gaussian_bump())[0]
    coarse = sinogram(f, "mixed", FanGrid(4, 4), 1e-2)
    fine = sinogram(f, "mixed", FanGrid(8, 8), 1e-2)
    np.testing.assert_array_equal(fine.values[::2, ::2], coarse.values)
    np.testing.assert_array_equal(fine.taus[::2, ::2], coarse.taus)


def test_sinogram_reuses_bundles_and_threads():
    f = random_polynomial_field(2, 1, 2, 1, 5, gaussian_bump())[0]
    grid = FanGrid(6, 5)
    bundles = trace_grid(f.metric, grid, 1e-2, chunk=7)
    a = sinogram(f, "mixed", grid, 1e-2, bundles=bundles)
    b = sinogram(f, "mixed", grid, 1e-2, threads=2)
    np.testing.assert_allclose(a.values, b.values, atol=1e-15)


def test_sinogram_matches_pointwise_transform():
    f = random_polynomial_field(1, 2, 2, 1, 1, gaussian_bump())[0]
    grid = FanGrid(3, 3, 1.0)
    s = sinogram(f, "mixed", grid, 1e-2)
    for i, b in enumerate(grid.betas):
        for j, p in enumerate(grid.phis):
            assert s.values[i, j] == pytest.approx(mixed_ray_transform(f, InwardBoundaryPoint(b, p), 1e-2), abs=1e-14)


def test_geodesic_sinogram_orders():
    h = full_sym(basis_element(2, 0, 1, 0))
    s = sinogram(h, "geodesic", FanGrid(2, 2), 1e-2)
    assert s.orders == (2,)
    assert s.metadata()["m"] == 2
    with pytest.raises(ValueError):
        sinogram(h, "radon", FanGrid(2, 2))


def test_csv_round_trip(tmp_path):
    f = random_polynomial_field(1, 1, 2, 1, 2)[0]
    s = sinogram(f, "mixed", FanGrid(3, 4), 1e-2)
    csv_path, json_path = tmp_path / "s.csv", tmp_path / "s.json"
    s.write(csv_path, json_path, config_checksum({"a": 1}))
    beta, phi, tau, value = Sinogram.read_csv(csv_path.read_text())
    B, F = s.grid.nodes()
    np.testing.assert_array_equal(beta, B)
    np.testing.assert_array_equal(phi, F)
    np.testing.assert_array_equal(tau, s.taus.ravel())
    np.testing.assert_array_equal(value, s.values.ravel())
    meta = json.loads(json_path.read_text())
    assert meta["k"] == 1 and meta["l"] == 1 and meta["kind"] == "mixed"
    assert meta["max_abs_value"] == s.max_abs
    assert meta["config_checksum"] == config_checksum({"a": 1})
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".tmp-")]


def test_read_csv_rejects_bad_header():
    with pytest.raises(ValueError):
        Sinogram.read_csv("a,b,c,d\n1,2,3,4\n")


def test_config_checksum_is_key_order_independent():
    assert config_checksum({"a": 1, "b": [1, 2]}) == config_checksum({"b": [1, 2], "a": 1})
    assert config_checksum({"a": 1}) != config_checksum({"a": 2})


@pytest.mark.parametrize("bad", [(0, 4), (4, 0)])
def test_fan_grid_validation(bad):
    with pytest.raises(ValueError):
        FanGrid(*bad)
    with pytest.raises(ValueError):
        FanGrid(2, 2, math.pi / 2)


def test_fan_grid_nodes():
    g = FanGrid(4, 2, 1.0)
    np.testing.assert_allclose(g.betas, [0, math.pi / 2, math.pi, 3 * math.pi / 2])
    np.testing.assert_allclose(g.phis, [-1.0, 0.0])
    B, F = g.nodes()
    assert B.shape == F.shape == (8,)


def _quartic_field():
    c = np.zeros((1, 1, 5, 5))
    c[0, 0, 4, 0] = 1.0
    c[0, 0, 2, 2] = 0.5
    c[0, 0, 0, 1] = 0.3
    return polynomial_field(c, gaussian_bump(0.2, (0.1, 0.0), 0.8))


def test_convergence_probe_fourth_order():
    r = convergence_probe(_quartic_field(), InwardBoundaryPoint(0.5, 0.4), [0.08, 0.04, 0.02, 0.01])
    assert r.resolved
    assert 3.5 <= r.order <= 4.5


def test_convergence_probe_errors_scale_like_h4():
    r = convergence_probe(_quartic_field(), InwardBoundaryPoint(0.5, 0.4), [0.08, 0.04, 0.02])
    c = [d / s**4 for d, s in zip(r.differences, r.steps)]
    assert max(c) / min(c) < 2


def test_convergence_probe_against_exact_flat_chord():
    # chord (1,0) -> (-1,0): integral of x1^4 dt is 2/5
    c = np.zeros((1, 1, 5, 1))
    c[0, 0, 4, 0] = 1.0
    f = polynomial_field(c)
    r = convergence_probe(f, CENTRE, [0.3, 0.15, 0.075], exact=0.4)
    assert r.resolved and 3.5 <= r.order <= 4.5


def test_convergence_probe_noise_floor():
    f = lambda_op(random_polynomial_field(0, 0, 1, 1, 0)[0])
    r = convergence_probe(f, CENTRE, [0.04, 0.02, 0.01])
    assert not r.resolved and "not resolved" in r.message
    assert math.isnan(r.order)


def test_convergence_probe_validates_steps():
    f = constant_field(np.ones((1, 1)))
    with pytest.raises(ValueError):
        convergence_probe(f, CENTRE, [0.1, 0.05])
    with pytest.raises(ValueError):
        convergence_probe(f, CENTRE, [0.1, 0.05, 0.02])


def test_transform_is_linear():
    m = gaussian_bump()
    f, g = random_polynomial_field(2, 1, 2, 2, 3, m)
    e = InwardBoundaryPoint(1.3, 0.7)
    b = trace_rays(m, [e.beta], [e.phi], 1e-2)
    lhs = mixed_ray_transform(2 * f - 3 * g, e, bundle=b)
    rhs = 2 * mixed_ray_transform(f, e, bundle=b) - 3 * mixed_ray_transform(g, e, bundle=b)
    assert lhs == pytest.approx(rhs, abs=1e-13)


def test_flat_field_on_flat_constant():
    f = constant_field(np.array([[0.0, 0.0], [0.0, 1.0]]), flat())  # t[1, 1]: dx1 (x) dx1 pattern
    e = InwardBoundaryPoint(0.0, 0.0)
    # v = (-1, 0), rotate(v) = (0, 1): t[1,1] v1 rot(v)_1 = 0
    assert mixed_ray_transform(f, e, 1e-2) == pytest.approx(0.0, abs=1e-14)
