"""Property-based invariants of the table algebra, tracing and transforms."""

import math
from fractions import Fraction

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mixtrans.geometry import flat, gaussian_bump, norm_g, rotate, trace_rays
from mixtrans.tensor_algebra import apply_A, d_prime, full_sym, random_polynomial_field
from mixtrans.tensor_algebra import canonical as cn
from mixtrans.tensor_algebra import dense as dn
from mixtrans.transforms import geodesic_integrand, mixed_integrand, reduction_sign

FAST = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
orders = st.tuples(st.integers(0, 4), st.integers(0, 4))
mixed_orders = st.tuples(st.integers(1, 4), st.integers(1, 4))


@st.composite
def fraction_tables(draw, kl=orders):
    k, l = draw(kl)
    nums = draw(st.lists(st.integers(-30, 30), min_size=(k + 1) * (l + 1), max_size=(k + 1) * (l + 1)))
    den = draw(st.integers(1, 9))
    t = np.empty((k + 1, l + 1), dtype=object)
    for i, idx in enumerate(np.ndindex(t.shape)):
        t[idx] = Fraction(nums[i], den)
    return t


@st.composite
def float_tables(draw, kl=orders):
    k, l = draw(kl)
    return draw(arrays(float, (k + 1, l + 1), elements=finite))


unit_vectors = st.floats(0, 2 * math.pi).map(lambda a: np.array([math.cos(a), math.sin(a)]))


@given(fraction_tables())
def test_A_squared_is_sign(t):
    l = t.shape[1] - 1
    assert np.all(cn.apply_A(cn.apply_A(t)) == (-1) ** l * t)


@given(fraction_tables())
def test_sym_is_idempotent(t):
    k, l = t.shape[0] - 1, t.shape[1] - 1
    s = cn.sym_table(t)
    assert np.all(cn.sym_table(cn.mixed_from_sym(s, k + l, 0)) == s)


@given(fraction_tables(mixed_orders), st.fractions(-5, 5).filter(lambda f: f != 0))
def test_A_sym_A_kills_lambda(t, factor):
    w = t[:-1, :-1]
    assert np.all(cn.A_sym_A(cn.lam(w, factor)) == 0)


@given(fraction_tables(mixed_orders), st.integers(-6, 6), st.integers(-6, 6))
def test_phi_of_lambda_is_zero_exactly(t, a, b):
    w = t[:-1, :-1]
    v = np.array([Fraction(a), Fraction(b)], dtype=object)
    assert cn.phi_contract(cn.lam(w, Fraction(3, 2)), v) == 0


@given(fraction_tables(), st.integers(-4, 4), st.integers(-4, 4))
def test_table_matches_dense_contraction(t, a, b):
    k, l = t.shape[0] - 1, t.shape[1] - 1
    v = np.array([Fraction(a), Fraction(b)], dtype=object)
    assert cn.phi_contract(t, v) == dn.dense_phi(dn.dense_from_table(t, k, l), k, l, v)


@given(float_tables(), unit_vectors, st.floats(0.1, 3))
def test_phi_is_homogeneous(t, v, s):
    k, l = t.shape[0] - 1, t.shape[1] - 1
    lhs = cn.phi_contract(t, s * v)
    rhs = s ** (k + l) * cn.phi_contract(t, v)
    assert math.isclose(lhs, rhs, rel_tol=1e-9, abs_tol=1e-9 * (1 + np.abs(t).sum()) * max(1, s) ** (k + l))


@given(float_tables(), unit_vectors)
def test_contraction_reduces_to_symmetric(t, v):
    l = t.shape[1] - 1
    lhs = cn.phi_contract(t, v)
    rhs = reduction_sign(l) * cn.sym_contract(cn.sym_table(cn.apply_A(t)), v)
    assert math.isclose(lhs, rhs, rel_tol=1e-10, abs_tol=1e-10 * (1 + np.abs(t).sum()))


@FAST
@given(st.integers(0, 2), st.integers(0, 3), st.integers(0, 10_000))
def test_d_prime_commutes_with_A(k, l, seed):
    m = gaussian_bump(0.3)
    u = random_polynomial_field(k, l, 2, 1, seed, m)[0]
    x = np.array([[0.2, -0.3], [-0.5, 0.1]])
    np.testing.assert_allclose(d_prime(apply_A(u)).table(x), apply_A(d_prime(u)).table(x), atol=1e-10)


@given(arrays(float, (5, 2), elements=finite))
def test_rotate_is_orthogonal_isometry(v):
    r = rotate(v)
    np.testing.assert_array_equal(np.sum(r * v, -1), 0 * np.sum(r * v, -1))
    np.testing.assert_allclose(np.sum(r * r, -1), np.sum(v * v, -1))
    np.testing.assert_array_equal(rotate(rotate(v)), -v)


@FAST
@given(st.floats(0, 2 * math.pi), st.floats(-1.5, 1.5))
def test_flat_chord_length(beta, phi):
    b = trace_rays(flat(), [beta], [phi], 2e-2)
    assert math.isclose(b.tau[0], 2 * math.cos(phi), abs_tol=5e-10)


@FAST
@given(st.floats(0, 2 * math.pi), st.floats(-1.4, 1.4), st.floats(-0.3, 0.3))
def test_traced_rays_are_unit_speed_and_exit_on_circle(beta, phi, amp):
    m = gaussian_bump(amp, (0.1, -0.1), 0.8)
    b = trace_rays(m, [beta], [phi], 2e-2)
    x, v = b.samples[:, 0, :2], b.samples[:, 0, 2:]
    assert np.max(np.abs(norm_g(m, x, v) - 1)) < 1e-7
    assert abs(np.linalg.norm(x[-1]) - 1) < 1e-12


@FAST
@given(mixed_orders, st.integers(0, 10_000), st.floats(0, 2 * math.pi), st.floats(-1.3, 1.3))
def test_transform_reduction_on_a_ray(kl, seed, beta, phi):
    k, l = kl
    m = gaussian_bump()
    f = random_polynomial_field(k, l, 2, 1, seed, m)[0]
    b = trace_rays(m, [beta], [phi], 5e-2)
    lhs = b.integrate(mixed_integrand(f))[0]
    rhs = reduction_sign(l) * b.integrate(geodesic_integrand(full_sym(apply_A(f))))[0]
    assert math.isclose(lhs, rhs, abs_tol=1e-11)
