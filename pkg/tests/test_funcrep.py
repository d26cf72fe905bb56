import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from henonlab.errors import NoConvergence, NotMonotone, NotResolved, OutOfDomain
from henonlab.funcrep import (
    Box3,
    Interval,
    ScalarField1D,
    affine_rescale,
    c0_norm,
    c1_norm,
    compose,
    dumps_17g,
    field_from_json,
    field_to_json,
    interpolate,
    invert_monotone,
    solve_implicit,
)

UNIT = Interval(-1.0, 1.0)
UNIT_BOX = Box3(UNIT, UNIT, UNIT)


# -- oracles ----------------------------------------------------------------

def newton_root_oracle(f, df, x0, tol=1e-15):
    """Plain scalar Newton, independent of the field machinery."""
    x = x0
    for _ in range(100):
        step = f(x) / df(x)
        x -= step
        if abs(step) < tol:
            return x
    raise AssertionError("oracle Newton did not converge")


# g(0.5) for the inverse of 1 - 1.4 x^2 on the branch [0.01, 1]:
# solve 1 - 1.4 x^2 = 0.5 -> x = sqrt(5/14)
SQRT_5_14 = newton_root_oracle(lambda x: 1.0 - 1.4 * x * x - 0.5,
                               lambda x: -2.8 * x, 0.6)

# Fixed point of cos: iterate far past contraction saturation.
_c = 1.0
for _ in range(10000):
    _c = math.cos(_c)
COS_FIXED = _c


def test_oracle_values_frozen():
    assert SQRT_5_14 == pytest.approx(0.5976143046671968, abs=1e-15)
    assert COS_FIXED == pytest.approx(0.7390851332151607, abs=1e-15)


# -- interpolate ------------------------------------------------------------

def test_interpolate_linear_exact_coeffs():
    f = interpolate(lambda x: x, UNIT, 1)
    assert np.allclose(f.coeffs, [0.0, 1.0], atol=1e-15)


def test_interpolate_square_exact_coeffs():
    f = interpolate(lambda x: x * x, UNIT, 2)
    assert np.allclose(f.coeffs, [0.5, 0.0, 0.5], atol=1e-15)


def test_interpolate_exp_high_accuracy_off_node():
    f = interpolate(np.exp, UNIT, 20)
    rng = np.random.default_rng(0)
    xs = rng.uniform(-1.0, 1.0, size=1000)
    assert np.max(np.abs(f(xs) - np.exp(xs))) < 1e-14


def test_interpolate_unresolved_raises():
    with pytest.raises(NotResolved):
        interpolate(np.abs, UNIT, 16)


def test_interpolate_scalar_only_sampler():
    def sampler(x):
        return math.sin(float(x))

    f = interpolate(sampler, UNIT, 24)
    assert abs(f(0.3) - math.sin(0.3)) < 1e-13


def test_interpolate_3d_product_exact():
    f = interpolate(lambda x, y, z: x * y * z, UNIT_BOX, (1, 1, 1))
    expected = np.zeros((2, 2, 2))
    expected[1, 1, 1] = 1.0
    assert np.allclose(f.coeffs, expected, atol=1e-14)
    assert f(0.3, -0.2, 0.7) == pytest.approx(0.3 * -0.2 * 0.7, abs=1e-14)


def test_partial_derivatives_3d():
    f = interpolate(lambda x, y, z: x ** 3 + 2.0 * y * z, UNIT_BOX, (4, 3, 3))
    g = f.partial(0)
    xs = np.linspace(-0.9, 0.9, 7)
    assert np.allclose(g(xs, 0.1, 0.2), 3.0 * xs ** 2, atol=1e-12)
    assert np.allclose(f.partial(2)(0.5, xs, 0.0), 2.0 * xs, atol=1e-12)


def test_evaluate_out_of_domain():
    f = interpolate(np.exp, UNIT, 20)
    with pytest.raises(OutOfDomain):
        f(1.2)
    # small overhang is tolerated by design
    assert abs(f(1.01) - math.exp(1.01)) < 1e-10


# -- divided differences -----------------------------------------------------

def test_diffq_matches_naive_far_points():
    f = interpolate(lambda x: np.sin(3.0 * x), UNIT, 30)
    a, b = 0.7, -0.4
    naive = (f(a) - f(b)) / (a - b)
    assert f.diffq(a, b) == pytest.approx(naive, rel=1e-12)


def test_diffq_relative_accuracy_close_points():
    # p(a)-p(b) = (a-b)(a^2+ab+b^2) exactly for p = x^3
    f = interpolate(lambda x: x ** 3, UNIT, 3)
    a = 0.123456789
    b = a + 1e-9
    exact = a * a + a * b + b * b
    assert f.diffq(a, b) == pytest.approx(exact, rel=1e-12)
    assert f.delta(a, b) == pytest.approx((a - b) * exact, rel=1e-12)


def test_diffq_coincident_points_gives_derivative():
    f = interpolate(lambda x: np.cos(2.0 * x), UNIT, 24)
    a = 0.37
    assert f.diffq(a, a) == pytest.approx(-2.0 * math.sin(2.0 * a), abs=1e-12)


def test_delta_3d_relative_accuracy():
    f = interpolate(lambda x, y, z: x * x + 0.5 * y * z + z ** 3,
                    UNIT_BOX, (3, 2, 4))
    p = (0.3, 0.21, -0.4)
    q = (0.3 + 2e-10, 0.21 - 1e-10, -0.4 + 3e-10)
    exact = ((p[0] ** 2 - q[0] ** 2) + 0.5 * (p[1] * p[2] - q[1] * q[2])
             + (p[2] ** 3 - q[2] ** 3))
    assert f.delta(p, q) == pytest.approx(exact, rel=1e-6, abs=1e-22)


def test_delta_3d_vectorized():
    f = interpolate(lambda x, y, z: np.sin(x) * y + z, UNIT_BOX, (12, 1, 1))
    px = np.array([0.1, 0.5]); py = np.array([0.2, -0.3]); pz = np.array([0.0, 0.4])
    qx = px + 1e-8; qy = py; qz = pz - 1e-8
    out = f.delta((px, py, pz), (qx, qy, qz))
    expected = (np.sin(px) * py + pz) - (np.sin(qx) * qy + qz)
    assert np.allclose(out, expected, rtol=1e-4, atol=1e-18)


# -- monotone inversion ------------------------------------------------------

def test_invert_cube_branch():
    f = interpolate(lambda x: x ** 3, UNIT, 3)
    g = invert_monotone(f, Interval(0.5, 1.0))
    assert g(0.729) == pytest.approx(0.9, abs=1e-12)


def test_invert_quadratic_family_branch():
    f = interpolate(lambda x: 1.0 - 1.4 * x * x, Interval(-1.0, 1.0), 2)
    g = invert_monotone(f, Interval(0.01, 1.0))
    assert g(0.5) == pytest.approx(SQRT_5_14, abs=1e-12)


def test_invert_identity():
    f = interpolate(lambda x: x, UNIT, 1)
    g = invert_monotone(f, UNIT)
    xs = np.linspace(-0.99, 0.99, 11)
    assert np.allclose(g(xs), xs, atol=1e-13)


def test_invert_non_monotone_raises():
    f = interpolate(lambda x: x * x, UNIT, 2)
    with pytest.raises(NotMonotone):
        invert_monotone(f, UNIT)


def test_compose_with_inverse_is_identity():
    f = interpolate(lambda x: 1.0 - 1.4 * x * x, Interval(-1.0, 1.0), 2)
    branch = Interval(0.01, 1.0)
    g = invert_monotone(f, branch)
    h = compose(f, g)
    ys = np.linspace(g.domain.lo + 1e-3, g.domain.hi - 1e-3, 101)
    assert np.max(np.abs(h(ys) - ys)) < 1e-9


# -- implicit solve ----------------------------------------------------------

def test_solve_implicit_affine():
    assert solve_implicit(lambda u: 0.5 * u + 1.0, 0.0, 1e-13) == pytest.approx(
        2.0, abs=1e-12)


def test_solve_implicit_cos():
    assert solve_implicit(math.cos, 1.0, 1e-13) == pytest.approx(
        COS_FIXED, abs=1e-12)


def test_solve_implicit_divergent_raises():
    with pytest.raises(NoConvergence):
        solve_implicit(lambda u: 2.0 * u, 1.0, 1e-13)


# -- calculus and rescaling property tests ------------------------------------

coeff_lists = st.lists(st.floats(-2.0, 2.0), min_size=2, max_size=9)


@given(coeff_lists)
@settings(max_examples=60, deadline=None)
def test_derivative_antiderivative_round_trip(coeffs):
    f = ScalarField1D(Interval(-1.3, 0.7), coeffs)
    g = f.derivative().antiderivative()
    xs = np.linspace(-1.3, 0.7, 57)
    shifted = f(xs) - f(xs)[0]
    assert np.max(np.abs(g(xs) - g(xs)[0] - shifted)) < 1e-10


@given(coeff_lists,
       st.floats(-5.0, 5.0), st.floats(0.1, 4.0))
@settings(max_examples=60, deadline=None)
def test_affine_rescale_round_trip(coeffs, lo, width):
    f = ScalarField1D(Interval(-1.0, 1.0), coeffs)
    new_dom = Interval(lo, lo + width)
    g = affine_rescale(f, new_dom)
    back = affine_rescale(g, f.domain)
    assert np.max(np.abs(back.coeffs - f.coeffs)) < 1e-13


def test_affine_rescale_3d_round_trip():
    f = interpolate(lambda x, y, z: np.exp(0.3 * x) * (y + z * z),
                    UNIT_BOX, (10, 1, 2))
    nb = Box3(Interval(0.0, 2.0), Interval(-3.0, 1.0), Interval(0.5, 0.75))
    back = affine_rescale(affine_rescale(f, nb), f.box)
    assert np.max(np.abs(back.coeffs - f.coeffs)) < 1e-13


# -- norms --------------------------------------------------------------------

def test_norms_known_function():
    f = interpolate(lambda x: 0.5 * np.sin(2.0 * x), UNIT, 24)
    assert c0_norm(f) == pytest.approx(0.5, rel=1e-6)
    assert c1_norm(f) == pytest.approx(1.0, rel=1e-6)


# -- serialization -------------------------------------------------------------

def test_json_round_trip_1d():
    f = interpolate(np.exp, Interval(-0.5, 1.25), 18)
    g = field_from_json(field_to_json(f))
    assert g.domain == f.domain
    assert np.array_equal(g.coeffs, f.coeffs)


def test_json_round_trip_3d():
    f = interpolate(lambda x, y, z: np.cos(x) + y * z, UNIT_BOX, (14, 2, 2))
    g = field_from_json(field_to_json(f))
    assert g.box == f.box
    assert np.array_equal(g.coeffs, f.coeffs)


def test_json_17_digit_floats():
    text = dumps_17g({"v": [0.1, 1.0 / 3.0]})
    data = json.loads(text)
    assert data["v"][0] == 0.1
    assert data["v"][1] == 1.0 / 3.0
    assert "0.10000000000000001" in text
