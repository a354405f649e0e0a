import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

import jets
from jets import Jet, get_basis, jet_variable
from utils.errors import DomainError, InsufficientOrdersError


def random_jet(rng, n=2, orders=(2, 3), shape=()):
    basis = get_basis(n, orders)
    return Jet(basis, rng.normal(size=(basis.size,) + shape))


def test_basis_size():
    basis = get_basis(2, (2, 3))
    assert basis.nx == 6
    assert basis.ny == 10
    assert basis.size == 60
    assert basis.index((0, 0, 0, 0)) == 0


def test_ring_laws(rng):
    a, b, c = (random_jet(rng) for _ in range(3))
    assert_allclose((a * b).coeffs, (b * a).coeffs, atol=1e-12)
    assert_allclose(((a * b) * c).coeffs, (a * (b * c)).coeffs, atol=1e-10)
    assert_allclose((a * (b + c)).coeffs, (a * b + a * c).coeffs, atol=1e-10)
    assert_allclose((a - a).coeffs, 0.0)


def test_difference_of_squares():
    t = jet_variable(1, 2, 0.0, (0, 3))
    p = (1 + t) * (1 - t)
    assert p.value == 1.0
    assert p.coefficient((0, 1)) == 0.0
    assert p.coefficient((0, 2)) == -1.0
    assert p.coefficient((0, 3)) == 0.0


def test_exp_at_zero():
    t = jet_variable(1, 2, 0.0, (0, 5))
    e = jets.exp(t)
    for k in range(6):
        assert e.coefficient((0, k)) == pytest.approx(1.0 / math.factorial(k))


def test_atan_slope():
    t = jet_variable(1, 2, 1.0, (0, 2))
    a = jets.atan(t)
    assert a.value == pytest.approx(math.pi / 4)
    assert a.partial((0, 1)) == pytest.approx(0.5)
    assert a.partial((0, 2)) == pytest.approx(-0.5)


def test_partial_of_cube():
    y = jet_variable(1, 2, 2.0, (0, 3))
    cube = y ** 3
    assert cube.value == pytest.approx(8.0)
    assert cube.partial((0, 1)) == pytest.approx(12.0)
    assert cube.partial((0, 2)) == pytest.approx(12.0)
    assert cube.partial((0, 3)) == pytest.approx(6.0)


def test_power_edge_cases():
    y = jet_variable(1, 2, 2.0, (0, 3))
    assert_allclose((y ** 0).coeffs, jets.Jet.constant(y.basis, 1.0).coeffs)
    assert_allclose((y ** 1).coeffs, y.coeffs)
    assert_allclose((y ** -2).coeffs, (1.0 / (y * y)).coeffs, atol=1e-12)
    assert_allclose((y ** 0.5 * y ** 0.5).coeffs, y.coeffs, atol=1e-12)
    with pytest.raises(DomainError):
        jet_variable(1, 2, -1.0, (0, 3)) ** 0.5


def test_mixed_partial_against_closed_form():
    orders = (2, 3)
    x1 = jet_variable(2, 1, 0.4, orders)
    y1 = jet_variable(2, 3, 0.7, orders)
    y2 = jet_variable(2, 4, 1.1, orders)
    f = jets.sin(x1) * jets.exp(y1 * y2)
    expected = math.cos(0.4) * (1 + 0.7 * 1.1) * math.exp(0.7 * 1.1)
    assert f.partial((1, 0, 1, 1)) == pytest.approx(expected, rel=1e-12)
    # x derivatives cap at Dx independently of Dy
    assert f.partial((2, 0, 0, 0)) == pytest.approx(-math.sin(0.4) * math.exp(0.7 * 1.1))


def test_derivatives_against_finite_differences():
    def f(x, y):
        return x * x * math.sqrt(1 + y * y) + math.log(2 + x * y)

    x0, y0, h = 0.3, 0.8, 1e-4
    orders = (1, 2)
    x = jet_variable(1, 1, x0, orders)
    y = jet_variable(1, 2, y0, orders)
    jet = x * x * jets.sqrt(1 + y * y) + jets.log(2 + x * y)
    fd_y = (f(x0, y0 + h) - f(x0, y0 - h)) / (2 * h)
    fd_yy = (f(x0, y0 + h) - 2 * f(x0, y0) + f(x0, y0 - h)) / (h * h)
    fd_x = (f(x0 + h, y0) - f(x0 - h, y0)) / (2 * h)
    assert jet.value == pytest.approx(f(x0, y0), rel=1e-14)
    assert jet.partial((0, 1)) == pytest.approx(fd_y, rel=1e-7)
    assert jet.partial((0, 2)) == pytest.approx(fd_yy, rel=1e-4)
    assert jet.partial((1, 0)) == pytest.approx(fd_x, rel=1e-7)


def test_inverse_functions_compose_to_identity():
    orders = (2, 4)
    x = jet_variable(2, 1, 0.5, orders)
    y = jet_variable(2, 4, 1.5, orders)
    u = 2 + x * y + y * y
    assert_allclose(jets.exp(jets.log(u)).coeffs, u.coeffs, atol=1e-11)
    assert_allclose((jets.sqrt(u) * jets.sqrt(u)).coeffs, u.coeffs, atol=1e-11)
    assert_allclose((u / u).coeffs, Jet.constant(u.basis, 1.0).coeffs, atol=1e-12)


def test_trigonometric_identity():
    t = jet_variable(1, 2, 0.3, (0, 6))
    one = jets.sin(t) * jets.sin(t) + jets.cos(t) * jets.cos(t)
    assert_allclose(one.coeffs, Jet.constant(t.basis, 1.0).coeffs, atol=1e-13)


def test_diff_lowers_order():
    y = jet_variable(2, 3, 1.0, (2, 3))
    d = (y * y * y).diff(2)
    assert d.orders == (2, 2)
    assert d.value == pytest.approx(3.0)
    with pytest.raises(InsufficientOrdersError):
        jet_variable(2, 3, 1.0, (0, 1)).diff(0)


def test_grad_stacks_components():
    orders = (1, 2)
    y1 = jet_variable(2, 3, 2.0, orders)
    y2 = jet_variable(2, 4, 3.0, orders)
    grad = (y1 * y1 * y2).grad("y")
    assert grad.shape == (2,)
    assert_allclose(grad.value, [12.0, 4.0])


def test_out_of_orders_requests():
    y = jet_variable(1, 2, 1.0, (0, 3))
    with pytest.raises(InsufficientOrdersError):
        y.coefficient((0, 4))
    with pytest.raises(InsufficientOrdersError):
        y.truncate((0, 4))
    with pytest.raises(InsufficientOrdersError):
        jet_variable(1, 2, 1.0, (2, 0))
    with pytest.raises(ValueError):
        y.coefficient((1,))


def test_truncate_keeps_lower_coefficients(rng):
    a = random_jet(rng)
    small = a.truncate((1, 1))
    assert small.orders == (1, 1)
    for alpha in [(0, 0, 0, 0), (1, 0, 0, 0), (0, 1, 1, 0), (1, 0, 0, 1)]:
        assert small.coefficient(alpha) == a.coefficient(alpha)


def test_mixed_orders_align_to_the_smaller_box():
    a = jet_variable(1, 2, 1.0, (0, 4))
    b = jet_variable(1, 2, 1.0, (0, 2))
    assert (a * b).orders == (0, 2)


def test_domain_errors():
    t = jet_variable(1, 2, 0.0, (0, 2))
    with pytest.raises(DomainError):
        1.0 / t
    with pytest.raises(DomainError):
        jets.log(t - 1)
    with pytest.raises(DomainError):
        t / 0.0
    with pytest.raises(DomainError):
        jets.power(0.0, -1)


def test_matrix_inverse_and_contract(rng):
    orders = (1, 2)
    basis = get_basis(2, orders)
    coeffs = 0.1 * rng.normal(size=(basis.size, 2, 2))
    coeffs[0] = [[2.0, 0.5], [0.3, 1.5]]
    a = Jet(basis, coeffs)
    eye = jets.contract("ij,jk->ik", a, a.inv())
    assert_allclose(eye.coeffs, Jet.constant(basis, np.eye(2)).coeffs, atol=1e-12)
    v = np.array([1.0, -2.0])
    av = jets.contract("ij,j->i", a, v)
    assert_allclose(av.coeffs, coeffs @ v)


def test_stack_and_index(rng):
    a, b = random_jet(rng), random_jet(rng)
    s = jets.stack([a, b])
    assert s.shape == (2,)
    assert_allclose(s[1].coeffs, b.coeffs)


def test_jet_arith():
    t = jet_variable(1, 2, 0.5, (0, 2))
    assert_allclose(jets.jet_arith(t, 2.0, "pow").coeffs, (t * t).coeffs)
    assert jets.jet_arith(t, None, "exp").value == pytest.approx(math.exp(0.5))
    with pytest.raises(ValueError):
        jets.jet_arith(t, t, "tan")
