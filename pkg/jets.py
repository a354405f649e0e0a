"""Truncated multivariate Taylor jets.

A jet over the 2n variables (x^1..x^n, y^1..y^n) stores the Taylor
coefficients d^a f / a! of a function at an anchor point, for every
multi-index a = (a_x, a_y) with |a_x| <= Dx and |a_y| <= Dy.  The two caps
are independent, so a jet that needs six fiber derivatives but only two base
derivatives stays small.

Coefficients may be tensor valued: ``Jet.coeffs`` has shape (M, *shape) where
M is the size of the monomial basis.  Products of tensor jets broadcast over
the trailing shape; ``contract`` runs an einsum per monomial pair.
"""
import functools
import itertools
import math
import numbers

import numpy as np

from utils.errors import DomainError, InsufficientOrdersError

__all__ = [
    "Jet",
    "JetBasis",
    "get_basis",
    "jet_variable",
    "jet_arith",
    "contract",
    "stack",
    "partial",
    "exp",
    "log",
    "sqrt",
    "sin",
    "cos",
    "atan",
    "power",
]

X_GROUP = 0
Y_GROUP = 1


@functools.lru_cache(maxsize=None)
def _group_monomials(n, degree):
    """Exponent table (N, n) of all monomials of total degree <= degree, graded."""
    rows = []
    for d in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(n), d):
            rows.append(np.bincount(np.asarray(combo, dtype=np.int64), minlength=n))
    exps = np.array(rows, dtype=np.int64).reshape(len(rows), n)
    exps.setflags(write=False)
    return exps


@functools.lru_cache(maxsize=None)
def _group_keys(n, degree):
    exps = _group_monomials(n, degree)
    weights = (degree + 1) ** np.arange(n, dtype=np.int64)
    keys = exps @ weights
    order = np.argsort(keys)
    return keys[order], order, weights


def _lookup(n, degree, exps):
    """Positions of the exponent rows ``exps`` in the degree-``degree`` table."""
    sorted_keys, order, weights = _group_keys(n, degree)
    pos = np.searchsorted(sorted_keys, np.asarray(exps, dtype=np.int64) @ weights)
    return order[pos]


@functools.lru_cache(maxsize=None)
def _group_pairs(n, degree):
    exps = _group_monomials(n, degree)
    deg = exps.sum(axis=1)
    left, right = np.nonzero(deg[:, None] + deg[None, :] <= degree)
    target = _lookup(n, degree, exps[left] + exps[right])
    return left, right, target


class JetBasis:
    """Monomial basis of the order box (Dx, Dy) over n x- and n y-variables.

    The flat index of the monomial (a_x, a_y) is ix * ny + iy where ix, iy
    are the graded positions inside each group; index 0 is the constant.
    """

    def __init__(self, n, orders):
        dx, dy = orders
        if n < 1:
            raise ValueError("Jet dimension must be positive, got {}".format(n))
        if dx < 0 or dy < 0:
            raise InsufficientOrdersError(
                "Jet orders must be non-negative, got ({}, {})".format(dx, dy)
            )
        self.n = n
        self.orders = (dx, dy)
        self.x_exps = _group_monomials(n, dx)
        self.y_exps = _group_monomials(n, dy)
        self.nx = len(self.x_exps)
        self.ny = len(self.y_exps)
        self.size = self.nx * self.ny

    def __repr__(self):
        return "JetBasis(n={}, orders={})".format(self.n, self.orders)

    @functools.cached_property
    def product_table(self):
        n, (dx, dy), ny = self.n, self.orders, self.ny
        xl, xr, xt = _group_pairs(n, dx)
        yl, yr, yt = _group_pairs(n, dy)
        left = (xl[:, None] * ny + yl[None, :]).ravel()
        right = (xr[:, None] * ny + yr[None, :]).ravel()
        target = (xt[:, None] * ny + yt[None, :]).ravel()
        order = np.argsort(target, kind="stable")
        target = target[order]
        starts = np.searchsorted(target, np.arange(self.size))
        return left[order], right[order], starts

    def index(self, alpha):
        """Flat index of the multi-index ``alpha`` (x exponents then y exponents)."""
        alpha = np.asarray(alpha, dtype=np.int64)
        if alpha.shape != (2 * self.n,) or alpha.min() < 0:
            raise ValueError("Multi-index must have {} non-negative entries".format(2 * self.n))
        ax, ay = alpha[: self.n], alpha[self.n :]
        if ax.sum() > self.orders[0] or ay.sum() > self.orders[1]:
            raise InsufficientOrdersError(
                "Multi-index {} exceeds jet orders {}".format(tuple(alpha), self.orders)
            )
        ix = _lookup(self.n, self.orders[0], ax[None, :])[0]
        iy = _lookup(self.n, self.orders[1], ay[None, :])[0]
        return int(ix * self.ny + iy)


@functools.lru_cache(maxsize=None)
def get_basis(n, orders):
    return JetBasis(n, tuple(orders))


@functools.lru_cache(maxsize=None)
def _embedding(n, orders, sub_orders):
    big = get_basis(n, orders)
    small = get_basis(n, sub_orders)
    ix = _lookup(n, orders[0], small.x_exps)
    iy = _lookup(n, orders[1], small.y_exps)
    return (ix[:, None] * big.ny + iy[None, :]).ravel()


@functools.lru_cache(maxsize=None)
def _derivative_map(n, orders, group, i):
    dx, dy = orders
    src = get_basis(n, orders)
    if group == X_GROUP:
        dst = get_basis(n, (dx - 1, dy))
        shifted = dst.x_exps.copy()
        shifted[:, i] += 1
        ix = _lookup(n, dx, shifted)
        iy = np.arange(dst.ny)
        factor = np.repeat(dst.x_exps[:, i] + 1, dst.ny)
    else:
        dst = get_basis(n, (dx, dy - 1))
        shifted = dst.y_exps.copy()
        shifted[:, i] += 1
        ix = np.arange(dst.nx)
        iy = _lookup(n, dy, shifted)
        factor = np.tile(dst.y_exps[:, i] + 1, dst.nx)
    index = (ix[:, None] * src.ny + iy[None, :]).ravel()
    return dst, index, factor.astype(float)


def _expand(coeffs, ndim):
    """Insert axes after the monomial axis so trailing shapes right-align."""
    missing = ndim - (coeffs.ndim - 1)
    if missing <= 0:
        return coeffs
    return coeffs.reshape((coeffs.shape[0],) + (1,) * missing + coeffs.shape[1:])


def _align(a, b):
    if a.basis.n != b.basis.n:
        raise ValueError(
            "Jets of different dimension: {} and {}".format(a.basis.n, b.basis.n)
        )
    if a.basis.orders == b.basis.orders:
        return a, b
    orders = (
        min(a.basis.orders[0], b.basis.orders[0]),
        min(a.basis.orders[1], b.basis.orders[1]),
    )
    return a.truncate(orders), b.truncate(orders)


def _coeff_array(value):
    return np.asarray(value, dtype=float)


class Jet:
    __array_priority__ = 1000

    def __init__(self, basis, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[0] != basis.size:
            raise ValueError(
                "Coefficient table has {} rows, basis has {}".format(coeffs.shape[0], basis.size)
            )
        self.basis = basis
        self.coeffs = coeffs

    @classmethod
    def constant(cls, basis, value):
        value = _coeff_array(value)
        coeffs = np.zeros((basis.size,) + value.shape)
        coeffs[0] = value
        return cls(basis, coeffs)

    @property
    def n(self):
        return self.basis.n

    @property
    def orders(self):
        return self.basis.orders

    @property
    def shape(self):
        return self.coeffs.shape[1:]

    @property
    def value(self):
        """Value at the anchor point (the constant coefficient)."""
        v = self.coeffs[0]
        if v.ndim == 0:
            return float(v)
        return v.copy()

    def __repr__(self):
        return "Jet(n={}, orders={}, shape={})".format(self.n, self.orders, self.shape)

    # structure

    def copy(self):
        return Jet(self.basis, self.coeffs.copy())

    def truncate(self, orders):
        orders = tuple(orders)
        if orders == self.orders:
            return self
        if orders[0] > self.orders[0] or orders[1] > self.orders[1]:
            raise InsufficientOrdersError(
                "Cannot raise jet orders from {} to {}".format(self.orders, orders)
            )
        index = _embedding(self.n, self.orders, orders)
        return Jet(get_basis(self.n, orders), self.coeffs[index])

    def __getitem__(self, key):
        if not isinstance(key, tuple):
            key = (key,)
        return Jet(self.basis, self.coeffs[(slice(None),) + key])

    def transpose(self, *axes):
        return Jet(self.basis, self.coeffs.transpose((0,) + tuple(a + 1 for a in axes)))

    def swapaxes(self, a, b):
        return Jet(self.basis, np.swapaxes(self.coeffs, a + 1, b + 1))

    def nilpotent(self):
        """The jet minus its constant term."""
        coeffs = self.coeffs.copy()
        coeffs[0] = 0.0
        return Jet(self.basis, coeffs)

    # calculus

    def diff(self, var):
        """Derivative with respect to variable ``var`` (0-based; x first, then y)."""
        n = self.n
        if not 0 <= var < 2 * n:
            raise ValueError("Variable index {} out of range for n={}".format(var, n))
        group, i = divmod(var, n)
        if self.orders[group] == 0:
            raise InsufficientOrdersError(
                "Jet has order 0 in the {} variables, cannot differentiate".format(
                    "xy"[group]
                )
            )
        dst, index, factor = _derivative_map(n, self.orders, group, i)
        coeffs = self.coeffs[index] * _expand(factor, self.coeffs.ndim - 1)
        return Jet(dst, coeffs)

    def grad(self, group):
        """Derivatives over one variable group, stacked on a new last axis."""
        offset = 0 if group in (X_GROUP, "x") else self.n
        parts = [self.diff(offset + i) for i in range(self.n)]
        return Jet(parts[0].basis, np.stack([p.coeffs for p in parts], axis=-1))

    def coefficient(self, alpha):
        return self.coeffs[self.basis.index(alpha)]

    def partial(self, alpha):
        """Mixed partial derivative d^alpha at the anchor point."""
        scale = float(np.prod([math.factorial(int(a)) for a in alpha]))
        c = self.coefficient(alpha) * scale
        return float(c) if np.ndim(c) == 0 else c

    # arithmetic

    def __neg__(self):
        return Jet(self.basis, -self.coeffs)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b = _align(self, other)
            ndim = max(a.coeffs.ndim, b.coeffs.ndim) - 1
            return Jet(a.basis, _expand(a.coeffs, ndim) + _expand(b.coeffs, ndim))
        other = _coeff_array(other)
        shape = np.broadcast_shapes(self.shape, other.shape)
        coeffs = np.broadcast_to(_expand(self.coeffs, len(shape)), (self.basis.size,) + shape).copy()
        coeffs[0] += other
        return Jet(self.basis, coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b = _align(self, other)
            left, right, starts = a.basis.product_table
            ndim = max(a.coeffs.ndim, b.coeffs.ndim) - 1
            prod = _expand(a.coeffs, ndim)[left] * _expand(b.coeffs, ndim)[right]
            return Jet(a.basis, np.add.reduceat(prod, starts, axis=0))
        other = _coeff_array(other)
        ndim = max(self.coeffs.ndim - 1, other.ndim)
        return Jet(self.basis, _expand(self.coeffs, ndim) * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        other = _coeff_array(other)
        if np.any(other == 0):
            raise DomainError("Division by zero")
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, exponent):
        return power(self, exponent)

    def __rpow__(self, base):
        return power(base, self)

    # series composition

    @property
    def _series_length(self):
        return self.orders[0] + self.orders[1]

    def compose(self, series):
        """Evaluate sum_k series[k] * h^k where h is the nilpotent part.

        h^k vanishes for k > Dx + Dy, so ``series`` needs Dx + Dy + 1 rows.
        """
        series = np.asarray(series, dtype=float)
        h = self.nilpotent()
        shape = np.broadcast_shapes(self.shape, series.shape[1:])
        result = Jet.constant(self.basis, np.broadcast_to(series[-1], shape))
        for k in range(len(series) - 2, -1, -1):
            result = result * h
            result.coeffs[0] += series[k]
        return result

    def reciprocal(self):
        c = self.coeffs[0]
        if np.any(c == 0):
            raise DomainError("Division by a jet with zero constant term")
        return self.compose(_power_series(c, -1.0, self._series_length))

    def _int_power(self, p):
        if p < 0:
            return self.reciprocal()._int_power(-p)
        if p == 0:
            return Jet.constant(self.basis, np.ones(self.shape))
        result = None
        base = self
        while p:
            if p & 1:
                result = base if result is None else result * base
            p >>= 1
            if p:
                base = base * base
        return result.copy() if result is self else result

    def inv(self):
        """Matrix inverse of a square-matrix valued jet (Neumann series)."""
        if len(self.shape) != 2 or self.shape[0] != self.shape[1]:
            raise ValueError("inv() needs a square matrix jet, got shape {}".format(self.shape))
        a0 = np.linalg.inv(self.coeffs[0])
        step = contract("ij,jk->ik", -a0, self.nilpotent())
        result = Jet.constant(self.basis, a0)
        term = step
        for _ in range(self._series_length):
            result = result + contract("ij,jk->ik", term, a0)
            term = contract("ij,jk->ik", term, step)
        return result


def contract(subscripts, a, b):
    """einsum of two operands, at least one a Jet, for subscripts like "ij,jk->ik".

    The letter Z is reserved for the monomial axis.
    """
    lhs, out = subscripts.replace(" ", "").split("->")
    sa, sb = lhs.split(",")
    if isinstance(a, Jet) and isinstance(b, Jet):
        a, b = _align(a, b)
        left, right, starts = a.basis.product_table
        prod = np.einsum(
            "Z{},Z{}->Z{}".format(sa, sb, out), a.coeffs[left], b.coeffs[right], optimize=False
        )
        return Jet(a.basis, np.add.reduceat(prod, starts, axis=0))
    if isinstance(a, Jet):
        return Jet(a.basis, np.einsum("Z{},{}->Z{}".format(sa, sb, out), a.coeffs, _coeff_array(b)))
    if isinstance(b, Jet):
        return Jet(b.basis, np.einsum("{},Z{}->Z{}".format(sa, sb, out), _coeff_array(a), b.coeffs))
    raise TypeError("contract() needs at least one Jet operand")


def stack(jets, axis=-1):
    """Stack equally shaped jets along a new trailing axis."""
    jets = list(jets)
    orders = (min(j.orders[0] for j in jets), min(j.orders[1] for j in jets))
    jets = [j.truncate(orders) for j in jets]
    if axis < 0:
        axis = len(jets[0].shape) + 1 + axis
    return Jet(jets[0].basis, np.stack([j.coeffs for j in jets], axis=axis + 1))


def jet_variable(n, index, value, orders):
    """Jet of the coordinate variable ``index`` (1-based: 1..n is x, n+1..2n is y)."""
    if not 1 <= index <= 2 * n:
        raise ValueError("Variable index {} out of range 1..{}".format(index, 2 * n))
    group = (index - 1) // n
    if orders[group] < 1:
        raise InsufficientOrdersError(
            "Orders {} admit no linear term in variable {}".format(tuple(orders), index)
        )
    basis = get_basis(n, orders)
    alpha = np.zeros(2 * n, dtype=np.int64)
    alpha[index - 1] = 1
    jet = Jet.constant(basis, value)
    jet.coeffs[basis.index(alpha)] = 1.0
    return jet


def partial(jet, alpha):
    return jet.partial(alpha)


# elementary series coefficients g^(k)(c) / k!


def _power_series(c, r, K):
    c = np.asarray(c, dtype=float)
    out = np.empty((K + 1,) + c.shape)
    out[0] = c ** r
    for k in range(1, K + 1):
        out[k] = out[k - 1] * (r - k + 1) / (k * c)
    return out


def _exp_series(c, K):
    ec = np.exp(c)
    return np.array([ec / math.factorial(k) for k in range(K + 1)])


def _log_series(c, K):
    out = [np.log(c)]
    for k in range(1, K + 1):
        out.append((-1.0) ** (k + 1) / (k * c ** k))
    return np.array(out)


def _sin_series(c, K):
    return np.array([np.sin(c + k * np.pi / 2) / math.factorial(k) for k in range(K + 1)])


def _cos_series(c, K):
    return np.array([np.cos(c + k * np.pi / 2) / math.factorial(k) for k in range(K + 1)])


def _atan_series(c, K):
    # d/dt atan(c + t) = 1 / (q0 + q1 t + t^2)
    q0 = 1.0 + c * c
    q1 = 2.0 * c
    recip = [1.0 / q0]
    if K > 1:
        recip.append(-q1 * recip[0] / q0)
    for k in range(2, K):
        recip.append(-(q1 * recip[k - 1] + recip[k - 2]) / q0)
    out = [np.arctan(c)]
    for k in range(1, K + 1):
        out.append(recip[k - 1] / k)
    return np.array(out)


def _is_integer(value):
    return isinstance(value, numbers.Integral) or (
        isinstance(value, float) and value.is_integer()
    )


def _check_positive(x, what):
    if np.any(np.asarray(x) <= 0):
        raise DomainError("{} of a non-positive value".format(what))


def exp(x):
    if isinstance(x, Jet):
        return x.compose(_exp_series(x.coeffs[0], x._series_length))
    return math.exp(x)


def log(x):
    if isinstance(x, Jet):
        _check_positive(x.coeffs[0], "log")
        return x.compose(_log_series(x.coeffs[0], x._series_length))
    _check_positive(x, "log")
    return math.log(x)


def sqrt(x):
    if isinstance(x, Jet):
        _check_positive(x.coeffs[0], "sqrt")
        return x.compose(_power_series(x.coeffs[0], 0.5, x._series_length))
    if x < 0:
        raise DomainError("sqrt of a negative value")
    return math.sqrt(x)


def sin(x):
    if isinstance(x, Jet):
        return x.compose(_sin_series(x.coeffs[0], x._series_length))
    return math.sin(x)


def cos(x):
    if isinstance(x, Jet):
        return x.compose(_cos_series(x.coeffs[0], x._series_length))
    return math.cos(x)


def atan(x):
    if isinstance(x, Jet):
        return x.compose(_atan_series(x.coeffs[0], x._series_length))
    return math.atan(x)


def power(base, exponent):
    """base ** exponent; integer exponents by repeated multiplication.

    A non-integer exponent needs a positive base. A jet exponent is
    evaluated as exp(exponent * log(base)).
    """
    if isinstance(exponent, Jet):
        return exp(exponent * log(base))
    if isinstance(base, Jet):
        if _is_integer(exponent):
            return base._int_power(int(exponent))
        _check_positive(base.coeffs[0], "Non-integer power")
        return base.compose(_power_series(base.coeffs[0], float(exponent), base._series_length))
    if _is_integer(exponent):
        if base == 0 and exponent < 0:
            raise DomainError("Division by zero")
        return float(base) ** int(exponent)
    _check_positive(base, "Non-integer power")
    return float(base) ** float(exponent)


_OPERATIONS = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: a / b,
    "pow": power,
    "exp": lambda a, b=None: exp(a),
    "log": lambda a, b=None: log(a),
    "sqrt": lambda a, b=None: sqrt(a),
    "atan": lambda a, b=None: atan(a),
    "sin": lambda a, b=None: sin(a),
    "cos": lambda a, b=None: cos(a),
}


def jet_arith(a, b, op):
    """Apply a named operation; unary functions ignore ``b``."""
    if op not in _OPERATIONS:
        raise ValueError("Unknown jet operation: {!r}".format(op))
    return _OPERATIONS[op](a, b)
