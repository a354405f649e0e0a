"""Finsler tensors at a single point, in induced coordinates (x, y).

All derivatives come from one Taylor jet of the energy E = F^2.
Intermediate objects (g, g^-1, G, N, Chern Gamma) are carried as jets so
that their own x- and y-derivatives are exact; the tensors handed out are
plain numpy arrays at the anchor point.

Index conventions (0-based arrays, same slot order as the names):

    g[i, j]          g_ij = 1/2 d^2E/dy^i dy^j
    G[i]             G^i = 1/4 g^il (y^k d^2E/dy^l dx^k - dE/dx^l)
    N[i, j]          N^i_j = dG^i/dy^j
    Gc[i, j, k]      dN^i_j/dy^k
    Gb[h, i, j, k]   d^3G^h/dy^i dy^j dy^k
    C[i, j, k]       1/4 d^3E/dy^i dy^j dy^k
    L[i, j, k]       1/2 y_h Gb^h_ijk
    Gamma[i, j, k]   Chern connection, symmetric in (j, k)
    Lambda[i, j, k]  Gc - Gamma
    Rs[h, i, j, k]   Chern h-curvature, h value, i acted-on slot, (j, k) pair
    Ps[a, h, j, k]   dGamma^a_hj/dy^k
    Rb[m, j, k]      Barthel curvature, antisymmetric in (j, k)
    Rc[h, i, j, k]   Rs + g^hm C_mis Rb^s_jk
    Rlow[w, i, j, k] g_wh Rs^h_ijk

with the horizontal derivative delta_j = d/dx^j - N^m_j d/dy^m.
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Optional, Tuple

import numpy as np

import jets
from metric_dsl import eval_jet
from utils.config import COND_MAX, get_default_orders
from utils.errors import DegenerateMetricError, InsufficientOrdersError
from utils.logger import logger

ORDER_REQUIREMENTS = {
    "E": (0, 0),
    "g": (0, 2),
    "G": (1, 3),
    "N": (1, 3),
    "Gc": (1, 4),
    "Gb": (1, 6),
    "C": (0, 3),
    "L": (1, 6),
    "Gamma": (1, 4),
    "Lambda": (1, 4),
    "Ps": (1, 5),
    "Rb": (2, 4),
    "Rs": (2, 6),
    "Rc": (2, 6),
    "Rlow": (2, 6),
}

# listed in evaluation order
DEPENDENCIES = {
    "E": (),
    "g": (),
    "G": ("g",),
    "N": ("G",),
    "Gc": ("N",),
    "Gb": ("Gc",),
    "C": ("g",),
    "L": ("g", "Gb"),
    "Gamma": ("g", "N"),
    "Lambda": ("Gc", "Gamma"),
    "Ps": ("Gamma",),
    "Rb": ("N",),
    "Rs": ("Gamma", "Rb"),
    "Rc": ("Rs", "C", "Rb"),
    "Rlow": ("g", "Rs"),
}

TENSOR_NAMES = tuple(ORDER_REQUIREMENTS)

# Global sign of Rs and Rb, chosen so the ex1 golden components come out
# right. Rs^h_ijk y^i = Rb^h_jk holds for either value.
CURVATURE_SIGN = 1.0


def check_orders(orders, names):
    """Raise InsufficientOrdersError unless ``orders`` cover every tensor in ``names``."""
    missing = []
    for name in names:
        need = ORDER_REQUIREMENTS[name]
        if orders[0] < need[0] or orders[1] < need[1]:
            missing.append("{} needs ({}, {})".format(name, need[0], need[1]))
    if missing:
        raise InsufficientOrdersError(
            "insufficient orders ({}, {}): {}".format(orders[0], orders[1], "; ".join(missing))
        )


def _max_abs(a):
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


@dataclass
class GeometryBundle:
    """Tensors at one point; fields not requested stay None."""

    metric: str
    point: object
    orders: Tuple[int, int]
    E: float = None
    F: float = None
    g: Optional[np.ndarray] = None
    g_inv: Optional[np.ndarray] = None
    cond: Optional[float] = None
    y_lower: Optional[np.ndarray] = None
    G: Optional[np.ndarray] = None
    N: Optional[np.ndarray] = None
    Gc: Optional[np.ndarray] = None
    Gb: Optional[np.ndarray] = None
    C: Optional[np.ndarray] = None
    L: Optional[np.ndarray] = None
    Gamma: Optional[np.ndarray] = None
    Lambda: Optional[np.ndarray] = None
    Rs: Optional[np.ndarray] = None
    Ps: Optional[np.ndarray] = None
    Rb: Optional[np.ndarray] = None
    Rc: Optional[np.ndarray] = None
    Rlow: Optional[np.ndarray] = None
    # magnitudes of the inputs each tensor was built from, for relative thresholds
    references: Dict[str, float] = field(default_factory=dict)

    @property
    def n(self):
        return len(self.point.y)

    @property
    def y(self):
        return np.asarray(self.point.y, dtype=float)

    def tensors(self):
        """Computed tensors in a fixed order."""
        out = {}
        for name in TENSOR_NAMES:
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out

    def scale(self, name):
        """Magnitude a tensor is compared against: its own size or its inputs'."""
        value = getattr(self, name)
        own = _max_abs(value) if value is not None else 0.0
        return max(own, self.references.get(name, 0.0))

    def require(self, *names):
        missing = [name for name in names if getattr(self, name) is None]
        if missing:
            raise InsufficientOrdersError(
                "bundle at {} lacks {} (orders {})".format(self.point, ", ".join(missing), self.orders)
            )

    def h_frame_to_tangent(self, a):
        """TTM components (a, -N a) of the horizontal vector sum a^i h_i."""
        self.require("N")
        a = np.asarray(a, dtype=float)
        return np.concatenate([a, -self.N @ a], axis=0)


def dependency_closure(names):
    """``names`` plus everything they are built from, in evaluation order."""
    needed = set()
    stack = list(names)
    while stack:
        name = stack.pop()
        if name not in ORDER_REQUIREMENTS:
            raise ValueError("Unknown tensor: {!r}".format(name))
        if name not in needed:
            needed.add(name)
            stack.extend(DEPENDENCIES[name])
    return [name for name in TENSOR_NAMES if name in needed]


class FinslerGeometry:
    """Lazy tensor pipeline for one metric at one point."""

    def __init__(self, spec, point, orders=None, cond_max=COND_MAX):
        self.spec = spec
        self.point = point
        self.orders = tuple(orders) if orders is not None else get_default_orders()
        self.cond_max = cond_max
        self.n = spec.dim
        self.y = np.asarray(point.y, dtype=float)
        spec.check_point(point)

    def require(self, *names):
        check_orders(self.orders, names)

    # jets

    @cached_property
    def energy_jet(self):
        logger.debug("Energy jet of %s at %s, orders %s", self.spec.name, self.point, self.orders)
        return eval_jet(self.spec, self.point, self.orders)

    @cached_property
    def metric_jet(self):
        g = 0.5 * self.energy_jet.grad("y").grad("y")
        return 0.5 * (g + g.swapaxes(0, 1))

    @cached_property
    def inverse_metric_jet(self):
        self.fundamental_tensor()
        return self.metric_jet.inv()

    def y_jet(self, orders):
        """The fiber coordinates y^i as an (n,) jet."""
        n = self.n
        if orders[1] == 0:
            return jets.Jet.constant(jets.get_basis(n, orders), self.y)
        return jets.stack(
            [jets.jet_variable(n, n + i + 1, v, orders) for i, v in enumerate(self.y)]
        )

    @cached_property
    def spray_jet(self):
        E = self.energy_jet
        Exy = E.grad("y").grad("x")
        v = jets.contract("lk,k->l", Exy, self.y_jet(Exy.orders)) - E.grad("x")
        return 0.25 * jets.contract("il,l->i", self.inverse_metric_jet, v)

    @cached_property
    def connection_jet(self):
        return self.spray_jet.grad("y")

    @cached_property
    def berwald_jet(self):
        return self.connection_jet.grad("y")

    def delta(self, jet):
        """Horizontal derivatives delta_j T, stacked on a new last axis j."""
        dy = jet.grad("y")
        return jet.grad("x") - jets.contract("...m,mj->...j", dy, self.connection_jet)

    @cached_property
    def chern_jet(self):
        D = self.delta(self.metric_jet)
        # T[s,j,k] = delta_j g_sk + delta_k g_js - delta_s g_jk
        T = D.transpose(0, 2, 1) + D.transpose(1, 0, 2) - D.transpose(2, 0, 1)
        gamma = 0.5 * jets.contract("is,sjk->ijk", self.inverse_metric_jet, T)
        return 0.5 * (gamma + gamma.swapaxes(1, 2))

    @cached_property
    def delta_connection(self):
        return self.delta(self.connection_jet).value

    @cached_property
    def delta_chern(self):
        return self.delta(self.chern_jet).value

    # tensors at the point

    @cached_property
    def _metric(self):
        g = self.metric_jet.value
        if not np.all(np.isfinite(g)):
            raise DegenerateMetricError("Fundamental tensor is not finite at {}".format(self.point))
        cond = float(np.linalg.cond(g))
        if not np.isfinite(cond) or cond > self.cond_max:
            raise DegenerateMetricError(
                "Fundamental tensor is degenerate at {} (condition number {:.3e} > {:.1e})".format(
                    self.point, cond, self.cond_max
                )
            )
        logger.debug("cond(g) = %.3e at %s", cond, self.point)
        return g, np.linalg.inv(g), cond

    @cached_property
    def _cartan(self):
        return 0.5 * self.metric_jet.grad("y").value

    @cached_property
    def _landsberg(self):
        g = self._metric[0]
        return 0.5 * np.einsum("h,hijk->ijk", g @ self.y, self.berwald_jet.grad("y").value)

    @cached_property
    def _barthel(self):
        dN = self.delta_connection
        return CURVATURE_SIGN * (dN - dN.swapaxes(1, 2))

    @cached_property
    def _chern_h(self):
        gamma = self.chern_jet.value
        # A[h,i,j,k] = delta_k Gamma^h_ij, Q[h,i,j,k] = Gamma^h_mk Gamma^m_ij
        A = self.delta_chern
        Q = np.einsum("hmk,mij->hijk", gamma, gamma)
        return CURVATURE_SIGN * (A - A.swapaxes(2, 3) + Q - Q.swapaxes(2, 3))

    @cached_property
    def _cartan_h(self):
        g_inv = self._metric[1]
        return self._chern_h + np.einsum("hm,mis,sjk->hijk", g_inv, self._cartan, self._barthel)

    def fundamental_tensor(self):
        """(g, g^-1, condition number); refuses near-singular g."""
        self.require("g")
        return self._metric

    def spray_and_connection(self):
        self.require("G", "N")
        return self.spray_jet.value, self.connection_jet.value

    def berwald_tensors(self):
        self.require("Gc", "Gb")
        return self.berwald_jet.value, self.berwald_jet.grad("y").value

    def cartan_landsberg(self):
        self.require("C", "L")
        return self._cartan, self._landsberg

    def chern_connection(self):
        self.require("Gamma", "Lambda")
        gamma = self.chern_jet.value
        return gamma, self.berwald_jet.value - gamma

    def curvatures(self):
        """(Rs, Ps, Rb, Rc, Rlow)."""
        self.require("Rs", "Ps", "Rb", "Rc", "Rlow")
        Rs = self._chern_h
        Rlow = np.einsum("wh,hijk->wijk", self._metric[0], Rs)
        return Rs, self.chern_jet.grad("y").value, self._barthel, self._cartan_h, Rlow

    def _evaluate(self, name):
        if name == "E":
            return float(self.energy_jet.value)
        if name == "g":
            return self._metric[0]
        if name == "G":
            return self.spray_jet.value
        if name == "N":
            return self.connection_jet.value
        if name == "Gc":
            return self.berwald_jet.value
        if name == "Gb":
            return self.berwald_jet.grad("y").value
        if name == "C":
            return self._cartan
        if name == "L":
            return self._landsberg
        if name == "Gamma":
            return self.chern_jet.value
        if name == "Lambda":
            return self.berwald_jet.value - self.chern_jet.value
        if name == "Ps":
            return self.chern_jet.grad("y").value
        if name == "Rb":
            return self._barthel
        if name == "Rs":
            return self._chern_h
        if name == "Rc":
            return self._cartan_h
        return np.einsum("wh,hijk->wijk", self._metric[0], self._chern_h)

    def bundle(self, tensors=None):
        """Evaluate the requested tensors (all by default) into a GeometryBundle."""
        names = TENSOR_NAMES if tensors is None else tuple(tensors)
        for name in names:
            if name not in ORDER_REQUIREMENTS:
                raise ValueError("Unknown tensor: {!r}".format(name))
        self.require(*names)

        bundle = GeometryBundle(metric=self.spec.name, point=self.point, orders=self.orders)
        for name in dependency_closure(names):
            setattr(bundle, name, self._evaluate(name))
        if bundle.E is None:
            bundle.E = self._evaluate("E")

        E = bundle.E
        bundle.F = float(np.sqrt(E)) if E is not None and E >= 0 else None
        if bundle.g is not None:
            _, bundle.g_inv, bundle.cond = self._metric
            bundle.y_lower = bundle.g @ self.y

        ynorm = float(np.linalg.norm(self.y))
        refs = bundle.references
        if bundle.C is not None:
            refs["C"] = _max_abs(bundle.g) / ynorm
        if bundle.Gb is not None:
            refs["Gb"] = _max_abs(bundle.Gc) / ynorm
        if bundle.L is not None:
            refs["L"] = 0.5 * float(np.linalg.norm(bundle.y_lower)) * _max_abs(bundle.Gb)
        if bundle.Ps is not None:
            refs["Ps"] = _max_abs(bundle.Gamma) / ynorm
        if bundle.Lambda is not None:
            refs["Lambda"] = max(_max_abs(bundle.Gc), _max_abs(bundle.Gamma))
        if bundle.Rb is not None:
            refs["Rb"] = _max_abs(self.delta_connection)
        if bundle.Rs is not None:
            refs["Rs"] = max(_max_abs(self.delta_chern), _max_abs(bundle.Gamma) ** 2)
            refs["Rc"] = refs["Rs"]
            refs["Rlow"] = refs["Rs"] * _max_abs(bundle.g)
        return bundle


def compute_bundle(spec, point, orders=None, tensors=None, cond_max=COND_MAX):
    return FinslerGeometry(spec, point, orders, cond_max).bundle(tensors)


def fundamental_tensor(spec, point, orders=None):
    return FinslerGeometry(spec, point, orders).fundamental_tensor()


def spray_and_connection(spec, point, orders=None):
    return FinslerGeometry(spec, point, orders).spray_and_connection()


def berwald_tensors(spec, point, orders=None):
    return FinslerGeometry(spec, point, orders).berwald_tensors()


def cartan_landsberg(spec, point, orders=None):
    return FinslerGeometry(spec, point, orders).cartan_landsberg()


def chern_connection(spec, point, orders=None):
    return FinslerGeometry(spec, point, orders).chern_connection()


def curvatures(spec, point, orders=None):
    return FinslerGeometry(spec, point, orders).curvatures()
