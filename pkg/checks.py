"""Identity suite, Berwald/Landsberg classification and the golden examples."""
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from tqdm import tqdm

import geometry
from builtin_metrics import resolve_metric
from geometry import FinslerGeometry, check_orders
from identities import ABS_FLOOR, identity_residuals, is_negligible, relative_residual
from metric_dsl import PointState, check_homogeneity, eval_jet
from nullity import (
    Subspace,
    analyze_point,
    bracket_vertical,
    grid_scan,
    kernel_space,
    nullity_space,
    structural_flags,
    subspace_equal,
    subspace_leq,
)
from utils.config import CLASS_TOL, COND_MAX, IDENTITY_TOL, RANK_TOL
from utils.errors import FinslerError, InsufficientOrdersError
from utils.logger import logger
from utils.sampling import sample_points

BERWALD = "Berwald"
LANDSBERG = "Landsberg-not-Berwald"
NON_LANDSBERG = "non-Landsberg"
MIXED = "mixed"


# Riemannian oracle


def levi_civita_curvature(spec, point):
    """Chern h-curvature a Riemannian metric must have, from Christoffel symbols.

    g_ij(x) is read off the energy at the point's y; nothing of the spray or
    Chern pipeline is used.  Returned in the Rs[h, i, j, k] slot order.
    """
    E = eval_jet(spec, point, (2, 2))
    g = 0.5 * E.grad("y").grad("y")
    g0 = g.value
    dg = g.grad("x").value  # dg[i, j, m] = d_m g_ij
    ddg = g.grad("x").grad("x").value  # ddg[i, j, m, p] = d_p d_m g_ij
    g_inv = np.linalg.inv(g0)

    # first kind: Gl[l, j, k] = 1/2 (d_j g_lk + d_k g_lj - d_l g_jk)
    Gl = 0.5 * (np.einsum("lkj->ljk", dg) + np.einsum("ljk->ljk", dg) - np.einsum("jkl->ljk", dg))
    dGl = 0.5 * (
        np.einsum("lkjp->ljkp", ddg) + np.einsum("ljkp->ljkp", ddg) - np.einsum("jklp->ljkp", ddg)
    )
    gamma = np.einsum("il,ljk->ijk", g_inv, Gl)
    d_inv = -np.einsum("ia,abp,bl->ilp", g_inv, dg, g_inv)
    d_gamma = np.einsum("ilp,ljk->ijkp", d_inv, Gl) + np.einsum("il,ljkp->ijkp", g_inv, dGl)

    # Rs[h,i,j,k] = d_k Gamma^h_ij - d_j Gamma^h_ik + Gamma^h_mk Gamma^m_ij - Gamma^h_mj Gamma^m_ik
    A = d_gamma
    Q = np.einsum("hmk,mij->hijk", gamma, gamma)
    return A - A.swapaxes(2, 3) + Q - Q.swapaxes(2, 3)


# identity suite


@dataclass
class IdentityCheck:
    name: str
    tol: float
    max_residual: float = 0.0
    worst_point: Optional[str] = None
    evaluated: int = 0
    skipped: int = 0

    @property
    def passed(self):
        return self.max_residual <= self.tol

    @property
    def status(self):
        if self.evaluated == 0:
            return "skipped"
        return "pass" if self.passed else "FAIL"

    def add(self, residual, point):
        if residual is None:
            self.skipped += 1
            return
        self.evaluated += 1
        residual = float(residual)
        if np.isnan(residual):
            residual = np.inf
        if self.worst_point is None or residual > self.max_residual:
            self.max_residual = residual
            self.worst_point = str(point)

    def to_dict(self):
        return {
            "status": self.status,
            "max_residual": self.max_residual,
            "tol": self.tol,
            "worst_point": self.worst_point,
            "evaluated": self.evaluated,
            "skipped": self.skipped,
        }


@dataclass
class IdentityReport:
    metric: str
    tol: float
    points: List[PointState]
    checks: Dict[str, IdentityCheck] = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.checks.values())

    @property
    def failures(self):
        return [name for name, c in self.checks.items() if not c.passed]

    def record(self, name, residual, point):
        if name not in self.checks:
            self.checks[name] = IdentityCheck(name, self.tol)
        self.checks[name].add(residual, point)


def _scaled_connection_residuals(spec, point, bundle, orders, cond_max):
    """N(x, 2y) = 2 N(x, y) and Gamma(x, 2y) = Gamma(x, y)."""
    scaled_point = point.scaled(2.0)
    if spec.violations(scaled_point):
        return None, None
    scaled = FinslerGeometry(spec, scaled_point, orders, cond_max).bundle(("N", "Gamma"))
    return (
        relative_residual(scaled.N, 2.0 * bundle.N),
        relative_residual(scaled.Gamma, bundle.Gamma, bundle.scale("Gamma")),
    )


def run_identity_suite(spec, n_points, seed, tol=IDENTITY_TOL, orders=None, rel_tol=RANK_TOL,
                       cond_max=COND_MAX, progress=True):
    """Evaluate every pointwise identity at ``n_points`` seeded in-domain points."""
    if n_points < 1:
        raise ValueError("n_points must be at least 1")
    points = sample_points(spec, n_points, seed)
    report = IdentityReport(spec.name, tol, points)

    homogeneity = check_homogeneity(spec, n_points, seed, tol, points=points)
    for point in points:
        bad = [v for v in homogeneity.violations if v[0] == str(point)]
        report.record("homogeneity", np.inf if bad else 0.0, point)
    report.checks["homogeneity"].max_residual = max(
        report.checks["homogeneity"].max_residual, homogeneity.max_residual
    )

    for point in tqdm(points, desc=spec.name, disable=not progress):
        bundle = FinslerGeometry(spec, point, orders, cond_max).bundle()
        for name, residual in identity_residuals(bundle).items():
            report.record(name, residual, point)

        n_res, gamma_res = _scaled_connection_residuals(spec, point, bundle, orders, cond_max)
        report.record("connection-homogeneity", n_res, point)
        report.record("chern-homogeneity", gamma_res, point)

        if is_negligible(bundle, "C"):
            oracle = levi_civita_curvature(spec, point)
            report.record("riemannian-reduction", relative_residual(bundle.Rs, oracle, bundle.scale("Rs")), point)
        else:
            report.record("riemannian-reduction", None, point)

        spaces = {
            "chern-h": nullity_space(bundle, "chern-h", rel_tol),
            "chern-hv": nullity_space(bundle, "chern-hv", rel_tol),
        }
        flags = structural_flags(bundle, spaces, rel_tol)
        for name in ("kernel==nullity", "image-rank", "hv-slot-symmetry"):
            ok = flags.get(name)
            report.record(name, None if ok is None else (0.0 if ok else 1.0), point)

    for name, check in report.checks.items():
        logger.debug("%s: %s (max residual %.3e)", name, check.status, check.max_residual)
    if report.failures:
        logger.warning("%s: %d identit%s failed: %s", spec.name, len(report.failures),
                       "y" if len(report.failures) == 1 else "ies", ", ".join(report.failures))
    return report


# classification


@dataclass
class PointVerdict:
    point: PointState
    berwald_measure: float
    landsberg_measure: float
    lambda_measure: float
    max_berwald: float
    max_landsberg: float
    verdict: str
    consistent: bool = True

    def to_dict(self):
        return {
            "point": str(self.point),
            "verdict": self.verdict,
            "berwald_measure": self.berwald_measure,
            "landsberg_measure": self.landsberg_measure,
            "lambda_measure": self.lambda_measure,
            "max_berwald": self.max_berwald,
            "max_landsberg": self.max_landsberg,
            "consistent": self.consistent,
        }


@dataclass
class Classification:
    metric: str
    tol: float
    verdicts: List[PointVerdict]

    @property
    def consensus(self):
        kinds = {v.verdict for v in self.verdicts}
        return kinds.pop() if len(kinds) == 1 else MIXED

    @property
    def consistent(self):
        return all(v.consistent for v in self.verdicts)


def _measure(bundle, name):
    value = float(np.max(np.abs(getattr(bundle, name))))
    return value / max(bundle.references.get(name, 0.0), ABS_FLOOR), value


def classify_point(bundle, tol=CLASS_TOL):
    berwald, max_gb = _measure(bundle, "Gb")
    landsberg, max_l = _measure(bundle, "L")
    lam, _ = _measure(bundle, "Lambda")
    if berwald <= tol:
        verdict = BERWALD
    elif landsberg <= tol:
        verdict = LANDSBERG
    else:
        verdict = NON_LANDSBERG
    consistent = verdict != BERWALD or landsberg <= 10 * tol
    if not consistent:
        logger.warning("Berwald verdict at %s with Landsberg measure %.3e", bundle.point, landsberg)
    return PointVerdict(bundle.point, berwald, landsberg, lam, max_gb, max_l, verdict, consistent)


def classify(spec, n_points, seed, tol=CLASS_TOL, orders=None, cond_max=COND_MAX, progress=True, points=None):
    """Per-point Berwald/Landsberg verdicts and their consensus."""
    if points is None:
        if n_points < 1:
            raise ValueError("n_points must be at least 1")
        points = sample_points(spec, n_points, seed)
    verdicts = []
    for point in tqdm(points, desc=spec.name, disable=not progress):
        bundle = FinslerGeometry(spec, point, orders, cond_max).bundle(("Gb", "L", "Lambda"))
        verdicts.append(classify_point(bundle, tol))
    result = Classification(spec.name, tol, verdicts)
    logger.info("%s: %s", spec.name, result.consensus)
    return result


# golden values, 0-based (h, i, j, k) keys


def _ex1_rs(x, y):
    x2 = x[1]
    y1, y2 = y[0], y[1]
    return {
        (0, 0, 0, 1): (4 * y2**4 + x2**2 * y1**4) / (18 * x2**2 * y1 * y2**3),
        (0, 1, 0, 1): -(4 * y2**4 + x2**2 * y1**4) / (9 * x2**2 * y2**4),
        (1, 0, 0, 1): (4 * y1**2 * y2**4 + x2**2 * y1**6) / (9 * y2**6),
        (1, 1, 0, 1): -(4 * y1**3 * y2**4 + x2**2 * y1**7) / (18 * y2**7),
    }


def ex1_cartan_kernel(x, y):
    """Columns spanning Ker(cartan-h) of ex1 in the horizontal frame."""
    x2 = x[1]
    y1, y2, y3, y4 = y
    return np.array([
        [y1 / y2, 0.0],
        [1.0, 0.0],
        [0.0, 1.0],
        [(x2**2 * y1**4 + y2**4 + 2 * y3**4 + 2 * y4**4) / (y2 * y4**3), -(y3**3) / y4**3],
    ])


def _ex2_n(x, y):
    x1, x2 = x[0], x[1]
    y1, y2, y3 = y
    D = 4 * y2 - y3
    return {
        (0, 0): -0.5 * x2 * y1,
        (1, 1): -4 * x1 * y2**3 * (3 * y2 - y3) / (D**2 * y3),
        (1, 2): 2 * x1 * y2**4 * (2 * y2 - y3) / (D**2 * y3**2),
        (2, 1): -x1 * y3 * (2 * y2 - y3) * y2 / D**2,
        (2, 2): -2 * x1 * y2**3 / D**2,
    }


def _ex2_ps(x, y):
    x1 = x[0]
    _, y2, y3 = y
    D4 = (4 * y2 - y3) ** 4
    p1 = -(y3**3) + 8 * y3**2 * y2 - 24 * y2**2 * y3 + 24 * y2**3
    p2 = y3**2 - 4 * y2 * y3 + 8 * y2**2
    p3 = -28 * y2**2 * y3 + 32 * y2**3 + 8 * y3**2 * y2 - y3**3
    p4 = -8 * y2 * y3 + 8 * y2**2 + y3**2
    return {
        (1, 1, 1, 1): -12 * x1 * y2 * p1 / (y3 * D4),
        (1, 1, 1, 2): 12 * x1 * y2**2 * p1 / (y3**2 * D4),
        (2, 1, 1, 1): 6 * x1 * y3 * p2 / D4,
        (2, 1, 1, 2): -6 * x1 * y2 * p2 / D4,
        (1, 1, 2, 1): 6 * x1 * y2**2 * p3 / (y3**2 * D4),
        (1, 1, 2, 2): -6 * x1 * y2**3 * p3 / (y3**3 * D4),
        (2, 1, 2, 1): -12 * x1 * y2**2 * y3 / D4,
        (2, 1, 2, 2): 12 * x1 * y2**3 / D4,
        (1, 2, 2, 1): -48 * x1 * y2**5 * (2 * y2 - y3) / (y3**3 * D4),
        (1, 2, 2, 2): 48 * x1 * y2**6 * (2 * y2 - y3) / (y3**4 * D4),
        (2, 2, 2, 1): -6 * x1 * y2**2 * p4 / (y3 * D4),
        (2, 2, 2, 2): 6 * x1 * y2**3 * p4 / (y3**2 * D4),
    }


def ex2_bracket(y):
    """Vertical part of [h_1, h_2 + 2 h_3] on the slice y3 = 2 y2."""
    y1, y2, _ = y
    return np.array([-0.5 * y1, 0.5 * y2, y2])


GOLDEN_EX1_POINT = PointState((0.0, 1.0, 0.0, 0.0), (1.0, 1.0, 1.0, 1.0))
GOLDEN_EX1_VALUE = 5.0 / 18.0
EX3_BERWALD_POINT = PointState((0.0, 0.0, 0.0), (0.0, 1.0, 1.0))
EX3_BERWALD_VALUE = -3.0 / 16.0


def _golden_residual(actual, expected):
    worst = 0.0
    for key, value in expected.items():
        worst = max(worst, abs(actual[key] - value) / max(abs(value), ABS_FLOOR))
    return worst


# reproduction


@dataclass
class ReproductionItem:
    key: str
    title: str
    passed: bool = False
    detail: str = ""

    def to_dict(self):
        return {"key": self.key, "title": self.title, "passed": self.passed, "detail": self.detail}


def _ex1_golden(orders, n_points, seed, tol):
    spec = resolve_metric("ex1")
    worst = 0.0
    for point in sample_points(spec, n_points, seed):
        bundle = FinslerGeometry(spec, point, orders).bundle(("Rs",))
        worst = max(worst, _golden_residual(bundle.Rs, _ex1_rs(point.x, point.y)))
    spot = FinslerGeometry(spec, GOLDEN_EX1_POINT, orders).bundle(("Rs",)).Rs[0, 0, 0, 1]
    ok = worst <= tol and abs(spot - GOLDEN_EX1_VALUE) <= 1e-10
    return ok, "max relative error {:.3e}; Rs^1_112 at {} = {:.12g}".format(worst, GOLDEN_EX1_POINT, float(spot))


def _ex1_nullity(orders, n_points, seed, tol):
    spec = resolve_metric("ex1")
    e34 = Subspace(np.eye(4)[:, 2:], tol)
    problems = []
    for point in sample_points(spec, n_points, seed):
        bundle = FinslerGeometry(spec, point, orders).bundle(("Rs",))
        nul = nullity_space(bundle, "chern-h", tol)
        ker = kernel_space(bundle, "chern-h", tol)
        y1, y2 = point.y[0], point.y[1]
        direction = np.array([2 * y1 / y2, 1.0, 0.0, 0.0])
        first_row = np.einsum("ijk,i->jk", bundle.Rs[0], direction)
        if not subspace_equal(nul, e34, tol):
            problems.append("{}: nullity dim {} != span(e3, e4)".format(point, nul.rank))
        if relative_residual(first_row, 0.0, bundle.scale("Rs")) > tol:
            problems.append("{}: Rs^1 does not vanish on (2y1/y2, 1, 0, 0)".format(point))
        if not subspace_leq(nul, ker, tol):
            problems.append("{}: nullity not inside kernel".format(point))
        if not subspace_equal(ker, e34, tol):
            problems.append("{}: kernel dim {} != span(e3, e4)".format(point, ker.rank))
    detail = "mu = 2, Ker(chern-h) = span(e3, e4), Rs^1 kills (2y1/y2, 1, 0, 0) at {} point(s)".format(n_points)
    return not problems, "; ".join(problems) or detail


def _ex1_cartan_kernel(orders, n_points, seed, tol):
    spec = resolve_metric("ex1")
    problems = []
    for point in sample_points(spec, n_points, seed):
        bundle = FinslerGeometry(spec, point, orders).bundle(("Rc",))
        ker = kernel_space(bundle, "cartan-h", tol)
        expected = Subspace(np.linalg.qr(ex1_cartan_kernel(point.x, point.y))[0], tol)
        if not subspace_equal(ker, expected, tol):
            problems.append("{}: Ker(cartan-h) dim {} differs from the closed form".format(point, ker.rank))
        if subspace_equal(ker, kernel_space(bundle, "chern-h", tol), tol):
            problems.append("{}: Ker(cartan-h) == Ker(chern-h)".format(point))
    return not problems, "; ".join(problems) or "Ker(cartan-h) matches at {} point(s)".format(n_points)


def _ex2_connection(orders, n_points, seed, tol):
    spec = resolve_metric("ex2")
    worst = 0.0
    for point in sample_points(spec, n_points, seed):
        bundle = FinslerGeometry(spec, point, orders).bundle(("N",))
        worst = max(worst, _golden_residual(bundle.N, _ex2_n(point.x, point.y)))
    return worst <= tol, "max relative error {:.3e}".format(worst)


def _ex2_hv_curvature(orders, n_points, seed, tol):
    spec = resolve_metric("ex2")
    worst = 0.0
    for point in sample_points(spec, n_points, seed):
        bundle = FinslerGeometry(spec, point, orders).bundle(("Ps",))
        worst = max(worst, _golden_residual(bundle.Ps, _ex2_ps(point.x, point.y)))
    return worst <= tol, "max relative error {:.3e}".format(worst)


def _ex2_hv_nullity(orders, n_points, seed, tol):
    spec = resolve_metric("ex2")
    base = PointState((1.0, 1.0, 1.0), (1.0, 1.0, 2.0))
    scan = grid_scan(spec, [("y3", 1.5, 2.5, 5)], base, ("chern-hv",), tol, orders,
                     ray_check=False, progress=False)
    on = [r for r in scan.records if r.point.y[2] == 2.0 * r.point.y[1]]
    off = [r for r in scan.records if r.point.y[2] != 2.0 * r.point.y[1]]
    expected = Subspace(np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 2.0]]) / np.array([1.0, np.sqrt(5.0)]), tol)
    problems = []
    for record in on:
        S = record.subspaces["chern-hv"]
        if S.rank != 2 or not subspace_equal(S, expected, tol):
            problems.append("{}: on-slice mu = {}".format(record.point, S.rank))
    if any(r.mu["chern-hv"] == 2 for r in off):
        problems.append("off-slice points also have mu = 2")
    if not on:
        problems.append("no grid point on the slice")

    bundle = FinslerGeometry(spec, base, orders).bundle(("Rb",))
    v = bracket_vertical(bundle, [1.0, 0.0, 0.0], [0.0, 1.0, 2.0])
    residual = relative_residual(v, ex2_bracket(base.y))
    if not np.any(np.abs(v) > tol) or residual > tol:
        problems.append("bracket {} vs {} (residual {:.3e})".format(
            v.tolist(), ex2_bracket(base.y).tolist(), residual))
    off_mu = sorted({r.mu["chern-hv"] for r in off})
    detail = "on-slice mu = 2, off-slice mu in {}, bracket = {}".format(off_mu, np.round(v, 12).tolist())
    return not problems, "; ".join(problems) or detail


def _ex3_landsberg(orders, n_points, seed, tol):
    spec = resolve_metric("ex3")
    problems = []
    worst_g = 0.0
    worst_l = 0.0
    for point in sample_points(spec, n_points, seed):
        bundle = FinslerGeometry(spec, point, orders).bundle(("G", "L"))
        y1, y2, y3 = point.y
        worst_g = max(worst_g, relative_residual(bundle.G[0], 0.5 * (y1 * y1 - y2 * y3)))
        worst_l = max(worst_l, float(np.max(np.abs(bundle.L))) / max(bundle.scale("L"), ABS_FLOOR))
    if worst_g > tol:
        problems.append("G^1 relative error {:.3e}".format(worst_g))
    if worst_l > 1e-9:
        problems.append("max|L| / scale = {:.3e}".format(worst_l))

    gb = FinslerGeometry(spec, EX3_BERWALD_POINT, orders).bundle(("Gb",)).Gb[1, 1, 1, 1]
    if abs(gb - EX3_BERWALD_VALUE) > tol:
        problems.append("Gb^2_222 = {:.12g}".format(float(gb)))
    verdict = classify(spec, n_points, seed, orders=orders, progress=False).consensus
    if verdict != LANDSBERG:
        problems.append("classified {}".format(verdict))
    detail = "G^1 error {:.3e}, max|L|/scale {:.3e}, Gb^2_222 = {:.12g}, {}".format(worst_g, worst_l, float(gb), verdict)
    return not problems, "; ".join(problems) or detail


SUITE_METRICS = ("euclid3", "riem-hyperbolic", "ex1", "ex2", "ex3")


def _identity_suite(orders, n_points, seed, tol):
    failed = []
    for name in SUITE_METRICS:
        report = run_identity_suite(resolve_metric(name), n_points, seed, tol, orders, progress=False)
        failed.extend("{}:{}".format(name, f) for f in report.failures)
    if failed:
        return False, "failed: " + ", ".join(failed)
    return True, "{} metrics pass".format(len(SUITE_METRICS))


def _structural(orders, n_points, seed, tol):
    failed = []
    count = 0
    for name in SUITE_METRICS:
        spec = resolve_metric(name)
        for i, point in enumerate(sample_points(spec, n_points, seed)):
            record = analyze_point(spec, point, rel_tol=tol, orders=orders, index=i)
            count += 1
            if not record.in_domain:
                failed.append("{} {}: {}".format(name, point, record.error))
            failed.extend("{} {}: {}".format(name, point, f) for f in record.failures)
    return not failed, "; ".join(failed) or "{} point(s) consistent".format(count)


# key, title, tensors needed, runner
REPRODUCTION_ITEMS = (
    ("ex1-golden-curvature", "Example 1 Chern h-curvature closed forms", ("Rs",), _ex1_golden),
    ("ex1-nullity-kernel", "Example 1 nullity and kernel spaces", ("Rs",), _ex1_nullity),
    ("ex1-cartan-kernel", "Example 1 Cartan h-curvature kernel", ("Rc",), _ex1_cartan_kernel),
    ("ex2-connection", "Example 2 nonlinear connection", ("N",), _ex2_connection),
    ("ex2-hv-curvature", "Example 2 hv-curvature components", ("Ps",), _ex2_hv_curvature),
    ("ex2-hv-nullity", "Example 2 hv-nullity slice and bracket", ("Ps", "Rb"), _ex2_hv_nullity),
    ("ex3-landsberg", "Example 3 Landsberg but not Berwald", ("G", "Gb", "L"), _ex3_landsberg),
    ("identity-suite", "Identity suite on the built-in metrics", geometry.TENSOR_NAMES, _identity_suite),
    ("structural", "Nullity inclusions, index gap and ray invariance", geometry.TENSOR_NAMES, _structural),
)


def reproduce_examples(orders=None, n_points=20, seed=7, tol=IDENTITY_TOL, structural_points=3, progress=True):
    """Run the golden suite; failures become report entries."""
    items = []
    for key, title, tensors, runner in tqdm(REPRODUCTION_ITEMS, desc="reproduce", disable=not progress):
        item = ReproductionItem(key, title)
        try:
            if orders is not None:
                check_orders(orders, tensors)
            count = structural_points if key == "structural" else n_points
            item.passed, item.detail = runner(orders, count, seed, tol)
        except InsufficientOrdersError as e:
            item.detail = "insufficient orders: {}".format(e)
        except FinslerError as e:
            item.detail = "{}: {}".format(type(e).__name__, e)
        level = logger.info if item.passed else logger.error
        level("[%s] %s: %s", "pass" if item.passed else "FAIL", key, item.detail)
        items.append(item)
    return items
