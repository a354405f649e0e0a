import numpy as np
import pytest
from numpy.testing import assert_allclose

from checks import ex1_cartan_kernel, ex2_bracket
from conftest import EX1_POINT, EX2_SLICE_POINT
from metric_dsl import PointState, parse_metric
from nullity import (
    ScanRecord,
    Subspace,
    analyze_point,
    bracket_vertical,
    conullity,
    grid_scan,
    kernel_space,
    lambda_residual,
    null_space,
    nullity_space,
    slot_system,
    structural_flags,
    subspace_equal,
    subspace_leq,
    summarize,
    vertical_in_hv_nullity,
)
from utils.errors import DomainError, InsufficientOrdersError

E = np.eye(4)


def span(*columns):
    return Subspace(np.linalg.qr(np.column_stack(columns))[0], 1e-8)


def test_null_space_of_a_single_equation():
    S = null_space([[1.0, 2.0, 0.0, 0.0]])
    assert S.rank == 3
    assert S.contains([2.0, -1.0, 0.0, 0.0])
    assert S.contains(E[2])
    assert not S.contains(E[0])
    assert_allclose(S.basis.T @ S.basis, np.eye(3), atol=1e-12)


def test_null_space_basis_is_canonical():
    # the SVD returns an arbitrary rotation of span{e3, e4}
    S = null_space([[1.0, 1.0, 0.0, 0.0], [1.0, -1.0, 0.0, 0.0]])
    assert_allclose(S.basis, E[:, 2:], atol=1e-12)
    S = null_space([[0.0, 0.0, 1.0, 1.0]])
    assert_allclose(S.basis[:, :2], E[:, :2], atol=1e-12)
    assert_allclose(S.basis[:, 2], [0.0, 0.0, 1 / np.sqrt(2), -1 / np.sqrt(2)], atol=1e-12)


def test_null_space_extremes():
    full = null_space(np.zeros((3, 4)))
    assert full.rank == 4
    assert_allclose(full.basis, E)
    trivial = null_space(np.eye(3))
    assert trivial.rank == 0
    assert trivial.basis.shape == (3, 0)
    assert trivial.residual == 0.0


def test_null_space_threshold_is_relative():
    A = np.diag([1.0, 1e-12, 0.5])
    S = null_space(A, rel_tol=1e-8)
    assert S.rank == 1
    assert S.contains([0.0, 1.0, 0.0])
    assert S.gap[0] == pytest.approx(0.5)
    assert S.gap[1] == pytest.approx(1e-12)
    # small but well separated systems keep their rank
    assert null_space(1e-9 * np.eye(2)).rank == 0
    # against an outside scale the same system is numerically zero
    assert null_space(1e-9 * np.eye(2), scale=1.0).rank == 2


@pytest.mark.parametrize(
    "A, rel_tol, error",
    [
        ([[np.nan, 1.0]], 1e-8, DomainError),
        ([[1.0, 0.0]], 0.0, ValueError),
        ([[1.0, 0.0]], 1.0, ValueError),
        (np.zeros((0, 3)), 1e-8, ValueError),
    ],
)
def test_null_space_rejects_bad_input(A, rel_tol, error):
    with pytest.raises(error):
        null_space(A, rel_tol)


def test_slot_system():
    T = np.arange(24.0).reshape(2, 3, 4)
    A = slot_system(T, 1)
    assert A.shape == (8, 3)
    w = np.array([1.0, -2.0, 1.0])
    assert_allclose(A @ w, np.einsum("ijk,j->ik", T, w).ravel())


def test_subspace_inclusion():
    e3 = span(E[2])
    e34 = span(E[2], E[3])
    assert subspace_leq(e3, e34)
    assert not subspace_leq(e34, e3)
    assert subspace_equal(e34, span(E[2] + E[3], E[2] - E[3]))
    assert subspace_leq(Subspace(np.zeros((4, 0)), 1e-8), e3)
    with pytest.raises(ValueError):
        subspace_leq(e3, span(np.eye(3)[0]))


def test_subspace_helpers():
    S = span(E[2], E[3])
    assert S.distance([1.0, 0.0, 5.0, 0.0]) == pytest.approx(1.0)
    assert S.contains(np.zeros(4))
    N = np.arange(16.0).reshape(4, 4)
    T = S.tangent_basis(N)
    assert T.shape == (8, 2)
    assert_allclose(T[4:], -N @ S.basis)
    d = S.to_dict()
    assert d["dim"] == 2
    assert d["n"] == 4
    assert len(d["basis"]) == 2


def test_ex1_chern_kernel_is_the_nullity(ex1_bundle):
    nul = nullity_space(ex1_bundle, "chern-h")
    ker = kernel_space(ex1_bundle, "chern-h")
    assert nul.rank == 2
    assert_allclose(nul.basis, E[:, 2:], atol=1e-8)
    assert ker.rank == 2
    assert_allclose(ker.basis, E[:, 2:], atol=1e-8)
    assert subspace_leq(nul, ker)
    assert subspace_equal(nul, nullity_space(ex1_bundle, "cartan-h"))


def test_ex1_first_curvature_row_alone_has_a_larger_kernel(ex1_bundle):
    y1, y2 = ex1_bundle.y[:2]
    direction = np.array([2 * y1 / y2, 1.0, 0.0, 0.0])
    scale = ex1_bundle.scale("Rs")
    first = np.einsum("ijk,i->jk", ex1_bundle.Rs[0], direction)
    assert np.max(np.abs(first)) <= 1e-10 * scale
    # the second row is killed by (y1/(2y2), 1, 0, 0) instead
    second = np.einsum("ijk,i->jk", ex1_bundle.Rs[1], [y1 / (2 * y2), 1.0, 0.0, 0.0])
    assert np.max(np.abs(second)) <= 1e-10 * scale
    assert not kernel_space(ex1_bundle, "chern-h").contains(direction)


def test_ex1_cartan_kernel_differs_from_chern_kernel(ex1_bundle):
    ker = kernel_space(ex1_bundle, "cartan-h")
    expected = span(*ex1_cartan_kernel(EX1_POINT.x, EX1_POINT.y).T)
    assert ker.rank == 2
    assert subspace_equal(ker, expected)
    # at x2 = 1, y = (1, 1, 1, 1)
    assert ker.contains([1.0, 1.0, 0.0, 6.0])
    assert ker.contains([0.0, 0.0, 1.0, -1.0])
    assert not subspace_equal(ker, kernel_space(ex1_bundle, "chern-h"))
    assert not ker.contains(E[2])


def test_conullity_is_g_orthogonal(ex1_bundle):
    nul = nullity_space(ex1_bundle, "chern-h")
    co = conullity(ex1_bundle, nul)
    assert co.rank == 2
    assert_allclose(nul.basis.T @ ex1_bundle.g @ co.basis, 0.0, atol=1e-10)


def test_conullity_in_flat_space(euclid3_bundle):
    co = conullity(euclid3_bundle, span(np.eye(3)[0]))
    assert_allclose(co.basis, np.eye(3)[:, 1:], atol=1e-12)
    # flat space: every direction is in the nullity
    assert nullity_space(euclid3_bundle, "chern-h").rank == 3


def test_unknown_tensor_kinds(ex1_bundle):
    with pytest.raises(ValueError):
        nullity_space(ex1_bundle, "ricci")
    with pytest.raises(ValueError):
        kernel_space(ex1_bundle, "chern-hv")


def test_ex2_hv_nullity_on_slice(ex2_slice_bundle):
    hv = nullity_space(ex2_slice_bundle, "chern-hv")
    assert hv.rank == 2
    assert_allclose(hv.basis[:, 0], [1.0, 0.0, 0.0], atol=1e-8)
    assert_allclose(hv.basis[:, 1], np.array([0.0, 1.0, 2.0]) / np.sqrt(5.0), atol=1e-8)
    assert lambda_residual(ex2_slice_bundle, hv) <= 1e-7


def test_ex2_bracket_leaves_the_distribution(ex2_slice_bundle):
    v = bracket_vertical(ex2_slice_bundle, [1.0, 0.0, 0.0], [0.0, 1.0, 2.0])
    y1, y2, _ = EX2_SLICE_POINT.y
    assert v[0] == pytest.approx(-0.5 * y1, rel=1e-8)
    assert v[1] == pytest.approx(0.5 * y2, rel=1e-8)
    assert_allclose(v, ex2_bracket(EX2_SLICE_POINT.y), rtol=1e-8)
    assert np.any(np.abs(v) > 1e-6)


def test_structural_flags_at_ex1(ex1_bundle):
    spaces = {
        "chern-h": nullity_space(ex1_bundle, "chern-h"),
        "chern-hv": nullity_space(ex1_bundle, "chern-hv"),
    }
    flags = structural_flags(ex1_bundle, spaces)
    assert flags["chern-h<=barthel"]
    assert flags["chern-h<=kernel"]
    assert flags["chern-h==cartan-h"]
    assert flags["mu!=n-1"]
    assert flags["hv-slot-symmetry"]
    assert flags["landsberg-characterization"]


def test_structural_flags_for_riemannian_metric(hyperbolic_bundle):
    spaces = {"chern-h": nullity_space(hyperbolic_bundle, "chern-h")}
    flags = structural_flags(hyperbolic_bundle, spaces)
    # constant curvature: no nullity, and the Barthel curvature R(y) does not vanish
    assert spaces["chern-h"].rank == 0
    assert flags["chern-h<=kernel"]
    assert "kernel==nullity" not in flags


def test_kernel_equals_nullity_when_barthel_vanishes(euclid3_bundle):
    spaces = {"chern-h": nullity_space(euclid3_bundle, "chern-h")}
    flags = structural_flags(euclid3_bundle, spaces)
    assert flags["kernel==nullity"]
    assert flags["image-rank"]


def test_vertical_direction_in_landsberg_hv_nullity(ex3_bundle):
    assert vertical_in_hv_nullity(ex3_bundle)


def test_analyze_point_with_ray_check(ex1):
    record = analyze_point(ex1, EX1_POINT, tensors=("chern-h", "barthel"))
    assert record.in_domain
    assert record.mu["chern-h"] == 2
    assert record.inclusions["ray:chern-h"]
    assert record.inclusions["ray:barthel"]
    assert record.failures == []
    assert "kernel(chern-h)" in record.subspaces
    d = record.to_dict()
    assert d["point"] == {"x": [0.0, 1.0, 0.0, 0.0], "y": [1.0, 1.0, 1.0, 1.0]}


def test_analyze_point_outside_domain(ex1):
    record = analyze_point(ex1, PointState((0.0, 1.0, 0.0, 0.0), (0.0, 1.0, 1.0, 1.0)), index=4)
    assert not record.in_domain
    assert record.index == 4
    assert "y1 != 0" in record.error
    assert record.mu == {}


def test_ray_check_leaving_the_domain_keeps_the_point():
    spec = parse_metric("dim = 2\nE = y1^2 + y2^2\ndomain: y1 < 1.5")
    record = analyze_point(spec, PointState((0.0, 0.0), (1.0, 1.0)), tensors=("chern-h",))
    assert record.in_domain
    assert record.mu["chern-h"] == 2
    assert record.inclusions["ray:chern-h"] is False
    assert record.failures == ["ray:chern-h"]
    assert record.error.startswith("ray check")
    assert "euler" in record.residuals


def test_summarize_transitions():
    point = PointState((0.0,), (1.0,))
    records = [
        ScanRecord(0, point, mu={"chern-hv": 1}),
        ScanRecord(1, point, in_domain=False),
        ScanRecord(2, point, mu={"chern-hv": 2}),
        ScanRecord(3, point, mu={"chern-hv": 2}),
    ]
    summary = summarize(records, ("chern-hv",))["chern-hv"]
    assert summary["values"] == [1, 2]
    assert summary["counts"] == {"1": 1, "2": 2}
    assert len(summary["transitions"]) == 1
    assert summary["transitions"][0]["from_index"] == 0
    assert summary["transitions"][0]["to_index"] == 2


def test_grid_scan_across_the_slice(ex2):
    scan = grid_scan(ex2, [("y3", 1.5, 2.5, 3)], EX2_SLICE_POINT, ("chern-hv",), ray_check=False, progress=False)
    assert [r.index for r in scan.records] == [0, 1, 2]
    assert [r.point.y[2] for r in scan.records] == [1.5, 2.0, 2.5]
    mu = [r.mu["chern-hv"] for r in scan.records]
    assert mu[1] == 2
    assert mu[0] != 2
    assert mu[2] != 2
    assert len(scan.summary["chern-hv"]["transitions"]) == 2
    assert scan.rejected == 0


def test_grid_scan_rejects_excluded_locus(ex2):
    base = PointState((1.0, 1.0, 1.0), (1.0, 1.0, 1.0))
    scan = grid_scan(ex2, [("y3", 3.0, 5.0, 3)], base, ("barthel",), ray_check=False, progress=False)
    # y3 = 4 y2 is excluded
    assert [r.point.y[2] for r in scan.records] == [3.0, 5.0]
    assert scan.rejected == 1
    with pytest.raises(DomainError):
        grid_scan(ex2, [("y3", 4.0, 4.0, 1)], base, ("barthel",), progress=False)
    with pytest.raises(DomainError):
        grid_scan(ex2, [("y3", 4.0000001, 4.0000001, 1)], base, ("barthel",), progress=False)


def test_grid_scan_argument_errors(ex2):
    with pytest.raises(ValueError):
        grid_scan(ex2, [("y3", 1.0, 2.0, 2)], EX2_SLICE_POINT, ("ricci",), progress=False)
    with pytest.raises(InsufficientOrdersError):
        grid_scan(ex2, [("y3", 1.0, 2.0, 2)], EX2_SLICE_POINT, orders=(2, 4), progress=False)
