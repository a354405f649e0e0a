"""Nullity and kernel subspaces of curvature tensors, and grid scans of them.

Subspaces live in the horizontal frame {h_i}: a basis column a stands for
sum_i a^i h_i.  All rank decisions are singular-value thresholds relative to
the larger of the system's own top singular value and the magnitude of the
tensors it was built from.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from geometry import TENSOR_NAMES, FinslerGeometry, check_orders
from identities import identity_residuals, is_negligible
from utils.config import CLASS_TOL, COND_MAX, RANK_TOL
from utils.errors import DegenerateMetricError, DomainError
from utils.logger import logger
from utils.sampling import grid_points

# tensor kind -> (bundle attribute, contracted axis)
NULLITY_SLOTS = {
    "chern-h": ("Rs", 2),
    "cartan-h": ("Rc", 2),
    "chern-hv": ("Ps", 2),
    "barthel": ("Rb", 1),
}
KERNEL_SLOTS = {
    "chern-h": ("Rs", 1),
    "cartan-h": ("Rc", 1),
}
TENSOR_KINDS = tuple(NULLITY_SLOTS)

BRACKET_SIGN = 1.0


@dataclass
class Subspace:
    basis: np.ndarray
    tol: float
    provenance: str = ""
    singular_values: Optional[np.ndarray] = None
    # (smallest kept, largest discarded) singular value, relative to the reference
    gap: Tuple[float, float] = (np.inf, 0.0)
    residual: float = 0.0

    @property
    def n(self):
        return self.basis.shape[0]

    @property
    def rank(self):
        return self.basis.shape[1]

    @property
    def projector(self):
        return self.basis @ self.basis.T

    def distance(self, v):
        """Norm of the component of ``v`` orthogonal to the subspace."""
        v = np.asarray(v, dtype=float)
        return float(np.linalg.norm(v - self.projector @ v))

    def contains(self, v, tol=RANK_TOL):
        v = np.asarray(v, dtype=float)
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            return True
        return self.distance(v) <= tol * norm

    def tangent_basis(self, N):
        """Columns (a, -N a): the same vectors as components on TTM."""
        N = np.asarray(N, dtype=float)
        return np.concatenate([self.basis, -N @ self.basis], axis=0)

    def to_dict(self):
        return {
            "provenance": self.provenance,
            "dim": int(self.rank),
            "n": int(self.n),
            "tol": self.tol,
            "basis": self.basis.T.tolist(),
            "singular_values": [] if self.singular_values is None else self.singular_values.tolist(),
            "gap": list(self.gap),
            "residual": self.residual,
        }


def _canonical_basis(B, pivot_tol=1e-10):
    """Orthonormal basis of span(B) in reduced echelon order.

    Makes the reported basis independent of the SVD's arbitrary rotation:
    span{e3, e4} comes out as exactly e3, e4.
    """
    n, r = B.shape
    if r == 0:
        return B
    M = B.T.copy()
    row = 0
    for col in range(n):
        if row == r:
            break
        p = row + int(np.argmax(np.abs(M[row:, col])))
        if abs(M[p, col]) <= pivot_tol:
            continue
        M[[row, p]] = M[[p, row]]
        M[row] /= M[row, col]
        for other in range(r):
            if other != row:
                M[other] -= M[other, col] * M[row]
        row += 1
    if row < r:
        # lost rank to the pivot threshold, keep the raw basis
        return B
    Q, R = np.linalg.qr(M.T)
    return Q * np.sign(np.where(np.diag(R) == 0, 1.0, np.diag(R)))


def null_space(A, rel_tol=RANK_TOL, scale=None, provenance=""):
    """Orthonormal basis of {v : A v = 0}.

    Singular values at or below ``rel_tol * max(sigma_max, scale)`` count as
    zero; when everything is zero the whole space is returned.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError("null_space needs a non-empty matrix, got shape {}".format(A.shape))
    if not 0.0 < rel_tol < 1.0:
        raise ValueError("rel_tol must lie in (0, 1), got {}".format(rel_tol))
    if not np.all(np.isfinite(A)):
        raise DomainError("Non-finite entries in the system for {}".format(provenance or "null_space"))

    n = A.shape[1]
    _, s, vh = np.linalg.svd(A, full_matrices=True)
    sigma_max = float(s[0]) if s.size else 0.0
    ref = max(sigma_max, scale or 0.0)
    if ref == 0.0:
        return Subspace(np.eye(n), rel_tol, provenance, s, (np.inf, 0.0), 0.0)

    threshold = rel_tol * ref
    rank = int(np.sum(s > threshold))
    basis = _canonical_basis(vh[rank:].T)
    kept = float(s[rank - 1]) / ref if rank > 0 else np.inf
    dropped = float(s[rank]) / ref if rank < s.size else 0.0
    residual = float(np.linalg.norm(A @ basis, 2)) if basis.shape[1] else 0.0
    if residual > 10 * threshold:
        logger.warning(
            "Null space of %s has residual %.3e above %.3e", provenance or "system", residual, 10 * threshold
        )
    logger.debug("%s: dim %d, gap %.3e / %.3e", provenance or "null_space", n - rank, kept, dropped)
    return Subspace(basis, rel_tol, provenance, s, (kept, dropped), residual)


def slot_system(T, axis):
    """Stack the linear maps w -> T(..., w at ``axis``, ...) into one matrix."""
    T = np.asarray(T, dtype=float)
    n = T.shape[axis]
    return np.moveaxis(T, axis, -1).reshape(-1, n)


def tensor_null_space(bundle, name, axis, rel_tol=RANK_TOL, label=None):
    bundle.require(name)
    provenance = "{} at {}".format(label or "{}[axis {}]".format(name, axis), bundle.point)
    return null_space(slot_system(getattr(bundle, name), axis), rel_tol, bundle.scale(name), provenance)


def nullity_space(bundle, tensor, rel_tol=RANK_TOL):
    if tensor not in NULLITY_SLOTS:
        raise ValueError("Unknown tensor kind {!r}, expected one of {}".format(tensor, ", ".join(NULLITY_SLOTS)))
    name, axis = NULLITY_SLOTS[tensor]
    return tensor_null_space(bundle, name, axis, rel_tol, "nullity({})".format(tensor))


def kernel_space(bundle, tensor, rel_tol=RANK_TOL):
    if tensor not in KERNEL_SLOTS:
        raise ValueError("Kernel is defined for {}, not {!r}".format(", ".join(KERNEL_SLOTS), tensor))
    name, axis = KERNEL_SLOTS[tensor]
    return tensor_null_space(bundle, name, axis, rel_tol, "kernel({})".format(tensor))


def subspace_leq(A, B, tol=RANK_TOL):
    """Whether span(A) is contained in span(B)."""
    if A.n != B.n:
        raise ValueError("Subspaces live in dimensions {} and {}".format(A.n, B.n))
    if A.rank == 0:
        return True
    if A.rank > B.rank:
        return False
    P = B.projector
    residual = np.linalg.norm(A.basis - P @ A.basis, axis=0)
    return bool(np.all(residual <= tol))


def subspace_equal(A, B, tol=RANK_TOL):
    return subspace_leq(A, B, tol) and subspace_leq(B, A, tol)


def conullity(bundle, S, rel_tol=RANK_TOL):
    """g-orthogonal complement of S."""
    bundle.require("g")
    provenance = "conullity({})".format(S.provenance)
    if S.rank == 0:
        return Subspace(np.eye(S.n), rel_tol, provenance)
    # each row is g(s, .) for a basis vector s
    return null_space(S.basis.T @ bundle.g, rel_tol, provenance=provenance)


def bracket_vertical(bundle, a, b):
    """Vertical part of [sum a^j h_j, sum b^k h_k] for constant a, b."""
    bundle.require("Rb")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return BRACKET_SIGN * np.einsum("mjk,j,k->m", bundle.Rb, a, b)


def lambda_residual(bundle, S):
    """Relative size of Lambda^a_hk W^h over the basis W of S."""
    bundle.require("Lambda", "Ps")
    if S.rank == 0:
        return 0.0
    value = np.einsum("ahk,hr->akr", bundle.Lambda, S.basis)
    ref = max(bundle.scale("Lambda"), bundle.scale("Ps") * float(np.linalg.norm(bundle.y)))
    return float(np.max(np.abs(value))) / ref if ref > 0 else 0.0


def vertical_in_hv_nullity(bundle, tol=CLASS_TOL):
    """Whether y itself solves the stacked hv-curvature system."""
    bundle.require("Ps")
    A = slot_system(bundle.Ps, 2)
    y = bundle.y
    sigma = float(np.linalg.norm(A, 2)) if A.size else 0.0
    ref = max(sigma, bundle.scale("Ps")) * float(np.linalg.norm(y))
    if ref == 0.0:
        return True
    return float(np.linalg.norm(A @ y)) <= tol * ref


@dataclass
class ScanRecord:
    index: int
    point: object
    in_domain: bool = True
    mu: Dict[str, int] = field(default_factory=dict)
    subspaces: Dict[str, Subspace] = field(default_factory=dict)
    inclusions: Dict[str, bool] = field(default_factory=dict)
    residuals: Dict[str, float] = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def failures(self):
        return sorted(name for name, ok in self.inclusions.items() if not ok)

    def to_dict(self):
        return {
            "index": self.index,
            "point": {"x": list(self.point.x), "y": list(self.point.y)},
            "in_domain": self.in_domain,
            "mu": dict(self.mu),
            "subspaces": {name: s.to_dict() for name, s in self.subspaces.items()},
            "inclusions": dict(self.inclusions),
            "residuals": dict(self.residuals),
            "error": self.error,
        }


@dataclass
class ScanReport:
    metric: str
    tensors: Tuple[str, ...]
    records: List[ScanRecord]
    rejected: int = 0
    skipped: int = 0
    summary: Dict[str, dict] = field(default_factory=dict)

    @property
    def failures(self):
        return [(r.index, name) for r in self.records for name in r.failures]


def structural_flags(bundle, spaces, rel_tol=RANK_TOL, class_tol=CLASS_TOL):
    """Inclusion and index checks that hold at every point of every metric."""
    flags = {}
    n = bundle.n
    if "chern-h" in spaces:
        nul = spaces["chern-h"]
        flags["chern-h<=barthel"] = subspace_leq(nul, nullity_space(bundle, "barthel", rel_tol))
        kernel = spaces.get("kernel(chern-h)") or kernel_space(bundle, "chern-h", rel_tol)
        flags["chern-h<=kernel"] = subspace_leq(nul, kernel)
        flags["chern-h==cartan-h"] = subspace_equal(nul, spaces.get("cartan-h") or nullity_space(bundle, "cartan-h", rel_tol))
        flags["mu!=n-1"] = nul.rank != n - 1 or n == 1
        if is_negligible(bundle, "Rb", class_tol):
            flags["kernel==nullity"] = subspace_equal(nul, kernel)
            # rank of the image of Rs as a map into the h-frame
            left = null_space(slot_system(bundle.Rs, 0), rel_tol, bundle.scale("Rs"), "image(chern-h)")
            flags["image-rank"] = n - left.rank == n - nul.rank
    if "chern-hv" in spaces:
        hv = spaces["chern-hv"]
        slot_h = tensor_null_space(bundle, "Ps", 1, rel_tol, "hv slot h")
        flags["hv-slot-symmetry"] = subspace_equal(hv, slot_h)
        flags["lambda-annihilates"] = lambda_residual(bundle, hv) <= 10 * rel_tol
        landsberg = is_negligible(bundle, "L", class_tol)
        flags["landsberg-characterization"] = vertical_in_hv_nullity(bundle, class_tol) == landsberg
    return flags


def analyze_point(spec, point, tensors=TENSOR_KINDS, rel_tol=RANK_TOL, orders=None,
                  ray_check=True, cond_max=COND_MAX, index=0):
    """Full nullity analysis at one point as a ScanRecord."""
    record = ScanRecord(index=index, point=point)
    try:
        bundle = FinslerGeometry(spec, point, orders, cond_max).bundle()
        for tensor in tensors:
            S = nullity_space(bundle, tensor, rel_tol)
            record.subspaces[tensor] = S
            record.mu[tensor] = S.rank
        if "chern-h" in tensors:
            record.subspaces["kernel(chern-h)"] = kernel_space(bundle, "chern-h", rel_tol)
        record.inclusions.update(structural_flags(bundle, record.subspaces, rel_tol))

        record.residuals = {k: v for k, v in identity_residuals(bundle).items() if v is not None}
    except (DomainError, DegenerateMetricError) as e:
        record.in_domain = False
        record.error = str(e)
        logger.warning("Point %s: %s", point, e)
        return record

    if ray_check:
        try:
            scaled = FinslerGeometry(spec, point.scaled(2.0), orders, cond_max).bundle()
        except (DomainError, DegenerateMetricError) as e:
            logger.warning("Ray check at %s: %s", point, e)
            record.error = "ray check: {}".format(e)
            for tensor in tensors:
                record.inclusions["ray:" + tensor] = False
        else:
            for tensor in tensors:
                record.inclusions["ray:" + tensor] = subspace_equal(
                    record.subspaces[tensor], nullity_space(scaled, tensor, rel_tol)
                )
    return record


def _scan_worker(args):
    return analyze_point(*args)


def summarize(records, tensors):
    """Distinct indices per tensor and where consecutive records change index."""
    summary = {}
    valid = [r for r in records if r.in_domain]
    for tensor in tensors:
        counts = {}
        transitions = []
        previous = None
        for record in valid:
            mu = record.mu[tensor]
            counts[mu] = counts.get(mu, 0) + 1
            if previous is not None and previous.mu[tensor] != mu:
                transitions.append(
                    {
                        "from_index": previous.index,
                        "to_index": record.index,
                        "from_point": str(previous.point),
                        "to_point": str(record.point),
                        "from_mu": previous.mu[tensor],
                        "to_mu": mu,
                    }
                )
            previous = record
        summary[tensor] = {
            "values": sorted(counts),
            "counts": {str(k): counts[k] for k in sorted(counts)},
            "transitions": transitions,
        }
    return summary


def grid_scan(spec, axes, base, tensors=TENSOR_KINDS, rel_tol=RANK_TOL, orders=None,
              workers=1, ray_check=True, cond_max=COND_MAX, progress=True):
    """Nullity analysis over a grid, in grid order.

    ``axes`` is the parsed grid ([(axis, lo, hi, count), ...]); coordinates
    not on an axis are taken from ``base``.
    """
    for tensor in tensors:
        if tensor not in NULLITY_SLOTS:
            raise ValueError("Unknown tensor kind {!r}".format(tensor))
    if orders is not None:
        # fail before spawning anything
        check_orders(orders, TENSOR_NAMES)

    points, rejected, skipped = grid_points(spec, axes, base)
    if not points:
        raise DomainError(
            "No admissible grid points ({} rejected by the domain, {} near an excluded locus)".format(
                rejected, skipped
            )
        )
    logger.info("Scanning %d point(s) of %s (%d rejected, %d skipped)", len(points), spec.name, rejected, skipped)

    jobs = [(spec, p, tuple(tensors), rel_tol, orders, ray_check, cond_max, i) for i, p in enumerate(points)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            # map() yields in submission order
            records = list(tqdm(executor.map(_scan_worker, jobs), total=len(jobs), disable=not progress))
    else:
        records = [_scan_worker(job) for job in tqdm(jobs, disable=not progress)]

    report = ScanReport(spec.name, tuple(tensors), records, rejected, skipped)
    report.summary = summarize(records, tensors)
    for tensor in tensors:
        logger.info("mu(%s) values: %s", tensor, report.summary[tensor]["values"])
    if report.failures:
        logger.warning("%d structural check(s) failed during the scan", len(report.failures))
    return report


__all__ = [
    "BRACKET_SIGN",
    "KERNEL_SLOTS",
    "NULLITY_SLOTS",
    "ScanRecord",
    "ScanReport",
    "Subspace",
    "analyze_point",
    "bracket_vertical",
    "conullity",
    "grid_scan",
    "kernel_space",
    "null_space",
    "nullity_space",
    "subspace_equal",
    "subspace_leq",
]
