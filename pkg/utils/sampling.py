import itertools
import re

import numpy as np

from metric_dsl import PointState
from utils.config import CONSTRAINT_MARGIN, DEFAULT_BOX, MAX_SAMPLING_ATTEMPTS
from utils.errors import DomainError
from utils.logger import logger

_POINT_RE = re.compile(r"^\s*x\s*=\s*([^;]*);\s*y\s*=\s*([^;]*)\s*$")
_AXIS_RE = re.compile(r"^([xy])([0-9]+)$")


def parse_point(text):
    """Parse "x=0,1,0,0;y=1,1,1,1" into a PointState."""
    m = _POINT_RE.match(text)
    if m is None:
        raise ValueError("Cannot parse point {!r}, expected 'x=...;y=...'".format(text))
    try:
        x = [float(v) for v in m.group(1).split(",")]
        y = [float(v) for v in m.group(2).split(",")]
    except ValueError:
        raise ValueError("Cannot parse point {!r}, coordinates must be numbers".format(text))
    if len(x) != len(y):
        raise ValueError("Point {!r} has {} x- and {} y-coordinates".format(text, len(x), len(y)))
    return PointState(tuple(x), tuple(y))


def parse_grid(text):
    """Parse "y3=1.5:2.5:5,x1=0:1:3" into [(axis, lo, hi, count), ...]."""
    axes = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            axis, rng = part.split("=")
            lo, hi, count = rng.split(":")
            axis = axis.strip()
            lo, hi, count = float(lo), float(hi), int(count)
        except ValueError:
            raise ValueError("Cannot parse grid axis {!r}, expected <axis>=<lo>:<hi>:<count>".format(part))
        if _AXIS_RE.match(axis) is None:
            raise ValueError("Unknown grid axis {!r}, expected x<i> or y<i>".format(axis))
        if count < 1:
            raise ValueError("Grid axis {} needs a positive count".format(axis))
        axes.append((axis, lo, hi, count))
    if not axes:
        raise ValueError("Empty grid specification {!r}".format(text))
    return axes


def is_admissible(spec, point, margin=CONSTRAINT_MARGIN):
    return any(point.y) and not spec.violations(point, margin)


def sample_points(spec, count, seed, max_attempts=MAX_SAMPLING_ATTEMPTS):
    """Draw ``count`` in-domain points uniformly from the metric's sampling boxes."""
    rng = np.random.default_rng(seed)
    n = spec.dim
    lo = np.empty(2 * n)
    hi = np.empty(2 * n)
    for k in range(2 * n):
        group, index = "xy"[k // n], k % n + 1
        lo[k], hi[k] = spec.box(group, index, DEFAULT_BOX)

    points = []
    attempts = 0
    while len(points) < count:
        if attempts >= max_attempts:
            raise DomainError(
                "Found only {} of {} in-domain points after {} attempts".format(
                    len(points), count, attempts
                )
            )
        attempts += 1
        v = rng.uniform(lo, hi)
        point = PointState(tuple(v[:n]), tuple(v[n:]))
        if is_admissible(spec, point):
            points.append(point)
    logger.debug("Sampled %d point(s) in %d attempt(s)", count, attempts)
    return points


def grid_points(spec, axes, base):
    """Grid over ``axes`` with other coordinates taken from ``base``.

    Returns (admissible points in grid order, number rejected, number skipped
    for lying within the constraint margin).
    """
    n = spec.dim
    if base.dim != n:
        raise DomainError("Base point has dimension {}, metric has {}".format(base.dim, n))
    slots = []
    for axis, lo, hi, count in axes:
        group, index = _AXIS_RE.match(axis).groups()
        index = int(index)
        if not 1 <= index <= n:
            raise ValueError("Grid axis {} out of range for dim = {}".format(axis, n))
        slots.append(((0 if group == "x" else n) + index - 1, np.linspace(lo, hi, count)))

    points = []
    rejected = 0
    skipped = 0
    for values in itertools.product(*(v for _, v in slots)):
        coords = list(base.x) + list(base.y)
        for (k, _), value in zip(slots, values):
            coords[k] = float(value)
        point = PointState(tuple(coords[:n]), tuple(coords[n:]))
        if not any(point.y) or spec.violations(point):
            rejected += 1
        elif spec.violations(point, CONSTRAINT_MARGIN):
            skipped += 1
        else:
            points.append(point)
    if skipped:
        logger.warning("Skipped %d grid point(s) within %g of an excluded locus", skipped, CONSTRAINT_MARGIN)
    return points, rejected, skipped
