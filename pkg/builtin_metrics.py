import os.path as osp
import re
from functools import lru_cache

from metric_dsl import load_metric, parse_metric
from utils.errors import MetricSyntaxError

here = osp.dirname(osp.abspath(__file__))
METRICS_DIR = osp.join(here, "metrics")

BUILTIN_FILES = {
    "ex1": "ex1.fin",
    "ex2": "ex2.fin",
    "ex3": "ex3.fin",
    "riem-hyperbolic": "riem-hyperbolic.fin",
    "ex-bad-homog": "ex-bad-homog.fin",
}

_EUCLID_RE = re.compile(r"^euclid([1-9][0-9]*)$")


def euclid_source(n):
    energy = " + ".join("y{}^2".format(i) for i in range(1, n + 1))
    return "name: euclid{0}\ndescription: flat metric on R^{0}\ndim = {0}\nE = {1}\n".format(n, energy)


def builtin_names():
    return sorted(BUILTIN_FILES) + ["euclid<n>"]


@lru_cache(maxsize=None)
def builtin_metric(name):
    m = _EUCLID_RE.match(name)
    if m:
        return parse_metric(euclid_source(int(m.group(1))), name=name)
    if name not in BUILTIN_FILES:
        raise MetricSyntaxError(
            "unknown metric {!r}: not a file and not one of {}".format(name, ", ".join(builtin_names()))
        )
    with open(osp.join(METRICS_DIR, BUILTIN_FILES[name]), encoding="utf-8") as f:
        return parse_metric(f.read(), name=name)


def resolve_metric(source):
    """A metric file path or a built-in name."""
    if osp.isfile(source):
        return load_metric(source)
    return builtin_metric(source)
