import os

DEFAULT_ORDERS = (2, 6)

IDENTITY_TOL = 1e-8
RANK_TOL = 1e-8
CLASS_TOL = 1e-6
COND_MAX = 1e12

# constraint expressions closer to zero than this are treated as on the excluded locus
CONSTRAINT_MARGIN = 1e-6

HOMOGENEITY_SCALES = (0.5, 2.0, 3.0)
MAX_SAMPLING_ATTEMPTS = 10000
DEFAULT_BOX = (0.5, 2.0)


def parse_orders(text):
    """Parse "Dx,Dy" into a pair of non-negative integers."""
    try:
        orders = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ValueError("Cannot parse jet orders from {!r}, expected Dx,Dy".format(text))
    if len(orders) != 2 or min(orders) < 0:
        raise ValueError("Cannot parse jet orders from {!r}, expected Dx,Dy".format(text))
    return orders


def get_default_orders():
    text = os.environ.get("FINSLER_DEFAULT_ORDERS")
    if text:
        return parse_orders(text)
    return DEFAULT_ORDERS
