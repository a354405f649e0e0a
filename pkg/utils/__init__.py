# flake8: noqa

from ._io import format_float
from ._io import to_json
from ._io import write_csv
from ._io import write_json

from .config import get_default_orders
from .config import parse_orders

from .errors import DegenerateMetricError
from .errors import DomainError
from .errors import FinslerError
from .errors import InsufficientOrdersError
from .errors import MetricSyntaxError

from .logger import logger
from .logger import set_verbosity
