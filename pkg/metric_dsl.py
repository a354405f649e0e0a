"""Finsler function definitions in a small line-oriented text format.

    # comments start with '#'
    dim = 3
    E = sqrt(exp(-x1*x2)*y1^2*y3^2*exp(-y3/y2))
    domain: y3 != 4*y2
    sample: y = 0.5:2
    name: ex2

Exactly one of ``F = <expr>`` (Finsler norm) or ``E = <expr>`` (energy) is
required.  Expressions use x1..xn, y1..yn, numbers, + - * / ^ and the
functions exp, log, sqrt, atan, sin, cos.  Multiplication is always
explicit.

Grammar (whitespace insensitive):

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := ('-' | '+') unary | power
    power := atom ('^' unary)?
    atom  := NUMBER | VARIABLE | FUNCTION '(' expr ')' | '(' expr ')'
"""
import dataclasses
import math
import os.path as osp
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Tuple, Union

import numpy as np

import jets
from utils.config import CONSTRAINT_MARGIN, HOMOGENEITY_SCALES
from utils.errors import DomainError, MetricSyntaxError
from utils.logger import logger

FUNCTIONS = {
    "exp": jets.exp,
    "log": jets.log,
    "sqrt": jets.sqrt,
    "atan": jets.atan,
    "sin": jets.sin,
    "cos": jets.cos,
}

RELATIONS = (">=", "<=", "!=", ">", "<")


# expression tree


@dataclass(frozen=True)
class Const:
    value: float

    def __str__(self):
        return repr(float(self.value))

    def evaluate(self, env):
        return self.value


@dataclass(frozen=True)
class Var:
    group: str
    index: int

    def __str__(self):
        return "{}{}".format(self.group, self.index)

    def evaluate(self, env):
        return env[self.group][self.index - 1]


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"

    def __str__(self):
        return "({}{})".format(self.op, self.operand)

    def evaluate(self, env):
        return -self.operand.evaluate(env)


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"

    def __str__(self):
        return "({} {} {})".format(self.left, self.op, self.right)

    def evaluate(self, env):
        a = self.left.evaluate(env)
        b = self.right.evaluate(env)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            if not isinstance(b, jets.Jet) and b == 0:
                raise DomainError("Division by zero in {}".format(self))
            return a / b
        return jets.power(a, b)


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"

    def __str__(self):
        return "{}({})".format(self.func, self.arg)

    def evaluate(self, env):
        return FUNCTIONS[self.func](self.arg.evaluate(env))


Expr = Union[Const, Var, Unary, Binary, Call]


def pretty(expr):
    """Fully parenthesised text that parses back to the same tree."""
    return str(expr)


def constant_value(expr):
    """Value of a variable-free expression, or None."""
    try:
        value = expr.evaluate({"x": (), "y": ()})
    except (IndexError, DomainError, OverflowError):
        return None
    return float(value)


# tokenizer


class Token:
    number = "number"
    identifier = "identifier"
    operator = "operator"
    left_paren = "("
    right_paren = ")"
    eof = "eof"

    def __init__(self, typ, text, column):
        self.typ = typ
        self.text = text
        self.column = column

    def __repr__(self):
        return "({}, {!r})".format(self.typ, self.text)


_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<identifier>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<operator>[-+*/^])"
    r"|(?P<paren>[()])"
    r")"
)


def tokenize(text, line=None, offset=0):
    tokens = []
    pos = 0
    stripped = text.rstrip()
    while pos < len(stripped):
        m = _TOKEN_RE.match(stripped, pos)
        if m is None:
            while stripped[pos].isspace():
                pos += 1
            raise MetricSyntaxError(
                "unexpected character {!r}".format(stripped[pos]), line, offset + pos + 1
            )
        column = offset + m.start(m.lastgroup) + 1
        if m.lastgroup == "paren":
            tokens.append(Token(m.group("paren"), m.group("paren"), column))
        else:
            tokens.append(Token(m.lastgroup, m.group(m.lastgroup), column))
        pos = m.end()
    tokens.append(Token(Token.eof, "", offset + len(stripped) + 1))
    return tokens


# parser


class Parser:
    """Recursive descent over the tokens of a single expression."""

    def __init__(self, tokens, line=None):
        self.tokens = tokens
        self.pos = 0
        self.line = line
        self.variables = []

    def error(self, message, token=None):
        token = token or self.peek()
        return MetricSyntaxError(message, self.line, token.column)

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def parse(self):
        expr = self.expr()
        if self.peek().typ != Token.eof:
            raise self.error("unexpected {!r}".format(self.peek().text))
        return expr

    def expr(self):
        node = self.term()
        while self.peek().typ == Token.operator and self.peek().text in "+-":
            op = self.advance().text
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek().typ == Token.operator and self.peek().text in "*/":
            op = self.advance().text
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        token = self.peek()
        if token.typ == Token.operator and token.text in "+-":
            self.advance()
            operand = self.unary()
            return Unary("-", operand) if token.text == "-" else operand
        return self.power()

    def power(self):
        node = self.atom()
        if self.peek().typ == Token.operator and self.peek().text == "^":
            self.advance()
            node = Binary("^", node, self.unary())
        return node

    def atom(self):
        token = self.advance()
        if token.typ == Token.number:
            value = float(token.text)
            if not math.isfinite(value):
                raise self.error("number {!r} is not finite".format(token.text), token)
            return Const(value)
        if token.typ == Token.identifier:
            return self.identifier(token)
        if token.typ == Token.left_paren:
            node = self.expr()
            self.expect_right_paren()
            return node
        if token.typ == Token.eof:
            previous = self.tokens[self.pos - 2] if self.pos >= 2 else None
            if previous is not None and previous.typ == Token.operator:
                raise self.error("dangling operator {!r}".format(previous.text), previous)
            raise self.error("unexpected end of expression", token)
        raise self.error("unexpected {!r}".format(token.text), token)

    def identifier(self, token):
        name = token.text
        m = re.fullmatch(r"([xy])([0-9]+)", name)
        if m:
            var = Var(m.group(1), int(m.group(2)))
            self.variables.append((var, token.column))
            return var
        if name in FUNCTIONS:
            if self.peek().typ != Token.left_paren:
                raise self.error("expected '(' after {}".format(name))
            self.advance()
            arg = self.expr()
            self.expect_right_paren()
            return Call(name, arg)
        raise self.error("unknown identifier {!r}".format(name), token)

    def expect_right_paren(self):
        if self.peek().typ != Token.right_paren:
            raise self.error("expected ')'")
        self.advance()


def parse_expression(text, line=None, offset=0):
    """Parse one expression; returns (expr, [(Var, column), ...])."""
    parser = Parser(tokenize(text, line, offset), line)
    return parser.parse(), parser.variables


# metric specification


@dataclass(frozen=True)
class Constraint:
    lhs: Expr
    op: str
    rhs: Expr
    text: str = ""

    def gap(self, env):
        """Signed distance lhs - rhs at the point."""
        return float(self.lhs.evaluate(env) - self.rhs.evaluate(env))

    def holds(self, env, margin=0.0):
        """Whether the constraint holds; within ``margin`` of equality counts as failing."""
        d = self.gap(env)
        if margin and abs(d) < margin:
            return False
        if self.op == ">":
            return d > 0
        if self.op == ">=":
            return d >= 0
        if self.op == "<":
            return d < 0
        if self.op == "<=":
            return d <= 0
        return d != 0

    def __str__(self):
        return self.text or "{} {} {}".format(self.lhs, self.op, self.rhs)


@dataclass(frozen=True)
class PointState:
    x: Tuple[float, ...]
    y: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))
        if len(self.x) != len(self.y):
            raise ValueError("x and y must have the same length")

    @property
    def dim(self):
        return len(self.x)

    def env(self):
        return {"x": self.x, "y": self.y}

    def scaled(self, lam):
        return PointState(self.x, tuple(lam * v for v in self.y))

    def __str__(self):
        return "x={};y={}".format(
            ",".join("{:g}".format(v) for v in self.x),
            ",".join("{:g}".format(v) for v in self.y),
        )


@dataclass(frozen=True)
class MetricSpec:
    dim: int
    expr: Expr
    kind: str = "E"
    constraints: Tuple[Constraint, ...] = ()
    name: str = ""
    description: str = ""
    boxes: Tuple[Tuple[str, float, float], ...] = ()
    source: str = field(default="", compare=False)

    @cached_property
    def energy(self):
        """The energy E as an expression; F^2 when the norm F is given."""
        if self.kind == "E":
            return self.expr
        if isinstance(self.expr, Binary) and self.expr.op == "^":
            r = constant_value(self.expr.right)
            if r is not None:
                return Binary("^", self.expr.left, Const(2.0 * r))
        return Binary("^", self.expr, Const(2.0))

    def box(self, group, index, default):
        """Sampling interval of one coordinate: specific entry, group entry, default."""
        found = default
        for axis, lo, hi in self.boxes:
            if axis == group:
                found = (lo, hi)
        for axis, lo, hi in self.boxes:
            if axis == "{}{}".format(group, index):
                found = (lo, hi)
        return found

    def violations(self, point, margin=0.0):
        env = point.env()
        failed = []
        for c in self.constraints:
            try:
                ok = c.holds(env, margin)
            except DomainError:
                ok = False
            if not ok:
                failed.append(c)
        return failed

    def check_point(self, point):
        if point.dim != self.dim:
            raise DomainError(
                "Point has dimension {}, metric {} has dimension {}".format(
                    point.dim, self.name or "<metric>", self.dim
                )
            )
        if not any(point.y):
            raise DomainError("y must be non-zero")
        failed = self.violations(point)
        if failed:
            raise DomainError(
                "Point {} violates domain constraint(s): {}".format(
                    point, ", ".join(str(c) for c in failed)
                )
            )
        if self.kind == "F":
            # E = b^(2r) alone would accept a negative F = b^r
            value = float(_evaluate(self.expr, point.env()))
            if not value > 0.0:
                raise DomainError("F = {:.6g} is not positive at {}".format(value, point))


_DIRECTIVE_RE = re.compile(r"^\s*(dim|F|E)\s*=(.*)$")
_META_RE = re.compile(r"^\s*(domain|name|description|sample)\s*:(.*)$")
_SAMPLE_RE = re.compile(
    r"^\s*([xy][0-9]*)\s*=\s*([-+0-9.eE]+)\s*:\s*([-+0-9.eE]+)\s*$"
)


def _split_relation(text):
    depth = 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif depth == 0:
            for op in RELATIONS:
                if text.startswith(op, i):
                    return text[:i], op, text[i + len(op):], i
    return None


def parse_metric(text, name=None):
    """Parse metric source text into a validated MetricSpec."""
    dim = None
    dim_line = None
    definition = None
    constraints = []
    boxes = []
    meta = {"name": name or "", "description": ""}
    variables = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = _DIRECTIVE_RE.match(line)
        if m:
            key, value = m.group(1), m.group(2)
            offset = m.start(2)
            if key == "dim":
                if dim is not None:
                    raise MetricSyntaxError("duplicate dim declaration", lineno, 1)
                try:
                    dim = int(value.strip())
                except ValueError:
                    raise MetricSyntaxError(
                        "dim must be an integer, got {!r}".format(value.strip()), lineno, offset + 1
                    )
                if dim < 1:
                    raise MetricSyntaxError("dim must be positive", lineno, offset + 1)
                dim_line = lineno
                continue
            if definition is not None:
                raise MetricSyntaxError(
                    "metric already defined by {} on line {}".format(definition[0], definition[2]),
                    lineno,
                    1,
                )
            expr, found = parse_expression(value, lineno, offset)
            variables.extend((var, lineno, col) for var, col in found)
            definition = (key, expr, lineno)
            continue
        m = _META_RE.match(line)
        if m is None:
            raise MetricSyntaxError(
                "expected 'dim =', 'F =', 'E =', 'domain:', 'sample:', 'name:' or 'description:'",
                lineno,
                len(line) - len(line.lstrip()) + 1,
            )
        key, value = m.group(1), m.group(2)
        offset = m.start(2)
        if key == "name":
            # an explicit name (built-in registry) wins over the file's own
            if not name:
                meta["name"] = value.strip()
        elif key == "description":
            meta["description"] = value.strip()
        elif key == "sample":
            s = _SAMPLE_RE.match(value)
            if s is None:
                raise MetricSyntaxError(
                    "expected 'sample: <axis> = <lo>:<hi>'", lineno, offset + 1
                )
            lo, hi = float(s.group(2)), float(s.group(3))
            if not lo < hi:
                raise MetricSyntaxError("empty sampling interval", lineno, offset + 1)
            boxes.append((s.group(1), lo, hi))
        else:
            split = _split_relation(value)
            if split is None:
                raise MetricSyntaxError(
                    "domain constraint needs one of {}".format(" ".join(RELATIONS)),
                    lineno,
                    offset + 1,
                )
            lhs_text, op, rhs_text, at = split
            lhs, found_l = parse_expression(lhs_text, lineno, offset)
            rhs, found_r = parse_expression(rhs_text, lineno, offset + at + len(op))
            variables.extend((var, lineno, col) for var, col in found_l + found_r)
            constraints.append(Constraint(lhs, op, rhs, " ".join(value.split())))

    if dim is None:
        raise MetricSyntaxError("missing 'dim = <n>' declaration")
    if definition is None:
        raise MetricSyntaxError("missing 'F = <expr>' or 'E = <expr>' definition")
    for var, lineno, col in variables:
        if not 1 <= var.index <= dim:
            raise MetricSyntaxError(
                "variable {} out of range for dim = {} (line {})".format(var, dim, dim_line),
                lineno,
                col,
            )
    for axis, _, _ in boxes:
        if len(axis) > 1 and not 1 <= int(axis[1:]) <= dim:
            raise MetricSyntaxError("sampling axis {} out of range for dim = {}".format(axis, dim))

    kind, expr, _ = definition
    spec = MetricSpec(
        dim=dim,
        expr=expr,
        kind=kind,
        constraints=tuple(constraints),
        name=meta["name"],
        description=meta["description"],
        boxes=tuple(boxes),
        source=text,
    )
    logger.debug(
        "Parsed metric %s: dim=%d, %s = %s, %d constraint(s)",
        spec.name or "<unnamed>",
        dim,
        kind,
        pretty(expr),
        len(constraints),
    )
    return spec


def load_metric(path):
    with open(path, encoding="utf-8") as f:
        text = f.read()
    spec = parse_metric(text)
    if not spec.name:
        spec = dataclasses.replace(spec, name=osp.splitext(osp.basename(path))[0])
    return spec


# evaluation


def _evaluate(expr, env):
    try:
        value = expr.evaluate(env)
    except OverflowError:
        raise DomainError("Overflow while evaluating {}".format(pretty(expr)))
    except ZeroDivisionError:
        raise DomainError("Division by zero while evaluating {}".format(pretty(expr)))
    return value


def _energy_unchecked(spec, point):
    value = _evaluate(spec.energy, point.env())
    if isinstance(value, jets.Jet):
        value = value.value
    value = float(value)
    if not math.isfinite(value):
        raise DomainError("Non-finite energy at {}".format(point))
    return value


def eval_scalar(spec, point):
    """Energy E at an in-domain point."""
    spec.check_point(point)
    return _energy_unchecked(spec, point)


def eval_norm(spec, point):
    return math.sqrt(eval_scalar(spec, point))


def eval_jet(spec, point, orders):
    """Taylor jet of E at ``point`` truncated at (Dx, Dy)."""
    spec.check_point(point)
    n = spec.dim
    basis = jets.get_basis(n, orders)

    def variable(index, value):
        group = (index - 1) // n
        if orders[group] == 0:
            return jets.Jet.constant(basis, value)
        return jets.jet_variable(n, index, value, orders)

    env = {
        "x": tuple(variable(i + 1, v) for i, v in enumerate(point.x)),
        "y": tuple(variable(n + i + 1, v) for i, v in enumerate(point.y)),
    }
    value = _evaluate(spec.energy, env)
    if not isinstance(value, jets.Jet):
        value = jets.Jet.constant(basis, value)
    if not np.all(np.isfinite(value.coeffs)):
        raise DomainError("Non-finite Taylor coefficients of E at {}".format(point))
    return value


@dataclass
class HomogeneityReport:
    samples: int
    tol: float
    max_residual: float = 0.0
    violations: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.violations


def check_homogeneity(spec, sample_count, seed, tol, scales=HOMOGENEITY_SCALES, points=None):
    """Check E(x, t y) = t^2 E(x, y) and E > 0 at sampled in-domain points."""
    from utils.sampling import sample_points

    if sample_count < 1:
        raise ValueError("sample_count must be at least 1")
    if points is None:
        points = sample_points(spec, sample_count, seed)
    report = HomogeneityReport(samples=len(points), tol=tol)
    for point in points:
        e = _energy_unchecked(spec, point)
        if not e > 0:
            report.violations.append((str(point), None, "E = {!r} is not positive".format(e)))
            continue
        for lam in scales:
            scaled = point.scaled(lam)
            if spec.violations(scaled, CONSTRAINT_MARGIN):
                continue
            expected = lam * lam * e
            try:
                got = _energy_unchecked(spec, scaled)
            except DomainError as exc:
                report.violations.append((str(point), lam, str(exc)))
                continue
            residual = abs(got - expected) / abs(expected)
            report.max_residual = max(report.max_residual, residual)
            if residual > tol:
                report.violations.append(
                    (str(point), lam, "relative residual {:.3e}".format(residual))
                )
    if report.violations:
        logger.warning(
            "Homogeneity check failed for %s at %d of %d sample(s)",
            spec.name or "<metric>",
            len({v[0] for v in report.violations}),
            len(points),
        )
    return report
