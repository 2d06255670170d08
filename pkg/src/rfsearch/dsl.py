"""Reward-program expression language.

A program is a sequence of named components::

    component near = exp(-4.0 * dist);
    component goal = 2.0 * indicator(dist < 0.05);

The total reward is the sum of the components. Evaluation is total:
division by zero and overflow produce a large finite sentinel instead of
trapping, so degenerate candidates never crash a training run.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import DslSyntaxError, MissingBinding, UnknownVariable

UNARY_FUNCS = ("abs", "exp", "tanh")
BINARY_FUNCS = ("min", "max")
KEYWORDS = ("component", "indicator", "norm") + UNARY_FUNCS + BINARY_FUNCS

DEFAULT_SENTINEL = 1e6


# --- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # neg | abs | exp | tanh
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # add | sub | mul | div | min | max
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Gate:
    """indicator(left < right) or indicator(left > right), yielding 0/1."""

    op: str  # lt | gt
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Norm:
    """Euclidean norm over a list of observation variables."""

    names: tuple[str, ...]


Expr = Const | Var | Unary | Binary | Gate | Norm


@dataclass(frozen=True)
class RewardExpr:
    components: tuple[tuple[str, Expr], ...]

    def variables(self) -> set[str]:
        out: set[str] = set()
        for _, node in self.components:
            _collect_vars(node, out)
        return out


def _collect_vars(node: Expr, out: set[str]) -> None:
    if isinstance(node, Var):
        out.add(node.name)
    elif isinstance(node, Unary):
        _collect_vars(node.operand, out)
    elif isinstance(node, (Binary, Gate)):
        _collect_vars(node.left, out)
        _collect_vars(node.right, out)
    elif isinstance(node, Norm):
        out.update(node.names)


# --- lexer -------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym>[=;(),+\-*/<>])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # number | name | sym | eof
    text: str
    line: int
    column: int


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col, pos = 1, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise DslSyntaxError(f"unexpected character {source[pos]!r}", line, col)
        text = m.group(0)
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


# --- parser ------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def cur(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.cur
        self.pos += 1
        return tok

    def fail(self, message: str) -> DslSyntaxError:
        return DslSyntaxError(message, self.cur.line, self.cur.column)

    def expect(self, text: str) -> _Token:
        if self.cur.text != text:
            raise self.fail(f"expected {text!r}, found {self.cur.text or 'end of input'!r}")
        return self.advance()

    def program(self) -> RewardExpr:
        components: list[tuple[str, Expr]] = []
        seen: set[str] = set()
        while self.cur.kind != "eof":
            if self.cur.text != "component":
                raise self.fail(f"expected 'component', found {self.cur.text!r}")
            self.advance()
            name_tok = self.cur
            if name_tok.kind != "name" or name_tok.text in KEYWORDS:
                raise self.fail("expected component name")
            if name_tok.text in seen:
                raise self.fail(f"duplicate component name {name_tok.text!r}")
            seen.add(name_tok.text)
            self.advance()
            self.expect("=")
            node = self.expr()
            self.expect(";")
            components.append((name_tok.text, node))
        if not components:
            raise self.fail("empty program: at least one component is required")
        return RewardExpr(tuple(components))

    def expr(self) -> Expr:
        node = self.term()
        while self.cur.text in ("+", "-"):
            op = "add" if self.advance().text == "+" else "sub"
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.cur.text in ("*", "/"):
            op = "mul" if self.advance().text == "*" else "div"
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.cur.text == "-":
            self.advance()
            operand = self.unary()
            # Fold negated literals so "-2.5" round-trips as Const(-2.5).
            if isinstance(operand, Const):
                return Const(-operand.value)
            return Unary("neg", operand)
        return self.primary()

    def primary(self) -> Expr:
        tok = self.cur
        if tok.kind == "number":
            self.advance()
            return Const(float(tok.text))
        if tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "name":
            if tok.text in UNARY_FUNCS:
                self.advance()
                self.expect("(")
                node = self.expr()
                self.expect(")")
                return Unary(tok.text, node)
            if tok.text in BINARY_FUNCS:
                self.advance()
                self.expect("(")
                left = self.expr()
                self.expect(",")
                right = self.expr()
                self.expect(")")
                return Binary(tok.text, left, right)
            if tok.text == "indicator":
                self.advance()
                self.expect("(")
                left = self.expr()
                if self.cur.text not in ("<", ">"):
                    raise self.fail("indicator requires a '<' or '>' comparison")
                op = "lt" if self.advance().text == "<" else "gt"
                right = self.expr()
                self.expect(")")
                return Gate(op, left, right)
            if tok.text == "norm":
                self.advance()
                self.expect("(")
                names = [self._var_name()]
                while self.cur.text == ",":
                    self.advance()
                    names.append(self._var_name())
                self.expect(")")
                return Norm(tuple(names))
            if tok.text == "component":
                raise self.fail("unexpected 'component' inside expression (missing ';'?)")
            self.advance()
            return Var(tok.text)
        raise self.fail(f"unexpected token {tok.text or 'end of input'!r}")

    def _var_name(self) -> str:
        tok = self.cur
        if tok.kind != "name" or tok.text in KEYWORDS:
            raise self.fail("norm arguments must be variable names")
        self.advance()
        return tok.text


def parse(source: str, variables=None) -> RewardExpr:
    """Parse a reward program, optionally validating variable references.

    ``variables``, when given, is the task's observation vocabulary;
    references outside it raise :class:`UnknownVariable`.
    """
    expr = _Parser(_tokenize(source)).program()
    if variables is not None:
        unknown = sorted(expr.variables() - set(variables))
        if unknown:
            raise UnknownVariable(unknown)
    return expr


# --- evaluation ---------------------------------------------------------------


def _sanitize(value, sentinel: float):
    # Overflow never traps: clamp infinities to the sentinel, NaN to zero.
    return np.nan_to_num(value, nan=0.0, posinf=sentinel, neginf=-sentinel)


def _eval_node(node: Expr, bindings: dict, sentinel: float):
    if isinstance(node, Const):
        return np.float64(node.value)
    if isinstance(node, Var):
        if node.name not in bindings:
            raise MissingBinding(f"no binding for variable {node.name!r}")
        return np.asarray(bindings[node.name], dtype=np.float64)
    if isinstance(node, Unary):
        operand = _eval_node(node.operand, bindings, sentinel)
        if node.op == "neg":
            return -operand
        if node.op == "abs":
            return np.abs(operand)
        if node.op == "exp":
            with np.errstate(over="ignore"):
                return _sanitize(np.exp(operand), sentinel)
        return np.tanh(operand)
    if isinstance(node, Binary):
        left = _eval_node(node.left, bindings, sentinel)
        right = _eval_node(node.right, bindings, sentinel)
        if node.op == "div":
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(
                    right == 0.0,
                    np.where(left == 0.0, 0.0, np.sign(left) * sentinel),
                    left / np.where(right == 0.0, 1.0, right),
                )
            return _sanitize(out, sentinel)
        with np.errstate(over="ignore", invalid="ignore"):
            if node.op == "add":
                out = left + right
            elif node.op == "sub":
                out = left - right
            elif node.op == "mul":
                out = left * right
            elif node.op == "min":
                out = np.minimum(left, right)
            else:
                out = np.maximum(left, right)
        return _sanitize(out, sentinel)
    if isinstance(node, Gate):
        left = _eval_node(node.left, bindings, sentinel)
        right = _eval_node(node.right, bindings, sentinel)
        if node.op == "lt":
            return (left < right).astype(np.float64)
        return (left > right).astype(np.float64)
    if isinstance(node, Norm):
        total = np.float64(0.0)
        for name in node.names:
            if name not in bindings:
                raise MissingBinding(f"no binding for variable {name!r}")
            v = np.asarray(bindings[name], dtype=np.float64)
            total = total + v * v
        return _sanitize(np.sqrt(total), sentinel)
    raise TypeError(f"unknown AST node {node!r}")


def evaluate(expr: RewardExpr, bindings: dict, sentinel: float = DEFAULT_SENTINEL):
    """Evaluate a program against variable bindings.

    Returns ``(total, components)`` where total is the sum of component
    values accumulated in declaration order. Bindings may be scalars or
    numpy arrays (broadcast elementwise); outputs match their shape.
    """
    components = {}
    total = None
    scalar = all(np.ndim(v) == 0 for v in bindings.values())
    for name, node in expr.components:
        value = _eval_node(node, bindings, sentinel)
        value = _sanitize(np.asarray(value, dtype=np.float64), sentinel)
        components[name] = float(value) if scalar else value
        total = value if total is None else _sanitize(total + value, sentinel)
    return (float(total) if scalar else total), components


# --- pretty printing ----------------------------------------------------------

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2}


def _fmt_const(value: float) -> str:
    # repr round-trips doubles exactly; force a decimal point for integers.
    text = repr(float(value))
    return text


def _needs_parens(child: Expr, parent_prec: int, right_side: bool) -> bool:
    if isinstance(child, Binary) and child.op in _PREC:
        child_prec = _PREC[child.op]
        if child_prec < parent_prec:
            return True
        # Subtraction and division do not associate on the right.
        if child_prec == parent_prec and right_side:
            return True
    return False


def _print_node(node: Expr) -> str:
    if isinstance(node, Const):
        return _fmt_const(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            inner = _print_node(node.operand)
            if isinstance(node.operand, Binary) and node.operand.op in _PREC:
                return f"-({inner})"
            if isinstance(node.operand, Const) and node.operand.value < 0:
                return f"-({inner})"
            return f"-{inner}"
        return f"{node.op}({_print_node(node.operand)})"
    if isinstance(node, Binary):
        if node.op in ("min", "max"):
            return f"{node.op}({_print_node(node.left)}, {_print_node(node.right)})"
        prec = _PREC[node.op]
        sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[node.op]
        left = _print_node(node.left)
        if _needs_parens(node.left, prec, right_side=False):
            left = f"({left})"
        right = _print_node(node.right)
        if _needs_parens(node.right, prec, right_side=True):
            right = f"({right})"
        # A negative literal or unary minus on the right reads as "x * -2.0";
        # parenthesize after '-' so "a - -b" never collapses into "a --b".
        if isinstance(node.right, Const) and node.right.value < 0 and sym == "-":
            right = f"({right})"
        if isinstance(node.right, Unary) and node.right.op == "neg" and sym == "-":
            right = f"({right})"
        return f"{left} {sym} {right}"
    if isinstance(node, Gate):
        sym = "<" if node.op == "lt" else ">"
        return f"indicator({_print_node(node.left)} {sym} {_print_node(node.right)})"
    if isinstance(node, Norm):
        return f"norm({', '.join(node.names)})"
    raise TypeError(f"unknown AST node {node!r}")


def pretty_print(expr: RewardExpr) -> str:
    """Render a program to canonical text; parse(pretty_print(e)) == e."""
    lines = [f"component {name} = {_print_node(node)};" for name, node in expr.components]
    return "\n".join(lines)
