"""Scalar expressions over a state vector, with exact symbolic differentiation.

Expressions are small immutable ASTs built from constants, state variables
(referenced by index), sums, products, quotients, integer powers and
negation.  They can be parsed from text, evaluated at a point, differentiated
exactly, substituted into one another and compiled to plain Python functions
for fast repeated evaluation.

Grammar accepted by :func:`parse` (loosest to tightest binding)::

    expr     := term  (('+' | '-') term)*
    term     := factor (('*' | '/') factor)*
    factor   := '-' factor | power
    power    := atom ('^' exponent)*
    exponent := ['-'] integer-literal
    atom     := number | identifier | '(' expr ')'

so ``^`` binds tightest, then unary minus, then ``*`` ``/``, then ``+`` ``-``.
Exponents must be integer literals; everything else is rejected.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Expr",
    "Const",
    "Var",
    "Add",
    "Mul",
    "Div",
    "Pow",
    "Neg",
    "ExpressionError",
    "ParseError",
    "parse",
    "differentiate",
    "substitute",
    "variables_used",
    "to_source",
    "compile_scalar",
    "compile_vector",
    "ScalarField",
]


class ExpressionError(ValueError):
    """Base class for expression construction and parsing problems."""


class ParseError(ExpressionError):
    """Syntax or validation error in expression text.

    ``position`` is the character offset into the source string; for
    unexpected end of input it equals ``len(source)``.
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (offset {position})")
        self.position = position


# ---------------------------------------------------------------------------
# AST nodes
# ---------------------------------------------------------------------------


class Expr:
    """Base node.  Nodes are immutable and safe to share between threads."""

    __slots__ = ()

    def eval(self, point) -> float:
        """Evaluate at ``point`` (any indexable of floats)."""
        raise NotImplementedError

    def __add__(self, other):
        return Add(self, _coerce(other))

    def __radd__(self, other):
        return Add(_coerce(other), self)

    def __sub__(self, other):
        return Add(self, Neg(_coerce(other)))

    def __rsub__(self, other):
        return Add(_coerce(other), Neg(self))

    def __mul__(self, other):
        return Mul(self, _coerce(other))

    def __rmul__(self, other):
        return Mul(_coerce(other), self)

    def __truediv__(self, other):
        return Div(self, _coerce(other))

    def __rtruediv__(self, other):
        return Div(_coerce(other), self)

    def __pow__(self, exponent):
        return Pow(self, exponent)

    def __neg__(self):
        return Neg(self)

    def __str__(self):
        return to_source(self)

    def __repr__(self):
        return f"{type(self).__name__}({to_source(self)!r})"


def _coerce(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float)):
        return Const(float(value))
    raise ExpressionError(f"cannot use {value!r} as an expression operand")


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: float):
        object.__setattr__(self, "value", float(value))

    def __setattr__(self, name, value):
        raise AttributeError("Const is immutable")

    def eval(self, point):
        return self.value


class Var(Expr):
    __slots__ = ("index",)

    def __init__(self, index: int):
        if index < 0:
            raise ExpressionError(f"variable index must be >= 0, got {index}")
        object.__setattr__(self, "index", int(index))

    def __setattr__(self, name, value):
        raise AttributeError("Var is immutable")

    def eval(self, point):
        return float(point[self.index])


class _Binary(Expr):
    __slots__ = ("left", "right")

    def __init__(self, left: Expr, right: Expr):
        object.__setattr__(self, "left", _coerce(left))
        object.__setattr__(self, "right", _coerce(right))

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")


class Add(_Binary):
    __slots__ = ()

    def eval(self, point):
        return self.left.eval(point) + self.right.eval(point)


class Mul(_Binary):
    __slots__ = ()

    def eval(self, point):
        return self.left.eval(point) * self.right.eval(point)


class Div(_Binary):
    __slots__ = ()

    def eval(self, point):
        return self.left.eval(point) / self.right.eval(point)


class Pow(Expr):
    __slots__ = ("base", "exponent")

    def __init__(self, base: Expr, exponent: int):
        if isinstance(exponent, float) and not exponent.is_integer():
            raise ExpressionError(f"power exponent must be an integer, got {exponent}")
        if not isinstance(exponent, (int, float)):
            raise ExpressionError("power exponent must be an integer literal")
        object.__setattr__(self, "base", _coerce(base))
        object.__setattr__(self, "exponent", int(exponent))

    def __setattr__(self, name, value):
        raise AttributeError("Pow is immutable")

    def eval(self, point):
        return self.base.eval(point) ** self.exponent


class Neg(Expr):
    __slots__ = ("operand",)

    def __init__(self, operand: Expr):
        object.__setattr__(self, "operand", _coerce(operand))

    def __setattr__(self, name, value):
        raise AttributeError("Neg is immutable")

    def eval(self, point):
        return -self.operand.eval(point)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_OPERATOR_CHARS = "+-*/^()"


def _tokenize(source: str):
    """Yield (kind, text, position) triples; kind in {num, ident, op, end}."""
    tokens = []
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _OPERATOR_CHARS:
            tokens.append(("op", ch, i))
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            start = i
            while i < n and (source[i].isdigit() or source[i] == "."):
                i += 1
            if i < n and source[i] in "eE":
                j = i + 1
                if j < n and source[j] in "+-":
                    j += 1
                if j < n and source[j].isdigit():
                    i = j
                    while i < n and source[i].isdigit():
                        i += 1
            text = source[start:i]
            try:
                float(text)
            except ValueError:
                raise ParseError(f"malformed number {text!r}", start) from None
            tokens.append(("num", text, start))
            continue
        if ch.isalpha() or ch == "_":
            start = i
            while i < n and (source[i].isalnum() or source[i] == "_"):
                i += 1
            tokens.append(("ident", source[start:i], start))
            continue
        raise ParseError(f"unexpected character {ch!r}", i)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source: str, variables: Sequence[str]):
        names = list(variables)
        if len(set(names)) != len(names):
            raise ExpressionError(f"duplicate variable names in {names}")
        self.source = source
        self.index = {name: i for i, name in enumerate(names)}
        self.tokens = _tokenize(source)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, symbol: str):
        kind, text, position = self.peek()
        if kind != "op" or text != symbol:
            raise ParseError(f"expected {symbol!r}", position)
        return self.advance()

    def parse(self) -> Expr:
        node = self.expr()
        kind, text, position = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", position)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                rhs = self.term()
                node = Add(node, rhs) if text == "+" else Add(node, Neg(rhs))
            else:
                return node

    def term(self) -> Expr:
        node = self.factor()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                rhs = self.factor()
                node = Mul(node, rhs) if text == "*" else Div(node, rhs)
            else:
                return node

    def factor(self) -> Expr:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expr:
        node = self.atom()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text == "^":
                self.advance()
                node = Pow(node, self.exponent())
            else:
                return node

    def exponent(self) -> int:
        sign = 1
        kind, text, position = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            sign = -1
            kind, text, position = self.peek()
        if kind != "num":
            raise ParseError("expected integer exponent", position)
        value = float(text)
        if not value.is_integer():
            raise ParseError(f"non-integer exponent {text!r}", position)
        self.advance()
        return sign * int(value)

    def atom(self) -> Expr:
        kind, text, position = self.advance()
        if kind == "num":
            return Const(float(text))
        if kind == "ident":
            if text not in self.index:
                raise ParseError(f"unknown identifier {text!r}", position)
            return Var(self.index[text])
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        if kind == "end":
            raise ParseError("unexpected end of input", position)
        raise ParseError(f"unexpected {text!r}", position)


def parse(source: str, variables: Sequence[str]) -> Expr:
    """Parse ``source`` into an expression over the named state variables."""
    return _Parser(source, variables).parse()


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _precedence(e: Expr) -> int:
    if isinstance(e, Add):
        return _PREC_ADD
    if isinstance(e, (Mul, Div)):
        return _PREC_MUL
    if isinstance(e, Neg):
        return _PREC_NEG
    if isinstance(e, Const) and e.value < 0:
        return _PREC_NEG
    if isinstance(e, Pow):
        return _PREC_POW
    return _PREC_ATOM


def _var_name(index: int, variables) -> str:
    if variables is not None and index < len(variables):
        return variables[index]
    return f"x{index + 1}"


def to_source(e: Expr, variables: Sequence[str] | None = None) -> str:
    """Render an expression as text that :func:`parse` accepts.

    Right operands of same-precedence operators are parenthesized so the
    reparsed tree evaluates identically (bit for bit) to the original.
    """

    def wrap(child: Expr, parent_prec: int, strict: bool) -> str:
        text = render(child)
        prec = _precedence(child)
        if prec < parent_prec or (strict and prec == parent_prec):
            return f"({text})"
        return text

    def render(node: Expr) -> str:
        if isinstance(node, Const):
            return repr(node.value)
        if isinstance(node, Var):
            return _var_name(node.index, variables)
        if isinstance(node, Add):
            if isinstance(node.right, Neg):
                return (
                    f"{wrap(node.left, _PREC_ADD, False)} - "
                    f"{wrap(node.right.operand, _PREC_ADD, True)}"
                )
            return (
                f"{wrap(node.left, _PREC_ADD, False)} + "
                f"{wrap(node.right, _PREC_ADD, True)}"
            )
        if isinstance(node, Mul):
            return (
                f"{wrap(node.left, _PREC_MUL, False)} * "
                f"{wrap(node.right, _PREC_MUL, True)}"
            )
        if isinstance(node, Div):
            return (
                f"{wrap(node.left, _PREC_MUL, False)} / "
                f"{wrap(node.right, _PREC_MUL, True)}"
            )
        if isinstance(node, Neg):
            return f"-{wrap(node.operand, _PREC_NEG, False)}"
        if isinstance(node, Pow):
            return f"{wrap(node.base, _PREC_POW, True)}^{node.exponent}"
        raise TypeError(f"unknown node {node!r}")

    return render(e)


# ---------------------------------------------------------------------------
# Differentiation and substitution
# ---------------------------------------------------------------------------


def _is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0.0


def _is_one(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 1.0


def _add(a: Expr, b: Expr) -> Expr:
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return Add(a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if _is_zero(a) or _is_zero(b):
        return Const(0.0)
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    return Mul(a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if _is_zero(a):
        return Const(0.0)
    if _is_one(b):
        return a
    return Div(a, b)


def _neg(a: Expr) -> Expr:
    if _is_zero(a):
        return a
    return Neg(a)


def _pow(base: Expr, exponent: int) -> Expr:
    if exponent == 1:
        return base
    if exponent == 0:
        return Const(1.0)
    return Pow(base, exponent)


def differentiate(e: Expr, var: int) -> Expr:
    """Exact partial derivative of ``e`` with respect to variable ``var``.

    Trivial zero and unit factors introduced by the sum, product, quotient
    and power rules are folded away; no other simplification is attempted.
    """
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0) if e.index == var else Const(0.0)
    if isinstance(e, Add):
        return _add(differentiate(e.left, var), differentiate(e.right, var))
    if isinstance(e, Mul):
        return _add(
            _mul(differentiate(e.left, var), e.right),
            _mul(e.left, differentiate(e.right, var)),
        )
    if isinstance(e, Div):
        du = differentiate(e.left, var)
        dv = differentiate(e.right, var)
        numerator = _add(_mul(du, e.right), _neg(_mul(e.left, dv)))
        return _div(numerator, _pow(e.right, 2))
    if isinstance(e, Pow):
        if e.exponent == 0:
            return Const(0.0)
        db = differentiate(e.base, var)
        return _mul(_mul(Const(e.exponent), _pow(e.base, e.exponent - 1)), db)
    if isinstance(e, Neg):
        return _neg(differentiate(e.operand, var))
    raise TypeError(f"cannot differentiate {e!r}")


def substitute(e: Expr, replacements: Sequence[Expr]) -> Expr:
    """Replace every variable ``i`` by ``replacements[i]``."""
    if isinstance(e, Const):
        return e
    if isinstance(e, Var):
        if e.index >= len(replacements):
            raise ExpressionError(
                f"no replacement for variable index {e.index} "
                f"(got {len(replacements)} replacements)"
            )
        return replacements[e.index]
    if isinstance(e, Add):
        return _add(substitute(e.left, replacements), substitute(e.right, replacements))
    if isinstance(e, Mul):
        return _mul(substitute(e.left, replacements), substitute(e.right, replacements))
    if isinstance(e, Div):
        return _div(substitute(e.left, replacements), substitute(e.right, replacements))
    if isinstance(e, Pow):
        return _pow(substitute(e.base, replacements), e.exponent)
    if isinstance(e, Neg):
        return _neg(substitute(e.operand, replacements))
    raise TypeError(f"cannot substitute into {e!r}")


def variables_used(e: Expr) -> set[int]:
    """Set of variable indices appearing in ``e``."""
    out: set[int] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.add(node.index)
        elif isinstance(node, _Binary):
            stack.append(node.left)
            stack.append(node.right)
        elif isinstance(node, Pow):
            stack.append(node.base)
        elif isinstance(node, Neg):
            stack.append(node.operand)
    return out


# ---------------------------------------------------------------------------
# Compilation to plain Python
# ---------------------------------------------------------------------------


def pycode(e: Expr, names: Sequence[str]) -> str:
    """Python source fragment evaluating ``e``; ``names[i]`` names variable i."""
    if isinstance(e, Const):
        # parenthesized so a negative literal never binds against Python's
        # tighter ** operator
        return f"({e.value!r})"
    if isinstance(e, Var):
        return names[e.index]
    if isinstance(e, Add):
        return f"({pycode(e.left, names)} + {pycode(e.right, names)})"
    if isinstance(e, Mul):
        return f"({pycode(e.left, names)} * {pycode(e.right, names)})"
    if isinstance(e, Div):
        return f"({pycode(e.left, names)} / {pycode(e.right, names)})"
    if isinstance(e, Pow):
        return f"({pycode(e.base, names)} ** {e.exponent})"
    if isinstance(e, Neg):
        return f"(-{pycode(e.operand, names)})"
    raise TypeError(f"cannot compile {e!r}")


def _hoisted_names(n: int) -> list[str]:
    return [f"_x{i}" for i in range(n)]


def _build_function(
    body_lines: Iterable[str], n: int, extra_globals: dict | None = None
) -> Callable:
    hoist = "; ".join(f"_x{i} = x[{i}]" for i in range(n)) if n else "pass"
    src = "def _fn(x):\n    " + hoist + "\n" + "\n".join(body_lines)
    globals_dict: dict = {"__builtins__": {}}
    if extra_globals:
        globals_dict.update(extra_globals)
    namespace: dict = {}
    exec(compile(src, "<hpflow-expr>", "exec"), globals_dict, namespace)
    return namespace["_fn"]


def compile_scalar(e: Expr, n: int) -> Callable[[Sequence[float]], float]:
    """Compile to a function ``f(x) -> float`` for fast repeated evaluation."""
    names = _hoisted_names(n)
    return _build_function([f"    return {pycode(e, names)}"], n)


def compile_vector(exprs: Sequence[Expr], n: int) -> Callable[[Sequence[float]], tuple]:
    """Compile component expressions to ``f(x) -> tuple of floats``."""
    names = _hoisted_names(n)
    parts = ", ".join(pycode(e, names) for e in exprs)
    return _build_function([f"    return ({parts},)"], n)


# ---------------------------------------------------------------------------
# Scalar fields
# ---------------------------------------------------------------------------


class ScalarField:
    """An expression together with its state dimension.

    Caches the symbolic gradient and Hessian and compiled evaluators for all
    three.  Immutable once constructed; the lazy caches are idempotent, so
    concurrent first use from several threads is safe.
    """

    def __init__(self, expr: Expr, n: int, variables: Sequence[str] | None = None):
        if n <= 0:
            raise ExpressionError(f"state dimension must be positive, got {n}")
        used = variables_used(expr)
        if used and max(used) >= n:
            raise ExpressionError(
                f"expression uses variable index {max(used)} "
                f"but state dimension is {n}"
            )
        if variables is not None and len(variables) != n:
            raise ExpressionError(
                f"got {len(variables)} variable names for dimension {n}"
            )
        self.expr = expr
        self.n = int(n)
        self.variables = tuple(variables) if variables is not None else None
        self._gradient: tuple[Expr, ...] | None = None
        self._hessian: tuple[tuple[Expr, ...], ...] | None = None
        self._value_fn = None
        self._gradient_fn = None
        self._hessian_fn = None

    @classmethod
    def from_source(cls, source: str, variables: Sequence[str]) -> "ScalarField":
        return cls(parse(source, variables), len(variables), variables)

    @property
    def gradient(self) -> tuple[Expr, ...]:
        """Component expressions of the exact gradient."""
        if self._gradient is None:
            self._gradient = tuple(
                differentiate(self.expr, i) for i in range(self.n)
            )
        return self._gradient

    @property
    def hessian(self) -> tuple[tuple[Expr, ...], ...]:
        """hessian[i][j] = d(gradient[i])/d(x_j); evaluates symmetrically."""
        if self._hessian is None:
            grad = self.gradient
            self._hessian = tuple(
                tuple(differentiate(grad[i], j) for j in range(self.n))
                for i in range(self.n)
            )
        return self._hessian

    def value(self, x) -> float:
        if self._value_fn is None:
            self._value_fn = compile_scalar(self.expr, self.n)
        return self._value_fn(x)

    def gradient_at(self, x) -> np.ndarray:
        if self._gradient_fn is None:
            self._gradient_fn = compile_vector(self.gradient, self.n)
        return np.array(self._gradient_fn(x))

    def hessian_at(self, x) -> np.ndarray:
        if self._hessian_fn is None:
            flat = [entry for row in self.hessian for entry in row]
            self._hessian_fn = compile_vector(flat, self.n)
        return np.array(self._hessian_fn(x)).reshape(self.n, self.n)

    def __repr__(self):
        return f"ScalarField({to_source(self.expr, self.variables)!r}, n={self.n})"
