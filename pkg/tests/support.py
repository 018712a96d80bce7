"""Shared test helpers: random expression trees and guarded evaluation."""

from __future__ import annotations

import numpy as np

from hpflow.expressions import Add, Const, Div, Expr, Mul, Neg, Pow, Var

FIGURE_INERTIA = (4.0, 1.5, 1.0)
FIGURE_X0 = (-0.1, 0.2, 0.175)


def random_expr(rng: np.random.Generator, n_vars: int, depth: int) -> Expr:
    """Random expression tree of at most the given depth."""
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.4:
            return Const(float(rng.uniform(-2.0, 2.0)))
        return Var(int(rng.integers(0, n_vars)))
    kind = rng.choice(["add", "sub", "mul", "div", "pow", "neg"])
    if kind == "neg":
        return Neg(random_expr(rng, n_vars, depth - 1))
    if kind == "pow":
        exponent = int(rng.integers(-2, 4))
        return Pow(random_expr(rng, n_vars, depth - 1), exponent)
    left = random_expr(rng, n_vars, depth - 1)
    right = random_expr(rng, n_vars, depth - 1)
    if kind == "add":
        return Add(left, right)
    if kind == "sub":
        return Add(left, Neg(right))
    if kind == "mul":
        return Mul(left, right)
    return Div(left, right)


def min_denominator(e: Expr, point) -> float:
    """Smallest |denominator| (and |base| of negative powers) met evaluating
    ``e`` at ``point``; inf when no quotients occur, 0 when a nested
    evaluation already divides by zero."""
    try:
        worst = float("inf")
        if isinstance(e, Div):
            worst = min(
                min_denominator(e.left, point),
                min_denominator(e.right, point),
                abs(e.right.eval(point)),
            )
        elif isinstance(e, Pow):
            worst = min_denominator(e.base, point)
            if e.exponent < 0:
                worst = min(worst, abs(e.base.eval(point)))
        elif isinstance(e, Neg):
            worst = min_denominator(e.operand, point)
        elif isinstance(e, (Add, Mul)):
            worst = min(
                min_denominator(e.left, point), min_denominator(e.right, point)
            )
        return worst
    except ZeroDivisionError:
        return 0.0


# Points are accepted only when every denominator stays well above the
# 1e-3 avoidance floor; the margin keeps central differences (step ~1e-5)
# inside their stated tolerance for 1/x-type curvature.
DENOMINATOR_FLOOR = 3e-2


def well_conditioned_point(
    rng: np.random.Generator,
    e: Expr,
    n_vars: int,
    tries: int = 60,
    magnitude_cap: float = 1e4,
):
    """A point in [-2, 2]^n avoiding small denominators and huge values, or
    None when the expression is badly conditioned everywhere sampled."""
    for _ in range(tries):
        point = rng.uniform(-2.0, 2.0, size=n_vars)
        if min_denominator(e, point) < DENOMINATOR_FLOOR:
            continue
        try:
            value = e.eval(point)
        except ZeroDivisionError:
            continue
        if not np.isfinite(value) or abs(value) > magnitude_cap:
            continue
        return point
    return None
