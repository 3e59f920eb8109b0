"""Deterministic small-step semantics with two communication disciplines.

Reduction is leftmost-outermost call-by-value under evaluation contexts
covering every subterm position except function bodies, case branches
and modal-let bodies.  In COMM_FREE mode send/up/down never fire at the
head (their subterms still evaluate); in POSITIVE_COMM mode they fire
when the moved value is positive, i.e. contains no function anywhere:

    send A1.(...An.(v)) to [B1..Bm]  ->  B1.(...Bm.(v))
    up [A1..An] v                    ->  A1.(...An.(v))
    down [A1..An] (A1.(...An.(v)))   ->  v

Modality elimination (modal-let) is not a communication and reduces in
both modes.

Type annotations are transparent: a value may carry them, every redex
matches through them, and they are never erased.  Erasing them eagerly
would leave reducts the bidirectional checker cannot re-type (a bare
injection in an inference position), which would defeat type
preservation testing.
"""

from __future__ import annotations

import enum
from typing import Callable, Optional

from .syntax import (
    Absurd, Annot, App, Case, Down, Expr, Fst, Inl, Inr, Lam, Located,
    ModalLet, Pair, Send, Snd, Span, UnitVal, Up, Var, children,
    match_located, peel_located, substitute, unannot, wrap_located,
)


class EvalMode(enum.Enum):
    COMM_FREE = "comm-free"
    POSITIVE_COMM = "positive"


class NormalFormClass(enum.Enum):
    VALUE = "Value"
    COMM_NEUTRAL = "CommNeutral"
    OPEN = "Open"


class FuelExhausted(Exception):
    def __init__(self, last: Expr, steps: int):
        super().__init__(f"no normal form within {steps} steps")
        self.last = last
        self.steps = steps


class StuckUnexpected(Exception):
    def __init__(self, term: Expr):
        super().__init__("term is neither a normal form nor reducible")
        self.term = term


def is_value(e: Expr) -> bool:
    match unannot(e):
        case UnitVal() | Lam():
            return True
        case Pair(left, right):
            return is_value(left) and is_value(right)
        case Inl(inner) | Inr(inner) | Located(_, inner):
            return is_value(inner)
        case _:
            return False


def _has_lam(e: Expr) -> bool:
    if isinstance(e, Lam):
        return True
    return any(_has_lam(child) for child in children(e))


def is_positive_value(e: Expr) -> bool:
    """A value with no function anywhere inside it."""
    return is_value(e) and not _has_lam(e)


Step = tuple[Expr, str, Optional[Span]]


def step(mode: EvalMode, e: Expr) -> Optional[Step]:
    """One reduction step, or None on a normal form.

    Returns the reduct, the rule tag, and the span of the redex when the
    source position is known.
    """
    positive = mode is EvalMode.POSITIVE_COMM

    def go(e: Expr) -> Optional[Step]:
        match e:
            case Var() | UnitVal() | Lam():
                return None
            case Annot(inner, ty):
                r = go(inner)
                if r:
                    return Annot(r[0], ty), r[1], r[2]
                return None
            case Located(agent, body):
                r = go(body)
                if r:
                    return Located(agent, r[0]), r[1], r[2]
                return None
            case Pair(left, right):
                r = go(left)
                if r:
                    return Pair(r[0], right), r[1], r[2]
                r = go(right)
                if r:
                    return Pair(left, r[0]), r[1], r[2]
                return None
            case Inl(inner):
                r = go(inner)
                return (Inl(r[0]), r[1], r[2]) if r else None
            case Inr(inner):
                r = go(inner)
                return (Inr(r[0]), r[1], r[2]) if r else None
            case Fst(inner):
                r = go(inner)
                if r:
                    return Fst(r[0]), r[1], r[2]
                stripped = unannot(inner)
                if isinstance(stripped, Pair) and is_value(stripped):
                    return stripped.left, "fst", e.span
                return None
            case Snd(inner):
                r = go(inner)
                if r:
                    return Snd(r[0]), r[1], r[2]
                stripped = unannot(inner)
                if isinstance(stripped, Pair) and is_value(stripped):
                    return stripped.right, "snd", e.span
                return None
            case Absurd(inner):
                r = go(inner)
                return (Absurd(r[0]), r[1], r[2]) if r else None
            case App(fn, arg):
                r = go(fn)
                if r:
                    return App(r[0], arg), r[1], r[2]
                r = go(arg)
                if r:
                    return App(fn, r[0]), r[1], r[2]
                stripped = unannot(fn)
                if isinstance(stripped, Lam) and is_value(arg):
                    return (substitute(stripped.body, stripped.var, arg),
                            "beta", e.span)
                return None
            case Case(scrutinee, lv, lb, rv, rb):
                r = go(scrutinee)
                if r:
                    return Case(r[0], lv, lb, rv, rb), r[1], r[2]
                stripped = unannot(scrutinee)
                if isinstance(stripped, Inl) and is_value(stripped):
                    return substitute(lb, lv, stripped.inner), "case-inl", e.span
                if isinstance(stripped, Inr) and is_value(stripped):
                    return substitute(rb, rv, stripped.inner), "case-inr", e.span
                return None
            case ModalLet(_, g2, var, bound, body):
                r = go(bound)
                if r:
                    return (ModalLet(e.open_path, g2, var, r[0], body),
                            r[1], r[2])
                if is_value(bound):
                    core = match_located(bound, g2)
                    if core is not None:
                        return substitute(body, var, core), "modal-let", e.span
                return None
            case Send(payload, dest):
                r = go(payload)
                if r:
                    return Send(r[0], dest), r[1], r[2]
                if positive and is_value(payload):
                    _, core = peel_located(payload)
                    if is_positive_value(core):
                        return wrap_located(dest, core), "send", e.span
                return None
            case Up(path, body):
                r = go(body)
                if r:
                    return Up(path, r[0]), r[1], r[2]
                if positive and is_positive_value(body):
                    return wrap_located(path, body), "up", e.span
                return None
            case Down(path, body):
                r = go(body)
                if r:
                    return Down(path, r[0]), r[1], r[2]
                if positive and is_value(body):
                    core = match_located(body, path)
                    if core is not None and is_positive_value(core):
                        return core, "down", e.span
                return None
        raise TypeError(f"not an expression: {e!r}")

    return go(e)


_COMM, _VAR, _STUCK = "comm", "var", "stuck"


def _blockers(mode: EvalMode, e: Expr) -> set[str]:
    """Why a normal form fails to be a value, per blocked position."""
    out: set[str] = set()

    def walk(e: Expr) -> None:
        match e:
            case UnitVal() | Lam():
                return
            case Var():
                out.add(_VAR)
            case Located(_, body) | Inl(body) | Inr(body):
                walk(body)
            case Pair(left, right):
                walk(left)
                walk(right)
            case Fst(inner) | Snd(inner):
                walk(inner)
                if is_value(inner):
                    out.add(_STUCK)
            case Absurd(inner):
                walk(inner)
                if is_value(inner):
                    out.add(_STUCK)
            case App(fn, arg):
                walk(fn)
                walk(arg)
                if is_value(fn) and is_value(arg):
                    out.add(_STUCK)
            case Case(scrutinee, _, _, _, _):
                walk(scrutinee)
                if is_value(scrutinee):
                    out.add(_STUCK)
            case ModalLet(_, _, _, bound, _):
                walk(bound)
                if is_value(bound):
                    out.add(_STUCK)
            case Send(payload, _):
                walk(payload)
                if is_value(payload):
                    out.add(_COMM)
            case Up(_, body):
                walk(body)
                if is_value(body):
                    out.add(_COMM)
            case Down(path, body):
                walk(body)
                if is_value(body):
                    core = match_located(body, path)
                    if core is None:
                        out.add(_STUCK)
                    else:
                        out.add(_COMM)
            case Annot(inner, _):
                walk(inner)

    walk(e)
    return out


def classify(mode: EvalMode, e: Expr) -> NormalFormClass:
    """Classify a normal form; raises StuckUnexpected on internal errors."""
    if is_value(e):
        return NormalFormClass.VALUE
    blockers = _blockers(mode, e)
    if _COMM in blockers:
        return NormalFormClass.COMM_NEUTRAL
    if _VAR in blockers:
        return NormalFormClass.OPEN
    raise StuckUnexpected(e)


def normalize(mode: EvalMode, e: Expr, fuel: int,
              on_step: Optional[Callable[[int, str, Optional[Span]], None]] = None,
              ) -> tuple[Expr, NormalFormClass, int]:
    """Iterate `step` to a normal form; deterministic."""
    if fuel <= 0:
        raise ValueError("fuel must be positive")
    steps = 0
    while True:
        r = step(mode, e)
        if r is None:
            return e, classify(mode, e), steps
        if steps >= fuel:
            raise FuelExhausted(e, steps)
        e = r[0]
        if on_step is not None:
            on_step(steps, r[1], r[2])
        steps += 1
