"""Abstract syntax for Corps: agent paths, types, expressions, contexts.

An agent path addresses a node in the process tree.  The empty path is
the root (ground truth); each extension steps one level further into an
agent's beliefs, so ("A", "B") is "A's version of B".  Paths form a
monoid under concatenation, which is why they are plain tuples here.

Typing contexts are ordered sequences of variable bindings and locks.
A lock shifts the viewpoint of everything to its right; a binding is
tagged with the path of locks that must be crossed after it before the
variable becomes usable.  Contexts are kept in a canonical form: no
empty locks, no two adjacent locks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

# ---------------------------------------------------------------------------
# Agent paths

Path = tuple[str, ...]

ROOT: Path = ()


def is_agent_name(name: str) -> bool:
    return bool(name) and name[0].isupper() and name.replace("_", "").isalnum()


def path_concat(g1: Path, g2: Path) -> Path:
    """Monoid action on agent paths; the empty path is the identity."""
    return g1 + g2


# ---------------------------------------------------------------------------
# Source positions

@dataclass(frozen=True)
class Span:
    file: str
    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise ValueError("span start after end")

    def __str__(self) -> str:
        return f"{self.file}:{self.start}-{self.end}"


# ---------------------------------------------------------------------------
# Types

@dataclass(frozen=True)
class Unit:
    pass


@dataclass(frozen=True)
class Void:
    pass


@dataclass(frozen=True)
class Believes:
    agent: str
    body: "Type"


@dataclass(frozen=True)
class Product:
    left: "Type"
    right: "Type"


@dataclass(frozen=True)
class Sum:
    left: "Type"
    right: "Type"


@dataclass(frozen=True)
class Arrow:
    dom: "Type"
    cod: "Type"


Type = Union[Unit, Void, Believes, Product, Sum, Arrow]

UNIT = Unit()
VOID = Void()


def belief_stack(g: Path, core: Type) -> Type:
    """Wrap `core` in one Believes layer per path segment, outermost first."""
    for name in reversed(g):
        core = Believes(name, core)
    return core


def split_stack(ty: Type) -> tuple[Path, Type]:
    """Peel the maximal Believes prefix; the returned core is not a Believes."""
    g: list[str] = []
    while isinstance(ty, Believes):
        g.append(ty.agent)
        ty = ty.body
    return tuple(g), ty


def peel_stack(ty: Type, g: Path) -> Optional[Type]:
    """Strip exactly the stack `g` from `ty`, or None if it does not match."""
    for name in g:
        if not isinstance(ty, Believes) or ty.agent != name:
            return None
        ty = ty.body
    return ty


# ---------------------------------------------------------------------------
# Expressions

@dataclass(frozen=True)
class Node:
    span: Optional[Span] = field(default=None, compare=False, kw_only=True)


@dataclass(frozen=True)
class Var(Node):
    name: str


@dataclass(frozen=True)
class Located(Node):
    agent: str
    body: "Expr"


@dataclass(frozen=True)
class ModalLet(Node):
    # let [open_path] [stack_path] var = bound in body
    open_path: Path
    stack_path: Path
    var: str
    bound: "Expr"
    body: "Expr"


@dataclass(frozen=True)
class Send(Node):
    payload: "Expr"
    dest: Path


@dataclass(frozen=True)
class Up(Node):
    path: Path
    body: "Expr"


@dataclass(frozen=True)
class Down(Node):
    path: Path
    body: "Expr"


@dataclass(frozen=True)
class Lam(Node):
    var: str
    body: "Expr"


@dataclass(frozen=True)
class App(Node):
    fn: "Expr"
    arg: "Expr"


@dataclass(frozen=True)
class Pair(Node):
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Fst(Node):
    inner: "Expr"


@dataclass(frozen=True)
class Snd(Node):
    inner: "Expr"


@dataclass(frozen=True)
class Inl(Node):
    inner: "Expr"


@dataclass(frozen=True)
class Inr(Node):
    inner: "Expr"


@dataclass(frozen=True)
class Case(Node):
    scrutinee: "Expr"
    left_var: str
    left_body: "Expr"
    right_var: str
    right_body: "Expr"


@dataclass(frozen=True)
class UnitVal(Node):
    pass


@dataclass(frozen=True)
class Absurd(Node):
    inner: "Expr"


@dataclass(frozen=True)
class Annot(Node):
    inner: "Expr"
    ty: Type


Expr = Union[
    Var, Located, ModalLet, Send, Up, Down,
    Lam, App, Pair, Fst, Snd, Inl, Inr, Case, UnitVal, Absurd, Annot,
]

UNIT_VAL = UnitVal()


def children(e: Expr) -> Iterator[Expr]:
    match e:
        case Var() | UnitVal():
            return
        case Located(_, body) | Up(_, body) | Down(_, body):
            yield body
        case ModalLet(_, _, _, bound, body):
            yield bound
            yield body
        case Send(payload, _):
            yield payload
        case Lam(_, body):
            yield body
        case App(fn, arg):
            yield fn
            yield arg
        case Pair(left, right):
            yield left
            yield right
        case Fst(inner) | Snd(inner) | Inl(inner) | Inr(inner) | Absurd(inner):
            yield inner
        case Case(scrutinee, _, left_body, _, right_body):
            yield scrutinee
            yield left_body
            yield right_body
        case Annot(inner, _):
            yield inner


def free_vars(e: Expr) -> frozenset[str]:
    match e:
        case Var(name):
            return frozenset((name,))
        case Lam(var, body):
            return free_vars(body) - {var}
        case ModalLet(_, _, var, bound, body):
            return free_vars(bound) | (free_vars(body) - {var})
        case Case(scrutinee, lv, lb, rv, rb):
            return (free_vars(scrutinee)
                    | (free_vars(lb) - {lv})
                    | (free_vars(rb) - {rv}))
        case _:
            out: frozenset[str] = frozenset()
            for child in children(e):
                out |= free_vars(child)
            return out


def fresh_name(base: str, avoid: frozenset[str]) -> str:
    stem = base.rstrip("0123456789") or base
    i = 1
    while True:
        candidate = f"{stem}{i}"
        if candidate not in avoid:
            return candidate
        i += 1


def substitute(e: Expr, x: str, v: Expr) -> Expr:
    """Capture-avoiding substitution of `v` for free occurrences of `x`."""
    fvv = free_vars(v)

    def under_binder(var: str, body: Expr) -> tuple[str, Expr]:
        # Rename the binder when it would capture a free variable of v.
        if var in fvv and x in free_vars(body):
            renamed = fresh_name(var, fvv | free_vars(body))
            return renamed, substitute(body, var, Var(renamed))
        return var, body

    def go(e: Expr) -> Expr:
        match e:
            case Var(name):
                return v if name == x else e
            case UnitVal():
                return e
            case Lam(var, body):
                if var == x:
                    return e
                var, body = under_binder(var, body)
                return Lam(var, go(body))
            case ModalLet(g1, g2, var, bound, body):
                bound = go(bound)
                if var == x:
                    return ModalLet(g1, g2, var, bound, body)
                var, body = under_binder(var, body)
                return ModalLet(g1, g2, var, bound, go(body))
            case Case(scrutinee, lv, lb, rv, rb):
                scrutinee = go(scrutinee)
                if lv != x:
                    lv, lb = under_binder(lv, lb)
                    lb = go(lb)
                if rv != x:
                    rv, rb = under_binder(rv, rb)
                    rb = go(rb)
                return Case(scrutinee, lv, lb, rv, rb)
            case Located(agent, body):
                return Located(agent, go(body))
            case Send(payload, dest):
                return Send(go(payload), dest)
            case Up(path, body):
                return Up(path, go(body))
            case Down(path, body):
                return Down(path, go(body))
            case App(fn, arg):
                return App(go(fn), go(arg))
            case Pair(left, right):
                return Pair(go(left), go(right))
            case Fst(inner):
                return Fst(go(inner))
            case Snd(inner):
                return Snd(go(inner))
            case Inl(inner):
                return Inl(go(inner))
            case Inr(inner):
                return Inr(go(inner))
            case Absurd(inner):
                return Absurd(go(inner))
            case Annot(inner, ty):
                return Annot(go(inner), ty)
        raise TypeError(f"not an expression: {e!r}")

    return go(e)


def expr_equal(e1: Expr, e2: Expr) -> bool:
    """Alpha-equivalence of expressions."""

    def go(a: Expr, b: Expr, env1: dict[str, int], env2: dict[str, int],
           depth: int) -> bool:
        match a, b:
            case Var(n1), Var(n2):
                d1, d2 = env1.get(n1), env2.get(n2)
                if d1 is None and d2 is None:
                    return n1 == n2
                return d1 == d2
            case UnitVal(), UnitVal():
                return True
            case Lam(v1, b1), Lam(v2, b2):
                return go(b1, b2, {**env1, v1: depth}, {**env2, v2: depth},
                          depth + 1)
            case ModalLet(g1a, g2a, v1, e1a, b1), ModalLet(g1b, g2b, v2, e1b, b2):
                return (g1a == g1b and g2a == g2b
                        and go(e1a, e1b, env1, env2, depth)
                        and go(b1, b2, {**env1, v1: depth},
                               {**env2, v2: depth}, depth + 1))
            case Case(s1, lv1, lb1, rv1, rb1), Case(s2, lv2, lb2, rv2, rb2):
                return (go(s1, s2, env1, env2, depth)
                        and go(lb1, lb2, {**env1, lv1: depth},
                               {**env2, lv2: depth}, depth + 1)
                        and go(rb1, rb2, {**env1, rv1: depth},
                               {**env2, rv2: depth}, depth + 1))
            case Located(a1, b1), Located(a2, b2):
                return a1 == a2 and go(b1, b2, env1, env2, depth)
            case Send(p1, d1), Send(p2, d2):
                return d1 == d2 and go(p1, p2, env1, env2, depth)
            case Up(g1, b1), Up(g2, b2):
                return g1 == g2 and go(b1, b2, env1, env2, depth)
            case Down(g1, b1), Down(g2, b2):
                return g1 == g2 and go(b1, b2, env1, env2, depth)
            case App(f1, a1), App(f2, a2):
                return (go(f1, f2, env1, env2, depth)
                        and go(a1, a2, env1, env2, depth))
            case Pair(l1, r1), Pair(l2, r2):
                return (go(l1, l2, env1, env2, depth)
                        and go(r1, r2, env1, env2, depth))
            case Fst(i1), Fst(i2):
                return go(i1, i2, env1, env2, depth)
            case Snd(i1), Snd(i2):
                return go(i1, i2, env1, env2, depth)
            case Inl(i1), Inl(i2):
                return go(i1, i2, env1, env2, depth)
            case Inr(i1), Inr(i2):
                return go(i1, i2, env1, env2, depth)
            case Absurd(i1), Absurd(i2):
                return go(i1, i2, env1, env2, depth)
            case Annot(i1, t1), Annot(i2, t2):
                return t1 == t2 and go(i1, i2, env1, env2, depth)
        return False

    return go(e1, e2, {}, {}, 0)


# ---------------------------------------------------------------------------
# Located stacks over expressions

def unannot(e: Expr) -> Expr:
    """Peel top-level type annotations; they are transparent to values."""
    while isinstance(e, Annot):
        e = e.inner
    return e


def peel_located(e: Expr) -> tuple[Path, Expr]:
    """Strip the maximal located spine A1.(...An.(core)).

    Annotations along the spine are discarded; the core keeps its own.
    """
    spine: list[str] = []
    while True:
        stripped = unannot(e)
        if not isinstance(stripped, Located):
            return tuple(spine), e
        spine.append(stripped.agent)
        e = stripped.body


def match_located(e: Expr, g: Path) -> Optional[Expr]:
    """Strip exactly the located spine `g`, or None on mismatch."""
    for name in g:
        stripped = unannot(e)
        if not isinstance(stripped, Located) or stripped.agent != name:
            return None
        e = stripped.body
    return e


def wrap_located(g: Path, e: Expr) -> Expr:
    for name in reversed(g):
        e = Located(name, e)
    return e


# ---------------------------------------------------------------------------
# Typing contexts

@dataclass(frozen=True)
class Binding:
    name: str
    ty: Type
    tag: Path


@dataclass(frozen=True)
class Lock:
    path: Path


ContextEntry = Union[Binding, Lock]
Context = tuple[ContextEntry, ...]

EMPTY_CONTEXT: Context = ()


def locks_of(ctx: Context) -> Path:
    """Concatenation, in order, of every lock path in the context."""
    acc: Path = ()
    for entry in ctx:
        if isinstance(entry, Lock):
            acc = path_concat(acc, entry.path)
    return acc


def normalize_context(ctx: Context) -> Context:
    """Canonical form: drop empty locks, fuse adjacent locks."""
    out: list[ContextEntry] = []
    for entry in ctx:
        if isinstance(entry, Lock):
            if not entry.path:
                continue
            if out and isinstance(out[-1], Lock):
                out[-1] = Lock(path_concat(out[-1].path, entry.path))
            else:
                out.append(entry)
        else:
            out.append(entry)
    return tuple(out)


def ctx_lock(ctx: Context, g: Path) -> Context:
    """Extend a canonical context with a lock, staying canonical."""
    if not g:
        return ctx
    if ctx and isinstance(ctx[-1], Lock):
        return ctx[:-1] + (Lock(path_concat(ctx[-1].path, g)),)
    return ctx + (Lock(g),)


def ctx_bind(ctx: Context, name: str, ty: Type, tag: Path) -> Context:
    return ctx + (Binding(name, ty, tag),)
