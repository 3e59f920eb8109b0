"""Type-directed endpoint projection to one local process per address.

Every address in the program's universe receives a homomorphic copy of
the choreography.  The copy at address g keeps g's view of each value:
ground data materializes only at the viewpoint that computes it, the
contents of a located value materialize at its owner, and everything an
address holds no part of collapses to `skip`.  Each communication
construct becomes one message between two addresses:

    send, payload stack g1, at viewpoint L:
        sender L++g1:   send_to [L++g2] <payload projection>
        receiver L++g2: <payload duties> ; recv_from [L++g1]
        third parties:  <payload duties>
    up [g] at L:   one message L -> L++g, same shape
    down [g] at L: one message L++g -> L

A process that both sends and receives the same message (a self
communication) sequences the send before the receive, which is safe
because channels are asynchronous.  The sender keeps the value it sent;
only the addresses a value's type says can use it ever consult it, so
the retained copy is inert.

The moved value must be entirely local to the sender: its type may not
mention a belief modality (such a payload would need messages between
several pairs of addresses and is rejected as not projectable).  A
payload type mentioning a function is projectable but flagged, since
such communications never fire choreographically; flagged networks are
excluded from agreement checking.

Case branches at every address other than the scrutinee's owner must
merge, i.e. be alpha-equal; a conflict means some third party would
need to know the outcome of a choice it cannot observe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .parser import Program
from .printer import expr_str, path_str
from .syntax import (
    Absurd, Annot, App, Arrow, Believes, Case, Down, Expr, Fst, Inl, Inr,
    Lam, Located, ModalLet, Pair, Path, Product, Send, Snd, Sum, Type,
    UnitVal, Up, Var, Void, belief_stack, children, ctx_bind, ctx_lock,
    fresh_name, path_concat, peel_stack, split_stack,
)
from .topology import Topology
from .typecheck import Checker, TypeCheckError, resolve_topology


class ProjectionError(Exception):
    """The program is not projectable at some construct."""


class MergeConflict(ProjectionError):
    pass


# ---------------------------------------------------------------------------
# Local expressions: the intuitionistic fragment plus four process forms.

@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class SendTo:
    dest: Path
    payload: "LocalExpr"


@dataclass(frozen=True)
class RecvFrom:
    src: Path


@dataclass(frozen=True)
class Seq:
    first: "LocalExpr"
    rest: "LocalExpr"


LocalExpr = Union[
    Skip, SendTo, RecvFrom, Seq,
    Var, Lam, App, Pair, Fst, Snd, Inl, Inr, Case, UnitVal, Absurd,
]

SKIP = Skip()


def local_str(e: LocalExpr, prec: int = 0) -> str:
    """Render a local process; seq binds loosest, below the keyword level."""
    def wrap(s: str, level: int) -> str:
        return f"({s})" if level < prec else s

    match e:
        case Skip():
            return "skip"
        case Seq(first, rest):
            return wrap(f"{local_str(first, 1)} ; {local_str(rest, 0)}", 0)
        case SendTo(dest, payload):
            return wrap(f"send_to {path_str(dest)} {local_str(payload, 2)}", 1)
        case RecvFrom(src):
            return f"recv_from {path_str(src)}"
        case Lam(var, body):
            return wrap(f"fun {var} -> {local_str(body, 1)}", 1)
        case Case(scrutinee, lv, lb, rv, rb):
            s = (f"case {local_str(scrutinee, 1)} of inl {lv} -> {local_str(lb, 1)}"
                 f" | inr {rv} -> {local_str(rb, 1)}")
            return wrap(s, 1)
        case App(fn, arg):
            return wrap(f"{local_str(fn, 2)} {local_str(arg, 3)}", 2)
        case Inl(inner):
            return wrap(f"inl {local_str(inner, 3)}", 3)
        case Inr(inner):
            return wrap(f"inr {local_str(inner, 3)}", 3)
        case Fst(inner):
            return wrap(f"fst {local_str(inner, 3)}", 3)
        case Snd(inner):
            return wrap(f"snd {local_str(inner, 3)}", 3)
        case Absurd(inner):
            return wrap(f"absurd {local_str(inner, 3)}", 3)
        case Var(name):
            return name
        case UnitVal():
            return "()"
        case Pair(left, right):
            return f"({local_str(left)}, {local_str(right)})"
    raise TypeError(f"not a local expression: {e!r}")


def local_free_vars(e: LocalExpr) -> frozenset[str]:
    match e:
        case Skip() | RecvFrom():
            return frozenset()
        case SendTo(_, payload):
            return local_free_vars(payload)
        case Seq(first, rest):
            return local_free_vars(first) | local_free_vars(rest)
        case Var(name):
            return frozenset((name,))
        case Lam(var, body):
            return local_free_vars(body) - {var}
        case Case(scrutinee, lv, lb, rv, rb):
            return (local_free_vars(scrutinee)
                    | (local_free_vars(lb) - {lv})
                    | (local_free_vars(rb) - {rv}))
        case _:
            out: frozenset[str] = frozenset()
            for child in children(e):
                out |= local_free_vars(child)
            return out


def local_substitute(e: LocalExpr, x: str, v: LocalExpr) -> LocalExpr:
    fvv = local_free_vars(v)

    def under_binder(var: str, body: LocalExpr) -> tuple[str, LocalExpr]:
        if var in fvv and x in local_free_vars(body):
            renamed = fresh_name(var, fvv | local_free_vars(body))
            return renamed, local_substitute(body, var, Var(renamed))
        return var, body

    def go(e: LocalExpr) -> LocalExpr:
        match e:
            case Skip() | RecvFrom() | UnitVal():
                return e
            case SendTo(dest, payload):
                return SendTo(dest, go(payload))
            case Seq(first, rest):
                return Seq(go(first), go(rest))
            case Var(name):
                return v if name == x else e
            case Lam(var, body):
                if var == x:
                    return e
                var, body = under_binder(var, body)
                return Lam(var, go(body))
            case Case(scrutinee, lv, lb, rv, rb):
                scrutinee = go(scrutinee)
                if lv != x:
                    lv, lb = under_binder(lv, lb)
                    lb = go(lb)
                if rv != x:
                    rv, rb = under_binder(rv, rb)
                    rb = go(rb)
                return Case(scrutinee, lv, lb, rv, rb)
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
        raise TypeError(f"not a local expression: {e!r}")

    return go(e)


def local_expr_equal(a: LocalExpr, b: LocalExpr) -> bool:
    """Alpha-equivalence of local processes."""

    def go(a, b, env1: dict[str, int], env2: dict[str, int], depth: int) -> bool:
        match a, b:
            case Skip(), Skip():
                return True
            case RecvFrom(s1), RecvFrom(s2):
                return s1 == s2
            case SendTo(d1, p1), SendTo(d2, p2):
                return d1 == d2 and go(p1, p2, env1, env2, depth)
            case Seq(f1, r1), Seq(f2, r2):
                return (go(f1, f2, env1, env2, depth)
                        and go(r1, r2, env1, env2, depth))
            case Var(n1), Var(n2):
                d1, d2 = env1.get(n1), env2.get(n2)
                if d1 is None and d2 is None:
                    return n1 == n2
                return d1 == d2
            case UnitVal(), UnitVal():
                return True
            case Lam(v1, b1), Lam(v2, b2):
                return go(b1, b2, {**env1, v1: depth}, {**env2, v2: depth}, depth + 1)
            case Case(s1, lv1, lb1, rv1, rb1), Case(s2, lv2, lb2, rv2, rb2):
                return (go(s1, s2, env1, env2, depth)
                        and go(lb1, lb2, {**env1, lv1: depth}, {**env2, lv2: depth}, depth + 1)
                        and go(rb1, rb2, {**env1, rv1: depth}, {**env2, rv2: depth}, depth + 1))
            case App(f1, a1), App(f2, a2):
                return go(f1, f2, env1, env2, depth) and go(a1, a2, env1, env2, depth)
            case Pair(l1, r1), Pair(l2, r2):
                return go(l1, l2, env1, env2, depth) and go(r1, r2, env1, env2, depth)
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
        return False

    return go(a, b, {}, {}, 0)


def merge(l1: LocalExpr, l2: LocalExpr) -> LocalExpr:
    """Equality merge of branch projections; conflicting behavior fails."""
    if local_expr_equal(l1, l2):
        return l1
    raise MergeConflict(
        f"branches project to different processes: "
        f"{local_str(l1)!r} vs {local_str(l2)!r}")


# ---------------------------------------------------------------------------
# Smart constructors: a node whose parts are all skip carries nothing.

def _mk_lam(var: str, body: LocalExpr) -> LocalExpr:
    return SKIP if body == SKIP else Lam(var, body)


def _mk_app(fn: LocalExpr, arg: LocalExpr) -> LocalExpr:
    return SKIP if fn == SKIP and arg == SKIP else App(fn, arg)


def _mk_pair(left: LocalExpr, right: LocalExpr) -> LocalExpr:
    return SKIP if left == SKIP and right == SKIP else Pair(left, right)


def _mk_unary(ctor, inner: LocalExpr) -> LocalExpr:
    return SKIP if inner == SKIP else ctor(inner)


def _mk_seq(first: LocalExpr, rest: LocalExpr) -> LocalExpr:
    return rest if first == SKIP else Seq(first, rest)


def _mk_case(scrutinee: LocalExpr, lv: str, lb: LocalExpr,
             rv: str, rb: LocalExpr) -> LocalExpr:
    if scrutinee == SKIP and lb == SKIP and rb == SKIP:
        return SKIP
    return Case(scrutinee, lv, lb, rv, rb)


# ---------------------------------------------------------------------------
# Type locality of wire payloads

def _contains_believes(ty: Type) -> bool:
    match ty:
        case Believes():
            return True
        case Product(left, right) | Sum(left, right):
            return _contains_believes(left) or _contains_believes(right)
        case Arrow(dom, cod):
            return _contains_believes(dom) or _contains_believes(cod)
        case _:
            return False


def _contains_arrow(ty: Type) -> bool:
    match ty:
        case Arrow():
            return True
        case Product(left, right) | Sum(left, right):
            return _contains_arrow(left) or _contains_arrow(right)
        case Believes(_, body):
            return _contains_arrow(body)
        case _:
            return False


@dataclass
class Network:
    processes: dict[Path, LocalExpr]
    result_address: Path
    lambda_wire: bool
    universe: frozenset[Path] = field(default_factory=frozenset)


class _NoAddress:
    """Target used by the scanning pass; equal to no address."""

    def __eq__(self, other) -> bool:
        return other is self

    def __hash__(self) -> int:
        return id(self)


class _Projector:
    """One walk of the typing derivation, projecting for a single target."""

    def __init__(self, topology: Topology, target):
        self.checker = Checker(topology)
        self.target = target
        self.participants: set[Path] = set()
        self.lambda_wire = False

    # -- bidirectional walk, mirroring the typechecker ------------------------

    def infer(self, ctx, e: Expr, L: Path) -> tuple[LocalExpr, Type]:
        g = self.target
        match e:
            case Var(name):
                ty = self.checker.infer(ctx, e)
                return Var(name), ty
            case UnitVal():
                return (UnitVal() if g == L else SKIP), self.checker.infer(ctx, e)
            case Located(agent, body):
                inside = path_concat(L, (agent,))
                self.participants.add(inside)
                le, ty = self.infer(ctx_lock(ctx, (agent,)), body, inside)
                return le, Believes(agent, ty)
            case Annot(inner, ty):
                return self.check(ctx, inner, ty, L), ty
            case ModalLet(g1, g2, var, bound, body):
                inside = path_concat(L, g1)
                self.participants.add(inside)
                be, bty = self.infer(ctx_lock(ctx, g1), bound, inside)
                core = peel_stack(bty, g2)
                if core is None:
                    raise TypeCheckError("BelievesE", "stack mismatch", e.span)
                inner_ctx = ctx_bind(ctx, var, core, path_concat(g1, g2))
                le, ty = self.infer(inner_ctx, body, L)
                if be == SKIP:
                    # This address holds no part of the bound value and has
                    # no duties computing it, so the binding is the skip
                    # value; substituting keeps uninvolved processes at skip.
                    return local_substitute(le, var, SKIP), ty
                return _mk_app(_mk_lam(var, le), be), ty
            case Send(payload, dest):
                pe, pty = self.infer(ctx, payload, L)
                g1, core = split_stack(pty)
                sender = path_concat(L, g1)
                receiver = path_concat(L, dest)
                le = self._comm(pe, core, sender, receiver, e)
                return le, _stack(dest, core)
            case Up(path, body):
                be, ty = self.infer(ctx, body, L)
                le = self._comm(be, ty, L, path_concat(L, path), e)
                return le, _stack(path, ty)
            case Down(path, body):
                be, ty = self.infer(ctx, body, L)
                core = peel_stack(ty, path)
                if core is None:
                    raise TypeCheckError("Down", "stack mismatch", e.span)
                le = self._comm(be, core, path_concat(L, path), L, e)
                return le, core
            case App(fn, arg):
                fe, fty = self.infer(ctx, fn, L)
                if not isinstance(fty, Arrow):
                    raise TypeCheckError("App", "non-function applied", e.span)
                ae = self.check(ctx, arg, fty.dom, L)
                return _mk_app(fe, ae), fty.cod
            case Pair(left, right):
                le, lt = self.infer(ctx, left, L)
                re_, rt = self.infer(ctx, right, L)
                return _mk_pair(le, re_), Product(lt, rt)
            case Fst(inner):
                ie, ty = self.infer(ctx, inner, L)
                if not isinstance(ty, Product):
                    raise TypeCheckError("Fst", "non-product", e.span)
                return _mk_unary(Fst, ie), ty.left
            case Snd(inner):
                ie, ty = self.infer(ctx, inner, L)
                if not isinstance(ty, Product):
                    raise TypeCheckError("Snd", "non-product", e.span)
                return _mk_unary(Snd, ie), ty.right
            case Case(scrutinee, lv, lb, rv, rb):
                se, sty = self.infer(ctx, scrutinee, L)
                if not isinstance(sty, Sum):
                    raise TypeCheckError("Case", "non-sum scrutinee", e.span)
                le, lt = self.infer(ctx_bind(ctx, lv, sty.left, ()), lb, L)
                re_, rt = self.infer(ctx_bind(ctx, rv, sty.right, ()), rb, L)
                if lt != rt:
                    raise TypeCheckError("Case", "branch types differ", e.span)
                return self._case(se, lv, le, rv, re_, L, e), lt
            case Lam() | Inl() | Inr() | Absurd():
                raise TypeCheckError("Infer", "not inferable", e.span)
        raise TypeError(f"not an expression: {e!r}")

    def check(self, ctx, e: Expr, ty: Type, L: Path) -> LocalExpr:
        match e:
            case Lam(var, body):
                if not isinstance(ty, Arrow):
                    raise TypeCheckError("Lam", "non-function type", e.span)
                be = self.check(ctx_bind(ctx, var, ty.dom, ()), body, ty.cod, L)
                return _mk_lam(var, be)
            # The next two cases go beyond the typechecker's checking mode.
            # They let canonical values (whose injections carry no
            # annotations, e.g. normal forms) be projected; on programs the
            # typechecker accepted they agree with the infer-and-compare
            # route.
            case Pair(left, right) if isinstance(ty, Product):
                return _mk_pair(self.check(ctx, left, ty.left, L),
                                self.check(ctx, right, ty.right, L))
            case Located(agent, body) if isinstance(ty, Believes) and ty.agent == agent:
                inside = path_concat(L, (agent,))
                self.participants.add(inside)
                return self.check(ctx_lock(ctx, (agent,)), body, ty.body, inside)
            case Inl(inner):
                if not isinstance(ty, Sum):
                    raise TypeCheckError("Inl", "non-sum type", e.span)
                return self._mk_inj(Inl, self.check(ctx, inner, ty.left, L), L)
            case Inr(inner):
                if not isinstance(ty, Sum):
                    raise TypeCheckError("Inr", "non-sum type", e.span)
                return self._mk_inj(Inr, self.check(ctx, inner, ty.right, L), L)
            case Absurd(inner):
                return _mk_unary(Absurd, self.check(ctx, inner, Void(), L))
            case Case(scrutinee, lv, lb, rv, rb):
                se, sty = self.infer(ctx, scrutinee, L)
                if not isinstance(sty, Sum):
                    raise TypeCheckError("Case", "non-sum scrutinee", e.span)
                le = self.check(ctx_bind(ctx, lv, sty.left, ()), lb, ty, L)
                re_ = self.check(ctx_bind(ctx, rv, sty.right, ()), rb, ty, L)
                return self._case(se, lv, le, rv, re_, L, e)
            case _:
                le, inferred = self.infer(ctx, e, L)
                if inferred != ty:
                    raise TypeCheckError("Mismatch", "type mismatch", e.span)
                return le

    def _mk_inj(self, ctor, inner: LocalExpr, L: Path) -> LocalExpr:
        # A sum tag is data belonging to the viewpoint that forms it: the
        # owner keeps the injection even over a hole, otherwise its own
        # case analysis would lose the choice.  Everyone else drops
        # content-free injections like any other empty structure.
        if self.target != L and inner == SKIP:
            return SKIP
        return ctor(inner)

    # -- communication and choice -------------------------------------------

    def _comm(self, payload: LocalExpr, moved_ty: Type, sender: Path,
              receiver: Path, site: Expr) -> LocalExpr:
        if _contains_believes(moved_ty):
            raise ProjectionError(
                f"communicated value of type with a nested modality cannot be "
                f"projected to a single message ({expr_str(site)})")
        if _contains_arrow(moved_ty):
            self.lambda_wire = True
        self.participants.add(sender)
        self.participants.add(receiver)
        g = self.target
        if g == sender and g == receiver:
            return Seq(SendTo(receiver, payload), RecvFrom(sender))
        if g == sender:
            return SendTo(receiver, payload)
        if g == receiver:
            return _mk_seq(payload, RecvFrom(sender))
        return payload

    def _case(self, se: LocalExpr, lv: str, le: LocalExpr, rv: str,
              re_: LocalExpr, L: Path, site: Expr) -> LocalExpr:
        if self.target != L:
            # Third parties must behave identically whichever branch runs.
            try:
                merge(le, local_substitute(re_, rv, Var(lv)))
            except MergeConflict as err:
                raise MergeConflict(
                    f"case at viewpoint {path_str(L)} is not projectable: {err}"
                ) from None
        return _mk_case(se, lv, le, rv, re_)


def _stack(g: Path, core: Type) -> Type:
    return belief_stack(g, core)


def _prefix_closure(paths: set[Path]) -> frozenset[Path]:
    out: set[Path] = set()
    for p in paths:
        for i in range(len(p) + 1):
            out.add(p[:i])
    return out


def _closed_main(program: Program) -> tuple[Expr, Type]:
    from .typecheck import inline_main
    if program.inputs:
        raise ProjectionError(
            "program has free inputs; substitute values for them first")
    return inline_main(program)


def project_expr(e: Expr, ty: Type, viewpoint: Path, target,
                 topology: Topology) -> tuple[LocalExpr, set[Path], bool]:
    """Project a closed, well-typed expression for one target address."""
    projector = _Projector(topology, target)
    local = projector.check((), e, ty, viewpoint)
    return local, projector.participants | {viewpoint}, projector.lambda_wire


def project(program: Program, g: Path, topology: Optional[Topology] = None,
            base_dir: str = ".") -> LocalExpr:
    if topology is None:
        topology = resolve_topology(program, base_dir=base_dir)
    e, ty = _closed_main(program)
    local, _, _ = project_expr(e, ty, (), g, topology)
    return local


def project_network(program: Program, topology: Optional[Topology] = None,
                    base_dir: str = ".") -> Network:
    if topology is None:
        topology = resolve_topology(program, base_dir=base_dir)
    e, ty = _closed_main(program)
    result_address, _ = split_stack(ty)
    # Scanning pass: discover participants and reject unprojectable shapes.
    _, participants, lambda_wire = project_expr(e, ty, (), _NoAddress(), topology)
    universe = _prefix_closure(participants | {result_address})
    processes: dict[Path, LocalExpr] = {}
    for address in sorted(universe):
        local, _, _ = project_expr(e, ty, (), address, topology)
        processes[address] = local
    return Network(processes, result_address, lambda_wire, frozenset(universe))
