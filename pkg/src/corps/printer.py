"""Pretty-printer; output reparses to an alpha-equivalent tree.

Expression precedence levels: 0 keyword forms, 1 application, 2 unary
operators, 3 atoms.  A subexpression is parenthesized whenever its own
level is below the level its position requires.
"""

from __future__ import annotations

from .syntax import (
    Absurd, Annot, App, Arrow, Believes, Case, Down, Expr, Fst, Inl, Inr,
    Lam, Located, ModalLet, Pair, Path, Product, Send, Snd, Sum, Type, Unit,
    UnitVal, Up, Var, Void, split_stack,
)

_KEYWORD, _APP, _UNARY, _ATOM = 0, 1, 2, 3


def path_str(g: Path) -> str:
    return "[" + ".".join(g) + "]"


def type_str(ty: Type, prec: int = 0) -> str:
    # Type precedence: arrow 0 (right-assoc), sum 1, product 2, modality 3.
    match ty:
        case Unit():
            return "unit"
        case Void():
            return "void"
        case Arrow(dom, cod):
            s = f"{type_str(dom, 1)} -> {type_str(cod, 0)}"
            return f"({s})" if prec > 0 else s
        case Sum(left, right):
            s = f"{type_str(left, 1)} + {type_str(right, 2)}"
            return f"({s})" if prec > 1 else s
        case Product(left, right):
            s = f"{type_str(left, 2)} * {type_str(right, 3)}"
            return f"({s})" if prec > 2 else s
        case Believes():
            stack, core = split_stack(ty)
            s = f"{path_str(stack)} {type_str(core, 3)}"
            return f"({s})" if prec > 3 else s
    raise TypeError(f"not a type: {ty!r}")


def expr_str(e: Expr, prec: int = _KEYWORD) -> str:
    def wrap(s: str, level: int) -> str:
        return f"({s})" if level < prec else s

    match e:
        case Var(name):
            return name
        case UnitVal():
            return "()"
        case Pair(left, right):
            return f"({expr_str(left)}, {expr_str(right)})"
        case Annot(inner, ty):
            return f"({expr_str(inner)} : {type_str(ty)})"
        case Located(agent, body):
            return f"{agent}.{expr_str(body, _ATOM)}"
        case Lam(var, body):
            return wrap(f"fun {var} -> {expr_str(body)}", _KEYWORD)
        case ModalLet(g1, g2, var, bound, body):
            s = (f"let {path_str(g1)} {path_str(g2)} {var} = "
                 f"{expr_str(bound)} in {expr_str(body)}")
            return wrap(s, _KEYWORD)
        case Case(scrutinee, lv, lb, rv, rb):
            s = (f"case {expr_str(scrutinee)} of inl {lv} -> {expr_str(lb)}"
                 f" | inr {rv} -> {expr_str(rb)}")
            return wrap(s, _KEYWORD)
        case Send(payload, dest):
            return wrap(f"send {expr_str(payload, _APP)} to {path_str(dest)}", _KEYWORD)
        case Up(path, body):
            return wrap(f"up {path_str(path)} {expr_str(body, _APP)}", _KEYWORD)
        case Down(path, body):
            return wrap(f"down {path_str(path)} {expr_str(body, _APP)}", _KEYWORD)
        case App(fn, arg):
            return wrap(f"{expr_str(fn, _APP)} {expr_str(arg, _UNARY)}", _APP)
        case Inl(inner):
            return wrap(f"inl {expr_str(inner, _UNARY)}", _UNARY)
        case Inr(inner):
            return wrap(f"inr {expr_str(inner, _UNARY)}", _UNARY)
        case Fst(inner):
            return wrap(f"fst {expr_str(inner, _UNARY)}", _UNARY)
        case Snd(inner):
            return wrap(f"snd {expr_str(inner, _UNARY)}", _UNARY)
        case Absurd(inner):
            return wrap(f"absurd {expr_str(inner, _UNARY)}", _UNARY)
    raise TypeError(f"not an expression: {e!r}")


def pretty_print(program) -> str:
    lines: list[str] = []
    if program.topology_ref is not None:
        ref = program.topology_ref
        if ref.isidentifier() and ref[0].islower():
            lines.append(f"topology {ref};")
        else:
            lines.append(f'topology "{ref}";')
    for name, ty in program.inputs:
        lines.append(f"input {name} : {type_str(ty)};")
    for name, ty, body in program.defs:
        lines.append(f"def {name} : {type_str(ty)} = {expr_str(body)};")
    lines.append(f"main : {type_str(program.main_type)} = {expr_str(program.main_expr)};")
    return "\n".join(lines) + "\n"
