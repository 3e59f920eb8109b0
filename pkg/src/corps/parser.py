"""Concrete syntax for Corps programs.

Grammar (`//` starts a line comment):

    program  ::= topo? input* def* mainDef
    topo     ::= "topology" (IDENT | STRING) ";"
    input    ::= "input" IDENT ":" type ";"
    def      ::= "def" IDENT ":" type "=" expr ";"
    mainDef  ::= "main" ":" type "=" expr ";"
    path     ::= "[" "]" | "[" AGENT ("." AGENT)* "]"
    type     ::= type "->" type | type "+" type | type "*" type
               | "unit" | "void" | path type | "(" type ")"
    expr     ::= "fun" IDENT "->" expr
               | "let" path path IDENT "=" expr "in" expr
               | "case" expr "of" "inl" IDENT "->" expr "|" "inr" IDENT "->" expr
               | "send" expr "to" path | "up" path expr | "down" path expr
               | "inl" expr | "inr" expr | "fst" expr | "snd" expr | "absurd" expr
               | expr expr | AGENT "." expr | IDENT | "()" | "(" expr "," expr ")"
               | "(" expr ":" type ")" | "(" expr ")"

Agents are uppercase-initial identifiers, variables lowercase-initial.
`->` is right-associative and binds loosest among the type operators,
then `+`, then `*`; a modality `[g] t` binds tightest.  Application is
left-associative; the payload of send/up/down is an application chain,
so payloads headed by a keyword form need parentheses.  A located body
`A.e` is an atom; compound bodies are written `A.(e)`.
"""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import (
    Absurd, Annot, App, Arrow, Believes, Case, Down, Expr, Fst, Inl, Inr,
    Lam, Located, ModalLet, Pair, Path, Product, Send, Snd, Span, Sum, Type,
    Unit, UnitVal, Up, Var, Void,
)

KEYWORDS = frozenset({
    "topology", "input", "def", "main", "let", "in", "send", "to", "up",
    "down", "fun", "fst", "snd", "inl", "inr", "case", "of", "absurd",
    "unit", "void", "true", "false",
})

_PUNCT = ("->", "()", "(", ")", "[", "]", ".", ",", ";", ":", "|", "=", "+", "*")


class ParseError(Exception):
    def __init__(self, message: str, span: Span, expected: frozenset[str] = frozenset()):
        super().__init__(message)
        self.message = message
        self.span = span
        self.expected = expected

    def __str__(self) -> str:
        note = ""
        if self.expected:
            note = " (expected " + ", ".join(sorted(self.expected)) + ")"
        return f"{self.span}: {self.message}{note}"


@dataclass(frozen=True)
class Token:
    kind: str     # punctuation/keyword text, or "ident" / "agent" / "string" / "eof"
    text: str
    start: int
    end: int


def _lex(text: str, file: str) -> list[Token]:
    tokens: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 1
            if j >= n:
                raise ParseError("unterminated string", Span(file, i, n))
            tokens.append(Token("string", text[i + 1:j], i, j + 1))
            i = j + 1
            continue
        if c.isalpha():
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            if word in KEYWORDS:
                kind = word
            elif word[0].isupper():
                kind = "agent"
            else:
                kind = "ident"
            tokens.append(Token(kind, word, i, j))
            i = j
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                tokens.append(Token(p, p, i, i + len(p)))
                i += len(p)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", Span(file, i, i + 1))
    tokens.append(Token("eof", "", n, n))
    return tokens


# Kinds that may start an atom / a unary / an expression.
_ATOM_START = frozenset({"(", "()", "ident", "agent"})
_UNARY_KW = frozenset({"inl", "inr", "fst", "snd", "absurd"})
_UNARY_START = _ATOM_START | _UNARY_KW
_EXPR_KW = frozenset({"fun", "let", "case", "send", "up", "down"})


@dataclass(frozen=True)
class Program:
    topology_ref: str | None
    inputs: tuple[tuple[str, Type], ...]
    defs: tuple[tuple[str, Type, Expr], ...]
    main_type: Type
    main_expr: Expr


class _Parser:
    def __init__(self, text: str, file: str):
        self.tokens = _lex(text, file)
        self.file = file
        self.pos = 0

    # -- token plumbing -----------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, *kinds: str) -> bool:
        return self.peek().kind in kinds

    def expect(self, kind: str, what: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise self.error(f"found {tok.text or 'end of input'!r}",
                             expected=frozenset({what or kind}))
        return self.advance()

    def error(self, message: str, expected: frozenset[str] = frozenset()) -> ParseError:
        tok = self.peek()
        return ParseError(message, Span(self.file, tok.start, max(tok.end, tok.start + 1)),
                          expected)

    def span_from(self, start: int) -> Span:
        end = self.tokens[self.pos - 1].end if self.pos else start
        return Span(self.file, start, max(end, start))

    # -- paths and types ----------------------------------------------------

    def path(self) -> Path:
        self.expect("[")
        if self.at("]"):
            self.advance()
            return ()
        parts = [self.expect("agent", "agent name").text]
        while self.at("."):
            self.advance()
            parts.append(self.expect("agent", "agent name").text)
        self.expect("]")
        return tuple(parts)

    def type_(self) -> Type:
        left = self.type_sum()
        if self.at("->"):
            self.advance()
            return Arrow(left, self.type_())
        return left

    def type_sum(self) -> Type:
        left = self.type_product()
        while self.at("+"):
            self.advance()
            left = Sum(left, self.type_product())
        return left

    def type_product(self) -> Type:
        left = self.type_modal()
        while self.at("*"):
            self.advance()
            left = Product(left, self.type_modal())
        return left

    def type_modal(self) -> Type:
        if self.at("["):
            g = self.path()
            body = self.type_modal()
            for name in reversed(g):
                body = Believes(name, body)
            return body
        return self.type_atom()

    def type_atom(self) -> Type:
        tok = self.peek()
        if tok.kind == "unit":
            self.advance()
            return Unit()
        if tok.kind == "void":
            self.advance()
            return Void()
        if tok.kind == "(":
            self.advance()
            ty = self.type_()
            self.expect(")")
            return ty
        raise self.error(f"found {tok.text or 'end of input'!r} where a type was expected",
                         expected=frozenset({"unit", "void", "(", "["}))

    # -- expressions ----------------------------------------------------------

    def expr(self) -> Expr:
        tok = self.peek()
        start = tok.start
        match tok.kind:
            case "fun":
                self.advance()
                var = self.expect("ident", "variable").text
                self.expect("->")
                body = self.expr()
                return Lam(var, body, span=self.span_from(start))
            case "let":
                self.advance()
                g1 = self.path()
                g2 = self.path()
                var = self.expect("ident", "variable").text
                self.expect("=")
                bound = self.expr()
                self.expect("in")
                body = self.expr()
                return ModalLet(g1, g2, var, bound, body, span=self.span_from(start))
            case "case":
                self.advance()
                scrutinee = self.expr()
                self.expect("of")
                self.expect("inl")
                lv = self.expect("ident", "variable").text
                self.expect("->")
                lb = self.expr()
                self.expect("|")
                self.expect("inr")
                rv = self.expect("ident", "variable").text
                self.expect("->")
                rb = self.expr()
                return Case(scrutinee, lv, lb, rv, rb, span=self.span_from(start))
            case "send":
                self.advance()
                payload = self.app()
                self.expect("to")
                dest = self.path()
                return Send(payload, dest, span=self.span_from(start))
            case "up":
                self.advance()
                g = self.path()
                body = self.app()
                return Up(g, body, span=self.span_from(start))
            case "down":
                self.advance()
                g = self.path()
                body = self.app()
                return Down(g, body, span=self.span_from(start))
            case _:
                return self.app()

    def app(self) -> Expr:
        start = self.peek().start
        e = self.unary()
        while self.peek().kind in _UNARY_START:
            arg = self.unary()
            e = App(e, arg, span=self.span_from(start))
        return e

    def unary(self) -> Expr:
        tok = self.peek()
        start = tok.start
        if tok.kind in _UNARY_KW:
            self.advance()
            inner = self.unary()
            span = self.span_from(start)
            match tok.kind:
                case "inl":
                    return Inl(inner, span=span)
                case "inr":
                    return Inr(inner, span=span)
                case "fst":
                    return Fst(inner, span=span)
                case "snd":
                    return Snd(inner, span=span)
                case _:
                    return Absurd(inner, span=span)
        return self.atom()

    def atom(self) -> Expr:
        tok = self.peek()
        start = tok.start
        match tok.kind:
            case "()":
                self.advance()
                return UnitVal(span=self.span_from(start))
            case "ident":
                self.advance()
                return Var(tok.text, span=self.span_from(start))
            case "agent":
                self.advance()
                self.expect(".")
                body = self.atom()
                return Located(tok.text, body, span=self.span_from(start))
            case "(":
                self.advance()
                if self.at(")"):
                    self.advance()
                    return UnitVal(span=self.span_from(start))
                e = self.expr()
                if self.at(","):
                    self.advance()
                    right = self.expr()
                    self.expect(")")
                    return Pair(e, right, span=self.span_from(start))
                if self.at(":"):
                    self.advance()
                    ty = self.type_()
                    self.expect(")")
                    return Annot(e, ty, span=self.span_from(start))
                self.expect(")")
                return e
            case _:
                raise self.error(
                    f"found {tok.text or 'end of input'!r} where an expression was expected",
                    expected=frozenset({"(", "()", "identifier", "agent"}))

    # -- program structure ----------------------------------------------------

    def program(self) -> Program:
        topology_ref = None
        if self.at("topology"):
            self.advance()
            tok = self.peek()
            if tok.kind in ("ident", "string"):
                topology_ref = tok.text
                self.advance()
            else:
                raise self.error("topology expects a preset name or a quoted path",
                                 expected=frozenset({"identifier", "string"}))
            self.expect(";")
        inputs: list[tuple[str, Type]] = []
        while self.at("input"):
            self.advance()
            name = self.expect("ident", "input name").text
            self.expect(":")
            ty = self.type_()
            self.expect(";")
            inputs.append((name, ty))
        defs: list[tuple[str, Type, Expr]] = []
        while self.at("def"):
            self.advance()
            name = self.expect("ident", "definition name").text
            self.expect(":")
            ty = self.type_()
            self.expect("=")
            body = self.expr()
            self.expect(";")
            if any(name == seen for seen, _, _ in defs) or any(name == seen for seen, _ in inputs):
                raise ParseError(f"duplicate definition of {name!r}",
                                 Span(self.file, self.tokens[self.pos - 1].start,
                                      self.tokens[self.pos - 1].end))
            defs.append((name, ty, body))
        self.expect("main")
        self.expect(":")
        main_type = self.type_()
        self.expect("=")
        main_expr = self.expr()
        self.expect(";")
        self.expect("eof", "end of input")
        return Program(topology_ref, tuple(inputs), tuple(defs), main_type, main_expr)


def parse_program(text: str, file: str = "<input>") -> Program:
    return _Parser(text, file).program()


def parse_expr(text: str, file: str = "<input>") -> Expr:
    p = _Parser(text, file)
    e = p.expr()
    p.expect("eof", "end of input")
    return e


def parse_type(text: str, file: str = "<input>") -> Type:
    p = _Parser(text, file)
    ty = p.type_()
    p.expect("eof", "end of input")
    return ty


def parse_path(text: str, file: str = "<input>") -> Path:
    p = _Parser(text, file)
    g = p.path()
    p.expect("eof", "end of input")
    return g
