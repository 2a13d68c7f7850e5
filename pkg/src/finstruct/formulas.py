"""Formula syntax for the two-sorted logic, with a text format.

Quantifiers carry the bound variable's arity: arity 0 ranges over atoms
(plus the undefined value), arity >= 1 over finite functions.  The text
syntax is ``omega``, ``f(t1,...,tk)``, ``t = q``, ``t != q``, ``!``, ``&``,
``|``, ``->``, ``A x.`` and ``E f^2.`` with parentheses; ``->`` is
right-associative and binds loosest, quantifier scope extends maximally.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterator

from .structures import App, BindingError, FormatError, Omega, OMEGA, Term, app


@dataclass(frozen=True)
class Formula:
    pass


@dataclass(frozen=True)
class Eq(Formula):
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class Not(Formula):
    body: Formula


@dataclass(frozen=True)
class And(Formula):
    lhs: Formula
    rhs: Formula


@dataclass(frozen=True)
class Or(Formula):
    lhs: Formula
    rhs: Formula


@dataclass(frozen=True)
class Implies(Formula):
    lhs: Formula
    rhs: Formula


@dataclass(frozen=True)
class Forall(Formula):
    var: str
    arity: int
    body: Formula
    hint: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    arity: int
    body: Formula
    hint: object = field(default=None, compare=False, repr=False)


TRUE: Formula = Eq(OMEGA, OMEGA)
FALSE: Formula = Not(TRUE)


def eq(lhs: Term, rhs: Term) -> Formula:
    return Eq(lhs, rhs)


def neq(lhs: Term, rhs: Term) -> Formula:
    return Not(Eq(lhs, rhs))


def defined(t: Term) -> Formula:
    return neq(t, OMEGA)


def undefined(t: Term) -> Formula:
    return Eq(t, OMEGA)


def conj(parts) -> Formula:
    parts = list(parts)
    if not parts:
        return TRUE
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def disj(parts) -> Formula:
    parts = list(parts)
    if not parts:
        return FALSE
    out = parts[0]
    for p in parts[1:]:
        out = Or(out, p)
    return out


def forall(vars_with_arity, body: Formula) -> Formula:
    for name, k in reversed(list(vars_with_arity)):
        body = Forall(name, k, body)
    return body


def exists(vars_with_arity, body: Formula, hint=None) -> Formula:
    items = list(vars_with_arity)
    for i, (name, k) in enumerate(reversed(items)):
        if i == len(items) - 1:
            body = Exists(name, k, body, hint=hint)
        else:
            body = Exists(name, k, body)
    return body


# ---------------------------------------------------------------------------
# Syntactic analysis


def free_vars(phi: Formula) -> dict[str, int]:
    """Free variables with arities; raises on inconsistent arity usage."""
    out: dict[str, int] = {}

    def note(name: str, k: int, bound: dict[str, int]):
        if name in bound:
            if bound[name] != k:
                raise BindingError(f"{name!r} bound with arity {bound[name]}, used with {k}")
            return
        if out.setdefault(name, k) != k:
            raise BindingError(f"{name!r} used with arities {out[name]} and {k}")

    def walk_term(t: Term, bound: dict[str, int]):
        if isinstance(t, App):
            note(t.name, len(t.args), bound)
            for a in t.args:
                walk_term(a, bound)

    def walk(f: Formula, bound: dict[str, int]):
        if isinstance(f, Eq):
            walk_term(f.lhs, bound)
            walk_term(f.rhs, bound)
        elif isinstance(f, Not):
            walk(f.body, bound)
        elif isinstance(f, (And, Or, Implies)):
            walk(f.lhs, bound)
            walk(f.rhs, bound)
        elif isinstance(f, (Forall, Exists)):
            inner = dict(bound)
            inner[f.var] = f.arity
            walk(f.body, inner)
        else:
            raise TypeError(f"not a formula: {f!r}")

    walk(phi, {})
    return out


def is_first_order(phi: Formula) -> bool:
    if isinstance(phi, Eq):
        return True
    if isinstance(phi, Not):
        return is_first_order(phi.body)
    if isinstance(phi, (And, Or, Implies)):
        return is_first_order(phi.lhs) and is_first_order(phi.rhs)
    if isinstance(phi, (Forall, Exists)):
        return phi.arity == 0 and is_first_order(phi.body)
    raise TypeError(f"not a formula: {phi!r}")


def is_quantifier_free(phi: Formula) -> bool:
    if isinstance(phi, Eq):
        return True
    if isinstance(phi, Not):
        return is_quantifier_free(phi.body)
    if isinstance(phi, (And, Or, Implies)):
        return is_quantifier_free(phi.lhs) and is_quantifier_free(phi.rhs)
    return False


def count_atomic_quantifiers(phi: Formula) -> int:
    if isinstance(phi, Eq):
        return 0
    if isinstance(phi, Not):
        return count_atomic_quantifiers(phi.body)
    if isinstance(phi, (And, Or, Implies)):
        return count_atomic_quantifiers(phi.lhs) + count_atomic_quantifiers(phi.rhs)
    if isinstance(phi, (Forall, Exists)):
        return (1 if phi.arity == 0 else 0) + count_atomic_quantifiers(phi.body)
    raise TypeError(f"not a formula: {phi!r}")


def strip_existential_prefix(phi: Formula) -> tuple[list[tuple[str, int]], Formula]:
    prefix: list[tuple[str, int]] = []
    while isinstance(phi, Exists):
        prefix.append((phi.var, phi.arity))
        phi = phi.body
    return prefix, phi


def conjuncts(phi: Formula) -> Iterator[Formula]:
    if isinstance(phi, And):
        yield from conjuncts(phi.lhs)
        yield from conjuncts(phi.rhs)
    else:
        yield phi


def rename_term(t: Term, mapping: dict[str, str]) -> Term:
    if isinstance(t, Omega):
        return t
    assert isinstance(t, App)
    return App(mapping.get(t.name, t.name), tuple(rename_term(a, mapping) for a in t.args))


def rename_free(phi: Formula, mapping: dict[str, str]) -> Formula:
    """Rename free identifiers.  New names must not collide with bound ones."""
    if isinstance(phi, Eq):
        return Eq(rename_term(phi.lhs, mapping), rename_term(phi.rhs, mapping))
    if isinstance(phi, Not):
        return Not(rename_free(phi.body, mapping))
    if isinstance(phi, (And, Or, Implies)):
        return type(phi)(rename_free(phi.lhs, mapping), rename_free(phi.rhs, mapping))
    if isinstance(phi, (Forall, Exists)):
        if phi.var in mapping.values():
            raise BindingError(f"renaming would capture bound variable {phi.var!r}")
        inner = {k: v for k, v in mapping.items() if k != phi.var}
        return type(phi)(phi.var, phi.arity, rename_free(phi.body, inner), hint=phi.hint)
    raise TypeError(f"not a formula: {phi!r}")


# ---------------------------------------------------------------------------
# Printing

_PREC_IMPLIES = 1
_PREC_OR = 2
_PREC_AND = 3
_PREC_NOT = 4


def print_term(t: Term) -> str:
    if isinstance(t, Omega):
        return "omega"
    assert isinstance(t, App)
    if not t.args:
        return t.name
    return f"{t.name}({', '.join(print_term(a) for a in t.args)})"


def print_formula(phi: Formula) -> str:
    def go(f: Formula, prec: int) -> str:
        if isinstance(f, Eq):
            return f"{print_term(f.lhs)} = {print_term(f.rhs)}"
        if isinstance(f, Not):
            if isinstance(f.body, Eq):
                return f"{print_term(f.body.lhs)} != {print_term(f.body.rhs)}"
            return wrap(f"!{go(f.body, _PREC_NOT)}", _PREC_NOT, prec)
        if isinstance(f, And):
            return wrap(f"{go(f.lhs, _PREC_AND)} & {go(f.rhs, _PREC_AND + 1)}", _PREC_AND, prec)
        if isinstance(f, Or):
            return wrap(f"{go(f.lhs, _PREC_OR)} | {go(f.rhs, _PREC_OR + 1)}", _PREC_OR, prec)
        if isinstance(f, Implies):
            return wrap(
                f"{go(f.lhs, _PREC_IMPLIES + 1)} -> {go(f.rhs, _PREC_IMPLIES)}",
                _PREC_IMPLIES,
                prec,
            )
        if isinstance(f, (Forall, Exists)):
            q = "A" if isinstance(f, Forall) else "E"
            v = f.var if f.arity == 0 else f"{f.var}^{f.arity}"
            return wrap(f"{q} {v}. {go(f.body, 0)}", 0, prec)
        raise TypeError(f"not a formula: {f!r}")

    def wrap(s: str, mine: int, outer: int) -> str:
        return f"({s})" if mine < outer else s

    # equations sit above ! in precedence; they never need parens themselves
    return go(phi, 0)


# ---------------------------------------------------------------------------
# Parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<arrow>->)|(?P<neq>!=)|(?P<punct>[()=.,&|!^])|(?P<name>[A-Za-z_][A-Za-z_0-9']*)|(?P<int>\d+))"
)


def _tokenize(text: str) -> list[str]:
    tokens: list[str] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            rest = text[pos:].strip()
            if not rest:
                break
            raise FormatError(f"unexpected character {rest[0]!r} at offset {pos}")
        tokens.append(m.group(m.lastgroup))  # type: ignore[arg-type]
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> str:
        tok = self.peek()
        if tok is None:
            raise FormatError("unexpected end of input")
        self.pos += 1
        return tok

    def expect(self, tok: str):
        got = self.next()
        if got != tok:
            raise FormatError(f"expected {tok!r}, got {got!r}")

    def parse_formula(self) -> Formula:
        f = self.parse_implies()
        if self.peek() is not None:
            raise FormatError(f"trailing input at token {self.peek()!r}")
        return f

    def parse_implies(self) -> Formula:
        lhs = self.parse_or()
        if self.peek() == "->":
            self.next()
            return Implies(lhs, self.parse_implies())
        return lhs

    def parse_or(self) -> Formula:
        out = self.parse_and()
        while self.peek() == "|":
            self.next()
            out = Or(out, self.parse_and())
        return out

    def parse_and(self) -> Formula:
        out = self.parse_unary()
        while self.peek() == "&":
            self.next()
            out = And(out, self.parse_unary())
        return out

    def parse_unary(self) -> Formula:
        tok = self.peek()
        if tok == "!":
            self.next()
            return Not(self.parse_unary())
        if tok in ("A", "E"):
            self.next()
            var = self.next()
            if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9']*", var or ""):
                raise FormatError(f"bad quantified variable {var!r}")
            arity = 0
            if self.peek() == "^":
                self.next()
                num = self.next()
                if not num.isdigit():
                    raise FormatError(f"bad arity {num!r}")
                arity = int(num)
            self.expect(".")
            body = self.parse_implies()
            return (Forall if tok == "A" else Exists)(var, arity, body)
        if tok == "(":
            self.next()
            inner = self.parse_implies()
            self.expect(")")
            return inner
        return self.parse_equation()

    def parse_equation(self) -> Formula:
        lhs = self.parse_term()
        tok = self.next()
        if tok == "=":
            return Eq(lhs, self.parse_term())
        if tok == "!=":
            return Not(Eq(lhs, self.parse_term()))
        raise FormatError(f"expected '=' or '!=', got {tok!r}")

    def parse_term(self) -> Term:
        tok = self.next()
        if tok == "omega":
            return OMEGA
        if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9']*", tok or ""):
            raise FormatError(f"expected a term, got {tok!r}")
        if self.peek() == "(":
            self.next()
            args = [self.parse_term()]
            while self.peek() == ",":
                self.next()
                args.append(self.parse_term())
            self.expect(")")
            return App(tok, tuple(args))
        return App(tok)


def parse_formula(text: str) -> Formula:
    """Parse the .fml syntax.  ``A``/``E`` and ``omega`` are reserved words."""
    return _Parser(_tokenize(text)).parse_formula()


def parse_term(text: str) -> Term:
    p = _Parser(_tokenize(text))
    t = p.parse_term()
    if p.peek() is not None:
        raise FormatError(f"trailing input at token {p.peek()!r}")
    return t
