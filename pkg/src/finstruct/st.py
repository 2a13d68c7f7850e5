"""The ST structure-transformation language: syntax and big-step semantics.

Programs are built from four revisions plus sequencing, branching, and
guarded iteration.  Guards are quantifier-free formulas over the program's
identifiers (a flag admits full first-order guards).  Revisions are total:
an extension on an already-defined point, an inception of a defined token,
or a contraction of an undefined point are no-ops.

Concrete syntax::

    f(t1,...,tk) := q      extension (adds an entry only if the point is free)
    f(t1,...,tk) <- q      assignment sugar: 4-revision sequence via a memo token
    undef f(t1,...,tk)     contraction
    c!                     inception (bind token c to a fresh atom)
    delete c               deletion (remove the token's atom everywhere)
    P ; Q                  sequencing
    if [G] {P} {Q}         branching
    do [G] {P}             iterate P while G holds
    skip                   no-op
    # comment              to end of line

Terms and guards use the formula syntax of :mod:`finstruct.formulas`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator

from .structures import (
    AFunction,
    App,
    AtomAllocator,
    FormatError,
    Omega,
    Structure,
    Term,
    VocabularyError,
    eval_term,
    is_standard,
)
from .formulas import (
    Formula,
    free_vars,
    is_first_order,
    is_quantifier_free,
    print_formula,
    print_term,
    _Parser,
    _tokenize,
)
from .logic import EvalConfig, eval_fo


# ---------------------------------------------------------------------------
# Syntax


@dataclass(frozen=True)
class Revision:
    pass


@dataclass(frozen=True)
class Extension(Revision):
    name: str
    args: tuple[Term, ...]
    value: Term


@dataclass(frozen=True)
class Inception(Revision):
    token: str


@dataclass(frozen=True)
class Contraction(Revision):
    name: str
    args: tuple[Term, ...]


@dataclass(frozen=True)
class Deletion(Revision):
    token: str


@dataclass(frozen=True)
class Program:
    pass


@dataclass(frozen=True)
class Rev(Program):
    revision: Revision


@dataclass(frozen=True)
class Seq(Program):
    first: Program
    second: Program


@dataclass(frozen=True)
class If(Program):
    guard: Formula
    then: Program
    orelse: Program


@dataclass(frozen=True)
class Do(Program):
    guard: Formula
    body: Program


SKIP = Rev(Contraction("skip_token", ()))


def seq_of(parts) -> Program:
    parts = list(parts)
    if not parts:
        return SKIP
    out = parts[0]
    for p in parts[1:]:
        out = Seq(out, p)
    return out


def assignment(name: str, args: tuple[Term, ...], value: Term, memo: str) -> Program:
    """The 4-revision desugaring of ``f(t..) <- q``.

    The memo token records q's value first, since the contraction may make
    q inaccessible.
    """
    return seq_of(
        [
            Rev(Extension(memo, (), value)),
            Rev(Contraction(name, args)),
            Rev(Extension(name, args, App(memo))),
            Rev(Contraction(memo, ())),
        ]
    )


def program_identifiers(p: Program, acc: dict[str, int] | None = None) -> dict[str, int]:
    """All identifiers a program can touch, with arities."""
    from .structures import term_identifiers

    if acc is None:
        acc = {}

    def note(name, k):
        if acc.setdefault(name, k) != k:
            raise VocabularyError(f"identifier {name!r} used with arities {acc[name]} and {k}")

    if isinstance(p, Rev):
        r = p.revision
        if isinstance(r, Extension):
            note(r.name, len(r.args))
            for t in r.args:
                term_identifiers(t, acc)
            term_identifiers(r.value, acc)
        elif isinstance(r, Contraction):
            note(r.name, len(r.args))
            for t in r.args:
                term_identifiers(t, acc)
        elif isinstance(r, (Inception, Deletion)):
            note(r.token, 0)
    elif isinstance(p, Seq):
        program_identifiers(p.first, acc)
        program_identifiers(p.second, acc)
    elif isinstance(p, (If, Do)):
        for name, k in free_vars(p.guard).items():
            note(name, k)
        if isinstance(p, If):
            program_identifiers(p.then, acc)
            program_identifiers(p.orelse, acc)
        else:
            program_identifiers(p.body, acc)
    return acc


# ---------------------------------------------------------------------------
# Parsing and printing


class _StParser(_Parser):
    def __init__(self, tokens, allow_fo_guards=False):
        super().__init__(tokens)
        self.allow_fo_guards = allow_fo_guards
        self.memo_count = 0

    def fresh_memo(self) -> str:
        self.memo_count += 1
        return f"memo_{self.memo_count}"

    def parse_program(self) -> Program:
        p = self.parse_seq()
        if self.peek() is not None:
            raise FormatError(f"trailing input at token {self.peek()!r}")
        return p

    def parse_seq(self) -> Program:
        parts = [self.parse_stmt()]
        while self.peek() == ";":
            self.next()
            if self.peek() in (None, "}", ")"):
                break  # tolerate a trailing separator
            parts.append(self.parse_stmt())
        return seq_of(parts)

    def parse_stmt(self) -> Program:
        tok = self.peek()
        if tok == "skip":
            self.next()
            return SKIP
        if tok == "undef":
            self.next()
            t = self.parse_term()
            if not isinstance(t, App):
                raise FormatError("undef needs an application or token")
            self._require_standard_args(t.args)
            return Rev(Contraction(t.name, t.args))
        if tok == "delete":
            self.next()
            t = self.parse_term()
            if not isinstance(t, App) or t.args:
                raise FormatError("delete needs a token")
            return Rev(Deletion(t.name))
        if tok == "if":
            self.next()
            guard = self.parse_guard()
            self.expect("{")
            then = self.parse_seq()
            self.expect("}")
            self.expect("{")
            orelse = self.parse_seq()
            self.expect("}")
            return If(guard, then, orelse)
        if tok == "do":
            self.next()
            guard = self.parse_guard()
            self.expect("{")
            body = self.parse_seq()
            self.expect("}")
            return Do(guard, body)
        # extension, assignment, or inception
        t = self.parse_term()
        if not isinstance(t, App):
            raise FormatError("a statement cannot start with omega")
        nxt = self.peek()
        if nxt == "!":
            self.next()
            if t.args:
                raise FormatError("inception needs a token")
            return Rev(Inception(t.name))
        if nxt == ":" :
            self.next()
            self.expect("=")
            self._require_standard_args(t.args)
            return Rev(Extension(t.name, t.args, self.parse_term()))
        if nxt == "<":
            self.next()
            self.expect("-")
            self._require_standard_args(t.args)
            return assignment(t.name, t.args, self.parse_term(), self.fresh_memo())
        raise FormatError(f"expected ':=', '<-' or '!' after a term, got {nxt!r}")

    def parse_guard(self) -> Formula:
        self.expect("[")
        # delegate to the formula grammar up to the matching bracket
        depth = 0
        sub = []
        while True:
            tok = self.peek()
            if tok is None:
                raise FormatError("unterminated guard")
            if tok == "[":
                depth += 1
            if tok == "]":
                if depth == 0:
                    self.next()
                    break
                depth -= 1
            sub.append(self.next())
        guard = _Parser(sub).parse_formula()
        if self.allow_fo_guards:
            if not is_first_order(guard):
                raise FormatError("guards must be first-order")
        elif not is_quantifier_free(guard):
            raise FormatError("guards must be quantifier-free (pass allow_fo_guards to relax)")
        return guard

    def _require_standard_args(self, args) -> None:
        for a in args:
            if not is_standard(a):
                raise FormatError("revision argument terms must be omega-free")


_ST_TOKEN_RE = re.compile(
    r"\s*(?:(?P<arrow>->)|(?P<neq>!=)|(?P<punct>[()=.,&|!^\[\]{};:<-])|"
    r"(?P<name>[A-Za-z_][A-Za-z_0-9']*)|(?P<int>\d+))"
)


def _st_tokenize(text: str) -> list[str]:
    out: list[str] = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0]
        pos = 0
        while pos < len(line):
            m = _ST_TOKEN_RE.match(line, pos)
            if m is None:
                rest = line[pos:].strip()
                if not rest:
                    break
                raise FormatError(f"unexpected character {rest[0]!r} in {raw.strip()!r}")
            out.append(m.group(m.lastgroup))  # type: ignore[arg-type]
            pos = m.end()
    return out


def parse_program(text: str, allow_fo_guards: bool = False) -> Program:
    """Parse the .st syntax into a program AST."""
    return _StParser(_st_tokenize(text), allow_fo_guards).parse_program()


def print_program(p: Program, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(p, Rev):
        r = p.revision
        if p == SKIP:
            return f"{pad}skip"
        if isinstance(r, Extension):
            head = r.name if not r.args else f"{r.name}({', '.join(map(print_term, r.args))})"
            return f"{pad}{head} := {print_term(r.value)}"
        if isinstance(r, Contraction):
            head = r.name if not r.args else f"{r.name}({', '.join(map(print_term, r.args))})"
            return f"{pad}undef {head}"
        if isinstance(r, Inception):
            return f"{pad}{r.token}!"
        if isinstance(r, Deletion):
            return f"{pad}delete {r.token}"
    if isinstance(p, Seq):
        return f"{print_program(p.first, indent)} ;\n{print_program(p.second, indent)}"
    if isinstance(p, If):
        return (
            f"{pad}if [{print_formula(p.guard)}] {{\n"
            f"{print_program(p.then, indent + 1)}\n{pad}}} {{\n"
            f"{print_program(p.orelse, indent + 1)}\n{pad}}}"
        )
    if isinstance(p, Do):
        return (
            f"{pad}do [{print_formula(p.guard)}] {{\n"
            f"{print_program(p.body, indent + 1)}\n{pad}}}"
        )
    raise TypeError(f"not a program: {p!r}")


# ---------------------------------------------------------------------------
# Semantics


class DivergenceError(Exception):
    """Fuel ran out; carries the partial trace."""

    def __init__(self, message: str, trace: "Trace"):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class Trace:
    """Execution record mirroring the program structure.

    kind: "rev" | "seq" | "if" | "do".  Revision traces hold before/after
    snapshots; sequencing holds both sub-traces; branching records the taken
    branch; iteration holds one sub-trace per executed body pass.
    """

    kind: str
    before: Structure
    after: Structure
    revision: Revision | None = None
    parts: tuple["Trace", ...] = ()
    taken: bool | None = None
    guard: Formula | None = None

    def steps(self) -> Iterator[tuple[Revision, Structure, Structure]]:
        """Flat view: every applied revision with its before/after snapshots."""
        if self.kind == "rev":
            assert self.revision is not None
            yield (self.revision, self.before, self.after)
        else:
            for part in self.parts:
                yield from part.steps()

    def iteration_counts(self) -> list[int]:
        """Number of body passes of every loop, outermost first."""
        out = []
        if self.kind == "do":
            out.append(len(self.parts))
        for part in self.parts:
            out.extend(part.iteration_counts())
        return out


def _auto_adjoin(sigma: Structure, name: str, arity: int) -> Structure:
    if name in sigma.vocabulary:
        if sigma.vocabulary.arity(name) != arity:
            raise VocabularyError(
                f"identifier {name!r} has arity {sigma.vocabulary.arity(name)}, revision uses {arity}"
            )
        return sigma
    return sigma.bind(name, AFunction.empty(arity))


def _adjoin_revision_identifiers(sigma: Structure, r: Revision) -> Structure:
    from .structures import term_identifiers

    ids: dict[str, int] = {}
    if isinstance(r, Extension):
        ids[r.name] = len(r.args)
        for t in r.args:
            term_identifiers(t, ids)
        term_identifiers(r.value, ids)
    elif isinstance(r, Contraction):
        ids[r.name] = len(r.args)
        for t in r.args:
            term_identifiers(t, ids)
    else:
        ids[r.token] = 0
    for name, k in ids.items():
        sigma = _auto_adjoin(sigma, name, k)
    return sigma


DELETION_FULL = "full"
DELETION_OUTPUTS_ONLY = "outputs-only"


def apply_revision(
    sigma: Structure,
    r: Revision,
    alloc: AtomAllocator,
    deletion_mode: str = DELETION_FULL,
) -> Structure:
    """One revision, totally: out-of-precondition cases are no-ops.

    Identifiers absent from the vocabulary are adjoined as empty functions.
    Deletion removes the token's atom from every entry it occurs in; with
    deletion_mode="outputs-only" only entries producing the atom are
    removed (the literal reading), which can leave the atom in the scope.
    """
    if isinstance(r, Extension):
        sigma = _adjoin_revision_identifiers(sigma, r)
        args = [eval_term(sigma, t) for t in r.args]
        value = eval_term(sigma, r.value)
        f = sigma.get(r.name)
        if value is None or any(a is None for a in args) or f(args) is not None:
            return sigma
        return sigma.bind(r.name, f.with_entry(tuple(args), value))
    if isinstance(r, Inception):
        sigma = _adjoin_revision_identifiers(sigma, r)
        if sigma.get(r.token).value is not None:
            return sigma
        alloc.observe(sigma.scope())
        return sigma.bind(r.token, AFunction.token(alloc.fresh()))
    if isinstance(r, Contraction):
        sigma = _adjoin_revision_identifiers(sigma, r)
        args = [eval_term(sigma, t) for t in r.args]
        if any(a is None for a in args):
            return sigma
        return sigma.bind(r.name, sigma.get(r.name).without_entry(tuple(args)))
    if isinstance(r, Deletion):
        sigma = _adjoin_revision_identifiers(sigma, r)
        atom = sigma.get(r.token).value
        if atom is None:
            return sigma
        out = {}
        for name, f in sigma.components.items():
            entries = {}
            for ins, o in f.entries.items():
                if o == atom:
                    continue
                if deletion_mode == DELETION_FULL and atom in ins:
                    continue
                entries[ins] = o
            out[name] = AFunction(f.arity, entries)
        return Structure(sigma.vocabulary, out)
    raise TypeError(f"not a revision: {r!r}")


def _eval_guard(sigma: Structure, guard: Formula, cfg: EvalConfig) -> bool:
    for name, k in free_vars(guard).items():
        sigma = _auto_adjoin(sigma, name, k)
    return eval_fo(sigma, guard, cfg)


def run(
    sigma: Structure,
    p: Program,
    fuel: int = 10_000,
    alloc: AtomAllocator | None = None,
    deletion_mode: str = DELETION_FULL,
) -> tuple[Structure, Trace]:
    """Big-step execution; one unit of fuel per revision applied.

    Raises DivergenceError (with the partial trace gathered so far) when
    fuel runs out; by construction a diverging loop always does.
    """
    if fuel <= 0:
        raise ValueError("fuel must be positive")
    alloc = alloc or AtomAllocator.above(sigma)
    guard_cfg = EvalConfig(so_mode="fo-only")
    budget = [fuel]

    def go(sig: Structure, prog: Program) -> tuple[Structure, Trace]:
        if isinstance(prog, Rev):
            if budget[0] <= 0:
                raise DivergenceError(
                    "fuel exhausted", Trace("rev", sig, sig, revision=prog.revision)
                )
            budget[0] -= 1
            after = apply_revision(sig, prog.revision, alloc, deletion_mode)
            return after, Trace("rev", sig, after, revision=prog.revision)
        if isinstance(prog, Seq):
            try:
                mid, t1 = go(sig, prog.first)
            except DivergenceError as d:
                raise DivergenceError(
                    str(d), Trace("seq", sig, d.trace.after, parts=(d.trace,))
                ) from None
            try:
                out, t2 = go(mid, prog.second)
            except DivergenceError as d:
                raise DivergenceError(
                    str(d), Trace("seq", sig, d.trace.after, parts=(t1, d.trace))
                ) from None
            return out, Trace("seq", sig, out, parts=(t1, t2))
        if isinstance(prog, If):
            taken = _eval_guard(sig, prog.guard, guard_cfg)
            sub = prog.then if taken else prog.orelse
            try:
                out, t = go(sig, sub)
            except DivergenceError as d:
                raise DivergenceError(
                    str(d),
                    Trace("if", sig, d.trace.after, parts=(d.trace,), taken=taken,
                          guard=prog.guard),
                ) from None
            return out, Trace("if", sig, out, parts=(t,), taken=taken, guard=prog.guard)
        if isinstance(prog, Do):
            parts: list[Trace] = []
            cur = sig
            while _eval_guard(cur, prog.guard, guard_cfg):
                try:
                    cur, t = go(cur, prog.body)
                except DivergenceError as d:
                    raise DivergenceError(
                        str(d),
                        Trace("do", sig, d.trace.after, parts=tuple(parts) + (d.trace,),
                              guard=prog.guard),
                    ) from None
                parts.append(t)
            return cur, Trace("do", sig, cur, parts=tuple(parts), guard=prog.guard)
        raise TypeError(f"not a program: {prog!r}")

    return go(sigma, p)
