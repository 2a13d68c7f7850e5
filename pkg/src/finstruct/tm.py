"""Turing transducers: a direct simulator and a compiler to ST programs.

A machine computes a partial string function; the compiler produces an ST
program that performs the same computation on chain structures.  The tape
is the chain of symbol pointers of a string structure: the token ``e``
marks the left end, the cursor token ``c`` sits on the atom *before* the
edge it reads, and the pointer ``r`` links each tape atom back to its
predecessor so the cursor can move left.  The current state's token holds
the left-end atom; all other state tokens are undefined.
"""

from __future__ import annotations

from dataclasses import dataclass

from .structures import (
    AFunction,
    App,
    FormatError,
    Structure,
    Vocabulary,
    VocabularyError,
    app,
    string_structure,
)
from .formulas import Formula, conj, defined, disj, undefined
from .st import (
    Contraction,
    Do,
    Extension,
    If,
    Inception,
    Program,
    Rev,
    SKIP,
    assignment,
    seq_of,
)

LEFT, RIGHT, STAY = "L", "R", "S"

_RESERVED = {"e", "c", "r", "tm_it", "tm_b", "tm_ld", "tm_new"}


@dataclass(frozen=True)
class TMSpec:
    """A deterministic one-tape transducer.

    delta maps (state, symbol) to (state, symbol, move) and must be total
    on non-print states over the tape alphabet; the blank is a tape symbol
    outside the input alphabet.
    """

    states: tuple[str, ...]
    start: str
    print_state: str
    blank: str
    sigma: tuple[str, ...]
    delta: dict[tuple[str, str], tuple[str, str, str]]

    @property
    def gamma(self) -> tuple[str, ...]:
        symbols = set(self.sigma) | {self.blank}
        for (q, g), (q2, g2, _) in self.delta.items():
            symbols.add(g)
            symbols.add(g2)
        return tuple(sorted(symbols))

    def validate(self) -> None:
        if self.start not in self.states or self.print_state not in self.states:
            raise VocabularyError("start and print states must be listed states")
        if self.blank in self.sigma:
            raise VocabularyError("the blank must lie outside the input alphabet")
        gamma = self.gamma
        for q in self.states:
            if q == self.print_state:
                continue
            for g in gamma:
                if (q, g) not in self.delta:
                    raise VocabularyError(f"delta is not total: missing ({q}, {g})")
        for (q, g), (q2, g2, move) in self.delta.items():
            if q == self.print_state:
                raise VocabularyError("the print state has no outgoing transitions")
            if q2 not in self.states:
                raise VocabularyError(f"unknown target state {q2!r}")
            if move not in (LEFT, RIGHT, STAY):
                raise VocabularyError(f"bad move {move!r}")
        clash = (set(self.states) | set(gamma)) & _RESERVED
        if clash:
            raise VocabularyError(f"state/symbol names collide with reserved names: {sorted(clash)}")
        if set(self.states) & set(gamma):
            raise VocabularyError("states and tape symbols must have distinct names")


@dataclass(frozen=True)
class TMConfig:
    state: str
    tape: tuple[str, ...]
    head: int  # 0-based cell index; may sit one past the written tape

    def normalized(self, blank: str) -> "TMConfig":
        tape = list(self.tape)
        while self.head >= len(tape):
            tape.append(blank)
        return TMConfig(self.state, tuple(tape), self.head)


class TMDivergence(Exception):
    pass


def step_tm(m: TMSpec, cfg: TMConfig) -> TMConfig | None:
    """One delta step; None when the machine has printed."""
    if cfg.state == m.print_state:
        return None
    cfg = cfg.normalized(m.blank)
    symbol = cfg.tape[cfg.head]
    state2, symbol2, move = m.delta[(cfg.state, symbol)]
    tape = list(cfg.tape)
    tape[cfg.head] = symbol2
    head = cfg.head
    if move == RIGHT:
        head += 1
    elif move == LEFT and head > 0:
        head -= 1
    return TMConfig(state2, tuple(tape), head)


def simulate_tm(m: TMSpec, w: str, fuel: int = 10_000) -> str:
    """Run the machine on an input word; the output is the tape up to the
    first blank.  Raises TMDivergence when fuel runs out."""
    m.validate()
    for ch in w:
        if ch not in m.sigma:
            raise VocabularyError(f"input symbol {ch!r} outside the input alphabet")
    cfg = TMConfig(m.start, tuple(w), 0)
    for _ in range(fuel):
        nxt = step_tm(m, cfg)
        if nxt is None:
            out = []
            for ch in cfg.tape:
                if ch == m.blank:
                    break
                out.append(ch)
            return "".join(out)
        cfg = nxt
    raise TMDivergence(f"no print state within {fuel} steps")


# ---------------------------------------------------------------------------
# Configurations as structures


def machine_vocabulary(m: TMSpec) -> Vocabulary:
    tokens = [("e", 0), ("c", 0)] + [(q, 0) for q in m.states]
    pointers = [("r", 1)] + [(g, 1) for g in m.gamma]
    return Vocabulary(tokens + sorted(pointers))


def config_structure(m: TMSpec, cfg: TMConfig, first_atom: int = 0) -> Structure:
    """The structure encoding of a configuration.

    One atom per tape cell boundary; the symbol of cell i labels the edge
    from boundary i to boundary i+1; r links every boundary back.  The
    head may sit on the boundary past the written tape, where it reads an
    implicit blank (the empty tape is a single atom with e = c)."""
    if cfg.head > len(cfg.tape):
        cfg = cfg.normalized(m.blank)
    n = len(cfg.tape)
    atoms = list(range(first_atom, first_atom + n + 1))
    comps: dict[str, AFunction] = {}
    edges: dict[str, dict] = {g: {} for g in m.gamma}
    r_entries = {}
    for i, ch in enumerate(cfg.tape):
        edges[ch][(atoms[i],)] = atoms[i + 1]
        r_entries[(atoms[i + 1],)] = atoms[i]
    vocab = machine_vocabulary(m)
    for g in m.gamma:
        comps[g] = AFunction(1, edges[g])
    comps["r"] = AFunction(1, r_entries)
    comps["e"] = AFunction.token(atoms[0])
    comps["c"] = AFunction.token(atoms[cfg.head])
    for q in m.states:
        comps[q] = AFunction.token(atoms[0] if q == cfg.state else None)
    return Structure(vocab, comps)


def _component(sigma: Structure, name: str, arity: int) -> AFunction:
    if name in sigma.vocabulary:
        return sigma.get(name)
    return AFunction.empty(arity)


def decode_config(m: TMSpec, sigma: Structure) -> TMConfig:
    """Read a configuration back off a structure (r is not consulted).

    Identifiers the structure has not adjoined yet count as empty."""
    e = _component(sigma, "e", 0).value
    if e is None:
        raise FormatError("no left end: token e is undefined")
    symbols = [g for g in m.gamma]
    tape: list[str] = []
    atoms = [e]
    cur = e
    while True:
        outgoing = [
            (g, _component(sigma, g, 1)((cur,)))
            for g in symbols
            if _component(sigma, g, 1)((cur,)) is not None
        ]
        if not outgoing:
            break
        if len(outgoing) > 1:
            raise FormatError(f"atom {cur} has several symbol edges")
        g, nxt = outgoing[0]
        tape.append(g)
        atoms.append(nxt)
        cur = nxt
        if len(atoms) > len(sigma.scope()) + 1:
            raise FormatError("symbol edges form a cycle")
    c = _component(sigma, "c", 0).value
    if c not in atoms:
        raise FormatError("cursor is off the tape chain")
    states = [q for q in m.states if _component(sigma, q, 0).value is not None]
    if len(states) != 1:
        raise FormatError(f"expected exactly one live state token, got {states}")
    return TMConfig(states[0], tuple(tape), atoms.index(c))


def decode_output(m: TMSpec, sigma: Structure) -> str:
    """The word spelled by non-blank symbol edges from the left end."""
    e = _component(sigma, "e", 0).value
    if e is None:
        raise FormatError("no left end: token e is undefined")
    out: list[str] = []
    cur = e
    seen = set()
    while cur not in seen:
        seen.add(cur)
        for g in m.gamma:
            if g == m.blank:
                continue
            nxt = _component(sigma, g, 1)((cur,))
            if nxt is not None:
                out.append(g)
                cur = nxt
                break
        else:
            return "".join(out)
    raise FormatError("symbol edges form a cycle")


# ---------------------------------------------------------------------------
# The compiler


def _if_chain(branches: list[tuple[Formula, Program]]) -> Program:
    out: Program = SKIP
    for guard, prog in reversed(branches):
        out = If(guard, prog, out)
    return out


def compile_tm(m: TMSpec) -> Program:
    """An ST program transforming any T(w) into T(f_M(w)).

    Three phases: set up the cursor, state flag and the back-pointer r by
    walking the input; iterate delta while the print state is undefined; and
    trim everything from the first blank on, so the non-blank symbol
    components spell exactly the output.
    """
    m.validate()
    gamma = list(m.gamma)
    visible = [g for g in gamma if g != m.blank]
    it, b, ld, new = "tm_it", "tm_b", "tm_ld", "tm_new"

    def sym_edge(g: str, tok: str) -> Formula:
        return defined(app(g, app(tok)))

    def walk_any(tok: str, symbols: list[str], body_of) -> Program:
        guard = disj(sym_edge(g, tok) for g in symbols)
        branches = [(sym_edge(g, tok), body_of(g)) for g in symbols]
        return Do(guard, _if_chain(branches))

    # phase 1: cursor, state flag, back-pointers
    init = [
        Rev(Extension("c", (), app("e"))),
        Rev(Extension(m.start, (), app("e"))),
        Rev(Extension(it, (), app("e"))),
        walk_any(
            it,
            gamma,
            lambda g: seq_of(
                [
                    Rev(Extension("r", (app(g, app(it)),), app(it))),
                    assignment(it, (), app(g, app(it)), f"tm_m1_{g}"),
                ]
            ),
        ),
        Rev(Contraction(it, ())),
    ]

    # phase 2: the delta loop
    branches: list[tuple[Formula, Program]] = []
    for (q, g), (q2, g2, move) in sorted(m.delta.items()):
        guard = conj([defined(app(q)), sym_edge(g, "c"), undefined(app(ld))])
        body: list[Program] = [
            Rev(Extension(b, (), app(g, app("c")))),
            Rev(Contraction(g, (app("c"),))),
            Rev(Extension(g2, (app("c"),), app(b))),
            Rev(Contraction(q, ())),
            Rev(Extension(q2, (), app("e"))),
        ]
        if move == RIGHT:
            body.append(assignment("c", (), app(b), "tm_m2"))
        elif move == LEFT:
            body.append(
                If(
                    defined(app("r", app("c"))),
                    assignment("c", (), app("r", app("c")), "tm_m3"),
                    SKIP,
                )
            )
        body.append(Rev(Contraction(b, ())))
        body.append(Rev(Extension(ld, (), app("e"))))
        branches.append((guard, seq_of(body)))
    # reading past the written tape is reading a blank: extend, then act
    for q in m.states:
        if q == m.print_state:
            continue
        q2, g2, move = m.delta[(q, m.blank)]
        guard = conj(
            [defined(app(q))]
            + [undefined(app(g, app("c"))) for g in gamma]
            + [undefined(app(ld))]
        )
        body = [
            Rev(Inception(new)),
            Rev(Extension(g2, (app("c"),), app(new))),
            Rev(Extension("r", (app(new),), app("c"))),
            Rev(Contraction(q, ())),
            Rev(Extension(q2, (), app("e"))),
        ]
        if move == RIGHT:
            body.append(assignment("c", (), app(new), "tm_m4"))
        elif move == LEFT:
            body.append(
                If(
                    defined(app("r", app("c"))),
                    assignment("c", (), app("r", app("c")), "tm_m5"),
                    SKIP,
                )
            )
        body.append(Rev(Contraction(new, ())))
        body.append(Rev(Extension(ld, (), app("e"))))
        branches.append((guard, seq_of(body)))
    main = Do(
        undefined(app(m.print_state)),
        seq_of([_if_chain(branches), Rev(Contraction(ld, ()))]),
    )

    # phase 3: walk to the first blank, then erase the tail
    trim = [
        Rev(Extension(it, (), app("e"))),
        walk_any(it, visible, lambda g: assignment(it, (), app(g, app(it)), f"tm_m6_{g}")),
        walk_any(
            it,
            gamma,
            lambda g: seq_of(
                [
                    Rev(Extension(b, (), app(g, app(it)))),
                    Rev(Contraction(g, (app(it),))),
                    assignment(it, (), app(b), f"tm_m7_{g}"),
                    Rev(Contraction(b, ())),
                ]
            ),
        ),
        Rev(Contraction(it, ())),
    ]

    return seq_of(init + [main] + trim)


# ---------------------------------------------------------------------------
# .tm text format


def parse_tm(text: str) -> TMSpec:
    states: list[str] = []
    start = print_state = blank = None
    sigma: list[str] | None = None
    delta: dict[tuple[str, str], tuple[str, str, str]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0]
        if kind == "states":
            states = parts[1:]
        elif kind == "start" and len(parts) == 2:
            start = parts[1]
        elif kind == "print" and len(parts) == 2:
            print_state = parts[1]
        elif kind == "blank" and len(parts) == 2:
            blank = parts[1]
        elif kind == "sigma":
            sigma = parts[1:]
        elif kind == "delta":
            if len(parts) != 7 or parts[3] != "->":
                raise FormatError(f"line {lineno}: expected 'delta q g -> q2 g2 L|R|S'")
            _, q, g, _, q2, g2, move = parts
            if (q, g) in delta:
                raise FormatError(f"line {lineno}: duplicate transition ({q}, {g})")
            delta[(q, g)] = (q2, g2, move)
        else:
            raise FormatError(f"line {lineno}: unknown directive {kind!r}")
    if not states or start is None or print_state is None or blank is None:
        raise FormatError("a machine needs states, start, print and blank lines")
    if sigma is None:
        used = {g for (_, g) in delta} | {g2 for (_, g2, _) in delta.values()}
        sigma = sorted(used - {blank})
    spec = TMSpec(
        states=tuple(states),
        start=start,
        print_state=print_state,
        blank=blank,
        sigma=tuple(sigma),
        delta=delta,
    )
    spec.validate()
    return spec


def print_tm(m: TMSpec) -> str:
    lines = [
        f"states {' '.join(m.states)}",
        f"start {m.start}",
        f"print {m.print_state}",
        f"blank {m.blank}",
        f"sigma {' '.join(m.sigma)}",
    ]
    for (q, g), (q2, g2, move) in sorted(m.delta.items()):
        lines.append(f"delta {q} {g} -> {q2} {g2} {move}")
    return "\n".join(lines) + "\n"


def input_structure(m: TMSpec, w: str) -> Structure:
    """T(w) over the machine's input symbols (plus the left-end token)."""
    sigma = string_structure(w)
    for g in m.sigma:
        if g not in sigma.vocabulary:
            sigma = sigma.bind(g, AFunction.empty(1))
    return sigma
