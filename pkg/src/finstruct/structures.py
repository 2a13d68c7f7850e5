"""Finite partial structures over a pool of anonymous atoms.

Atoms are plain non-negative ints; ``None`` plays the role of the
distinguished "undefined" element.  Every function is strict: an undefined
argument forces an undefined result.  A structure assigns a finite partial
function to every identifier of its vocabulary; there is no Tarskian
universe, only the *scope* (the atoms mentioned by some entry).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional, Sequence

Atom = int
AtomOrBottom = Optional[int]


class FinstructError(Exception):
    """Base class for errors raised by this package."""


class StrictnessError(FinstructError):
    """An undefined value was used where an atom is required."""


class BindingError(FinstructError):
    """A term or formula referenced an unknown or mis-typed identifier."""


class VocabularyError(FinstructError):
    """Vocabulary mismatch (unknown identifier, arity clash, name clash)."""


class FormatError(FinstructError):
    """Malformed textual input (.fstruct/.st/.tm/.fml)."""


# ---------------------------------------------------------------------------
# Finite partial functions


class AFunction:
    """A finite k-ary partial function over atoms.

    Entries map k-tuples of atoms to atoms; lookup outside the entries (or
    with any undefined argument) yields ``None``.  Instances are immutable;
    updates return new objects.  A nullary function is either empty or a
    single atom (``value``), which is how tokens are represented.
    """

    __slots__ = ("arity", "entries", "_hash")

    def __init__(self, arity: int, entries: Mapping[tuple[Atom, ...], Atom] = ()):
        if arity < 0:
            raise ValueError("arity must be >= 0")
        table: dict[tuple[Atom, ...], Atom] = dict(entries)
        for ins, out in table.items():
            if len(ins) != arity:
                raise VocabularyError(f"entry {ins}->{out} does not match arity {arity}")
            if out is None or any(a is None for a in ins):
                raise StrictnessError("entries may not contain the undefined value")
        object.__setattr__(self, "arity", arity)
        object.__setattr__(self, "entries", table)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("AFunction is immutable")

    @classmethod
    def empty(cls, arity: int) -> "AFunction":
        return cls(arity)

    @classmethod
    def token(cls, value: AtomOrBottom) -> "AFunction":
        return cls(0) if value is None else cls(0, {(): value})

    @property
    def value(self) -> AtomOrBottom:
        """The atom held by a nullary function, or None."""
        if self.arity != 0:
            raise VocabularyError("value is only defined for nullary functions")
        return self.entries.get((), None)

    def __call__(self, args: Sequence[AtomOrBottom]) -> AtomOrBottom:
        if len(args) != self.arity:
            raise VocabularyError(f"expected {self.arity} arguments, got {len(args)}")
        if any(a is None for a in args):
            return None
        return self.entries.get(tuple(args), None)

    def defined_at(self, args: Sequence[Atom]) -> bool:
        return tuple(args) in self.entries

    def with_entry(self, args: Sequence[Atom], out: Atom) -> "AFunction":
        """Extend (or overwrite) the entry at ``args``."""
        args = tuple(args)
        if out is None or any(a is None for a in args):
            raise StrictnessError("cannot add an entry containing the undefined value")
        if len(args) != self.arity:
            raise VocabularyError(f"expected {self.arity} arguments, got {len(args)}")
        table = dict(self.entries)
        table[args] = out
        return AFunction(self.arity, table)

    def without_entry(self, args: Sequence[Atom]) -> "AFunction":
        args = tuple(args)
        if args not in self.entries:
            return self
        table = dict(self.entries)
        del table[args]
        return AFunction(self.arity, table)

    def scope(self) -> frozenset[Atom]:
        atoms: set[Atom] = set()
        for ins, out in self.entries.items():
            atoms.update(ins)
            atoms.add(out)
        return frozenset(atoms)

    def items(self) -> Iterator[tuple[tuple[Atom, ...], Atom]]:
        return iter(sorted(self.entries.items()))

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, AFunction)
            and self.arity == other.arity
            and self.entries == other.entries
        )

    def __hash__(self) -> int:
        h = object.__getattribute__(self, "_hash")
        if h is None:
            h = hash((self.arity, frozenset(self.entries.items())))
            object.__setattr__(self, "_hash", h)
        return h

    def __repr__(self) -> str:
        if self.arity == 0:
            return f"AFunction0({self.value})"
        body = ", ".join(f"{list(i)}->{o}" for i, o in self.items())
        return f"AFunction{self.arity}({{{body}}})"


def extend_function(f: AFunction, args: Sequence[Atom], out: Atom) -> AFunction:
    """Functional update {args -> out}f.

    Overwrites if the point is already defined; the induction-schema checks
    guard the undefined-point precondition themselves.
    """
    return f.with_entry(args, out)


# ---------------------------------------------------------------------------
# Vocabularies and structures


class Vocabulary:
    """An ordered list of arity-tagged identifiers.  Order is significant."""

    __slots__ = ("_names", "_arity")

    def __init__(self, items: Iterable[tuple[str, int]] = ()):
        names: list[str] = []
        arity: dict[str, int] = {}
        for name, k in items:
            if name in arity:
                if arity[name] != k:
                    raise VocabularyError(f"identifier {name!r} declared with two arities")
                continue
            if k < 0:
                raise VocabularyError(f"negative arity for {name!r}")
            names.append(name)
            arity[name] = k
        self._names = tuple(names)
        self._arity = arity

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    def arity(self, name: str) -> int:
        try:
            return self._arity[name]
        except KeyError:
            raise VocabularyError(f"unknown identifier {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._arity

    def __iter__(self) -> Iterator[tuple[str, int]]:
        for name in self._names:
            yield name, self._arity[name]

    def __len__(self) -> int:
        return len(self._names)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Vocabulary)
            and self._names == other._names
            and self._arity == other._arity
        )

    def __hash__(self) -> int:
        return hash(tuple((n, self._arity[n]) for n in self._names))

    def __repr__(self) -> str:
        return "Vocabulary([" + ", ".join(f"{n}/{k}" for n, k in self) + "])"

    def with_identifier(self, name: str, k: int) -> "Vocabulary":
        if name in self._arity:
            if self._arity[name] != k:
                raise VocabularyError(f"identifier {name!r} already has arity {self._arity[name]}")
            return self
        return Vocabulary(list(self) + [(name, k)])

    def disjoint_union(self, other: "Vocabulary") -> "Vocabulary":
        clash = set(self._arity) & set(other._arity)
        if clash:
            raise VocabularyError(f"vocabulary name clash: {sorted(clash)}")
        return Vocabulary(list(self) + list(other))

    def tokens(self) -> tuple[str, ...]:
        return tuple(n for n, k in self if k == 0)


class Structure:
    """An assignment of an AFunction of matching arity to every identifier."""

    __slots__ = ("vocabulary", "components", "_scope")

    def __init__(self, vocabulary: Vocabulary, components: Mapping[str, AFunction] = ()):
        comps = dict(components)
        for name, k in vocabulary:
            f = comps.get(name)
            if f is None:
                comps[name] = AFunction.empty(k)
            elif f.arity != k:
                raise VocabularyError(f"component {name!r} has arity {f.arity}, vocabulary says {k}")
        extra = set(comps) - set(vocabulary.names)
        if extra:
            raise VocabularyError(f"components outside the vocabulary: {sorted(extra)}")
        object.__setattr__(self, "vocabulary", vocabulary)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "_scope", None)

    def __setattr__(self, name, value):
        raise AttributeError("Structure is immutable")

    @classmethod
    def empty(cls, vocabulary: Vocabulary | Iterable[tuple[str, int]] = ()) -> "Structure":
        if not isinstance(vocabulary, Vocabulary):
            vocabulary = Vocabulary(vocabulary)
        return cls(vocabulary)

    def get(self, name: str) -> AFunction:
        try:
            return self.components[name]
        except KeyError:
            raise VocabularyError(f"unknown identifier {name!r}") from None

    def bind(self, name: str, value: "AFunction | AtomOrBottom") -> "Structure":
        """Return a copy with ``name`` (re)bound; adjoins the identifier if new.

        Nullary bindings accept a bare atom or None for convenience.
        """
        if not isinstance(value, AFunction):
            value = AFunction.token(value)
        vocab = self.vocabulary.with_identifier(name, value.arity)
        comps = dict(self.components)
        comps[name] = value
        return Structure(vocab, comps)

    def bind_all(self, values: Mapping[str, "AFunction | AtomOrBottom"]) -> "Structure":
        out = self
        for name, value in values.items():
            out = out.bind(name, value)
        return out

    def scope(self) -> frozenset[Atom]:
        s = object.__getattribute__(self, "_scope")
        if s is None:
            atoms: set[Atom] = set()
            for f in self.components.values():
                atoms.update(f.scope())
            s = frozenset(atoms)
            object.__setattr__(self, "_scope", s)
        return s

    def restrict(self, names: Sequence[str]) -> "Structure":
        """Reduct to the given identifiers (order as given)."""
        vocab = Vocabulary([(n, self.vocabulary.arity(n)) for n in names])
        return Structure(vocab, {n: self.components[n] for n in names})

    def rename(self, mapping: Mapping[str, str]) -> "Structure":
        vocab = Vocabulary([(mapping.get(n, n), k) for n, k in self.vocabulary])
        return Structure(vocab, {mapping.get(n, n): f for n, f in self.components.items()})

    def union(self, other: "Structure") -> "Structure":
        """Disjoint-vocabulary union; identifier clashes are rejected."""
        vocab = self.vocabulary.disjoint_union(other.vocabulary)
        comps = dict(self.components)
        comps.update(other.components)
        return Structure(vocab, comps)

    def is_substructure_of(self, other: "Structure") -> bool:
        if self.vocabulary != other.vocabulary:
            raise VocabularyError("substructure comparison needs equal vocabularies")
        return all(
            set(f.entries.items()) <= set(other.components[n].entries.items())
            for n, f in self.components.items()
        )

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Structure)
            and self.vocabulary == other.vocabulary
            and self.components == other.components
        )

    def __hash__(self) -> int:
        return hash((self.vocabulary, frozenset(self.components.items())))

    def __repr__(self) -> str:
        parts = ", ".join(f"{n}={f!r}" for n, f in sorted(self.components.items()))
        return f"Structure({parts})"


def scope(sigma: Structure) -> frozenset[Atom]:
    """The atoms occurring in some entry of some component."""
    return sigma.scope()


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Term:
    pass


@dataclass(frozen=True)
class Omega(Term):
    def __repr__(self) -> str:
        return "omega"


@dataclass(frozen=True)
class App(Term):
    name: str
    args: tuple[Term, ...] = ()

    def __repr__(self) -> str:
        if not self.args:
            return self.name
        return f"{self.name}({', '.join(map(repr, self.args))})"


OMEGA = Omega()


def app(name: str, *args: Term) -> App:
    return App(name, tuple(args))


def is_standard(t: Term) -> bool:
    if isinstance(t, Omega):
        return False
    assert isinstance(t, App)
    return all(is_standard(a) for a in t.args)


def term_identifiers(t: Term, acc: dict[str, int] | None = None) -> dict[str, int]:
    """Identifiers used in ``t`` with their arities; rejects inconsistent use."""
    if acc is None:
        acc = {}
    if isinstance(t, App):
        k = acc.setdefault(t.name, len(t.args))
        if k != len(t.args):
            raise BindingError(f"identifier {t.name!r} used with arities {k} and {len(t.args)}")
        for a in t.args:
            term_identifiers(a, acc)
    return acc


def eval_term(sigma: Structure, t: Term) -> AtomOrBottom:
    """Value of a term: omega is undefined, application is strict lookup."""
    if isinstance(t, Omega):
        return None
    assert isinstance(t, App)
    f = sigma.get(t.name)
    if f.arity != len(t.args):
        raise BindingError(
            f"identifier {t.name!r} has arity {f.arity}, applied to {len(t.args)} arguments"
        )
    if not t.args:
        return f.value
    return f([eval_term(sigma, a) for a in t.args])


# ---------------------------------------------------------------------------
# Atom allocation


class AtomAllocator:
    """Monotone source of atoms guaranteed fresh for the structures it has seen."""

    __slots__ = ("next_id",)

    def __init__(self, start: int = 0):
        self.next_id = start

    @classmethod
    def above(cls, *structures: Structure) -> "AtomAllocator":
        top = -1
        for s in structures:
            sc = s.scope()
            if sc:
                top = max(top, max(sc))
        return cls(top + 1)

    def observe(self, atoms: Iterable[Atom]) -> None:
        for a in atoms:
            if a >= self.next_id:
                self.next_id = a + 1

    def fresh(self) -> Atom:
        a = self.next_id
        self.next_id += 1
        return a

    def fresh_many(self, n: int) -> list[Atom]:
        return [self.fresh() for _ in range(n)]


# ---------------------------------------------------------------------------
# Free structures of standard terms


def term_structure(
    q: Term,
    root: str | None = None,
    allocator: AtomAllocator | None = None,
) -> Structure:
    """The free structure whose atoms are the distinct sub-terms of ``q``.

    Shared sub-terms share their atom, so the result is free and accessible.
    If ``root`` is given, that token denotes the atom of ``q`` itself.
    """
    if not is_standard(q):
        raise StrictnessError("term_structure requires an omega-free term")
    alloc = allocator if allocator is not None else AtomAllocator()
    atom_of: dict[Term, Atom] = {}
    vocab_items: dict[str, int] = {}
    entries: dict[str, dict[tuple[Atom, ...], Atom]] = {}

    def visit(t: App) -> Atom:
        if t in atom_of:
            return atom_of[t]
        arg_atoms = tuple(visit(a) for a in t.args)  # type: ignore[arg-type]
        a = alloc.fresh()
        atom_of[t] = a
        k = vocab_items.setdefault(t.name, len(t.args))
        if k != len(t.args):
            raise BindingError(f"identifier {t.name!r} used with two arities")
        entries.setdefault(t.name, {})[arg_atoms] = a
        return a

    root_atom = visit(q)  # type: ignore[arg-type]
    items = sorted(vocab_items.items())
    vocab = Vocabulary(items)
    comps = {n: AFunction(k, entries.get(n, {})) for n, k in items}
    if root is not None:
        vocab = vocab.with_identifier(root, 0)
        comps[root] = AFunction.token(root_atom)
    return Structure(vocab, comps)


def string_structure(w: str, end_token: str = "e", allocator: AtomAllocator | None = None) -> Structure:
    """The chain structure of a string: token ``e`` then one pointer per symbol."""
    t: Term = app(end_token)
    for ch in w:
        t = app(ch, t)
    return term_structure(t, allocator=allocator)


def numeral_structure(
    n: int,
    zero: str = "z",
    succ: str = "s",
    allocator: AtomAllocator | None = None,
) -> Structure:
    """The chain structure of the n-th numeral term."""
    if n < 0:
        raise ValueError("numerals are non-negative")
    t: Term = app(zero)
    for _ in range(n):
        t = app(succ, t)
    sigma = term_structure(t, allocator=allocator)
    # a numeral's vocabulary always carries the successor, even at zero
    if succ not in sigma.vocabulary:
        sigma = sigma.bind(succ, AFunction.empty(1))
    return sigma


def chain_length(sigma: Structure, zero: str, succ: str) -> int | None:
    """Steps from the zero token along the successor; None if it is no chain."""
    z = sigma.get(zero).value
    if z is None:
        return None
    s = sigma.get(succ)
    seen = set()
    cur, n = z, 0
    while True:
        if cur in seen:
            return None
        seen.add(cur)
        nxt = s((cur,))
        if nxt is None:
            break
        cur, n = nxt, n + 1
    if sigma.restrict([zero, succ]).scope() != frozenset(seen):
        return None
    return n


# ---------------------------------------------------------------------------
# Accessibility and freeness


def _closure(sigma: Structure) -> set[Atom]:
    reach: set[Atom] = set()
    changed = True
    while changed:
        changed = False
        for f in sigma.components.values():
            for ins, out in f.entries.items():
                if out not in reach and all(a in reach for a in ins):
                    reach.add(out)
                    changed = True
    return reach


def is_accessible(sigma: Structure) -> bool:
    """Every scope atom is the value of some term."""
    return sigma.scope() <= _closure(sigma)


def is_free(sigma: Structure) -> bool:
    """Accessible, and every scope atom is the value of a unique term.

    Computed by a capped derivation count: count(b) sums, over entries
    producing b, the product of the argument counts.  A stable count of
    exactly 1 everywhere means a unique producing term; 2 means several
    (possibly infinitely many, when a cycle feeds an accessible atom).
    """
    sc = sigma.scope()
    if not sc <= _closure(sigma):
        return False
    counts: dict[Atom, int] = {a: 0 for a in sc}
    for _ in range(2 * len(sc) + 2):
        new = dict(counts)
        for a in sc:
            total = 0
            for f in sigma.components.values():
                for ins, out in f.entries.items():
                    if out != a:
                        continue
                    prod = 1
                    for i in ins:
                        prod *= counts[i]
                        if prod >= 2:
                            break
                    total += prod
                    if total >= 2:
                        break
                if total >= 2:
                    break
            new[a] = min(2, total)
        if new == counts:
            break
        counts = new
    return all(c == 1 for c in counts.values())


# ---------------------------------------------------------------------------
# Isomorphism


def _color_refinement(sigma: Structure, rounds: int = 3) -> dict[Atom, int]:
    colors: dict[Atom, int] = {a: 0 for a in sigma.scope()}
    for _ in range(rounds):
        sigs: dict[Atom, tuple] = {a: () for a in colors}
        for name in sorted(sigma.components):
            f = sigma.components[name]
            for ins, out in f.entries.items():
                for pos, a in enumerate(ins):
                    sigs[a] = sigs[a] + ((name, "in", pos, colors[out], tuple(colors[i] for i in ins)),)
                sigs[out] = sigs[out] + ((name, "out", colors[out], tuple(colors[i] for i in ins)),)
        canon: dict[tuple, int] = {}
        new = {}
        for a in sorted(colors):
            key = (colors[a], tuple(sorted(sigs[a])))
            new[a] = canon.setdefault(key, len(canon))
        if new == colors:
            break
        colors = new
    return colors


def isomorphic(sigma: Structure, tau: Structure) -> dict[Atom, Atom] | None:
    """A scope bijection commuting with every component, or None.

    Backtracking search pruned by iterated color refinement; token values
    anchor the first assignments.  Vocabulary order is irrelevant here.
    """
    if dict(sigma.vocabulary) != dict(tau.vocabulary):
        raise VocabularyError("isomorphism needs equal vocabularies")
    s_scope, t_scope = sorted(sigma.scope()), sorted(tau.scope())
    if len(s_scope) != len(t_scope):
        return None
    for name, _ in sigma.vocabulary:
        if len(sigma.components[name]) != len(tau.components[name]):
            return None
    sc, tc = _color_refinement(sigma), _color_refinement(tau)
    if sorted(sc.values()) != sorted(tc.values()):
        return None

    mapping: dict[Atom, Atom] = {}
    used: set[Atom] = set()

    # nullary components pin their atoms immediately
    for name, k in sigma.vocabulary:
        if k != 0:
            continue
        a, b = sigma.components[name].value, tau.components[name].value
        if (a is None) != (b is None):
            return None
        if a is not None:
            if a in mapping and mapping[a] != b:
                return None
            if a not in mapping and b in used:
                return None
            mapping.setdefault(a, b)
            used.add(b)

    order = [a for a in s_scope if a not in mapping]

    def consistent_full() -> bool:
        for name, k in sigma.vocabulary:
            f, g = sigma.components[name], tau.components[name]
            for ins, out in f.entries.items():
                if g.entries.get(tuple(mapping[i] for i in ins)) != mapping[out]:
                    return False
        return True

    def backtrack(i: int) -> bool:
        if i == len(order):
            return consistent_full()
        a = order[i]
        for b in t_scope:
            if b in used or tc[b] != sc[a]:
                continue
            mapping[a] = b
            used.add(b)
            if backtrack(i + 1):
                return True
            del mapping[a]
            used.discard(b)
        return False

    if not backtrack(0):
        return None
    return dict(mapping)


def canonical_key(sigma: Structure) -> tuple:
    """A label-independent key: equal keys iff isomorphic (small scopes only)."""
    import itertools

    atoms = sorted(sigma.scope())
    colors = _color_refinement(sigma)
    best = None
    # only permute within color classes of the refinement to cut the search
    classes: dict[int, list[Atom]] = {}
    for a in atoms:
        classes.setdefault(colors[a], []).append(a)
    class_list = [classes[c] for c in sorted(classes)]
    for perm_parts in itertools.product(*(itertools.permutations(cl) for cl in class_list)):
        relabel: dict[Atom, int] = {}
        for part in perm_parts:
            for a in part:
                relabel[a] = len(relabel)
        key = tuple(
            (name, tuple(sorted((tuple(relabel[i] for i in ins), relabel[out])
                                for ins, out in sigma.components[name].entries.items())))
            for name, _ in sorted(sigma.vocabulary)
        )
        if best is None or key < best:
            best = key
    return (tuple(sorted(sigma.vocabulary)), best)


# ---------------------------------------------------------------------------
# .fstruct text format


def print_structure(sigma: Structure) -> str:
    """Serialize: one header line per identifier, then sorted entry lines."""
    lines = [f"fn {name}/{k}" for name, k in sigma.vocabulary]
    for name, _ in sigma.vocabulary:
        f = sigma.components[name]
        for ins, out in f.items():
            if ins:
                lines.append(f"{name} {' '.join(map(str, ins))} -> {out}")
            else:
                lines.append(f"{name} -> {out}")
    return "\n".join(lines) + "\n"


def parse_structure(text: str) -> Structure:
    vocab_items: list[tuple[str, int]] = []
    arities: dict[str, int] = {}
    entries: dict[str, dict[tuple[Atom, ...], Atom]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("fn "):
            decl = line[3:].strip()
            if "/" not in decl:
                raise FormatError(f"line {lineno}: expected 'fn NAME/ARITY'")
            name, _, ar = decl.partition("/")
            name = name.strip()
            try:
                k = int(ar)
            except ValueError:
                raise FormatError(f"line {lineno}: bad arity {ar!r}") from None
            if name in arities:
                if arities[name] != k:
                    raise FormatError(f"line {lineno}: {name!r} redeclared with different arity")
                continue
            arities[name] = k
            vocab_items.append((name, k))
            entries.setdefault(name, {})
            continue
        if "->" not in line:
            raise FormatError(f"line {lineno}: expected an entry 'NAME a .. -> b'")
        lhs, _, rhs = line.partition("->")
        parts = lhs.split()
        if not parts:
            raise FormatError(f"line {lineno}: missing identifier")
        name, ins = parts[0], parts[1:]
        if name not in arities:
            raise FormatError(f"line {lineno}: identifier {name!r} not declared")
        if len(ins) != arities[name]:
            raise FormatError(
                f"line {lineno}: {name!r} has arity {arities[name]}, entry gives {len(ins)} inputs"
            )
        try:
            ins_atoms = tuple(int(a) for a in ins)
            out_atom = int(rhs.strip())
        except ValueError:
            raise FormatError(f"line {lineno}: atoms must be decimal ids") from None
        table = entries[name]
        if ins_atoms in table and table[ins_atoms] != out_atom:
            raise FormatError(f"line {lineno}: duplicate entry for {name} {ins_atoms}")
        table[ins_atoms] = out_atom
    vocab = Vocabulary(vocab_items)
    comps = {n: AFunction(arities[n], entries[n]) for n, _ in vocab_items}
    return Structure(vocab, comps)
