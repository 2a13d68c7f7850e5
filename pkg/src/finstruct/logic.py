"""Satisfaction for the two-sorted logic, finitized to run on a desk.

The quantifier clauses of the satisfaction relation range over *all* atoms
and *all* finite functions, which no evaluator can enumerate.  Two
finitizations make the relation computable:

* Atomic quantifiers range over ``{undefined} + scope + fresh``, where
  ``fresh`` is a reserved block of atoms disjoint from every scope in
  sight.  Truth is invariant under permutations of the atom supply that
  fix the mentioned atoms, so atoms beyond the scope are interchangeable
  and a handful of representatives decides the quantifier.  One fresh atom
  per atomic quantifier always suffices.

* Functional quantifiers range over functions whose entries lie in the
  same finite pool.  The evaluator is *sound*, never exact by brute force:
  an existential search that fails within its entry bound reports
  ``unknown`` (None) rather than false, and a universal search reports
  false only on an explicit counterexample.  Where the shape of the
  formula determines a candidate function outright (pointwise definitions,
  single-point updates, slice equations), the evaluator constructs the
  candidate and verifies it, which decides many quantifiers exactly.

Transitive-closure formulas built by :mod:`finstruct.translate` and
:mod:`finstruct.library` carry an evaluation hint describing their
step relation; for those the evaluator runs a breadth-first fixpoint
over concrete state vectors instead of searching for the bundled
history function blindly.  The hint never changes what is true, only
what is decidable within budget.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Sequence

from .structures import (
    AFunction,
    App,
    Atom,
    AtomOrBottom,
    BindingError,
    Omega,
    Structure,
    Term,
)
from .formulas import (
    And,
    Eq,
    Exists,
    Forall,
    Formula,
    Implies,
    Not,
    Or,
    conjuncts,
    count_atomic_quantifiers,
    free_vars,
    is_first_order,
)

ThreeValued = Optional[bool]  # True | False | None ("unknown")

FO_ONLY = "fo-only"
BOUNDED = "bounded-search"
WITNESSED = "witnessed"
RESTRICTED = "restricted"


@dataclass
class EvalConfig:
    """Evaluation budget.

    fresh_atom_count: size of the reserved fresh-atom block (default: the
        number of atomic quantifiers in the formula).
    so_entry_bound: entry bound for blindly enumerated witness functions.
    so_mode: "fo-only" rejects functional quantifiers; "bounded-search" is
        the sound three-valued default ("witnessed" is its alias for runs
        whose outer existentials were bound by a caller-provided witness);
        "restricted" reinterprets functional quantifiers as ranging over
        the bounded pool only, deciding them exactly within that range.
    solution_limit: cap on assignments enumerated per existential block.
    """

    fresh_atom_count: int | None = None
    so_entry_bound: int = 3
    so_mode: str = BOUNDED
    solution_limit: int = 4096


@dataclass(frozen=True)
class StarHint:
    """Evaluation hint for a reflexive-transitive-closure formula.

    The hinted node is the existential introducing the iteration chain; the
    formula underneath relates the vectors named ``pre`` and ``post`` via
    repeated application of ``step``.  ``complete`` asserts that solving
    ``step`` for its post vector enumerates *all* successors of a concrete
    state, so a closed search may report false.
    """

    pre: tuple[str, ...]
    post: tuple[str, ...]
    arities: tuple[int, ...]
    step: Formula
    complete: bool = True


@dataclass(frozen=True)
class ReachHint:
    """Hint for ``exists post-vector (closure(pre, post) & rest)``."""

    star: StarHint
    rest: Formula


# ---------------------------------------------------------------------------
# Kleene connectives


def tv_not(a: ThreeValued) -> ThreeValued:
    return None if a is None else (not a)


def tv_and(a: ThreeValued, b: ThreeValued) -> ThreeValued:
    if a is False or b is False:
        return False
    if a is True and b is True:
        return True
    return None


def tv_or(a: ThreeValued, b: ThreeValued) -> ThreeValued:
    if a is True or b is True:
        return True
    if a is False and b is False:
        return False
    return None


# ---------------------------------------------------------------------------
# Environments

Value = object  # AFunction for arity >= 1, int | None for arity 0


def _env_from_structure(sigma: Structure, extra=None) -> dict[str, Value]:
    env: dict[str, Value] = {}
    for name, k in sigma.vocabulary:
        f = sigma.components[name]
        env[name] = f.value if k == 0 else f
    if extra:
        for name, v in extra.items():
            env[name] = v.value if isinstance(v, AFunction) and v.arity == 0 else v
    return env


def _value_scope(v: Value) -> frozenset[Atom]:
    if isinstance(v, AFunction):
        return v.scope()
    if v is None:
        return frozenset()
    return frozenset((v,))


def _check_bindings(phi: Formula, env: dict[str, Value]) -> None:
    for name, k in free_vars(phi).items():
        if name not in env:
            raise BindingError(f"free variable {name!r} is not assigned")
        v = env[name]
        actual = v.arity if isinstance(v, AFunction) else 0
        if actual != k:
            raise BindingError(f"variable {name!r} has arity {actual}, formula uses {k}")


def _term_value(t: Term, env: dict[str, Value]) -> AtomOrBottom:
    if isinstance(t, Omega):
        return None
    assert isinstance(t, App)
    v = env[t.name]
    if not t.args:
        return v if not isinstance(v, AFunction) else v.value
    assert isinstance(v, AFunction)
    args = []
    for a in t.args:
        av = _term_value(a, env)
        if av is None:
            return None
        args.append(av)
    return v.entries.get(tuple(args), None)


# ---------------------------------------------------------------------------
# Evaluator


class _Ctx:
    __slots__ = ("pool", "atoms", "cfg", "reach_cache", "step_frees")

    def __init__(self, pool: list[AtomOrBottom], atoms: list[Atom], cfg: EvalConfig):
        self.pool = pool  # [None] + sorted atoms
        self.atoms = atoms
        self.cfg = cfg
        self.reach_cache: dict = {}
        self.step_frees: dict = {}


def _make_ctx(phi: Formula, env: dict[str, Value], cfg: EvalConfig) -> _Ctx:
    base: set[Atom] = set()
    for v in env.values():
        base |= _value_scope(v)
    q = cfg.fresh_atom_count
    if q is None:
        q = count_atomic_quantifiers(phi)
    top = max(base) if base else -1
    fresh = list(range(top + 1, top + 1 + q))
    atoms = sorted(base) + fresh
    return _Ctx([None] + atoms, atoms, cfg)


def _eval(phi: Formula, env: dict[str, Value], ctx: _Ctx) -> ThreeValued:
    if isinstance(phi, Eq):
        return _term_value(phi.lhs, env) == _term_value(phi.rhs, env)
    if isinstance(phi, Not):
        return tv_not(_eval(phi.body, env, ctx))
    if isinstance(phi, And):
        l = _eval(phi.lhs, env, ctx)
        if l is False:
            return False
        return tv_and(l, _eval(phi.rhs, env, ctx))
    if isinstance(phi, Or):
        l = _eval(phi.lhs, env, ctx)
        if l is True:
            return True
        return tv_or(l, _eval(phi.rhs, env, ctx))
    if isinstance(phi, Implies):
        l = _eval(phi.lhs, env, ctx)
        if l is False:
            return True
        return tv_or(tv_not(l), _eval(phi.rhs, env, ctx))
    if isinstance(phi, Forall):
        pinned = _try_pinned_forall(phi, env, ctx)
        if pinned is not None:
            return pinned
        if phi.arity == 0:
            return _eval_forall_atomic(phi, env, ctx)
        return _eval_forall_functional(phi, env, ctx)
    if isinstance(phi, Exists):
        if isinstance(phi.hint, ReachHint):
            usable, out = _eval_reach(phi.hint, env, ctx)
            if usable:
                return out
        elif isinstance(phi.hint, StarHint):
            usable, out = _eval_star(phi.hint, env, ctx)
            if usable:
                return out
        return _eval_exists_block(phi, env, ctx)
    raise TypeError(f"not a formula: {phi!r}")


def _eval_forall_atomic(phi: Forall, env: dict[str, Value], ctx: _Ctx) -> ThreeValued:
    saw_unknown = False
    old = env.get(phi.var, _MISSING)
    try:
        for v in ctx.pool:
            env[phi.var] = v
            r = _eval(phi.body, env, ctx)
            if r is False:
                return False
            if r is None:
                saw_unknown = True
    finally:
        _restore(env, phi.var, old)
    return None if saw_unknown else True


_MISSING = object()
_UNSAT = object()


def _restore(env, name, old):
    if old is _MISSING:
        env.pop(name, None)
    else:
        env[name] = old


# -- functional universals ---------------------------------------------------


def _eval_forall_functional(phi: Forall, env: dict[str, Value], ctx: _Ctx) -> ThreeValued:
    if ctx.cfg.so_mode == FO_ONLY:
        raise BindingError("functional quantifier in fo-only evaluation")
    swapped = _try_pointwise_forall(phi, env, ctx)
    if swapped is not None:
        return swapped
    # search for a counterexample: exists v . not body
    found, complete, saw_unknown = _solve_block(
        [(phi.var, phi.arity)], Not(phi.body), env, ctx, want_all=False
    )
    if found:
        return False
    if ctx.cfg.so_mode == RESTRICTED:
        return True
    if complete and not saw_unknown:
        return True
    return None


def _try_pointwise_forall(phi: Forall, env: dict[str, Value], ctx: _Ctx) -> ThreeValued:
    """Decide ``forall f . forall u1..uk . B`` when f occurs only as f(u).

    B then only observes f at the single quantified point, so quantifying
    over the point's value is equivalent to quantifying over f: any
    (point, value) pair is realized by some function and vice versa.
    """
    us: list[str] = []
    body: Formula = phi.body
    while isinstance(body, Forall) and body.arity == 0 and len(us) < phi.arity:
        us.append(body.var)
        body = body.body
    if len(us) != phi.arity:
        return None
    if not _occurrences_are_pointwise(body, phi.var, tuple(us)):
        return None
    saw_unknown = False
    olds = {n: env.get(n, _MISSING) for n in us + [phi.var]}
    try:
        for args in itertools.product(ctx.pool, repeat=phi.arity):
            for u, a in zip(us, args):
                env[u] = a
            degenerate = any(a is None for a in args)
            values = [None] if degenerate else ctx.pool
            for v in values:
                probe = {} if (v is None or degenerate) else {tuple(args): v}
                env[phi.var] = AFunction(phi.arity, probe)
                r = _eval(body, env, ctx)
                if r is False:
                    return False
                if r is None:
                    saw_unknown = True
    finally:
        for n, old in olds.items():
            _restore(env, n, old)
    return None if saw_unknown else True


def _try_pinned_forall(phi: Forall, env: dict[str, Value], ctx: _Ctx) -> ThreeValued:
    """Decide ``forall v1..vn (pins -> rest)`` when every vi is pinned.

    A pin is a premise conjunct ``A u1..uk. vi(u) = t(u)`` (or the bare
    equation for nullary vi, either side) whose other side involves no
    quantified vj; it is satisfied by exactly one value, the slice of ``t``
    over the pool, so the universal reduces to the conclusion under the
    slice bindings.
    """
    names: list[tuple[str, int]] = []
    body: Formula = phi
    while isinstance(body, Forall):
        names.append((body.var, body.arity))
        body = body.body
    if not isinstance(body, Implies) or not names:
        return None
    arity_of = dict(names)
    bound = set(arity_of)
    pins: dict[str, tuple[Term, tuple[str, ...]]] = {}
    rest: list[Formula] = []
    for c in conjuncts(body.lhs):
        pin = _match_pin(c, bound, arity_of)
        if pin is None or pin[0] in pins:
            rest.append(c)
            continue
        name, t, uvars = pin
        if _mentions_any(t, bound):
            return None
        pins[name] = (t, uvars)
    if set(pins) != bound:
        return None
    olds = {n: env.get(n, _MISSING) for n in pins}
    try:
        for name, (t, uvars) in pins.items():
            env[name] = _slice_of(t, uvars, arity_of[name], env, ctx)
        out: ThreeValued = True
        for r in rest:
            out = tv_and(out, _eval(r, env, ctx))
            if out is False:
                break
        if out is False:
            return True  # premise fails at the only candidate: vacuous
        rhs = _eval(body.rhs, env, ctx)
        if out is True:
            return rhs
        return None if rhs is not True else True
    finally:
        for n, old in olds.items():
            _restore(env, n, old)


def _match_pin(c: Formula, bound: set[str], arity_of: dict[str, int]):
    """Match ``A u1..uk. f(u1..uk) = t`` for f in bound; returns (f, t, us)."""
    us: list[str] = []
    while isinstance(c, Forall) and c.arity == 0:
        us.append(c.var)
        c = c.body
    if not isinstance(c, Eq):
        return None
    for lhs, rhs in ((c.lhs, c.rhs), (c.rhs, c.lhs)):
        if not isinstance(lhs, App) or lhs.name not in bound:
            continue
        if len(lhs.args) != len(us) or arity_of[lhs.name] != len(us):
            continue
        if all(isinstance(a, App) and not a.args and a.name == u for a, u in zip(lhs.args, us)):
            if not _mentions_any(rhs, {lhs.name}):
                return (lhs.name, rhs, tuple(us))
    return None


def _mentions_any(t: Term, names: set[str]) -> bool:
    if isinstance(t, Omega):
        return False
    assert isinstance(t, App)
    return t.name in names or any(_mentions_any(a, names) for a in t.args)


def _slice_of(t: Term, uvars: Sequence[str], arity: int, env, ctx: _Ctx) -> AFunction:
    entries = {}
    olds = {u: env.get(u, _MISSING) for u in uvars}
    try:
        for args in itertools.product(ctx.atoms, repeat=arity):
            for u, a in zip(uvars, args):
                env[u] = a
            v = _term_value(t, env)
            if v is not None:
                entries[args] = v
    finally:
        for u, old in olds.items():
            _restore(env, u, old)
    return AFunction(arity, entries)


# -- existential blocks ------------------------------------------------------


def _eval_exists_block(phi: Exists, env: dict[str, Value], ctx: _Ctx) -> ThreeValued:
    if ctx.cfg.so_mode == FO_ONLY and phi.arity >= 1:
        raise BindingError("functional quantifier in fo-only evaluation")
    names: list[tuple[str, int]] = [(phi.var, phi.arity)]
    body: Formula = phi.body
    while isinstance(body, Exists) and body.hint is None:
        if ctx.cfg.so_mode == FO_ONLY and body.arity >= 1:
            raise BindingError("functional quantifier in fo-only evaluation")
        names.append((body.var, body.arity))
        body = body.body
    found, complete, saw_unknown = _solve_block(names, body, env, ctx, want_all=False)
    if found:
        return True
    if ctx.cfg.so_mode == RESTRICTED:
        return False
    if complete and not saw_unknown:
        return False
    return None


def _solve_block(
    names: list[tuple[str, int]],
    matrix: Formula,
    env: dict[str, Value],
    ctx: _Ctx,
    want_all: bool,
) -> tuple[list[dict[str, Value]] | bool, bool, bool]:
    """Search assignments for an existential block.

    The matrix's own leading (hint-free) existentials are absorbed into the
    block.  Variables are assigned one at a time, preferring variables whose
    constraints are already decidable; clauses are re-simplified as guards
    become decidable, so branch formulas collapse to the taken branch.  A
    clause carrying a closure hint whose post vector is still unassigned is
    expanded into its reachable states instead of being solved per variable.

    Returns (solutions-or-found, complete, saw_unknown).  ``complete`` means
    the enumeration provably covered every pool assignment, so an empty
    result refutes the block within the finitized semantics.
    """
    names = list(names)
    target_names = [n for n, _ in names]
    matrix = _absorb_exists(matrix, names)
    solutions: list[dict[str, Value]] = []
    state = {"complete": True, "unknown": False, "count": 0}

    def assign(clauses: list[Formula], remaining: list[tuple[str, int]]) -> bool:
        if state["count"] >= ctx.cfg.solution_limit:
            state["complete"] = False
            return False
        if not remaining:
            out: ThreeValued = True
            for c in clauses:
                out = tv_and(out, _eval(c, env, ctx))
                if out is False:
                    return False
            if out is None:
                state["unknown"] = True
                return False
            state["count"] += 1
            solutions.append({n: env[n] for n in target_names})
            return not want_all
        pending = {n for n, _ in remaining}

        # a reachability clause over still-unassigned variables enumerates
        # whole state vectors at once
        for c in clauses:
            expansion = _star_clause_expansion(c, env, ctx, pending)
            if expansion is None:
                continue
            post, states, complete = expansion
            if not complete:
                state["complete"] = False
            rest = [x for x in clauses if x is not c]
            arity_by_name = dict(remaining)
            olds = {n: env.get(n, _MISSING) for n in post}
            try:
                for st in states:
                    for n, v in zip(post, st):
                        env[n] = v if arity_by_name[n] >= 1 else _atom_of(v)
                    nxt = [x for x in remaining if x[0] not in post]
                    if _prune_and_recurse(rest + [c], nxt)(assign):
                        return True
            finally:
                for n, old in olds.items():
                    _restore(env, n, old)
            return False

        name, k = _pick_var(clauses, remaining, pending)
        candidates, cand_complete = _candidates_for(name, k, clauses, env, ctx, pending)
        if not cand_complete:
            state["complete"] = False
        old = env.get(name, _MISSING)
        try:
            for v in candidates:
                env[name] = v
                if _prune_and_recurse(clauses, [x for x in remaining if x[0] != name])(assign):
                    return True
        finally:
            _restore(env, name, old)
        return False

    def _prune_and_recurse(clauses, remaining):
        rest_pending = {n for n, _ in remaining}

        def run(cont) -> bool:
            simplified = []
            for c in clauses:
                c2 = _simplify(c, env, ctx, rest_pending)
                if c2 is _CONST_TRUE:
                    continue
                if c2 is _CONST_FALSE:
                    return False
                simplified.extend(conjuncts(c2))
            return cont(simplified, remaining)

        return run

    clauses0 = []
    for c in conjuncts(matrix):
        c2 = _simplify(c, env, ctx, {n for n, _ in names})
        if c2 is _CONST_FALSE:
            return ([] if want_all else False), True, False
        if c2 is not _CONST_TRUE:
            clauses0.extend(conjuncts(c2))
    hit = assign(clauses0, names)
    if want_all:
        return solutions, state["complete"], state["unknown"]
    return hit, state["complete"], state["unknown"]


def _absorb_exists(matrix: Formula, names: list[tuple[str, int]]) -> Formula:
    while isinstance(matrix, Exists) and matrix.hint is None:
        names.append((matrix.var, matrix.arity))
        matrix = matrix.body
    return matrix


def _pick_var(clauses, remaining, pending):
    """Prefer a variable some clause constrains without other pending vars."""
    for name, k in remaining:
        others = pending - {name}
        for c in clauses:
            try:
                fv = set(free_vars(c))
            except BindingError:
                continue
            if name in fv and not (fv & others):
                return name, k
    for name, k in remaining:
        if k == 0:
            return name, k
    return remaining[0]


def _star_clause_expansion(c: Formula, env, ctx, pending):
    """If c is a closure formula whose post vector is pending, enumerate it."""
    if not isinstance(c, Exists) or not isinstance(c.hint, StarHint):
        return None
    hint = c.hint
    if not set(hint.post) <= pending or any(n not in env for n in hint.pre):
        return None
    start = tuple(_as_value(env[n]) for n in hint.pre)
    states, complete = _reach_set(hint, start, env, ctx)
    return list(hint.post), sorted(states, key=_state_key), complete


def _state_key(state):
    return tuple(sorted(f.entries.items()) for f in state)


_CONST_TRUE = object()
_CONST_FALSE = object()


def _simplify(phi: Formula, env, ctx: _Ctx, pending: set[str]):
    """Fold decidable quantifier-free subformulas to constants.

    Only touches parts whose free variables are all bound; quantified or
    hinted subformulas are left intact.
    """
    if isinstance(phi, Eq):
        if _mentions_any(phi.lhs, pending) or _mentions_any(phi.rhs, pending):
            return phi
        return _CONST_TRUE if _term_value(phi.lhs, env) == _term_value(phi.rhs, env) else _CONST_FALSE
    if isinstance(phi, Not):
        b = _simplify(phi.body, env, ctx, pending)
        if b is _CONST_TRUE:
            return _CONST_FALSE
        if b is _CONST_FALSE:
            return _CONST_TRUE
        return phi if b is phi.body else Not(b)
    if isinstance(phi, And):
        l = _simplify(phi.lhs, env, ctx, pending)
        r = _simplify(phi.rhs, env, ctx, pending)
        if l is _CONST_FALSE or r is _CONST_FALSE:
            return _CONST_FALSE
        if l is _CONST_TRUE:
            return r
        if r is _CONST_TRUE:
            return l
        return phi if (l is phi.lhs and r is phi.rhs) else And(l, r)
    if isinstance(phi, Or):
        l = _simplify(phi.lhs, env, ctx, pending)
        r = _simplify(phi.rhs, env, ctx, pending)
        if l is _CONST_TRUE or r is _CONST_TRUE:
            return _CONST_TRUE
        if l is _CONST_FALSE:
            return r
        if r is _CONST_FALSE:
            return l
        return phi if (l is phi.lhs and r is phi.rhs) else Or(l, r)
    if isinstance(phi, Implies):
        l = _simplify(phi.lhs, env, ctx, pending)
        r = _simplify(phi.rhs, env, ctx, pending)
        if l is _CONST_FALSE or r is _CONST_TRUE:
            return _CONST_TRUE
        if l is _CONST_TRUE:
            return r
        if r is _CONST_FALSE:
            return Not(l)
        return phi if (l is phi.lhs and r is phi.rhs) else Implies(l, r)
    return phi


def _candidates_for(
    name: str,
    arity: int,
    clauses: list[Formula],
    env: dict[str, Value],
    ctx: _Ctx,
    later: set[str],
):
    """Candidate values for one existential variable.

    Atomic variables enumerate the pool (complete).  Functional variables
    are solved pointwise from the clauses that constrain them, when every
    such clause determines the variable's value at one argument point at a
    time; otherwise a blind bounded enumeration is used (incomplete).
    """
    if arity == 0:
        return list(ctx.pool), True
    other_pending = later - {name}
    usable: list[Formula] = []
    for c in clauses:
        try:
            fv = set(free_vars(c))
        except BindingError:
            continue
        if name not in fv or fv & other_pending:
            continue  # dropping constraints only widens the candidate set
        usable.append(c)
    if usable:
        table = _pointwise_table(name, arity, usable, env, ctx)
        if table is _UNSAT:
            return [], True
        if table is not None:
            sols = _table_products(table, arity, ctx)
            if sols is not None:
                return sols, True
    # blind fallback
    return _functions_upto(ctx.atoms, arity, ctx.cfg.so_entry_bound), False


def _pointwise_table(name, arity, clauses, env, ctx: _Ctx):
    """Allowed-value sets per argument point, from the clauses that fit.

    Handles clauses of two shapes: ground point equations ``f(t..) = q``
    (either side), and universal pointwise clauses ``A u1..uk. B`` where
    every occurrence of f in B is exactly ``f(u1..uk)``.  Clauses of other
    shapes are skipped: dropping constraints widens the candidate set, and
    every candidate is verified against the full matrix afterwards, so the
    enumeration stays a complete cover of the solutions.  Returns None when
    no clause fits.
    """
    table: dict[tuple[Atom, ...], set] = {}
    universal: list[tuple[tuple[str, ...], Formula]] = []
    points: list[tuple[tuple[Atom, ...], Formula]] = []
    for c in clauses:
        us: list[str] = []
        body = c
        while isinstance(body, Forall) and body.arity == 0:
            us.append(body.var)
            body = body.body
        if us:
            if len(us) == arity and _occurrences_are_pointwise(body, name, tuple(us)):
                universal.append((tuple(us), body))
            continue
        # ground clause: every occurrence must be f applied to ground terms
        occ = _ground_occurrences(c, name)
        if not occ:
            continue
        pts = set()
        usable = True
        for args in occ:
            vals = []
            for a in args:
                try:
                    v = _term_value(a, env)
                except KeyError:
                    v = None
                if v is None:
                    usable = False
                    break
                vals.append(v)
            if not usable:
                break
            pts.add(tuple(vals))
        if usable and len(pts) == 1:
            points.append((pts.pop(), c))
    if not universal and not points:
        return None

    probe_old = env.get(name, _MISSING)
    try:
        for args in itertools.product(ctx.atoms, repeat=arity):
            allowed = set()
            for val in ctx.pool:
                env[name] = AFunction(arity, {} if val is None else {args: val})
                ok: ThreeValued = True
                for us, body in universal:
                    olds = {u: env.get(u, _MISSING) for u in us}
                    try:
                        for u, a in zip(us, args):
                            env[u] = a
                        ok = tv_and(ok, _eval(body, env, ctx))
                    finally:
                        for u, old in olds.items():
                            _restore(env, u, old)
                    if ok is False:
                        break
                if ok is not False:
                    for pt, c in points:
                        if pt == args:
                            ok = tv_and(ok, _eval(c, env, ctx))
                            if ok is False:
                                break
                if ok is True:
                    allowed.add(val)
                elif ok is None:
                    return None
            if not allowed:
                return _UNSAT
            table[args] = allowed
    finally:
        _restore(env, name, probe_old)
    return table


def _occurrences_are_pointwise(phi: Formula, name: str, us: tuple[str, ...]) -> bool:
    def term_ok(t: Term) -> bool:
        if isinstance(t, Omega):
            return True
        assert isinstance(t, App)
        if t.name == name:
            if len(t.args) != len(us):
                return False
            if not all(
                isinstance(a, App) and not a.args and a.name == u for a, u in zip(t.args, us)
            ):
                return False
            return True
        return all(term_ok(a) for a in t.args)

    def walk(f: Formula) -> bool:
        if isinstance(f, Eq):
            return term_ok(f.lhs) and term_ok(f.rhs)
        if isinstance(f, Not):
            return walk(f.body)
        if isinstance(f, (And, Or, Implies)):
            return walk(f.lhs) and walk(f.rhs)
        if isinstance(f, (Forall, Exists)):
            if f.var == name or f.var in us:
                return False  # shadowing: bail out
            return name not in free_vars(f) or walk(f.body)
        return False

    return walk(phi)


def _ground_occurrences(phi: Formula, name: str):
    """Argument tuples of every application of ``name``; None if non-applied use."""
    out: list[tuple[Term, ...]] = []

    def term_walk(t: Term) -> bool:
        if isinstance(t, Omega):
            return True
        assert isinstance(t, App)
        if t.name == name:
            if any(_mentions_any(a, {name}) for a in t.args):
                return False
            out.append(t.args)
            return True
        return all(term_walk(a) for a in t.args)

    def walk(f: Formula) -> bool:
        if isinstance(f, Eq):
            return term_walk(f.lhs) and term_walk(f.rhs)
        if isinstance(f, Not):
            return walk(f.body)
        if isinstance(f, (And, Or, Implies)):
            return walk(f.lhs) and walk(f.rhs)
        if isinstance(f, (Forall, Exists)):
            return walk(f.body)
        return False

    return out if walk(phi) else None


def _table_products(table, arity, ctx: _Ctx):
    """All functions consistent with an allowed-value table (capped)."""
    items = sorted(table.items())
    total = 1
    for _, allowed in items:
        total *= len(allowed)
        if total > ctx.cfg.solution_limit:
            return None
    sols = []
    for combo in itertools.product(*(sorted(a, key=_val_key) for _, a in items)):
        entries = {args: v for (args, _), v in zip(items, combo) if v is not None}
        sols.append(AFunction(arity, entries))
    return sols


def _val_key(v):
    return (-1, -1) if v is None else (0, v)


def _functions_upto(atoms: Sequence[Atom], arity: int, bound: int) -> Iterator[AFunction]:
    inputs = list(itertools.product(atoms, repeat=arity))
    yield AFunction(arity, {})
    for m in range(1, bound + 1):
        if m > len(inputs):
            break
        for chosen in itertools.combinations(inputs, m):
            for outs in itertools.product(atoms, repeat=m):
                yield AFunction(arity, dict(zip(chosen, outs)))


# -- closure hints ------------------------------------------------------------


def _eval_star(hint: StarHint, env: dict[str, Value], ctx: _Ctx) -> tuple[bool, ThreeValued]:
    if any(n not in env for n in hint.pre) or any(n not in env for n in hint.post):
        return False, None  # hint unusable here; caller falls back
    start = tuple(_as_value(env[n]) for n in hint.pre)
    target = tuple(_as_value(env[n]) for n in hint.post)
    if target == start:
        return True, True
    reached, complete = _reach_set(hint, start, env, ctx)
    if target in reached:
        return True, True
    return True, (False if complete else None)


def _eval_reach(hint: ReachHint, env: dict[str, Value], ctx: _Ctx) -> tuple[bool, ThreeValued]:
    star = hint.star
    if any(n not in env for n in star.pre):
        return False, None
    start = tuple(_as_value(env[n]) for n in star.pre)
    reached, complete = _reach_set(star, start, env, ctx)
    saw_unknown = False
    olds = {n: env.get(n, _MISSING) for n in star.post}
    try:
        for state in reached:
            for n, v, k in zip(star.post, state, star.arities):
                env[n] = v if k >= 1 else _atom_of(v)
            r = _eval(hint.rest, env, ctx)
            if r is True:
                return True, True
            if r is None:
                saw_unknown = True
    finally:
        for n, old in olds.items():
            _restore(env, n, old)
    if complete and not saw_unknown:
        return True, False
    return True, None


def _as_value(v: Value) -> Value:
    if isinstance(v, AFunction):
        return v
    return AFunction.token(v)  # normalize nullary to a function for hashing


def _atom_of(v: Value) -> AtomOrBottom:
    return v.value if isinstance(v, AFunction) else v


def _reach_set(hint: StarHint, start, env: dict[str, Value], ctx: _Ctx):
    """BFS over concrete state vectors along the step relation.

    The chain tags of the underlying formula must be distinct pool atoms,
    which caps the path length at the pool size.  Results are cached per
    (hint, start, ambient bindings of the step's other free variables).
    """
    frees = ctx.step_frees.get(id(hint))
    if frees is None:
        frees = tuple(sorted(set(free_vars(hint.step)) - set(hint.pre) - set(hint.post)))
        ctx.step_frees[id(hint)] = frees
    key = (id(hint), start, tuple(_as_value(env[n]) for n in frees))
    cached = ctx.reach_cache.get(key)
    if cached is not None:
        return cached
    max_steps = max(0, len(ctx.atoms) - 1)
    visited = {start}
    frontier = [start]
    complete = hint.complete
    steps = 0
    while frontier and steps < max_steps:
        next_frontier = []
        for cur in frontier:
            olds = {n: env.get(n, _MISSING) for n in hint.pre}
            try:
                for n, v, k in zip(hint.pre, cur, hint.arities):
                    env[n] = v if k >= 1 else _atom_of(v)
                names = [(n, k) for n, k in zip(hint.post, hint.arities)]
                sols, sols_complete, saw_unknown = _solve_block(
                    names, hint.step, env, ctx, want_all=True
                )
                if not sols_complete or saw_unknown:
                    complete = False
                for sol in sols:
                    state = tuple(_as_value(sol[n]) for n in hint.post)
                    if state not in visited:
                        visited.add(state)
                        next_frontier.append(state)
            finally:
                for n, old in olds.items():
                    _restore(env, n, old)
        frontier = next_frontier
        steps += 1
    if frontier:
        complete = False  # ran out of chain atoms while still expanding
    ctx.reach_cache[key] = (visited, complete)
    return visited, complete


# ---------------------------------------------------------------------------
# Fast path for first-order evaluation


def _compile_term(t: Term):
    if isinstance(t, Omega):
        return lambda env: None
    assert isinstance(t, App)
    name = t.name
    if not t.args:
        return lambda env: env[name]
    argfns = [_compile_term(a) for a in t.args]
    if len(argfns) == 1:
        a0 = argfns[0]

        def unary(env):
            v = a0(env)
            if v is None:
                return None
            return env[name].entries.get((v,), None)

        return unary

    def nary(env):
        vals = []
        for fn in argfns:
            v = fn(env)
            if v is None:
                return None
            vals.append(v)
        return env[name].entries.get(tuple(vals), None)

    return nary


def _compile_fo(phi: Formula, pool: list[AtomOrBottom]):
    if isinstance(phi, Eq):
        l, r = _compile_term(phi.lhs), _compile_term(phi.rhs)
        return lambda env: l(env) == r(env)
    if isinstance(phi, Not):
        b = _compile_fo(phi.body, pool)
        return lambda env: not b(env)
    if isinstance(phi, And):
        l, r = _compile_fo(phi.lhs, pool), _compile_fo(phi.rhs, pool)
        return lambda env: l(env) and r(env)
    if isinstance(phi, Or):
        l, r = _compile_fo(phi.lhs, pool), _compile_fo(phi.rhs, pool)
        return lambda env: l(env) or r(env)
    if isinstance(phi, Implies):
        l, r = _compile_fo(phi.lhs, pool), _compile_fo(phi.rhs, pool)
        return lambda env: (not l(env)) or r(env)
    if isinstance(phi, (Forall, Exists)):
        if phi.arity != 0:
            raise BindingError("functional quantifier in fo-only evaluation")
        body = _compile_fo(phi.body, pool)
        name = phi.var
        if isinstance(phi, Forall):

            def fa(env):
                old = env.get(name, _MISSING)
                try:
                    for v in pool:
                        env[name] = v
                        if not body(env):
                            return False
                    return True
                finally:
                    _restore(env, name, old)

            return fa

        def ex(env):
            old = env.get(name, _MISSING)
            try:
                for v in pool:
                    env[name] = v
                    if body(env):
                        return True
                return False
            finally:
                _restore(env, name, old)

        return ex
    raise TypeError(f"not a formula: {phi!r}")


# ---------------------------------------------------------------------------
# Public API


def eval_fo(
    sigma: Structure,
    phi: Formula,
    cfg: EvalConfig | None = None,
    extra=None,
) -> bool:
    """Decide a first-order formula exactly over the finitized domain."""
    cfg = replace(cfg, so_mode=FO_ONLY) if cfg else EvalConfig(so_mode=FO_ONLY)
    if not is_first_order(phi):
        raise BindingError("eval_fo requires a first-order formula")
    env = _env_from_structure(sigma, extra)
    _check_bindings(phi, env)
    ctx = _make_ctx(phi, env, cfg)
    return _compile_fo(phi, ctx.pool)(env)


def eval_bounded(
    sigma: Structure,
    phi: Formula,
    cfg: EvalConfig | None = None,
    extra=None,
) -> ThreeValued:
    """Three-valued evaluation with bounded second-order search.

    True and False answers are reliable for the finitized semantics; None
    means the search budget was exhausted without a verdict.
    """
    cfg = cfg or EvalConfig()
    env = _env_from_structure(sigma, extra)
    _check_bindings(phi, env)
    ctx = _make_ctx(phi, env, cfg)
    return _eval(phi, env, ctx)


def check_with_witness(
    sigma: Structure,
    phi: Formula,
    witness: dict[str, "AFunction | AtomOrBottom"],
    cfg: EvalConfig | None = None,
    extra=None,
) -> bool:
    """Bind a witness for the existential prefix and evaluate the matrix.

    Witnessed existentials are stripped through conjunctions as well, so a
    witness may also cover closure quantifiers sitting inside a conjunct
    (formula variable names are globally unique by construction).  Returns
    True only when the witnessed matrix verifiably holds; an unknown
    verdict counts as failure.
    """
    cfg = cfg or EvalConfig(so_mode=WITNESSED)
    env = _env_from_structure(sigma, extra)

    def bind(name: str, arity: int, v) -> None:
        actual = v.arity if isinstance(v, AFunction) else 0
        if actual != arity:
            raise BindingError(
                f"witness for {name!r} has arity {actual}, formula binds {arity}"
            )
        env[name] = v.value if isinstance(v, AFunction) and v.arity == 0 else v

    def strip(f: Formula) -> Formula:
        while isinstance(f, Exists) and f.var in witness:
            bind(f.var, f.arity, witness[f.var])
            f = f.body
        if isinstance(f, And):
            return And(strip(f.lhs), strip(f.rhs))
        return f

    matrix = strip(phi)
    _check_bindings(matrix, env)
    ctx = _make_ctx(matrix, env, cfg)
    return _eval(matrix, env, ctx) is True
