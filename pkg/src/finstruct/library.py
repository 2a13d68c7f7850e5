"""Builders for the named formulas and axiom schemas.

Everything here is a pure constructor returning a :class:`Formula`.  A few
displayed formulas needed repairs to characterize what their surrounding
text says they characterize; each repair is noted on the builder and the
literal display is kept alongside where comparison is instructive:

* injectivity conjuncts are guarded to the function's domain (two atoms
  outside the domain both map to undefined, so the unguarded version is
  unsatisfiable alongside a nonempty pool);
* the chain-shape formula gets its "every scope atom is reachable from the
  zero token" conjunct from a closure formula, since no first-order
  formula excludes disjoint cycles;
* the chain-isomorphism formula adds an end-preservation conjunct, without
  which it is satisfied by embeddings of a shorter chain into a longer one;
* the successor-extension formula is anchored at the zero token and
  constrains only chain points, so that a finite witness exists.
"""

from __future__ import annotations

import itertools

from .structures import OMEGA, Term, VocabularyError, app
from .formulas import (
    And,
    Eq,
    Exists,
    Forall,
    Formula,
    Implies,
    Not,
    Or,
    conj,
    defined,
    disj,
    eq,
    exists,
    forall,
    neq,
    undefined,
)
from .logic import ReachHint, StarHint


def _names(prefix: str, k: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(1, k + 1)]


def _apps(names) -> list[Term]:
    return [app(n) for n in names]


# ---------------------------------------------------------------------------
# Membership abbreviations


def tuple_in_function(ts: list[Term], f: str) -> Formula:
    """``t-vector is in f``: the application is defined."""
    return defined(app(f, *ts))


def atom_in_function(t: Term, f: str, arity: int, fresh: str = "mv") -> Formula:
    """``t occurs in f``: in some input position, or as a defined output.

    The output disjunct requires the witnessing application to be defined,
    so the undefined value never counts as occurring.
    """
    if arity == 0:
        return And(defined(app(f)), eq(t, app(f)))
    cases: list[Formula] = []
    for pos in range(arity):
        vs = _names(fresh, arity - 1)
        args: list[Term] = []
        vi = iter(vs)
        for i in range(arity):
            args.append(t if i == pos else app(next(vi)))
        cases.append(exists([(v, 0) for v in vs], defined(app(f, *args))))
    vs = _names(fresh, arity)
    out = exists(
        [(v, 0) for v in vs],
        And(defined(app(f, *_apps(vs))), eq(t, app(f, *_apps(vs)))),
    )
    return disj(cases + [out])


def scope_formula(vocabulary, x: str = "x") -> Formula:
    """The atom denoted by x occurs in some entry of some component.

    False of the undefined value: every disjunct demands a defined
    application around the occurrence.
    """
    items = list(vocabulary)
    if not items:
        from .formulas import FALSE

        return FALSE
    return disj(
        atom_in_function(app(x), name, k, fresh=f"sv_{name}_") for name, k in items
    )


# ---------------------------------------------------------------------------
# Transitive closure (iteration) formulas


def injective_on_domain(s: str, x: str = "x", y: str = "y") -> Formula:
    sx, sy = app(s, app(x)), app(s, app(y))
    return forall([(x, 0), (y, 0)], Implies(And(eq(sx, sy), defined(sx)), eq(app(x), app(y))))


def star_formula(
    step: Formula,
    pre: list[str],
    post: list[str],
    arities: list[int],
    fresh_prefix: str = "st",
    complete_hint: bool = True,
) -> Formula:
    """The iteration closure of a binary relation on structure vectors.

    Emits the bundled-history existential: a fresh injective acyclic chain
    tags the snapshots of the vector, the bundle's slice at the chain head
    equals the pre vector, consecutive slices satisfy ``step``, and the
    slice at the chain's end equals the post vector.  The slice-equality
    abbreviation is expanded into pointwise conditions.

    The end-of-chain conjunct is guarded to atoms on the chain (the head or
    a successor image); applying it to every dead atom, as displayed, would
    force the post vector onto every atom outside the chain and admit no
    finite bundle next to a nonempty fresh pool.

    The returned formula carries an evaluation hint; ``complete_hint``
    asserts that solving ``step`` enumerates all successors of a state.
    """
    if not (len(pre) == len(post) == len(arities)):
        raise VocabularyError("pre/post/arity vectors must have equal length")
    z = f"{fresh_prefix}_z"
    s = f"{fresh_prefix}_s"
    x, y, u = f"{fresh_prefix}_x", f"{fresh_prefix}_y", f"{fresh_prefix}_u"
    bundle = [f"{fresh_prefix}_b_{n}" for n in pre]
    lvars = [f"{fresh_prefix}_l_{n}" for n in pre]
    mvars = [f"{fresh_prefix}_m_{n}" for n in pre]

    def slice_eq(b: str, tag: str, target: str, k: int) -> Formula:
        """target = bundle slice at tag, pointwise."""
        if k == 0:
            return eq(app(target), app(b, app(tag)))
        us = _names(f"{fresh_prefix}_u_{b}_", k)
        return forall(
            [(v, 0) for v in us],
            eq(app(target, *_apps(us)), app(b, app(tag), *_apps(us))),
        )

    sx = app(s, app(x))
    head_is_pre = conj(slice_eq(b, z, f, k) for b, f, k in zip(bundle, pre, arities))
    pins = [slice_eq(b, x, l, k) for b, l, k in zip(bundle, lvars, arities)]
    pins += [slice_eq(b, f"{fresh_prefix}_sx", m, k) for b, m, k in zip(bundle, mvars, arities)]
    step_renamed = _vector_rename(step, pre, post, lvars, mvars)
    step_cond = forall(
        [(x, 0)],
        Implies(
            defined(sx),
            forall(
                [(f"{fresh_prefix}_sx", 0)],
                Implies(
                    eq(app(f"{fresh_prefix}_sx"), sx),
                    forall(
                        [(v, 0 if k == 0 else k) for v, k in zip(lvars + mvars, arities + arities)],
                        Implies(conj(pins), step_renamed),
                    ),
                ),
            ),
        ),
    )
    on_chain = Or(eq(app(x), app(z)), exists([(y, 0)], eq(app(s, app(y)), app(x))))
    terminal = forall(
        [(x, 0)],
        Implies(
            And(And(on_chain, undefined(sx)), defined(app(x))),
            conj(slice_eq(b, x, g, k) for b, g, k in zip(bundle, post, arities)),
        ),
    )
    body = conj(
        [
            defined(app(z)),
            forall([(x, 0)], neq(app(s, app(x)), app(z))),
            injective_on_domain(s, x, y),
            exists(
                [(b, k + 1) for b, k in zip(bundle, arities)],
                And(head_is_pre, And(step_cond, terminal)),
            ),
        ]
    )
    hint = StarHint(
        pre=tuple(pre),
        post=tuple(post),
        arities=tuple(arities),
        step=step,
        complete=complete_hint,
    )
    return exists([(z, 0), (s, 1)], body, hint=hint)


def _vector_rename(phi: Formula, pre, post, new_pre, new_post) -> Formula:
    from .formulas import rename_free

    mapping = dict(zip(list(pre) + list(post), list(new_pre) + list(new_post)))
    return rename_free(phi, mapping)


def growth_step(vocabulary, g: str = "acc_g", h: str = "acc_h", x: str = "acc_x") -> Formula:
    """One closure step of term reachability, on canonical set-functions.

    The post set extends the pre set only by atoms that are values of some
    component applied to members of the pre set; sets are represented as
    identity-valued unary functions.
    """
    gx, hx = app(g, app(x)), app(h, app(x))
    new_atom_cases = []
    for name, k in vocabulary:
        ys = _names(f"acc_y_{name}_", k)
        member_conds = [defined(app(g, app(yv))) for yv in ys]
        new_atom_cases.append(
            exists(
                [(yv, 0) for yv in ys],
                conj(member_conds + [eq(app(x), app(name, *_apps(ys)))]),
            )
        )
    grown = And(And(eq(hx, app(x)), undefined(gx)), disj(new_atom_cases))
    return forall([(x, 0)], Or(eq(hx, gx), grown))


def accessible_formula(vocabulary, u: str = "u") -> Formula:
    """The atom denoted by u is the value of some term (existential form)."""
    items = list(vocabulary)
    step = growth_step(items)
    star = star_formula(step, ["acc_g"], ["acc_h"], [1], fresh_prefix="acc_st",
                        complete_hint=True)
    empty_pin = forall([("acc_w", 0)], undefined(app("acc_g", app("acc_w"))))
    inner = Exists(
        "acc_h",
        1,
        And(star, defined(app("acc_h", app(u)))),
        hint=ReachHint(star=star.hint, rest=defined(app("acc_h", app(u)))),
    )
    return exists([("acc_g", 1)], And(empty_pin, inner))


def accessibility_sentence(vocabulary, u: str = "u") -> Formula:
    """True exactly of accessible structures over the vocabulary."""
    items = list(vocabulary)
    return forall(
        [(u, 0)],
        Implies(scope_formula(items, u), accessible_formula(items, u)),
    )


# ---------------------------------------------------------------------------
# The chain-shape formula and its relatives


def nu_formula(z: str = "z", s: str = "s") -> Formula:
    """Holds exactly of structures shaped like a numeral chain.

    Conjuncts: the zero token is defined, the successor is injective on its
    domain, the zero token heads the chain (never a successor image), and
    every scope atom is reachable from the zero token.  The last conjunct
    is the closure formula; no first-order condition can exclude disjoint
    successor cycles.
    """
    vocab = [(z, 0), (s, 1)]
    z_not_succ = forall([("nu_x", 0)], neq(app(s, app("nu_x")), app(z)))
    return conj(
        [
            defined(app(z)),
            injective_on_domain(s, "nu_x", "nu_y"),
            z_not_succ,
            forall(
                [("nu_u", 0)],
                Implies(
                    scope_formula(vocab, "nu_u"),
                    accessible_formula(vocab, "nu_u"),
                ),
            ),
        ]
    )


def nu_literal(z: str = "z", s: str = "s") -> Formula:
    """The displayed two-conjunct version, kept for comparison.

    Its unguarded injectivity clause fails as soon as two atoms lie outside
    the successor's domain, and its second clause demands every atom be a
    successor image or map to zero; it does not characterize chains.
    """
    x, y = app("nu_x"), app("nu_y")
    sx, sy = app(s, x), app(s, y)
    inj = forall(
        [("nu_x", 0), ("nu_y", 0)],
        Implies(And(And(eq(sx, sy), defined(x)), defined(y)), eq(x, y)),
    )
    second = forall(
        [("nu_x", 0)],
        Or(eq(sx, app(z)), exists([("nu_y", 0)], eq(x, sy))),
    )
    return And(inj, second)


def isom_formula(f: str, z: str, s: str, z2: str, s2: str) -> Formula:
    """f maps one chain isomorphically onto another.

    Beyond the displayed conjuncts (zero maps to zero, f commutes with the
    successor on its domain), the chain's end must map to the other chain's
    end; without it the formula is satisfied by any embedding of a shorter
    chain into a longer one, and the two chains need not have equal length.
    """
    a = f"is_{f}_a"
    fa = app(f, app(a))
    sa = app(s, app(a))
    fsa = app(f, sa)
    s2fa = app(s2, fa)
    return conj(
        [
            eq(app(f, app(z)), app(z2)),
            forall([(a, 0)], Implies(defined(sa), And(eq(fsa, s2fa), defined(s2fa)))),
            forall([(a, 0)], Implies(And(defined(app(a)), undefined(sa)), undefined(s2fa))),
        ]
    )


def iso_formula(z: str, s: str, z2: str, s2: str, f: str = "iso_f") -> Formula:
    """Two chains are isomorphic: the equality relation between numerals."""
    return exists([(f, 1)], isom_formula(f, z, s, z2, s2))


def canonical_chain_map(sigma, z: str, s: str, z2: str, s2: str):
    """The lockstep walk of two chains, as a candidate isomorphism witness.

    The isomorphism conditions force a witness's value at the head and then
    along the whole first chain, so on chain-shaped inputs this candidate
    satisfies them iff some witness does.  Stops if either walk cycles.
    """
    from .structures import AFunction

    a = sigma.get(z).value
    b = sigma.get(z2).value
    if a is None or b is None:
        return None
    sf, sf2 = sigma.get(s), sigma.get(s2)
    entries = {}
    seen = set()
    while True:
        if a in seen:
            return None
        seen.add(a)
        entries[(a,)] = b
        na, nb = sf((a,)), sf2((b,))
        if na is None or nb is None:
            # a length mismatch leaves the commute or end conjunct violated
            break
        a, b = na, nb
    return AFunction(1, entries)


def suc_formula(z: str, s: str, t: str) -> Formula:
    """t extends the chain of (z, s) by exactly one step.

    Constrained on the chain's atoms only (the zero anchor and atoms
    occurring in s): on the chain's interior t agrees with s, and at the
    chain's end t adds one step beyond which it is undefined.  The display
    constrains every atom, which no finite function satisfies; the zero
    anchor is needed so the empty chain still forces a one-step t.
    """
    a = "suc_a"
    sa, ta = app(s, app(a)), app(t, app(a))
    on_chain = Or(eq(app(a), app(z)), atom_in_function(app(a), s, 1, fresh="suc_m"))
    return forall(
        [(a, 0)],
        Implies(
            And(defined(app(a)), on_chain),
            Or(
                And(defined(sa), eq(ta, sa)),
                And(And(undefined(sa), defined(ta)), undefined(app(t, ta))),
            ),
        ),
    )


# ---------------------------------------------------------------------------
# Axiom schemas


def strictness_axiom(k: int, f: str = "f", u: str = "u") -> Formula:
    """An undefined argument forces an undefined application (free f, u-vector).

    The displayed schema implies the converse direction, which the empty
    function already refutes at any atom argument; only this direction is
    valid over strict finite functions.
    """
    if k < 1:
        raise VocabularyError("strictness needs arity >= 1")
    us = _names(u, k)
    return Implies(
        disj(undefined(app(v)) for v in us),
        undefined(app(f, *_apps(us))),
    )


def infinity_axiom(k: int, f: str = "f", u: str = "u") -> Formula:
    """Some argument tuple is outside f's domain: the atom supply is unbounded."""
    if k < 1:
        raise VocabularyError("infinity needs arity >= 1")
    us = _names(u, k)
    return exists([(v, 0) for v in us], undefined(app(f, *_apps(us))))


def empty_function_axiom(k: int, g: str = "g", u: str = "u") -> Formula:
    if k < 1:
        raise VocabularyError("empty-function needs arity >= 1")
    us = _names(u, k)
    return exists(
        [(g, k)],
        forall([(v, 0) for v in us], undefined(app(g, *_apps(us)))),
    )


def extension_axiom(k: int, f: str = "f", g: str = "g", u: str = "u", v: str = "v") -> Formula:
    """g agrees with f everywhere except the u-point, where it takes v."""
    if k < 1:
        raise VocabularyError("extension needs arity >= 1")
    us = _names(u, k)
    ws = _names("w", k)
    off_point = disj(neq(app(w), app(uv)) for w, uv in zip(ws, us))
    return exists(
        [(g, k)],
        And(
            eq(app(g, *_apps(us)), app(v)),
            forall(
                [(w, 0) for w in ws],
                Implies(off_point, eq(app(g, *_apps(ws)), app(f, *_apps(ws)))),
            ),
        ),
    )


def explicit_definition_axiom(k: int, t: Term, f: str = "f", g: str = "g", u: str = "u") -> Formula:
    """g is defined by the term t on f's domain and undefined elsewhere."""
    if k < 1:
        raise VocabularyError("explicit definition needs arity >= 1")
    us = _names(u, k)
    in_dom = tuple_in_function(_apps(us), f)
    return exists(
        [(g, k)],
        forall(
            [(w, 0) for w in us],
            Or(
                And(in_dom, eq(app(g, *_apps(us)), t)),
                And(Not(in_dom), undefined(app(g, *_apps(us)))),
            ),
        ),
    )


def f_induction_axiom(k: int, phi, f: str = "find_f") -> Formula:
    """The induction schema for a property of k-ary functions.

    ``phi`` maps a variable name to the formula asserting the property of
    that variable.  The abbreviations for the property holding of the empty
    function and of a one-point extension are expanded as displayed, via
    universally quantified pinned functions.
    """
    if k < 1:
        raise VocabularyError("f-induction needs arity >= 1")
    us = _names(f"{f}_u", k)
    v = f"{f}_v"
    g = f"{f}_g"
    ws = _names(f"{f}_w", k)

    phi_empty = forall(
        [(g, k)],
        Implies(
            forall([(w, 0) for w in ws], undefined(app(g, *_apps(ws)))),
            phi(g),
        ),
    )
    off_point = disj(neq(app(w), app(uv)) for w, uv in zip(ws, us))
    pin_update = And(
        eq(app(g, *_apps(us)), app(v)),
        forall(
            [(w, 0) for w in ws],
            Implies(off_point, eq(app(g, *_apps(ws)), app(f, *_apps(ws)))),
        ),
    )
    phi_update = forall([(g, k)], Implies(pin_update, phi(g)))
    step = forall(
        [(f, k)] + [(u, 0) for u in us] + [(v, 0)],
        Implies(And(phi(f), undefined(app(f, *_apps(us)))), phi_update),
    )
    return Implies(step, Implies(phi_empty, forall([(f, k)], phi(f))))


def axiom_instance(schema: str, k: int, **kwargs) -> Formula:
    """Uniform access to the schema builders by name."""
    builders = {
        "Strictness": strictness_axiom,
        "Infinity": infinity_axiom,
        "Empty": empty_function_axiom,
        "Extension": extension_axiom,
        "ExplicitDefinition": explicit_definition_axiom,
        "fInduction": f_induction_axiom,
    }
    try:
        builder = builders[schema]
    except KeyError:
        raise VocabularyError(f"unknown schema {schema!r}") from None
    return builder(k, **kwargs)


# ---------------------------------------------------------------------------
# Derived schemas (kept as semantic property checks)


def union_schema(k: int, f1: str = "f1", f2: str = "f2", g: str = "g") -> Formula:
    """Some g is defined exactly where f1 or f2 is."""
    us = _names("u", k)
    in_g = tuple_in_function(_apps(us), g)
    in_f1 = tuple_in_function(_apps(us), f1)
    in_f2 = tuple_in_function(_apps(us), f2)
    both = And(Implies(in_g, Or(in_f1, in_f2)), Implies(Or(in_f1, in_f2), in_g))
    return exists([(g, k)], forall([(u, 0) for u in us], both))


def contraction_schema(k: int, f: str = "f", g: str = "g", u: str = "u") -> Formula:
    """g agrees with f everywhere except the u-point, where it is undefined."""
    us = _names(u, k)
    ws = _names("w", k)
    off_point = disj(neq(app(w), app(uv)) for w, uv in zip(ws, us))
    return exists(
        [(g, k)],
        And(
            undefined(app(g, *_apps(us))),
            forall(
                [(w, 0) for w in ws],
                Implies(off_point, eq(app(g, *_apps(ws)), app(f, *_apps(ws)))),
            ),
        ),
    )


def atomic_choice_schema(phi, f: str = "f", k: int = 1, g: str = "g") -> Formula:
    """Bounded choice: a function picks a phi-witness for each domain point.

    ``phi`` maps (x-names, y-name) to a formula.
    """
    xs = _names("x", k)
    y = "y"
    premise = forall(
        [(x, 0) for x in xs],
        Implies(
            tuple_in_function(_apps(xs), f),
            exists([(y, 0)], phi(xs, y)),
        ),
    )
    gx = app(g, *_apps(xs))
    conclusion = exists(
        [(g, k)],
        forall(
            [(x, 0) for x in xs],
            Implies(
                tuple_in_function(_apps(xs), f),
                forall([("cy", 0)], Implies(eq(app("cy"), gx), phi(xs, "cy"))),
            ),
        ),
    )
    return Implies(premise, conclusion)
