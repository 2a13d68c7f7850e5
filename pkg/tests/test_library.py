import itertools
import random

import pytest

from finstruct.structures import (
    AFunction,
    Structure,
    Vocabulary,
    app,
    isomorphic,
    is_accessible,
    numeral_structure,
)
from finstruct.formulas import exists, forall, undefined, eq, Implies, And
from finstruct.logic import EvalConfig, RESTRICTED, check_with_witness, eval_bounded, eval_fo
from finstruct.library import (
    accessibility_sentence,
    accessible_formula,
    atomic_choice_schema,
    axiom_instance,
    contraction_schema,
    empty_function_axiom,
    extension_axiom,
    explicit_definition_axiom,
    f_induction_axiom,
    infinity_axiom,
    iso_formula,
    isom_formula,
    nu_formula,
    scope_formula,
    star_formula,
    strictness_axiom,
    suc_formula,
    union_schema,
)


def two_numerals(m, n):
    from finstruct.structures import AtomAllocator

    a = numeral_structure(m, zero="z1", succ="s1")
    b = numeral_structure(n, zero="z2", succ="s2", allocator=AtomAllocator(50))
    return a.union(b)


def test_scope_formula_characterizes_scope():
    sigma = numeral_structure(2)
    phi = scope_formula(sigma.vocabulary, "x")
    for a in sigma.scope():
        assert eval_fo(sigma, phi, extra={"x": a})
    assert not eval_fo(sigma, phi, extra={"x": 99})
    assert not eval_fo(sigma, phi, extra={"x": None})


def test_scope_relativized_claim_is_true():
    # pinned reading: the undefined value never satisfies the scope formula,
    # so the relativized non-definedness claim holds
    sigma = Structure(
        Vocabulary([("e", 0), ("0", 1), ("1", 1)]),
        {
            "e": AFunction.token(0),
            "0": AFunction(1, {(0,): 1}),
            "1": AFunction(1, {(1,): 2, (2,): 3}),
        },
    )
    phi = forall(
        [("x", 0)],
        Implies(scope_formula(sigma.vocabulary, "x"), ~_eq_omega("x")),
    )
    assert eval_fo(sigma, phi)


def _eq_omega(v):
    from finstruct.formulas import Eq, Not
    from finstruct.structures import OMEGA

    class _W:
        def __init__(self, f):
            self.f = f

        def __invert__(self):
            return Not(self.f)

    return _W(Eq(app(v), OMEGA))


def test_plain_universal_nondefinedness_is_false():
    # without the scope guard the claim fails at the undefined value
    from finstruct.formulas import neq
    from finstruct.structures import OMEGA

    sigma = numeral_structure(1)
    assert not eval_fo(sigma, forall([("x", 0)], neq(app("x"), OMEGA)))


def test_nu_on_numerals():
    cfg = EvalConfig(so_entry_bound=8, fresh_atom_count=2)
    for n in range(6):
        sigma = numeral_structure(n)
        assert eval_bounded(sigma, nu_formula(), cfg) is True


def test_nu_rejects_non_chains():
    vocab = Vocabulary([("z", 0), ("s", 1)])
    cases = [
        # unreachable self-loop next to the chain
        {"z": AFunction.token(0), "s": AFunction(1, {(0,): 1, (5,): 5})},
        # zero is a successor image (a cycle through z)
        {"z": AFunction.token(0), "s": AFunction(1, {(0,): 1, (1,): 0})},
        # branching is impossible for a function, but merging is not: not injective
        {"z": AFunction.token(0), "s": AFunction(1, {(0,): 2, (1,): 2})},
        # z undefined
        {"z": AFunction.token(None), "s": AFunction(1, {(0,): 1})},
        # detached two-cycle
        {"z": AFunction.token(0), "s": AFunction(1, {(0,): 1, (4,): 5, (5,): 4})},
    ]
    cfg = EvalConfig(so_entry_bound=8, fresh_atom_count=2)
    for comps in cases:
        sigma = Structure(vocab, comps)
        assert eval_bounded(sigma, nu_formula(), cfg) is False


def test_accessible_formula_matches_closure():
    # two components, one unreachable self-loop
    vocab = Vocabulary([("c", 0), ("f", 1), ("g", 1)])
    sigma = Structure(
        vocab,
        {
            "c": AFunction.token(0),
            "f": AFunction(1, {(0,): 1, (7,): 7}),
            "g": AFunction(1, {(1,): 2}),
        },
    )
    phi = accessible_formula(sigma.vocabulary, "u")
    cfg = EvalConfig(so_entry_bound=8, fresh_atom_count=2)
    reachable = {0, 1, 2}
    for a in sorted(sigma.scope()):
        verdict = eval_bounded(sigma, phi, cfg, extra={"u": a})
        assert verdict is (a in reachable)


def test_accessibility_sentence_agrees_with_is_accessible():
    rng = random.Random(19)
    vocab = Vocabulary([("c", 0), ("f", 1)])
    cfg = EvalConfig(so_entry_bound=8, fresh_atom_count=2)
    for _ in range(25):
        atoms = list(range(rng.randrange(1, 4)))
        comps = {
            "c": AFunction.token(rng.choice(atoms + [None])),
            "f": AFunction(
                1,
                {
                    (a,): rng.choice(atoms)
                    for a in atoms
                    if rng.random() < 0.6
                },
            ),
        }
        sigma = Structure(vocab, comps)
        verdict = eval_bounded(sigma, accessibility_sentence(vocab), cfg)
        assert verdict is is_accessible(sigma)


def test_iso_exactly_equal_length_numerals():
    # the isomorphism conditions force any witness along the chain, so the
    # lockstep candidate decides satisfiability; bounded evaluation must
    # never contradict it
    from finstruct.library import canonical_chain_map

    cfg = EvalConfig(so_entry_bound=6, fresh_atom_count=1)
    phi = iso_formula("z1", "s1", "z2", "s2")
    for m in range(5):
        for n in range(5):
            sigma = two_numerals(m, n)
            cand = canonical_chain_map(sigma, "z1", "s1", "z2", "s2")
            witnessed = check_with_witness(sigma, phi, {"iso_f": cand}, cfg)
            assert witnessed is (m == n), (m, n)
    # blind bounded search stays sound on pools small enough to exhaust
    tiny = EvalConfig(so_entry_bound=2, fresh_atom_count=1)
    for m, n in [(0, 0), (0, 1), (1, 1)]:
        sigma = two_numerals(m, n)
        blind = eval_bounded(sigma, iso_formula("z1", "s1", "z2", "s2"), tiny)
        assert blind is None or blind is (m == n)


def test_isom_witness_checking():
    sigma = two_numerals(2, 2)
    chain1 = sorted(sigma.restrict(["z1", "s1"]).scope())
    chain2 = sorted(sigma.restrict(["z2", "s2"]).scope())
    good = AFunction(1, {(a,): b for a, b in zip(chain1, chain2)})
    phi = exists([("f", 1)], isom_formula("f", "z1", "s1", "z2", "s2"))
    assert check_with_witness(sigma, phi, {"f": good})


def test_suc_of_numerals():
    for n in range(5):
        sigma = numeral_structure(n)
        s = sigma.get("s")
        chain = sorted(sigma.scope())
        top = chain[-1]
        fresh = max(chain) + 1
        t = s.with_entry((top,), fresh)
        assert eval_fo(sigma, suc_formula("z", "s", "t"), extra={"t": t})
        # t identical to s misses the extra step (except that a longer tail
        # is also rejected)
        assert not eval_fo(sigma, suc_formula("z", "s", "t"), extra={"t": s})
        too_far = t.with_entry((fresh,), fresh + 1)
        assert not eval_fo(sigma, suc_formula("z", "s", "t"), extra={"t": too_far})


def test_star_formula_zero_iterations():
    from finstruct.formulas import neq

    # step: post agrees with pre except at the token's point
    sigma = Structure.empty([("c", 0)]).bind("c", 0)
    step = forall(
        [("w", 0)],
        Implies(
            neq(app("w"), app("c")),
            eq(app("post", app("w")), app("pre", app("w"))),
        ),
    )
    phi = star_formula(step, ["pre"], ["post"], [1])
    cfg = EvalConfig(fresh_atom_count=1)
    f = AFunction(1, {(0,): 1})
    assert eval_bounded(sigma, phi, cfg, extra={"pre": f, "post": f}) is True


def test_star_formula_growth_chain():
    from finstruct.formulas import Or, neq, disj, conj

    # step: post extends pre by exactly one entry at the token's point
    sigma = Structure.empty([("c", 0)]).bind("c", 0)
    grow = And(
        eq(app("post", app("c")), app("c")),
        forall(
            [("w", 0)],
            Implies(
                neq(app("w"), app("c")),
                eq(app("post", app("w")), app("pre", app("w"))),
            ),
        ),
    )
    phi = star_formula(grow, ["pre"], ["post"], [1])
    cfg = EvalConfig(fresh_atom_count=1)
    empty = AFunction(1, {})
    loop = AFunction(1, {(0,): 0})
    far = AFunction(1, {(1,): 1})
    assert eval_bounded(sigma, phi, cfg, extra={"pre": empty, "post": loop}) is True
    assert eval_bounded(sigma, phi, cfg, extra={"pre": empty, "post": empty}) is True
    assert eval_bounded(sigma, phi, cfg, extra={"pre": empty, "post": far}) is False


def test_axiom_instances_on_random_structures():
    rng = random.Random(31)
    cfg = EvalConfig(so_entry_bound=6)
    for _ in range(20):
        atoms = list(range(rng.randrange(1, 5)))
        f1 = AFunction(1, {(a,): rng.choice(atoms) for a in atoms if rng.random() < 0.5})
        f2 = AFunction(
            2,
            {
                (a, b): rng.choice(atoms)
                for a in atoms
                for b in atoms
                if rng.random() < 0.25
            },
        )
        sigma = Structure(Vocabulary([("u1", 0), ("u2", 0), ("v", 0)]),
                          {"u1": AFunction.token(rng.choice(atoms)),
                           "u2": AFunction.token(rng.choice(atoms)),
                           "v": AFunction.token(rng.choice(atoms))})
        for k, f in ((1, f1), (2, f2)):
            strict_closed = forall([(f"u{i}", 0) for i in range(1, k + 1)], strictness_axiom(k))
            assert eval_fo(sigma.bind("f", f), strict_closed)
            assert eval_fo(sigma, infinity_axiom(k), extra={"f": f})
            assert eval_bounded(sigma, empty_function_axiom(k), cfg) is True
            assert eval_bounded(sigma, extension_axiom(k), cfg, extra={"f": f}) is True
            t = app("u1")
            assert eval_bounded(sigma, explicit_definition_axiom(k, t), cfg, extra={"f": f}) is True


def test_f_induction_restricted_check():
    from finstruct.formulas import Or, defined, undefined as undef

    sigma = numeral_structure(1)
    cfg = EvalConfig(so_entry_bound=2, so_mode=RESTRICTED, fresh_atom_count=1)

    def tautology(g):
        return forall([("tw", 0)], Or(undef(app(g, app("tw"))), defined(app(g, app("tw")))))

    phi = f_induction_axiom(1, tautology)
    assert eval_bounded(sigma, phi, cfg) is True


def test_union_and_contraction_derived_schemas():
    cfg = EvalConfig(so_entry_bound=6)
    sigma = Structure.empty([("u1", 0)]).bind("u1", 0)
    f1 = AFunction(1, {(0,): 1})
    f2 = AFunction(1, {(2,): 0})
    assert eval_bounded(sigma, union_schema(1), cfg, extra={"f1": f1, "f2": f2}) is True
    assert eval_bounded(sigma, contraction_schema(1), cfg, extra={"f": f1, "u1": 0}) is True


def test_atomic_choice_schema():
    cfg = EvalConfig(so_entry_bound=4)
    sigma = Structure.empty()
    f = AFunction(1, {(0,): 0, (1,): 1})

    def phi(xs, y):
        return eq(app(y), app(xs[0]))

    assert eval_bounded(sigma, atomic_choice_schema(phi), cfg, extra={"f": f}) is True
