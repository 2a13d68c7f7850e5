import random

import pytest

from finstruct.structures import (
    AFunction,
    AtomAllocator,
    OMEGA,
    StrictnessError,
    Structure,
    Vocabulary,
    VocabularyError,
    app,
    canonical_key,
    chain_length,
    eval_term,
    extend_function,
    is_accessible,
    is_free,
    isomorphic,
    numeral_structure,
    parse_structure,
    print_structure,
    scope,
    string_structure,
    term_structure,
)


def test_afunction_strict_lookup():
    f = AFunction(2, {(0, 1): 2})
    assert f((0, 1)) == 2
    assert f((1, 0)) is None
    assert f((None, 1)) is None
    assert f((0, None)) is None


def test_afunction_rejects_bottom_entries():
    with pytest.raises(StrictnessError):
        AFunction(1, {(None,): 0})
    with pytest.raises(StrictnessError):
        AFunction(1, {(0,): None})


def test_token_value():
    assert AFunction.token(None).value is None
    assert AFunction.token(7).value == 7
    assert AFunction.token(7)(()) == 7


def test_extend_function_fresh_point():
    f = extend_function(AFunction.empty(1), (0,), 1)
    assert f((0,)) == 1
    assert len(f) == 1


def test_extend_function_overwrites_and_preserves():
    f = AFunction(1, {(0,): 1, (2,): 3})
    g = extend_function(f, (0,), 5)
    assert g((0,)) == 5
    assert g((2,)) == 3
    h = extend_function(f, (4,), 0)
    assert h((0,)) == 1 and h((4,)) == 0


def test_extend_function_scope_law():
    f = AFunction(2, {(0, 1): 2})
    g = extend_function(f, (3, 0), 4)
    assert g.scope() == f.scope() | {3, 0, 4}


def test_extend_function_rejects_bottom():
    with pytest.raises(StrictnessError):
        extend_function(AFunction.empty(1), (None,), 0)


def test_eval_term_omega_and_strictness():
    sigma = Structure.empty([("f", 1)])
    assert eval_term(sigma, OMEGA) is None
    assert eval_term(sigma, app("f", OMEGA)) is None


def test_eval_term_chain():
    sigma = string_structure("011")
    e = app("e")
    assert eval_term(sigma, e) == 0
    assert eval_term(sigma, app("0", e)) == 1
    assert eval_term(sigma, app("1", app("0", e))) == 2
    assert eval_term(sigma, app("1", app("1", app("0", e)))) == 3
    assert eval_term(sigma, app("1", e)) is None


def test_eval_term_unknown_identifier():
    sigma = Structure.empty()
    with pytest.raises(VocabularyError):
        eval_term(sigma, app("nope"))


def test_scope_examples():
    assert scope(Structure.empty()) == frozenset()
    assert len(scope(string_structure("011"))) == 4
    sigma = Structure.empty([("f", 1)]).bind("f", AFunction(1, {(5,): 5}))
    assert scope(sigma) == {5}


def test_string_structure_component_entry_counts():
    sigma = string_structure("011")
    assert len(sigma.get("0")) == 1
    assert len(sigma.get("1")) == 2
    assert sigma.get("e").value == 0


def test_term_structure_numeral_chain():
    sigma = term_structure(app("s", app("s", app("z"))))
    assert len(scope(sigma)) == 3
    assert chain_length(sigma, "z", "s") == 2


def test_term_structure_shares_subterms():
    q = app("f", app("z"), app("z"))
    sigma = term_structure(q)
    assert len(scope(sigma)) == 2
    assert len(sigma.get("f")) == 1


def test_term_structure_single_token():
    sigma = term_structure(app("z"))
    assert len(scope(sigma)) == 1
    assert sigma.get("z").value is not None


def test_term_structure_root_token():
    sigma = term_structure(app("s", app("z")), root="top")
    assert sigma.get("top").value == eval_term(sigma, app("s", app("z")))


def test_term_structure_rejects_omega():
    with pytest.raises(StrictnessError):
        term_structure(app("f", OMEGA))


def test_numeral_structure_zero_has_successor_component():
    sigma = numeral_structure(0)
    assert "s" in sigma.vocabulary
    assert len(sigma.get("s")) == 0


def test_isomorphic_identity():
    sigma = string_structure("01")
    m = isomorphic(sigma, sigma)
    assert m == {a: a for a in scope(sigma)}


def test_isomorphic_shifted_numerals():
    a = numeral_structure(2)
    b = numeral_structure(2, allocator=AtomAllocator(10))
    m = isomorphic(a, b)
    assert m is not None
    assert set(m) == set(scope(a)) and set(m.values()) == set(scope(b))


def test_isomorphic_different_sizes():
    assert isomorphic(numeral_structure(2), numeral_structure(1)) is None


def test_isomorphic_vocabulary_mismatch():
    with pytest.raises(VocabularyError):
        isomorphic(numeral_structure(1), string_structure("0"))


def _random_structure(rng, max_atoms=5):
    vocab = Vocabulary([("c", 0), ("f", 1), ("g", 2)])
    atoms = list(range(rng.randrange(1, max_atoms + 1)))
    c = AFunction.token(rng.choice(atoms + [None]))
    f_entries = {}
    for a in atoms:
        if rng.random() < 0.5:
            f_entries[(a,)] = rng.choice(atoms)
    g_entries = {}
    for _ in range(rng.randrange(0, 3)):
        g_entries[(rng.choice(atoms), rng.choice(atoms))] = rng.choice(atoms)
    return Structure(vocab, {"c": c, "f": AFunction(1, f_entries), "g": AFunction(2, g_entries)})


def test_isomorphic_is_equivalence_on_random_structures():
    rng = random.Random(7)
    structures = [_random_structure(rng) for _ in range(12)]
    for s in structures:
        assert isomorphic(s, s) is not None
    for s in structures:
        for t in structures:
            m = isomorphic(s, t)
            n = isomorphic(t, s)
            assert (m is None) == (n is None)
            if m is not None:
                inv = {v: k for k, v in n.items()}
                assert set(m) == set(inv) or isomorphic(s, t) is not None
    for s in structures:
        for t in structures:
            for u in structures:
                st = isomorphic(s, t)
                tu = isomorphic(t, u)
                if st is not None and tu is not None:
                    assert isomorphic(s, u) is not None


def test_eval_term_isomorphism_invariance():
    rng = random.Random(13)
    terms = [
        app("c"),
        app("f", app("c")),
        app("g", app("c"), app("f", app("c"))),
        app("f", app("f", app("c"))),
        OMEGA,
    ]
    for _ in range(30):
        sigma = _random_structure(rng, max_atoms=4)
        shift = rng.randrange(1, 20)
        tau = Structure(
            sigma.vocabulary,
            {
                n: AFunction(
                    f.arity,
                    {tuple(a + shift for a in ins): out + shift for ins, out in f.entries.items()},
                )
                for n, f in sigma.components.items()
            },
        )
        h = {a: a + shift for a in scope(sigma)}
        for t in terms:
            v, w = eval_term(sigma, t), eval_term(tau, t)
            assert (v is None and w is None) or h[v] == w


def test_accessible_and_free_of_term_structures():
    # exhaustive standard terms up to depth 5 over a 2-identifier vocabulary
    def terms(depth):
        if depth == 0:
            return [app("z")]
        smaller = terms(depth - 1)
        return smaller + [app("s", t) for t in smaller]

    for t in terms(5):
        sigma = term_structure(t)
        assert is_accessible(sigma)
        assert is_free(sigma)


def test_not_accessible_without_tokens():
    sigma = Structure.empty([("f", 1)]).bind("f", AFunction(1, {(0,): 1}))
    assert not is_accessible(sigma)
    assert not is_free(sigma)


def test_diamond_is_accessible_not_free():
    # two injective unary paths from a shared root meeting at the sink
    vocab = Vocabulary([("z", 0), ("f", 1), ("g", 1)])
    sigma = Structure(
        vocab,
        {
            "z": AFunction.token(0),
            "f": AFunction(1, {(0,): 1, (2,): 3}),
            "g": AFunction(1, {(0,): 2, (1,): 3}),
        },
    )
    assert is_accessible(sigma)
    assert not is_free(sigma)


def test_cycle_fed_by_token_is_not_free():
    sigma = Structure(
        Vocabulary([("c", 0), ("f", 1)]),
        {"c": AFunction.token(0), "f": AFunction(1, {(0,): 0})},
    )
    assert is_accessible(sigma)
    assert not is_free(sigma)


def test_canonical_key_matches_isomorphism():
    rng = random.Random(3)
    structures = [_random_structure(rng, max_atoms=4) for _ in range(10)]
    for s in structures:
        for t in structures:
            same = canonical_key(s) == canonical_key(t)
            assert same == (isomorphic(s, t) is not None)


def test_fstruct_round_trip():
    sigma = string_structure("011").union(numeral_structure(3))
    text = print_structure(sigma)
    again = parse_structure(text)
    assert again == sigma
    assert print_structure(again) == text


def test_fstruct_nullary_syntax_and_comments():
    text = "# a structure\nfn c/0\nfn f/2\nc -> 4\nf 1 2 -> 3\n"
    sigma = parse_structure(text)
    assert sigma.get("c").value == 4
    assert sigma.get("f")((1, 2)) == 3


def test_fstruct_errors():
    import re
    from finstruct.structures import FormatError

    with pytest.raises(FormatError):
        parse_structure("f 0 -> 1\n")
    with pytest.raises(FormatError):
        parse_structure("fn f/1\nf 0 1 -> 2\n")


def test_union_rejects_name_clash():
    with pytest.raises(VocabularyError):
        numeral_structure(1).union(numeral_structure(2))


def test_allocator_above():
    sigma = numeral_structure(3)
    alloc = AtomAllocator.above(sigma)
    a = alloc.fresh()
    assert a not in scope(sigma)
    assert alloc.fresh() != a
