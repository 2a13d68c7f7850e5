import random

import pytest

from finstruct.structures import AFunction, Structure, Vocabulary, numeral_structure, app, OMEGA
from finstruct.formulas import (
    And,
    Eq,
    Exists,
    Forall,
    Implies,
    Not,
    conj,
    defined,
    eq,
    exists,
    forall,
    free_vars,
    neq,
    parse_formula,
    print_formula,
    undefined,
)
from finstruct.logic import (
    EvalConfig,
    BOUNDED,
    RESTRICTED,
    check_with_witness,
    eval_bounded,
    eval_fo,
)
from finstruct.structures import BindingError


X = app("x")
Y = app("y")


def test_reflexivity_of_equality():
    sigma = numeral_structure(2)
    assert eval_fo(sigma, forall([("x", 0)], eq(X, X)))


def test_bottom_equals_bottom():
    sigma = Structure.empty()
    assert eval_fo(sigma, eq(OMEGA, OMEGA))


def test_forall_ranges_over_bottom():
    # the undefined value is in every atomic quantifier's range, so this is
    # false even though it holds of every atom
    sigma = numeral_structure(1)
    assert not eval_fo(sigma, forall([("x", 0)], neq(X, OMEGA)))


def test_exists_fresh_atom():
    sigma = Structure.empty()
    assert eval_fo(sigma, exists([("x", 0)], neq(X, OMEGA)))


def test_strict_application_in_formulas():
    sigma = numeral_structure(1)
    assert eval_fo(sigma, undefined(app("s", OMEGA)))


def test_fo_only_rejects_functional_quantifier():
    sigma = Structure.empty()
    with pytest.raises(BindingError):
        eval_fo(sigma, exists([("g", 1)], undefined(app("g", X))), extra={"x": None})


def test_unbound_variable_error():
    sigma = Structure.empty()
    with pytest.raises(BindingError):
        eval_fo(sigma, eq(X, X))


def test_empty_function_axiom_shape():
    sigma = numeral_structure(2)
    phi = exists([("g", 1)], forall([("u", 0)], undefined(app("g", app("u")))))
    assert eval_bounded(sigma, phi, EvalConfig(so_entry_bound=0)) is True


def test_bounded_exists_single_entry():
    sigma = Structure.empty([("c", 0), ("d", 0)]).bind("c", 0).bind("d", 1)
    phi = exists([("g", 1)], eq(app("g", app("c")), app("d")))
    assert eval_bounded(sigma, phi, EvalConfig(so_entry_bound=1)) is True


def test_bounded_forall_counterexample():
    sigma = Structure.empty([("c", 0), ("d", 0)]).bind("c", 0).bind("d", 1)
    phi = forall([("f", 1)], undefined(app("f", app("c"))))
    assert eval_bounded(sigma, phi, EvalConfig(so_entry_bound=1)) is False


def test_pointwise_universal_decides_exactly():
    # every pool-supported function satisfies strictness-flavored tautologies
    sigma = numeral_structure(1)
    phi = forall(
        [("f", 1)],
        forall([("u", 0)], Or_(undefined(app("f", app("u"))), defined(app("f", app("u"))))),
    )
    assert eval_bounded(sigma, phi) is True


def Or_(a, b):
    from finstruct.formulas import Or

    return Or(a, b)


def test_restricted_mode_returns_crisp_answers():
    sigma = numeral_structure(1)
    phi = forall([("f", 1)], exists([("g", 1)], forall([("u", 0)],
        eq(app("g", app("u")), app("f", app("u"))))))
    assert eval_bounded(sigma, phi, EvalConfig(so_entry_bound=2, so_mode=RESTRICTED)) is True


def test_check_with_witness_atomic():
    sigma = Structure.empty([("c", 0)]).bind("c", 5)
    phi = exists([("x", 0)], eq(X, X))
    assert check_with_witness(sigma, phi, {"x": 5})


def test_check_with_witness_extension_instance():
    f = AFunction(1, {(0,): 1})
    sigma = Structure.empty([("u", 0), ("v", 0)]).bind("u", 2).bind("v", 0)
    phi = exists(
        [("g", 1)],
        And(
            eq(app("g", app("u")), app("v")),
            forall(
                [("w", 0)],
                Implies(neq(app("w"), app("u")), eq(app("g", app("w")), app("f", app("w")))),
            ),
        ),
    )
    good = f.with_entry((2,), 0)
    bad = f
    assert check_with_witness(sigma, phi, {"g": good}, extra={"f": f})
    assert not check_with_witness(sigma, phi, {"g": bad}, extra={"f": f})
    with pytest.raises(BindingError):
        check_with_witness(sigma, phi, {"g": AFunction(2)}, extra={"f": f})


def test_solver_constructs_extension_witness_itself():
    f = AFunction(1, {(0,): 1})
    sigma = Structure.empty([("u", 0), ("v", 0)]).bind("u", 2).bind("v", 0)
    phi = exists(
        [("g", 1)],
        And(
            eq(app("g", app("u")), app("v")),
            forall(
                [("w", 0)],
                Implies(neq(app("w"), app("u")), eq(app("g", app("w")), app("f", app("w")))),
            ),
        ),
    )
    assert eval_bounded(sigma, phi, extra={"f": f}) is True


def _random_structure(rng, max_atoms=4):
    vocab = Vocabulary([("c", 0), ("f", 1)])
    atoms = list(range(rng.randrange(1, max_atoms + 1)))
    c = rng.choice(atoms + [None])
    f_entries = {}
    for a in atoms:
        if rng.random() < 0.6:
            f_entries[(a,)] = rng.choice(atoms)
    return Structure(vocab, {"c": AFunction.token(c), "f": AFunction(1, f_entries)})


def _random_fo_formula(rng, depth=3, vars_in_scope=()):
    terms = [app("c"), OMEGA] + [app(v) for v in vars_in_scope]
    terms += [app("f", t) for t in terms[:3]]
    if depth == 0 or rng.random() < 0.3:
        return eq(rng.choice(terms), rng.choice(terms))
    kind = rng.randrange(5)
    if kind == 0:
        return Not(_random_fo_formula(rng, depth - 1, vars_in_scope))
    if kind == 1:
        return And(_random_fo_formula(rng, depth - 1, vars_in_scope),
                   _random_fo_formula(rng, depth - 1, vars_in_scope))
    if kind == 2:
        return Implies(_random_fo_formula(rng, depth - 1, vars_in_scope),
                       _random_fo_formula(rng, depth - 1, vars_in_scope))
    v = f"q{len(vars_in_scope)}"
    inner = _random_fo_formula(rng, depth - 1, vars_in_scope + (v,))
    return (Forall if kind == 3 else Exists)(v, 0, inner)


def test_fresh_atom_sufficiency():
    rng = random.Random(11)
    for _ in range(60):
        sigma = _random_structure(rng)
        phi = _random_fo_formula(rng)
        base = eval_fo(sigma, phi)
        from finstruct.formulas import count_atomic_quantifiers

        q = count_atomic_quantifiers(phi)
        more = eval_fo(sigma, phi, EvalConfig(fresh_atom_count=q + 2))
        assert base == more


def test_isomorphism_invariance_of_eval_fo():
    rng = random.Random(5)
    for _ in range(40):
        sigma = _random_structure(rng)
        phi = _random_fo_formula(rng)
        shift = rng.randrange(1, 9)
        tau = Structure(
            sigma.vocabulary,
            {
                n: AFunction(
                    g.arity,
                    {tuple(a + shift for a in ins): out + shift for ins, out in g.entries.items()},
                )
                for n, g in sigma.components.items()
            },
        )
        assert eval_fo(sigma, phi) == eval_fo(tau, phi)


def test_bounded_soundness_monotone_in_bound():
    rng = random.Random(23)
    sigma = _random_structure(rng, max_atoms=3)
    phis = [
        exists([("g", 1)], eq(app("g", app("c")), app("c"))),
        exists([("g", 1)], And(defined(app("g", app("c"))), neq(app("g", app("c")), app("c")))),
        forall([("g", 1)], undefined(app("g", app("f", app("c"))))),
    ]
    for phi in phis:
        answers = [eval_bounded(sigma, phi, EvalConfig(so_entry_bound=b)) for b in (1, 2, 3, 4)]
        decided = [a for a in answers if a is not None]
        assert all(a == decided[0] for a in decided)


def test_parse_print_round_trip():
    texts = [
        "A x. x = x",
        "E f^2. f(a, b) != omega",
        "x = y -> (y = x | !(x = omega))",
        "A u. (E v. s(u) = v) & u != omega",
    ]
    for text in texts:
        phi = parse_formula(text)
        again = parse_formula(print_formula(phi))
        assert again == phi


def test_print_parse_round_trip_random():
    rng = random.Random(2)
    for _ in range(80):
        phi = _random_fo_formula(rng)
        assert parse_formula(print_formula(phi)) == phi


def test_free_vars_arity_tracking():
    phi = parse_formula("E g^1. g(x) = c")
    assert free_vars(phi) == {"x": 0, "c": 0}
