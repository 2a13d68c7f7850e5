"""Toolkit for computing over finite partial structures.

The pieces: a data model of finite partial functions and structures
(:mod:`finstruct.structures`), a two-sorted logic with a bounded evaluator
(:mod:`finstruct.formulas`, :mod:`finstruct.logic`, :mod:`finstruct.library`),
the ST structure-transformation language (:mod:`finstruct.st`), a Turing
machine bridge (:mod:`finstruct.tm`), program-to-formula translations
(:mod:`finstruct.translate`), and arithmetic interpretations plus numeric
codecs (:mod:`finstruct.arith`).
"""

from .structures import (
    AFunction,
    App,
    Atom,
    AtomAllocator,
    AtomOrBottom,
    BindingError,
    FinstructError,
    FormatError,
    Omega,
    OMEGA,
    StrictnessError,
    Structure,
    Term,
    Vocabulary,
    VocabularyError,
    app,
    canonical_key,
    chain_length,
    eval_term,
    extend_function,
    is_accessible,
    is_free,
    is_standard,
    isomorphic,
    numeral_structure,
    parse_structure,
    print_structure,
    scope,
    string_structure,
    term_structure,
)

__all__ = [
    "AFunction",
    "App",
    "Atom",
    "AtomAllocator",
    "AtomOrBottom",
    "BindingError",
    "FinstructError",
    "FormatError",
    "Omega",
    "OMEGA",
    "StrictnessError",
    "Structure",
    "Term",
    "Vocabulary",
    "VocabularyError",
    "app",
    "canonical_key",
    "chain_length",
    "eval_term",
    "extend_function",
    "is_accessible",
    "is_free",
    "is_standard",
    "isomorphic",
    "numeral_structure",
    "parse_structure",
    "print_structure",
    "scope",
    "string_structure",
    "term_structure",
]

__version__ = "0.1.0"
