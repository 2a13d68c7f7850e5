"""Bundled .st programs and .tm machines used by the arithmetic bridge."""

from importlib import resources


def corpus_text(name: str) -> str:
    return resources.files(__package__).joinpath(name).read_text()


def corpus_program(name: str):
    from ..st import parse_program

    return parse_program(corpus_text(name))
