"""Example systems from the literature, shipped as ``.nipol`` files."""

from __future__ import annotations

from importlib import resources

NAMES = ("fig1", "fig2", "fig3", "fig4", "global_dg", "uniform_with_useless", "nonuniform_without_useless")


def fixture_text(name):
    return resources.files(__name__).joinpath(f"{name}.nipol").read_text(encoding="utf-8")


def load_fixture(name):
    from ..textformat import parse

    return parse(fixture_text(name))
