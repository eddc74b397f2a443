"""Hypothesis strategies shared by the test modules."""

from __future__ import annotations

from hypothesis import strategies as st

from nipol.model import build


def one_state(edges=()):
    return build(["u", "v"], {"a": "u", "b": "v"}, ["s"], "s", edges=edges)


@st.composite
def systems(draw, max_states=5, max_actions=3, max_agents=3, global_policy=False):
    """Small systems drawn directly; unreachable states are dropped by validation."""
    n_s = draw(st.integers(1, max_states))
    n_a = draw(st.integers(1, max_actions))
    n_u = draw(st.integers(1, max_agents))
    agents = [f"g{i}" for i in range(n_u)]
    actions = {f"b{i}": agents[draw(st.integers(0, n_u - 1))] for i in range(n_a)}
    states = [f"p{i}" for i in range(n_s)]
    steps = [(s, a, states[draw(st.integers(0, n_s - 1))]) for s in states for a in actions]
    obs = [(s, u, str(draw(st.integers(0, 2)))) for s in states for u in agents]
    pairs = [(v, u) for v in agents for u in agents if v != u]
    if global_policy:
        chosen = [p for p in pairs if draw(st.booleans())]
        edges = [(s, v, u) for s in states for v, u in chosen]
    else:
        edges = [(s, v, u) for s in states for v, u in pairs if draw(st.booleans())]
    return build(agents, actions, states, states[0], steps, obs, edges)
