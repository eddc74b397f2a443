from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nipol.errors import BudgetExceeded, NonUniformPolicy, NotGlobalPolicy, SubsetGuardExceeded
from nipol.intransitive import (check_i_security, check_i_security_uniform, check_ip_security,
                                find_intransitively_useless_edges, fpt_unwinding,
                                i_security_bounded_oracle, i_similarity, ipurge, ipurge_leslie,
                                is_intransitively_uniform, normalize_i, sources,
                                uniform_unwinding, with_global_policy)
from nipol.model import build, interfering_set, run

from strategies import one_state, systems


def test_sources_examples(fig1, fig3):
    assert sources(fig1, (), "L", "eps") == frozenset({"L"})
    assert sources(fig1, "a h", "L", "eps") == frozenset({"L"})
    assert sources(fig3, "h1 d", "L", "eps") == frozenset({"H", "D", "L"})


def test_ipurge_examples(fig1):
    assert ipurge(fig1, (), "L", "eps") == ()
    assert ipurge(fig1, "a h", "L", "eps") == ("h",)
    assert ipurge_leslie(fig1, (), "L", "eps") == ()
    assert ipurge_leslie(fig1, "a h", "L", "eps") == ()
    assert ipurge_leslie(fig1, "h", "L", "eps") == ("h",)


def test_fpt_seeds_and_closure(fig1):
    fam = fpt_unwinding(fig1).named()
    assert ("a", "eps") in fam[frozenset({"H", "L"})]
    assert any("L" in d and ("ah", "h") in pairs for d, pairs in fam.items())


def test_fpt_on_one_state_has_only_reflexive_seeds():
    fam = fpt_unwinding(one_state([("s", "u", "v")]))
    assert fam.entries == {}
    assert fam.stats["reflexive_seeds"] > 0


def test_guard():
    agents = [f"g{i}" for i in range(17)]
    big = build(agents, {"x": "g0"}, ["s"], "s")
    with pytest.raises(SubsetGuardExceeded):
        check_i_security(big)
    assert check_i_security(big, force=True).holds


def test_check_examples(fig1, fig2, fig3):
    w = check_i_security(fig1).witness
    assert (w.agent, w.state, w.action, w.alpha, w.obs_with, w.obs_without) == (
        "L", "eps", "a", ("h",), "0", "1")
    assert check_i_security(fig2).holds
    assert check_i_security(fig3).holds


def test_bounded_oracle_examples(fig1, fig3):
    v = i_security_bounded_oracle(fig1, 16)
    assert not v.holds and v.witness == check_i_security(fig1).witness
    assert i_security_bounded_oracle(fig3, 4).holds
    assert i_security_bounded_oracle(fig1, 0).holds  # the violation needs alpha = h
    with pytest.raises(BudgetExceeded) as e:
        i_security_bounded_oracle(fig1, 40, budget=1000)
    assert e.value.largest_bound >= 0


def test_similarity_examples(fig1, fig3):
    assert i_similarity(fig3, "L").classes == (
        ("eps", "h1", "h2", "h1h1", "h1h2"), ("h1d",), ("h2d",))
    assert i_similarity(fig1, "L").same("eps", "a")
    assert i_similarity(one_state(), "u").classes == (("s",),)


def test_useless_examples(fig1, fig2, fig3):
    assert find_intransitively_useless_edges(fig2) == set()
    assert find_intransitively_useless_edges(one_state([("s", "u", "v")])) == {("s", "u", "v")}
    assert find_intransitively_useless_edges(fig1) == {("eps", "H", "L"), ("h", "H", "L")}
    # Removing H -> L at h1 lets (eps, h1, h2 d) relate observations 0 and 2 for L.
    assert ("h1", "H", "L") not in find_intransitively_useless_edges(fig3)
    cut = fig3.without_edge(fig3.state_index("h1"), fig3.agent_index("H"), fig3.agent_index("L"))
    assert i_similarity(cut, "L").same("h1", "h1h2")
    assert i_similarity(cut, "L") != i_similarity(fig3, "L")


def test_normalize_examples(fig2):
    assert normalize_i(fig2) == fig2


def test_uniform_unwinding_examples(fig3, global_dg):
    fam = uniform_unwinding(one_state([("s", "u", "v")]))
    assert fam.member("s", "u", "v").classes == (("s",),)
    assert fam.member("s", "v", "u").classes == (("s",),)
    assert not is_intransitively_uniform(fig3).holds
    fam = uniform_unwinding(global_dg)
    # dom(h0) = H does not interfere with L, so idle and s0 share a class for L.
    assert fam.member("idle", "H", "L").same("idle", "s0")
    assert fam.member("idle", "H", "DG").classes == tuple((s,) for s in global_dg.states)


def test_uniformity_examples(fig1, fig2, fig3, global_dg):
    assert is_intransitively_uniform(global_dg).holds
    assert is_intransitively_uniform(fig2).holds
    w = is_intransitively_uniform(fig1).witness
    assert w.agent == "L" and {w.state, w.other_state} == {"eps", "a"}
    w = is_intransitively_uniform(fig3).witness
    assert w.interfering != w.other_interfering


def test_uniform_check_examples(fig3, global_dg):
    assert check_i_security_uniform(global_dg).holds
    assert check_i_security(global_dg).holds
    with pytest.raises(NonUniformPolicy):
        check_i_security_uniform(fig3)


def test_ip_examples(fig1, fig2, global_dg):
    assert check_ip_security(global_dg).holds
    g = with_global_policy(fig1, "eps")
    assert not check_ip_security(g).holds
    assert not i_security_bounded_oracle(g, 16).holds
    with pytest.raises(NotGlobalPolicy):
        check_ip_security(fig2)


def _seq(sys, data, n=6):
    return tuple(data.draw(st.lists(st.sampled_from(sys.actions), max_size=n)))


@settings(max_examples=100, deadline=None)
@given(systems(), st.data())
def test_sources_contains_agent_and_grows(sys, data):
    u = data.draw(st.sampled_from(sys.agents))
    s = data.draw(st.sampled_from(sys.states))
    a = data.draw(st.sampled_from(sys.actions))
    alpha = _seq(sys, data)
    inner = sources(sys, alpha, u, run(sys, s, (a,)))
    assert u in inner
    assert inner <= sources(sys, (a,) + alpha, u, s)


@settings(max_examples=100, deadline=None)
@given(systems(max_states=3, max_actions=2))
def test_check_matches_complete_bounded_oracle(sys):
    exact = check_i_security(sys)
    oracle = i_security_bounded_oracle(sys, len(sys.states) ** 2)
    assert exact.holds == oracle.holds
    assert exact.witness == oracle.witness


@settings(max_examples=100, deadline=None)
@given(systems())
def test_short_bound_is_sound(sys):
    if not i_security_bounded_oracle(sys, 2).holds:
        assert not check_i_security(sys).holds


@settings(max_examples=60, deadline=None)
@given(systems())
def test_normalize_preserves_verdict(sys):
    n = normalize_i(sys)
    assert check_i_security(n).holds == check_i_security(sys).holds
    assert find_intransitively_useless_edges(n) == set()
    assert normalize_i(n) == n


@settings(max_examples=100, deadline=None)
@given(systems())
def test_uniform_check_agrees_on_uniform(sys):
    if is_intransitively_uniform(sys).holds:
        assert check_i_security_uniform(sys).holds == check_i_security(sys).holds
    else:
        with pytest.raises(NonUniformPolicy):
            check_i_security_uniform(sys)


@settings(max_examples=60, deadline=None)
@given(systems(global_policy=True), st.data())
def test_global_policy_properties(sys, data):
    assert is_intransitively_uniform(sys).holds
    assert check_ip_security(sys).holds == check_i_security(sys).holds
    u = data.draw(st.sampled_from(sys.agents))
    alpha = _seq(sys, data)
    assert len({sources(sys, alpha, u, s) for s in sys.states}) == 1
    assert len({ipurge(sys, alpha, u, s) for s in sys.states}) == 1
    assert len({interfering_set(sys, u, s) for s in sys.states}) == 1


@settings(max_examples=60, deadline=None)
@given(systems(max_states=4), st.data())
def test_ipurge_matches_leslie_on_uniform(sys, data):
    if not is_intransitively_uniform(sys).holds:
        return
    u = data.draw(st.sampled_from(sys.agents))
    s = data.draw(st.sampled_from(sys.states))
    alpha = _seq(sys, data)
    assert ipurge(sys, alpha, u, s) == ipurge_leslie(sys, alpha, u, s)
