"""Transitive noninterference with local policies.

The workhorse is the per-agent similarity relation: the least equivalence
closed under local respect (a hidden action does not change the class) and
step consistency (related states stay related under any common action).  A
system is t-secure iff every agent's observation is constant on its classes.
"""

from __future__ import annotations

from collections import deque

from .errors import NonUniformPolicy
from .model import LocalPolicy, StatePartition, UniformityWitness, Verdict, Witness
from .unionfind import UnionFind

PROPERTY = "t-security"


def purge_idx(sys, alpha, u, s):
    out = []
    step, out_mask, dom = sys.step, sys.out_mask, sys.dom
    for a in alpha:
        if out_mask[s][dom[a]] >> u & 1:
            out.append(a)
            s = step[s][a]
    return tuple(out)


def purge(sys, alpha, u, s):
    """Remove the actions of alpha that u must not see, starting in s.

    A kept action advances the reference state; a removed one leaves it put.
    """
    return sys.seq_names(purge_idx(sys, sys.seq(alpha), sys.agent_index(u), sys.state_index(s)))


def _similarity(sys, u):
    """Union-find fixpoint for agent u.  Returns (uf, generators, stats)."""
    n_a = len(sys.actions)
    step, dom = sys.step, sys.dom
    uf = UnionFind(len(sys.states))
    gens = []
    queue = deque()
    for s in range(len(sys.states)):
        for a in range(n_a):
            if not sys.allows(s, dom[a], u):
                t = step[s][a]
                if uf.union(t, s):
                    queue.append((t, s, s, a, ()))
                    gens.append((s, a, ()))
    pops = 0
    while queue:
        x, y, seed, a, alpha = queue.popleft()
        pops += 1
        for b in range(n_a):
            x2, y2 = step[x][b], step[y][b]
            if uf.union(x2, y2):
                queue.append((x2, y2, seed, a, alpha + (b,)))
                gens.append((seed, a, alpha + (b,)))
    return uf, gens, {"worklist_pops": pops, "generators": len(gens)}


def t_similarity(sys, u):
    """Partition of the states into classes agent u must not be able to tell apart."""
    ui = sys.agent_index(u)
    uf, gens, _ = _similarity(sys, ui)
    named = tuple((sys.states[s], sys.actions[a], sys.seq_names(al)) for s, a, al in gens)
    return StatePartition.from_labels(sys, sys.agents[ui], uf.labels(), named)


def _minimal_witness(sys, u):
    """Shortest, then lexicographically least, (state, action, alpha) violating for u.

    Multi-source BFS over generating pairs (s·a alpha, s·alpha); FIFO order
    with seeds and successors in declaration order keeps, for every pair,
    the least path among the shortest ones.
    """
    step, dom, obs = sys.step, sys.dom, sys.obs
    n_a = len(sys.actions)
    seen = {}
    level = []
    for s in range(len(sys.states)):
        for a in range(n_a):
            if sys.allows(s, dom[a], u):
                continue
            pair = (step[s][a], s)
            if pair[0] != pair[1] and pair not in seen:
                seen[pair] = (s, a, ())
                level.append(pair)
    while level:
        hits = [seen[p] for p in level if obs[p[0]][u] != obs[p[1]][u]]
        if hits:
            return min(hits)
        nxt = []
        for x, y in level:
            s, a, alpha = seen[(x, y)]
            for b in range(n_a):
                p = (step[x][b], step[y][b])
                if p[0] != p[1] and p not in seen:
                    seen[p] = (s, a, alpha + (b,))
                    nxt.append(p)
        level = nxt
    return None


def _make_witness(sys, u, s, a, alpha, prop=PROPERTY):
    with_ = sys.step[s][a]
    for b in alpha:
        with_ = sys.step[with_][b]
    without = s
    for b in alpha:
        without = sys.step[without][b]
    return Witness(sys.agents[u], sys.states[s], sys.actions[a], sys.seq_names(alpha),
                   sys.obs[with_][u], sys.obs[without][u], prop)


def _pick(sys, found):
    """found: list of (u, s, a, alpha) candidates; minimal by (len, agent, state, action, alpha)."""
    u, s, a, alpha = min(found, key=lambda c: (len(c[3]), c[0], c[1], c[2], c[3]))
    return _make_witness(sys, u, s, a, alpha)


def check_t_security(sys):
    """Decide t-security via the unwinding fixpoint; insecure verdicts carry a minimal witness."""
    stats = {"fixpoint_pops": 0, "generators": 0}
    found = []
    for u in range(len(sys.agents)):
        uf, _, st = _similarity(sys, u)
        stats["fixpoint_pops"] += st["worklist_pops"]
        stats["generators"] += st["generators"]
        label_obs = {}
        consistent = True
        for s in range(len(sys.states)):
            r = uf.find(s)
            if label_obs.setdefault(r, sys.obs[s][u]) != sys.obs[s][u]:
                consistent = False
                break
        if not consistent:
            s, a, alpha = _minimal_witness(sys, u)
            found.append((u, s, a, alpha))
    if not found:
        return Verdict(True, PROPERTY, None, stats)
    return Verdict(False, PROPERTY, _pick(sys, found), stats)


def t_security_pair_oracle(sys):
    """Decide t-security straight from the definition.

    For every hidden (state, action, agent) a breadth-first search over the
    product automaton started in (s·a, s) looks for a reachable pair with
    different observations.  The product has at most |S|^2 states, so this
    covers every continuation.
    """
    step, dom, obs = sys.step, sys.dom, sys.obs
    n_a = len(sys.actions)
    found = []
    explored = 0
    for u in range(len(sys.agents)):
        for s in range(len(sys.states)):
            for a in range(n_a):
                if sys.allows(s, dom[a], u):
                    continue
                start = (step[s][a], s)
                paths = {start: ()}
                queue = deque([start])
                while queue:
                    x, y = pair = queue.popleft()
                    explored += 1
                    if obs[x][u] != obs[y][u]:
                        found.append((u, s, a, paths[pair]))
                        break
                    for b in range(n_a):
                        nxt = (step[x][b], step[y][b])
                        if nxt not in paths:
                            paths[nxt] = paths[pair] + (b,)
                            queue.append(nxt)
    stats = {"pairs_explored": explored}
    if not found:
        return Verdict(True, PROPERTY, None, stats)
    return Verdict(False, PROPERTY, _pick(sys, found), stats)


def _useless_idx(sys):
    useless = set()
    for u in range(len(sys.agents)):
        uf, _, _ = _similarity(sys, u)
        classes = {}
        for s in range(len(sys.states)):
            classes.setdefault(uf.find(s), []).append(s)
        for members in classes.values():
            common = ~0
            for s in members:
                common &= sys.in_mask[s][u]
            for s in members:
                extra = sys.in_mask[s][u] & ~common
                for v in range(len(sys.agents)):
                    if extra >> v & 1:
                        useless.add((s, v, u))
    return useless


def find_useless_edges_t(sys):
    """Edges v -> u at s contradicted by some state u must confuse with s and lacking the edge."""
    return {(sys.states[s], sys.agents[v], sys.agents[u]) for s, v, u in _useless_idx(sys)}


def normalize_t(sys):
    """Drop every useless edge at once; the verdict of check_t_security is unchanged."""
    useless = _useless_idx(sys)
    if not useless:
        return sys
    pols = [
        LocalPolicy(frozenset(e for e in pol.edges if (s, e[0], e[1]) not in useless))
        for s, pol in enumerate(sys.policies)
    ]
    return sys.with_policies(pols)


def is_uniform_t(sys):
    """True iff every agent's interfering set is constant on its similarity classes."""
    for u in range(len(sys.agents)):
        uf, _, _ = _similarity(sys, u)
        first = {}
        for s in range(len(sys.states)):
            r = uf.find(s)
            t = first.setdefault(r, s)
            if sys.in_mask[t][u] != sys.in_mask[s][u]:
                w = UniformityWitness(sys.agents[u], sys.states[t], sys.states[s],
                                      sys.agent_set(sys.in_mask[t][u]),
                                      sys.agent_set(sys.in_mask[s][u]))
                return Verdict(False, "t-uniformity", w)
    return Verdict(True, "t-uniformity")


def _initial_state_check(sys):
    """Compare s0·alpha with s0·purge(alpha) for every agent and every alpha."""
    step, dom, obs, out_mask = sys.step, sys.dom, sys.obs, sys.out_mask
    n_a = len(sys.actions)
    s0 = sys.initial
    best = None
    for u in range(len(sys.agents)):
        start = (s0, s0)
        paths = {start: ((), ())}
        queue = deque([start])
        while queue:
            x, y = pair = queue.popleft()
            if obs[x][u] != obs[y][u]:
                alpha, purged = paths[pair]
                cand = (len(alpha), u, alpha, purged, obs[x][u], obs[y][u])
                if best is None or cand < best:
                    best = cand
                break
            alpha, purged = paths[pair]
            for b in range(n_a):
                if out_mask[y][dom[b]] >> u & 1:
                    nxt, p2 = (step[x][b], step[y][b]), purged + (b,)
                else:
                    nxt, p2 = (step[x][b], y), purged
                if nxt not in paths:
                    paths[nxt] = (alpha + (b,), p2)
                    queue.append(nxt)
    if best is None:
        return Verdict(True, PROPERTY)
    _, u, alpha, purged, o1, o2 = best
    w = Witness(sys.agents[u], sys.states[s0], None, sys.seq_names(alpha), o1, o2,
                PROPERTY + " (initial state)", other=sys.seq_names(purged))
    return Verdict(False, PROPERTY, w)


def check_t_from_initial(sys):
    """t-security checked only on runs from the initial state.

    Sound and complete for uniform policies only; on any other policy this
    raises NonUniformPolicy, recording what the initial-state test would
    have answered.
    """
    uni = is_uniform_t(sys)
    if not uni.holds:
        partial = _initial_state_check(sys)
        note = ("initial-state purge test alone would wrongly pass"
                if partial.holds else "initial-state purge test would report insecure")
        raise NonUniformPolicy(f"policy is not uniform ({uni.witness.describe()}); {note}",
                               witness=uni.witness, initial_state_verdict=partial)
    return _initial_state_check(sys)
