"""Intransitive noninterference with local policies.

An action a performed in s is allowed to influence agent u only if the
information travels along a chain of permitted edges, each used by an
action performed later in the run.  This module evaluates the ``sources``
recursion and the intransitive purge, decides i-security exactly with a
subset-indexed unwinding (exponential only in the number of agents), and
provides the polynomial uniform unwinding that is complete for uniform
policies.

Knowledge is tracked forward: after a performed in t, the agents in
``out_mask[t][dom(a)]`` know about it; a later action b performed in x by a
knowing agent spreads the knowledge to ``out_mask[x][dom(b)]``.  Agent u is
outside ``sources(a alpha, u, t)`` exactly when it ends up not knowing.
"""

from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass, field

from .errors import BudgetExceeded, NonUniformPolicy, NotGlobalPolicy, SubsetGuardExceeded
from .model import LocalPolicy, StatePartition, UniformityWitness, Verdict, Witness
from .unionfind import UnionFind

PROPERTY = "i-security"
DEFAULT_GUARD = 16
DEFAULT_BUDGET = 10**7


# --- sources and purges ---------------------------------------------------------------


def _path_states(sys, s, alpha):
    states = [s]
    for a in alpha:
        s = sys.step[s][a]
        states.append(s)
    return states


def sources_idx(sys, alpha, u, s):
    """Bitmask of sources(alpha, u, s), evaluated right to left."""
    states = _path_states(sys, s, alpha)
    src = 1 << u
    for i in range(len(alpha) - 1, -1, -1):
        v = sys.dom[alpha[i]]
        if sys.out_mask[states[i]][v] & src:
            src |= 1 << v
    return src


def sources(sys, alpha, u, s):
    """Agents that may know, after alpha from s, about the actions performed."""
    return sys.agent_set(sources_idx(sys, sys.seq(alpha), sys.agent_index(u), sys.state_index(s)))


def ipurge_idx(sys, alpha, u, s, advance_dropped=False):
    out = []
    for i, a in enumerate(alpha):
        if sources_idx(sys, alpha[i:], u, s) >> sys.dom[a] & 1:
            out.append(a)
            s = sys.step[s][a]
        elif advance_dropped:
            s = sys.step[s][a]
    return tuple(out)


def ipurge(sys, alpha, u, s):
    """Intransitive purge: a dropped action does not advance the reference state."""
    return sys.seq_names(ipurge_idx(sys, sys.seq(alpha), sys.agent_index(u), sys.state_index(s)))


def ipurge_leslie(sys, alpha, u, s):
    """Variant in which a dropped action still advances the reference state."""
    return sys.seq_names(ipurge_idx(sys, sys.seq(alpha), sys.agent_index(u),
                                    sys.state_index(s), advance_dropped=True))


# --- the subset-indexed unwinding -----------------------------------------------------------


@dataclass
class SubsetRelationFamily:
    """Least intransitive unwinding, materialized only for reachable subsets.

    ``entries`` maps a bitmask D' of agents to the set of state pairs (x, y)
    with x ⪰_{D'} y.  Every pair was generated as (t·a alpha, t·alpha)
    with D' the agents that do not learn about a along alpha;
    ``provenance`` maps each triple (D', x, y) to the least such
    (t, a, alpha) among the shortest.  Reflexive pairs are implicit.
    """

    sys: object
    entries: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    levels: list = field(default_factory=list)  # triples in discovery order, by alpha length
    stats: dict = field(default_factory=dict)

    def agents_of(self, mask):
        return self.sys.agent_set(mask)

    def pairs_for_agent(self, u):
        """All stored pairs whose subset contains agent index u."""
        out = set()
        for mask, pairs in self.entries.items():
            if mask >> u & 1:
                out |= pairs
        return out

    def named(self):
        """Entries keyed by frozensets of agent names, pairs as state names."""
        st = self.sys.states
        return {self.agents_of(m): {(st[x], st[y]) for x, y in p} for m, p in self.entries.items()}


def _guard(sys, guard, force):
    n = len(sys.agents)
    if n > guard and not force:
        raise SubsetGuardExceeded(n, guard)


def fpt_unwinding(sys, guard=DEFAULT_GUARD, force=False, stop_at_violation=False):
    """Breadth-first worklist over triples (D', x, y) closed under local respect and step consistency.

    Seeds are visited in (state, action) order and successors in action
    order, so the first visit of every triple carries the least witness
    path among the shortest.  With ``stop_at_violation`` the search ends
    after the first level containing an output-inconsistent triple.
    """
    _guard(sys, guard, force)
    step, dom, out_mask, obs = sys.step, sys.dom, sys.out_mask, sys.obs
    n_a, n_u = len(sys.actions), len(sys.agents)
    full = (1 << n_u) - 1
    fam = SubsetRelationFamily(sys)
    parent = {}
    level = []
    reflexive = 0
    for t in range(len(sys.states)):
        for a in range(n_a):
            mask = full & ~out_mask[t][dom[a]]
            x = step[t][a]
            if x == t:
                reflexive += 1
                continue
            if not mask:
                continue
            key = (mask, x, t)
            if key not in parent:
                parent[key] = (None, t, a)
                level.append(key)
    pops = 0
    while level:
        fam.levels.append(level)
        violating = False
        nxt = []
        for key in level:
            mask, x, y = key
            pops += 1
            fam.entries.setdefault(mask, set()).add((x, y))
            if not violating:
                for u in range(n_u):
                    if mask >> u & 1 and obs[x][u] != obs[y][u]:
                        violating = True
                        break
            for b in range(n_a):
                x2, y2 = step[x][b], step[y][b]
                if x2 == y2:
                    continue
                v = dom[b]
                m2 = mask if mask >> v & 1 else mask & ~out_mask[x][v]
                if not m2:
                    continue
                k2 = (m2, x2, y2)
                if k2 not in parent:
                    parent[k2] = (key, None, b)
                    nxt.append(k2)
        if violating and stop_at_violation:
            break
        level = nxt
    for key in parent:
        path = []
        k = key
        while True:
            prev, t, b = parent[k]
            if prev is None:
                seed = (t, b)
                break
            path.append(b)
            k = prev
        fam.provenance[key] = (seed[0], seed[1], tuple(reversed(path)))
    fam.stats = {
        "triples": len(parent),
        "worklist_pops": pops,
        "subsets_materialized": len(fam.entries),
        "reflexive_seeds": reflexive,
    }
    return fam


def _i_witness(sys, u, t, a, alpha):
    x = sys.step[t][a]
    y = t
    for b in alpha:
        x, y = sys.step[x][b], sys.step[y][b]
    return Witness(sys.agents[u], sys.states[t], sys.actions[a], sys.seq_names(alpha),
                   sys.obs[x][u], sys.obs[y][u], PROPERTY)


def check_i_security(sys, guard=DEFAULT_GUARD, force=False):
    """Decide i-security exactly.

    Secure iff no triple (D', x, y) of the least unwinding has an agent in D'
    observing differently in x and y.  The witness minimizes
    (len(alpha), agent, state, action, alpha) in declaration order.
    """
    fam = fpt_unwinding(sys, guard, force, stop_at_violation=True)
    obs = sys.obs
    last = fam.levels[-1] if fam.levels else []
    best = None
    for mask, x, y in last:
        for u in range(len(sys.agents)):
            if mask >> u & 1 and obs[x][u] != obs[y][u]:
                t, a, alpha = fam.provenance[(mask, x, y)]
                cand = (len(alpha), u, t, a, alpha)
                if best is None or cand < best:
                    best = cand
    if best is None:
        return Verdict(True, PROPERTY, None, fam.stats)
    _, u, t, a, alpha = best
    return Verdict(False, PROPERTY, _i_witness(sys, u, t, a, alpha), fam.stats)


# --- bounded definitional check -----------------------------------------------------------


def budget_from_env():
    value = os.environ.get("NIPOL_BUDGET")
    return int(value) if value else DEFAULT_BUDGET


def bounded_cost(sys, bound):
    """Sequence evaluations needed to enumerate every (s, a, alpha) with len(alpha) <= bound."""
    n_a = len(sys.actions)
    per_start = sum(n_a**k for k in range(bound + 1))
    return len(sys.states) * n_a * per_start


def largest_feasible_bound(cost_fn, sys, budget, cap=None):
    b = 0
    while cost_fn(sys, b + 1) <= budget and (cap is None or b + 1 <= cap):
        b += 1
    return b if cost_fn(sys, 0) <= budget else -1


def i_security_bounded_oracle(sys, bound, budget=None):
    """Enumerate every (s, a, alpha) with len(alpha) <= bound straight from the definition.

    Sound for any bound and complete once bound >= |S|^2.  Subtrees in which
    every agent already knows about a, or in which both runs have merged,
    cannot produce a violation and are skipped; the search also stops
    descending below the length of the best witness found so far.
    """
    budget = budget_from_env() if budget is None else budget
    cost = bounded_cost(sys, bound)
    if cost > budget:
        raise BudgetExceeded(bound, largest_feasible_bound(bounded_cost, sys, budget), cost, budget)
    step, dom, out_mask, obs = sys.step, sys.dom, sys.out_mask, sys.obs
    n_a, n_u = len(sys.actions), len(sys.agents)
    full = (1 << n_u) - 1
    best = [None]
    visited = [0]

    def consider(u, t, a, alpha):
        cand = (len(alpha), u, t, a, tuple(alpha))
        if best[0] is None or cand < best[0]:
            best[0] = cand

    def explore(t, a, x, y, known, alpha):
        visited[0] += 1
        for u in range(n_u):
            if not known >> u & 1 and obs[x][u] != obs[y][u]:
                consider(u, t, a, alpha)
        if len(alpha) >= bound or known == full or x == y:
            return
        if best[0] is not None and best[0][0] <= len(alpha):
            return
        for b in range(n_a):
            v = dom[b]
            k2 = known | out_mask[x][v] if known >> v & 1 else known
            alpha.append(b)
            explore(t, a, step[x][b], step[y][b], k2, alpha)
            alpha.pop()

    for t in range(len(sys.states)):
        for a in range(n_a):
            explore(t, a, step[t][a], t, out_mask[t][dom[a]], [])
    stats = {"bound": bound, "sequence_evaluations": visited[0], "budget": budget, "cost": cost}
    if best[0] is None:
        return Verdict(True, PROPERTY, None, stats)
    _, u, t, a, alpha = best[0]
    return Verdict(False, PROPERTY, _i_witness(sys, u, t, a, alpha), stats)


# --- i-similarity and useless edges ----------------------------------------------------------


def _i_labels(sys, guard, force):
    """Canonical i-similarity labels for every agent, from one family computation."""
    fam = fpt_unwinding(sys, guard, force)
    ufs = [UnionFind(len(sys.states)) for _ in sys.agents]
    for mask, pairs in fam.entries.items():
        for u, uf in enumerate(ufs):
            if mask >> u & 1:
                for x, y in pairs:
                    uf.union(x, y)
    return [uf.labels() for uf in ufs], fam


def i_similarity(sys, u, guard=DEFAULT_GUARD, force=False):
    """States that agent u must not be able to tell apart under intransitive flow."""
    ui = sys.agent_index(u)
    labels, fam = _i_labels(sys, guard, force)
    gens = []
    for (mask, x, y), (t, a, alpha) in fam.provenance.items():
        if mask >> ui & 1:
            gens.append((sys.states[t], sys.actions[a], sys.seq_names(alpha)))
    return StatePartition.from_labels(sys, sys.agents[ui], labels[ui], sorted(set(gens)))


def _useless_i_idx(sys, guard, force):
    base, _ = _i_labels(sys, guard, force)
    return [e for e in sys.edge_list() if _i_labels(sys.without_edge(*e), guard, force)[0] == base]


def find_intransitively_useless_edges(sys, guard=DEFAULT_GUARD, force=False):
    """Edges whose removal leaves every agent's i-similarity unchanged."""
    _guard(sys, guard, force)
    return {(sys.states[s], sys.agents[v], sys.agents[u]) for s, v, u in _useless_i_idx(sys, guard, force)}


def normalize_i(sys, guard=DEFAULT_GUARD, force=False):
    """Remove intransitively useless edges one at a time until none is left.

    Each round removes the first useless edge in (state, source, target)
    order and recomputes, since removing one edge can change whether
    another is useless.
    """
    _guard(sys, guard, force)
    while True:
        base, _ = _i_labels(sys, guard, force)
        for e in sys.edge_list():
            cand = sys.without_edge(*e)
            if _i_labels(cand, guard, force)[0] == base:
                sys = cand
                break
        else:
            return sys


# --- the uniform unwinding -----------------------------------------------------------------


@dataclass
class UniformUnwindingFamily:
    """Least uniform unwinding.

    For an anchor state s~ and agent v the relation does not depend on u
    beyond whether v may interfere with u in s~: if it may, the member is
    the identity; otherwise it is the relation stored in ``labels[(s~, v)]``.
    """

    sys: object
    labels: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    def member_labels(self, anchor, v, u):
        if self.sys.allows(anchor, v, u):
            return tuple(range(len(self.sys.states)))
        return self.labels[(anchor, v)]

    def member(self, anchor, v, u):
        """The relation for (anchor state, agent v, agent u) as a StatePartition."""
        sys = self.sys
        anchor, v, u = sys.state_index(anchor), sys.agent_index(v), sys.agent_index(u)
        return StatePartition.from_labels(sys, sys.agents[u], self.member_labels(anchor, v, u))


def _allowed_actions(sys, anchor, v):
    return [b for b in range(len(sys.actions)) if not sys.allows(anchor, v, sys.dom[b])]


def _uniform_relation(sys, anchor, v):
    uf = UnionFind(len(sys.states))
    allowed = _allowed_actions(sys, anchor, v)
    queue = deque()
    for a in range(len(sys.actions)):
        if sys.dom[a] == v and uf.union(anchor, sys.step[anchor][a]):
            queue.append((sys.step[anchor][a], anchor))
    while queue:
        x, y = queue.popleft()
        for b in allowed:
            x2, y2 = sys.step[x][b], sys.step[y][b]
            if uf.union(x2, y2):
                queue.append((x2, y2))
    return uf.labels()


def uniform_unwinding(sys):
    """Compute every member of the least uniform unwinding (polynomial size)."""
    fam = UniformUnwindingFamily(sys)
    for anchor in range(len(sys.states)):
        for v in range(len(sys.agents)):
            fam.labels[(anchor, v)] = _uniform_relation(sys, anchor, v)
    fam.stats = {"members": len(sys.states) * len(sys.agents) ** 2,
                 "distinct_relations": len(fam.labels)}
    return fam


def _restricted_pairs(sys, anchor, v):
    """BFS over (anchor·a alpha, anchor·alpha) with dom(a)=v and alpha using allowed actions only.

    Yields (x, y, a, alpha) in breadth-first order.
    """
    allowed = _allowed_actions(sys, anchor, v)
    seen = {}
    queue = deque()
    for a in range(len(sys.actions)):
        if sys.dom[a] != v:
            continue
        p = (sys.step[anchor][a], anchor)
        if p[0] != p[1] and p not in seen:
            seen[p] = (a, ())
            queue.append(p)
    while queue:
        p = queue.popleft()
        a, alpha = seen[p]
        yield p[0], p[1], a, alpha
        for b in allowed:
            q = (sys.step[p[0]][b], sys.step[p[1]][b])
            if q[0] != q[1] and q not in seen:
                seen[q] = (a, alpha + (b,))
                queue.append(q)


def _anchors_for(sys, u):
    for anchor in range(len(sys.states)):
        for v in range(len(sys.agents)):
            if not sys.allows(anchor, v, u):
                yield anchor, v


def _uniformity_witness(sys, fam):
    in_mask = sys.in_mask
    for u in range(len(sys.agents)):
        for anchor, v in _anchors_for(sys, u):
            labels = fam.labels[(anchor, v)]
            first = {}
            bad = False
            for s, r in enumerate(labels):
                if in_mask[first.setdefault(r, s)][u] != in_mask[s][u]:
                    bad = True
                    break
            if not bad:
                continue
            for x, y, _, _ in _restricted_pairs(sys, anchor, v):
                if in_mask[x][u] != in_mask[y][u]:
                    return UniformityWitness(
                        sys.agents[u], sys.states[x], sys.states[y],
                        sys.agent_set(in_mask[x][u]), sys.agent_set(in_mask[y][u]),
                        anchor=(sys.states[anchor], sys.agents[v]))
    return None


def is_intransitively_uniform(sys, family=None):
    """Interfering sets constant on every member of the uniform unwinding."""
    fam = family or uniform_unwinding(sys)
    w = _uniformity_witness(sys, fam)
    return Verdict(w is None, "i-uniformity", w, dict(fam.stats))


def check_i_security_uniform(sys):
    """Polynomial i-security check, valid for intransitively uniform policies only.

    Raises NonUniformPolicy otherwise.  The witness is the first violation
    found by breadth-first search per (agent, anchor, v); it is a genuine
    violation but need not be the globally least one.
    """
    fam = uniform_unwinding(sys)
    uni = is_intransitively_uniform(sys, fam)
    if not uni.holds:
        raise NonUniformPolicy(f"policy is not intransitively uniform ({uni.witness.describe()})",
                               witness=uni.witness)
    obs = sys.obs
    for u in range(len(sys.agents)):
        for anchor, v in _anchors_for(sys, u):
            labels = fam.labels[(anchor, v)]
            first = {}
            if all(obs[first.setdefault(r, s)][u] == obs[s][u] for s, r in enumerate(labels)):
                continue
            for x, y, a, alpha in _restricted_pairs(sys, anchor, v):
                if obs[x][u] != obs[y][u]:
                    return Verdict(False, PROPERTY, _i_witness(sys, u, anchor, a, alpha), fam.stats)
    return Verdict(True, PROPERTY, None, fam.stats)


def check_ip_security(sys):
    """IP-security: i-security for a policy that is the same in every state."""
    if not sys.is_global_policy:
        raise NotGlobalPolicy("local policies differ between states; IP-security needs a global policy")
    return check_i_security_uniform(sys)


def with_global_policy(sys, state):
    """Copy of sys where every state carries the local policy of ``state``."""
    pol = sys.policies[sys.state_index(state)]
    return sys.with_policies([LocalPolicy(pol.edges)] * len(sys.states))
