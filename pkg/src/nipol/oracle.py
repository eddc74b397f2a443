"""Brute-force ground truth and random systems for cross-checking the analyses.

Nothing here imports the analysis modules: purge, sources and ipurge are
re-derived from their recursive definitions on a table indexed by (alpha, s),
built by prepending one action at a time.  Prepending matches the shape of
the recursions (each looks at the first action and recurses on the rest from
the successor state), and building level k+1 as ``a + alpha`` for a in
declaration order over level k in order keeps every level in lexicographic
order.
"""

from __future__ import annotations

import os
import random
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded
from .model import Verdict, Witness, build

DEFAULT_BUDGET = 10**7


def _budget(budget):
    if budget is not None:
        return budget
    value = os.environ.get("NIPOL_BUDGET")
    return int(value) if value else DEFAULT_BUDGET


def _n_sequences(n_a, bound):
    return sum(n_a**k for k in range(bound + 1))


def definition_cost(sys, bound):
    """Evaluations of (s, a, alpha) with len(alpha) <= bound."""
    return len(sys.states) * len(sys.actions) * _n_sequences(len(sys.actions), bound)


def equality_cost(sys, bound):
    """Evaluations of (u, s, alpha); grouping by hash makes the pairwise check linear."""
    return len(sys.agents) * len(sys.states) * _n_sequences(len(sys.actions), bound)


def _check_budget(cost_fn, sys, bound, budget):
    budget = _budget(budget)
    cost = cost_fn(sys, bound)
    if cost > budget:
        largest = -1
        while cost_fn(sys, largest + 1) <= budget:
            largest += 1
        raise BudgetExceeded(bound, largest, cost, budget)
    return budget, cost


class _Table:
    """Level-by-level data for every (alpha, s) with len(alpha) <= bound.

    Sequences are identified by their position in shortlex order: level k
    holds the ``n_a**k`` sequences of length k in lexicographic order, so a
    sequence is the pair (length, lex index) and ``a + alpha`` has lex index
    ``a * n_a**len(alpha) + lex(alpha)``.  Per level:

    * ``end[k][i, s]``: the state s·alpha;
    * ``key[k][i, s, u]``: shortlex index of purge(alpha, u, s), or of
      ipurge(alpha, u, s) when ``intransitive``;
    * ``src_levels[k][i, s, u]``: bitmask of sources(alpha, u, s), when
      ``intransitive``.
    """

    def __init__(self, sys, bound, want_keys=True, intransitive=False):
        n_s, n_a, n_u = len(sys.states), len(sys.actions), len(sys.agents)
        self.n_a = n_a
        self.bound = bound
        allow = np.array([[[p.allows(v, u) for u in range(n_u)] for v in range(n_u)]
                          for p in sys.policies], dtype=bool)  # [s, v, u]
        weights = np.array([1 << u for u in range(n_u)], dtype=np.int64)
        outm = (allow * weights).sum(axis=2)  # [s, v] -> bitmask of agents v may reach
        step = np.array(sys.step, dtype=np.int64).reshape(n_s, n_a)
        self.pw = [n_a**k for k in range(bound + 2)]
        self.offset = [sum(self.pw[:k]) for k in range(bound + 2)]
        self.end = [np.arange(n_s, dtype=np.int64).reshape(1, n_s)]
        self.key = [np.zeros((1, n_s, n_u), dtype=np.int64)] if want_keys else None
        self.src_levels = []
        plen = np.zeros((1, n_s, n_u), dtype=np.int64)
        plex = np.zeros((1, n_s, n_u), dtype=np.int64)
        src = np.broadcast_to(weights, (1, n_s, n_u)).copy()
        if intransitive:
            self.src_levels.append(src)
        pw = np.array(self.pw, dtype=np.int64)
        offset = np.array(self.offset, dtype=np.int64)
        for _ in range(bound):
            ends, lens, lexs, srcs = [], [], [], []
            for a in range(n_a):
                v = sys.dom[a]
                t = step[:, a]
                ends.append(self.end[-1][:, t])
                if not (want_keys or intransitive):
                    continue
                if intransitive:
                    inner = src[:, t, :]
                    keep = (inner & outm[:, v][None, :, None]) != 0
                    srcs.append(inner | (keep.astype(np.int64) << v))
                else:
                    keep = np.broadcast_to(allow[:, v, :][None], plen.shape)
                if want_keys:
                    nl, nx = plen[:, t, :], plex[:, t, :]
                    lens.append(np.where(keep, nl + 1, plen))
                    lexs.append(np.where(keep, a * pw[nl] + nx, plex))
            self.end.append(np.concatenate(ends))
            if intransitive:
                src = np.concatenate(srcs)
                self.src_levels.append(src)
            if want_keys:
                plen, plex = np.concatenate(lens), np.concatenate(lexs)
                self.key.append(offset[plen] + plex)

    def sequence(self, k, i):
        out = []
        for _ in range(k):
            out.append(i % self.n_a)
            i //= self.n_a
        return tuple(reversed(out))

    def locate(self, flat):
        """Inverse of the shortlex numbering: flat index -> (length, lex index)."""
        k = 0
        while flat >= self.offset[k + 1]:
            k += 1
        return k, flat - self.offset[k]


def _obs_ids(sys):
    ids = {}
    return np.array([[ids.setdefault(label, len(ids)) for label in row] for row in sys.obs],
                    dtype=np.int64)


def _action_witness(sys, prop, u, s, a, alpha, o1, o2):
    return Witness(sys.agents[u], sys.states[s], sys.actions[a],
                   tuple(sys.actions[b] for b in alpha), o1, o2, prop)


def _definition_check(sys, bound, budget, intransitive):
    prop = "i-security" if intransitive else "t-security"
    budget, cost = _check_budget(definition_cost, sys, bound, budget)
    table = _Table(sys, bound, want_keys=False, intransitive=intransitive)
    n_s, n_a, n_u = len(sys.states), len(sys.actions), len(sys.agents)
    obs = _obs_ids(sys)
    stats = {"bound": bound, "cost": cost}
    for k in range(bound + 1):
        end = table.end[k]
        for u in range(n_u):
            for s in range(n_s):
                pol = sys.policies[s]
                for a in range(n_a):
                    v, t = sys.dom[a], sys.step[s][a]
                    differ = obs[end[:, t], u] != obs[end[:, s], u]
                    if intransitive:
                        reach = sum(1 << w for w in range(n_u) if pol.allows(v, w))
                        differ &= (table.src_levels[k][:, t, u] & reach) == 0
                    elif pol.allows(v, u):
                        continue
                    hits = np.flatnonzero(differ)
                    if hits.size:
                        i = int(hits[0])
                        w = _action_witness(sys, prop, u, s, a, table.sequence(k, i),
                                            sys.obs[int(end[i, t])][u], sys.obs[int(end[i, s])][u])
                        return Verdict(False, prop, w, stats)
    return Verdict(True, prop, None, stats)


def t_definition_oracle(sys, bound, budget=None):
    """Enumerate every hidden (u, s, a) and every alpha with len(alpha) <= bound.

    Complete once bound >= |S|^2: the pair (s·a alpha, s·alpha) runs in a
    product automaton with at most |S|^2 states.
    """
    return _definition_check(sys, bound, budget, intransitive=False)


def i_definition_oracle(sys, bound, budget=None):
    """Enumeration analogue of t_definition_oracle for i-security."""
    return _definition_check(sys, bound, budget, intransitive=True)


def _equality_check(sys, bound, budget, intransitive):
    prop = "i-security (ipurge)" if intransitive else "t-security (purge)"
    budget, cost = _check_budget(equality_cost, sys, bound, budget)
    table = _Table(sys, bound, want_keys=True, intransitive=intransitive)
    n_s, n_u = len(sys.states), len(sys.agents)
    obs = _obs_ids(sys)
    keys = np.concatenate(table.key)  # [flat sequence index, s, u]
    ends = np.concatenate(table.end)  # [flat sequence index, s]
    best = None
    for u in range(n_u):
        for s in range(n_s):
            _, first, inverse = np.unique(keys[:, s, u], return_index=True, return_inverse=True)
            o = obs[ends[:, s], u]
            bad = np.flatnonzero(o != o[first[inverse]])
            if bad.size:
                j = int(bad[0])
                i = int(first[inverse[j]])
                cand = (table.locate(j)[0], u, s, j, i)
                if best is None or cand < best:
                    best = cand
    stats = {"bound": bound, "cost": cost}
    if best is None:
        return Verdict(True, prop, None, stats)
    _, u, s, j, i = best
    beta, alpha = table.sequence(*table.locate(j)), table.sequence(*table.locate(i))
    names = sys.actions
    w = Witness(sys.agents[u], sys.states[s], None, tuple(names[b] for b in alpha),
                sys.obs[int(ends[i, s])][u], sys.obs[int(ends[j, s])][u], prop,
                other=tuple(names[b] for b in beta))
    return Verdict(False, prop, w, stats)


def purge_equality_oracle(sys, bound, budget=None):
    """Check that sequences with equal purge from s lead to equal observations, len <= bound.

    Sequences are grouped by purge value per (agent, state).  The witness
    pairs the shortlex-first member of a group (``alpha``) with the first
    later member observed differently (``other``).
    """
    return _equality_check(sys, bound, budget, intransitive=False)


def ipurge_equality_oracle(sys, bound, budget=None):
    """As purge_equality_oracle, grouping by the intransitive purge."""
    return _equality_check(sys, bound, budget, intransitive=True)


# --- random systems -------------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorConfig:
    max_states: int = 6
    max_actions: int = 4
    max_agents: int = 3
    edge_density: float = 0.4
    obs_alphabet_size: int = 2
    seed: int = 0
    global_policy: bool = False

    def __post_init__(self):
        for name in ("max_states", "max_actions", "max_agents", "obs_alphabet_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if not 0.0 <= self.edge_density <= 1.0:
            raise ValueError("edge_density must lie in [0, 1]")


def generate_random_system(cfg):
    """A random validated system, fully determined by ``cfg``.

    Sizes are drawn uniformly from 1 to the configured maxima.  Every state
    after the first hangs off an earlier state through a spanning skeleton
    edge, and all other transitions go to an earlier state or stay put, so
    every state is reachable from the initial state ``q0``.
    """
    rng = random.Random(cfg.seed)
    n_s = rng.randint(1, cfg.max_states)
    n_a = rng.randint(1, cfg.max_actions)
    n_u = rng.randint(1, cfg.max_agents)
    agents = [f"d{i}" for i in range(n_u)]
    actions = {f"a{i}": agents[rng.randrange(n_u)] for i in range(n_a)}
    act_names = list(actions)
    states = [f"q{i}" for i in range(n_s)]
    step = [[None] * n_a for _ in range(n_s)]
    for j in range(1, n_s):
        slots = [(p, a) for p in range(j) for a in range(n_a) if step[p][a] is None]
        p, a = rng.choice(slots)
        step[p][a] = j
    for s in range(n_s):
        for a in range(n_a):
            if step[s][a] is None:
                step[s][a] = rng.randint(0, s)
    steps = [(states[s], act_names[a], states[step[s][a]])
             for s in range(n_s) for a in range(n_a) if step[s][a] != s]
    obs = [(states[s], agents[u], str(rng.randrange(cfg.obs_alphabet_size)))
           for s in range(n_s) for u in range(n_u)]
    pairs = [(v, u) for v in agents for u in agents if v != u]
    if cfg.global_policy:
        chosen = [p for p in pairs if rng.random() < cfg.edge_density]
        edges = [(s, v, u) for s in states for v, u in chosen]
    else:
        edges = [(s, v, u) for s in states for v, u in pairs if rng.random() < cfg.edge_density]
    return build(agents, actions, states, states[0], steps, obs, edges)
