"""System model: deterministic automata whose states carry local security policies.

A system has agents, actions (each owned by one agent), a total step function,
per-(state, agent) observation labels and, in every state, a reflexive
"may interfere" relation over agents.  Internally everything is indexed by
small integers in declaration order; the public helpers accept names.
"""

from __future__ import annotations

import logging
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Any, NamedTuple

from .errors import Diagnostic, SourceSpan, ValidationError

log = logging.getLogger(__name__)

DEFAULT_OBS = "0"


@dataclass(frozen=True)
class LocalPolicy:
    """Interference relation attached to one state.

    ``edges`` holds the non-reflexive pairs ``(v, u)`` meaning v may interfere
    with u, as agent indices.  Reflexive pairs are always implied.
    """

    edges: frozenset = frozenset()

    def allows(self, v, u):
        return v == u or (v, u) in self.edges

    def pairs(self, n_agents):
        """All pairs of the relation, reflexive ones included."""
        return frozenset(self.edges) | {(u, u) for u in range(n_agents)}


@dataclass(frozen=True)
class System:
    agents: tuple
    actions: tuple
    states: tuple
    initial: int
    dom: tuple  # action -> agent
    step: tuple  # state -> action -> state
    obs: tuple  # state -> agent -> label
    policies: tuple  # state -> LocalPolicy

    out_mask: tuple = field(init=False, repr=False, compare=False)
    in_mask: tuple = field(init=False, repr=False, compare=False)
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.agents)
        out_mask, in_mask = [], []
        for pol in self.policies:
            out = [1 << v for v in range(n)]
            inc = [1 << u for u in range(n)]
            for v, u in pol.edges:
                out[v] |= 1 << u
                inc[u] |= 1 << v
            out_mask.append(tuple(out))
            in_mask.append(tuple(inc))
        object.__setattr__(self, "out_mask", tuple(out_mask))
        object.__setattr__(self, "in_mask", tuple(in_mask))
        object.__setattr__(self, "_index", {
            "agent": {name: i for i, name in enumerate(self.agents)},
            "action": {name: i for i, name in enumerate(self.actions)},
            "state": {name: i for i, name in enumerate(self.states)},
        })

    # --- name/index conversion -------------------------------------------------

    def _lookup(self, kind, x):
        if isinstance(x, int):
            return x
        try:
            return self._index[kind][x]
        except KeyError:
            raise KeyError(f"unknown {kind} {x}") from None

    def agent_index(self, x):
        return self._lookup("agent", x)

    def action_index(self, x):
        return self._lookup("action", x)

    def state_index(self, x):
        return self._lookup("state", x)

    def seq(self, alpha):
        """Action sequence as a tuple of indices; accepts ``"a h"`` or an iterable of names/indices."""
        if isinstance(alpha, str):
            alpha = alpha.split()
        return tuple(self.action_index(a) for a in alpha)

    def seq_names(self, alpha):
        return tuple(self.actions[a] for a in alpha)

    def agent_set(self, mask):
        return frozenset(self.agents[i] for i in range(len(self.agents)) if mask >> i & 1)

    # --- policy helpers ----------------------------------------------------------

    def allows(self, s, v, u):
        """True iff v may interfere with u in state s (indices)."""
        return bool(self.out_mask[s][v] >> u & 1)

    @property
    def is_global_policy(self):
        return all(p == self.policies[0] for p in self.policies)

    def with_policies(self, policies):
        return System(self.agents, self.actions, self.states, self.initial,
                      self.dom, self.step, self.obs, tuple(policies))

    def edge_list(self):
        """Non-reflexive edges as (state, v, u) index triples in declaration order."""
        return [(s, v, u) for s, pol in enumerate(self.policies) for v, u in sorted(pol.edges)]

    def without_edge(self, s, v, u):
        pols = list(self.policies)
        pols[s] = LocalPolicy(pols[s].edges - {(v, u)})
        return self.with_policies(pols)


@dataclass(frozen=True)
class Witness:
    """A concrete violation.

    With an ``action`` the compared runs are ``state·action alpha`` (observed
    ``obs_with``) and ``state·alpha`` (``obs_without``).  Without one, the
    runs are ``state·alpha`` and ``state·other``.
    """

    agent: str
    state: str
    action: str | None
    alpha: tuple
    obs_with: str
    obs_without: str
    property: str
    other: tuple | None = None

    def describe(self):
        seq = " ".join(self.alpha) or "ε"
        if self.action is None:
            oth = " ".join(self.other or ()) or "ε"
            return (f"{self.property} violated for agent {self.agent} from {self.state}: "
                    f"obs after [{seq}] is {self.obs_with}, after [{oth}] is {self.obs_without}")
        return (f"{self.property} violated: {self.action} hidden from {self.agent} in {self.state}, "
                f"but obs after [{' '.join((self.action,) + tuple(self.alpha))}] is {self.obs_with} "
                f"and after [{seq}] is {self.obs_without}")

    def to_dict(self):
        d = {
            "property": self.property,
            "agent": self.agent,
            "state": self.state,
            "action": self.action,
            "alpha": " ".join(self.alpha),
            "obs_with": self.obs_with,
            "obs_without": self.obs_without,
        }
        if self.other is not None:
            d["other"] = " ".join(self.other)
        return d


@dataclass(frozen=True)
class UniformityWitness:
    """Two states the agent must not tell apart but whose interfering sets differ."""

    agent: str
    state: str
    other_state: str
    interfering: frozenset
    other_interfering: frozenset
    anchor: tuple | None = None  # (anchor state, agent) of the uniform unwinding member

    def describe(self):
        return (f"agent {self.agent} cannot distinguish {self.state} and {self.other_state} "
                f"but may be interfered by {sorted(self.interfering)} vs {sorted(self.other_interfering)}")

    def to_dict(self):
        d = {
            "agent": self.agent,
            "state": self.state,
            "other_state": self.other_state,
            "interfering": sorted(self.interfering),
            "other_interfering": sorted(self.other_interfering),
        }
        if self.anchor is not None:
            d["anchor"] = list(self.anchor)
        return d


@dataclass
class Verdict:
    holds: bool
    property: str
    witness: Any = None
    stats: dict = field(default_factory=dict)

    def __bool__(self):
        return self.holds


@dataclass(frozen=True)
class StatePartition:
    """An equivalence relation over the states of a system, for one agent.

    ``generators`` is a spanning set of generating pairs, each recorded as
    ``(seed_state, action, alpha)``: the pair relates ``seed·action alpha``
    with ``seed·alpha``.
    """

    agent: str
    classes: tuple
    generators: tuple = ()

    @classmethod
    def from_labels(cls, sys, agent, labels, generators=()):
        groups = {}
        for s, rep in enumerate(labels):
            groups.setdefault(rep, []).append(sys.states[s])
        return cls(agent, tuple(tuple(g) for g in groups.values()), tuple(generators))

    def class_of(self, s):
        for c in self.classes:
            if s in c:
                return c
        raise KeyError(s)

    def same(self, s, t):
        return t in self.class_of(s)

    def as_sets(self):
        return {frozenset(c) for c in self.classes}


# --- raw descriptions and validation ------------------------------------------------


class Decl(NamedTuple):
    """One declaration line of an unchecked system description."""

    kind: str  # agents | action | state | step | obs | edge
    args: tuple
    span: SourceSpan | None = None
    line: str | None = None  # source text, used to locate arguments in diagnostics

    def at(self, i):
        """Span of argument i, falling back to the whole declaration."""
        if self.line is None or self.span is None:
            return self.span
        tokens = list(re.finditer(r"\S+", self.line))
        if i + 1 >= len(tokens):
            return self.span
        m = tokens[i + 1]
        return SourceSpan(self.span.line, m.start() + 1, m.end())


@dataclass
class RawSystem:
    decls: list = field(default_factory=list)

    def add(self, kind, *args, span=None, line=None):
        self.decls.append(Decl(kind, tuple(args), span, line))
        return self


def build(agents, actions, states, initial, steps=(), obs=(), edges=()):
    """Convenience builder for programmatic systems.

    ``actions`` maps action name to agent name; ``steps`` holds
    ``(state, action, target)``, ``obs`` ``(state, agent, label)`` and
    ``edges`` ``(state, v, u)`` triples.
    """
    raw = RawSystem()
    raw.add("agents", *agents)
    for a, d in dict(actions).items():
        raw.add("action", a, d)
    for s in states:
        raw.add("state", s, s == initial)
    for t in steps:
        raw.add("step", *t)
    for o in obs:
        raw.add("obs", *o)
    for e in edges:
        raw.add("edge", *e)
    return validate(raw)


def validate(raw, warnings=None):
    """Check a raw description and produce a normalized System.

    Missing transitions become self-loops, missing observations become
    ``"0"`` and reflexive edges are implicit.  States unreachable from the
    initial state are dropped.  Raises ValidationError listing every problem;
    non-fatal remarks are appended to ``warnings`` when a list is given.
    """
    if warnings is None:
        warnings = []
    errors = []

    def err(msg, span):
        errors.append(Diagnostic(msg, span))

    def warn(msg, span):
        warnings.append(Diagnostic(msg, span))

    agents, actions, states = {}, {}, {}
    for d in raw.decls:
        if d.kind == "agents":
            for name in d.args:
                if name in agents:
                    warn(f"duplicate agent {name}", d.span)
                else:
                    agents[name] = len(agents)
    for d in raw.decls:
        if d.kind == "action":
            name, owner = d.args
            if owner not in agents:
                err(f"unknown agent {owner}", d.at(1))
            if name in actions:
                if actions[name][0] == owner:
                    warn(f"duplicate action {name}", d.span)
                else:
                    err(f"conflicting declaration of action {name}", d.span)
            else:
                actions[name] = (owner, d.span)
        elif d.kind == "state":
            name, init = d.args
            if name in states:
                if states[name] == bool(init):
                    warn(f"duplicate state {name}", d.span)
                else:
                    err(f"conflicting declaration of state {name}", d.span)
            else:
                states[name] = bool(init)
    if not agents:
        err("no agents declared", None)
    if not states:
        err("no states declared", None)
    inits = [s for s, i in states.items() if i]
    if len(inits) > 1:
        spans = [d.span for d in raw.decls if d.kind == "state" and d.args[1]]
        err("multiple initial states", spans[1] if len(spans) > 1 else None)
    elif states and not inits:
        err("no initial state", None)

    def check(kind, name, table, d, i):
        if name not in table:
            err(f"unknown {kind} {name}", d.at(i))
            return False
        return True

    state_idx = {s: i for i, s in enumerate(states)}
    action_idx = {a: i for i, a in enumerate(actions)}
    steps, obs, edges = {}, {}, {}
    for d in raw.decls:
        if d.kind == "step":
            s, a, t = d.args
            ok = check("state", s, states, d, 0) & check("action", a, actions, d, 1)
            ok &= check("state", t, states, d, 2)
            if ok:
                key = (state_idx[s], action_idx[a])
                if key in steps and steps[key] != state_idx[t]:
                    err(f"conflicting step {s} {a}", d.span)
                elif key in steps:
                    warn(f"duplicate step {s} {a} {t}", d.span)
                steps.setdefault(key, state_idx[t])
        elif d.kind == "obs":
            s, u, label = d.args
            ok = check("state", s, states, d, 0) & check("agent", u, agents, d, 1)
            if ok:
                key = (state_idx[s], agents[u])
                if key in obs and obs[key] != label:
                    err(f"conflicting obs {s} {u}", d.span)
                elif key in obs:
                    warn(f"duplicate obs {s} {u} {label}", d.span)
                obs.setdefault(key, label)
        elif d.kind == "edge":
            s, v, u = d.args
            ok = check("state", s, states, d, 0) & check("agent", v, agents, d, 1)
            ok &= check("agent", u, agents, d, 2)
            if ok and v != u:
                key = (state_idx[s], agents[v], agents[u])
                if key in edges:
                    warn(f"duplicate edge {s} {v} {u}", d.span)
                edges[key] = True
        elif d.kind not in ("agents", "action", "state"):
            err(f"unknown declaration {d.kind}", d.span)
    if errors:
        raise ValidationError(errors)

    n_s, n_a = len(states), len(actions)
    step = [[steps.get((s, a), s) for a in range(n_a)] for s in range(n_s)]
    init = state_idx[inits[0]]

    # reachability from the initial state
    seen = {init}
    queue = deque([init])
    while queue:
        s = queue.popleft()
        for t in step[s]:
            if t not in seen:
                seen.add(t)
                queue.append(t)
    names = list(states)
    if len(seen) < n_s:
        dropped = [names[s] for s in range(n_s) if s not in seen]
        msg = "removed unreachable states: " + " ".join(dropped)
        warn(msg, None)
        log.warning(msg)
    keep = [s for s in range(n_s) if s in seen]
    renum = {s: i for i, s in enumerate(keep)}

    by_state = {s: [] for s in keep}
    for s2, v, u in edges:
        if s2 in by_state:
            by_state[s2].append((v, u))
    agent_names = tuple(agents)
    return System(
        agents=agent_names,
        actions=tuple(actions),
        states=tuple(names[s] for s in keep),
        initial=renum[init],
        dom=tuple(agents[actions[a][0]] for a in actions),
        step=tuple(tuple(renum[step[s][a]] for a in range(n_a)) for s in keep),
        obs=tuple(tuple(obs.get((s, u), DEFAULT_OBS) for u in range(len(agents))) for s in keep),
        policies=tuple(LocalPolicy(frozenset(by_state[s])) for s in keep),
    )


# --- elementary evaluation ---------------------------------------------------------


def run_idx(sys, s, alpha):
    step = sys.step
    for a in alpha:
        s = step[s][a]
    return s


def run(sys, s, alpha):
    """The state reached from s by performing alpha, left to right."""
    return sys.states[run_idx(sys, sys.state_index(s), sys.seq(alpha))]


def interfering_set(sys, u, s):
    """Agents that may interfere with u in state s."""
    return sys.agent_set(sys.in_mask[sys.state_index(s)][sys.agent_index(u)])


def iter_sequences(n_actions, max_len):
    """All index sequences of length <= max_len in shortlex order."""
    level = [()]
    yield ()
    for _ in range(max_len):
        level = [alpha + (a,) for alpha in level for a in range(n_actions)]
        yield from level


def count_sequences(n_actions, max_len):
    if n_actions == 1:
        return max_len + 1
    return (n_actions ** (max_len + 1) - 1) // (n_actions - 1)

