"""Hard i-security instances built from graphs, following the 3-colouring reduction.

``generate_3col_system(g)`` builds a system that is i-insecure exactly when
``g`` is 3-colourable.  From the initial state ``s0`` the action ``h`` leads
into a chain of gadgets with restrictive policies (states prefixed ``x.``);
every other action leads into a structurally identical chain whose states
all carry the complete policy (prefix ``p.``).  The last state of the
primed chain, ``last'``, is the only state where L observes ``1``.

Gadgets, per vertex u with colour actions ``u=0..2`` and agents ``u!=0..2``:

* colour choice: ``u=i`` enters a state where h may interfere with
  ``u!=i``; the following ``h`` hands the secret to ``u!=i``.
* per edge (u, v): ``u=i`` enters a state where every ``u!=j`` (j != i) may
  interfere with L; both of them act in turn and reach a checkpoint.  Then
  ``v=j`` either hits a dead end (j == i) or repeats the same test for v.

A run carrying h to ``last`` without L learning about h spells out a proper
colouring.  State counts: ``2 * (1 + 4|V| + 25|E|) + 2``; agents ``4|V| + 2``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import combinations

from .errors import NotAReductionInstance, TooLarge
from .model import Verdict, Witness, build, run_idx

COLORS = (0, 1, 2)
MAX_BRUTE_FORCE = 20


@dataclass(frozen=True)
class Graph:
    vertices: tuple
    edges: tuple  # (u, v) pairs in input order

    def __post_init__(self):
        names = set(self.vertices)
        if len(names) != len(self.vertices):
            raise ValueError("duplicate vertex")
        for v in self.vertices:
            if v in ("h", "L") or "=" in v or "!" in v or not v or any(c.isspace() for c in v):
                raise ValueError(f"invalid vertex name {v!r}")
        for u, v in self.edges:
            if u not in names or v not in names:
                raise ValueError(f"edge {u}-{v} references an undeclared vertex")
            if u == v:
                raise ValueError(f"self-loop on {u}")

    @classmethod
    def complete(cls, n, prefix="v"):
        vs = tuple(f"{prefix}{i}" for i in range(n))
        return cls(vs, tuple(combinations(vs, 2)))


def parse_graph(text):
    """Read ``vertex NAME`` and ``edge NAME NAME`` lines; ``#`` starts a comment."""
    vertices, edges = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split("#", 1)[0].split()
        if not tokens:
            continue
        if tokens[0] == "vertex" and len(tokens) == 2:
            vertices.append(tokens[1])
        elif tokens[0] == "edge" and len(tokens) == 3:
            edges.append((tokens[1], tokens[2]))
        else:
            raise ValueError(f"line {lineno}: expected 'vertex NAME' or 'edge NAME NAME'")
    return Graph(tuple(vertices), tuple(edges))


def brute_force_3coloring(g):
    """A proper 3-colouring as a dict, or None.  Backtracking in vertex order."""
    if len(g.vertices) > MAX_BRUTE_FORCE:
        raise TooLarge(f"{len(g.vertices)} vertices exceed the limit of {MAX_BRUTE_FORCE}")
    order = list(g.vertices)
    pos = {v: i for i, v in enumerate(order)}
    earlier = {v: [] for v in order}
    for u, v in g.edges:
        a, b = (u, v) if pos[u] < pos[v] else (v, u)
        earlier[b].append(a)
    color = {}

    def place(i):
        if i == len(order):
            return True
        v = order[i]
        for c in COLORS:
            if all(color[w] != c for w in earlier[v]):
                color[v] = c
                if place(i + 1):
                    return True
                del color[v]
        return False

    return dict(color) if place(0) else None


# --- construction ---------------------------------------------------------------------------


def _ne(u, i):
    return f"{u}!={i}"


def _eq(u, i):
    return f"{u}={i}"


class _Builder:
    def __init__(self, agents):
        self.agents = agents
        self.states = []
        self.steps = []
        self.edges = []

    def state(self, name, policy=()):
        self.states.append(name)
        self.edges.extend((name, v, u) for v, u in policy)
        return name

    def step(self, s, a, t):
        self.steps.append((s, a, t))


def _branch(b, g, prefix, complete, last_name):
    """Lay out one chain of gadgets; returns its first state."""
    full = [(v, u) for v in b.agents for u in b.agents if v != u]

    def pol(edges):
        return full if complete else edges

    gadgets = [("cs", u) for u in g.vertices] + [("dc", e) for e in range(len(g.edges))]
    names = [f"{prefix}n{k}" for k in range(len(gadgets))] + [last_name]
    for n in names:
        b.state(n, pol(()))
    for k, (kind, arg) in enumerate(gadgets):
        inc, out = names[k], names[k + 1]
        if kind == "cs":
            u = arg
            for i in COLORS:
                box = b.state(f"{prefix}cs.{u}.{i}", pol([("h", _ne(u, i))]))
                b.step(inc, _eq(u, i), box)
                b.step(box, "h", out)
            continue
        u, v = g.edges[arg]
        tag = f"{prefix}dc{arg}"
        for i in COLORS:
            j1, j2 = (j for j in COLORS if j != i)
            test_u = [(_ne(u, j1), "L"), (_ne(u, j2), "L")]
            box = b.state(f"{tag}.u{i}", pol(test_u))
            mid = b.state(f"{tag}.u{i}.mid", pol(test_u))
            ok = b.state(f"{tag}.u{i}.ok", pol(()))
            b.step(inc, _eq(u, i), box)
            b.step(box, _ne(u, j1), mid)
            b.step(mid, _ne(u, j2), ok)
            for j in COLORS:
                if j == i:
                    dead = b.state(f"{tag}.u{i}.v{j}", pol(()))
                    b.step(ok, _eq(v, j), dead)
                    continue
                k1, k2 = (k for k in COLORS if k != j)
                test_v = [(_ne(v, k1), "L"), (_ne(v, k2), "L")]
                vbox = b.state(f"{tag}.u{i}.v{j}", pol(test_v))
                vmid = b.state(f"{tag}.u{i}.v{j}.mid", pol(test_v))
                b.step(ok, _eq(v, j), vbox)
                b.step(vbox, _ne(v, k1), vmid)
                b.step(vmid, _ne(v, k2), out)
    return names[0]


def reduction_agents(g):
    agents = []
    for u in g.vertices:
        agents.append(u)
        agents.extend(_ne(u, i) for i in COLORS)
    return agents + ["h", "L"]


def expected_state_count(g):
    return 2 * (1 + 4 * len(g.vertices) + 25 * len(g.edges)) + 2


def generate_3col_system(g):
    """Build the reduction instance for graph g (at least one vertex)."""
    if not g.vertices:
        raise ValueError("graph needs at least one vertex")
    agents = reduction_agents(g)
    actions = {}
    for u in g.vertices:
        for i in COLORS:
            actions[_eq(u, i)] = u
        for i in COLORS:
            actions[_ne(u, i)] = _ne(u, i)
    actions["h"] = "h"
    actions["L"] = "L"
    b = _Builder(agents)
    b.state("s0", [(v, "L") for v in agents if v not in ("h", "L")])
    b.state("dummy")
    x0 = _branch(b, g, "x.", complete=False, last_name="last")
    p0 = _branch(b, g, "p.", complete=True, last_name="last'")
    b.step("s0", "h", "dummy")
    for a in actions:
        if a != "h":
            b.step("s0", a, p0)
            b.step("dummy", a, x0)
    return build(agents, actions, b.states, "s0", b.steps, [("last'", "L", "1")], b.edges)


# --- hiding paths -----------------------------------------------------------------------------


@dataclass(frozen=True)
class HidingPath:
    found: bool
    path: tuple | None = None  # action names, starting with h
    coloring: dict | None = None
    explored: int = 0


def _require_instance(sys):
    for name in ("s0", "dummy", "last", "last'"):
        if name not in sys.states:
            raise NotAReductionInstance(f"missing state {name}")
    for name in ("h", "L"):
        if name not in sys.agents or name not in sys.actions:
            raise NotAReductionInstance(f"missing agent or action {name}")
    if sys.states[sys.initial] != "s0" or sys.step[sys.state_index("s0")][sys.action_index("h")] != \
            sys.state_index("dummy"):
        raise NotAReductionInstance("s0 must be initial and lead to dummy on h")


def has_hiding_path(sys):
    """Search a run h alpha from s0 to ``last`` along which L never learns about h.

    Breadth-first over (state, set of agents knowing about h), starting after
    h in s0; a branch dies as soon as L would learn.  The path found is
    decoded into the colouring it spells out.
    """
    _require_instance(sys)
    h, L = sys.agent_index("h"), sys.agent_index("L")
    s0, start, goal = sys.state_index("s0"), sys.state_index("dummy"), sys.state_index("last")
    k0 = sys.out_mask[s0][h]
    if k0 >> L & 1:
        return HidingPath(False)
    step, dom, out_mask = sys.step, sys.dom, sys.out_mask
    parent = {(start, k0): None}
    queue = deque([(start, k0)])
    while queue:
        node = queue.popleft()
        x, known = node
        if x == goal:
            path = []
            while parent[node] is not None:
                node, b = parent[node]
                path.append(b)
            alpha = tuple(reversed(path))
            names = ("h",) + sys.seq_names(alpha)
            return HidingPath(True, names, _decode(names), len(parent))
        for b in range(len(sys.actions)):
            y = step[x][b]
            if y == x:
                continue
            k2 = known | out_mask[x][dom[b]] if known >> dom[b] & 1 else known
            if k2 >> L & 1 or (y, k2) in parent:
                continue
            parent[(y, k2)] = (node, b)
            queue.append((y, k2))
    return HidingPath(False, explored=len(parent))


def _decode(path):
    coloring = {}
    for a in path:
        if "=" in a and "!=" not in a:
            u, c = a.rsplit("=", 1)
            coloring.setdefault(u, int(c))
    return coloring


def check_reduction_instance(sys):
    """i-security of a reduction instance through the hiding-path equivalence.

    A hiding path h alpha yields the violation (L, s0, h, alpha): s0·h alpha
    is ``last`` (L sees 0) and s0·alpha is ``last'`` (L sees 1).  Without a
    hiding path the instance is secure.
    """
    res = has_hiding_path(sys)
    stats = {"method": "hiding-path", "explored": res.explored}
    if not res.found:
        return Verdict(True, "i-security", None, stats)
    L = sys.agent_index("L")
    s0 = sys.state_index("s0")
    alpha = sys.seq(res.path[1:])
    with_ = run_idx(sys, s0, sys.seq(res.path))
    without = run_idx(sys, s0, alpha)
    if sys.obs[with_][L] == sys.obs[without][L]:
        raise NotAReductionInstance("hiding path does not separate last from last'")
    w = Witness("L", "s0", "h", res.path[1:], sys.obs[with_][L], sys.obs[without][L], "i-security")
    return Verdict(False, "i-security", w, stats)

