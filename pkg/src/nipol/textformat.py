"""The line-oriented ``.nipol`` system format and DOT export.

Grammar, one declaration per line, ``#`` starts a comment::

    agents NAME+
    action NAME AGENT
    state NAME [init]
    step STATE ACTION STATE
    obs STATE AGENT LABEL
    edge STATE AGENT AGENT

Sections may appear in any order.  Omitted steps are self-loops, omitted
observations are ``0`` and reflexive edges are implicit.
"""

from __future__ import annotations

import html

from .errors import Diagnostic, SourceSpan, ValidationError
from .model import DEFAULT_OBS, Decl, RawSystem, validate

MAX_REPORTED = 20

_ARITY = {"action": (2, 2), "state": (1, 2), "step": (3, 3), "obs": (3, 3), "edge": (3, 3)}


def parse_raw(text):
    """Tokenize into a RawSystem; raises ValidationError on syntax errors."""
    raw = RawSystem()
    errors = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].rstrip()
        if not body.strip():
            continue
        tokens = body.split()
        col = len(body) - len(body.lstrip()) + 1
        span = SourceSpan(lineno, col, len(body))
        kw, args = tokens[0], tokens[1:]
        if kw == "agents":
            if not args:
                errors.append(Diagnostic("agents needs at least one name", span))
                continue
            raw.add("agents", *args, span=span)
            continue
        if kw not in _ARITY:
            errors.append(Diagnostic(f"unknown keyword {kw}", span))
            continue
        lo, hi = _ARITY[kw]
        if not lo <= len(args) <= hi:
            errors.append(Diagnostic(f"{kw} expects {lo if lo == hi else f'{lo}-{hi}'} arguments", span))
            continue
        if kw == "state":
            if len(args) == 2 and args[1] != "init":
                errors.append(Diagnostic(f"expected 'init', got {args[1]}",
                                          Decl(kw, args, span, body).at(1)))
                continue
            raw.add("state", args[0], len(args) == 2, span=span, line=body)
        else:
            raw.add(kw, *args, span=span, line=body)
    if errors:
        raise ValidationError(errors[:MAX_REPORTED])
    return raw


def parse(text, warnings=None):
    """Parse and validate a system file.  Errors carry source positions."""
    raw = parse_raw(text)
    try:
        return validate(raw, warnings)
    except ValidationError as e:
        raise ValidationError(e.errors[:MAX_REPORTED]) from None


def load(path, warnings=None):
    with open(path, encoding="utf-8") as f:
        return parse(f.read(), warnings)


def serialize(sys):
    """Canonical text: declaration order, defaults and reflexive edges omitted."""
    lines = ["agents " + " ".join(sys.agents)]
    lines += [f"action {a} {sys.agents[sys.dom[i]]}" for i, a in enumerate(sys.actions)]
    lines += [f"state {s}" + (" init" if i == sys.initial else "") for i, s in enumerate(sys.states)]
    for s, row in enumerate(sys.step):
        for a, t in enumerate(row):
            if t != s:
                lines.append(f"step {sys.states[s]} {sys.actions[a]} {sys.states[t]}")
    for s, row in enumerate(sys.obs):
        for u, label in enumerate(row):
            if label != DEFAULT_OBS:
                lines.append(f"obs {sys.states[s]} {sys.agents[u]} {label}")
    for s, v, u in sys.edge_list():
        lines.append(f"edge {sys.states[s]} {sys.agents[v]} {sys.agents[u]}")
    return "\n".join(lines) + "\n"


def to_dot(sys, annotate=None):
    """Graphviz rendering with the local policy drawn inside each state.

    ``annotate`` maps an overlay name to a collection of ``(state, v, u)``
    name triples; edges listed there are drawn dashed.
    """
    dashed = set()
    for edges in (annotate or {}).values():
        dashed.update(edges)
    out = ["digraph system {", "  rankdir=LR;", '  node [shape=plaintext];']
    for i, s in enumerate(sys.states):
        rows = [f'<TR><TD BORDER="0"><B>{html.escape(s)}</B></TD></TR>']
        for u, label in enumerate(sys.obs[i]):
            if label != DEFAULT_OBS:
                rows.append(f'<TR><TD BORDER="0">obs_{html.escape(sys.agents[u])}: '
                            f'{html.escape(label)}</TD></TR>')
        for v, u in sorted(sys.policies[i].edges):
            name = (s, sys.agents[v], sys.agents[u])
            style = ' STYLE="dashed"' if name in dashed else ""
            rows.append(f'<TR><TD BORDER="1"{style}>{html.escape(sys.agents[v])} &#8594; '
                        f'{html.escape(sys.agents[u])}</TD></TR>')
        peripheries = ' peripheries="2"' if i == sys.initial else ""
        out.append(f'  s{i} [label=<<TABLE STYLE="rounded" CELLSPACING="2">{"".join(rows)}</TABLE>>'
                   f'{peripheries}];')
    for s, row in enumerate(sys.step):
        targets = {}
        for a, t in enumerate(row):
            if t != s:
                targets.setdefault(t, []).append(sys.actions[a])
        for t, labels in targets.items():
            lab = ", ".join(labels)
            out.append(f'  s{s} -> s{t} [label="{lab}"];')
    out.append("}")
    return "\n".join(out) + "\n"
