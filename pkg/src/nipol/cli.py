"""Command-line interface.

Every command prints one JSON report on stdout (``export-dot`` prints DOT);
diagnostics go to stderr.  Exit codes: 0 property holds or command
succeeded, 1 property violated, 2 usage, parse or precondition error,
3 subset guard or oracle budget exceeded.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from . import __version__, crosscheck, intransitive, oracle, reduction, transitive
from .errors import (BudgetExceeded, NonUniformPolicy, NotAReductionInstance, NotGlobalPolicy,
                     SubsetGuardExceeded, ValidationError)
from .textformat import parse, serialize, to_dot

EXIT_OK, EXIT_VIOLATED, EXIT_ERROR, EXIT_GUARD = 0, 1, 2, 3


class Failure(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class Context:
    """Input file, its digest and the warnings collected while loading it."""

    def __init__(self, path):
        self.path = path
        self.warnings = []
        try:
            with open(path, "rb") as f:
                data = f.read()
        except OSError as e:
            raise Failure(EXIT_ERROR, f"{path}: {e.strerror}") from None
        self.digest = hashlib.sha256(data).hexdigest()
        self.text = data.decode("utf-8")

    def system(self):
        diags = []
        try:
            sys_ = parse(self.text, diags)
        except ValidationError as e:
            for d in e.errors:
                print(f"{self.path}:{d}", file=sys.stderr)
            raise Failure(EXIT_ERROR, f"{self.path}: {len(e.errors)} error(s)") from None
        for d in diags:
            print(f"{self.path}:{d} (warning)", file=sys.stderr)
            self.warnings.append(str(d))
        return sys_


def report(command, digest, verdicts=None, witness=None, stats=None, warnings=(), summary="", **extra):
    doc = {
        "version": __version__,
        "command": command,
        "input_sha256": digest,
        "verdicts": verdicts or {},
        "witness": witness,
        "stats": stats or {},
        "warnings": list(warnings),
        "summary": summary,
    }
    doc.update(extra)
    return doc


def _emit(doc):
    sys.stdout.write(json.dumps(doc, indent=2, ensure_ascii=False) + "\n")


def _memory_note(s):
    n = len(s.agents)
    triples = (2**n) * len(s.states) ** 2
    print(f"warning: subset guard lifted; up to {triples} relation entries "
          f"(about {triples * 120 / 2**20:.0f} MiB) may be materialized", file=sys.stderr)


def _is_reduction_instance(s):
    try:
        reduction._require_instance(s)
    except NotAReductionInstance:
        return False
    return True


def _verdict_doc(command, ctx, v, stats=None, extra_warnings=()):
    w = v.witness
    summary = f"{v.property} holds" if v.holds else w.describe()
    doc = report(command, ctx.digest, {v.property: v.holds}, w.to_dict() if w else None,
                 stats if stats is not None else v.stats, ctx.warnings + list(extra_warnings),
                 summary)
    return doc, (EXIT_OK if v.holds else EXIT_VIOLATED)


# --- commands --------------------------------------------------------------------------------


def cmd_check(args):
    ctx = Context(args.file)
    s = ctx.system()
    notes = []
    try:
        if args.mode == "t":
            v = transitive.check_t_security(s)
        elif args.mode == "i":
            if args.force and len(s.agents) > args.guard:
                _memory_note(s)
            try:
                v = intransitive.check_i_security(s, guard=args.guard, force=args.force)
            except SubsetGuardExceeded as e:
                if not _is_reduction_instance(s):
                    raise
                notes.append(f"{e}; decided through the hiding-path equivalence instead")
                print(f"warning: {notes[-1]}", file=sys.stderr)
                v = reduction.check_reduction_instance(s)
        elif args.mode == "i-uniform":
            v = intransitive.check_i_security_uniform(s)
        else:
            v = intransitive.check_ip_security(s)
    except (NonUniformPolicy, NotGlobalPolicy) as e:
        raise Failure(EXIT_ERROR, str(e)) from None
    except SubsetGuardExceeded as e:
        raise Failure(EXIT_GUARD, str(e)) from None
    doc, code = _verdict_doc(f"check --mode {args.mode}", ctx, v, extra_warnings=notes)
    _emit(doc)
    return code


def cmd_oracle(args):
    ctx = Context(args.file)
    s = ctx.system()
    budget = intransitive.budget_from_env()
    cost_fn = oracle.definition_cost if args.mode == "t" else intransitive.bounded_cost
    notes = []
    bound = args.bound
    if bound is None:
        complete = len(s.states) ** 2
        bound = intransitive.largest_feasible_bound(cost_fn, s, budget, cap=complete)
        if bound < 0:
            raise Failure(EXIT_GUARD, f"even bound 0 exceeds the budget of {budget}")
        if bound < complete:
            notes.append(f"bound {complete} (= |S|^2) exceeds the budget; using bound {bound}, "
                         "a secure verdict is then not conclusive")
            print(f"warning: {notes[-1]}", file=sys.stderr)
    try:
        if args.mode == "t":
            v = oracle.t_definition_oracle(s, bound, budget)
        else:
            v = intransitive.i_security_bounded_oracle(s, bound, budget)
    except BudgetExceeded as e:
        raise Failure(EXIT_GUARD, str(e)) from None
    doc, code = _verdict_doc(f"oracle --mode {args.mode}", ctx, v, extra_warnings=notes)
    doc["bound"] = bound
    doc["complete"] = bound >= len(s.states) ** 2
    _emit(doc)
    return code


def _guarded(fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except SubsetGuardExceeded as e:
        raise Failure(EXIT_GUARD, str(e)) from None


def cmd_similarity(args):
    ctx = Context(args.file)
    s = ctx.system()
    if args.agent not in s.agents:
        raise Failure(EXIT_ERROR, f"unknown agent {args.agent}")
    if args.mode == "t":
        part = transitive.t_similarity(s, args.agent)
    else:
        part = _guarded(intransitive.i_similarity, s, args.agent, force=args.force)
    classes = [list(c) for c in part.classes]
    summary = f"{len(classes)} class(es) for agent {args.agent}"
    _emit(report(f"similarity --mode {args.mode}", ctx.digest, {}, None,
                 {"classes": len(classes)}, ctx.warnings, summary, agent=args.agent, classes=classes))
    return EXIT_OK


def _edge_order(s, edges):
    idx = {(s.states[a], s.agents[b], s.agents[c]): (a, b, c) for a, b, c in s.edge_list()}
    return [list(e) for e in sorted(edges, key=idx.__getitem__)]


def _useless(s, mode, force=False):
    if mode == "t":
        return transitive.find_useless_edges_t(s)
    return _guarded(intransitive.find_intransitively_useless_edges, s, force=force)


def cmd_useless(args):
    ctx = Context(args.file)
    s = ctx.system()
    edges = _edge_order(s, _useless(s, args.mode, args.force))
    _emit(report(f"useless --mode {args.mode}", ctx.digest, {}, None, {"edges": len(edges)},
                 ctx.warnings, f"{len(edges)} useless edge(s)", edges=edges))
    return EXIT_OK


def cmd_normalize(args):
    ctx = Context(args.file)
    s = ctx.system()
    if args.mode == "t":
        out = transitive.normalize_t(s)
    else:
        out = _guarded(intransitive.normalize_i, s, force=args.force)
    before, after = set(s.edge_list()), set(out.edge_list())
    removed = _edge_order(s, {(s.states[a], s.agents[b], s.agents[c]) for a, b, c in before - after})
    text = serialize(out)
    extra = {"removed": removed}
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        extra["output"] = args.output
    else:
        extra["system"] = text
    _emit(report(f"normalize --mode {args.mode}", ctx.digest, {}, None, {"removed": len(removed)},
                 ctx.warnings, f"removed {len(removed)} edge(s)", **extra))
    return EXIT_OK


def cmd_uniform(args):
    ctx = Context(args.file)
    s = ctx.system()
    v = transitive.is_uniform_t(s) if args.mode == "t" else intransitive.is_intransitively_uniform(s)
    w = v.witness
    summary = f"{v.property} holds" if v.holds else w.describe()
    _emit(report(f"uniform --mode {args.mode}", ctx.digest, {v.property: v.holds},
                 w.to_dict() if w else None, v.stats, ctx.warnings, summary))
    return EXIT_OK if v.holds else EXIT_VIOLATED


def _crosscheck_chunk(job):
    seeds, start, cfg, bound = job
    return crosscheck.run(seeds, start, cfg, bound)


def cmd_crosscheck(args):
    try:
        n_s, n_a, n_u = (int(x) for x in args.shape.split(","))
        cfg = oracle.GeneratorConfig(n_s, n_a, n_u, args.density, args.obs, 0, args.global_policy)
    except ValueError as e:
        raise Failure(EXIT_ERROR, f"bad shape or generator setting: {e}") from None
    jobs = max(1, args.jobs)
    chunk = -(-args.seeds // jobs)
    parts = [(min(chunk, args.seeds - i), args.start + i, cfg, args.bound)
             for i in range(0, args.seeds, chunk)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(_crosscheck_chunk, parts))
    else:
        results = [_crosscheck_chunk(p) for p in parts]
    total = crosscheck.CrosscheckResult()
    for r in results:
        total.systems += r.systems
        total.insecure_t += r.insecure_t
        total.insecure_i += r.insecure_i
        total.disagreements.extend(r.disagreements)
    params = f"seeds={args.seeds} start={args.start} shape={args.shape} bound={args.bound}"
    digest = hashlib.sha256(f"{params} {replace(cfg, seed=0)}".encode()).hexdigest()
    ok = not total.disagreements
    summary = f"{total.systems} systems, {len(total.disagreements)} disagreement(s)"
    _emit(report("crosscheck", digest, {"agreement": ok}, None, total.to_dict(), [], summary,
                 parameters=params))
    return EXIT_OK if ok else EXIT_VIOLATED


def cmd_gen_3col(args):
    try:
        with open(args.graph, "rb") as f:
            data = f.read()
        g = reduction.parse_graph(data.decode("utf-8"))
        s = reduction.generate_3col_system(g)
    except OSError as e:
        raise Failure(EXIT_ERROR, f"{args.graph}: {e.strerror}") from None
    except ValueError as e:
        raise Failure(EXIT_ERROR, f"{args.graph}: {e}") from None
    text = serialize(s)
    extra = {}
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        extra["output"] = args.output
    else:
        extra["system"] = text
    stats = {"vertices": len(g.vertices), "edges": len(g.edges), "agents": len(s.agents),
             "states": len(s.states), "actions": len(s.actions)}
    _emit(report("gen-3col", hashlib.sha256(data).hexdigest(), {}, None, stats, [],
                 f"reduction instance with {len(s.states)} states", **extra))
    return EXIT_OK


def cmd_hiding_path(args):
    ctx = Context(args.file)
    s = ctx.system()
    try:
        res = reduction.has_hiding_path(s)
    except NotAReductionInstance as e:
        raise Failure(EXIT_ERROR, f"not a reduction instance: {e}") from None
    summary = "hiding path found" if res.found else "no hiding path"
    _emit(report("hiding-path", ctx.digest, {"hiding_path": res.found}, None,
                 {"explored": res.explored}, ctx.warnings, summary,
                 path=" ".join(res.path) if res.found else None, coloring=res.coloring))
    return EXIT_OK


def cmd_export_dot(args):
    ctx = Context(args.file)
    s = ctx.system()
    annotate = {}
    for overlay in args.annotate or []:
        mode = {"useless-t": "t", "useless-i": "i"}[overlay]
        annotate[overlay] = _useless(s, mode, args.force)
    sys.stdout.write(to_dot(s, annotate))
    return EXIT_OK


# --- argument parsing --------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="nipol", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def with_file(sp):
        sp.add_argument("file", help="system description (.nipol)")
        return sp

    def with_force(sp):
        sp.add_argument("--force", action="store_true",
                        help="lift the agent-count guard of the intransitive analyses")
        return sp

    c = with_force(with_file(sub.add_parser("check", help="decide a security property")))
    c.add_argument("--mode", choices=["t", "i", "i-uniform", "ip"], required=True)
    c.add_argument("--guard", type=int, default=intransitive.DEFAULT_GUARD,
                   help="largest agent count for the exact intransitive check")
    c.set_defaults(func=cmd_check)

    o = with_file(sub.add_parser("oracle", help="bounded enumeration from the definition"))
    o.add_argument("--mode", choices=["t", "i"], required=True)
    o.add_argument("--bound", type=int, help="length limit for alpha (default |S|^2 if affordable)")
    o.set_defaults(func=cmd_oracle)

    s = with_force(with_file(sub.add_parser("similarity", help="list similarity classes")))
    s.add_argument("--mode", choices=["t", "i"], required=True)
    s.add_argument("--agent", required=True)
    s.set_defaults(func=cmd_similarity)

    u = with_force(with_file(sub.add_parser("useless", help="list useless policy edges")))
    u.add_argument("--mode", choices=["t", "i"], required=True)
    u.set_defaults(func=cmd_useless)

    n = with_force(with_file(sub.add_parser("normalize", help="remove useless policy edges")))
    n.add_argument("--mode", choices=["t", "i"], required=True)
    n.add_argument("-o", "--output", help="write the normalized system here")
    n.set_defaults(func=cmd_normalize)

    un = with_file(sub.add_parser("uniform", help="decide policy uniformity"))
    un.add_argument("--mode", choices=["t", "i"], required=True)
    un.set_defaults(func=cmd_uniform)

    x = sub.add_parser("crosscheck", help="fuzz all procedures against the oracles")
    x.add_argument("--seeds", type=int, default=1000)
    x.add_argument("--start", type=int, default=0)
    x.add_argument("--shape", default="6,4,3", help="max states,actions,agents")
    x.add_argument("--density", type=float, default=0.4)
    x.add_argument("--obs", type=int, default=2, help="observation alphabet size")
    x.add_argument("--bound", type=int, default=6)
    x.add_argument("--global-policy", action="store_true")
    x.add_argument("--jobs", type=int, default=1)
    x.set_defaults(func=cmd_crosscheck)

    g = sub.add_parser("gen-3col", help="build the reduction instance of a graph")
    g.add_argument("graph", help="graph file with 'vertex' and 'edge' lines")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen_3col)

    h = with_file(sub.add_parser("hiding-path", help="search a hiding path in a reduction instance"))
    h.set_defaults(func=cmd_hiding_path)

    d = with_force(with_file(sub.add_parser("export-dot", help="render as Graphviz DOT")))
    d.add_argument("--annotate", action="append", choices=["useless-t", "useless-i"])
    d.set_defaults(func=cmd_export_dot)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except Failure as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
