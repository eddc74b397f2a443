"""Fuzz harness comparing every decision procedure against its oracles."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from . import intransitive, oracle, transitive


@dataclass
class CrosscheckResult:
    systems: int = 0
    insecure_t: int = 0
    insecure_i: int = 0
    disagreements: list = field(default_factory=list)

    def to_dict(self):
        return {
            "systems": self.systems,
            "insecure_t": self.insecure_t,
            "insecure_i": self.insecure_i,
            "disagreements": self.disagreements,
        }


def compare_t(sys, bound):
    """Verdicts of the four t-security procedures; returns (verdicts, problems)."""
    v = {
        "unwinding": transitive.check_t_security(sys),
        "pair": transitive.t_security_pair_oracle(sys),
        "definition": oracle.t_definition_oracle(sys, bound),
        "purge": oracle.purge_equality_oracle(sys, bound),
    }
    problems = []
    if len({x.holds for x in v.values()}) > 1:
        problems.append("t verdicts differ: " + ", ".join(f"{k}={x.holds}" for k, x in v.items()))
    for name in ("pair", "definition"):
        if not v[name].holds and v[name].witness != v["unwinding"].witness:
            problems.append(f"t witness of {name} differs from unwinding")
    return v, problems


def compare_i(sys, bound):
    """Verdicts of the three i-security procedures; returns (verdicts, problems)."""
    v = {
        "unwinding": intransitive.check_i_security(sys),
        "definition": intransitive.i_security_bounded_oracle(sys, bound),
        "ipurge": oracle.ipurge_equality_oracle(sys, bound),
    }
    problems = []
    if len({x.holds for x in v.values()}) > 1:
        problems.append("i verdicts differ: " + ", ".join(f"{k}={x.holds}" for k, x in v.items()))
    if not v["definition"].holds and v["definition"].witness != v["unwinding"].witness:
        problems.append("i witness of definition oracle differs from unwinding")
    return v, problems


def run(seeds, start=0, cfg=None, bound=6):
    """Cross-check ``seeds`` random systems generated from ``cfg`` with seeds start, start+1, ..."""
    cfg = cfg or oracle.GeneratorConfig()
    res = CrosscheckResult()
    for seed in range(start, start + seeds):
        sys = oracle.generate_random_system(replace(cfg, seed=seed))
        vt, pt = compare_t(sys, bound)
        vi, pi = compare_i(sys, bound)
        res.systems += 1
        res.insecure_t += not vt["unwinding"].holds
        res.insecure_i += not vi["unwinding"].holds
        for p in pt + pi:
            res.disagreements.append({"seed": seed, "problem": p})
    return res


UNIFORMITY_SEARCH_CFG = oracle.GeneratorConfig(max_states=4, max_actions=3, max_agents=3)


def find_uniformity_counterexamples(seeds=3000, cfg=UNIFORMITY_SEARCH_CFG):
    """First seeds refuting both directions of "uniform iff no useless edges" (intransitive).

    Returns ``{"uniform_with_useless": (seed, system) | None,
    "nonuniform_without_useless": (seed, system) | None}``; systems without
    any policy edge are skipped since they cannot show anything.
    """
    found = {"uniform_with_useless": None, "nonuniform_without_useless": None}
    for seed in range(seeds):
        sys = oracle.generate_random_system(replace(cfg, seed=seed))
        if not sys.edge_list():
            continue
        uniform = intransitive.is_intransitively_uniform(sys).holds
        useless = intransitive.find_intransitively_useless_edges(sys)
        key = None
        if uniform and useless:
            key = "uniform_with_useless"
        elif not uniform and not useless:
            key = "nonuniform_without_useless"
        if key and found[key] is None:
            found[key] = (seed, sys)
        if all(found.values()):
            break
    return found
