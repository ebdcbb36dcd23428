"""Run one protocol on one scenario, check its properties and collect metrics."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, replace

from ..engine import Simulator, payload_cap
from ..protocols import (Backbone, Context, Stars, adjacent_backbone_pairs, backbone_creation,
                         bb_message_exchange, bb_message_transmit, check_epoch_alignment,
                         check_status_monotone, exchange_audit, multi_broadcast, token_passing_transfer,
                         tree_cutter, tree_cutter_phases, tree_grower, wakeup)
from ..protocols.multibroadcast import broadcast_budget
from ..protocols.wakeup import EpochTiming
from ..sinr import REL_TOL, transmission_range
from ..ssf import DilutionConfig, log2_ceil, protocol_family
from ..verify import (ORACLE_MAX_NODES, PropertyReport, audit_rounds, audit_trace, audit_trace_text,
                      check_backbone, check_forest, check_stars, round_budget)
from .metrics import MetricsRow
from .scenario import Scenario, ScenarioError

PROTOCOLS = ("wakeup", "multi-broadcast", "backbone", "tree-grower", "tree-cutter", "tpt",
             "bb-exchange", "bb-transmit")
TPT_MODES = ("exchange", "wakeup")
MAX_TOKEN_DISTANCE_FACTOR = 2
MAX_TOKENS_PER_BOX = 21
MAX_DISLOYAL = 945
MAX_STAR_LINKS = 120
MAX_EXCHANGE_PARTICIPANTS = 121


@dataclass(frozen=True)
class RunConfig:
    protocol: str
    seed: int = 0
    max_rounds: int | None = None
    k_density: int | None = None
    d_silence: int | None = None
    ssf: str | None = None
    tpt_mode: str = "exchange"
    messages: int | None = None  # multi-broadcast: number of initial messages, default n
    oracle: bool = True

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}; expected one of {', '.join(PROTOCOLS)}")
        if self.tpt_mode not in TPT_MODES:
            raise ValueError(f"unknown tpt mode {self.tpt_mode!r}")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunResult:
    scenario: Scenario
    config: RunConfig
    config_hash: str
    trace: object
    reports: list
    metrics: MetricsRow
    state: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.reports)

    def failures(self) -> list[PropertyReport]:
        return [r for r in self.reports if not r]

    def trace_text(self) -> str:
        return f"# config_hash={self.config_hash}\n" + self.trace.export()

    def state_json(self) -> str:
        body = {"config_hash": self.config_hash, "config": self.config.as_dict(), "state": self.state,
                "reports": [r.as_dict() for r in self.reports]}
        return json.dumps(body, sort_keys=True, indent=1, default=_jsonable) + "\n"


def _jsonable(obj):
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    if isinstance(obj, tuple):
        return list(obj)
    return repr(obj)


def effective_scenario(scenario: Scenario, config: RunConfig) -> Scenario:
    dil = DilutionConfig(config.k_density or scenario.dilution.k_density,
                         config.d_silence or scenario.dilution.d_silence)
    return replace(scenario, dilution=dil, ssf_strategy=config.ssf or scenario.ssf_strategy)


def _bb_to_dict(bb: Backbone) -> dict:
    return {"stars": bb.stars.as_dict(), "members": sorted(bb.members),
            "views": {str(u): sorted(v) for u, v in sorted(bb.views.items())},
            "connectors": {str(u): list(c) for u, c in sorted(bb.connectors.items())},
            "rounds": bb.rounds}


def _bb_from_dict(d: dict) -> Backbone:
    return Backbone(Stars.from_dict(d["stars"]), frozenset(d["members"]),
                    {int(u): frozenset(v) for u, v in d["views"].items()},
                    {int(u): list(c) for u, c in d["connectors"].items()}, {}, d.get("rounds", 0))


def _report(pid: str, ok: bool, witness=None, **measured) -> PropertyReport:
    return PropertyReport(pid, bool(ok), None if ok else witness, measured)


def run_protocol(scenario: Scenario, config: RunConfig) -> RunResult:
    """Execute `config.protocol` on `scenario`; raises ScenarioError on invalid input."""
    sc = effective_scenario(scenario, config)
    sc.validate(require_connected=True)
    chash = sc.config_hash(**config.as_dict())
    family = protocol_family(sc.n_labels, sc.dilution, sc.ssf_strategy, seed=config.seed)
    sim = Simulator(sc.stations, sc.params, sc.n_labels)
    sim.max_rounds = config.max_rounds
    ctx = Context(sim, family)
    n, N, z = sc.n, sc.n_labels, family.length
    t0 = time.perf_counter()
    out = _DISPATCH[config.protocol](ctx, sc, config)
    wall = time.perf_counter() - t0
    reports = list(out["reports"])
    reports.append(audit_trace(sim.trace, sim.cap, out.get("wake_round")))
    row = MetricsRow(sc.id, config.protocol, n, N, out["rounds_used"], out["round_budget"],
                     sim.trace.messages_sent, sim.trace.max_payload_bits, sum(1 for r in reports if r),
                     wall, chash)
    state = dict(out.get("state", {}))
    state.update(schedule_length=z, selectivity=family.selectivity, strategy=family.strategy,
                 total_rounds=sim.trace.total_rounds)
    return RunResult(sc, config, chash, sim.trace, reports, row, state)


# ------------------------------------------------------------------ protocols
def _run_tree_grower(ctx, sc, cfg):
    forest = tree_grower(ctx, ctx.sim.labels, sc.n)
    rounds = ctx.sim.trace.total_rounds
    reports = [check_forest(forest, ctx.sim.graph, sc.stations, sc.params),
               audit_rounds(rounds, "tree-grower", sc.n, sc.n_labels, ctx.z, exact=True)]
    return {"reports": reports, "rounds_used": rounds,
            "round_budget": round_budget("tree-grower", sc.n, sc.n_labels, ctx.z),
            "state": {"forest": forest.as_dict()}}


def _stars(ctx, sc, participants=None):
    nodes = ctx.sim.labels if participants is None else participants
    forest = tree_grower(ctx, nodes, sc.n)
    tg_rounds = ctx.sim.trace.total_rounds
    stars, stats = tree_cutter(ctx, forest, sc.n)
    return forest, stars, stats, ctx.sim.trace.total_rounds - tg_rounds


def _cutter_reports(ctx, sc, stars, stats):
    r = transmission_range(sc.params)
    expected = tree_cutter_phases(sc.n)
    return [
        check_stars(stars, ctx.sim.graph, sc.stations, sc.params),
        _report("tree-cutter:phases", stats.phases == expected, ("phases", stats.phases, expected),
                phases=stats.phases, expected=expected, simulated=stats.simulated_phases),
        _report("tree-cutter:token-distance", stats.max_token_distance <= MAX_TOKEN_DISTANCE_FACTOR * r * (1 + REL_TOL),
                ("distance", stats.max_token_distance), max_token_distance=stats.max_token_distance),
        _report("tree-cutter:tokens-per-box", stats.max_tokens_per_box <= MAX_TOKENS_PER_BOX,
                ("tokens", stats.max_tokens_per_box), max_tokens_per_box=stats.max_tokens_per_box),
        _report("tree-cutter:disloyal", stats.max_disloyal <= MAX_DISLOYAL, ("disloyal", stats.max_disloyal),
                max_disloyal=stats.max_disloyal),
    ]


def _run_tree_cutter(ctx, sc, cfg):
    _, stars, stats, rounds = _stars(ctx, sc)
    reports = _cutter_reports(ctx, sc, stars, stats)
    return {"reports": reports, "rounds_used": rounds,
            "round_budget": round_budget("tree-cutter", sc.n, sc.n_labels, ctx.z),
            "state": {"stars": stars.as_dict()}}


def _run_tpt(ctx, sc, cfg):
    sim = ctx.sim
    if cfg.tpt_mode == "wakeup":
        awake = set(sc.awake)
        sim.asleep = set(sim.labels) - awake
        _, stars, _, _ = _stars(ctx, sc, sorted(awake))
        res = token_passing_transfer(ctx, stars, "wakeup", sc.n, participants=sorted(awake))
        sim.asleep = set()
        targets = sorted(v for u in awake for v in sim.graph.graph.neighbors(u) if v not in awake)
        missed = [v for v in targets if v not in res.woken]
        reports = [_report("tpt:wakeup", not missed, ("not woken", missed[:1]),
                           targets=len(set(targets)), woken=len(res.woken))]
        wake_round = {u: 0 for u in awake}
        wake_round.update(res.woken)
        return {"reports": reports, "rounds_used": res.rounds,
                "round_budget": round_budget("tpt", sc.n, sc.n_labels, ctx.z),
                "state": {"stars": stars.as_dict(), "woken": {str(u): r for u, r in sorted(res.woken.items())}},
                "wake_round": wake_round}
    _, stars, _, _ = _stars(ctx, sc)
    res = token_passing_transfer(ctx, stars, "exchange", sc.n, messages={u: u for u in sim.labels})
    audit = exchange_audit(res)
    universe = set(sim.labels)
    short = [u for u, held in res.held.items() if set(held) != universe]
    reports = [
        _report("tpt:exchange-audit", not audit, audit[:1], participants=len(res.held)),
        _report("tpt:exchange-complete", not short, ("incomplete", short[:1]),
                complete_after=res.complete_after),
        _report("tpt:participants", len(res.held) <= MAX_EXCHANGE_PARTICIPANTS, len(res.held)),
    ]
    return {"reports": reports, "rounds_used": res.rounds,
            "round_budget": round_budget("tpt", sc.n, sc.n_labels, ctx.z),
            "state": {"stars": stars.as_dict(), "held": {str(u): sorted(h) for u, h in sorted(res.held.items())}}}


def _run_wakeup(ctx, sc, cfg):
    res = wakeup(ctx, sc.n, sc.awake)
    timing: EpochTiming = res.timing
    rpp = timing.rounds_per_phase
    mono = check_status_monotone(res)
    align = check_epoch_alignment(res)
    last = res.last_wake_phase
    reports = [
        _report("wakeup:all-awake", res.all_awake and last < timing.phase_budget,
                ("asleep", sorted(u for u, r in res.wake_round.items() if r is None)),
                last_wake_phase=last, phase_budget=timing.phase_budget),
        _report("wakeup:status-monotone", not mono, mono[:1]),
        _report("wakeup:epoch-alignment", not align, align[:1]),
    ]
    last_round = max((r for r in res.wake_round.values() if r is not None), default=0)
    return {"reports": reports, "rounds_used": last_round,
            "round_budget": timing.phase_budget * rpp,
            "state": {"wake_round": {str(u): r for u, r in sorted(res.wake_round.items())},
                      "epochs_run": res.epochs_run, "final_status":
                          {f"{u}:{s}": st for (u, s), st in sorted(res.final_status().items())}},
            "wake_round": {u: r for u, r in res.wake_round.items() if r is not None}}


def _run_multi_broadcast(ctx, sc, cfg):
    labels = ctx.sim.labels
    k = len(labels) if cfg.messages is None else max(0, min(cfg.messages, len(labels)))
    origins = sorted(labels)[:k]
    messages = {u: f"m{u}" for u in origins}
    res = multi_broadcast(ctx, sc.n, messages)
    short = [u for u in labels if set(res.held.get(u, ())) != set(origins)]
    unit = -(-ctx.z // log2_ceil(sc.n_labels)) * log2_ceil(sc.n_labels)
    budget = broadcast_budget(sc.n, unit)
    done = res.flood_complete_after
    reports = [
        _report("multi-broadcast:delivered", not short, ("missing", short[:1]), messages=k),
        _report("multi-broadcast:rounds", res.flood_rounds <= budget and done is not None and done <= budget,
                ("flood", res.flood_rounds, done, budget), flood_rounds=res.flood_rounds,
                complete_after=done, total_rounds=res.total_rounds),
        _report("multi-broadcast:star-links", res.max_star_links <= MAX_STAR_LINKS, res.max_star_links,
                max_star_links=res.max_star_links),
    ]
    return {"reports": reports, "rounds_used": res.flood_rounds, "round_budget": budget,
            "state": {"stars": res.stars.as_dict(),
                      "held": {str(u): sorted(h) for u, h in sorted(res.held.items())},
                      "star_links": {str(u): list(c) for u, c in sorted(res.star_links.items())}}}


def _run_backbone(ctx, sc, cfg):
    bb = backbone_creation(ctx, sc.n)
    oracle = cfg.oracle and len(sc.stations) <= ORACLE_MAX_NODES
    reports = [check_backbone(bb, ctx.sim.graph, oracle=oracle)]
    return {"reports": reports, "rounds_used": bb.rounds,
            "round_budget": round_budget("backbone", sc.n, sc.n_labels, ctx.z),
            "state": {"backbone": _bb_to_dict(bb)}}


def _run_bb_exchange(ctx, sc, cfg):
    bb = backbone_creation(ctx, sc.n)
    res = bb_message_exchange(ctx, bb, {u: f"m{u}" for u in bb.members})
    pairs = adjacent_backbone_pairs(bb)
    missing = [(u, v) for u, v in pairs if v not in res.inbox[u] or u not in res.inbox[v]]
    degree = bb.internal_degree()
    budget = round_budget("bb-exchange", sc.n, sc.n_labels, ctx.z, internal_degree=degree)
    reports = [
        _report("bb-exchange:pairs", not missing, missing[:1], pairs=len(pairs)),
        _report("bb-exchange:cycle", res.cycle_rounds <= budget, ("cycle", res.cycle_rounds, budget),
                cycle_rounds=res.cycle_rounds, internal_degree=degree),
    ]
    return {"reports": reports, "rounds_used": res.cycle_rounds, "round_budget": budget,
            "state": {"backbone": _bb_to_dict(bb),
                      "inbox": {str(u): sorted(h) for u, h in sorted(res.inbox.items())}}}


def _run_bb_transmit(ctx, sc, cfg):
    bb = backbone_creation(ctx, sc.n)
    stars = bb.stars
    res = bb_message_transmit(ctx, stars, {u: f"m{u}" for u in ctx.sim.labels})
    missing = [(leader, f) for leader in stars.leaders for f in stars.members(leader)
               if f not in res.leader_inbox[leader]]
    delta = ctx.sim.graph.max_degree
    budget = round_budget("bb-transmit", sc.n, sc.n_labels, ctx.z, delta=delta)
    reports = [
        _report("bb-transmit:delivered", not missing, missing[:1]),
        _report("bb-transmit:cycle", res.cycle_rounds <= budget, ("cycle", res.cycle_rounds, budget),
                cycle_rounds=res.cycle_rounds, handoffs=res.handoffs, delta=delta),
    ]
    return {"reports": reports, "rounds_used": res.cycle_rounds, "round_budget": budget,
            "state": {"backbone": _bb_to_dict(bb),
                      "leader_inbox": {str(u): sorted(h) for u, h in sorted(res.leader_inbox.items())}}}


_DISPATCH = {
    "tree-grower": _run_tree_grower,
    "tree-cutter": _run_tree_cutter,
    "tpt": _run_tpt,
    "wakeup": _run_wakeup,
    "multi-broadcast": _run_multi_broadcast,
    "backbone": _run_backbone,
    "bb-exchange": _run_bb_exchange,
    "bb-transmit": _run_bb_transmit,
}


def verify_artifacts(scenario: Scenario, trace_text: str, state_doc: dict) -> list[PropertyReport]:
    """Re-check saved run artifacts without re-running the protocol."""
    scenario.validate(require_connected=True)
    graph = scenario.graph()
    cap = payload_cap(graph.max_degree, scenario.n_labels)
    reports = []
    expected = state_doc.get("config_hash")
    header = trace_text.splitlines()[0] if trace_text else ""
    if expected is not None:
        reports.append(_report("provenance", header == f"# config_hash={expected}",
                               ("trace header", header, expected)))
    state = state_doc.get("state", {})
    wake = state.get("wake_round")
    wake_round = None if wake is None else {int(u): r for u, r in wake.items() if r is not None}
    reports.append(audit_trace_text(trace_text, cap, wake_round))
    if "forest" in state:
        reports.append(check_forest(Stars.from_dict(state["forest"]), graph, scenario.stations, scenario.params))
    if "stars" in state and "backbone" not in state:
        reports.append(check_stars(Stars.from_dict(state["stars"]), graph, scenario.stations, scenario.params))
    if "backbone" in state:
        bb = _bb_from_dict(state["backbone"])
        reports.append(check_stars(bb.stars, graph, scenario.stations, scenario.params))
        reports.append(check_backbone(bb, graph, oracle=len(scenario.stations) <= ORACLE_MAX_NODES))
    if wake is not None:
        asleep = sorted(u for u, r in wake.items() if r is None)
        reports.append(_report("wakeup:all-awake", not asleep, ("asleep", asleep[:1])))
    if "held" in state:
        everything = set().union(*(set(h) for h in state["held"].values())) if state["held"] else set()
        short = [u for u, h in state["held"].items() if set(h) != everything]
        reports.append(_report("held:complete", not short, ("incomplete", short[:1])))
    return reports

