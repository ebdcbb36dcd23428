"""Property checkers over final protocol states and traces, plus a brute-force CDS oracle."""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Iterable, Mapping

from .engine import RepeatRecord, RoundRecord, SimTrace
from .sinr import CommGraph, SinrParams, Station, box_of, pivotal_cell
from .ssf import log2_ceil

ORACLE_MAX_NODES = 12
DEFAULT_DEGREE_BOUND = 20
DEFAULT_RATIO_BOUND = 25
DEFAULT_DIAM_FACTOR = 3


class OracleTooLarge(ValueError):
    pass


TooLarge = OracleTooLarge


@dataclass
class PropertyReport:
    property_id: str
    passed: bool
    witness: Any = None
    measured: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.passed

    def as_dict(self) -> dict:
        return {"property": self.property_id, "passed": self.passed,
                "witness": None if self.witness is None else repr(self.witness),
                "measured": self.measured}


def _fail(pid, witness, **measured):
    return PropertyReport(pid, False, witness, measured)


def _adjacency(graph) -> dict[int, set]:
    """Accepts a CommGraph, a networkx graph or a plain adjacency mapping."""
    g = graph.graph if isinstance(graph, CommGraph) else graph
    if hasattr(g, "adj"):
        return {u: set(g.adj[u]) for u in g.nodes}
    return {u: set(vs) for u, vs in g.items()}


def _hops(adj: Mapping[int, set], source: int, allowed: set | None = None) -> dict[int, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in dist and (allowed is None or v in allowed):
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def _diameter(adj: Mapping[int, set], nodes: Iterable[int]) -> int | None:
    """Hop diameter of the subgraph induced by `nodes`; None if it is disconnected."""
    nodes = set(nodes)
    best = 0
    for u in nodes:
        dist = _hops(adj, u, nodes)
        if len(dist) != len(nodes):
            return None
        best = max(best, max(dist.values()))
    return best


def _leader_boxes(kind: Mapping[int, str], stations: Iterable[Station], cell: float):
    boxes = Counter()
    where = {}
    for s in stations:
        if kind.get(s.label) == "leader":
            b = box_of(s, cell)
            boxes[b] += 1
            where.setdefault(b, []).append(s.label)
    return boxes, where


def _state(state):
    """Normalise Stars-like objects and plain dicts to (kind, my_leader, children)."""
    if hasattr(state, "kind"):
        return dict(state.kind), dict(state.my_leader), {u: set(c) for u, c in state.children.items()}
    kind = {int(u): row["kind"] for u, row in state.items()}
    leader = {int(u): int(row["my_leader"]) for u, row in state.items()}
    children = {int(u): {int(v) for v in row["children"]} for u, row in state.items()}
    return kind, leader, children


def check_forest(state, graph, stations: Iterable[Station], params: SinrParams) -> PropertyReport:
    """Every node is a root or the child of exactly one mutually-acknowledged parent."""
    pid = "forest"
    kind, parent, children = _state(state)
    adj = _adjacency(graph)
    stations = list(stations)
    claimed = Counter(c for cs in children.values() for c in cs)
    for u in sorted(kind):
        if kind[u] == "leader":
            if parent[u] != u:
                return _fail(pid, ("root with parent", u))
            if claimed[u]:
                return _fail(pid, ("root claimed as child", u))
            continue
        p = parent[u]
        if p == u or p not in kind:
            return _fail(pid, ("child without parent", u))
        if u not in children.get(p, ()):
            return _fail(pid, ("parent does not know child", u, p))
        if claimed[u] != 1:
            return _fail(pid, ("child of several parents", u))
        if p not in adj.get(u, ()):
            return _fail(pid, ("parent out of range", u, p))
    for p, cs in children.items():
        for c in cs:
            if parent.get(c) != p:
                return _fail(pid, ("child does not know parent", p, c))
    # Walking up parents must end at a root without revisiting a node.
    for u in kind:
        seen, x = set(), u
        while kind[x] != "leader":
            if x in seen:
                return _fail(pid, ("cycle", u))
            seen.add(x)
            x = parent[x]
    boxes, where = _leader_boxes(kind, stations, pivotal_cell(params))
    crowded = [b for b, k in boxes.items() if k > 1]
    if crowded:
        return _fail(pid, ("box with several leaders", crowded[0], where[crowded[0]]))
    return PropertyReport(pid, True, None, {"leaders": sum(boxes.values()), "nodes": len(kind)})


def check_stars(state, graph, stations: Iterable[Station], params: SinrParams) -> PropertyReport:
    """Stars of height at most one, one leader per box, a second leader within three hops."""
    pid = "stars"
    kind, leader, children = _state(state)
    adj = _adjacency(graph)
    stations = list(stations)
    leaders = sorted(u for u, k in kind.items() if k == "leader")
    for u in sorted(kind):
        k = kind[u]
        if k == "leader":
            if leader[u] != u:
                return _fail(pid, ("leader pointing elsewhere", u))
            followers = {v for v in kind if kind[v] == "follower" and leader[v] == u}
            if set(children.get(u, ())) != followers:
                return _fail(pid, ("leader children mismatch", u, sorted(children.get(u, ())), sorted(followers)))
        elif k == "follower":
            m = leader[u]
            if m == u or kind.get(m) != "leader":
                return _fail(pid, ("follower without leader", u))
            if m not in adj.get(u, ()):
                return _fail(pid, ("follower out of range of leader", u, m))
            if children.get(u):
                return _fail(pid, ("follower with children", u))
        else:
            return _fail(pid, ("unaligned node", u, k))
    boxes, where = _leader_boxes(kind, stations, pivotal_cell(params))
    crowded = [b for b, n in boxes.items() if n > 1]
    if crowded:
        return _fail(pid, ("box with several leaders", crowded[0], where[crowded[0]]))
    nearest = {}
    if len(leaders) >= 2:
        lset = set(leaders)
        for u in leaders:
            dist = _hops(adj, u)
            others = [d for v, d in dist.items() if v in lset and v != u]
            nearest[u] = min(others, default=None)
            if nearest[u] is None or nearest[u] > 3:
                return _fail(pid, ("no leader within 3 hops", u, nearest[u]))
    return PropertyReport(pid, True, None, {
        "leaders": len(leaders), "max_star": max((len(children.get(u, ())) for u in leaders), default=0),
        "max_leader_gap": max(nearest.values(), default=0)})


def _is_cds(adj: Mapping[int, set], subset: set) -> bool:
    for u in adj:
        if u not in subset and not (adj[u] & subset):
            return False
    start = next(iter(subset))
    return len(_hops(adj, start, subset)) == len(subset)


def min_cds_oracle(graph, max_nodes: int = ORACLE_MAX_NODES) -> int:
    """Exact size of a minimum connected dominating set by increasing-size subset search."""
    adj = _adjacency(graph)
    n = len(adj)
    if n > max_nodes:
        raise OracleTooLarge(f"exhaustive CDS search limited to {max_nodes} nodes, got {n}")
    if n == 0:
        return 0
    if len(_hops(adj, next(iter(adj)))) != n:
        raise ValueError("graph is disconnected; no connected dominating set exists")
    labels = sorted(adj)
    for size in range(1, n + 1):
        for combo in combinations(labels, size):
            if _is_cds(adj, set(combo)):
                return size
    return n


def check_backbone(bb, graph, degree_bound: int = DEFAULT_DEGREE_BOUND,
                   ratio_bound: float = DEFAULT_RATIO_BOUND, diam_factor: int = DEFAULT_DIAM_FACTOR,
                   oracle: bool = True) -> PropertyReport:
    """The four backbone properties; `bb` needs members, views and stars."""
    pid = "backbone"
    adj = _adjacency(graph)
    members = set(bb.members)
    kind, leader, children = _state(bb.stars)
    measured: dict = {"size": len(members)}
    checks = {}

    # (1) connected dominating set, views equal to induced neighbourhoods, bounded degree
    undominated = [u for u in sorted(adj) if u not in members and not (adj[u] & members)]
    wrong_view = [u for u in sorted(members) if set(bb.views.get(u, ())) != (adj[u] & members)]
    degree = max((len(adj[u] & members) for u in members), default=0)
    connected = bool(members) and len(_hops(adj, min(members), members)) == len(members)
    measured["internal_degree"] = degree
    checks["cds"] = not undominated and not wrong_view and connected and degree <= degree_bound

    # (2) size against the exact optimum
    if oracle:
        scd = min_cds_oracle(adj)
        measured["s_c_d"] = scd
        measured["ratio"] = len(members) / scd if scd else 0.0
        checks["size"] = len(members) <= ratio_bound * scd
    # (3) each outsider enters through exactly its own leader
    bad_entry = []
    for u in sorted(adj):
        if u in members:
            continue
        entries = [m for m in children if kind.get(m) == "leader" and u in children[m]]
        if entries != [leader.get(u)] or leader.get(u) not in members or leader.get(u) not in adj[u]:
            bad_entry.append(u)
    checks["entry"] = not bad_entry
    # (4) hop diameter
    g_diam = _diameter(adj, adj) or 0
    h_diam = _diameter(adj, members) if connected else None
    measured["graph_diameter"] = g_diam
    measured["backbone_diameter"] = h_diam
    checks["diameter"] = h_diam is not None and h_diam <= diam_factor * g_diam
    measured["checks"] = checks

    if all(checks.values()):
        return PropertyReport(pid, True, None, measured)
    if not checks["cds"]:
        witness = ("undominated", undominated[0]) if undominated else \
            ("wrong view", wrong_view[0]) if wrong_view else \
            ("disconnected backbone", sorted(members)) if not connected else ("degree", degree)
    elif not checks.get("size", True):
        witness = ("size", len(members), measured["s_c_d"])
    elif not checks["entry"]:
        witness = ("entry point", bad_entry[0])
    else:
        witness = ("diameter", h_diam, g_diam)
    return _fail(pid, witness, **measured)


def round_budget(protocol: str, n: int, n_labels: int, schedule_length: int, *,
                 delta: int | None = None, internal_degree: int | None = None) -> int:
    """Concrete round budgets with c1 = ceil(z / ceil(log2 N))."""
    log_n = log2_ceil(n_labels)
    c1 = -(-schedule_length // log_n)
    unit = c1 * log_n
    z = schedule_length
    if protocol == "tree-grower":
        return 4 * n * z
    if protocol == "tree-cutter":
        return 5 * (2 * 947 * (n + 1) - 1) * z
    if protocol == "backbone":
        from .protocols.backbone import stage_blocks
        stages = 4 * stage_blocks(n) * 4 * z
        return round_budget("tree-grower", n, n_labels, z) + round_budget("tree-cutter", n, n_labels, z) \
            + z + stages
    if protocol == "tpt":
        return 2 * 488 * n * z
    if protocol == "wakeup":
        from .protocols.wakeup import EpochTiming
        return EpochTiming(n, n_labels, z).phase_budget
    if protocol == "multi-broadcast":
        return 976 * n * unit
    if protocol == "bb-transmit":
        return 2 * max(1, delta or 0) * 2 * z
    if protocol == "bb-exchange":
        return 4 * max(1, internal_degree or 0) * unit
    raise ValueError(f"no round budget for {protocol!r}")


def audit_rounds(measured: int, protocol: str, n: int, n_labels: int, schedule_length: int,
                 exact: bool = False, **kw) -> PropertyReport:
    """Compare measured rounds (phases for wakeup) with the concrete budget."""
    budget = round_budget(protocol, n, n_labels, schedule_length, **kw)
    ok = measured == budget if exact else measured <= budget
    rep = PropertyReport(f"rounds:{protocol}", ok, None if ok else ("measured", measured, "budget", budget),
                         {"measured": measured, "budget": budget, "ratio": measured / budget if budget else 0.0})
    return rep


def audit_trace(trace: SimTrace, cap: int, wake_round: Mapping[int, int] | None = None) -> PropertyReport:
    """Engine invariants over every recorded round.

    Repeat blocks are shifted copies of records already audited, so each stored
    record is checked once. Checks: a listener decodes at most one sender per
    round, never while transmitting; every decoded payload was transmitted that
    very round; no payload exceeds the cap; with `wake_round`, no node transmits
    before the round in which it woke.
    """
    pid = "engine"
    checked = 0
    for rec in trace.records:
        if isinstance(rec, RepeatRecord):
            continue
        checked += 1
        tx = {u: (k, b) for u, k, b in rec.transmissions}
        if len(tx) != len(rec.transmissions):
            return _fail(pid, ("double transmission", rec.round))
        listeners = Counter(v for v, *_ in rec.deliveries)
        dup = [v for v, c in listeners.items() if c > 1]
        if dup:
            return _fail(pid, ("several deliveries", rec.round, dup[0]))
        for v, sender, kind, bits in rec.deliveries:
            if v in tx:
                return _fail(pid, ("transmitter decoded", rec.round, v))
            if tx.get(sender) != (kind, bits):
                return _fail(pid, ("delivery without matching transmission", rec.round, v, sender))
        for u, (kind, bits) in tx.items():
            if bits > cap:
                return _fail(pid, ("payload above cap", rec.round, u, bits, cap))
            if wake_round is not None:
                w = wake_round.get(u)
                if w is None or w >= rec.round and w > 0:
                    return _fail(pid, ("asleep transmitter", rec.round, u))
    return PropertyReport(pid, True, None, {"records": checked, "max_payload_bits": trace.max_payload_bits,
                                            "cap": cap})


def parse_trace(text: str) -> list:
    """Rebuild trace records from the exported text form (comment lines ignored)."""
    records = []
    cur_round, tx, rx = None, [], []

    def flush():
        if cur_round is not None:
            records.append(RoundRecord(cur_round, tuple(tx), tuple(rx)))

    for line in text.splitlines():
        if not line or line.startswith("#") or line.startswith("round,"):
            continue
        rnd, actor, action, peer, kind, bits = line.split(",")
        if action == "repeat":
            flush()
            cur_round, tx, rx = None, [], []
            first, last = (int(v) for v in peer.split(":"))
            records.append(RepeatRecord(first, last, int(rnd), int(kind)))
            continue
        rnd = int(rnd)
        if rnd != cur_round or (action == "transmit" and rx):
            flush()
            cur_round, tx, rx = rnd, [], []
        if action == "transmit":
            tx.append((int(actor), kind, int(bits)))
        elif action == "receive":
            rx.append((int(actor), int(peer), kind, int(bits)))
        else:
            raise ValueError(f"unknown trace action {action!r}")
    flush()
    return records


def audit_trace_text(text: str, cap: int, wake_round: Mapping[int, int] | None = None) -> PropertyReport:
    trace = SimTrace(parse_trace(text))
    trace.max_payload_bits = max((b for rec in trace.records if isinstance(rec, RoundRecord)
                                  for _, _, b in rec.transmissions), default=0)
    return audit_trace(trace, cap, wake_round)


def check_dilution(stations: Iterable[Station], params: SinrParams, family) -> PropertyReport:
    """Every station executes `family` once; each must reach all neighbours within range.

    Receptions are computed from scratch with the ground-truth predicate, one
    schedule step at a time, independently of the engine.
    """
    from .sinr import distance, receives, transmission_range

    stations = list(stations)
    r = transmission_range(params)
    by_label = {s.label: s for s in stations}
    heard = {s.label: set() for s in stations}
    for step in family.sets:
        tx = [by_label[u] for u in sorted(step) if u in by_label]
        if not tx:
            continue
        for v in stations:
            if v.label in step:
                continue
            for u in tx:
                if receives(u, v, tx, params):
                    heard[v.label].add(u.label)
    missing = [(u.label, v.label) for u in stations for v in stations
               if u is not v and distance(u, v) <= r * (1 + 1e-12) and u.label not in heard[v.label]]
    pairs = sum(len(h) for h in heard.values())
    if missing:
        return _fail("dilution", missing[0], missing=len(missing), receptions=pairs)
    return PropertyReport("dilution", True, None, {"receptions": pairs})
