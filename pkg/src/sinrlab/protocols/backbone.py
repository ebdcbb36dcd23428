"""Backbone construction over stars and message movement along it.

Every stage is a token cycle in which all leaders advance in lockstep. One block
serves one child and takes four schedule executions: the leader transmits, the
token goes to the child, the child transmits, the token comes back. Everybody
who is not transmitting listens.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .common import FOLLOWER, MESSAGE_BITS, Context, Stars, TokenLost, heard_by_sender
from .tree_cutter import tree_cutter
from .tree_grower import tree_grower

MAX_ROUTE_HOPS = 3


@dataclass
class Backbone:
    stars: Stars
    members: frozenset  # leaders and connectors
    views: dict  # backbone node -> backbone nodes it heard in the last stage
    connectors: dict  # leader -> its own followers that are connectors
    routes: dict = field(default_factory=dict)  # (leader, other leader) -> route
    rounds: int = 0

    def internal_degree(self) -> int:
        return max((len(v) for v in self.views.values()), default=0)


def _star_cycle(ctx: Context, routes: Mapping[int, list[int]], blocks: int,
                leader_payload: Callable, child_payload: Callable, on_heard: Callable,
                listeners: list[int]):
    """Run `blocks` lockstep blocks; a leader with fewer children idles in the tail."""
    sz = ctx.sizes
    for j in range(blocks):
        intents = {}
        for leader in routes:
            if j < max(1, len(routes[leader])):
                p = leader_payload(leader)
                if p is not None:
                    intents[leader] = p
        on_heard(ctx.execute(intents, listeners))

        moves = {leader: routes[leader][j] for leader in routes if j < len(routes[leader])}
        _pass(ctx, {leader: (leader, child) for leader, child in moves.items()}, listeners, sz)

        intents = {}
        for leader, child in moves.items():
            p = child_payload(child)
            if p is not None:
                intents[child] = p
        on_heard(ctx.execute(intents, listeners))

        _pass(ctx, {child: (child, leader) for leader, child in moves.items()}, listeners, sz)


def _pass(ctx: Context, moves: Mapping[int, tuple[int, int]], listeners, sz):
    intents = {h: ctx.payload("bb-token", h, mv, 2 * sz.label) for h, mv in moves.items()}
    heard = ctx.execute(intents, listeners)
    for h, (_, target) in moves.items():
        got = heard_by_sender(heard.get(target)).get(h)
        if got is None or got.body != moves[h]:
            raise TokenLost(f"backbone token from {h} to {target} was not delivered")


def stage_blocks(n_bound: int) -> int:
    return max(1, n_bound)


def _shortest_routes(leader: int, own: set, adjacency: Mapping[int, set], leader_of: Mapping[int, int]):
    """Breadth-first routes of at most three hops to every known foreign leader.

    A second intermediate node is only usable behind one of our own followers,
    because only our followers relay the connector list beyond our range.
    Neighbours are visited in ascending label order, so ties go to smaller labels.
    """
    found = {}
    parent = {leader: None}
    queue = deque([(leader, 0)])
    while queue:
        node, depth = queue.popleft()
        if node != leader and leader_of.get(node) == node:
            path = [node]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            found[node] = path[::-1]
            continue
        if depth == MAX_ROUTE_HOPS:
            continue
        for nxt in sorted(adjacency.get(node, ())):
            if nxt in parent:
                continue
            is_leader = leader_of.get(nxt) == nxt
            if depth == 2 and not is_leader:
                continue
            if depth == 1 and not is_leader and node not in own:
                continue
            parent[nxt] = node
            queue.append((nxt, depth + 1))
    return found


def backbone_creation(ctx: Context, n_bound: int, participants=None,
                      stars: Stars | None = None, fast_forward: bool = True) -> Backbone:
    sim = ctx.sim
    sz = ctx.sizes
    start = sim.trace.total_rounds
    nodes = sorted(participants if participants is not None else sim.labels)
    if stars is None:
        forest = tree_grower(ctx, nodes, n_bound)
        stars, _ = tree_cutter(ctx, forest, n_bound, fast_forward=fast_forward)
    leader_of = dict(stars.my_leader)
    routes = {leader: stars.members(leader) for leader in stars.leaders}
    blocks = stage_blocks(n_bound)

    # Leaders announce their child count; listeners note every leader they hear.
    heard_pairs: dict[int, dict[int, int]] = {u: {} for u in nodes}
    heard = ctx.execute({leader: ctx.payload("bb-count", leader, len(routes[leader]), sz.label)
                         for leader in routes}, nodes)
    for v, got in heard.items():
        for _, p in got:
            heard_pairs[v][p.sender] = p.sender

    # Stage 1: everyone announces (self, leader).
    def announce(u):
        return ctx.payload("bb-follow", u, (u, leader_of[u]), 2 * sz.label)

    def record_pairs(heard):
        for v, got in heard.items():
            for _, p in got:
                w, lw = p.body
                heard_pairs[v][w] = lw

    _star_cycle(ctx, routes, blocks, announce, announce, record_pairs, nodes)

    # Stage 2: followers report foreign pairs; anyone in range stores them.
    foreign = {u: tuple(sorted((w, lw) for w, lw in heard_pairs[u].items() if lw != leader_of[u]))
               for u in nodes}
    reports: dict[int, dict[int, tuple]] = {u: {} for u in nodes}

    def report(u):
        return ctx.payload("bb-report", u, foreign[u], sz.label + 2 * sz.label * len(foreign[u]))

    def record_reports(heard):
        for v, got in heard.items():
            for _, p in got:
                reports[v][p.sender] = p.body

    _star_cycle(ctx, routes, blocks, lambda u: None, report, record_reports, nodes)

    # Stage 3: routes and connector designation.
    designated: dict[int, tuple] = {}
    chosen_routes = {}
    for leader in routes:
        own = set(routes[leader])
        adjacency: dict[int, set] = {}
        knows_leader = dict(heard_pairs[leader])
        for reporter, body in list(reports[leader].items()) + [(leader, foreign[leader])]:
            for w, lw in body:
                knows_leader.setdefault(w, lw)
        for lw in set(knows_leader.values()) | {leader}:
            knows_leader[lw] = lw

        def link(a, b):
            adjacency.setdefault(a, set()).add(b)
            adjacency.setdefault(b, set()).add(a)

        for f in own:
            link(leader, f)
        for w in heard_pairs[leader]:
            link(leader, w)
        for reporter, body in reports[leader].items():
            # A report proves the reporter was in range; its pairs are its neighbours.
            link(leader, reporter)
            for w, _ in body:
                link(reporter, w)
        for w, lw in knows_leader.items():
            if lw != w:
                link(w, lw)
        found = _shortest_routes(leader, own, adjacency, knows_leader)
        picked = set()
        for target, path in found.items():
            chosen_routes[(leader, target)] = tuple(path)
            picked.update(x for x in path[1:-1])
        designated[leader] = tuple(sorted(picked))

    relay = {u: designated.get(leader_of[u], ()) for u in nodes}
    connector = set()

    def publish_leader(u):
        return ctx.payload("bb-connectors", u, designated[u], sz.label * (1 + len(designated[u])))

    def publish_child(u):
        return ctx.payload("bb-connectors", u, relay[u], sz.label * (1 + len(relay[u])))

    def record_designation(heard):
        for v, got in heard.items():
            for _, p in got:
                if v in p.body:
                    connector.add(v)

    _star_cycle(ctx, routes, blocks, publish_leader, publish_child, record_designation, nodes)
    connector -= set(routes)

    # Stage 4: backbone members announce membership and build their views.
    members = frozenset(set(routes) | connector)
    views: dict[int, set] = {u: set() for u in members}

    def membership(u):
        return ctx.payload("bb-member", u, u, sz.label) if u in members else None

    def record_members(heard):
        for v, got in heard.items():
            if v not in members:
                continue
            for _, p in got:
                views[v].add(p.sender)

    _star_cycle(ctx, routes, blocks, membership, membership, record_members, nodes)

    own_connectors = {leader: sorted(c for c in routes[leader] if c in connector and c in views[leader])
                      for leader in routes}
    return Backbone(stars, members, {u: frozenset(v) for u, v in views.items()}, own_connectors,
                    chosen_routes, sim.trace.total_rounds - start)


@dataclass
class ExchangeResult:
    inbox: dict  # backbone node -> {origin: content}
    heard_from: dict  # listener -> set of backbone senders heard
    cycle_rounds: int
    cycles: int
    rounds: int


def bb_message_exchange(ctx: Context, bb: Backbone, messages: Mapping[int, object],
                        cycles: int = 1) -> ExchangeResult:
    """Leaders cycle their token over their connectors; holders send everything pending.

    Each cycle lasts as many blocks as the largest connector list (at least one),
    so every backbone node transmits at least once per cycle.
    """
    sz = ctx.sizes
    sim = ctx.sim
    start = sim.trace.total_rounds
    routes = {leader: list(c) for leader, c in bb.connectors.items()}
    blocks = max([1] + [len(c) for c in routes.values()])
    inbox = {u: ({u: messages[u]} if u in messages else {}) for u in bb.members}
    sent: dict[int, set] = {u: set() for u in bb.members}
    heard_from: dict[int, set] = {u: set() for u in bb.members}
    listeners = sorted(bb.members)

    def outgoing(u):
        pending = sorted(set(inbox[u]) - sent[u])
        if not pending and u not in routes:
            return None
        sent[u].update(pending)
        body = (tuple((o, inbox[u][o]) for o in pending), 2 * blocks if u in routes else None)
        bits = sz.label + sz.counter + len(pending) * (sz.label + MESSAGE_BITS)
        return ctx.payload("bb-exchange", u, body, bits)

    def collect(heard):
        for v, got in heard.items():
            if v not in inbox:
                continue
            for _, p in got:
                if p.sender in bb.members:
                    heard_from[v].add(p.sender)
                for origin, content in p.body[0]:
                    inbox[v].setdefault(origin, content)

    before = sim.trace.total_rounds
    for _ in range(cycles):
        _star_cycle(ctx, routes, blocks, outgoing, outgoing, collect, listeners)
    cycle_rounds = (sim.trace.total_rounds - before) // max(1, cycles)
    return ExchangeResult(inbox, heard_from, cycle_rounds, cycles, sim.trace.total_rounds - start)


def adjacent_backbone_pairs(bb: Backbone) -> list[tuple[int, int]]:
    return sorted((u, v) for u, view in bb.views.items() for v in view if u < v and u in bb.views.get(v, ()))


@dataclass
class TransmitResult:
    leader_inbox: dict
    cycle_rounds: int
    handoffs: int


def bb_message_transmit(ctx: Context, stars: Stars, messages: Mapping[int, object]) -> TransmitResult:
    """One full cycle of every leader's token over all its children."""
    sz = ctx.sizes
    sim = ctx.sim
    routes = {leader: stars.members(leader) for leader in stars.leaders}
    blocks = max([1] + [len(c) for c in routes.values()])
    inbox = {leader: ({leader: messages[leader]} if leader in messages else {}) for leader in routes}
    listeners = stars.nodes

    def follower_msg(u):
        if u not in messages:
            return None
        return ctx.payload("bb-transmit", u, (u, messages[u]), sz.label + MESSAGE_BITS)

    def collect(heard):
        for v, got in heard.items():
            if v in inbox:
                for _, p in got:
                    if stars.my_leader.get(p.sender) == v and stars.kind.get(p.sender) == FOLLOWER:
                        origin, content = p.body
                        inbox[v].setdefault(origin, content)

    before = sim.trace.total_rounds
    _star_cycle(ctx, routes, blocks, lambda u: None, follower_msg, collect, listeners)
    handoffs = sum(2 * len(c) for c in routes.values())
    return TransmitResult(inbox, sim.trace.total_rounds - before, handoffs)
