"""Cutting a forest down to stars with circulating tokens and local leader elections."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .common import (FOLLOWER, LEADER, NEUTRAL, Context, NoMainRound, Stars,
                     TokenLost, heard_by_sender)

LOOP_CONSTANT = 947
DOWN, UP = 0, 1


def tree_cutter_phases(n_bound: int) -> int:
    return 2 * LOOP_CONSTANT * (n_bound + 1) - 1


@dataclass
class _Node:
    kind: str
    my_leader: int
    old_parent: int
    tree: set
    traversed: set = field(default_factory=set)
    # token owner -> node to hand it back to (None for the node's own token)
    tokens: dict = field(default_factory=dict)
    # token owner -> node that sent it downwards to us
    arrived_from: dict = field(default_factory=dict)

    def snapshot(self):
        return (self.kind, self.my_leader, tuple(sorted(self.tree)), tuple(sorted(self.traversed)),
                tuple(sorted((o, -1 if r is None else r) for o, r in self.tokens.items())),
                tuple(sorted(self.arrived_from.items())))


@dataclass
class CutterStats:
    phases: int = 0
    simulated_phases: int = 0
    max_token_distance: float = 0.0
    max_tokens_per_box: int = 0
    token_handoffs: int = 0
    elections: int = 0
    disloyal_visits: dict = field(default_factory=dict)

    @property
    def max_disloyal(self) -> int:
        return max(self.disloyal_visits.values(), default=0) if self.disloyal_visits else 0


def potential_leader_election(ctx: Context, nodes: dict[int, _Node], candidates: list[int],
                              stats: CutterStats | None = None) -> None:
    """Three executions electing at most one leader per box among token-holding neutrals.

    With no candidates the three executions are silent for everyone.
    """
    if not candidates:
        ctx.idle_executions(3)
        return
    sz = ctx.sizes
    heard1 = ctx.execute({u: ctx.payload("ple-candidate", u, u, sz.label) for u in candidates}, candidates)
    seen = {u: [(s, p.sender) for s, p in heard1.get(u, [])] for u in candidates}
    heard2 = ctx.execute(
        {u: ctx.payload("ple-report", u, tuple(seen[u]), sz.label + len(seen[u]) * (sz.label + sz.step))
         for u in candidates}, candidates)

    main_round = {}
    for u in candidates:
        reports = {p.sender: set(p.body) for _, p in heard2.get(u, [])}
        neighbours = {v for _, v in seen[u]} | set(reports)
        for s in ctx.family.steps_of(u):
            if all((s, u) in reports.get(v, ()) for v in neighbours):
                main_round[u] = s
                break
        else:
            raise NoMainRound(f"candidate {u} never heard alone by its {len(neighbours)} neighbours")

    def decide(step, heard):
        out = {}
        for u in candidates:
            node = nodes[u]
            if node.kind != NEUTRAL:
                continue
            announced = [p for _, p in heard.get(u, []) if p.kind == "ple-leader"]
            if announced:
                node.kind, node.my_leader = FOLLOWER, announced[0].sender
                continue
            if main_round[u] == step:
                node.kind, node.my_leader = LEADER, u
                out[u] = ctx.payload("ple-leader", u, u, sz.label)
                if stats is not None:
                    stats.elections += 1
        return out

    decide.candidate_steps = sorted(set(main_round.values()))
    heard3 = ctx.execute_stepwise(decide, candidates)
    for u in candidates:
        node = nodes[u]
        if node.kind == NEUTRAL:
            announced = [p for _, p in heard3.get(u, []) if p.kind == "ple-leader"]
            if announced:
                node.kind, node.my_leader = FOLLOWER, announced[0].sender


def _next_child(node: _Node) -> int | None:
    pending = sorted(node.tree - node.traversed)
    if not pending:
        return None
    node.traversed.add(pending[0])
    return pending[0]


def tree_cutter(ctx: Context, forest: Stars, n_bound: int, fast_forward: bool = True):
    """Turn a forest into stars.

    Returns (stars, stats). The loop runs exactly 2*947*(n_bound+1)-1 phases of five
    executions; once the global state repeats, the remaining phases are replayed
    rather than recomputed, which is exact because a phase is a deterministic
    function of that state.
    """
    sz = ctx.sizes
    labels = forest.nodes
    nodes = {u: _Node(forest.kind[u], forest.my_leader[u] if forest.kind[u] != LEADER else u,
                      forest.old_parent.get(u, forest.my_leader[u]), set(forest.children.get(u, ())))
             for u in labels}
    for u, node in nodes.items():
        if node.kind == LEADER:
            node.my_leader = u
            node.old_parent = u
            node.tokens[u] = None
    stats = CutterStats()
    total = tree_cutter_phases(n_bound)
    r2 = 2 * ctx.r
    seen_states: dict = {}
    marks = []
    phase = 0
    while phase < total:
        if fast_forward:
            key = tuple(nodes[u].snapshot() for u in labels)
            marks.append(ctx.sim.mark())
            if key in seen_states:
                first = seen_states[key]
                period = phase - first
                reps = (total - phase) // period
                if reps:
                    ctx.sim.replay(marks[first], marks[phase], reps)
                    phase += reps * period
                    seen_states = {}
                    marks = []
                    if phase >= total:
                        break
                    continue
            seen_states[key] = phase
        _phase(ctx, nodes, labels, stats, r2)
        stats.simulated_phases += 1
        phase += 1
    stats.phases = total

    kind, leader, children = {}, {}, {}
    for u in labels:
        node = nodes[u]
        if node.kind == FOLLOWER:
            node.tree = set()
        kind[u], leader[u], children[u] = node.kind, node.my_leader, frozenset(node.tree)
    return Stars(kind, leader, children, {u: nodes[u].old_parent for u in labels}), stats


def _phase(ctx: Context, nodes: dict[int, _Node], labels: list[int], stats: CutterStats, r2: float):
    sz = ctx.sizes
    per_box = Counter(ctx.box(u) for u in labels for _ in nodes[u].tokens)
    if per_box:
        stats.max_tokens_per_box = max(stats.max_tokens_per_box, max(per_box.values()))

    was_neutral_holder = [u for u in labels if nodes[u].kind == NEUTRAL and nodes[u].tokens]
    potential_leader_election(ctx, nodes, was_neutral_holder, stats)

    # Announcement execution. Settled nodes announce too so leaders learn every follower.
    holders = [u for u in labels if nodes[u].tokens]
    announcers = [u for u in labels if nodes[u].tokens or nodes[u].kind != NEUTRAL]
    intents = {}
    for u in announcers:
        node = nodes[u]
        body = (u, node.kind, node.my_leader)
        intents[u] = ctx.payload("tc-announce", u, body, 2 * sz.label + sz.kind)
    heard = ctx.execute(intents, labels)
    for u in labels:
        node = nodes[u]
        msgs = heard_by_sender(heard.get(u))
        if node.kind == LEADER:
            for v, p in msgs.items():
                _, vkind, vleader = p.body
                if vkind == FOLLOWER and vleader == u:
                    node.tree.add(v)
                elif v in node.tree and vleader != u:
                    node.tree.discard(v)
        elif node.kind == NEUTRAL and not node.tokens:
            for v, p in msgs.items():
                if p.body[1] == LEADER:
                    node.kind, node.my_leader = FOLLOWER, v
                    break

    # Token-passing execution.
    passes: dict[int, list[tuple[int, int, int]]] = {}
    new_tokens = []
    for u in holders:
        node = nodes[u]
        moves = []
        for owner in sorted(node.tokens):
            back = node.tokens[owner]
            if owner == u and node.kind == LEADER:
                child = _next_child(node)
                if child is not None:
                    moves.append((owner, child, DOWN))
                continue
            if u in was_neutral_holder:
                moves.append((owner, back, UP))
                continue
            if node.kind == FOLLOWER and node.arrived_from.get(owner) == node.my_leader:
                child = _next_child(node)
                if child is not None:
                    moves.append((owner, child, DOWN))
                    continue
            moves.append((owner, back, UP))
        if u in was_neutral_holder and node.kind == LEADER:
            new_tokens.append(u)
        if moves:
            passes[u] = moves
    intents = {u: ctx.payload("tc-token", u, tuple(m), len(m) * (2 * sz.label + 1))
               for u, m in passes.items()}
    heard = ctx.execute(intents, labels)
    for u, moves in passes.items():
        node = nodes[u]
        for owner, target, direction in moves:
            got = heard_by_sender(heard.get(target)).get(u)
            if got is None or (owner, target, direction) not in got.body:
                raise TokenLost(f"token of {owner} from {u} to {target} was not delivered")
            del node.tokens[owner]
            tnode = nodes[target]
            if direction == DOWN:
                tnode.tokens[owner] = u
                tnode.arrived_from[owner] = u
            else:
                # A returning token keeps the hand-back target recorded on the way down.
                tnode.tokens[owner] = tnode.tokens.get(owner, tnode.arrived_from.get(owner))
                if owner == target:
                    tnode.tokens[owner] = None
            stats.token_handoffs += 1
            stats.max_token_distance = max(stats.max_token_distance, ctx.dist(target, owner))
            if direction == UP and owner != u and nodes[u].kind != NEUTRAL and nodes[u].my_leader != owner:
                stats.disloyal_visits[owner] = stats.disloyal_visits.get(owner, 0) + 1
    for u in new_tokens:
        nodes[u].tokens[u] = None
