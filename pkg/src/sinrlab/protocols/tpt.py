"""Token circulation inside stars: the token holder transmits, then hands the token on."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from ..engine import WAKEUP
from .common import MESSAGE_BITS, Context, Stars, TokenLost, heard_by_sender

TPT_LOOP_CONSTANT = 488
MODES = ("wakeup", "single_transmit", "exchange")


def tpt_iterations(n_bound: int) -> int:
    return TPT_LOOP_CONSTANT * n_bound


@dataclass
class TptResult:
    mode: str
    iterations: int
    simulated_iterations: int = 0
    # single_transmit: listener -> {sender: body}
    heard: dict = field(default_factory=dict)
    # exchange: node -> {origin: content}; own messages included
    held: dict = field(default_factory=dict)
    # node -> ordered list of what it transmitted (origins in exchange mode)
    sent: dict = field(default_factory=dict)
    # wakeup: asleep listener -> physical round of its first wakeup reception
    woken: dict = field(default_factory=dict)
    rounds: int = 0
    # exchange: rounds from the start until every participant held every message
    complete_after: int | None = None


def _routes(stars: Stars, participants: set, routes: Mapping[int, Iterable[int]] | None):
    out = {}
    for leader in stars.leaders:
        if leader not in participants:
            continue
        members = stars.members(leader) if routes is None else sorted(routes.get(leader, ()))
        out[leader] = [c for c in members if c in participants]
    return out


def token_passing_transfer(ctx: Context, stars: Stars, mode: str, n_bound: int,
                           messages: Mapping[int, object] | None = None,
                           participants: Iterable[int] | None = None,
                           routes: Mapping[int, Iterable[int]] | None = None,
                           message_bits: Callable[[object], int] | None = None,
                           fast_forward: bool = True,
                           initial_held: Mapping[int, Mapping[int, object]] | None = None) -> TptResult:
    """Run 488*n_bound iterations of (holder transmits, token moves).

    `routes` optionally replaces each leader's children as the token route;
    participants off every route only listen. In exchange mode `messages` maps an
    origin label to its content and every participant forwards each message it
    holds or hears once, lowest origin first; `initial_held` pre-loads several
    messages (origin -> content) per node instead.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    sz = ctx.sizes
    messages = dict(messages or {})
    message_bits = message_bits or (lambda body: MESSAGE_BITS)
    nodes = sorted(stars.nodes if participants is None else participants)
    part = set(nodes)
    route = _routes(stars, part, routes)

    holder = {leader: leader for leader in route}
    pointer = {leader: 0 for leader in route}
    total = tpt_iterations(n_bound)
    res = TptResult(mode, total)
    res.sent = {u: [] for u in nodes}
    if mode == "exchange":
        res.held = {u: ({u: messages[u]} if u in messages else {}) for u in nodes}
        for u, extra in (initial_held or {}).items():
            if u in res.held:
                res.held[u].update(extra)
    start_rounds = ctx.sim.trace.total_rounds
    start_clock = ctx.sim.clock
    universe = set().union(*res.held.values()) if mode == "exchange" and nodes else set()
    if mode == "exchange" and all(len(res.held[u]) == len(universe) for u in nodes):
        res.complete_after = 0

    def snapshot():
        parts = [tuple(sorted(holder.items())), tuple(sorted(pointer.items()))]
        if mode == "exchange":
            parts.append(tuple((u, tuple(sorted(res.held[u])), len(res.sent[u])) for u in nodes))
        elif mode == "single_transmit":
            parts.append(tuple((u, tuple(sorted(res.heard.get(u, ())))) for u in nodes))
        else:
            parts.append(tuple(sorted(res.woken)))
        return tuple(parts)

    def payload_for(u):
        if mode == "wakeup":
            return ctx.payload(WAKEUP, u, ctx.sim.clock, sz.counter)
        if mode == "single_transmit":
            if u not in messages:
                return None
            return ctx.payload("tpt-msg", u, messages[u], sz.label + message_bits(messages[u]))
        pending = sorted(set(res.held[u]) - set(res.sent[u]))
        if not pending:
            return None
        origin = pending[0]
        body = (origin, res.held[u][origin])
        return ctx.payload("tpt-msg", u, body, 2 * sz.label + message_bits(body[1]))

    seen: dict = {}
    marks = []
    sent_len: dict = {}
    it = 0
    while it < total:
        if fast_forward:
            key = snapshot()
            marks.append(ctx.sim.mark())
            if key in seen:
                first = seen[key]
                period = it - first
                reps = (total - it) // period
                if reps:
                    ctx.sim.replay(marks[first], marks[it], reps)
                    # Sent lists only grow in exchange mode, where a repeat means nothing is left.
                    if mode != "exchange":
                        block = {u: res.sent[u][sent_len[first][u]:] for u in nodes}
                        for u in nodes:
                            res.sent[u].extend(block[u] * reps)
                    it += reps * period
                    seen, marks = {}, []
                    sent_len.clear()
                    if it >= total:
                        break
                    continue
            seen[key] = it
            sent_len[it] = {u: len(res.sent[u]) for u in nodes}

        # Execution 1: holders transmit.
        intents = {}
        for h in holder.values():
            p = payload_for(h)
            if p is not None:
                intents[h] = p
        exec_start, stride = ctx.sim.clock, ctx.sim.stride
        heard = ctx.execute(intents, nodes)
        for h, p in intents.items():
            if mode == "exchange":
                res.sent[h].append(p.body[0])
            else:
                res.sent[h].append(WAKEUP if mode == "wakeup" else p.body)
        for v, got in heard.items():
            for step, p in got:
                if mode == "wakeup":
                    if v not in part and p.kind == WAKEUP:
                        res.woken.setdefault(v, exec_start + step * stride)
                    continue
                if v not in part:
                    continue
                if mode == "single_transmit":
                    res.heard.setdefault(v, {}).setdefault(p.sender, p.body)
                else:
                    origin, content = p.body
                    res.held[v].setdefault(origin, content)
        if mode == "exchange" and res.complete_after is None:
            if all(len(res.held[u]) == len(universe) for u in nodes):
                res.complete_after = ctx.sim.clock - start_clock

        # Execution 2: token hand-off.
        moves = {}
        for leader, h in holder.items():
            members = route[leader]
            if h == leader:
                if not members:
                    continue
                target = members[pointer[leader] % len(members)]
                pointer[leader] = (pointer[leader] + 1) % len(members)
            else:
                target = leader
            moves[h] = (leader, target)
        intents = {h: ctx.payload("tpt-token", h, mv, 2 * sz.label) for h, mv in moves.items()}
        heard = ctx.execute(intents, nodes)
        for h, (leader, target) in moves.items():
            got = heard_by_sender(heard.get(target)).get(h)
            if got is None or got.body != (leader, target):
                raise TokenLost(f"token of star {leader} from {h} to {target} was not delivered")
            holder[leader] = target
        res.simulated_iterations += 1
        it += 1

    res.rounds = ctx.sim.trace.total_rounds - start_rounds
    return res


def exchange_audit(result: TptResult) -> list[tuple[int, str]]:
    """Nodes whose transmissions differ from the messages they held or heard."""
    bad = []
    for u, sent in result.sent.items():
        if len(sent) != len(set(sent)):
            bad.append((u, "duplicate transmission"))
        elif set(sent) != set(result.held.get(u, ())):
            missing = sorted(set(result.held.get(u, ())) - set(sent))
            bad.append((u, f"never transmitted {missing}"))
    return bad
