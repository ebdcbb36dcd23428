"""Forest formation by repeated bidirectional handshakes; smaller labels become parents."""

from __future__ import annotations

from typing import Iterable

from .common import LEADER, NEUTRAL, Context, Stars, heard_by_sender


def tree_grower(ctx: Context, participants: Iterable[int], n_bound: int) -> Stars:
    """Run `n_bound` phases of four schedule executions over the awake participants.

    Returns kind (leader for roots, neutral for children), parent as my_leader and
    the confirmed children of every node.
    """
    nodes = sorted(participants)
    sz = ctx.sizes
    kind = {u: LEADER for u in nodes}
    parent = {u: u for u in nodes}
    children: dict[int, set] = {u: set() for u in nodes}

    for _ in range(n_bound):
        active = [u for u in nodes if kind[u] == LEADER]
        if not active:
            ctx.idle_executions(4)
            continue

        heard = ctx.execute({u: ctx.payload("tg-hello", u, u, sz.label) for u in active}, active)
        i_hear = {u: sorted(heard_by_sender(heard.get(u))) for u in active}

        heard = ctx.execute(
            {u: ctx.payload("tg-ihear", u, tuple(i_hear[u]), sz.label + sz.labels(len(i_hear[u])))
             for u in active}, active)
        bidir = {}
        for u in active:
            reports = heard_by_sender(heard.get(u))
            bidir[u] = {v for v in i_hear[u] if v in reports and u in reports[v].body}

        heard = ctx.execute({u: ctx.payload("tg-hello", u, u, sz.label) for u in active}, active)
        pot_parent: dict[int, int | None] = {}
        pot_children: dict[int, list[int]] = {}
        for u in active:
            pot_parent[u], pot_children[u] = None, []
            # Heard order follows the schedule, so the first smaller label wins.
            for v in heard_by_sender(heard.get(u)):
                if v not in bidir[u]:
                    continue
                if v < u and pot_parent[u] is None:
                    pot_parent[u] = v
                else:
                    pot_children[u].append(v)

        intents = {}
        for u in active:
            body = (u, pot_parent[u], tuple(pot_children[u]))
            bits = sz.label * 2 + sz.labels(len(pot_children[u]))
            intents[u] = ctx.payload("tg-propose", u, body, bits)
        heard = ctx.execute(intents, active)
        for u in active:
            props = {v: p.body for v, p in heard_by_sender(heard.get(u)).items()}
            pp = pot_parent[u]
            if pp is not None and pp in props and u in props[pp][2]:
                parent[u] = pp
                kind[u] = NEUTRAL
            for v in pot_children[u]:
                if v in props and props[v][1] == u:
                    children[u].add(v)

    return Stars(kind, parent, {u: frozenset(c) for u, c in children.items()},
                 {u: parent[u] for u in nodes})
