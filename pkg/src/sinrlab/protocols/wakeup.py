"""Uncoordinated wakeup: slotted epochs of grow, cut and wake-by-token.

Physical time is split into phases of `slot_count` slots of three rounds each.
In every slot a node runs its own copy of the procedure chain, one round per
phase, so slot i advances one virtual round per phase. A node that is awake
when an epoch of slot i starts (phase multiple of t_i) joins that epoch; the
final token-passing stage sends wakeup payloads to asleep neighbours.

Slots never share physical rounds, so each epoch's cohort is simulated in
isolation, in chronological order of epoch start. A wake event always happens
after the start of the epoch that caused it, so by the time an epoch is
simulated every wake event that precedes it is already known.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from ..engine import SimClock
from ..ssf import log2_ceil
from .common import Context
from .tpt import token_passing_transfer, tpt_iterations
from .tree_cutter import tree_cutter, tree_cutter_phases
from .tree_grower import tree_grower

TG_WEIGHT = 10450
FIXED_WEIGHT = 9465

ASLEEP, WAITING, GROWING, CUTTING, PASSING, DONE = 1, 2, 3, 4, 5, 6


@dataclass(frozen=True)
class EpochTiming:
    n_bound: int
    n_labels: int
    schedule_length: int

    @property
    def slot_count(self) -> int:
        return max(1, self.n_bound).bit_length()

    @property
    def log_labels(self) -> int:
        return log2_ceil(self.n_labels)

    @property
    def c1(self) -> int:
        return -(-self.schedule_length // self.log_labels)

    @property
    def unit(self) -> int:
        """c1 * ceil(log2 N), never shorter than one schedule execution."""
        return self.c1 * self.log_labels

    def epoch_length(self, slot: int) -> int:
        return (2 ** slot) * TG_WEIGHT * self.unit + FIXED_WEIGHT * self.unit

    def procedure_rounds(self, slot: int) -> tuple[int, int, int]:
        """Virtual rounds of the three procedures with participant bound 2**slot."""
        z, bound = self.schedule_length, 2 ** slot
        return 4 * bound * z, 5 * tree_cutter_phases(bound) * z, 2 * tpt_iterations(bound) * z

    @property
    def phase_budget(self) -> int:
        return 4 * self.n_bound * self.epoch_length(1)

    @property
    def rounds_per_phase(self) -> int:
        return 3 * self.slot_count

    def epoch_start_round(self, phase: int, slot: int) -> int:
        return SimClock.at(phase, slot, 0, self.slot_count).round


@dataclass
class WakeupResult:
    timing: EpochTiming
    wake_round: dict
    transitions: list = field(default_factory=list)  # (node, slot, phase, status)
    epochs_run: list = field(default_factory=list)  # (slot, start phase, cohort size)
    total_rounds: int = 0

    @property
    def all_awake(self) -> bool:
        return all(r is not None for r in self.wake_round.values())

    @property
    def last_wake_phase(self) -> int:
        rounds = [r for r in self.wake_round.values() if r is not None]
        return max(rounds, default=0) // self.timing.rounds_per_phase

    def final_status(self) -> dict:
        status = {}
        for node, slot, _, st in self.transitions:
            status[(node, slot)] = st
        return status


def wakeup(ctx: Context, n_bound: int, initially_awake, fast_forward: bool = True) -> WakeupResult:
    sim = ctx.sim
    timing = EpochTiming(n_bound, sim.n_labels, ctx.z)
    slots = range(1, timing.slot_count + 1)
    wake = {u: (-1 if u in set(initially_awake) else None) for u in sim.labels}
    res = WakeupResult(timing, wake)
    done = {(u, s): False for u in sim.labels for s in slots}

    budget = timing.phase_budget
    heap = [(timing.epoch_start_round(0, s), s, 0) for s in slots]
    heapq.heapify(heap)
    saved_stride = sim.stride
    sim.stride = timing.rounds_per_phase
    while heap:
        start, slot, phase0 = heapq.heappop(heap)
        if phase0 >= budget:
            continue
        nxt = phase0 + timing.epoch_length(slot)
        cohort = sorted(u for u, r in wake.items()
                        if r is not None and r < start and not done[(u, slot)])
        if cohort:
            _run_epoch(ctx, res, timing, slot, phase0, start, cohort, fast_forward)
            for u in cohort:
                done[(u, slot)] = True
        if not all(done[(u, slot)] for u in wake) and _any_open(wake, done, slots):
            heapq.heappush(heap, (timing.epoch_start_round(nxt, slot), slot, nxt))
    sim.stride = saved_stride
    sim.asleep = set()
    res.total_rounds = budget * timing.rounds_per_phase
    sim.trace.total_rounds = res.total_rounds
    for u, r in wake.items():
        if r == -1:
            wake[u] = 0
    # Waiting starts when a node wakes; it precedes every epoch the node joined.
    waiting = [(u, s, r // timing.rounds_per_phase, WAITING)
               for u, r in sorted(wake.items()) if r is not None for s in slots]
    res.transitions = waiting + res.transitions
    return res


def _any_open(wake, done, slots) -> bool:
    return any(r is not None and not done[(u, s)] for u, r in wake.items() for s in slots)


def _run_epoch(ctx: Context, res: WakeupResult, timing: EpochTiming, slot: int, phase0: int,
               start: int, cohort: list[int], fast_forward: bool):
    sim = ctx.sim
    wake = res.wake_round
    sim.clock = start
    sim.asleep = {u for u, r in wake.items() if r is None or r >= start}
    bound = 2 ** slot
    tg_rounds, tc_rounds, _ = timing.procedure_rounds(slot)

    for u in cohort:
        res.transitions.append((u, slot, phase0, GROWING))
    forest = tree_grower(ctx, cohort, bound)
    for u in cohort:
        res.transitions.append((u, slot, phase0 + tg_rounds, CUTTING))
    stars, _ = tree_cutter(ctx, forest, bound, fast_forward=fast_forward)
    for u in cohort:
        res.transitions.append((u, slot, phase0 + tg_rounds + tc_rounds, PASSING))
    out = token_passing_transfer(ctx, stars, "wakeup", bound, participants=cohort,
                                 fast_forward=fast_forward)
    end_phase = (sim.clock - timing.epoch_start_round(0, slot)) // timing.rounds_per_phase
    for u in cohort:
        res.transitions.append((u, slot, end_phase, DONE))
    res.epochs_run.append((slot, phase0, len(cohort)))

    for v, r in out.woken.items():
        if wake[v] is None or r < wake[v]:
            wake[v] = r


def check_status_monotone(result: WakeupResult) -> list:
    """Per node and slot, statuses must appear in non-decreasing phase and value order."""
    bad = []
    last = {}
    for node, slot, phase, st in result.transitions:
        prev = last.get((node, slot))
        if prev is not None and (st < prev[1] or phase < prev[0]):
            bad.append((node, slot, phase, st))
        last[(node, slot)] = (phase, st)
    return bad


def check_epoch_alignment(result: WakeupResult) -> list:
    t = result.timing
    return [(node, slot, phase) for node, slot, phase, st in result.transitions
            if st == GROWING and phase % t.epoch_length(slot) != 0]
