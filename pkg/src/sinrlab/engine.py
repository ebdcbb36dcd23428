"""Round-synchronous executor with SINR ground-truth deliveries and a sparse trace."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .sinr import REL_TOL, SinrParams, Station, build_comm_graph, gain_matrix
from .ssf import SsfFamily, log2_ceil

DEFAULT_CAP_CONST = 64
COUNTER_BITS = 64
WAKEUP = "wakeup"


class EngineError(RuntimeError):
    pass


class PayloadTooLarge(EngineError):
    pass


class DuplicateDelivery(EngineError):
    pass


class RoundBudgetExceeded(EngineError):
    pass


class AsleepTransmitter(EngineError):
    pass


def payload_cap(delta: int, n_labels: int, cap_const: int = DEFAULT_CAP_CONST) -> int:
    return cap_const * max(1, delta) * log2_ceil(n_labels) ** 2


@dataclass(frozen=True)
class FieldSizes:
    """Bit-cost model: labels take ceil(log2 N) bits, counters 64 bits."""

    n_labels: int
    schedule_length: int = 1

    @property
    def label(self) -> int:
        return log2_ceil(self.n_labels)

    @property
    def step(self) -> int:
        return log2_ceil(max(2, self.schedule_length))

    counter: int = COUNTER_BITS
    kind: int = 2

    def labels(self, count: int) -> int:
        return count * self.label


@dataclass(frozen=True)
class Payload:
    kind: str
    sender: int
    body: Any
    size_bits: int


class Listen:
    def __repr__(self):
        return "Listen"


class Idle:
    def __repr__(self):
        return "Idle"


LISTEN = Listen()
IDLE = Idle()


@dataclass(frozen=True)
class Transmit:
    payload: Payload


@dataclass(frozen=True)
class RoundRecord:
    round: int
    transmissions: tuple  # (label, kind, bits)
    deliveries: tuple  # (listener, sender, kind, bits)


@dataclass(frozen=True)
class RepeatRecord:
    """Records [first, last) replayed `count` more times, each shifted by `shift` rounds."""

    first: int
    last: int
    shift: int
    count: int


@dataclass
class SimTrace:
    records: list = field(default_factory=list)
    total_rounds: int = 0
    messages_sent: int = 0
    max_payload_bits: int = 0
    deliveries: int = 0

    def iter_rounds(self) -> Iterator[RoundRecord]:
        """Expanded round records in trace order (repeats unrolled)."""
        for i, rec in enumerate(self.records):
            if isinstance(rec, RoundRecord):
                yield rec
            else:
                block = self.records[rec.first:rec.last]
                for k in range(1, rec.count + 1):
                    for r in block:
                        if isinstance(r, RoundRecord):
                            yield RoundRecord(r.round + k * rec.shift, r.transmissions, r.deliveries)

    def export_lines(self) -> Iterator[str]:
        yield "round,actor,action,peer,payload_kind,payload_bits"
        for i, rec in enumerate(self.records):
            if isinstance(rec, RepeatRecord):
                # Compact form: replay records [first,last) `count` times every `shift` rounds.
                yield f"{rec.shift},-,repeat,{rec.first}:{rec.last},{rec.count},0"
                continue
            for label, kind, bits in rec.transmissions:
                yield f"{rec.round},{label},transmit,,{kind},{bits}"
            for listener, sender, kind, bits in rec.deliveries:
                yield f"{rec.round},{listener},receive,{sender},{kind},{bits}"

    def export(self) -> str:
        return "\n".join(self.export_lines()) + "\n"

    def digest(self) -> str:
        h = hashlib.sha256()
        for line in self.export_lines():
            h.update(line.encode())
            h.update(b"\n")
        h.update(f"total={self.total_rounds}".encode())
        return h.hexdigest()


@dataclass(frozen=True)
class SimClock:
    """Phase/slot coordinates of a round in the Wakeup time-multiplexing."""

    round: int
    slot_count: int

    @property
    def rounds_per_phase(self) -> int:
        return 3 * self.slot_count

    @property
    def phase(self) -> int:
        return self.round // self.rounds_per_phase

    @property
    def slot(self) -> int:
        return (self.round % self.rounds_per_phase) // 3 + 1

    @property
    def offset(self) -> int:
        return self.round % 3

    @classmethod
    def at(cls, phase: int, slot: int, offset: int, slot_count: int) -> "SimClock":
        return cls(phase * 3 * slot_count + (slot - 1) * 3 + offset, slot_count)


@dataclass(frozen=True)
class Mark:
    clock: int
    records: int
    messages: int
    deliveries: int


class Simulator:
    """Executes rounds over a fixed station set.

    `clock` is the physical round of the next virtual round; `stride` is how many
    physical rounds separate consecutive virtual rounds (1 outside Wakeup).
    """

    def __init__(self, stations: Sequence[Station], params: SinrParams, n_labels: int,
                 cap_const: int = DEFAULT_CAP_CONST):
        self.stations = list(stations)
        self.params = params
        self.n_labels = n_labels
        self.labels = [s.label for s in self.stations]
        self.index = {s.label: i for i, s in enumerate(self.stations)}
        self.by_label = {s.label: s for s in self.stations}
        self.gains = gain_matrix(self.stations, params) if self.stations else np.zeros((0, 0))
        self.graph = build_comm_graph(self.stations, params)
        self.cap = payload_cap(self.graph.max_degree, n_labels, cap_const)
        self.trace = SimTrace()
        self.clock = 0
        self.stride = 1
        self.asleep: set[int] = set()
        self.max_rounds: int | None = None

    def _tick(self, rounds: int):
        self.trace.total_rounds += rounds
        if self.max_rounds is not None and self.trace.total_rounds > self.max_rounds:
            raise RoundBudgetExceeded(
                f"{self.trace.total_rounds} rounds exceed max_rounds={self.max_rounds}")

    # ----------------------------------------------------------------- rounds
    def _deliver(self, transmitters: Mapping[int, Payload], listeners: Iterable[int]) -> dict[int, Payload]:
        tx = sorted(transmitters)
        rx = [v for v in sorted(set(listeners)) if v not in transmitters]
        if not tx or not rx:
            return {}
        ti = np.array([self.index[u] for u in tx])
        ri = np.array([self.index[v] for v in rx])
        sig = self.gains[np.ix_(ti, ri)]
        total = self.params.noise + sig.sum(axis=0)
        boosted = sig * (1 + REL_TOL)
        ok = (boosted >= self.params.beta * (total - sig)) & (boosted >= self.params.sensitivity_floor)
        counts = ok.sum(axis=0)
        if np.any(counts > 1):
            j = int(np.flatnonzero(counts > 1)[0])
            raise DuplicateDelivery(f"listener {rx[j]} decoded several senders in round {self.clock}")
        out = {}
        for j in np.flatnonzero(counts):
            sender = tx[int(np.argmax(ok[:, j]))]
            payload = transmitters[sender]
            listener = rx[int(j)]
            if listener in self.asleep and payload.kind != WAKEUP:
                continue
            out[listener] = payload
        return out

    def _record(self, physical: int, transmitters: Mapping[int, Payload], got: Mapping[int, Payload]):
        for u, p in transmitters.items():
            if u in self.asleep:
                raise AsleepTransmitter(f"asleep node {u} scheduled to transmit")
            if p.size_bits > self.cap:
                raise PayloadTooLarge(f"{p.kind} from {u}: {p.size_bits} bits > cap {self.cap}")
            self.trace.max_payload_bits = max(self.trace.max_payload_bits, p.size_bits)
        self.trace.messages_sent += len(transmitters)
        self.trace.deliveries += len(got)
        self.trace.records.append(RoundRecord(
            physical,
            tuple((u, p.kind, p.size_bits) for u, p in sorted(transmitters.items())),
            tuple((v, p.sender, p.kind, p.size_bits) for v, p in sorted(got.items())),
        ))

    def step(self, actions: Mapping[int, Any]) -> dict[int, Payload]:
        """Run one round. The returned deliveries become visible in the next round."""
        transmitters = {u: a.payload for u, a in actions.items() if isinstance(a, Transmit)}
        listeners = [u for u, a in actions.items() if a is LISTEN] + sorted(self.asleep)
        got = self._deliver(transmitters, listeners)
        if transmitters:
            self._record(self.clock, transmitters, got)
        self.clock += self.stride
        self._tick(1)
        return got

    def execute(self, family: SsfFamily, intents: Mapping[int, Payload],
                listeners: Iterable[int]) -> dict[int, list[tuple[int, Payload]]]:
        """One full schedule execution.

        Each intent holder transmits in the steps its label is scheduled in and
        listens otherwise; every label in `listeners` (plus asleep nodes) listens
        whenever it is not transmitting. Silent steps are skipped in bulk since
        nothing can be delivered in them. Returns, per listener, the (step, payload)
        pairs it decoded, available once the execution has ended.
        """
        listeners = set(listeners) | set(intents) | self.asleep
        start = self.clock
        steps: dict[int, dict[int, Payload]] = {}
        for u, p in intents.items():
            for s in family.steps_of(u):
                steps.setdefault(s, {})[u] = p
        heard: dict[int, list[tuple[int, Payload]]] = {}
        for s in sorted(steps):
            tx = steps[s]
            got = self._deliver(tx, listeners)
            self._record(start + s * self.stride, tx, got)
            for v, p in got.items():
                heard.setdefault(v, []).append((s, p))
        self.clock = start + family.length * self.stride
        self._tick(family.length)
        return heard

    def execute_stepwise(self, family: SsfFamily, decide, listeners: Iterable[int]):
        """Execution whose transmitters may depend on what was heard in earlier steps.

        `decide(step, heard_so_far)` returns {label: payload} for labels that want
        to transmit at `step`; it is only called for steps listed by
        `decide.candidate_steps`, which must cover every step anyone could use.
        """
        listeners = set(listeners) | self.asleep
        start = self.clock
        heard: dict[int, list[tuple[int, Payload]]] = {}
        for s in sorted(set(decide.candidate_steps)):
            if not 0 <= s < family.length:
                continue
            tx = {u: p for u, p in decide(s, heard).items() if s in family.steps_of(u)}
            if not tx:
                continue
            got = self._deliver(tx, listeners | set(tx))
            self._record(start + s * self.stride, tx, got)
            for v, p in got.items():
                heard.setdefault(v, []).append((s, p))
        self.clock = start + family.length * self.stride
        self._tick(family.length)
        return heard

    def idle(self, rounds: int):
        self.clock += rounds * self.stride
        self._tick(rounds)

    # -------------------------------------------------------- fast-forwarding
    def mark(self) -> Mark:
        t = self.trace
        return Mark(self.clock, len(t.records), t.messages_sent, t.deliveries)

    def replay(self, start: Mark, end: Mark, count: int):
        """Account for `count` further repetitions of the rounds between two marks.

        Only valid when the protocol state at `end` equals that at `start`, so
        that the repeated block is provably identical.
        """
        if count <= 0:
            return
        span = end.clock - start.clock
        t = self.trace
        if end.records > start.records:
            t.records.append(RepeatRecord(start.records, end.records, span, count))
        t.messages_sent += count * (end.messages - start.messages)
        t.deliveries += count * (end.deliveries - start.deliveries)
        self.clock += count * span
        self._tick(count * (span // self.stride))


def run(protocol, stations: Sequence[Station], params: SinrParams, max_rounds: int | None = None,
        **kwargs):
    """Run a protocol callable `protocol(sim, **kwargs)` and enforce a round budget."""
    n_labels = kwargs.pop("n_labels", max((s.label for s in stations), default=1))
    sim = Simulator(stations, params, n_labels, cap_const=kwargs.pop("cap_const", DEFAULT_CAP_CONST))
    sim.max_rounds = max_rounds
    result = protocol(sim, **kwargs)
    return sim.trace, result
