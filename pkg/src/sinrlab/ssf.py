"""Strongly selective families: construction, verification and scheduling.

A family F_1..F_z over labels [1, N] is (N, c)-strongly selective when every
label x of every set S with |S| <= c is isolated (S & F_i == {x}) by some F_i.
Executed as a schedule, label u may transmit in step i only if u is in F_i.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

DEFAULT_C1_BUDGET = 4
DEFAULT_BUDGET_N = 64
DEFAULT_BUDGET_C = 4
STRATEGIES = ("greedy", "randomized_verified", "algebraic")


class SsfError(ValueError):
    pass


class Infeasible(SsfError):
    pass


class VerificationFailed(SsfError):
    pass


class BudgetExceeded(SsfError):
    pass


class OutOfRange(SsfError):
    pass


def log2_ceil(n: int) -> int:
    """ceil(log2 n), clamped to at least 1 so that formulas never collapse to zero."""
    return max(1, math.ceil(math.log2(n))) if n > 1 else 1


def subset_budget(n_labels: int = DEFAULT_BUDGET_N, selectivity: int = DEFAULT_BUDGET_C) -> int:
    return sum(math.comb(n_labels, j) for j in range(1, selectivity + 1))


DEFAULT_BUDGET = subset_budget()


@dataclass(frozen=True)
class SsfFamily:
    n_labels: int
    selectivity: int
    sets: tuple[frozenset, ...]
    strategy: str = "given"
    _index: dict = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        if not 1 <= self.selectivity:
            raise Infeasible("selectivity must be at least 1")
        for s in self.sets:
            if any(not 1 <= x <= self.n_labels for x in s):
                raise OutOfRange(f"set {sorted(s)} leaves [1, {self.n_labels}]")
        steps: dict[int, list[int]] = {}
        for i, s in enumerate(self.sets):
            for x in s:
                steps.setdefault(x, []).append(i)
        object.__setattr__(self, "_index", {k: tuple(v) for k, v in steps.items()})

    @property
    def length(self) -> int:
        return len(self.sets)

    @property
    def c1(self) -> int:
        """Per-family constant c1 = ceil(z / ceil(log2 N))."""
        return math.ceil(self.length / log2_ceil(self.n_labels))

    def steps_of(self, label: int) -> tuple[int, ...]:
        """0-indexed steps in which `label` is scheduled."""
        return self._index.get(label, ())

    def length_bound(self, c1_budget: int = DEFAULT_C1_BUDGET) -> int:
        return c1_budget * self.selectivity ** 2 * log2_ceil(self.n_labels)


def schedule_active(family: SsfFamily, label: int, step: int) -> bool:
    if not 1 <= label <= family.n_labels:
        raise OutOfRange(f"label {label} outside [1, {family.n_labels}]")
    if not 0 <= step < family.length:
        raise OutOfRange(f"step {step} outside [0, {family.length})")
    return label in family.sets[step]


@dataclass(frozen=True)
class Verdict:
    passed: bool
    witness_set: frozenset | None = None
    witness_label: int | None = None

    def __bool__(self):
        return self.passed


def _hitting_witness(candidates: list[frozenset], budget: int) -> list[int] | None:
    """Find at most `budget` labels hitting every candidate set, or None."""
    if not candidates:
        return []
    if budget == 0:
        return None
    # Branch on the smallest unhit set; each of its labels must be tried.
    target = min(candidates, key=lambda s: (len(s), sorted(s)))
    if not target:
        return None
    for y in sorted(target):
        rest = [s for s in candidates if y not in s]
        found = _hitting_witness(rest, budget - 1)
        if found is not None:
            return [y] + found
    return None


def verify_ssf(family: SsfFamily, mode: str = "exhaustive", trials: int = 2000,
               seed: int = 0, budget: int = DEFAULT_BUDGET) -> Verdict:
    """Check strong selectivity.

    Exhaustive mode is exact over every S with |S| <= c. Instead of enumerating
    the subsets it asks, for each x, whether c - 1 other labels can knock out
    every set containing x; such a blocking set plus x is the witness.
    """
    n, c = family.n_labels, family.selectivity
    if mode == "exhaustive":
        if c >= n:
            # Only S = [1, N] itself forces F_i == {x}, so every singleton must appear.
            singles = {next(iter(s)) for s in family.sets if len(s) == 1}
            for x in range(1, n + 1):
                if x not in singles:
                    return Verdict(False, frozenset(range(1, n + 1)), x)
            return Verdict(True)
        if subset_budget(n, c) > budget:
            raise BudgetExceeded(f"exhaustive check of N={n}, c={c} exceeds budget {budget}")
        for x in range(1, n + 1):
            blockers = [s - {x} for s in family.sets if x in s]
            if not blockers:
                return Verdict(False, frozenset({x}), x)
            hit = _hitting_witness(blockers, c - 1)
            if hit is not None:
                return Verdict(False, frozenset(hit) | {x}, x)
        return Verdict(True)
    if mode == "sampled":
        rng = random.Random(seed)
        labels = list(range(1, n + 1))
        for _ in range(trials):
            size = rng.randint(1, min(c, n))
            s = frozenset(rng.sample(labels, size))
            for x in sorted(s):
                if not any(s & f == {x} for f in family.sets):
                    return Verdict(False, s, x)
        return Verdict(True)
    raise ValueError(f"unknown verification mode {mode!r}")


def singletons(n_labels: int) -> tuple[frozenset, ...]:
    return tuple(frozenset({x}) for x in range(1, n_labels + 1))


def _requirements(n: int, c: int) -> tuple[np.ndarray, np.ndarray]:
    """Every (x, Y) pair with |Y| = c - 1 and x not in Y, as index arrays."""
    xs, ys = [], []
    for x in range(n):
        others = [y for y in range(n) if y != x]
        for combo in combinations(others, c - 1):
            xs.append(x)
            ys.append(combo)
    return np.array(xs, dtype=np.int64), np.array(ys, dtype=np.int64).reshape(len(xs), c - 1)


def _greedy_sets(n: int, c: int, limit: int) -> list[frozenset] | None:
    """Derandomized greedy cover by conditional expectations.

    Each new set is built label by label, keeping the choice that maximizes the
    expected number of newly satisfied (x, Y) requirements when the undecided
    labels are included with probability 1/c. Returns None once `limit` sets
    would be exceeded.
    """
    p = 1.0 / c
    xs, ys = _requirements(n, c)
    alive = np.ones(len(xs), dtype=bool)
    out: list[frozenset] = []
    while alive.any():
        if len(out) >= limit:
            return None
        ax, ay = xs[alive], ys[alive]
        # x_state: 0 undecided, 1 in, -1 out; undecided count of Y; killed if any Y in.
        x_state = np.zeros(len(ax), dtype=np.int8)
        y_undecided = np.full(len(ax), c - 1, dtype=np.int64)
        killed = np.zeros(len(ax), dtype=bool)
        chosen = set()
        for e in range(n):
            is_x = ax == e
            in_y = (ay == e).any(axis=1)

            def expected(include: bool) -> float:
                xs_ = np.where(is_x, 1 if include else -1, x_state)
                yu = y_undecided - in_y
                k = killed | (in_y & include)
                px = np.where(xs_ == 1, 1.0, np.where(xs_ == 0, p, 0.0))
                prob = px * (1 - p) ** yu
                prob[k] = 0.0
                return float(prob.sum())

            include = expected(True) > expected(False)
            x_state = np.where(is_x, 1 if include else -1, x_state).astype(np.int8)
            y_undecided = y_undecided - in_y
            if include:
                killed |= in_y
                chosen.add(e + 1)
        covered = (x_state == 1) & ~killed
        if not covered.any():
            # Cannot happen with a positive expectation, but guard against a stall.
            return None
        idx = np.flatnonzero(alive)
        alive[idx[covered]] = False
        out.append(frozenset(chosen))
    return out


def _primes_from(start: int):
    q = max(2, start)
    while True:
        if all(q % d for d in range(2, int(q ** 0.5) + 1)):
            yield q
        q += 1


def _algebraic_sets(n: int, c: int) -> list[frozenset]:
    """Polynomial (Kautz-Singleton style) superimposed code.

    Label x maps to the polynomial whose base-q digits are those of x - 1, of
    degree <= k. Set (a, b) holds every label whose polynomial takes value b at
    a. Two distinct polynomials agree on at most k points, so with q > (c-1)k
    some point a isolates x from any c - 1 others.
    """
    best = None
    for k in range(1, max(2, log2_ceil(n)) + 1):
        for q in _primes_from((c - 1) * k + 1):
            if q ** (k + 1) >= n:
                break
        if best is None or q < best[0]:
            best = (q, k)
    q, k = best
    values: dict[tuple[int, int], set[int]] = {}
    for x in range(1, n + 1):
        digits, v = [], x - 1
        for _ in range(k + 1):
            digits.append(v % q)
            v //= q
        for a in range(q):
            b = 0
            for coef in reversed(digits):
                b = (b * a + coef) % q
            values.setdefault((a, b), set()).add(x)
    return [frozenset(values[key]) for key in sorted(values)]


def _randomized_sets(n: int, c: int, seed: int, c1_budget: int) -> list[frozenset]:
    p = 1.0 / c
    q = p * (1 - p) ** (c - 1)
    reqs = n * math.comb(n - 1, c - 1)
    z = math.ceil((math.log(max(reqs, 2)) + math.log(n) + 5) / q)
    z = max(1, min(z, c1_budget * c * c * log2_ceil(n)))
    rng = np.random.default_rng(seed)
    draws = rng.random((z, n)) < p
    return [frozenset(int(i) + 1 for i in np.flatnonzero(row)) for row in draws]


def build_ssf(n_labels: int, selectivity: int, strategy: str = "greedy", *, seed: int = 0,
              c1_budget: int = DEFAULT_C1_BUDGET, retries: int = 32,
              budget: int = DEFAULT_BUDGET, sample_trials: int = 5000) -> SsfFamily:
    if n_labels < 1 or selectivity < 1:
        raise Infeasible("N and c must both be at least 1")
    if selectivity > n_labels:
        raise Infeasible(f"selectivity {selectivity} exceeds N = {n_labels}")
    n, c = n_labels, selectivity
    if strategy == "randomized":
        strategy = "randomized_verified"
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")

    if c == 1:
        return SsfFamily(n, c, (frozenset(range(1, n + 1)),), strategy)

    if strategy == "greedy":
        if c >= n:
            sets = singletons(n)
        else:
            p = 1.0 / c
            reqs = n * math.comb(n - 1, c - 1)
            guaranteed = math.log(reqs) / (p * (1 - p) ** (c - 1))
            found = None
            if guaranteed < 2 * n:
                found = _greedy_sets(n, c, limit=n)
            sets = tuple(found) if found is not None and len(found) < n else singletons(n)
        return SsfFamily(n, c, tuple(sets), strategy)

    if strategy == "algebraic":
        return SsfFamily(n, c, tuple(_algebraic_sets(n, c)), strategy)

    for attempt in range(retries):
        fam = SsfFamily(n, c, tuple(_randomized_sets(n, c, seed + attempt, c1_budget)), strategy)
        exhaustive = n <= DEFAULT_BUDGET_N and (c >= n or subset_budget(n, c) <= budget)
        mode = "exhaustive" if exhaustive else "sampled"
        if verify_ssf(fam, mode=mode, trials=sample_trials, seed=seed, budget=budget):
            return fam
    raise VerificationFailed(f"no verified family for N={n}, c={c} after {retries} draws")


@dataclass(frozen=True)
class DilutionConfig:
    k_density: int = 1000
    d_silence: int = 2

    def __post_init__(self):
        if self.k_density < 1:
            raise ValueError("k_density must be at least 1")
        if self.d_silence < 1:
            raise ValueError("d_silence must be at least 1")

    @property
    def c_derived(self) -> int:
        return self.k_density ** 2 * (2 * self.d_silence + 1) ** 2


def protocol_family(n_labels: int, dilution: DilutionConfig, strategy: str = "greedy",
                    seed: int = 0) -> SsfFamily:
    """Family used as the shared transmission schedule by every protocol.

    When the derived selectivity reaches N, an (N, N) family already isolates
    every subset of [1, N], so the selectivity is capped at N.
    """
    c = min(dilution.c_derived, n_labels)
    return build_ssf(n_labels, c, strategy, seed=seed)


def dumps(family: SsfFamily) -> str:
    lines = [f"{family.n_labels} {family.selectivity} {family.length}"]
    lines += [" ".join(str(x) for x in sorted(s)) for s in family.sets]
    return "\n".join(lines) + "\n"


def loads(text: str) -> SsfFamily:
    rows = text.split("\n")
    if rows and rows[-1] == "":
        rows = rows[:-1]
    n, c, z = (int(v) for v in rows[0].split())
    body = rows[1:]
    if len(body) != z:
        raise ValueError(f"header promises {z} sets, found {len(body)}")
    sets = tuple(frozenset(int(v) for v in line.split()) for line in body)
    return SsfFamily(n, c, sets, "loaded")
