"""Minimal unsatisfiable subset extraction over the soft clauses of a WCNF.

All extractors work on one incremental solver where each distinct soft
clause is guarded by a fresh selector variable, so a subset query is a
single assumption call and learned clauses carry over between queries.
Duplicate soft clauses are collapsed to their first occurrence; results
are reported in terms of original soft-clause indices.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import EmptySetMember, SatisfiableInput
from .logic import CdclSolver, SatResult, WcnfFormula


@dataclass(frozen=True)
class MusResult:
    """A minimal unsatisfiable subset of soft-clause indices.

    ``H ∪ mus`` is unsatisfiable while every proper subset of ``mus`` is
    satisfiable together with the hard clauses.
    """

    mus: frozenset[int]
    oracle_calls: int
    elapsed: float


class _SelectorHarness:
    """One solver; soft clause i is active iff its selector is assumed."""

    def __init__(self, formula: WcnfFormula):
        self.formula = formula
        self.slot_clauses = []  # deduped clauses
        self.slot_members: list[list[int]] = []  # original indices per slot
        key_to_slot: dict[frozenset[int], int] = {}
        self.orig_to_slot: list[int] = []
        for idx, clause in enumerate(formula.soft):
            key = frozenset(clause.literals)
            slot = key_to_slot.get(key)
            if slot is None:
                slot = len(self.slot_clauses)
                key_to_slot[key] = slot
                self.slot_clauses.append(clause)
                self.slot_members.append([])
            self.slot_members[slot].append(idx)
            self.orig_to_slot.append(slot)

        self.solver = CdclSolver(formula.num_vars)
        for clause in formula.hard:
            self.solver.add_clause(clause.literals)
        self.selectors = []
        for clause in self.slot_clauses:
            sel = self.solver.new_var()
            self.selectors.append(sel)
            self.solver.add_clause(tuple(clause.literals) + (-sel,))
        self.calls = 0

    @property
    def num_slots(self) -> int:
        return len(self.slot_clauses)

    def check(self, slots: Iterable[int]) -> SatResult:
        self.calls += 1
        return self.solver.solve([self.selectors[s] for s in sorted(slots)])

    def satisfied_slots(self, model: tuple[bool, ...]) -> set[int]:
        """Slots whose clause is true under a model of the original variables."""
        out = set()
        for slot, clause in enumerate(self.slot_clauses):
            if any((lit > 0) == model[abs(lit) - 1] for lit in clause):
                out.add(slot)
        return out

    def representatives(self, slots: Iterable[int]) -> frozenset[int]:
        return frozenset(self.slot_members[s][0] for s in slots)

    def expand(self, slots: Iterable[int]) -> frozenset[int]:
        return frozenset(i for s in slots for i in self.slot_members[s])

    def require_unsat(self) -> None:
        if self.check(range(self.num_slots)).satisfiable:
            raise SatisfiableInput("hard and soft clauses together are satisfiable")


def deletion_mus(formula: WcnfFormula, order: Sequence[int] | None = None) -> MusResult:
    """Linear deletion-based MUS extraction.

    Soft clauses are dropped one at a time in ``order`` (original indices,
    natural order by default); a clause stays out whenever the remainder is
    still unsatisfiable. Deterministic for a fixed order.
    """
    start = time.perf_counter()
    harness = _SelectorHarness(formula)
    harness.require_unsat()

    if order is None:
        order = range(len(formula.soft))
    slot_order: list[int] = []
    queued = set()
    for idx in order:
        slot = harness.orig_to_slot[idx]
        if slot not in queued:
            queued.add(slot)
            slot_order.append(slot)

    active = set(range(harness.num_slots))
    for slot in slot_order:
        candidate = active - {slot}
        if not harness.check(candidate).satisfiable:
            active = candidate
    return MusResult(
        mus=harness.representatives(active),
        oracle_calls=harness.calls,
        elapsed=time.perf_counter() - start,
    )


def enumerate_mcs(formula: WcnfFormula, limit: int) -> list[frozenset[int]]:
    """Enumerate up to ``limit`` distinct minimal correction sets.

    Each MCS is the complement of a maximal satisfiable subset, grown by
    single-reinsertion checks, and found MCSes are blocked inside the
    solver so enumeration never repeats one.
    """
    if limit < 1:
        raise ValueError("limit must be >= 1")
    harness = _SelectorHarness(formula)
    harness.require_unsat()

    found: list[frozenset[int]] = []
    while len(found) < limit:
        result = harness.check(())
        if not result.satisfiable:
            break
        mss = _grow_mss(harness, harness.satisfied_slots(result.model))
        mcs_slots = set(range(harness.num_slots)) - mss
        found.append(harness.expand(mcs_slots))
        # Block this MCS: some clause of it must be satisfied from now on.
        harness.solver.add_clause([harness.selectors[s] for s in sorted(mcs_slots)])
    return found


def _grow_mss(harness: _SelectorHarness, seed: set[int]) -> set[int]:
    current = set(seed)
    for slot in range(harness.num_slots):
        if slot in current:
            continue
        if harness.check(current | {slot}).satisfiable:
            current.add(slot)
    return current


def smallest_mus(formula: WcnfFormula) -> MusResult:
    """Cardinality-minimal MUS by implicit hitting-set dualization.

    Alternates between a minimum hitting set of the correction sets found
    so far and a satisfiability test of that hitting set: a satisfiable
    test grows a fresh MCS disjoint from it, an unsatisfiable one proves
    the hitting set is a smallest MUS.
    """
    start = time.perf_counter()
    harness = _SelectorHarness(formula)
    harness.require_unsat()

    mcses: list[frozenset[int]] = []
    while True:
        hs = min_hitting_set(mcses) if mcses else frozenset()
        result = harness.check(hs)
        if not result.satisfiable:
            return MusResult(
                mus=harness.representatives(hs),
                oracle_calls=harness.calls,
                elapsed=time.perf_counter() - start,
            )
        mss = _grow_mss(harness, harness.satisfied_slots(result.model))
        mcses.append(frozenset(set(range(harness.num_slots)) - mss))


def min_hitting_set(sets: Sequence[Iterable[int]]) -> frozenset[int]:
    """Minimum-cardinality set intersecting every input set.

    Branch and bound seeded with the greedy cover as the upper bound; ties
    between equal-size solutions are broken toward the lexicographically
    smallest index tuple.
    """
    family = []
    for s in sets:
        fs = frozenset(s)
        if not fs:
            raise EmptySetMember("hitting-set instance contains an empty set")
        family.append(fs)
    family = list(dict.fromkeys(family))
    if not family:
        return frozenset()
    # Supersets of another member are hit whenever the subset is.
    family.sort(key=len)
    reduced: list[frozenset[int]] = []
    for fs in family:
        if not any(kept <= fs for kept in reduced):
            reduced.append(fs)
    family = reduced
    universe = sorted(set().union(*family))

    greedy = _greedy_cover(family)
    best_size = len(greedy)

    # Exact minimum size by branch and bound.
    def search(chosen: set[int], remaining: list[frozenset[int]]) -> None:
        nonlocal best_size
        if not remaining:
            best_size = min(best_size, len(chosen))
            return
        if len(chosen) + 1 >= best_size:
            return
        target = min(remaining, key=lambda s: (len(s), sorted(s)))
        for element in sorted(target):
            chosen.add(element)
            search(chosen, [s for s in remaining if element not in s])
            chosen.remove(element)

    search(set(), family)

    for combo in itertools.combinations(universe, best_size):
        combo_set = frozenset(combo)
        if all(combo_set & s for s in family):
            return combo_set
    raise AssertionError("branch and bound bound was not achievable")


def _greedy_cover(family: list[frozenset[int]]) -> set[int]:
    uncovered = list(family)
    chosen: set[int] = set()
    while uncovered:
        counts: dict[int, int] = {}
        for s in uncovered:
            for element in s:
                counts[element] = counts.get(element, 0) + 1
        element = min(counts, key=lambda e: (-counts[e], e))
        chosen.add(element)
        uncovered = [s for s in uncovered if element not in s]
    return chosen
