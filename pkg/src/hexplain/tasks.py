"""Symbolic task evaluation and minimal symbolic explanations.

Three task families are supported: lexicographic comparison of two binary
numbers, membership in one of two fixed regular languages, and shortest
grid paths for a Pacman-style puzzle. All of them consume a tuple of
per-input labels (the neural predictions) and produce a decision; the
explainers find a minimal set of label positions that entails it.
"""

from __future__ import annotations

import itertools
import math
import re
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import (
    InconsistentDecision,
    InternalInvariantError,
    MalformedInput,
    UnsupportedMode,
)
from .logic import Clause, LexComparatorSpec, WcnfFormula, encode_comparator, solve
from .mus import smallest_mus

# Pacman cell classes, in the order the cell classifier emits them.
EMPTY, GHOST, ACTOR, FLAG = 0, 1, 2, 3

UNREACHABLE = math.inf

# Free completions are enumerated up to this many inputs; beyond it the
# lex/regex sufficiency check switches to a SAT encoding.
ENUMERATION_LIMIT = 12

Labels = tuple[int, ...]


@dataclass(frozen=True)
class TaskSpec:
    """One benchmark family instance: kind, arity, and family parameters."""

    kind: str  # "lex" | "regex" | "pacman"
    n: int
    pattern: str | None = None  # regex only: "R1" | "R2"
    width: int = 0  # pacman only
    height: int = 0

    def __post_init__(self):
        if self.kind == "lex":
            if self.n < 2 or self.n % 2:
                raise MalformedInput("lex tasks need an even number of inputs")
        elif self.kind == "regex":
            if self.n < 1:
                raise MalformedInput("regex tasks need at least one input")
            if self.pattern not in ("R1", "R2"):
                raise MalformedInput(f"unknown pattern {self.pattern!r}")
        elif self.kind == "pacman":
            if self.width < 1 or self.height < 1 or self.n != self.width * self.height:
                raise MalformedInput("pacman tasks need n == width * height")
        else:
            raise MalformedInput(f"unknown task kind {self.kind!r}")

    @classmethod
    def lex(cls, n: int) -> "TaskSpec":
        return cls("lex", n)

    @classmethod
    def regex(cls, pattern: str, n: int) -> "TaskSpec":
        return cls("regex", n, pattern=pattern)

    @classmethod
    def pacman(cls, width: int = 5, height: int = 5) -> "TaskSpec":
        return cls("pacman", width * height, width=width, height=height)

    @classmethod
    def from_string(cls, name: str) -> "TaskSpec":
        """Parse benchmark names: lex1-6, regexp-1-8, pacman-sp, pacman-4x4."""
        name = name.lower()
        if match := re.fullmatch(r"lex1-(\d+)", name):
            return cls.lex(int(match.group(1)))
        if match := re.fullmatch(r"regexp-([12])-(\d+)", name):
            return cls.regex(f"R{match.group(1)}", int(match.group(2)))
        if name == "pacman-sp":
            return cls.pacman(5, 5)
        if match := re.fullmatch(r"pacman-(\d+)x(\d+)", name):
            return cls.pacman(int(match.group(1)), int(match.group(2)))
        raise MalformedInput(f"unknown task name {name!r}")

    def to_string(self) -> str:
        if self.kind == "lex":
            return f"lex1-{self.n}"
        if self.kind == "regex":
            return f"regexp-{self.pattern[1]}-{self.n}"
        if (self.width, self.height) == (5, 5):
            return "pacman-sp"
        return f"pacman-{self.width}x{self.height}"

    @property
    def num_classes(self) -> int:
        return 4 if self.kind == "pacman" else 2

    @property
    def label_names(self) -> tuple[str, ...]:
        return ("E", "G", "P", "F") if self.kind == "pacman" else ("0", "1")


def check_labels(task: TaskSpec, labels: Sequence[int]) -> Labels:
    labels = tuple(int(v) for v in labels)
    if len(labels) != task.n:
        raise MalformedInput(f"expected {task.n} labels, got {len(labels)}")
    if any(v < 0 or v >= task.num_classes for v in labels):
        raise MalformedInput("label out of range for task")
    if task.kind == "pacman":
        if labels.count(ACTOR) != 1 or labels.count(FLAG) != 1:
            raise MalformedInput(
                "pacman grid must contain exactly one actor and one flag"
            )
    return labels


# ----------------------------------------------------------------------
# decision <-> class index mapping (for whole-instance baseline models)


def decision_class_count(task: TaskSpec) -> int:
    """Number of decision classes: 2 for the boolean tasks; path lengths
    1..n-1 plus Unreachable for pacman."""
    return task.n if task.kind == "pacman" else 2


def decision_to_class(task: TaskSpec, decision) -> int:
    if task.kind != "pacman":
        return int(bool(decision))
    if decision == UNREACHABLE:
        return task.n - 1
    return int(decision) - 1


def class_to_decision(task: TaskSpec, index: int):
    if task.kind != "pacman":
        return bool(index)
    if index == task.n - 1:
        return UNREACHABLE
    return index + 1


# ----------------------------------------------------------------------
# evaluation


def eval_task(task: TaskSpec, labels: Sequence[int]):
    """Evaluate the symbolic function on a label tuple."""
    labels = check_labels(task, labels)
    if task.kind == "lex":
        half = task.n // 2
        return _bits_value(labels[:half]) > _bits_value(labels[half:])
    if task.kind == "regex":
        return _in_language(task.pattern, labels)
    return shortest_path(task, labels)


def _bits_value(bits: Sequence[int]) -> int:
    value = 0
    for bit in bits:
        value = (value << 1) | bit
    return value


def _has_pair(bits: Sequence[int], digit: int) -> bool:
    return any(a == digit and b == digit for a, b in zip(bits, bits[1:]))


def _in_language(pattern: str, bits: Sequence[int]) -> bool:
    # Full-string membership; conditions are independent, so "contains"
    # may overlap the first or last position.
    if pattern == "R1":
        return bits[0] == 1 and _has_pair(bits, 1) and bits[-1] == 0
    return (bits[0] == 0 and _has_pair(bits, 1)) or (
        bits[-1] == 1 and _has_pair(bits, 0)
    )


def shortest_path(task: TaskSpec, labels: Sequence[int]):
    """BFS length of the shortest actor-to-flag path avoiding ghosts.

    Returns UNREACHABLE (+inf) when no path exists, which keeps the
    ghost-removal monotonicity usable as a plain <= on the result.
    """
    labels = check_labels(task, labels)
    if task.kind != "pacman":
        raise MalformedInput("shortest_path is a pacman operation")
    width, height = task.width, task.height
    start = labels.index(ACTOR)
    goal = labels.index(FLAG)
    dist = {start: 0}
    queue = deque([start])
    while queue:
        cell = queue.popleft()
        if cell == goal:
            return dist[cell]
        row, col = divmod(cell, width)
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            nr, nc = row + dr, col + dc
            if 0 <= nr < height and 0 <= nc < width:
                neighbour = nr * width + nc
                if labels[neighbour] != GHOST and neighbour not in dist:
                    dist[neighbour] = dist[cell] + 1
                    queue.append(neighbour)
    return UNREACHABLE


# ----------------------------------------------------------------------
# sufficiency of a fixed index set


def sufficient(task: TaskSpec, labels: Sequence[int], fixed: Iterable[int], decision) -> bool:
    """Does fixing ``fixed`` label positions entail the decision?

    Lex/regex quantify over all 0/1 completions of the free positions
    (enumerated, or via SAT above ENUMERATION_LIMIT inputs). Pacman keeps
    the actor and flag pinned and only lets free ghost cells revert to
    empty, so the check is a single path query on the ghost-stripped grid;
    a result that drops the actor or flag from the fixed set never counts
    as sufficient, as the path length always depends on their positions.
    """
    labels = check_labels(task, labels)
    fixed = frozenset(fixed)
    if any(i < 0 or i >= task.n for i in fixed):
        raise MalformedInput("fixed index out of range")

    if task.kind == "pacman":
        if labels.index(ACTOR) not in fixed or labels.index(FLAG) not in fixed:
            return False
        stripped = tuple(
            EMPTY if (value == GHOST and i not in fixed) else value
            for i, value in enumerate(labels)
        )
        return shortest_path(task, stripped) >= decision

    if task.n <= ENUMERATION_LIMIT:
        free = [i for i in range(task.n) if i not in fixed]
        trial = list(labels)
        for completion in itertools.product((0, 1), repeat=len(free)):
            for position, bit in zip(free, completion):
                trial[position] = bit
            if eval_task(task, tuple(trial)) != decision:
                return False
        return True
    return _sufficient_sat(task, labels, fixed, decision)


def _sufficient_sat(task: TaskSpec, labels: Labels, fixed: frozenset[int], decision: bool) -> bool:
    """SAT check: fixed units plus the negated-decision encoding must be unsat."""
    num_vars, clauses = _negated_decision_cnf(task, decision)
    units = tuple(
        Clause((i + 1 if labels[i] else -(i + 1),)) for i in sorted(fixed)
    )
    formula = WcnfFormula(num_vars, tuple(clauses) + units)
    return not solve(formula).satisfiable


def _negated_decision_cnf(task: TaskSpec, decision: bool) -> tuple[int, list[Clause]]:
    """CNF over position variables 1..n asserting eval != decision."""
    if task.kind == "lex":
        half = task.n // 2
        first = tuple(range(1, half + 1))
        second = tuple(range(half + 1, task.n + 1))
        if decision:
            # Negation of "first > second" is "second >= first".
            spec = LexComparatorSpec(half, second, first, strict=False)
        else:
            spec = LexComparatorSpec(half, first, second, strict=True)
        enc = encode_comparator(spec, first_aux=task.n + 1)
        return enc.num_vars, list(enc.clauses)
    if task.kind == "regex":
        num_vars, clauses, member = _language_cnf(task.pattern, task.n)
        clauses.append(Clause((-member if decision else member,)))
        return num_vars, clauses
    raise UnsupportedMode("SAT sufficiency is only defined for lex and regex tasks")


def _language_cnf(pattern: str, n: int) -> tuple[int, list[Clause], int]:
    """Tseitin encoding of language membership over bit variables 1..n.

    Returns (num_vars, clauses, membership_literal); the membership
    variable is equivalent to the verbal language conditions, so either
    polarity may be asserted on top.
    """
    next_var = n + 1
    clauses: list[Clause] = []

    def fresh() -> int:
        nonlocal next_var
        var = next_var
        next_var += 1
        return var

    def define_and(lits: Sequence[int]) -> int:
        gate = fresh()
        for lit in lits:
            clauses.append(Clause((-gate, lit)))
        clauses.append(Clause((gate,) + tuple(-lit for lit in lits)))
        return gate

    def define_or(lits: Sequence[int]) -> int:
        gate = fresh()
        clauses.append(Clause((-gate,) + tuple(lits)))
        for lit in lits:
            clauses.append(Clause((gate, -lit)))
        return gate

    def contains_pair(digit: int) -> int:
        pairs = []
        for i in range(1, n):
            a = i if digit else -i
            b = i + 1 if digit else -(i + 1)
            pairs.append(define_and((a, b)))
        return define_or(pairs) if len(pairs) > 1 else pairs[0]

    if pattern == "R1":
        member = define_and((1, contains_pair(1), -n))
    else:
        left = define_and((-1, contains_pair(1)))
        right = define_and((n, contains_pair(0)))
        member = define_or((left, right))
    return next_var - 1, clauses, member


# ----------------------------------------------------------------------
# minimal symbolic explanations


def explain_symbolic(task: TaskSpec, labels: Sequence[int], decision, mode: str = "deletion") -> frozenset[int]:
    """Subset-minimal set of label positions entailing the decision.

    ``deletion`` walks the positions in index order (pacman: ghosts in
    raster order, with the actor and flag always kept) and drops every
    one whose removal keeps the set sufficient. ``smallest-mus`` is the
    lex-only cardinality-minimal route through the comparator encoding.
    """
    labels = check_labels(task, labels)
    if eval_task(task, labels) != decision:
        raise InconsistentDecision(
            f"task evaluates to {eval_task(task, labels)}, not {decision}"
        )

    if mode == "smallest-mus":
        if task.kind != "lex":
            raise UnsupportedMode("smallest-mus explanations are lex-only")
        explanation = _explain_lex_smallest(task, labels, decision)
    elif mode == "deletion":
        explanation = _explain_deletion(task, labels, decision)
    else:
        raise UnsupportedMode(f"unknown mode {mode!r}")

    if not sufficient(task, labels, explanation, decision):
        raise InternalInvariantError("explanation is not sufficient")
    for index in explanation:
        if sufficient(task, labels, explanation - {index}, decision):
            raise InternalInvariantError("explanation is not minimal")
    return explanation


def _explain_deletion(task: TaskSpec, labels: Labels, decision) -> frozenset[int]:
    if task.kind == "pacman":
        anchors = {labels.index(ACTOR), labels.index(FLAG)}
        candidates = [i for i, v in enumerate(labels) if v == GHOST]
        current = anchors | set(candidates)
    else:
        anchors = set()
        candidates = list(range(task.n))
        current = set(candidates)
    for index in candidates:
        trial = current - {index}
        if sufficient(task, labels, trial, decision):
            current = trial
    return frozenset(current)


def _explain_lex_smallest(task: TaskSpec, labels: Labels, decision: bool) -> frozenset[int]:
    num_vars, clauses = _negated_decision_cnf(task, decision)
    soft = tuple(
        Clause((i + 1 if labels[i] else -(i + 1),)) for i in range(task.n)
    )
    formula = WcnfFormula(num_vars, tuple(clauses), soft)
    return frozenset(smallest_mus(formula).mus)
