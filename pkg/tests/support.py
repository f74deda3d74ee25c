"""Shared generators and brute-force oracles used across the test suite."""

import itertools

from hexplain.logic import Clause, LexComparatorSpec, WcnfFormula, encode_comparator, solve


def random_clause(rng, num_vars, width):
    variables = rng.sample(range(1, num_vars + 1), width)
    return Clause(tuple(v if rng.random() < 0.5 else -v for v in variables))


def random_unsat_wcnf(rng, max_vars=8, max_soft=12):
    """A random WCNF with satisfiable hard part and unsatisfiable H ∪ S."""
    while True:
        num_vars = rng.randint(3, max_vars)
        hard = tuple(
            random_clause(rng, num_vars, rng.randint(2, min(3, num_vars)))
            for _ in range(rng.randint(0, 4))
        )
        soft = tuple(
            random_clause(rng, num_vars, rng.randint(1, 2))
            for _ in range(rng.randint(2, max_soft))
        )
        formula = WcnfFormula(num_vars, hard, soft)
        if not solve(WcnfFormula(num_vars, hard)).satisfiable:
            continue
        if solve(WcnfFormula(num_vars, hard + soft)).satisfiable:
            continue
        return formula


def subset_satisfiable(formula, indices):
    """Fresh-solver satisfiability of H plus the selected soft clauses."""
    subset = tuple(formula.soft[i] for i in sorted(indices))
    return solve(WcnfFormula(formula.num_vars, formula.hard + subset)).satisfiable


def is_mus(formula, mus):
    """Is-MUS check: unsatisfiable, and satisfiable after any single deletion."""
    if subset_satisfiable(formula, mus):
        return False
    return all(subset_satisfiable(formula, mus - {i}) for i in mus)


def minimum_unsat_size(formula):
    """Smallest cardinality of an unsatisfiable soft subset, by enumeration."""
    indices = range(len(formula.soft))
    for size in range(len(formula.soft) + 1):
        for combo in itertools.combinations(indices, size):
            if not subset_satisfiable(formula, combo):
                return size
    raise AssertionError("formula was satisfiable")


def all_muses(formula):
    """Every MUS of a small formula, by full subset enumeration."""
    indices = range(len(formula.soft))
    unsat = [
        frozenset(c)
        for size in range(len(formula.soft) + 1)
        for c in itertools.combinations(indices, size)
        if not subset_satisfiable(formula, c)
    ]
    return [m for m in unsat if not any(u < m for u in unsat)]


def all_mcses(formula):
    """Every MCS of a small formula, by full subset enumeration."""
    indices = set(range(len(formula.soft)))
    mcses = []
    for size in range(len(formula.soft) + 1):
        for combo in itertools.combinations(sorted(indices), size):
            removal = frozenset(combo)
            if any(found < removal for found in mcses):
                continue
            if subset_satisfiable(formula, indices - removal):
                mcses.append(removal)
    return mcses


def example4_formula():
    """Three-bit comparator with unit soft clauses for digits 000 vs 101."""
    enc = encode_comparator(LexComparatorSpec(3, (1, 2, 3), (4, 5, 6), strict=True))
    soft = tuple(Clause((lit,)) for lit in (-1, -2, -3, 4, -5, 6))
    return WcnfFormula(enc.num_vars, enc.clauses, soft)


def random_pacman_labels(rng, width=5, height=5, ghosts=8):
    """Labels for a random grid: one actor, one flag, `ghosts` ghost cells."""
    from hexplain.tasks import ACTOR, EMPTY, FLAG, GHOST

    cells = rng.sample(range(width * height), 2 + ghosts)
    labels = [EMPTY] * (width * height)
    labels[cells[0]] = ACTOR
    labels[cells[1]] = FLAG
    for cell in cells[2:]:
        labels[cell] = GHOST
    return tuple(labels)


def dijkstra_path_length(task, labels):
    """Unit-weight Dijkstra, independent of the BFS implementation."""
    import heapq
    import math

    from hexplain.tasks import ACTOR, FLAG, GHOST

    width, height = task.width, task.height
    start, goal = labels.index(ACTOR), labels.index(FLAG)
    best = {start: 0}
    heap = [(0, start)]
    while heap:
        d, cell = heapq.heappop(heap)
        if cell == goal:
            return d
        if d > best.get(cell, math.inf):
            continue
        row, col = divmod(cell, width)
        for nr, nc in ((row - 1, col), (row + 1, col), (row, col - 1), (row, col + 1)):
            if 0 <= nr < height and 0 <= nc < width:
                nxt = nr * width + nc
                if labels[nxt] != GHOST and d + 1 < best.get(nxt, math.inf):
                    best[nxt] = d + 1
                    heapq.heappush(heap, (d + 1, nxt))
    return math.inf
