"""CNF formulas, a CDCL SAT solver with assumptions, and comparator encodings.

Literals are nonzero signed integers: variable indices start at 1 and a
negative sign means logical negation, as in DIMACS. The solver is a
conventional conflict-driven clause learner (two watched literals,
first-UIP learning, activity-based branching) sized for the small
incremental workloads of the explanation pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

from .errors import MalformedClause

TRUE, FALSE, UNDEF = 1, -1, 0


@dataclass(frozen=True)
class Clause:
    """A disjunction of literals.

    Construction rejects zero literals, duplicates, and tautologies
    (v together with -v): in this artifact those always signal a bug in
    the caller, never input to be normalized away.
    """

    literals: tuple[int, ...]

    def __init__(self, literals: Iterable[int]):
        lits = tuple(literals)
        seen = set()
        for lit in lits:
            if lit == 0:
                raise MalformedClause("zero literal")
            if -lit in seen:
                raise MalformedClause(f"tautology on variable {abs(lit)}")
            if lit in seen:
                raise MalformedClause(f"duplicate literal {lit}")
            seen.add(lit)
        object.__setattr__(self, "literals", lits)

    def __iter__(self):
        return iter(self.literals)

    def __len__(self):
        return len(self.literals)

    def max_var(self) -> int:
        return max((abs(lit) for lit in self.literals), default=0)


@dataclass(frozen=True)
class WcnfFormula:
    """A partial CNF formula: hard clauses plus soft clauses."""

    num_vars: int
    hard: tuple[Clause, ...] = ()
    soft: tuple[Clause, ...] = ()

    def __post_init__(self):
        if self.num_vars < 0:
            raise MalformedClause("num_vars must be >= 0")
        object.__setattr__(self, "hard", tuple(self.hard))
        object.__setattr__(self, "soft", tuple(self.soft))
        for clause in self.hard + self.soft:
            if clause.max_var() > self.num_vars:
                raise MalformedClause(
                    f"variable {clause.max_var()} exceeds num_vars={self.num_vars}"
                )


@dataclass(frozen=True)
class SatResult:
    """Outcome of a solver call.

    Satisfiable results carry a total assignment (``model[i]`` is the value
    of variable ``i + 1``). Unsatisfiable results carry a subset of the
    assumption literals sufficient for unsatisfiability (not necessarily
    minimal; empty when the hard clauses alone are contradictory).
    """

    satisfiable: bool
    model: tuple[bool, ...] | None = None
    core: frozenset[int] | None = None


class CdclSolver:
    """Incremental CDCL solver.

    A single instance is stateful and single-threaded; clauses may be added
    between ``solve`` calls and learned clauses persist, which is what makes
    repeated assumption queries (the MUS workload) cheap.
    """

    def __init__(self, num_vars: int):
        self.num_vars = 0
        self._assigns: list[int] = [UNDEF]
        self._level: list[int] = [0]
        self._reason: list[list[int] | None] = [None]
        self._phase: list[int] = [FALSE]
        self._activity: list[float] = [0.0]
        self._seen = bytearray(1)
        self._watches: list[list[list[int]]] = [[], []]
        self._clauses: list[list[int]] = []
        self._trail: list[int] = []
        self._trail_lim: list[int] = []
        self._qhead = 0
        self._var_inc = 1.0
        self._ok = True
        for _ in range(num_vars):
            self.new_var()

    # ------------------------------------------------------------------
    # construction

    def new_var(self) -> int:
        self.num_vars += 1
        self._assigns.append(UNDEF)
        self._level.append(0)
        self._reason.append(None)
        self._phase.append(FALSE)
        self._activity.append(0.0)
        self._seen.append(0)
        self._watches.append([])
        self._watches.append([])
        return self.num_vars

    def add_clause(self, literals: Iterable[int]) -> None:
        """Add a hard clause; must reference variables <= num_vars."""
        lits = list(literals)
        for lit in lits:
            if lit == 0 or abs(lit) > self.num_vars:
                raise MalformedClause(f"literal {lit} out of range")
        if not self._ok:
            return
        self._cancel_until(0)
        # Drop root-level false literals; detect satisfied/unit clauses.
        val = self._value
        if any(val(lit) == TRUE for lit in lits):
            return
        lits = [lit for lit in lits if val(lit) != FALSE]
        if not lits:
            self._ok = False
            return
        if len(lits) == 1:
            self._enqueue(lits[0], None)
            if self._propagate() is not None:
                self._ok = False
            return
        self._attach(lits)

    def _attach(self, lits: list[int]) -> None:
        self._clauses.append(lits)
        self._watches[_widx(lits[0])].append(lits)
        self._watches[_widx(lits[1])].append(lits)

    # ------------------------------------------------------------------
    # main search

    def solve(self, assumptions: Sequence[int] = ()) -> SatResult:
        for lit in assumptions:
            if lit == 0 or abs(lit) > self.num_vars:
                raise MalformedClause(f"assumption {lit} out of range")
        if not self._ok:
            return SatResult(False, core=frozenset())
        self._cancel_until(0)
        if self._propagate() is not None:
            self._ok = False
            return SatResult(False, core=frozenset())

        assumptions = list(assumptions)
        while True:
            conflict = self._propagate()
            if conflict is not None:
                if self._decision_level() == 0:
                    self._ok = False
                    return SatResult(False, core=frozenset())
                learnt, bt_level = self._analyze(conflict)
                self._cancel_until(bt_level)
                if len(learnt) == 1:
                    self._enqueue(learnt[0], None)
                else:
                    self._attach(learnt)
                    self._enqueue(learnt[0], learnt)
                self._decay_activity()
                continue

            # Assumption prefix: one decision level per assumption.
            while self._decision_level() < len(assumptions):
                lit = assumptions[self._decision_level()]
                value = self._value(lit)
                if value == TRUE:
                    self._trail_lim.append(len(self._trail))
                elif value == FALSE:
                    return SatResult(False, core=self._analyze_final(lit))
                else:
                    self._trail_lim.append(len(self._trail))
                    self._enqueue(lit, None)
                    break
            else:
                branch = self._pick_branch()
                if branch == 0:
                    model = tuple(self._assigns[v] == TRUE for v in range(1, self.num_vars + 1))
                    return SatResult(True, model=model)
                self._trail_lim.append(len(self._trail))
                self._enqueue(branch, None)

    def _decision_level(self) -> int:
        return len(self._trail_lim)

    def _value(self, lit: int) -> int:
        value = self._assigns[abs(lit)]
        return -value if lit < 0 else value

    def _enqueue(self, lit: int, reason: list[int] | None) -> None:
        var = abs(lit)
        self._assigns[var] = TRUE if lit > 0 else FALSE
        self._level[var] = self._decision_level()
        self._reason[var] = reason
        self._trail.append(lit)

    def _propagate(self) -> list[int] | None:
        """Exhaust unit propagation; return a conflicting clause or None."""
        while self._qhead < len(self._trail):
            p = self._trail[self._qhead]
            self._qhead += 1
            neg = -p
            watch_list = self._watches[_widx(neg)]
            kept: list[list[int]] = []
            i = 0
            while i < len(watch_list):
                clause = watch_list[i]
                i += 1
                if clause[0] == neg:
                    clause[0], clause[1] = clause[1], clause[0]
                first = clause[0]
                if self._value(first) == TRUE:
                    kept.append(clause)
                    continue
                for k in range(2, len(clause)):
                    if self._value(clause[k]) != FALSE:
                        clause[1], clause[k] = clause[k], clause[1]
                        self._watches[_widx(clause[1])].append(clause)
                        break
                else:
                    kept.append(clause)
                    if self._value(first) == FALSE:
                        kept.extend(watch_list[i:])
                        self._watches[_widx(neg)] = kept
                        return clause
                    self._enqueue(first, clause)
            self._watches[_widx(neg)] = kept
        return None

    def _analyze(self, conflict: list[int]) -> tuple[list[int], int]:
        """First-UIP conflict analysis: learned clause (asserting literal
        first) and the level to backjump to."""
        seen = self._seen
        learnt: list[int] = []
        counter = 0
        p = 0
        reason: Iterable[int] = conflict
        index = len(self._trail) - 1
        bt_level = 0
        current = self._decision_level()
        while True:
            for q in reason:
                if q == p:
                    continue
                var = abs(q)
                if not seen[var] and self._level[var] > 0:
                    seen[var] = 1
                    self._bump_activity(var)
                    if self._level[var] >= current:
                        counter += 1
                    else:
                        learnt.append(q)
                        if self._level[var] > bt_level:
                            bt_level = self._level[var]
            while not seen[abs(self._trail[index])]:
                index -= 1
            p = self._trail[index]
            index -= 1
            seen[abs(p)] = 0
            counter -= 1
            if counter == 0:
                break
            reason = self._reason[abs(p)]  # type: ignore[assignment]
        learnt.insert(0, -p)
        for q in learnt[1:]:
            seen[abs(q)] = 0
        return learnt, bt_level

    def _analyze_final(self, failed: int) -> frozenset[int]:
        """Trace a falsified assumption back to the assumptions that forced
        it, yielding an unsatisfiable subset of the assumption set."""
        core = {failed}
        if self._decision_level() == 0:
            return frozenset(core)
        seen = self._seen
        seen[abs(failed)] = 1
        for i in range(len(self._trail) - 1, self._trail_lim[0] - 1, -1):
            lit = self._trail[i]
            var = abs(lit)
            if not seen[var]:
                continue
            reason = self._reason[var]
            if reason is None:
                core.add(lit)
            else:
                for q in reason:
                    if abs(q) != var and self._level[abs(q)] > 0:
                        seen[abs(q)] = 1
            seen[var] = 0
        seen[abs(failed)] = 0
        return frozenset(core)

    def _cancel_until(self, level: int) -> None:
        while self._decision_level() > level:
            mark = self._trail_lim.pop()
            for lit in reversed(self._trail[mark:]):
                var = abs(lit)
                self._phase[var] = self._assigns[var]
                self._assigns[var] = UNDEF
                self._reason[var] = None
            del self._trail[mark:]
        self._qhead = min(self._qhead, len(self._trail))

    def _pick_branch(self) -> int:
        best, best_act = 0, -1.0
        for var in range(1, self.num_vars + 1):
            if self._assigns[var] == UNDEF and self._activity[var] > best_act:
                best, best_act = var, self._activity[var]
        if best == 0:
            return 0
        return best if self._phase[best] == TRUE else -best

    def _bump_activity(self, var: int) -> None:
        self._activity[var] += self._var_inc
        if self._activity[var] > 1e100:
            for v in range(1, self.num_vars + 1):
                self._activity[v] *= 1e-100
            self._var_inc *= 1e-100

    def _decay_activity(self) -> None:
        self._var_inc /= 0.95


def _widx(lit: int) -> int:
    return (abs(lit) << 1) | (lit < 0)


def solve(formula: WcnfFormula, assumptions: Sequence[int] = ()) -> SatResult:
    """Decide the hard part of ``formula`` under the given assumptions."""
    solver = CdclSolver(formula.num_vars)
    for clause in formula.hard:
        solver.add_clause(clause.literals)
    return solver.solve(assumptions)


# ----------------------------------------------------------------------
# lexicographic comparator encoding


@dataclass(frozen=True)
class LexComparatorSpec:
    """Comparison of two k-bit numbers given most-significant bit first.

    ``strict`` selects "lhs > rhs"; otherwise "lhs >= rhs" is encoded.
    """

    bits: int
    lhs_vars: tuple[int, ...]
    rhs_vars: tuple[int, ...]
    strict: bool = True

    def __post_init__(self):
        object.__setattr__(self, "lhs_vars", tuple(self.lhs_vars))
        object.__setattr__(self, "rhs_vars", tuple(self.rhs_vars))
        if self.bits < 1:
            raise MalformedClause("comparator needs at least one bit")
        if len(self.lhs_vars) != self.bits or len(self.rhs_vars) != self.bits:
            raise MalformedClause("variable lists must have exactly `bits` entries")
        all_vars = self.lhs_vars + self.rhs_vars
        if len(set(all_vars)) != len(all_vars):
            raise MalformedClause("lhs and rhs variables must be disjoint and duplicate-free")
        if any(v < 1 for v in all_vars):
            raise MalformedClause("variables must be positive")


@dataclass(frozen=True)
class ComparatorEncoding:
    """Tseitin encoding of a LexComparatorSpec.

    ``num_vars`` covers the original variables plus the fresh auxiliaries,
    which are allocated from ``first_aux`` upward; the caller keeps
    ownership of everything below.
    """

    clauses: tuple[Clause, ...]
    num_vars: int
    first_aux: int


def encode_comparator(spec: LexComparatorSpec, first_aux: int | None = None) -> ComparatorEncoding:
    """Encode the comparator as hard clauses over fresh auxiliary variables.

    The circuit chains bitwise-equality auxiliaries into prefix-equality
    ones and asserts that some position decides the comparison (with the
    all-equal case also accepted when strict is False). Satisfying
    assignments project exactly onto the integer relation; verified by
    enumeration in the tests.
    """
    k = spec.bits
    if first_aux is None:
        first_aux = max(spec.lhs_vars + spec.rhs_vars) + 1
    next_var = first_aux
    clauses: list[Clause] = []

    def fresh() -> int:
        nonlocal next_var
        var = next_var
        next_var += 1
        return var

    # eq[i] <-> (lhs[i] == rhs[i]); the last one only matters for >=.
    eq_count = k if not spec.strict else k - 1
    eq = []
    for i in range(eq_count):
        a, x, e = spec.lhs_vars[i], spec.rhs_vars[i], fresh()
        eq.append(e)
        clauses += [
            Clause((-e, -a, x)),
            Clause((-e, a, -x)),
            Clause((e, a, x)),
            Clause((e, -a, -x)),
        ]

    # prefix[i] <-> eq[0] & ... & eq[i]; prefix[0] aliases eq[0].
    prefix = eq[:1]
    for i in range(1, eq_count):
        p = fresh()
        clauses += [
            Clause((-p, prefix[i - 1])),
            Clause((-p, eq[i])),
            Clause((p, -prefix[i - 1], -eq[i])),
        ]
        prefix.append(p)

    # decided[i] <-> prefix[i-1] & lhs[i] & ~rhs[i]
    decided = []
    for i in range(k):
        a, x, d = spec.lhs_vars[i], spec.rhs_vars[i], fresh()
        decided.append(d)
        if i == 0:
            clauses += [
                Clause((-d, a)),
                Clause((-d, -x)),
                Clause((d, -a, x)),
            ]
        else:
            clauses += [
                Clause((-d, prefix[i - 1])),
                Clause((-d, a)),
                Clause((-d, -x)),
                Clause((d, -prefix[i - 1], -a, x)),
            ]

    final = list(decided)
    if not spec.strict:
        final.append(prefix[k - 1])
    clauses.append(Clause(tuple(final)))
    return ComparatorEncoding(tuple(clauses), next_var - 1, first_aux)


# ----------------------------------------------------------------------
# DIMACS WCNF round-trip (debugging aid)


def write_wcnf(formula: WcnfFormula, stream: TextIO) -> None:
    """Write `p wcnf` format: hard clauses carry the top weight, soft weight 1."""
    top = len(formula.soft) + 1
    total = len(formula.hard) + len(formula.soft)
    stream.write(f"p wcnf {formula.num_vars} {total} {top}\n")
    for clause in formula.hard:
        stream.write(f"{top} " + " ".join(map(str, clause.literals)) + " 0\n")
    for clause in formula.soft:
        stream.write("1 " + " ".join(map(str, clause.literals)) + " 0\n")


def read_wcnf(stream: TextIO) -> WcnfFormula:
    num_vars = 0
    top = None
    hard: list[Clause] = []
    soft: list[Clause] = []
    for line in stream:
        line = line.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 5 or parts[1] != "wcnf":
                raise MalformedClause(f"bad wcnf header: {line!r}")
            num_vars, top = int(parts[2]), int(parts[4])
            continue
        if top is None:
            raise MalformedClause("clause before wcnf header")
        tokens = [int(tok) for tok in line.split()]
        if tokens[-1] != 0:
            raise MalformedClause(f"clause not zero-terminated: {line!r}")
        weight, lits = tokens[0], tokens[1:-1]
        (hard if weight >= top else soft).append(Clause(lits))
    return WcnfFormula(num_vars, tuple(hard), tuple(soft))
