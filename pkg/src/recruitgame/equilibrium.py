"""Backward-induction solver for the canonical strategy profile.

Canonical play: each round the higher-reputation firm bids on the strong
candidate (reputation ties treat firm 1 as higher); the lower firm
best-responds, taking the weak candidate when indifferent. The solver
materializes the resulting values layer by layer over remaining rounds;
an unmemoized full-tree oracle and one-shot-deviation checks provide
independent verification paths.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, NamedTuple

import numpy as np

from .core import (
    EXACT,
    BUILTIN_RULES,
    CompetitionRule,
    FullTableRequiredError,
    GameSpec,
    ParameterError,
    Profile,
    ResourceLimitError,
    Scalar,
    TIE_REL_TOL,
    format_scalar,
    is_strictly_better,
    make_rule,
    parse_scalar,
    profile_from_label,
)

TABLE_FORMAT_VERSION = 1

RETAIN_ROOT = "root"
RETAIN_PROFILES = "profiles"
RETAIN_FULL = "full"


class StateValue(NamedTuple):
    """Action profile and expected utilities over the remaining rounds."""

    profile: Profile
    u1: Scalar
    u2: Scalar


def _stage_outcome(q: Scalar, c1: Scalar, x1: int, x2: int,
                   cont_win1: tuple[Scalar, Scalar],
                   cont_win2: tuple[Scalar, Scalar],
                   exact: bool) -> StateValue:
    """One-round decision and value update from continuation values.

    ``cont_win1``/``cont_win2`` are the (u1, u2) continuations after firm 1
    (resp. firm 2) hires the strong candidate. ``c1`` is firm 1's win
    probability in a head-to-head competition.
    """
    u1w1, u2w1 = cont_win1
    u1w2, u2w2 = cont_win2
    if x1 >= x2:
        # Firm 1 is higher and bids strong; firm 2 compares.
        compete = (1 - c1) * (1 + u2w2) + c1 * u2w1
        stay = q + u2w1
        if is_strictly_better(compete, stay, exact):
            profile = Profile.BOTH_STRONG
        else:
            return StateValue(Profile.P1_STRONG, 1 + u1w1, q + u2w1)
    else:
        compete = c1 * (1 + u1w1) + (1 - c1) * u1w2
        stay = q + u1w2
        if is_strictly_better(compete, stay, exact):
            profile = Profile.BOTH_STRONG
        else:
            return StateValue(Profile.P2_STRONG, q + u1w2, 1 + u2w2)
    u1 = c1 * (1 + u1w1) + (1 - c1) * u1w2
    u2 = c1 * u2w1 + (1 - c1) * (1 + u2w2)
    return StateValue(profile, u1, u2)


def decide_profile(spec: GameSpec, remaining: int, x1: int, x2: int,
                   cont: Callable[[int, int], tuple[Scalar, Scalar]] | None = None,
                   ) -> Profile:
    """Action profile prescribed at a state, given continuation values.

    ``cont(x1, x2)`` must return the (u1, u2) continuation for the layer
    below; omit it for remaining == 1 (zero continuations).
    """
    if remaining < 1:
        raise ParameterError("decide_profile needs at least one remaining round")
    if cont is None:
        if remaining != 1:
            raise ParameterError("continuation values required when remaining > 1")
        zero = spec.zero
        cont = lambda a, b: (zero, zero)
    c1 = spec.rule.win_prob(x1, x2)
    if not spec.is_exact:
        c1 = float(c1)
    return _stage_outcome(spec.q, c1, x1, x2,
                          cont(x1 + 1, x2), cont(x1, x2 + 1), spec.is_exact).profile


class EquilibriumTable:
    """Solved values keyed by (remaining rounds, firm 1 reputation).

    Firm 2's reputation is implied by the per-round strong hire:
    x1 + x2 == x1_0 + x2_0 + (k - remaining). Retention levels:

    - ``root``: root value only (two rolling layers during the solve);
    - ``profiles``: per-state action profiles plus the root value;
    - ``full``: profiles and both utilities at every state.
    """

    def __init__(self, spec: GameSpec, retention: str, root: StateValue,
                 profiles: list | None, u1_layers: list | None, u2_layers: list | None):
        self.spec = spec
        self.retention = retention
        self.root = root
        self._profiles = profiles
        self._u1 = u1_layers
        self._u2 = u2_layers

    # -- indexing -----------------------------------------------------------

    def layer_sum(self, remaining: int) -> int:
        return self.spec.x1 + self.spec.x2 + (self.spec.k - remaining)

    def layer_width(self, remaining: int) -> int:
        return self.spec.k - remaining + 1

    def _index(self, remaining: int, x1: int) -> int:
        if not 0 <= remaining <= self.spec.k:
            raise ParameterError(f"remaining {remaining} outside [0, {self.spec.k}]")
        i = x1 - self.spec.x1
        if not 0 <= i < self.layer_width(remaining):
            raise ParameterError(
                f"x1={x1} not reachable at remaining={remaining} from "
                f"({self.spec.x1},{self.spec.x2})")
        return i

    def profile_at(self, remaining: int, x1: int) -> Profile:
        if remaining == self.spec.k:
            return self.root.profile
        if self._profiles is None:
            raise FullTableRequiredError(
                "table was solved with retain='root'; re-solve with "
                "retain='profiles' or retain='full'")
        if remaining == 0:
            raise ParameterError("terminal states prescribe no action")
        i = self._index(remaining, x1)
        return Profile(int(self._profiles[remaining][i]))

    def value_at(self, remaining: int, x1: int) -> StateValue:
        if remaining == self.spec.k:
            return self.root
        if self._u1 is None:
            raise FullTableRequiredError(
                "per-state utilities need retain='full'")
        i = self._index(remaining, x1)
        if remaining == 0:
            zero = self.spec.zero
            return StateValue(None, zero, zero)  # type: ignore[arg-type]
        u1 = self._u1[remaining][i]
        u2 = self._u2[remaining][i]
        if not self.spec.is_exact:
            u1 = float(u1)
            u2 = float(u2)
        return StateValue(Profile(int(self._profiles[remaining][i])), u1, u2)

    def iter_states(self) -> Iterator[tuple[int, int, int, StateValue]]:
        """Yields (remaining, x1, x2, value) for every non-terminal state."""
        for j in range(self.spec.k, 0, -1):
            s = self.layer_sum(j)
            for x1 in range(self.spec.x1, self.spec.x1 + self.layer_width(j)):
                yield j, x1, s - x1, self.value_at(j, x1)

    def iter_profiles(self) -> Iterator[tuple[int, int, int, Profile]]:
        for j in range(self.spec.k, 0, -1):
            s = self.layer_sum(j)
            for x1 in range(self.spec.x1, self.spec.x1 + self.layer_width(j)):
                yield j, x1, s - x1, self.profile_at(j, x1)

    def profile_counts(self) -> dict[Profile, int]:
        counts = {p: 0 for p in Profile}
        if self.spec.k == 0:
            return counts
        if self._profiles is not None:
            for j in range(1, self.spec.k + 1):
                layer = np.asarray(self._profiles[j])
                for p in Profile:
                    counts[p] += int(np.count_nonzero(layer == int(p)))
        else:
            counts[self.root.profile] += 1
        return counts

    @property
    def welfare(self) -> Scalar:
        return self.root.u1 + self.root.u2

    @property
    def state_count(self) -> int:
        return self.spec.state_count

    def __repr__(self) -> str:
        return (f"<EquilibriumTable {self.spec.describe()} retention={self.retention} "
                f"root=({self.root.profile.label}, u1={self.root.u1}, u2={self.root.u2})>")


def _state_limit(spec: GameSpec, retain: str, max_states: int | None) -> int:
    if max_states is not None:
        return max_states
    if spec.is_exact:
        return 2_000_000
    return {RETAIN_ROOT: 2_000_000_000,
            RETAIN_PROFILES: 80_000_000,
            RETAIN_FULL: 25_000_000}[retain]


def solve(spec: GameSpec, *, retain: str = RETAIN_FULL, short_circuit: bool = False,
          max_states: int | None = None, validate_custom: bool = True,
          ) -> EquilibriumTable:
    """Solve the game by backward induction over remaining rounds.

    ``short_circuit`` resolves non-compete states in closed form
    (higher earns one per round, lower earns q per round); the resulting
    table is identical either way, it only skips the recursion reads.
    """
    if retain not in (RETAIN_ROOT, RETAIN_PROFILES, RETAIN_FULL):
        raise ParameterError(f"unknown retention {retain!r}")
    limit = _state_limit(spec, retain, max_states)
    if spec.state_count > limit:
        raise ResourceLimitError(
            f"{spec.describe()} has {spec.state_count} states, over the "
            f"{limit}-state ceiling for mode={spec.numeric_mode}, retain={retain}")
    if validate_custom and spec.rule.rule_id not in BUILTIN_RULES:
        grid_max = min(max(spec.x1, spec.x2) + spec.k, 200)
        report = _validate_custom_rule(spec.rule, grid_max)
        if not report.ok:
            raise ParameterError(
                f"custom rule fails the {report.axiom} axiom at {report.witness}: "
                f"{report.detail}")
    if spec.is_exact:
        return _solve_exact(spec, retain, short_circuit)
    return _solve_float(spec, retain, short_circuit)


def _validate_custom_rule(rule: CompetitionRule, grid_max: int):
    from .core import validate_competition_rule

    return validate_competition_rule(rule, grid_max)


def _solve_exact(spec: GameSpec, retain: str, short_circuit: bool) -> EquilibriumTable:
    k, q, rule = spec.k, spec.q, spec.rule
    x10 = spec.x1
    zero = Fraction(0)
    prev_u1 = [zero] * (k + 1)
    prev_u2 = [zero] * (k + 1)
    keep_values = retain == RETAIN_FULL
    keep_profiles = retain != RETAIN_ROOT
    profiles: list | None = [None] * (k + 1) if keep_profiles else None
    u1_layers: list | None = [list(prev_u1)] if keep_values else None
    u2_layers: list | None = [list(prev_u2)] if keep_values else None
    root_value: StateValue | None = None
    if k == 0:
        root_value = StateValue(None, zero, zero)  # type: ignore[arg-type]
    for j in range(1, k + 1):
        width = k - j + 1
        layer_sum = x10 + spec.x2 + (k - j)
        cur_prof = [0] * width
        cur_u1 = [zero] * width
        cur_u2 = [zero] * width
        jq = j * q
        for i in range(width):
            x1 = x10 + i
            x2 = layer_sum - x1
            c1 = rule.win_prob(x1, x2)
            sv = _stage_outcome(q, c1, x1, x2,
                                (prev_u1[i + 1], prev_u2[i + 1]),
                                (prev_u1[i], prev_u2[i]), True)
            if short_circuit and sv.profile != Profile.BOTH_STRONG:
                if sv.profile == Profile.P1_STRONG:
                    sv = StateValue(sv.profile, Fraction(j), jq)
                else:
                    sv = StateValue(sv.profile, jq, Fraction(j))
            cur_prof[i] = int(sv.profile)
            cur_u1[i] = sv.u1
            cur_u2[i] = sv.u2
        if keep_profiles:
            profiles[j] = cur_prof
        if keep_values:
            u1_layers.append(cur_u1)
            u2_layers.append(cur_u2)
        prev_u1, prev_u2 = cur_u1, cur_u2
        if j == k:
            root_value = StateValue(Profile(cur_prof[0]), cur_u1[0], cur_u2[0])
    return EquilibriumTable(spec, retain, root_value, profiles,
                            u1_layers if keep_values else None,
                            u2_layers if keep_values else None)


def _solve_float(spec: GameSpec, retain: str, short_circuit: bool) -> EquilibriumTable:
    k, rule = spec.k, spec.rule
    q = float(spec.q)
    x10 = spec.x1
    prev_u1 = np.zeros(k + 1)
    prev_u2 = np.zeros(k + 1)
    keep_values = retain == RETAIN_FULL
    keep_profiles = retain != RETAIN_ROOT
    profiles: list = [None] * (k + 1) if keep_profiles else None
    u1_layers: list | None = [prev_u1.copy()] if keep_values else None
    u2_layers: list | None = [prev_u2.copy()] if keep_values else None
    root_value: StateValue | None = None
    if k == 0:
        root_value = StateValue(None, 0.0, 0.0)  # type: ignore[arg-type]
    pp = int(Profile.BOTH_STRONG)
    pm = int(Profile.P1_STRONG)
    mp = int(Profile.P2_STRONG)
    for j in range(1, k + 1):
        width = k - j + 1
        layer_sum = x10 + spec.x2 + (k - j)
        x1 = x10 + np.arange(width, dtype=np.int64)
        x2 = layer_sum - x1
        c1 = rule.win_prob_vec(x1, x2)
        a1 = prev_u1[1:]   # firm 1 hired strong: (x1+1, x2)
        b1 = prev_u1[:-1]  # firm 2 hired strong: (x1, x2+1)
        a2 = prev_u2[1:]
        b2 = prev_u2[:-1]
        higher1 = x1 >= x2
        compete = np.where(higher1,
                           (1 - c1) * (1 + b2) + c1 * a2,
                           c1 * (1 + a1) + (1 - c1) * b1)
        stay = np.where(higher1, q + a2, q + b1)
        tol = TIE_REL_TOL * np.maximum(1.0, np.maximum(np.abs(compete), np.abs(stay)))
        comp = compete > stay + tol
        prof = np.where(comp, pp, np.where(higher1, pm, mp)).astype(np.int8)
        if short_circuit:
            nc_u1 = np.where(higher1, float(j), j * q)
            nc_u2 = np.where(higher1, j * q, float(j))
        else:
            nc_u1 = np.where(higher1, 1 + a1, q + b1)
            nc_u2 = np.where(higher1, q + a2, 1 + b2)
        cur_u1 = np.where(comp, c1 * (1 + a1) + (1 - c1) * b1, nc_u1)
        cur_u2 = np.where(comp, c1 * a2 + (1 - c1) * (1 + b2), nc_u2)
        if keep_profiles:
            profiles[j] = prof
        if keep_values:
            u1_layers.append(cur_u1)
            u2_layers.append(cur_u2)
        prev_u1, prev_u2 = cur_u1, cur_u2
        if j == k:
            root_value = StateValue(Profile(int(prof[0])),
                                    float(cur_u1[0]), float(cur_u2[0]))
    return EquilibriumTable(spec, retain, root_value, profiles, u1_layers, u2_layers)


def brute_force_oracle(spec: GameSpec, *, max_rounds: int = 12) -> tuple[Fraction, Fraction]:
    """Exact root utilities by exhaustive full-tree evaluation.

    Deliberately shares no machinery with :func:`solve`: it recurses over
    the outcome tree with no memoization and evaluates the lower firm's
    two options by direct expectation at every node. Exact mode only.
    """
    if not spec.is_exact:
        raise ParameterError("the oracle runs in exact mode only")
    if spec.k > max_rounds:
        raise ResourceLimitError(
            f"full-tree oracle is limited to k <= {max_rounds}, got k={spec.k}")
    q = spec.q
    win = spec.rule.win_prob

    def play(rounds: int, x1: int, x2: int) -> tuple[Fraction, Fraction]:
        if rounds == 0:
            return Fraction(0), Fraction(0)
        c = win(x1, x2)
        after1 = play(rounds - 1, x1 + 1, x2)
        after2 = play(rounds - 1, x1, x2 + 1)
        if x1 >= x2:
            compete = (1 - c) * (1 + after2[1]) + c * after1[1]
            stay = q + after1[1]
            if compete > stay:
                return (c * (1 + after1[0]) + (1 - c) * after2[0], compete)
            return (1 + after1[0], stay)
        compete = c * (1 + after1[0]) + (1 - c) * after2[0]
        stay = q + after2[0]
        if compete > stay:
            return (compete, c * after1[1] + (1 - c) * (1 + after2[1]))
        return (stay, 1 + after2[1])

    return play(spec.k, spec.x1, spec.x2)


class CanonicalEvaluator:
    """Memoized canonical value of an arbitrary state (any remaining, x1, x2).

    Verification needs values outside a single table's reachable cone
    (unilateral weak-weak deviations keep reputations fixed, and
    monotonicity compares against shifted starts); this evaluator serves
    those lookups with a shared cache.
    """

    def __init__(self, rule: CompetitionRule, q: Scalar, exact: bool):
        self.rule = rule
        self.q = q
        self.exact = exact
        self._zero = Fraction(0) if exact else 0.0
        self._cache: dict[tuple[int, int, int], StateValue] = {}

    def value(self, remaining: int, x1: int, x2: int) -> StateValue:
        if remaining == 0:
            return StateValue(None, self._zero, self._zero)  # type: ignore[arg-type]
        if remaining > 800:
            raise ResourceLimitError(
                "evaluator recursion is limited to 800 rounds; use solve()")
        key = (remaining, x1, x2)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        # Iterative post-order over the dependency dag to bound stack depth.
        stack = [key]
        while stack:
            j, a, b = node = stack[-1]
            if node in self._cache:
                stack.pop()
                continue
            if j == 1:
                zero2 = (self._zero, self._zero)
                self._cache[node] = self._stage(j, a, b, zero2, zero2)
                stack.pop()
                continue
            child1 = (j - 1, a + 1, b)
            child2 = (j - 1, a, b + 1)
            missing = [c for c in (child1, child2) if c not in self._cache]
            if missing:
                stack.extend(missing)
                continue
            v1 = self._cache[child1]
            v2 = self._cache[child2]
            self._cache[node] = self._stage(j, a, b, (v1.u1, v1.u2), (v2.u1, v2.u2))
            stack.pop()
        return self._cache[key]

    def _stage(self, j: int, x1: int, x2: int, cont1, cont2) -> StateValue:
        c1 = self.rule.win_prob(x1, x2)
        if not self.exact:
            c1 = float(c1)
        return _stage_outcome(self.q, c1, x1, x2, cont1, cont2, self.exact)

    @classmethod
    def for_spec(cls, spec: GameSpec) -> "CanonicalEvaluator":
        return cls(spec.rule, spec.q, spec.is_exact)


@dataclass
class Violation:
    check: str
    remaining: int
    x1: int
    x2: int
    detail: str


@dataclass
class CheckResult:
    name: str
    ok: bool
    n_checked: int
    violations: list[Violation]
    skipped: bool = False

    def summary(self) -> str:
        if self.skipped:
            return f"{self.name}: skipped"
        status = "pass" if self.ok else f"FAIL ({len(self.violations)} violations)"
        return f"{self.name}: {status} over {self.n_checked} checks"


@dataclass
class SpeReport:
    ok: bool
    n_states: int
    violations: list[Violation]

    def summary(self) -> str:
        status = "pass" if self.ok else f"FAIL ({len(self.violations)} violations)"
        return f"one-shot-deviation check: {status} over {self.n_states} states"


def _ge(a: Scalar, b: Scalar, exact: bool, rel: float = 1e-9) -> bool:
    if exact:
        return a >= b
    return a >= b - rel * max(1.0, abs(a), abs(b))


def _stage_cells(q, c1, x1, x2, cont1, cont2, cont_flat) -> dict[tuple[str, str], tuple]:
    """Payoffs of all four one-round bid pairs, continuations held canonical.

    ``cont_flat`` is the canonical value when nobody hires the strong
    candidate (both bid weak: reputations freeze, the winner of that side
    competition pockets q).
    """
    u1w1, u2w1 = cont1
    u1w2, u2w2 = cont2
    f1, f2 = cont_flat
    return {
        ("+", "+"): (c1 * (1 + u1w1) + (1 - c1) * u1w2,
                     c1 * u2w1 + (1 - c1) * (1 + u2w2)),
        ("+", "-"): (1 + u1w1, q + u2w1),
        ("-", "+"): (q + u1w2, 1 + u2w2),
        ("-", "-"): (c1 * q + f1, (1 - c1) * q + f2),
    }


_PROFILE_ACTIONS = {
    Profile.BOTH_STRONG: ("+", "+"),
    Profile.P1_STRONG: ("+", "-"),
    Profile.P2_STRONG: ("-", "+"),
}


def verify_spe(table: EquilibriumTable, *, evaluator: CanonicalEvaluator | None = None,
               rel_tol: float = 1e-9, max_violations: int = 20) -> SpeReport:
    """Check the prescribed profile is a stage Nash equilibrium everywhere.

    At every reachable state, the 2x2 stage matrix is rebuilt from the
    canonical continuation values and both unilateral one-shot deviations
    are compared against the prescribed actions.
    """
    spec = table.spec
    if spec.k > 0 and table.retention != RETAIN_FULL:
        raise FullTableRequiredError("verify_spe needs retain='full'")
    ev = evaluator or CanonicalEvaluator.for_spec(spec)
    exact = spec.is_exact
    q = spec.q
    violations: list[Violation] = []
    n = 0
    for j, x1, x2, value in table.iter_states():
        n += 1
        c1 = spec.rule.win_prob(x1, x2)
        if not exact:
            c1 = float(c1)
        v1 = table.value_at(j - 1, x1 + 1)
        v2 = table.value_at(j - 1, x1)
        flat = ev.value(j - 1, x1, x2)
        cells = _stage_cells(q, c1, x1, x2, (v1.u1, v1.u2), (v2.u1, v2.u2),
                             (flat.u1, flat.u2))
        a1, a2 = _PROFILE_ACTIONS[value.profile]
        here = cells[(a1, a2)]
        dev1 = cells[("-" if a1 == "+" else "+", a2)]
        dev2 = cells[(a1, "-" if a2 == "+" else "+")]
        if not _ge(here[0], dev1[0], exact, rel_tol):
            violations.append(Violation(
                "spe", j, x1, x2,
                f"firm 1 gains by deviating from {a1}{a2}: {dev1[0]} > {here[0]}"))
        if not _ge(here[1], dev2[1], exact, rel_tol):
            violations.append(Violation(
                "spe", j, x1, x2,
                f"firm 2 gains by deviating from {a1}{a2}: {dev2[1]} > {here[1]}"))
        if len(violations) >= max_violations:
            break
    return SpeReport(not violations, n, violations)


@dataclass
class StructuralReport:
    checks: dict[str, CheckResult]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks.values())

    def summary(self) -> str:
        return "; ".join(c.summary() for c in self.checks.values())


def structural_checks(table: EquilibriumTable, *,
                      evaluator: CanonicalEvaluator | None = None,
                      rel_tol: float = 1e-9,
                      max_violations: int = 20) -> StructuralReport:
    """Run the five structural properties of canonical play over a full table.

    stop-forever: a firm that yields keeps yielding in the successor state.
    higher-ge-lower: the higher firm's utility weakly dominates.
    kq-implies-never: utility exactly q per round forces all-weak play
      (exact mode; skipped for float tables).
    win-keeps-competing: a competition winner bids strong again next round.
    monotonicity: utilities move weakly with unit reputation shifts,
      compared against shifted-start solves.
    """
    spec = table.spec
    if spec.k > 0 and table.retention != RETAIN_FULL:
        raise FullTableRequiredError("structural_checks needs retain='full'")
    ev = evaluator or CanonicalEvaluator.for_spec(spec)
    exact = spec.is_exact
    q = spec.q

    stop_v: list[Violation] = []
    order_v: list[Violation] = []
    kq_v: list[Violation] = []
    keeps_v: list[Violation] = []
    mono_v: list[Violation] = []
    n_states = 0
    n_kq = 0

    for j, x1, x2, value in table.iter_states():
        n_states += 1
        prof = value.profile
        # (a) stop-forever along the successor of the prescribed hire
        if j >= 2 and prof != Profile.BOTH_STRONG:
            if prof == Profile.P1_STRONG:
                nxt = table.profile_at(j - 1, x1 + 1)
                if nxt != Profile.P1_STRONG:
                    stop_v.append(Violation("stop-forever", j, x1, x2,
                                            f"follows {prof.label} with {nxt.label}"))
            else:
                nxt = table.profile_at(j - 1, x1)
                if nxt != Profile.P2_STRONG:
                    stop_v.append(Violation("stop-forever", j, x1, x2,
                                            f"follows {prof.label} with {nxt.label}"))
        # (b) higher reputation earns at least as much
        hi, lo = (value.u1, value.u2) if x1 >= x2 else (value.u2, value.u1)
        if not _ge(hi, lo, exact, rel_tol):
            order_v.append(Violation("higher-ge-lower", j, x1, x2,
                                     f"higher {hi} < lower {lo}"))
        # (c) exactly q per round means the firm never bids strong in the subgame
        if exact:
            for firm, u in ((1, value.u1), (2, value.u2)):
                if u == j * q:
                    n_kq += 1
                    bad = _first_strong_on_path(table, j, x1, x2, firm)
                    if bad is not None:
                        kq_v.append(Violation(
                            "kq-implies-never", j, x1, x2,
                            f"firm {firm} earns {j}*q yet bids strong at {bad}"))
        # (d) a winner keeps bidding strong
        if j >= 2 and prof == Profile.BOTH_STRONG:
            after1 = table.profile_at(j - 1, x1 + 1)
            if after1 not in (Profile.BOTH_STRONG, Profile.P1_STRONG):
                keeps_v.append(Violation("win-keeps-competing", j, x1, x2,
                                         f"firm 1 wins then plays {after1.label}"))
            after2 = table.profile_at(j - 1, x1)
            if after2 not in (Profile.BOTH_STRONG, Profile.P2_STRONG):
                keeps_v.append(Violation("win-keeps-competing", j, x1, x2,
                                         f"firm 2 wins then plays {after2.label}"))
        # (e) unit-shift monotonicity against shifted-start solves
        up1 = ev.value(j, x1 + 1, x2)
        up2 = ev.value(j, x1, x2 + 1)
        if not (_ge(up1.u1, value.u1, exact, rel_tol)
                and _ge(value.u2, up1.u2, exact, rel_tol)):
            mono_v.append(Violation("monotonicity", j, x1, x2,
                                    "utilities move the wrong way in x1"))
        if not (_ge(value.u1, up2.u1, exact, rel_tol)
                and _ge(up2.u2, value.u2, exact, rel_tol)):
            mono_v.append(Violation("monotonicity", j, x1, x2,
                                    "utilities move the wrong way in x2"))
        if max(len(stop_v), len(order_v), len(kq_v), len(keeps_v),
               len(mono_v)) >= max_violations:
            break

    checks = {
        "stop-forever": CheckResult("stop-forever", not stop_v, n_states, stop_v),
        "higher-ge-lower": CheckResult("higher-ge-lower", not order_v, n_states, order_v),
        "kq-implies-never": CheckResult("kq-implies-never", not kq_v, n_kq, kq_v,
                                        skipped=not exact),
        "win-keeps-competing": CheckResult("win-keeps-competing", not keeps_v,
                                           n_states, keeps_v),
        "monotonicity": CheckResult("monotonicity", not mono_v, n_states, mono_v),
    }
    return StructuralReport(checks)


def _first_strong_on_path(table: EquilibriumTable, j: int, x1: int, x2: int,
                          firm: int) -> tuple[int, int, int] | None:
    """First on-path state where ``firm`` bids strong, or None.

    Only meaningful when the firm is expected to always yield: yielding
    states have a single successor, so the path is a chain.
    """
    while j >= 1:
        prof = table.profile_at(j, x1)
        strong = (prof == Profile.BOTH_STRONG
                  or (prof == Profile.P1_STRONG and firm == 1)
                  or (prof == Profile.P2_STRONG and firm == 2))
        if strong:
            return (j, x1, x2)
        if prof == Profile.P1_STRONG:
            x1 += 1
        else:
            x2 += 1
        j -= 1
    return None


# -- persistence -------------------------------------------------------------


def save_table(table: EquilibriumTable, path) -> None:
    """Write a full table as one JSON header line plus one line per state.

    Terminal (remaining == 0) states are identically zero and are not
    written; the loader reconstructs them.
    """
    spec = table.spec
    if spec.k > 0 and table.retention != RETAIN_FULL:
        raise FullTableRequiredError("persistence needs retain='full'")
    if spec.rule.rule_id not in BUILTIN_RULES:
        raise ParameterError("only built-in rules can be persisted")
    from . import __version__

    rule_obj: dict = {"id": spec.rule.rule_id}
    for key, val in spec.rule.params().items():
        rule_obj[key] = format_scalar(val) if isinstance(val, (Fraction, float)) else val
    header = {
        "format_version": TABLE_FORMAT_VERSION,
        "kind": "equilibrium-table",
        "artifact_version": __version__,
        "k": spec.k,
        "q": format_scalar(spec.q),
        "x1": spec.x1,
        "x2": spec.x2,
        "rule": rule_obj,
        "numeric_mode": spec.numeric_mode,
        "states": spec.state_count,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for j, x1, x2, value in table.iter_states():
            rec = {
                "remaining": j,
                "x1": x1,
                "x2": x2,
                "profile": value.profile.label,
                "u1": format_scalar(value.u1),
                "u2": format_scalar(value.u2),
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_table(path) -> EquilibriumTable:
    """Read a table written by :func:`save_table`, bit-exact in its mode."""
    with open(path, "r", encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("kind") != "equilibrium-table":
            raise ParameterError(f"{path} is not an equilibrium table file")
        if header.get("format_version") != TABLE_FORMAT_VERSION:
            raise ParameterError(
                f"unsupported table format version {header.get('format_version')}")
        mode = header["numeric_mode"]
        exact = mode == EXACT

        def scalar(text: str) -> Scalar:
            value, is_ratio = parse_scalar(text)
            if exact and not is_ratio:
                value = Fraction(text)
            return value

        rule_obj = dict(header["rule"])
        rule_id = rule_obj.pop("id")
        if "p" in rule_obj:
            rule_obj["p"] = scalar(rule_obj["p"])
        rule = make_rule(rule_id, **rule_obj)
        q = scalar(header["q"])
        spec = GameSpec(k=header["k"], q=q, x1=header["x1"], x2=header["x2"],
                        rule=rule, numeric_mode=mode)
        k = spec.k
        zero = spec.zero
        if exact:
            u1_layers = [[zero] * (k - j + 1) for j in range(k + 1)]
            u2_layers = [[zero] * (k - j + 1) for j in range(k + 1)]
            profiles: list = [None] + [[0] * (k - j + 1) for j in range(1, k + 1)]
        else:
            u1_layers = [np.zeros(k - j + 1) for j in range(k + 1)]
            u2_layers = [np.zeros(k - j + 1) for j in range(k + 1)]
            profiles = [None] + [np.zeros(k - j + 1, dtype=np.int8)
                                 for j in range(1, k + 1)]
        seen = 0
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            j = rec["remaining"]
            i = rec["x1"] - spec.x1
            profiles[j][i] = int(profile_from_label(rec["profile"]))
            u1_layers[j][i] = scalar(rec["u1"])
            u2_layers[j][i] = scalar(rec["u2"])
            seen += 1
        expected = spec.state_count - (k + 1)
        if seen != expected:
            raise ParameterError(
                f"table file holds {seen} states, expected {expected}")
    if k == 0:
        root = StateValue(None, zero, zero)  # type: ignore[arg-type]
    else:
        u1 = u1_layers[k][0]
        u2 = u2_layers[k][0]
        if not exact:
            u1, u2 = float(u1), float(u2)
        root = StateValue(Profile(int(profiles[k][0])), u1, u2)
    return EquilibriumTable(spec, RETAIN_FULL, root, profiles, u1_layers, u2_layers)
