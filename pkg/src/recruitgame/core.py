"""Domain types and competition rules for the two-firm recruiting game.

Two firms compete over ``k`` hiring rounds. Each round offers a strong
candidate (quality 1) and a weak candidate (quality ``q`` < 1). A firm's
reputation is the number of strong candidates it has hired plus its
initial endowment; when both firms pursue the same candidate, a
competition rule maps the reputation pair to firm 1's win probability.

All values here are immutable after construction and safe to share
between workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction
from typing import Callable, Union

import numpy as np

Scalar = Union[Fraction, float]

EXACT = "exact"
FLOAT = "float"

#: Relative tolerance under which the lower player is treated as indifferent
#: between competing and yielding in float mode. Indifference resolves to the
#: weak candidate, so this pins tie behavior across platforms.
TIE_REL_TOL = 1e-12


class ParameterError(ValueError):
    """An argument violates a documented precondition."""


class ResourceLimitError(RuntimeError):
    """The requested computation exceeds a configured resource ceiling."""


class FullTableRequiredError(RuntimeError):
    """The operation needs per-state data that the table did not retain."""


class Profile(IntEnum):
    """First-round bid pair: + is the strong candidate, - the weak one."""

    BOTH_STRONG = 0  # "++": both firms bid on the strong candidate
    P1_STRONG = 1    # "+-": firm 1 takes strong, firm 2 takes weak
    P2_STRONG = 2    # "-+": firm 1 takes weak, firm 2 takes strong

    @property
    def label(self) -> str:
        return _PROFILE_LABELS[self]


_PROFILE_LABELS = {
    Profile.BOTH_STRONG: "++",
    Profile.P1_STRONG: "+-",
    Profile.P2_STRONG: "-+",
}
_PROFILE_FROM_LABEL = {v: k for k, v in _PROFILE_LABELS.items()}


def profile_from_label(label: str) -> Profile:
    try:
        return _PROFILE_FROM_LABEL[label]
    except KeyError:
        raise ParameterError(f"unknown profile label {label!r}") from None


def tullock_prob(x1: int, x2: int) -> Fraction:
    """Firm 1's win probability under proportional (Tullock) competition.

    Returns the exact ratio x1/(x1+x2); float-mode callers convert.
    """
    if x1 < 1 or x2 < 1:
        raise ParameterError(f"reputations must be >= 1, got ({x1}, {x2})")
    return Fraction(x1, x1 + x2)


def fixed_p_prob(p: Scalar, x1: int, x2: int) -> Scalar:
    """Firm 1's win probability when the lower firm wins with fixed p.

    Ties in reputation count firm 1 as the higher firm.
    """
    if not 0 < p < Fraction(1, 2):
        raise ParameterError(f"fixed win probability must lie in (0, 1/2), got {p}")
    if x1 < 1 or x2 < 1:
        raise ParameterError(f"reputations must be >= 1, got ({x1}, {x2})")
    return 1 - p if x1 >= x2 else p


class CompetitionRule:
    """Maps a reputation pair to firm 1's win probability."""

    rule_id: str = "custom"

    def win_prob(self, x1: int, x2: int) -> Scalar:
        raise NotImplementedError

    def win_prob_vec(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        """Vectorized float win probability; default falls back to win_prob."""
        out = np.empty(np.broadcast(x1, x2).shape, dtype=np.float64)
        flat1 = np.asarray(x1).ravel()
        flat2 = np.broadcast_to(x2, np.shape(x1)).ravel()
        for i, (a, b) in enumerate(zip(flat1, flat2)):
            out.ravel()[i] = float(self.win_prob(int(a), int(b)))
        return out

    @property
    def exact_capable(self) -> bool:
        return False

    def params(self) -> dict:
        return {}

    def describe(self) -> str:
        ps = self.params()
        if not ps:
            return self.rule_id
        inner = ",".join(f"{k}={v}" for k, v in sorted(ps.items()))
        return f"{self.rule_id}({inner})"

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.describe()}>"

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, CompetitionRule)
            and self.rule_id == other.rule_id
            and self.params() == other.params()
        )

    def __hash__(self) -> int:
        return hash((self.rule_id, tuple(sorted(self.params().items()))))


class TullockRule(CompetitionRule):
    """Win probability proportional to reputation: x1/(x1+x2)."""

    rule_id = "tullock"

    def win_prob(self, x1: int, x2: int) -> Fraction:
        return tullock_prob(x1, x2)

    def win_prob_vec(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        x1 = np.asarray(x1, dtype=np.float64)
        x2 = np.asarray(x2, dtype=np.float64)
        return x1 / (x1 + x2)

    @property
    def exact_capable(self) -> bool:
        return True


class FixedPRule(CompetitionRule):
    """The lower firm wins with fixed probability p < 1/2; ties favor firm 1.

    Pass p as a Fraction for exact-mode games.
    """

    rule_id = "fixedp"

    def __init__(self, p: Scalar):
        if not 0 < p < Fraction(1, 2):
            raise ParameterError(f"fixed win probability must lie in (0, 1/2), got {p}")
        self.p = p

    def win_prob(self, x1: int, x2: int) -> Scalar:
        return fixed_p_prob(self.p, x1, x2)

    def win_prob_vec(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        p = float(self.p)
        return np.where(np.asarray(x1) >= np.asarray(x2), 1.0 - p, p)

    @property
    def exact_capable(self) -> bool:
        return isinstance(self.p, (Fraction, int))

    def params(self) -> dict:
        return {"p": self.p}


class CustomRule(CompetitionRule):
    """Wraps a user-supplied c(x1, x2) -> (0, 1) callable.

    Custom rules are not trusted: the solver validates the competition
    axioms on the reachable grid before use. For exact-mode games the
    callable must return Fraction (or int) values.
    """

    def __init__(self, fn: Callable[[int, int], Scalar], rule_id: str = "custom",
                 params: dict | None = None):
        self._fn = fn
        self.rule_id = rule_id
        self._params = dict(params or {})

    def win_prob(self, x1: int, x2: int) -> Scalar:
        return self._fn(x1, x2)

    @property
    def exact_capable(self) -> bool:
        return isinstance(self._fn(1, 1), (Fraction, int))

    def params(self) -> dict:
        return dict(self._params)


BUILTIN_RULES = ("tullock", "fixedp")


def make_rule(rule_id: str, p: Scalar | None = None) -> CompetitionRule:
    if rule_id == "tullock":
        return TullockRule()
    if rule_id == "fixedp":
        if p is None:
            raise ParameterError("fixedp rule requires p")
        return FixedPRule(p)
    raise ParameterError(f"unknown rule {rule_id!r}")


@dataclass(frozen=True)
class RuleValidationReport:
    ok: bool
    grid_max: int
    rule: str
    axiom: str | None = None
    witness: tuple[int, int] | None = None
    detail: str = ""


def validate_competition_rule(rule: CompetitionRule, grid_max: int) -> RuleValidationReport:
    """Check the three competition-function axioms on [1, grid_max]^2 at step 1.

    Axioms: monotone in both arguments (helping x1, hurting x2), win
    probabilities of the two orderings sum to 1 off the diagonal, and the
    diagonal favors firm 1 (c(x,x) >= 1/2). Reports the first violation.
    """
    if grid_max < 2:
        raise ParameterError(f"grid_max must be >= 2, got {grid_max}")

    def fail(axiom: str, witness: tuple[int, int], detail: str) -> RuleValidationReport:
        return RuleValidationReport(False, grid_max, rule.describe(), axiom, witness, detail)

    tol = 1e-12
    c = rule.win_prob
    for x1 in range(1, grid_max + 1):
        for x2 in range(1, grid_max + 1):
            c0 = c(x1, x2)
            if not 0 < c0 < 1:
                return fail("range", (x1, x2), f"c({x1},{x2})={c0} outside (0,1)")
            is_float = isinstance(c0, float)
            slack = tol if is_float else 0
            if c(x1, x2 + 1) > c0 + slack:
                return fail("monotone", (x1, x2),
                            f"c({x1},{x2 + 1}) > c({x1},{x2})")
            if c0 > c(x1 + 1, x2) + slack:
                return fail("monotone", (x1, x2),
                            f"c({x1},{x2}) > c({x1 + 1},{x2})")
            if x1 != x2 and abs(c0 + c(x2, x1) - 1) > slack:
                return fail("antisymmetry", (x1, x2),
                            f"c({x1},{x2}) + c({x2},{x1}) != 1")
            if x1 == x2 and c0 < Fraction(1, 2) - slack:
                return fail("diagonal", (x1, x2), f"c({x1},{x1})={c0} < 1/2")
    return RuleValidationReport(True, grid_max, rule.describe())


def parse_scalar(text: str) -> tuple[Scalar, bool]:
    """Parse "num/den" to an exact Fraction or a decimal to float.

    Returns (value, is_ratio). Raises ParameterError on malformed input.
    """
    text = text.strip()
    if "/" in text:
        num, _, den = text.partition("/")
        try:
            value = Fraction(int(num), int(den))
        except (ValueError, ZeroDivisionError) as exc:
            raise ParameterError(f"malformed ratio {text!r}: {exc}") from None
        return value, True
    try:
        return float(text), False
    except ValueError:
        raise ParameterError(f"malformed number {text!r}") from None


def format_scalar(value: Scalar) -> str:
    """Serialize a scalar so it round-trips bit-exactly in its mode."""
    if isinstance(value, Fraction):
        return str(value)
    return repr(float(value))


def _validate_quality(q: Scalar) -> None:
    if not 0 < q < 1:
        raise ParameterError(f"weak-candidate quality must lie in (0, 1), got {q}")


@dataclass(frozen=True)
class GameSpec:
    """Full instance: rounds, quality gap, starting reputations, rule, mode.

    ``numeric_mode`` defaults to exact when q is a Fraction and float
    otherwise. Exact mode requires q (and any rule parameters) to be
    rational so that indifference comparisons are exact.
    """

    k: int
    q: Scalar
    x1: int = 1
    x2: int = 1
    rule: CompetitionRule = field(default_factory=TullockRule)
    numeric_mode: str | None = None

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 0:
            raise ParameterError(f"round count must be a non-negative integer, got {self.k}")
        for name, x in (("x1", self.x1), ("x2", self.x2)):
            if not isinstance(x, int) or x < 1:
                raise ParameterError(f"{name} must be an integer >= 1, got {x}")
        _validate_quality(self.q)
        mode = self.numeric_mode
        if mode is None:
            mode = EXACT if isinstance(self.q, Fraction) else FLOAT
            object.__setattr__(self, "numeric_mode", mode)
        if mode not in (EXACT, FLOAT):
            raise ParameterError(f"numeric_mode must be 'exact' or 'float', got {mode!r}")
        if mode == EXACT:
            if not isinstance(self.q, Fraction):
                raise ParameterError("exact mode requires q as a ratio of integers")
            if not self.rule.exact_capable:
                raise ParameterError(
                    f"rule {self.rule.describe()} cannot produce exact probabilities")
        else:
            object.__setattr__(self, "q", float(self.q))

    @property
    def is_exact(self) -> bool:
        return self.numeric_mode == EXACT

    @property
    def state_count(self) -> int:
        """Number of states reachable from the root: (k+1)(k+2)/2."""
        return (self.k + 1) * (self.k + 2) // 2

    @property
    def zero(self) -> Scalar:
        return Fraction(0) if self.is_exact else 0.0

    def describe(self) -> str:
        return (f"G(k={self.k}, q={self.q}, start=({self.x1},{self.x2}), "
                f"rule={self.rule.describe()}, mode={self.numeric_mode})")

    def cache_key_material(self) -> str:
        return "|".join([
            str(self.k), format_scalar(self.q), str(self.x1), str(self.x2),
            self.rule.rule_id,
            ",".join(f"{k}={format_scalar(v) if isinstance(v, (Fraction, float)) else v}"
                     for k, v in sorted(self.rule.params().items())),
            self.numeric_mode,
        ])


def float_tie_tol(a: float, b: float) -> float:
    """Indifference band for the float-mode compete-vs-yield comparison."""
    return TIE_REL_TOL * max(1.0, abs(a), abs(b))


def is_strictly_better(compete: Scalar, stay: Scalar, exact: bool) -> bool:
    """Lower player competes only on a strict improvement; ties yield."""
    if exact:
        return compete > stay
    return compete - stay > float_tie_tol(compete, stay)


def math_isclose(a: float, b: float, rel: float = 1e-9) -> bool:
    return math.isclose(a, b, rel_tol=rel, abs_tol=rel)
