"""Welfare ratios, stop thresholds, and closed-form utility bounds.

Collects the quantitative story around canonical play: how equilibrium
welfare compares to the first-best, when firms stop competing as a
function of round count and quality gap, and the binomial-tail bounds on
a trailing firm's utility that drive the long-game limits, for both the
proportional and the fixed-probability competition rules.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .core import (
    FLOAT,
    CompetitionRule,
    GameSpec,
    ParameterError,
    Profile,
    Scalar,
    TIE_REL_TOL,
    TullockRule,
    format_scalar,
)
from .equilibrium import RETAIN_FULL, RETAIN_ROOT, EquilibriumTable, solve

SWEEP_FORMAT_VERSION = 1


def yield_threshold(q: Scalar) -> Scalar:
    """Relative-reputation level below which a trailing firm gives up."""
    half = Fraction(1, 2) if isinstance(q, Fraction) else 0.5
    return min(q, half)


# -- performance ratio --------------------------------------------------------


@dataclass(frozen=True)
class PerformanceReport:
    """Equilibrium welfare against the full-employment optimum k(1+q)."""

    k: int
    q: Scalar
    x1: int
    x2: int
    rule: str
    welfare: Scalar
    optimum: Scalar
    ratio: Scalar

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "q": format_scalar(self.q),
            "x1": self.x1,
            "x2": self.x2,
            "rule": self.rule,
            "welfare": format_scalar(self.welfare),
            "optimum": format_scalar(self.optimum),
            "ratio": format_scalar(self.ratio),
        }


def performance_ratio(table: EquilibriumTable) -> PerformanceReport:
    """Welfare of canonical play divided by k(1+q).

    The optimum matches both candidates every round regardless of the
    starting reputations.
    """
    spec = table.spec
    if spec.k == 0:
        raise ParameterError("performance ratio is undefined for a zero-round game")
    welfare = table.welfare
    optimum = spec.k * (1 + spec.q)
    return PerformanceReport(spec.k, spec.q, spec.x1, spec.x2,
                             spec.rule.describe(), welfare, optimum,
                             welfare / optimum)


def welfare_lower_bound(q: Scalar) -> Scalar:
    """Every game's ratio is at least 2q/(1+q): both firms can lock in q per round."""
    return 2 * q / (1 + q)


# -- round-count structure (fixed k) ------------------------------------------


def never_compete_threshold(k: int, q: Scalar) -> bool:
    """True when the quality gap is so small no state is worth a fight.

    Holds for q >= k/(k+1); solved tables then contain no both-strong
    state and the ratio is exactly 1.
    """
    if k < 1:
        raise ParameterError(f"round count must be >= 1, got {k}")
    if isinstance(q, Fraction):
        return q >= Fraction(k, k + 1)
    return q >= k / (k + 1)


def compete_once_window(k: int, q: Scalar) -> bool:
    """True when equal-start firms fight exactly once then split.

    The window is q/(1-q) < k <= 1/(1-q); inside it the root competes,
    every deeper state does not, and the ratio is
    (1 + (k-1)(1+q)) / (k(1+q)).
    """
    if k < 1:
        raise ParameterError(f"round count must be >= 1, got {k}")
    lo = q / (1 - q)
    hi = 1 / (1 - q)
    return lo < k <= hi


def compete_once_ratio(k: int, q: Scalar) -> Scalar:
    """Ratio of a compete-once game: one fight, then full employment."""
    return (1 + (k - 1) * (1 + q)) / (k * (1 + q))


class WorstCaseRounds(NamedTuple):
    k: int
    ratio: Scalar
    solved_ratio: Scalar


def worst_case_rounds(q: Scalar, *, start: int = 1,
                      rule: CompetitionRule | None = None) -> WorstCaseRounds:
    """Round count at which the ratio dips lowest for q > 1/2.

    Writing e = ceil(q/(1-q)) - q/(1-q), the worst count is
    k = q/(1-q) + e and the ratio there is
    (2q^2 + e - e q^2) / (q + q^2 + e - e q^2). Requires e > 0: when
    q/(1-q) is an integer the construction does not apply. The solved
    ratio of the k-round equal-start game is returned for cross-checking;
    the two agree exactly in exact mode.
    """
    half = Fraction(1, 2) if isinstance(q, Fraction) else 0.5
    if not q > half:
        raise ParameterError(f"worst-case round count needs q > 1/2, got {q}")
    z = q / (1 - q)
    if isinstance(q, Fraction):
        k = -(-z.numerator // z.denominator)  # ceil
        eps = k - z
        if eps == 0:
            raise ParameterError(
                f"q/(1-q) = {z} is an integer; the worst-case count is undefined")
    else:
        k = math.ceil(z)
        eps = k - z
        if eps <= 1e-12:
            raise ParameterError(
                f"q/(1-q) = {z} is integral to within 1e-12; refusing")
    q2 = q * q
    ratio = (2 * q2 + eps - eps * q2) / (q + q2 + eps - eps * q2)
    spec = GameSpec(k=int(k), q=q, x1=start, x2=start,
                    rule=rule or TullockRule())
    solved = performance_ratio(solve(spec, retain=RETAIN_ROOT)).ratio
    return WorstCaseRounds(int(k), ratio, solved)


# -- urn splits and forced competition ----------------------------------------


def urn_split_distribution(x1: int, x2: int, t: int, *, exact: bool = True):
    """Law of firm 2's win count over t forced competition rounds.

    While both firms compete, reputations reinforce exactly like an urn
    holding x1 balls of one color and x2 of the other. From (1, 1) the
    split after t rounds is uniform over the t+1 outcomes; general starts
    use the O(t^2) forward recursion. Returns P(i) for i = 0..t.
    """
    if t < 0:
        raise ParameterError(f"round count must be >= 0, got {t}")
    if x1 < 1 or x2 < 1:
        raise ParameterError(f"reputations must be >= 1, got ({x1}, {x2})")
    if exact:
        if x1 == 1 and x2 == 1:
            u = Fraction(1, t + 1)
            return [u] * (t + 1)
        probs = [Fraction(1)]
        for r in range(t):
            total = x1 + x2 + r
            nxt = [Fraction(0)] * (len(probs) + 1)
            for i, p in enumerate(probs):
                nxt[i + 1] += p * Fraction(x2 + i, total)
                nxt[i] += p * Fraction(x1 + (r - i), total)
            probs = nxt
        return probs
    if x1 == 1 and x2 == 1:
        return np.full(t + 1, 1.0 / (t + 1))
    probs = np.zeros(t + 1)
    probs[0] = 1.0
    for r in range(t):
        total = x1 + x2 + r
        wins = np.arange(r + 1)
        step = probs[: r + 1]
        nxt = np.zeros(t + 1)
        nxt[1: r + 2] += step * (x2 + wins) / total
        nxt[: r + 1] += step * (x1 + (r - wins)) / total
        probs = nxt
    return probs


def forced_compete_welfare(spec: GameSpec, forced_rounds: int, *,
                           table: EquilibriumTable | None = None) -> Scalar:
    """Expected welfare when both firms must compete for the first rounds.

    Each forced round employs only the strong candidate (welfare 1); the
    game then continues canonically from the realized split. Forcing can
    only hurt: canonical welfare weakly dominates this for every choice
    of forced prefix. Pass a solved full table for the spec to avoid an
    internal solve.
    """
    if not 0 <= forced_rounds < spec.k:
        raise ParameterError(
            f"forced rounds must lie in [0, k), got {forced_rounds} with k={spec.k}")
    if table is None:
        table = solve(spec, retain=RETAIN_FULL)
    elif table.spec != spec and table.spec.describe() != spec.describe():
        raise ParameterError("table was solved for a different game")
    if table.retention != RETAIN_FULL:
        raise ParameterError("forced_compete_welfare needs a retain='full' table")
    t = forced_rounds
    if t == 0:
        return table.welfare
    splits = urn_split_distribution(spec.x1, spec.x2, t, exact=spec.is_exact)
    remaining = spec.k - t
    acc = spec.zero
    for i in range(t + 1):
        v = table.value_at(remaining, spec.x1 + t - i)
        acc = acc + splits[i] * (v.u1 + v.u2)
    return t + acc


# -- binomial helpers ----------------------------------------------------------


@dataclass(frozen=True)
class BinomialTriple:
    """pmf over 0..t and the cdf at x for a Binomial(t, r) count."""

    r: Scalar
    t: int
    x: int
    pmf: tuple
    cdf: Scalar

    def pmf_at(self, i: int) -> Scalar:
        return self.pmf[i]

    def cdf_at(self, x: int) -> Scalar:
        if x < 0:
            return self.pmf[0] * 0
        return sum(self.pmf[: min(x, self.t) + 1])


def binomial_pmf_cdf(r: Scalar, t: int, x: int) -> BinomialTriple:
    """Stable binomial pmf/cdf: exact for rational r, log-space for float."""
    if not 0 < r < 1:
        raise ParameterError(f"success probability must lie in (0,1), got {r}")
    if t < 0:
        raise ParameterError(f"trial count must be >= 0, got {t}")
    if not 0 <= x <= t:
        raise ParameterError(f"threshold must lie in [0, {t}], got {x}")
    if isinstance(r, Fraction):
        pmf = tuple(math.comb(t, i) * r**i * (1 - r) ** (t - i)
                    for i in range(t + 1))
        return BinomialTriple(r, t, x, pmf, sum(pmf[: x + 1]))
    log_r = math.log(r)
    log_1mr = math.log1p(-r)
    lg = math.lgamma
    lgt = lg(t + 1)
    pmf = tuple(
        math.exp(lgt - lg(i + 1) - lg(t - i + 1) + i * log_r + (t - i) * log_1mr)
        for i in range(t + 1))
    return BinomialTriple(r, t, x, pmf, math.fsum(pmf[: x + 1]))


# -- trailing-firm utility bounds (proportional rule) ---------------------------


def min_rounds_for_bound(q: Scalar) -> float:
    """Competition streak above which the binomial-tail bound applies."""
    cut = float(yield_threshold(q))
    return 4 * math.log(1 / 12) / math.log(1 - cut)


def underdog_utility_bound(q: Scalar, k: int, t: int, x: int) -> Scalar:
    """Closed-form cap on a trailing firm's k-round utility.

    After t rounds of competition won x times, a firm's utility is at
    most x/t + 3F(x)k + (1 - 3F(x))(k-1)q where F is the Binomial(t, cut)
    cdf with cut = min(q, 1/2): either the urn bias landed favorably
    (win everything) or the firm settles for q per round. Meaningful for
    streaks above :func:`min_rounds_for_bound`; the solved utility obeys
    max(bound, kq) there.
    """
    if t < 1:
        raise ParameterError(f"competition streak must be >= 1, got {t}")
    if not 0 <= x <= t:
        raise ParameterError(f"win count must lie in [0, {t}], got {x}")
    cut = yield_threshold(q)
    cdf = binomial_pmf_cdf(cut, t, x).cdf
    frac = Fraction(x, t) if isinstance(q, Fraction) else x / t
    return frac + 3 * cdf * k + (1 - 3 * cdf) * (k - 1) * q


def stop_threshold_tullock(q: float, eps: float, k: int) -> float:
    """Competition streak after which a firm at share min(q,1/2)-eps yields.

    Under the proportional rule, a firm whose reputation share after t
    rounds sits eps below the yield threshold earns exactly q per round
    and stops competing once t >= max(streak floor, concentration bound).
    """
    q = float(q)
    cut = float(yield_threshold(q))
    if not 0 < eps < cut:
        raise ParameterError(f"eps must lie in (0, {cut}), got {eps}")
    if k < 1:
        raise ParameterError(f"round count must be >= 1, got {k}")
    p = cut - eps
    hoeffding = (3 * math.log(k) - math.log(q - p)) / ((cut - p) ** 2)
    return max(min_rounds_for_bound(q), hoeffding)


@dataclass(frozen=True)
class StopThresholdCheck:
    q: float
    eps: float
    k: int
    t_star: float
    t: int
    x1: int
    x2: int
    root_profile: str
    ok: bool
    detail: str = ""


def check_stop_threshold(q: float, eps: float, k: int,
                         rule: CompetitionRule | None = None) -> StopThresholdCheck:
    """Solve at the threshold start and confirm the trailing firm never bids strong.

    Materializes t = ceil(t*) rounds of presumed competition, places firm 2
    at floor((cut - eps) * t) reputation, and walks the equilibrium path:
    the root must prescribe yielding and yielding must persist to the end.
    """
    t_star = stop_threshold_tullock(q, eps, k)
    t = math.ceil(t_star)
    cut = float(yield_threshold(q))
    x2 = max(1, math.floor((cut - eps) * t))
    x1 = t - x2
    spec = GameSpec(k=k, q=float(q), x1=x1, x2=x2,
                    rule=rule or TullockRule(), numeric_mode=FLOAT)
    table = solve(spec, retain="profiles")
    j, cx1 = k, x1
    ok = True
    detail = ""
    while j >= 1:
        prof = table.profile_at(j, cx1)
        if prof != Profile.P1_STRONG:
            ok = False
            detail = f"firm 2 bids strong at remaining={j}, x1={cx1}"
            break
        cx1 += 1
        j -= 1
    return StopThresholdCheck(q, eps, k, t_star, t, x1, x2,
                              table.root.profile.label, ok, detail)


def limit_performance_ratio(q: Scalar) -> Scalar:
    """Long-game limit of the ratio: (1 + 2q min(q,1/2)) / (1 + q)."""
    if not 0 < q < 1:
        raise ParameterError(f"quality must lie in (0,1), got {q}")
    return (1 + 2 * q * yield_threshold(q)) / (1 + q)


# -- fixed-probability rule ----------------------------------------------------


def fixed_p_underdog_bound(q: Scalar, p: Scalar, k: int, d: int) -> Scalar:
    """Cap on the trailing firm's utility at reputation gap d, fixed-p rule.

    Either the gap random walk ever returns to 0 (probability
    (p/(1-p))^d, credited with winning everything) or the firm settles
    for q per round. Needs p < q: otherwise competing is free and the
    firms never stop.
    """
    if d < 0:
        raise ParameterError(f"gap must be >= 0, got {d}")
    if not 0 < p < 1:
        raise ParameterError(f"p must lie in (0,1), got {p}")
    if p >= q:
        raise ParameterError(
            f"the bound needs p < q (firms compete forever otherwise); "
            f"got p={p}, q={q}")
    ret = (p / (1 - p)) ** d
    return p + ret * ((k - 1) * (1 - q) + 1) + (k - 1) * q


def fixed_p_stop_gap(q: Scalar, p: Scalar, k: int) -> int:
    """Reputation gap beyond which the trailing firm stops competing.

    Ceiling of (ln((k-1)(1-q)+1) - ln(q-p)) / ln((1-p)/p); solved tables
    show no both-strong state at any gap strictly above it.
    """
    if p >= q:
        raise ParameterError(f"needs p < q, got p={p}, q={q}")
    if not 0 < p < Fraction(1, 2):
        raise ParameterError(f"p must lie in (0, 1/2), got {p}")
    if k < 1:
        raise ParameterError(f"round count must be >= 1, got {k}")
    q = float(q)
    p = float(p)
    num = math.log((k - 1) * (1 - q) + 1) - math.log(q - p)
    return math.ceil(num / math.log((1 - p) / p))


def walk_hitting_time_bound(d: int, p: Scalar) -> float:
    """Upper bound d/(1-2p) on the mean steps for the gap walk to reach d.

    The gap between reputations under the fixed-p rule walks right with
    probability 1-p, left with p, and always steps 0 -> 1.
    """
    if d < 1:
        raise ParameterError(f"target gap must be >= 1, got {d}")
    p = float(p)
    if not 0 < p < 0.5:
        raise ParameterError(f"needs p in (0, 1/2), got {p}")
    return d / (1 - 2 * p)


# -- grid evaluation of canonical values ----------------------------------------


def iter_value_grids(rule: CompetitionRule, q: float, k_max: int, max_coord: int,
                     ) -> Iterator[tuple[int, np.ndarray, np.ndarray, int]]:
    """Float canonical values for every start on a square grid, layer by layer.

    Yields (remaining, u1, u2, valid_max) for remaining = 1..k_max where
    u1[a, b] is firm 1's value of the remaining-round game started at
    reputations (a, b); entries with a coordinate above valid_max are
    garbage. One pass prices the same game length at every start, which
    is what the bound sweeps need.
    """
    if k_max < 1:
        raise ParameterError(f"k_max must be >= 1, got {k_max}")
    if max_coord < 1:
        raise ParameterError(f"max_coord must be >= 1, got {max_coord}")
    q = float(q)
    dim = max_coord + k_max + 2
    coords = np.arange(dim, dtype=np.int64)
    x1g = coords.reshape(-1, 1)
    x2g = coords.reshape(1, -1)
    with np.errstate(invalid="ignore", divide="ignore"):
        c1 = rule.win_prob_vec(np.broadcast_to(x1g, (dim, dim)),
                               np.broadcast_to(x2g, (dim, dim)))
    c1 = np.asarray(c1, dtype=np.float64)
    higher1 = x1g >= x2g
    c1b = c1[1:-1, 1:-1]
    hib = higher1[1:-1, 1:-1]
    u1 = np.zeros((dim, dim))
    u2 = np.zeros((dim, dim))
    for j in range(1, k_max + 1):
        a1 = u1[2:, 1:-1]   # firm 1 hired strong
        b1 = u1[1:-1, 2:]   # firm 2 hired strong
        a2 = u2[2:, 1:-1]
        b2 = u2[1:-1, 2:]
        compete = np.where(hib,
                           (1 - c1b) * (1 + b2) + c1b * a2,
                           c1b * (1 + a1) + (1 - c1b) * b1)
        stay = np.where(hib, q + a2, q + b1)
        tol = TIE_REL_TOL * np.maximum(1.0, np.maximum(np.abs(compete), np.abs(stay)))
        comp = compete > stay + tol
        n1 = np.zeros((dim, dim))
        n2 = np.zeros((dim, dim))
        n1[1:-1, 1:-1] = np.where(comp, c1b * (1 + a1) + (1 - c1b) * b1,
                                  np.where(hib, 1 + a1, q + b1))
        n2[1:-1, 1:-1] = np.where(comp, c1b * a2 + (1 - c1b) * (1 + b2),
                                  np.where(hib, q + a2, 1 + b2))
        u1, u2 = n1, n2
        yield j, u1, u2, dim - 1 - j


# -- parameter sweeps ------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    k: int
    q: Scalar
    p: Scalar | None
    x1: int
    x2: int
    rule: str
    welfare: Scalar
    optimum: Scalar
    ratio: Scalar
    lower_bound_2q: Scalar
    compete_once: bool
    never_compete: bool


SWEEP_COLUMNS = ("k", "q", "p", "start_x1", "start_x2", "rule", "welfare",
                 "optimum", "ratio", "lower_bound_2q", "compete_once",
                 "never_compete")


@dataclass
class SweepReport:
    config: dict
    rows: list[SweepRow]


def run_sweep(k_values: Sequence[int], q_values: Sequence[Scalar], *,
              rule_id: str = "tullock", p_values: Sequence[Scalar] | None = None,
              x1: int = 1, x2: int = 1, numeric_mode: str = FLOAT) -> SweepReport:
    """Solve every grid point and report welfare, ratio, and regime flags.

    Rows come out in lexicographic (k, q, p) order. With the fixed-p rule
    a p grid is required; the Tullock rule takes none.
    """
    from .core import make_rule

    if not k_values or not q_values:
        raise ParameterError("sweep grids must be non-empty")
    if rule_id == "fixedp":
        if not p_values:
            raise ParameterError("fixedp sweeps need a p grid")
        p_grid: list[Scalar | None] = list(p_values)
    else:
        if p_values:
            raise ParameterError(f"rule {rule_id!r} takes no p grid")
        p_grid = [None]
    rows: list[SweepRow] = []
    for k in sorted(set(k_values)):
        for q in sorted(set(q_values)):
            for p in p_grid:
                rule = make_rule(rule_id, p) if p is not None else make_rule(rule_id)
                spec = GameSpec(k=k, q=q, x1=x1, x2=x2, rule=rule,
                                numeric_mode=numeric_mode)
                rep = performance_ratio(solve(spec, retain=RETAIN_ROOT))
                rows.append(SweepRow(
                    k=k, q=spec.q, p=p, x1=x1, x2=x2, rule=rule_id,
                    welfare=rep.welfare, optimum=rep.optimum, ratio=rep.ratio,
                    lower_bound_2q=welfare_lower_bound(spec.q),
                    compete_once=compete_once_window(k, spec.q),
                    never_compete=never_compete_threshold(k, spec.q)))
    config = {
        "format_version": SWEEP_FORMAT_VERSION,
        "k_values": sorted(set(int(k) for k in k_values)),
        "q_values": [format_scalar(q) for q in sorted(set(q_values))],
        "p_values": ([format_scalar(p) for p in p_grid]
                     if p_grid != [None] else None),
        "rule": rule_id,
        "x1": x1,
        "x2": x2,
        "numeric_mode": numeric_mode,
    }
    return SweepReport(config, rows)


def _fmt12(value: Scalar) -> str:
    return f"{float(value):.12g}"


def write_sweep_csv(report: SweepReport, path) -> None:
    """Tabular export: a # header line with the config, then 12-digit rows."""
    from . import __version__

    header = dict(report.config)
    header["artifact_version"] = __version__
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for row in report.rows:
            writer.writerow([
                row.k, _fmt12(row.q),
                "" if row.p is None else _fmt12(row.p),
                row.x1, row.x2, row.rule,
                _fmt12(row.welfare), _fmt12(row.optimum), _fmt12(row.ratio),
                _fmt12(row.lower_bound_2q),
                "true" if row.compete_once else "false",
                "true" if row.never_compete else "false",
            ])


def write_sweep_json(report: SweepReport, path) -> None:
    """Structured export carrying exact ratio strings in rational mode."""
    from . import __version__

    payload = {
        "header": {**report.config, "artifact_version": __version__},
        "rows": [
            {
                "k": row.k,
                "q": format_scalar(row.q),
                "p": None if row.p is None else format_scalar(row.p),
                "start_x1": row.x1,
                "start_x2": row.x2,
                "rule": row.rule,
                "welfare": format_scalar(row.welfare),
                "optimum": format_scalar(row.optimum),
                "ratio": format_scalar(row.ratio),
                "lower_bound_2q": format_scalar(row.lower_bound_2q),
                "compete_once": row.compete_once,
                "never_compete": row.never_compete,
            }
            for row in report.rows
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
