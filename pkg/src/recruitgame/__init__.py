"""Two-firm multi-round recruiting game: solver, analysis, and simulation."""

from .core import (
    EXACT,
    FLOAT,
    CompetitionRule,
    CustomRule,
    FixedPRule,
    FullTableRequiredError,
    GameSpec,
    ParameterError,
    Profile,
    ResourceLimitError,
    RuleValidationReport,
    TullockRule,
    fixed_p_prob,
    make_rule,
    parse_scalar,
    tullock_prob,
    validate_competition_rule,
)
from .equilibrium import (
    CanonicalEvaluator,
    EquilibriumTable,
    StateValue,
    brute_force_oracle,
    decide_profile,
    load_table,
    save_table,
    solve,
    structural_checks,
    verify_spe,
)

__version__ = "0.1.0"

__all__ = [
    "EXACT",
    "FLOAT",
    "CanonicalEvaluator",
    "CompetitionRule",
    "CustomRule",
    "EquilibriumTable",
    "FixedPRule",
    "FullTableRequiredError",
    "GameSpec",
    "ParameterError",
    "Profile",
    "ResourceLimitError",
    "RuleValidationReport",
    "StateValue",
    "TullockRule",
    "brute_force_oracle",
    "decide_profile",
    "fixed_p_prob",
    "load_table",
    "make_rule",
    "parse_scalar",
    "save_table",
    "solve",
    "structural_checks",
    "tullock_prob",
    "validate_competition_rule",
    "verify_spe",
    "__version__",
]
