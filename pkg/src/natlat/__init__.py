"""Natural-latent analysis for discrete joint distributions.

Exact probability tables with information quantities in bits, DAG
factorization-error semantics, the naturality conditions (mediation and
redundancy) with their quantitative translation guarantees, a symbolic
proof-rule engine with numeric validation, exact natural latent search,
and the canonical coinflip/die scenarios.
"""

from .dag import (
    Dag,
    FactorizationError,
    common_topological_order,
    d_separated,
    d_separated_bayes_ball,
    d_separated_moralization,
    factorization_error,
    factorization_projection,
    graph_implies,
)
from .dist import (
    DENSE_CELL_LIMIT,
    JointDistribution,
    VarSpec,
    kl_divergence,
    max_abs_diff,
)
from .errors import (
    AgreementError,
    DerivationError,
    DistributionError,
    FormatError,
    GraphError,
    ModelError,
    NatlatError,
    RuleInapplicableError,
    UnsupportedEvidenceError,
)
from .naturality import (
    AgentModel,
    NaturalityReport,
    SweepReport,
    TheoremCheck,
    TranslatabilityAudit,
    cross_agent_translation,
    mediation_dag,
    mediation_error,
    mediator_determines_redund,
    naturality_report,
    redundancy_errors,
    theorem_bound_expression,
    theorem_sweep,
    translatability_audit,
)
from .rules import (
    Derivation,
    DiagramJudgment,
    EpsilonExpr,
    StepValidation,
    ValidationConfig,
    replay_theorem1,
    run_script,
    theorem1_script,
    validate_derivation,
    validate_rule,
)
from .scenarios import (
    CoinExampleConfig,
    coin_batch_joint,
    coin_joint_model,
    coin_median_entropy,
    coin_theorem_bound,
    die_fixture,
    die_rolls_fixture,
)
from .search import (
    DeterministicLatent,
    chunk_model,
    chunk_observables,
    evaluate_candidate,
    exact_natural_latent,
    parse_label_maps,
)

__version__ = "0.1.0"

__all__ = [
    "AgentModel",
    "AgreementError",
    "CoinExampleConfig",
    "Dag",
    "DENSE_CELL_LIMIT",
    "DerivationError",
    "Derivation",
    "DeterministicLatent",
    "DiagramJudgment",
    "DistributionError",
    "EpsilonExpr",
    "FactorizationError",
    "FormatError",
    "GraphError",
    "JointDistribution",
    "ModelError",
    "NatlatError",
    "NaturalityReport",
    "RuleInapplicableError",
    "StepValidation",
    "SweepReport",
    "TheoremCheck",
    "TranslatabilityAudit",
    "UnsupportedEvidenceError",
    "ValidationConfig",
    "VarSpec",
    "chunk_model",
    "chunk_observables",
    "coin_batch_joint",
    "coin_joint_model",
    "coin_median_entropy",
    "coin_theorem_bound",
    "common_topological_order",
    "cross_agent_translation",
    "d_separated",
    "d_separated_bayes_ball",
    "d_separated_moralization",
    "die_fixture",
    "die_rolls_fixture",
    "evaluate_candidate",
    "exact_natural_latent",
    "factorization_error",
    "factorization_projection",
    "graph_implies",
    "kl_divergence",
    "max_abs_diff",
    "mediation_dag",
    "mediation_error",
    "mediator_determines_redund",
    "naturality_report",
    "parse_label_maps",
    "redundancy_errors",
    "replay_theorem1",
    "run_script",
    "theorem1_script",
    "theorem_bound_expression",
    "theorem_sweep",
    "translatability_audit",
    "validate_derivation",
    "validate_rule",
]
