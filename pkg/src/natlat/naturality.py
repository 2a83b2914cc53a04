"""Mediation, redundancy, naturality, and the translation guarantees.

A latent *mediates* between observables when they are mutually independent
given it; the error is the factorization error against the star graph
(latent pointing at every observable), in bits.  A latent is a *redund*
when each observable alone determines it; the per-observable error is the
conditional entropy of the latent given that observable.  A latent
satisfying both conditions is a *natural latent*.

The central quantitative fact checked here: for two observables, any
mediator determines any redund to within

    eps_med + 2 * max_i eps_red_i

bits of conditional entropy.  The same bound is derived symbolically by
the rule engine (see :mod:`natlat.rules`); :func:`theorem_bound_expression`
exposes it for the cross-module consistency check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .dag import Dag, factorization_error
from .dist import JointDistribution, kl_divergence, max_abs_diff
from .errors import AgreementError, FormatError, ModelError
from .rules import EpsilonExpr
from .sampling import rng_for, theorem_instance

#: Epsilons at or below this are treated as exact.
EXACT_EPS = 1e-9

#: Slack allowed when checking the theorem bound numerically.
THEOREM_TOLERANCE = 1e-9

#: Default maximum absolute cell difference allowed between two agents'
#: predictions over shared observables.
AGREEMENT_TOLERANCE = 1e-6

MEDIATION_EPS_NAME = "eps_med"
REDUNDANCY_EPS_NAME = "eps_red"


@dataclass(frozen=True)
class AgentModel:
    """A joint distribution with variables split into observables and latents.

    Multiple latent variables are always analyzed jointly, as one
    product-alphabet latent.
    """

    joint: JointDistribution
    observables: tuple[str, ...]
    latents: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "observables", tuple(self.observables))
        object.__setattr__(self, "latents", tuple(self.latents))
        obs, lat = set(self.observables), set(self.latents)
        if len(obs) != len(self.observables) or len(lat) != len(self.latents):
            raise ModelError("duplicate names in observables or latents")
        if obs & lat:
            raise ModelError(f"observables and latents overlap on {sorted(obs & lat)}")
        if obs | lat != set(self.joint.names):
            raise ModelError(
                f"roles {sorted(obs | lat)} do not cover the joint's variables "
                f"{sorted(self.joint.names)}"
            )
        if len(self.observables) < 2:
            raise ModelError("a model needs at least two observables")
        if not self.latents:
            raise ModelError("a model needs at least one latent variable")

    @classmethod
    def from_text(cls, text: str) -> "AgentModel":
        """Parse the model format: a ``roles`` header line, then the
        distribution format."""
        lines = text.splitlines()
        roles: tuple[tuple[str, ...], tuple[str, ...]] | None = None
        for i, raw in enumerate(lines):
            cut = raw.find("#")
            tokens = (raw if cut < 0 else raw[:cut]).split()
            if not tokens:
                continue
            if tokens[0] != "roles":
                raise FormatError(
                    f"expected 'roles' header line, got {tokens[0]!r}", i + 1
                )
            roles = _parse_roles(tokens, i + 1)
            lines[i] = "#"  # keep line numbers stable for later diagnostics
            break
        if roles is None:
            raise FormatError("no 'roles' line found")
        joint = JointDistribution.from_text("\n".join(lines))
        try:
            return cls(joint, roles[0], roles[1])
        except ModelError as exc:
            raise FormatError(str(exc)) from exc

    def to_text(self) -> str:
        header = (
            f"roles obs:{','.join(self.observables)} "
            f"latent:{','.join(self.latents)}"
        )
        return header + "\n" + self.joint.to_text()


def _parse_roles(
    tokens: list[str], lineno: int
) -> tuple[tuple[str, ...], tuple[str, ...]]:
    if len(tokens) != 3:
        raise FormatError(
            "expected 'roles obs:<name,...> latent:<name,...>'", lineno
        )
    fields = {}
    for token in tokens[1:]:
        key, sep, value = token.partition(":")
        if not sep or key not in ("obs", "latent") or not value:
            raise FormatError(f"bad roles field {token!r}", lineno)
        fields[key] = tuple(value.split(","))
    if set(fields) != {"obs", "latent"}:
        raise FormatError("roles line needs both obs: and latent: fields", lineno)
    return fields["obs"], fields["latent"]


@dataclass(frozen=True)
class NaturalityReport:
    """Mediation and per-observable redundancy errors, in bits."""

    eps_mediation_bits: float
    eps_redundancy_bits: tuple[float, ...]
    eps_redundancy_max_bits: float
    is_exact: bool

    def __post_init__(self):
        if self.eps_mediation_bits < 0.0 or any(
            e < 0.0 for e in self.eps_redundancy_bits
        ):
            raise ModelError("naturality epsilons must be non-negative")
        if self.eps_redundancy_max_bits != max(self.eps_redundancy_bits):
            raise ModelError("redundancy max does not match the list")

    @classmethod
    def build(
        cls, eps_med: float, eps_red: Sequence[float]
    ) -> "NaturalityReport":
        eps_red = tuple(eps_red)
        return cls(
            eps_med,
            eps_red,
            max(eps_red),
            eps_med <= EXACT_EPS and all(e <= EXACT_EPS for e in eps_red),
        )


def mediation_dag(observables: Sequence[str], latents: Sequence[str]) -> Dag:
    """Star graph: latents (chained completely among themselves) point at
    every observable.  Its factorization is P[latent] * prod_j P[X_j | latent]."""
    latents = tuple(latents)
    edges = [
        (latents[i], latents[j])
        for i in range(len(latents))
        for j in range(i + 1, len(latents))
    ]
    edges += [(l, o) for l in latents for o in observables]
    return Dag(tuple(observables) + latents, edges)


def mediation_error(model: AgentModel) -> float:
    """Bits by which the observables fail to be independent given the latent."""
    graph = mediation_dag(model.observables, model.latents)
    return factorization_error(model.joint, graph).epsilon_bits


def redundancy_errors(model: AgentModel) -> tuple[float, ...]:
    """H(latent | X_i) for each observable X_i, in bits."""
    return tuple(
        model.joint.conditional_entropy(model.latents, {obs})
        for obs in model.observables
    )


def naturality_report(model: AgentModel) -> NaturalityReport:
    return NaturalityReport.build(mediation_error(model), redundancy_errors(model))


# -- mediator determines redund ------------------------------------------------


@dataclass(frozen=True)
class TheoremCheck:
    """Quantities entering the mediator-determines-redund bound."""

    eps_mediation_bits: float
    eps_redundancy_bits: tuple[float, ...]
    eps_redundancy_max_bits: float
    conclusion_entropy_bits: float
    bound_bits: float
    holds: bool

    @property
    def slack_bits(self) -> float:
        return self.bound_bits - self.conclusion_entropy_bits


def theorem_bound_expression() -> EpsilonExpr:
    """The two-observable bound, symbolically: eps_med + 2 * eps_red."""
    return EpsilonExpr({MEDIATION_EPS_NAME: 1.0, REDUNDANCY_EPS_NAME: 2.0})


def mediator_determines_redund(
    joint: JointDistribution,
    observables: Sequence[str],
    mediator: Sequence[str] | str,
    redund: Sequence[str] | str,
    tolerance: float = THEOREM_TOLERANCE,
) -> TheoremCheck:
    """Check H(redund | mediator) <= eps_med + 2 * max_i eps_red_i.

    The quantitative bound is certified for exactly two observables.  A
    failed verdict would falsify the underlying theorem, so callers treat
    it as a test failure rather than a runtime error.
    """
    observables = tuple(observables)
    mediator = (mediator,) if isinstance(mediator, str) else tuple(mediator)
    redund = (redund,) if isinstance(redund, str) else tuple(redund)
    if len(observables) != 2:
        raise ModelError(
            "the certified bound covers exactly two observables; "
            "chunk the observables into two blocks first"
        )
    groups = [set(observables), set(mediator), set(redund)]
    for i in range(3):
        for j in range(i + 1, 3):
            if groups[i] & groups[j]:
                raise ModelError(
                    f"roles overlap on {sorted(groups[i] & groups[j])}"
                )
    eps_med = mediation_error(
        AgentModel(
            joint.marginalize(observables + mediator), observables, mediator
        )
    )
    eps_red = tuple(
        joint.conditional_entropy(redund, {obs}) for obs in observables
    )
    conclusion = joint.conditional_entropy(redund, mediator)
    bound = theorem_bound_expression().evaluate(
        {MEDIATION_EPS_NAME: eps_med, REDUNDANCY_EPS_NAME: max(eps_red)}
    )
    return TheoremCheck(
        eps_med, eps_red, max(eps_red), conclusion, bound,
        conclusion <= bound + tolerance,
    )


@dataclass(frozen=True)
class SweepReport:
    """Aggregate of a randomized theorem-bound sweep."""

    samples: int
    violations: int
    min_slack_bits: float
    max_slack_bits: float
    seed: int

    @property
    def ok(self) -> bool:
        return self.violations == 0


def theorem_sweep(seed: int, samples: int, max_card: int = 4) -> SweepReport:
    """Run the bound check on seeded random instances; see
    :func:`natlat.sampling.theorem_instance` for the constructions."""
    if samples < 1:
        raise ModelError(f"sample count must be >= 1, got {samples}")
    violations = 0
    min_slack, max_slack = math.inf, -math.inf
    for index in range(samples):
        joint = theorem_instance(rng_for(seed, index), max_card=max_card)
        check = mediator_determines_redund(joint, ("X1", "X2"), "M", "R")
        min_slack = min(min_slack, check.slack_bits)
        max_slack = max(max_slack, check.slack_bits)
        if not check.holds:
            violations += 1
    return SweepReport(samples, violations, min_slack, max_slack, seed)


# -- translatability ---------------------------------------------------------------


@dataclass(frozen=True)
class TranslatabilityAudit:
    """Whether a two-observable latent can guarantee translation.

    Guaranteed translation into any other agreeing model's mediating
    latent requires the latent to be natural: mediation plus redundancy
    with respect to each observable, all within the caller's threshold.
    """

    eps_mediation_bits: float
    eps_redundancy_bits: tuple[float, float]
    threshold_bits: float
    mediation_ok: bool
    redundancy_ok: bool

    @property
    def passes(self) -> bool:
        return self.mediation_ok and self.redundancy_ok


def translatability_audit(
    model: AgentModel, threshold_bits: float
) -> TranslatabilityAudit:
    if len(model.observables) != 2:
        raise ModelError("translatability audit requires exactly two observables")
    if threshold_bits < 0.0:
        raise ModelError(f"threshold must be >= 0, got {threshold_bits}")
    eps_med = mediation_error(model)
    eps_red = redundancy_errors(model)
    return TranslatabilityAudit(
        eps_med,
        (eps_red[0], eps_red[1]),
        threshold_bits,
        eps_med <= threshold_bits,
        max(eps_red) <= threshold_bits,
    )


def cross_agent_translation(
    alice: AgentModel,
    bob: AgentModel,
    coupling: JointDistribution,
    agreement_tolerance: float = AGREEMENT_TOLERANCE,
) -> tuple[float, float]:
    """Conditional entropies (H(latent_A | latent_B), H(latent_B | latent_A))
    under a coupling of the two models.

    The models must agree on their shared observables (max absolute cell
    difference within ``agreement_tolerance``) and the coupling must
    marginalize back to each model.
    """
    if set(alice.observables) != set(bob.observables):
        raise ModelError(
            f"observable sets differ: {sorted(alice.observables)} vs "
            f"{sorted(bob.observables)}"
        )
    if set(alice.latents) & set(bob.latents):
        raise ModelError("the two models' latents must use distinct names")
    obs = alice.observables
    diff = max_abs_diff(
        alice.joint.marginalize(obs),
        bob.joint.marginalize(obs).reordered(
            tuple(n for n in alice.joint.names if n in set(obs))
        ),
    )
    if diff > agreement_tolerance:
        raise AgreementError("models disagree on observables", diff)
    expected = set(obs) | set(alice.latents) | set(bob.latents)
    if set(coupling.names) != expected:
        raise ModelError(
            f"coupling variables {sorted(coupling.names)} do not match "
            f"{sorted(expected)}"
        )
    for model in (alice, bob):
        keep = tuple(
            n for n in coupling.names
            if n in set(model.joint.names)
        )
        restricted = coupling.marginalize(keep).reordered(model.joint.names)
        diff = max_abs_diff(restricted, model.joint)
        if diff > agreement_tolerance:
            raise AgreementError(
                "coupling does not marginalize to the agent models", diff
            )
    return (
        coupling.conditional_entropy(alice.latents, bob.latents),
        coupling.conditional_entropy(bob.latents, alice.latents),
    )
