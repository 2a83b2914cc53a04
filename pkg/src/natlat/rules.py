"""Symbolic calculus of diagram judgments with epsilon accounting.

A judgment pairs a DAG with a symbolic error bound (a non-negative linear
combination of named premise epsilons and constants, in bits).  Four rules
manipulate judgments inside a :class:`Derivation`:

* ``frankenstein``: given judgments over the same nodes whose graphs share
  a topological order, any graph that takes each node's incoming edges
  from one of the inputs holds within the sum of the input epsilons.
* ``factorization_transfer``: if some Q exactly satisfies a graph and
  D_KL(P || Q) <= eps, then P satisfies that graph within eps.
* ``bookkeeping``: if every distribution exactly factoring over the input
  graph also factors over a target graph, the target holds within the
  same epsilon.  Decided by checking the target's local Markov statements
  against d-separation in the input graph.
* ``dangly_bit``: if a diagram holds within eps' and Y is determined by a
  node X within eps (conditional entropy H(Y|X) <= eps), the diagram
  extended with a fresh copy of Y as a child of X holds within eps' + eps.

Determinism judgments ("X determines Y") are represented as two-node
graphs carrying a copy-pair marker rather than literal duplicate nodes;
their numeric error is H(Y|X).

Every rule application is verified numerically by
:func:`validate_derivation`, which samples seeded random distributions
approximately satisfying the premises and checks each step's conclusion
error against its evaluated epsilon expression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .dag import (
    Dag,
    common_topological_order,
    factorization_error,
    factorization_projection,
    find_implication_witness,
    order_conflict_pair,
)
from .dist import JointDistribution, VarSpec
from .errors import DerivationError, FormatError, RuleInapplicableError
from .sampling import dirichlet_joint, mix, rng_for


class EpsilonExpr:
    """Non-negative linear combination of named epsilons plus a constant."""

    __slots__ = ("_terms", "_const")

    def __init__(self, terms: Mapping[str, float] | None = None, const: float = 0.0):
        clean: dict[str, float] = {}
        for name, coeff in (terms or {}).items():
            coeff = float(coeff)
            if coeff < 0.0:
                raise DerivationError(
                    f"epsilon coefficient for {name!r} must be >= 0, got {coeff}"
                )
            if coeff != 0.0:
                clean[name] = coeff
        if const < 0.0:
            raise DerivationError(f"epsilon constant must be >= 0, got {const}")
        self._terms = clean
        self._const = float(const)

    @classmethod
    def term(cls, name: str, coeff: float = 1.0) -> "EpsilonExpr":
        return cls({name: coeff})

    @classmethod
    def constant(cls, value: float) -> "EpsilonExpr":
        return cls(const=value)

    @property
    def terms(self) -> dict[str, float]:
        return dict(self._terms)

    @property
    def const(self) -> float:
        return self._const

    @property
    def names(self) -> frozenset[str]:
        return frozenset(self._terms)

    def __add__(self, other: "EpsilonExpr") -> "EpsilonExpr":
        if not isinstance(other, EpsilonExpr):
            return NotImplemented
        terms = dict(self._terms)
        for name, coeff in other._terms.items():
            terms[name] = terms.get(name, 0.0) + coeff
        return EpsilonExpr(terms, self._const + other._const)

    def scaled(self, factor: float) -> "EpsilonExpr":
        if factor < 0.0:
            raise DerivationError(f"scale factor must be >= 0, got {factor}")
        return EpsilonExpr(
            {n: c * factor for n, c in self._terms.items()}, self._const * factor
        )

    def substitute(self, renames: Mapping[str, str]) -> "EpsilonExpr":
        """Rename epsilon symbols, merging coefficients that collide."""
        terms: dict[str, float] = {}
        for name, coeff in self._terms.items():
            new = renames.get(name, name)
            terms[new] = terms.get(new, 0.0) + coeff
        return EpsilonExpr(terms, self._const)

    def evaluate(self, bindings: Mapping[str, float]) -> float:
        total = self._const
        for name, coeff in self._terms.items():
            if name not in bindings:
                raise DerivationError(f"epsilon {name!r} has no bound value")
            total += coeff * bindings[name]
        return total

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EpsilonExpr):
            return NotImplemented
        return self._terms == other._terms and self._const == other._const

    def __hash__(self) -> int:
        return hash((frozenset(self._terms.items()), self._const))

    def __str__(self) -> str:
        parts = []
        for name in sorted(self._terms):
            coeff = self._terms[name]
            parts.append(name if coeff == 1.0 else f"{coeff:g}*{name}")
        if self._const != 0.0 or not parts:
            parts.append(f"{self._const:g}")
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"EpsilonExpr({self._terms!r}, const={self._const!r})"


@dataclass(frozen=True)
class DiagramJudgment:
    """A DAG together with a symbolic approximation error in bits.

    ``copy_pair`` marks determinism judgments: ``(x, y)`` asserts that y is
    a copy of itself through x, with numeric error H(y | x).
    """

    graph: Dag
    epsilon: EpsilonExpr
    copy_pair: tuple[str, str] | None = None


_PREMISE_KINDS = ("diagram", "copy", "kl_budget")


@dataclass(frozen=True)
class Premise:
    name: str
    kind: str
    judgment: DiagramJudgment
    eps_name: str | None  # None when the premise epsilon is a literal constant

    def __post_init__(self):
        if self.kind not in _PREMISE_KINDS:
            raise DerivationError(f"unknown premise kind {self.kind!r}")


@dataclass(frozen=True)
class Step:
    rule: str
    inputs: tuple[str, ...]
    params: dict
    output_name: str
    output: DiagramJudgment


class Derivation:
    """Append-only sequence of rule applications over named judgments.

    Preconditions of every rule are verified when the step is added, so a
    fully constructed derivation is structurally valid; numeric soundness
    is established separately by :func:`validate_derivation`.
    """

    def __init__(self):
        self._judgments: dict[str, DiagramJudgment] = {}
        self._premises: dict[str, Premise] = {}
        self._steps: list[Step] = []
        self._eps_owner: dict[str, str] = {}
        self._node_pool: set[str] = set()
        self._copy_extensions: list[tuple[str, str]] = []  # (fresh node, source var)

    # -- premises -------------------------------------------------------------

    def add_premise(
        self, name: str, graph: Dag, eps: str | float
    ) -> DiagramJudgment:
        """Declare that the underlying distribution satisfies ``graph``
        within the named (or constant) epsilon."""
        judgment = DiagramJudgment(graph, self._premise_eps(name, eps))
        self._register_premise(Premise(name, "diagram", judgment, _eps_name(eps)))
        return judgment

    def add_copy_premise(
        self, name: str, x: str, y: str, eps: str | float
    ) -> DiagramJudgment:
        """Declare that ``y`` is determined by ``x`` within eps = H(y | x)."""
        if x == y:
            raise DerivationError(f"copy premise needs two distinct variables, got {x!r}")
        judgment = DiagramJudgment(
            Dag({x, y}, {(x, y)}), self._premise_eps(name, eps), copy_pair=(x, y)
        )
        self._register_premise(Premise(name, "copy", judgment, _eps_name(eps)))
        return judgment

    def add_kl_budget(
        self, name: str, target: Dag, eps: str | float
    ) -> DiagramJudgment:
        """Declare a budget eps >= D_KL(P || Q) for some Q exactly
        satisfying ``target``."""
        judgment = DiagramJudgment(target, self._premise_eps(name, eps))
        self._register_premise(Premise(name, "kl_budget", judgment, _eps_name(eps)))
        return judgment

    # -- rules ------------------------------------------------------------------

    def frankenstein(
        self,
        inputs: Sequence[str],
        sigma: Mapping[str, str] | None = None,
        output: str | None = None,
    ) -> DiagramJudgment:
        """Stitch a graph from the inputs' parent sets; eps is their sum.

        ``sigma`` maps each node to the input judgment providing its
        incoming edges; unlisted nodes default to the first input.
        """
        if not inputs:
            raise RuleInapplicableError("frankenstein needs at least one input")
        judgments = [self._diagram_judgment(name) for name in inputs]
        nodes = judgments[0].graph.nodes
        for name, j in zip(inputs, judgments):
            if j.graph.nodes != nodes:
                raise RuleInapplicableError(
                    f"frankenstein inputs must share nodes; {name!r} differs"
                )
        graphs = [j.graph for j in judgments]
        if common_topological_order(graphs) is None:
            u, v = order_conflict_pair(graphs)
            raise RuleInapplicableError(
                f"no common topological order: {u!r} and {v!r} are ordered "
                "oppositely by the inputs"
            )
        sigma = dict(sigma or {})
        for node, source in sigma.items():
            if node not in nodes:
                raise RuleInapplicableError(f"sigma names unknown node {node!r}")
            if source not in inputs:
                raise RuleInapplicableError(
                    f"sigma assigns {node!r} to {source!r}, which is not an input"
                )
        by_name = dict(zip(inputs, judgments))
        edges = set()
        for node in nodes:
            donor = by_name[sigma.get(node, inputs[0])]
            edges |= {(p, node) for p in donor.graph.parents(node)}
        epsilon = judgments[0].epsilon
        for j in judgments[1:]:
            epsilon = epsilon + j.epsilon
        result = DiagramJudgment(Dag(nodes, edges), epsilon)
        return self._append(
            Step("frankenstein", tuple(inputs), {"sigma": sigma},
                 self._output_name(output), result)
        )

    def factorization_transfer(
        self, budget: str, output: str | None = None
    ) -> DiagramJudgment:
        """Turn a declared KL budget into a judgment on its target graph."""
        premise = self._premises.get(budget)
        if premise is None or premise.kind != "kl_budget":
            raise DerivationError(f"{budget!r} is not a declared KL budget")
        result = DiagramJudgment(premise.judgment.graph, premise.judgment.epsilon)
        return self._append(
            Step("transfer", (budget,), {}, self._output_name(output), result)
        )

    def bookkeeping(
        self, input_name: str, target: Dag, output: str | None = None
    ) -> DiagramJudgment:
        """Transport a judgment to any graph implied by its graph."""
        j = self._diagram_judgment(input_name)
        witness = find_implication_witness(j.graph, target)
        if witness is not None:
            node, others, given = witness
            raise RuleInapplicableError(
                f"target asserts {node!r} independent of {sorted(others)} "
                f"given {sorted(given)}, which the input graph does not imply"
            )
        result = DiagramJudgment(target, j.epsilon)
        return self._append(
            Step("bookkeeping", (input_name,), {"target": target},
                 self._output_name(output), result)
        )

    def dangly_bit(
        self,
        input_name: str,
        determinism: str,
        attach_at: str,
        output: str | None = None,
    ) -> DiagramJudgment:
        """Attach a copy of the determined variable as a child of its
        determiner; eps adds the determinism error."""
        j = self._diagram_judgment(input_name)
        det = self._premises.get(determinism)
        if det is None or det.kind != "copy":
            raise DerivationError(f"{determinism!r} is not a copy premise")
        x, y = det.judgment.copy_pair
        if attach_at not in j.graph.nodes:
            raise RuleInapplicableError(
                f"attach point {attach_at!r} is not in the input graph"
            )
        if attach_at != x:
            raise RuleInapplicableError(
                f"copy premise {determinism!r} determines {y!r} from {x!r}, "
                f"not from {attach_at!r}"
            )
        fresh = self._fresh_copy_name(y, j.graph.nodes)
        if fresh != y:
            self._copy_extensions.append((fresh, y))
        self._node_pool.add(fresh)
        result = DiagramJudgment(
            j.graph.with_child(x, fresh), j.epsilon + det.judgment.epsilon
        )
        return self._append(
            Step("dangly", (input_name, determinism),
                 {"attach_at": attach_at, "fresh": fresh, "base": y},
                 self._output_name(output), result)
        )

    # -- accessors -----------------------------------------------------------

    @property
    def premises(self) -> dict[str, Premise]:
        return dict(self._premises)

    @property
    def steps(self) -> tuple[Step, ...]:
        return tuple(self._steps)

    @property
    def copy_extensions(self) -> tuple[tuple[str, str], ...]:
        """Fresh copy nodes introduced by dangly steps, with their sources."""
        return tuple(self._copy_extensions)

    def judgment(self, name: str) -> DiagramJudgment:
        try:
            return self._judgments[name]
        except KeyError:
            raise DerivationError(f"no judgment named {name!r}") from None

    @property
    def final(self) -> DiagramJudgment:
        if not self._steps:
            raise DerivationError("derivation has no steps")
        return self._steps[-1].output

    def premise_variables(self) -> tuple[str, ...]:
        """All variables mentioned by premises, sorted."""
        out: set[str] = set()
        for premise in self._premises.values():
            out |= premise.judgment.graph.nodes
        return tuple(sorted(out))

    def copy_pair_conclusion(
        self, judgment: DiagramJudgment
    ) -> tuple[str, str, tuple[str, str]] | None:
        """Find two copies of one variable hanging from a single shared
        parent: returns (parent, source variable, (copy, copy)) or None."""
        bases: dict[str, list[str]] = {}
        for fresh, base in self._copy_extensions:
            if fresh in judgment.graph.nodes:
                bases.setdefault(base, []).append(fresh)
        for base, copies in bases.items():
            if base in judgment.graph.nodes:
                copies = [base] + copies
            for i in range(len(copies)):
                for k in range(i + 1, len(copies)):
                    pa_i = judgment.graph.parents(copies[i])
                    pa_k = judgment.graph.parents(copies[k])
                    if pa_i == pa_k and len(pa_i) == 1:
                        (parent,) = pa_i
                        return (parent, base, (copies[i], copies[k]))
        return None

    # -- internals ------------------------------------------------------------

    def _premise_eps(self, premise_name: str, eps: str | float) -> EpsilonExpr:
        if isinstance(eps, str):
            if eps in self._eps_owner:
                raise DerivationError(
                    f"epsilon {eps!r} is already bound to premise "
                    f"{self._eps_owner[eps]!r}"
                )
            self._eps_owner[eps] = premise_name
            return EpsilonExpr.term(eps)
        return EpsilonExpr.constant(float(eps))

    def _register_premise(self, premise: Premise) -> None:
        if premise.name in self._judgments:
            raise DerivationError(f"name {premise.name!r} is already in use")
        self._premises[premise.name] = premise
        self._judgments[premise.name] = premise.judgment
        self._node_pool |= premise.judgment.graph.nodes

    def _diagram_judgment(self, name: str) -> DiagramJudgment:
        j = self.judgment(name)
        premise = self._premises.get(name)
        if j.copy_pair is not None:
            raise DerivationError(f"{name!r} is a copy judgment, not a diagram")
        if premise is not None and premise.kind == "kl_budget":
            raise DerivationError(
                f"{name!r} is a KL budget; apply factorization_transfer first"
            )
        return j

    def _output_name(self, output: str | None) -> str:
        if output is None:
            output = f"step{len(self._steps) + 1}"
        if output in self._judgments:
            raise DerivationError(f"name {output!r} is already in use")
        return output

    def _fresh_copy_name(self, y: str, nodes: frozenset[str]) -> str:
        if y not in nodes:
            return y
        k = 2
        while f"{y}__{k}" in self._node_pool or f"{y}__{k}" in nodes:
            k += 1
        return f"{y}__{k}"

    def _append(self, step: Step) -> DiagramJudgment:
        self._steps.append(step)
        self._judgments[step.output_name] = step.output
        self._node_pool |= step.output.graph.nodes
        return step.output


# -- numeric validation -------------------------------------------------------


@dataclass(frozen=True)
class ValidationConfig:
    """Sampling settings for numeric rule validation."""

    samples: int = 200
    seed: int = 0
    cardinalities: Mapping[str, int] | None = None
    default_cardinality: int = 2
    tolerance_bits: float = 1e-9
    noise: tuple[float, float] = (0.0, 0.25)
    instance_sampler: Callable[[np.random.Generator], JointDistribution] | None = None

    def cardinality_of(self, name: str) -> int:
        if self.cardinalities and name in self.cardinalities:
            return int(self.cardinalities[name])
        return self.default_cardinality


@dataclass(frozen=True)
class StepValidation:
    """Outcome of validating one rule application numerically."""

    name: str
    rule: str
    samples: int
    violations: int
    min_slack_bits: float
    max_slack_bits: float

    @property
    def ok(self) -> bool:
        return self.violations == 0


def validate_derivation(
    derivation: Derivation, config: ValidationConfig | None = None
) -> list[StepValidation]:
    """Validate every step of a derivation on seeded random instances.

    Each sample draws a joint distribution approximately satisfying the
    premises (premise-exact projections mixed with noise), computes actual
    premise epsilons from it, and checks that every step's conclusion
    error stays within its epsilon expression evaluated at those actuals
    (plus tolerance).  Slack is bound minus actual error; a violation is
    negative slack beyond tolerance.
    """
    config = config or ValidationConfig()
    if not derivation.steps:
        raise DerivationError("derivation has no steps to validate")
    sampler = config.instance_sampler or _default_sampler(derivation, config)

    counts = [0] * len(derivation.steps)
    min_slack = [math.inf] * len(derivation.steps)
    max_slack = [-math.inf] * len(derivation.steps)
    for index in range(config.samples):
        rng = rng_for(config.seed, index)
        joint = sampler(rng)
        joint = _extend_with_copies(joint, derivation)
        bindings = _actual_premise_epsilons(joint, derivation)
        for i, step in enumerate(derivation.steps):
            bound = step.output.epsilon.evaluate(bindings)
            actual = _judgment_error_bits(step.output, joint)
            slack = bound - actual
            min_slack[i] = min(min_slack[i], slack)
            max_slack[i] = max(max_slack[i], slack)
            if slack < -config.tolerance_bits:
                counts[i] += 1
    return [
        StepValidation(
            step.output_name, step.rule, config.samples,
            counts[i], min_slack[i], max_slack[i],
        )
        for i, step in enumerate(derivation.steps)
    ]


def validate_rule(
    derivation: Derivation, step_name: str, config: ValidationConfig | None = None
) -> StepValidation:
    """Validate a single named step (the whole premise set is sampled)."""
    for report in validate_derivation(derivation, config):
        if report.name == step_name:
            return report
    raise DerivationError(f"no step named {step_name!r}")


def _default_sampler(
    derivation: Derivation, config: ValidationConfig
) -> Callable[[np.random.Generator], JointDistribution]:
    variables = tuple(
        VarSpec(name, config.cardinality_of(name))
        for name in derivation.premise_variables()
    )

    def sample(rng: np.random.Generator) -> JointDistribution:
        joint = dirichlet_joint(rng, variables)
        lo, hi = config.noise
        for premise in derivation.premises.values():
            if premise.kind == "copy":
                x, y = premise.judgment.copy_pair
                joint = _sharpen_copy(rng, joint, x, y, float(rng.uniform(lo, hi)))
            else:
                graph = _extend_to_all(premise.judgment.graph, joint.names)
                exact = factorization_projection(joint, graph)
                lam = 1.0 - float(rng.uniform(lo, hi))
                joint = mix(exact, joint, lam)
        return joint

    return sample


def _extend_to_all(graph: Dag, names: Sequence[str]) -> Dag:
    """Extend a subset graph to all variables without constraining the rest:
    appended variables condition on everything before them."""
    inside = graph.topological_order
    outside = tuple(sorted(set(names) - set(inside)))
    edges = set(graph.edges)
    previous = list(inside)
    for node in outside:
        edges |= {(p, node) for p in previous}
        previous.append(node)
    return Dag(names, edges)


def _sharpen_copy(
    rng: np.random.Generator,
    joint: JointDistribution,
    x: str,
    y: str,
    noise: float,
) -> JointDistribution:
    """Rewrite y to follow a random function of x with probability 1-noise."""
    label = rng.integers(joint.cardinality(y), size=joint.cardinality(x))
    x_axis = joint.names.index(x)
    y_axis = joint.names.index(y)
    cells: dict[tuple[int, ...], float] = {}

    def put(key: tuple[int, ...], value: float) -> None:
        cells[key] = cells.get(key, 0.0) + value

    for assignment, p in joint.items():
        target = int(label[assignment[x_axis]])
        moved = list(assignment)
        moved[y_axis] = target
        put(tuple(moved), p * (1.0 - noise))
        put(assignment, p * noise)
    return JointDistribution(joint.variables, cells, normalize=False)


def _extend_with_copies(
    joint: JointDistribution, derivation: Derivation
) -> JointDistribution:
    for fresh, base in derivation.copy_extensions:
        if fresh not in joint.names:
            joint = joint.with_function_variable(
                fresh, joint.cardinality(base), [base], lambda v: v
            )
    return joint


def _actual_premise_epsilons(
    joint: JointDistribution, derivation: Derivation
) -> dict[str, float]:
    bindings: dict[str, float] = {}
    for premise in derivation.premises.values():
        if premise.eps_name is None:
            continue
        bindings[premise.eps_name] = _judgment_error_bits(premise.judgment, joint)
    return bindings


def _judgment_error_bits(
    judgment: DiagramJudgment, joint: JointDistribution
) -> float:
    if judgment.copy_pair is not None:
        x, y = judgment.copy_pair
        return joint.conditional_entropy({y}, {x})
    nodes = judgment.graph.nodes
    marginal = joint if set(joint.names) == nodes else joint.marginalize(nodes)
    return factorization_error(marginal, judgment.graph).epsilon_bits


# -- derivation scripts ---------------------------------------------------------


def parse_dag_ref(token: str) -> tuple[str, object]:
    """Parse a dag reference token from a derivation script.

    Three forms: an edge list ``a->b,c->d,e`` (bare names are isolated
    nodes), ``copy(X=>Y)`` for a determinism judgment, and
    ``kl(<edge list>)`` for a KL budget target.
    """
    if token.startswith("copy(") and token.endswith(")"):
        inner = token[len("copy("):-1]
        x, sep, y = inner.partition("=>")
        if not sep or not x or not y:
            raise FormatError(f"bad copy reference {token!r}, expected copy(X=>Y)")
        return ("copy", (x, y))
    if token.startswith("kl(") and token.endswith(")"):
        return ("kl", _parse_edge_list(token[len("kl("):-1]))
    return ("dag", _parse_edge_list(token))


def _parse_edge_list(text: str) -> Dag:
    nodes: set[str] = set()
    edges: set[tuple[str, str]] = set()
    if not text:
        raise FormatError("empty graph reference")
    for part in text.split(","):
        if not part:
            raise FormatError(f"empty item in graph reference {text!r}")
        names = part.split("->")
        if any(not n for n in names):
            raise FormatError(f"bad edge chain {part!r}")
        nodes.update(names)
        edges.update(zip(names, names[1:]))
    return Dag(nodes, edges)


def run_script(text: str) -> Derivation:
    """Execute a derivation script, verifying each step's preconditions.

    Line forms (``#`` comments allowed):

    * ``premise <name> <dag-ref> eps <epsilon-name-or-number>``
    * ``step frankenstein <input>... [sigma <node>=<input>,...] -> <name>``
    * ``step transfer <budget> -> <name>``
    * ``step bookkeeping <input> to <dag-ref> -> <name>``
    * ``step dangly <input> <determinism> at <node> -> <name>``
    """
    derivation = Derivation()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        cut = raw.find("#")
        tokens = (raw if cut < 0 else raw[:cut]).split()
        if not tokens:
            continue
        try:
            if tokens[0] == "premise":
                _run_premise_line(derivation, tokens, lineno)
            elif tokens[0] == "step":
                _run_step_line(derivation, tokens, lineno)
            else:
                raise FormatError(f"unknown directive {tokens[0]!r}", lineno)
        except FormatError as exc:
            if exc.line is None:
                raise FormatError(exc.message, lineno) from exc
            raise
    if not derivation.steps:
        raise FormatError("script contains no steps")
    return derivation


def _run_premise_line(derivation: Derivation, tokens: list[str], lineno: int) -> None:
    if len(tokens) != 5 or tokens[3] != "eps":
        raise FormatError(
            "expected 'premise <name> <dag-ref> eps <epsilon>'", lineno
        )
    name, ref_token, eps_token = tokens[1], tokens[2], tokens[4]
    kind, ref = parse_dag_ref(ref_token)
    eps: str | float
    try:
        eps = float(eps_token)
    except ValueError:
        eps = eps_token
    if kind == "copy":
        x, y = ref
        derivation.add_copy_premise(name, x, y, eps)
    elif kind == "kl":
        derivation.add_kl_budget(name, ref, eps)
    else:
        derivation.add_premise(name, ref, eps)


def _run_step_line(derivation: Derivation, tokens: list[str], lineno: int) -> None:
    if len(tokens) < 4 or tokens[-2] != "->":
        raise FormatError("step line must end with '-> <name>'", lineno)
    rule, output = tokens[1], tokens[-1]
    args = tokens[2:-2]
    if rule == "frankenstein":
        sigma: dict[str, str] = {}
        if "sigma" in args:
            at = args.index("sigma")
            if at + 2 != len(args):
                raise FormatError("sigma must be 'sigma <node>=<input>,...'", lineno)
            for item in args[at + 1].split(","):
                node, sep, source = item.partition("=")
                if not sep:
                    raise FormatError(f"bad sigma item {item!r}", lineno)
                sigma[node] = source
            args = args[:at]
        if not args:
            raise FormatError("frankenstein needs input judgments", lineno)
        derivation.frankenstein(args, sigma, output=output)
    elif rule == "transfer":
        if len(args) != 1:
            raise FormatError("expected 'step transfer <budget> -> <name>'", lineno)
        derivation.factorization_transfer(args[0], output=output)
    elif rule == "bookkeeping":
        if len(args) != 3 or args[1] != "to":
            raise FormatError(
                "expected 'step bookkeeping <input> to <dag-ref> -> <name>'", lineno
            )
        kind, target = parse_dag_ref(args[2])
        if kind != "dag":
            raise FormatError("bookkeeping target must be a plain graph", lineno)
        derivation.bookkeeping(args[0], target, output=output)
    elif rule == "dangly":
        if len(args) != 4 or args[2] != "at":
            raise FormatError(
                "expected 'step dangly <input> <determinism> at <node> -> <name>'",
                lineno,
            )
        derivation.dangly_bit(args[0], args[1], args[3], output=output)
    else:
        raise FormatError(f"unknown rule {rule!r}", lineno)


def theorem1_script() -> str:
    """The shipped mediator-determines-redund derivation script."""
    return resources.files(__package__).joinpath("theorem1.deriv").read_text()


def replay_theorem1(script: str | None = None) -> tuple[Derivation, DiagramJudgment]:
    """Run the mediator-determines-redund derivation and check its shape.

    The conclusion graph must contain two copies of the redundant variable
    hanging from the mediator alone; the conclusion epsilon is the sum of
    the mediation epsilon and both redundancy epsilons.
    """
    derivation = run_script(theorem1_script() if script is None else script)
    conclusion = derivation.final
    if derivation.copy_pair_conclusion(conclusion) is None:
        raise DerivationError(
            "conclusion does not contain a copy pair under a single parent"
        )
    return derivation, conclusion
