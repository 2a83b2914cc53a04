"""Exact natural latent search and candidate evaluation.

For two observables, an exact natural latent exists precisely when the
observables are independent given the value of a deterministic constraint
(functions of each observable that agree with probability 1).  The
canonical candidate is the connected-component label of the bipartite
support graph: values of the two observables are linked when they
co-occur with positive probability.  The component label is a function of
either observable on the support, so its redundancy errors are exactly
zero, and an exact natural latent exists if and only if the component
label's mediation error is zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .dist import JointDistribution, VarSpec
from .errors import DistributionError, FormatError, ModelError
from .naturality import AgentModel, NaturalityReport, naturality_report

#: Cells at or below this probability are not treated as support.
SUPPORT_THRESHOLD = 1e-12

#: Default name for the latent variable appended by candidate evaluation.
LATENT_NAME = "latent"


@dataclass(frozen=True)
class DeterministicLatent:
    """Per-observable label maps defining a latent as a function of each
    observable; on the support all maps agree in the exact case."""

    observables: tuple[str, ...]
    label_maps: tuple[tuple[int, ...], ...]
    n_labels: int

    def __post_init__(self):
        if len(self.observables) != len(self.label_maps):
            raise ModelError("one label map per observable required")
        for obs, labels in zip(self.observables, self.label_maps):
            for label in labels:
                if not (0 <= label < self.n_labels):
                    raise ModelError(
                        f"label {label} for {obs!r} out of range "
                        f"(alphabet {self.n_labels})"
                    )

    def label_map(self, observable: str) -> tuple[int, ...]:
        try:
            return self.label_maps[self.observables.index(observable)]
        except ValueError:
            raise ModelError(f"no label map for {observable!r}") from None

    def to_text(self) -> str:
        lines = []
        for obs, labels in zip(self.observables, self.label_maps):
            lines += [f"map {obs} {value} {label}" for value, label in enumerate(labels)]
        return "\n".join(lines) + "\n"


def parse_label_maps(text: str) -> dict[str, dict[int, int]]:
    """Parse ``map <observable> <value-index> <label>`` lines."""
    maps: dict[str, dict[int, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        cut = raw.find("#")
        tokens = (raw if cut < 0 else raw[:cut]).split()
        if not tokens:
            continue
        if tokens[0] != "map" or len(tokens) != 4:
            raise FormatError(
                f"expected 'map <observable> <value-index> <label>', got {raw!r}",
                lineno,
            )
        try:
            value, label = int(tokens[2]), int(tokens[3])
        except ValueError:
            raise FormatError(f"bad integers in {raw!r}", lineno) from None
        per_obs = maps.setdefault(tokens[1], {})
        if value in per_obs:
            raise FormatError(
                f"duplicate map entry for {tokens[1]} value {value}", lineno
            )
        per_obs[value] = label
    if not maps:
        raise FormatError("no 'map' lines found")
    return maps


class _UnionFind:
    def __init__(self, size: int):
        self.parent = list(range(size))

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def exact_natural_latent(
    p: JointDistribution,
) -> tuple[DeterministicLatent, NaturalityReport]:
    """Connected-component latent of the support graph, with its report.

    Requires exactly two observables; with more, chunk them into two
    blocks first (see :func:`chunk_observables`).  Support components are
    labeled in order of their smallest participating first-observable
    value; values with no support mass get label 0.
    """
    if len(p.variables) != 2:
        raise DistributionError(
            "exact search handles exactly two observables; use "
            "chunk_observables to reduce a larger joint to two blocks"
        )
    card1, card2 = (v.cardinality for v in p.variables)
    if p.total_mass() <= 0.0:
        raise DistributionError("distribution has no probability mass")
    uf = _UnionFind(card1 + card2)
    seen1, seen2 = set(), set()
    for (x1, x2), prob in p.items():
        if prob > SUPPORT_THRESHOLD:
            uf.union(x1, card1 + x2)
            seen1.add(x1)
            seen2.add(x2)

    label_of_root: dict[int, int] = {}
    for x1 in range(card1):  # ascending order fixes the label numbering
        if x1 in seen1:
            root = uf.find(x1)
            if root not in label_of_root:
                label_of_root[root] = len(label_of_root)
    n_labels = max(len(label_of_root), 1)
    map1 = tuple(
        label_of_root[uf.find(x1)] if x1 in seen1 else 0 for x1 in range(card1)
    )
    map2 = tuple(
        label_of_root[uf.find(card1 + x2)] if x2 in seen2 else 0
        for x2 in range(card2)
    )
    latent = DeterministicLatent(p.names, (map1, map2), n_labels)
    return latent, evaluate_candidate(p, dict(zip(p.names, (map1, map2))))


def evaluate_candidate(
    p: JointDistribution,
    label_maps: Mapping[str, Sequence[int] | Mapping[int, int]],
    latent_name: str = LATENT_NAME,
) -> NaturalityReport:
    """Naturality report of the latent defined by per-observable label maps.

    The latent is adjoined as the first map's function of its observable,
    so its redundancy error for that observable is zero by construction;
    errors for the others reflect the mass on which the maps disagree.
    """
    if set(label_maps) != set(p.names):
        raise ModelError(
            f"label maps cover {sorted(label_maps)}, expected {sorted(p.names)}"
        )
    tables: dict[str, tuple[int, ...]] = {}
    for var in p.variables:
        table = _total_map(label_maps[var.name], var.cardinality, var.name)
        tables[var.name] = table
    n_labels = max(max(t) for t in tables.values()) + 1
    name = latent_name
    while name in set(p.names):
        name = name + "_"
    first = p.names[0]
    augmented = p.with_function_variable(
        name, n_labels, [first], lambda v: tables[first][v]
    )
    return naturality_report(AgentModel(augmented, p.names, (name,)))


def _total_map(
    spec: Sequence[int] | Mapping[int, int], cardinality: int, name: str
) -> tuple[int, ...]:
    if isinstance(spec, Mapping):
        missing = [v for v in range(cardinality) if v not in spec]
        if missing:
            raise ModelError(
                f"label map for {name!r} is missing values {missing}"
            )
        values = [int(spec[v]) for v in range(cardinality)]
    else:
        values = [int(x) for x in spec]
        if len(values) != cardinality:
            raise ModelError(
                f"label map for {name!r} has {len(values)} entries, "
                f"expected {cardinality}"
            )
    if any(v < 0 for v in values):
        raise ModelError(f"label map for {name!r} has negative labels")
    return tuple(values)


# -- observable chunking ----------------------------------------------------------


def chunk_observables(
    p: JointDistribution,
    block1: Sequence[str],
    block2: Sequence[str],
    names: tuple[str, str] | None = None,
) -> JointDistribution:
    """Regroup a joint over n variables into two product-alphabet blocks.

    The two blocks must partition the variables.  Cells are relabeled
    bijectively (mixed-radix in the original variable order), so mass and
    every information quantity over whole blocks are preserved exactly.
    """
    return _chunk(p, block1, block2, names, passthrough=())


def chunk_model(
    model: AgentModel,
    block1: Sequence[str],
    block2: Sequence[str],
    names: tuple[str, str] | None = None,
) -> AgentModel:
    """Chunk a model's observables into two blocks; latents ride along."""
    chunked = _chunk(
        model.joint, block1, block2, names, passthrough=model.latents
    )
    obs = tuple(n for n in chunked.names if n not in set(model.latents))
    return AgentModel(chunked, obs, model.latents)


def _chunk(
    p: JointDistribution,
    block1: Sequence[str],
    block2: Sequence[str],
    names: tuple[str, str] | None,
    passthrough: Sequence[str],
) -> JointDistribution:
    block1, block2 = tuple(block1), tuple(block2)
    if not block1 or not block2:
        raise DistributionError("both blocks must be nonempty")
    covered = set(block1) | set(block2) | set(passthrough)
    if set(block1) & set(block2):
        raise DistributionError(
            f"blocks overlap on {sorted(set(block1) & set(block2))}"
        )
    if len(set(block1)) != len(block1) or len(set(block2)) != len(block2):
        raise DistributionError("blocks repeat a variable")
    if covered != set(p.names):
        raise DistributionError(
            f"blocks cover {sorted(covered)}, expected all of {sorted(p.names)}"
        )

    axis = {n: i for i, n in enumerate(p.names)}
    blocks = []
    for block in (block1, block2):
        ordered = tuple(sorted(block, key=axis.__getitem__))
        cards = [p.cardinality(n) for n in ordered]
        strides = []
        stride = 1
        for c in reversed(cards):
            strides.append(stride)
            stride *= c
        blocks.append((ordered, [axis[n] for n in ordered], list(reversed(strides)), stride))

    if names is None:
        taken = set(passthrough)
        names = tuple(
            _joined_name([n for n in block], taken) for block, _, _, _ in blocks
        )
    new_vars = [VarSpec(names[0], blocks[0][3]), VarSpec(names[1], blocks[1][3])]
    new_vars += [VarSpec(n, p.cardinality(n)) for n in passthrough]
    rest_axes = [axis[n] for n in passthrough]

    cells: dict[tuple[int, ...], float] = {}
    for assignment, prob in p.items():
        key = tuple(
            sum(assignment[a] * s for a, s in zip(axes, strides))
            for _, axes, strides, _ in blocks
        ) + tuple(assignment[a] for a in rest_axes)
        cells[key] = prob
    return JointDistribution(new_vars, cells, normalize=False)


def _joined_name(parts: Sequence[str], taken: set[str]) -> str:
    name = "_".join(parts)
    while name in taken:
        name += "_"
    taken.add(name)
    return name
