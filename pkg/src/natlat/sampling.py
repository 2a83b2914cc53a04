"""Seeded random generators for distributions, graphs, and test instances.

A single 64-bit seed expands into independent per-instance streams through
counter-keyed Philox generators, so parallel and serial sweeps see the
same instances.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .dag import Dag
from .dist import JointDistribution, VarSpec
from .errors import DistributionError


def rng_for(seed: int, index: int) -> np.random.Generator:
    """Independent generator for instance ``index`` of stream ``seed``."""
    if not (0 <= seed < 2**64):
        raise DistributionError(f"seed must be an unsigned 64-bit integer, got {seed}")
    if index < 0:
        raise DistributionError(f"instance index must be >= 0, got {index}")
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def dirichlet_joint(
    rng: np.random.Generator, variables: Sequence[VarSpec]
) -> JointDistribution:
    """Flat-Dirichlet random table over the full joint alphabet."""
    variables = tuple(variables)
    shape = tuple(v.cardinality for v in variables)
    flat = rng.dirichlet(np.ones(int(np.prod(shape))))
    return JointDistribution(variables, flat.reshape(shape), normalize=False)


def random_dag(
    rng: np.random.Generator, nodes: Sequence[str], edge_prob: float = 0.4
) -> Dag:
    """Random DAG whose edges respect a shuffled order of ``nodes``."""
    order = list(nodes)
    rng.shuffle(order)
    edges = [
        (order[i], order[j])
        for i in range(len(order))
        for j in range(i + 1, len(order))
        if rng.random() < edge_prob
    ]
    return Dag(nodes, edges)


def random_conditional(
    rng: np.random.Generator, rows: int, cols: int, sharpness: float = 0.0
) -> np.ndarray:
    """Row-stochastic matrix; ``sharpness`` in [0, 1] pulls rows toward
    random point masses (1 gives deterministic rows)."""
    soft = rng.dirichlet(np.ones(cols), size=rows)
    if sharpness <= 0.0:
        return soft
    hard = np.zeros((rows, cols))
    hard[np.arange(rows), rng.integers(cols, size=rows)] = 1.0
    return sharpness * hard + (1.0 - sharpness) * soft


def mediator_joint(
    rng: np.random.Generator,
    obs: Sequence[VarSpec],
    latent: VarSpec,
    sharpness: float = 0.0,
) -> JointDistribution:
    """Joint P[latent] * prod_i P[obs_i | latent]; mediation holds exactly."""
    weights = rng.dirichlet(np.ones(latent.cardinality))
    table = weights.reshape((latent.cardinality,) + (1,) * len(obs))
    for i, var in enumerate(obs):
        cond = random_conditional(rng, latent.cardinality, var.cardinality, sharpness)
        shape = [latent.cardinality] + [1] * len(obs)
        shape[1 + i] = var.cardinality
        table = table * cond.reshape(shape)
    return JointDistribution((latent,) + tuple(obs), table, normalize=False)


def attach_noisy_label(
    rng: np.random.Generator,
    p: JointDistribution,
    of: Sequence[str],
    name: str,
    cardinality: int,
    noise: float = 0.0,
) -> JointDistribution:
    """Append a near-deterministic label of the ``of`` variables.

    With probability ``1 - noise`` the label is a fixed random function of
    the source values; otherwise it is resampled uniformly.
    """
    of = tuple(of)
    cards = [p.cardinality(n) for n in of]
    mapping = rng.integers(cardinality, size=tuple(cards))
    axes = [p.names.index(n) for n in of]
    cells: dict[tuple[int, ...], float] = {}
    for assignment, prob in p.items():
        src = tuple(assignment[i] for i in axes)
        label = int(mapping[src])
        if noise <= 0.0:
            cells[assignment + (label,)] = cells.get(assignment + (label,), 0.0) + prob
            continue
        for value in range(cardinality):
            share = (1.0 - noise) if value == label else 0.0
            share += noise / cardinality
            if share > 0.0:
                key = assignment + (value,)
                cells[key] = cells.get(key, 0.0) + prob * share
    variables = p.variables + (VarSpec(name, cardinality),)
    return JointDistribution(variables, cells, normalize=False)


def mix(
    a: JointDistribution, b: JointDistribution, weight_a: float
) -> JointDistribution:
    """Convex combination ``weight_a * a + (1 - weight_a) * b``."""
    if a.variables != b.variables:
        raise DistributionError(f"variable mismatch: {a.names} vs {b.names}")
    if not (0.0 <= weight_a <= 1.0):
        raise DistributionError(f"mixture weight must lie in [0, 1], got {weight_a}")
    if a.is_dense and b.is_dense:
        return JointDistribution(
            a.variables,
            weight_a * a.table + (1.0 - weight_a) * b.table,
            normalize=False,
        )
    cells: dict[tuple[int, ...], float] = {}
    for assignment, p in a.items():
        cells[assignment] = weight_a * p
    for assignment, p in b.items():
        cells[assignment] = cells.get(assignment, 0.0) + (1.0 - weight_a) * p
    return JointDistribution(a.variables, cells, normalize=False)


def theorem_instance(
    rng: np.random.Generator,
    observables: tuple[str, str] = ("X1", "X2"),
    mediator: str = "M",
    redund: str = "R",
    max_card: int = 4,
) -> JointDistribution:
    """Random 4-variable joint for the mediator-determines-redund sweep.

    Cycles through three construction flavors: exact mediator with a noisy
    label, raw Dirichlet joints, and near-deterministic block structure.
    """
    cards = rng.integers(2, max_card + 1, size=4)
    obs_vars = (VarSpec(observables[0], int(cards[0])),
                VarSpec(observables[1], int(cards[1])))
    med_var = VarSpec(mediator, int(cards[2]))
    red_card = int(cards[3])

    flavor = int(rng.integers(3))
    if flavor == 0:
        sharp = float(rng.uniform(0.0, 0.95))
        base = mediator_joint(rng, obs_vars, med_var, sharpness=sharp)
        base = base.reordered((observables[0], observables[1], mediator))
        source = [observables[0]] if rng.random() < 0.5 else list(observables)
        joint = attach_noisy_label(
            rng, base, source, redund, red_card, noise=float(rng.uniform(0.0, 0.3))
        )
    elif flavor == 1:
        joint = dirichlet_joint(
            rng, obs_vars + (med_var, VarSpec(redund, red_card))
        )
    else:
        most = min(obs_vars[0].cardinality, obs_vars[1].cardinality)
        blocks = int(rng.integers(1, most + 1))
        base = block_structured_joint(
            rng,
            blocks,
            obs_vars[0].cardinality,
            obs_vars[1].cardinality,
            names=observables,
        )[0]
        base = attach_noisy_label(
            rng, base, [observables[0]], mediator, med_var.cardinality,
            noise=float(rng.uniform(0.0, 0.1)),
        )
        joint = attach_noisy_label(
            rng, base, [observables[1]], redund, red_card,
            noise=float(rng.uniform(0.0, 0.1)),
        )
    return joint


def block_structured_joint(
    rng: np.random.Generator,
    n_blocks: int,
    card1: int,
    card2: int,
    names: tuple[str, str] = ("X1", "X2"),
    independent_within: bool = True,
) -> tuple[JointDistribution, tuple[int, ...], tuple[int, ...]]:
    """Two-observable joint whose support splits into value blocks.

    Returns the joint plus the generating block label of each value of the
    two observables.  With ``independent_within`` the observables are
    independent inside every block, so the block label is an exact natural
    latent.
    """
    if n_blocks > min(card1, card2):
        raise DistributionError(
            f"{n_blocks} blocks do not fit in cardinalities {card1}x{card2}"
        )
    labels1 = _random_block_labels(rng, card1, n_blocks)
    labels2 = _random_block_labels(rng, card2, n_blocks)
    weights = rng.dirichlet(np.ones(n_blocks))
    table = np.zeros((card1, card2))
    for b in range(n_blocks):
        rows = np.flatnonzero(labels1 == b)
        cols = np.flatnonzero(labels2 == b)
        if independent_within:
            p = rng.dirichlet(np.ones(rows.size))
            q = rng.dirichlet(np.ones(cols.size))
            block = np.outer(p, q)
        else:
            block = rng.dirichlet(np.ones(rows.size * cols.size))
            block = block.reshape(rows.size, cols.size)
        table[np.ix_(rows, cols)] = weights[b] * block
    joint = JointDistribution(
        (VarSpec(names[0], card1), VarSpec(names[1], card2)), table,
        normalize=False,
    )
    return joint, tuple(int(x) for x in labels1), tuple(int(x) for x in labels2)


def _random_block_labels(
    rng: np.random.Generator, card: int, n_blocks: int
) -> np.ndarray:
    labels = np.concatenate([
        np.arange(n_blocks),
        rng.integers(n_blocks, size=card - n_blocks),
    ])
    rng.shuffle(labels)
    return labels
