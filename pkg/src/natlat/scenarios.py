"""Canonical quantitative scenarios: repeated-coinflip batches and biased dice.

The coinflip scenario: a coin of unknown bias (uniform prior on [0, 1]) is
flipped in two batches of n, and the label of interest is whether the
first batch's head count falls below the median-split threshold.  The
label is exactly determined by batch one; its redundancy error with
respect to batch two is E[H(label(N1) | N2)], computed exactly on the
(n+1)^2 grid of head-count pairs using log-gamma in log space.  Because
head counts given the bias are binomial with a uniform prior,

    P[N2] = 1 / (n + 1)
    P[N1 | N2] = (n+1) * C(n, N1) * C(n, N2)
               * B(N1 + N2 + 1, 2n - N1 - N2 + 1)

with B the beta function.  The batches are independent given the bias, so
the scenario's mediation error is zero and the two-observable bound on
how well the bias pins down the label is twice the redundancy entropy.

The die fixture discretizes the bias onto a finite grid so everything
stays in finite-alphabet tables, with two chunk observables holding the
face counts of each batch of rolls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .dist import DENSE_CELL_LIMIT, JointDistribution, VarSpec
from .errors import DistributionError
from .naturality import AgentModel

_LN2 = math.log(2.0)

#: Per-threshold-side label probabilities must sum to 1 this tightly.
_NORMALIZATION_TOL = 1e-9

#: Default number of grid points for a discretized coin bias.
DEFAULT_GRID_SIZE = 9


@dataclass(frozen=True)
class CoinExampleConfig:
    """Batch size and median-split threshold for the coinflip scenario.

    The label is 0 when the head count is below ``median_threshold`` and 1
    otherwise (counts exactly at the threshold go to the upper label).
    """

    n: int = 1000
    median_threshold: int | None = None

    def __post_init__(self):
        if self.n < 2 or self.n % 2 != 0:
            raise DistributionError(
                f"flips per batch must be even and >= 2, got {self.n}"
            )
        if self.median_threshold is None:
            object.__setattr__(self, "median_threshold", self.n // 2)
        if not (1 <= self.median_threshold <= self.n):
            raise DistributionError(
                f"median threshold {self.median_threshold} out of range for n={self.n}"
            )


def count_pair_log_probs(cfg: CoinExampleConfig) -> np.ndarray:
    """log P[N1 | N2] in nats over the (n+1) x (n+1) head-count grid."""
    n = cfg.n
    n1 = np.arange(n + 1)[:, None]
    n2 = np.arange(n + 1)[None, :]
    return (
        gammaln(n + 2) - gammaln(n2 + 1) - gammaln(n - n2 + 1)
        + gammaln(n + 1) - gammaln(n1 + 1) - gammaln(n - n1 + 1)
        + gammaln(n1 + n2 + 1) + gammaln(2 * n - n1 - n2 + 1) - gammaln(2 * n + 2)
    )


def median_label_log_probs(cfg: CoinExampleConfig) -> tuple[np.ndarray, np.ndarray]:
    """(log P[label=0 | N2], log P[label=1 | N2]) in nats, per N2."""
    lp = count_pair_log_probs(cfg)
    t = cfg.median_threshold
    return logsumexp(lp[:t], axis=0), logsumexp(lp[t:], axis=0)


def coin_median_entropy(cfg: CoinExampleConfig) -> float:
    """E[H(label(N1) | N2)] in bits, the scenario's redundancy error."""
    lp0, lp1 = median_label_log_probs(cfg)
    p0, p1 = np.exp(lp0), np.exp(lp1)
    drift = float(np.max(np.abs(p0 + p1 - 1.0)))
    if drift > _NORMALIZATION_TOL:
        raise ArithmeticError(
            f"per-count label probabilities sum to 1 +/- {drift:.3g}, "
            f"beyond {_NORMALIZATION_TOL:g}"
        )
    p_n2 = 1.0 / (cfg.n + 1)
    h_nats = -float(np.sum(p0 * lp0) + np.sum(p1 * lp1)) * p_n2
    return max(h_nats / _LN2, 0.0)


def coin_theorem_bound(cfg: CoinExampleConfig) -> float:
    """Mediation is exact here, so the bound is twice the redundancy error."""
    return 2.0 * coin_median_entropy(cfg)


def coin_batch_joint(cfg: CoinExampleConfig) -> JointDistribution:
    """Joint distribution of the two batches' head counts (N1, N2)."""
    lp = count_pair_log_probs(cfg)
    table = np.exp(lp) / (cfg.n + 1)
    return JointDistribution(
        (VarSpec("N1", cfg.n + 1), VarSpec("N2", cfg.n + 1)), table
    )


def median_labels(cfg: CoinExampleConfig) -> tuple[int, ...]:
    """The label of each head count under the median split."""
    return tuple(
        0 if count < cfg.median_threshold else 1 for count in range(cfg.n + 1)
    )


def coin_joint_model(cfg: CoinExampleConfig) -> AgentModel:
    """Agent model over (N1, N2) whose latent is the batch-one label."""
    labels = median_labels(cfg)
    joint = coin_batch_joint(cfg).with_function_variable(
        "median", 2, ["N1"], lambda count: labels[count]
    )
    return AgentModel(joint, ("N1", "N2"), ("median",))


# -- discretized-bias die fixtures ------------------------------------------------


def die_fixture(
    rolls_per_chunk: int,
    faces: int = 2,
    concentration: float = 1.0,
    latent_grid: int | Sequence[Sequence[float]] = DEFAULT_GRID_SIZE,
) -> AgentModel:
    """Two chunk observables of face counts, mediated exactly by a
    grid-discretized bias.

    ``latent_grid`` is either a number of grid points (two-faced dice
    only) or an explicit sequence of per-face probability vectors.  The
    prior over grid points is the symmetric Dirichlet density with the
    given concentration, normalized over the grid.
    """
    grid = _bias_grid(faces, latent_grid)
    prior = _grid_prior(grid, concentration)
    counts = list(_compositions(rolls_per_chunk, faces))
    m = len(counts)
    _check_cells(len(grid) * m * m)
    pmf = np.array(
        [[_multinomial_pmf(c, bias) for c in counts] for bias in grid]
    )
    table = prior[:, None, None] * pmf[:, :, None] * pmf[:, None, :]
    joint = JointDistribution(
        (VarSpec("bias", len(grid)), VarSpec("chunk1", m), VarSpec("chunk2", m)),
        table,
    )
    return AgentModel(joint, ("chunk1", "chunk2"), ("bias",))


def die_rolls_fixture(
    n_rolls: int,
    faces: int = 2,
    concentration: float = 1.0,
    latent_grid: int | Sequence[Sequence[float]] = DEFAULT_GRID_SIZE,
) -> AgentModel:
    """Per-roll variant: each roll is its own observable (for chunking
    comparisons)."""
    if n_rolls < 2:
        raise DistributionError(f"need at least two rolls, got {n_rolls}")
    grid = _bias_grid(faces, latent_grid)
    prior = _grid_prior(grid, concentration)
    _check_cells(len(grid) * faces**n_rolls)
    table = prior.reshape((len(grid),) + (1,) * n_rolls)
    grid_arr = np.asarray(grid)
    for i in range(n_rolls):
        shape = [len(grid)] + [1] * n_rolls
        shape[1 + i] = faces
        table = table * grid_arr.reshape(tuple(shape))
    names = tuple(f"roll{i + 1}" for i in range(n_rolls))
    variables = (VarSpec("bias", len(grid)),) + tuple(
        VarSpec(n, faces) for n in names
    )
    joint = JointDistribution(variables, table)
    return AgentModel(joint, names, ("bias",))


def _bias_grid(
    faces: int, latent_grid: int | Sequence[Sequence[float]]
) -> list[tuple[float, ...]]:
    if faces < 2:
        raise DistributionError(f"a die needs at least two faces, got {faces}")
    if isinstance(latent_grid, int):
        if latent_grid < 1:
            raise DistributionError(f"grid size must be >= 1, got {latent_grid}")
        if faces != 2:
            raise DistributionError(
                "an integer grid size is only defined for two faces; "
                "pass explicit per-face probability vectors"
            )
        return [
            (1.0 - (i + 1) / (latent_grid + 1), (i + 1) / (latent_grid + 1))
            for i in range(latent_grid)
        ]
    grid = []
    for point in latent_grid:
        point = tuple(float(x) for x in point)
        if len(point) != faces:
            raise DistributionError(
                f"grid point {point} has {len(point)} entries, expected {faces}"
            )
        if any(x < 0.0 for x in point) or abs(sum(point) - 1.0) > 1e-9:
            raise DistributionError(f"grid point {point} is not a distribution")
        grid.append(point)
    if not grid:
        raise DistributionError("the bias grid is empty")
    return grid


def _grid_prior(grid: list[tuple[float, ...]], concentration: float) -> np.ndarray:
    if concentration <= 0.0:
        raise DistributionError(
            f"concentration must be positive, got {concentration}"
        )
    weights = np.array(
        [
            math.prod(x ** (concentration - 1.0) if x > 0.0 else (
                1.0 if concentration == 1.0 else 0.0
            ) for x in point)
            for point in grid
        ]
    )
    total = weights.sum()
    if total <= 0.0:
        raise DistributionError(
            "grid prior has zero mass; concentration/grid combination degenerate"
        )
    return weights / total


def _compositions(total: int, parts: int):
    """Count vectors summing to ``total``, lexicographically ordered."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _multinomial_pmf(counts: tuple[int, ...], bias: tuple[float, ...]) -> float:
    coeff = math.factorial(sum(counts))
    for c in counts:
        coeff //= math.factorial(c)
    prob = float(coeff)
    for c, p in zip(counts, bias):
        prob *= p**c
    return prob


def _check_cells(cells: int) -> None:
    if cells > DENSE_CELL_LIMIT:
        raise DistributionError(
            f"fixture would need {cells} cells, above the dense limit "
            f"{DENSE_CELL_LIMIT}"
        )


def chunk_count(rolls: int, faces: int) -> int:
    """Number of distinct face-count vectors for a chunk of rolls."""
    return math.comb(rolls + faces - 1, faces - 1)


def composition_index(counts: Sequence[int]) -> int:
    """Lexicographic index of a count vector among its compositions."""
    counts = tuple(counts)
    return list(_compositions(sum(counts), len(counts))).index(counts)
