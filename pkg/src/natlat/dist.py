"""Discrete joint distributions over named finite-alphabet variables.

A :class:`JointDistribution` is an exact probability table over an ordered
list of variables, stored densely (numpy array) up to
:data:`DENSE_CELL_LIMIT` cells and as a sparse assignment map above that.
All information quantities are reported in bits, with the convention
``0 * log 0 = 0``.  KL divergence returns ``math.inf`` (never raises) when
the first argument puts mass where the second does not.

Values are immutable after construction: every operation returns a new
distribution, so instances can be shared freely across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import DistributionError, FormatError, UnsupportedEvidenceError

#: Cell-count boundary between dense (ndarray) and sparse (dict) storage.
DENSE_CELL_LIMIT = 10_000_000

#: Total mass must be within this distance of 1 for a table to load;
#: anything closer is silently renormalized.
LOAD_MASS_TOLERANCE = 1e-6

Assignment = tuple[int, ...]


@dataclass(frozen=True)
class VarSpec:
    """A named variable with a finite alphabet ``{0, ..., cardinality-1}``."""

    name: str
    cardinality: int

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name.isidentifier():
            raise DistributionError(
                f"variable name must be an identifier, got {self.name!r}"
            )
        if not isinstance(self.cardinality, int) or self.cardinality < 1:
            raise DistributionError(
                f"cardinality of {self.name!r} must be a positive integer, "
                f"got {self.cardinality!r}"
            )


class JointDistribution:
    """Normalized probability table over an ordered set of variables.

    Construct with a mapping from assignment tuples to probabilities or a
    dense numpy array whose shape matches the variable cardinalities.  With
    ``normalize=True`` (the default for user input) the total mass must be
    within :data:`LOAD_MASS_TOLERANCE` of 1 and is silently renormalized;
    internal mass-preserving operations pass ``normalize=False``.
    """

    __slots__ = ("_variables", "_table", "_cells", "_axis")

    def __init__(
        self,
        variables: Sequence[VarSpec],
        data: Mapping[Assignment, float] | np.ndarray,
        *,
        normalize: bool = True,
    ):
        variables = tuple(variables)
        names = [v.name for v in variables]
        if len(set(names)) != len(names):
            raise DistributionError(f"duplicate variable names in {names}")
        if not variables:
            raise DistributionError("a distribution needs at least one variable")
        self._variables = variables
        self._axis = {v.name: i for i, v in enumerate(variables)}
        shape = tuple(v.cardinality for v in variables)
        count = math.prod(shape)

        if isinstance(data, np.ndarray):
            if data.shape != shape:
                raise DistributionError(
                    f"array shape {data.shape} does not match cardinalities {shape}"
                )
            table = np.asarray(data, dtype=np.float64).copy()
            self._table, self._cells = table, None
        else:
            cells: dict[Assignment, float] = {}
            for assignment, p in data.items():
                assignment = tuple(assignment)
                self._check_assignment(assignment)
                if assignment in cells:
                    raise DistributionError(f"duplicate cell {assignment}")
                if p != 0.0:
                    cells[assignment] = float(p)
            if count <= DENSE_CELL_LIMIT:
                table = np.zeros(shape, dtype=np.float64)
                for assignment, p in cells.items():
                    table[assignment] = p
                self._table, self._cells = table, None
            else:
                self._table, self._cells = None, cells

        self._validate_values()
        if normalize:
            mass = self.total_mass()
            if not (abs(mass - 1.0) <= LOAD_MASS_TOLERANCE):
                raise DistributionError(
                    f"total probability mass {mass!r} is not within "
                    f"{LOAD_MASS_TOLERANCE:g} of 1"
                )
            if mass != 1.0:
                self._scale(1.0 / mass)
        if self._table is not None:
            self._table.flags.writeable = False

    # -- construction helpers --------------------------------------------

    @classmethod
    def from_cells(
        cls,
        variables: Sequence[VarSpec],
        cells: Mapping[Assignment, float],
        *,
        normalize: bool = True,
    ) -> "JointDistribution":
        return cls(variables, cells, normalize=normalize)

    @classmethod
    def from_array(
        cls,
        variables: Sequence[VarSpec],
        array: np.ndarray,
        *,
        normalize: bool = True,
    ) -> "JointDistribution":
        return cls(variables, np.asarray(array, dtype=np.float64), normalize=normalize)

    @classmethod
    def uniform(cls, variables: Sequence[VarSpec]) -> "JointDistribution":
        variables = tuple(variables)
        shape = tuple(v.cardinality for v in variables)
        return cls(variables, np.full(shape, 1.0 / math.prod(shape)), normalize=False)

    # -- basic accessors ---------------------------------------------------

    @property
    def variables(self) -> tuple[VarSpec, ...]:
        return self._variables

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self._variables)

    @property
    def cell_count(self) -> int:
        return math.prod(v.cardinality for v in self._variables)

    @property
    def is_dense(self) -> bool:
        return self._table is not None

    @property
    def table(self) -> np.ndarray:
        """Dense probability array (read-only); densifies sparse storage."""
        if self._table is not None:
            return self._table
        table = np.zeros(tuple(v.cardinality for v in self._variables))
        for assignment, p in self._cells.items():
            table[assignment] = p
        table.flags.writeable = False
        return table

    def cardinality(self, name: str) -> int:
        return self._variables[self._axis_of(name)].cardinality

    def prob(self, assignment: Assignment) -> float:
        assignment = tuple(assignment)
        self._check_assignment(assignment)
        if self._table is not None:
            return float(self._table[assignment])
        return self._cells.get(assignment, 0.0)

    def items(self) -> Iterator[tuple[Assignment, float]]:
        """Iterate over support cells as (assignment, probability) pairs."""
        if self._table is not None:
            for assignment, p in np.ndenumerate(self._table):
                if p != 0.0:
                    yield assignment, float(p)
        else:
            yield from self._cells.items()

    def total_mass(self) -> float:
        if self._table is not None:
            return float(self._table.sum())
        return float(math.fsum(self._cells.values()))

    def support_size(self) -> int:
        if self._table is not None:
            return int(np.count_nonzero(self._table))
        return len(self._cells)

    # -- marginalization and conditioning ----------------------------------

    def marginalize(self, keep: Iterable[str]) -> "JointDistribution":
        """Sum out every variable not in ``keep``; mass is preserved exactly.

        The result keeps this distribution's variable order.
        """
        keep_set = self._known_subset(keep, "keep")
        if not keep_set:
            raise DistributionError("keep must name at least one variable")
        kept = tuple(v for v in self._variables if v.name in keep_set)
        if len(kept) == len(self._variables):
            return self
        if self._table is not None:
            drop_axes = tuple(
                i for i, v in enumerate(self._variables) if v.name not in keep_set
            )
            return JointDistribution(kept, self._table.sum(axis=drop_axes),
                                     normalize=False)
        kept_axes = [self._axis[v.name] for v in kept]
        cells: dict[Assignment, float] = {}
        for assignment, p in self._cells.items():
            key = tuple(assignment[i] for i in kept_axes)
            cells[key] = cells.get(key, 0.0) + p
        return JointDistribution(kept, cells, normalize=False)

    def condition(self, evidence: Mapping[str, int]) -> "JointDistribution":
        """Return the normalized conditional over the remaining variables.

        Raises :class:`UnsupportedEvidenceError` if the evidence has zero
        probability.  Callers averaging over evidence values should skip
        zero-mass events instead of calling this.
        """
        if not evidence:
            raise DistributionError("evidence must name at least one variable")
        ev: dict[int, int] = {}
        for name, value in evidence.items():
            axis = self._axis_of(name)
            card = self._variables[axis].cardinality
            if not (0 <= int(value) < card):
                raise DistributionError(
                    f"evidence value {value} out of range for {name!r} "
                    f"(cardinality {card})"
                )
            ev[axis] = int(value)
        if len(ev) == len(self._variables):
            raise DistributionError("evidence covers every variable")
        remaining = tuple(
            v for i, v in enumerate(self._variables) if i not in ev
        )
        if self._table is not None:
            index = tuple(
                ev.get(i, slice(None)) for i in range(len(self._variables))
            )
            sub = self._table[index]
            mass = float(sub.sum())
            if mass <= 0.0:
                raise UnsupportedEvidenceError(
                    f"evidence {dict(evidence)} has zero probability"
                )
            return JointDistribution(remaining, sub / mass, normalize=False)
        keep_axes = [i for i in range(len(self._variables)) if i not in ev]
        cells: dict[Assignment, float] = {}
        mass = 0.0
        for assignment, p in self._cells.items():
            if all(assignment[i] == v for i, v in ev.items()):
                cells[tuple(assignment[i] for i in keep_axes)] = p
                mass += p
        if mass <= 0.0:
            raise UnsupportedEvidenceError(
                f"evidence {dict(evidence)} has zero probability"
            )
        return JointDistribution(
            remaining, {k: p / mass for k, p in cells.items()}, normalize=False
        )

    # -- information quantities (bits) --------------------------------------

    def entropy(self, over: Iterable[str] | None = None) -> float:
        """Shannon entropy of the marginal over ``over`` (default: all)."""
        marg = self if over is None else self.marginalize(over)
        if marg._table is not None:
            t = marg._table
            mask = t > 0.0
            h = -float(np.sum(t[mask] * np.log2(t[mask])))
        else:
            h = -math.fsum(p * math.log2(p) for p in marg._cells.values() if p > 0.0)
        return max(h, 0.0)

    def conditional_entropy(
        self, target: Iterable[str], given: Iterable[str]
    ) -> float:
        """H(target | given) in bits; the two sets must be disjoint."""
        target_set = self._known_subset(target, "target")
        given_set = self._known_subset(given, "given")
        if target_set & given_set:
            raise DistributionError(
                f"target and given overlap on {sorted(target_set & given_set)}"
            )
        if not target_set:
            raise DistributionError("target must name at least one variable")
        if not given_set:
            return self.entropy(target_set)
        fam = self.marginalize(target_set | given_set)
        if fam._table is not None:
            target_axes = tuple(
                i for i, v in enumerate(fam._variables) if v.name in target_set
            )
            m_fam = fam._table
            m_given = m_fam.sum(axis=target_axes, keepdims=True)
            mask = m_fam > 0.0
            g = np.broadcast_to(m_given, m_fam.shape)[mask]
            f = m_fam[mask]
            h = float(np.sum(f * (np.log2(g) - np.log2(f))))
        else:
            given_axes = [
                i for i, v in enumerate(fam._variables) if v.name in given_set
            ]
            m_given: dict[Assignment, float] = {}
            for assignment, p in fam._cells.items():
                key = tuple(assignment[i] for i in given_axes)
                m_given[key] = m_given.get(key, 0.0) + p
            h = math.fsum(
                p * (math.log2(m_given[tuple(a[i] for i in given_axes)])
                     - math.log2(p))
                for a, p in fam._cells.items()
                if p > 0.0
            )
        return max(h, 0.0)

    def mutual_information(self, a: Iterable[str], b: Iterable[str]) -> float:
        """I(a; b) in bits, as H(a) + H(b) - H(a, b)."""
        a_set = self._known_subset(a, "a")
        b_set = self._known_subset(b, "b")
        if a_set & b_set:
            raise DistributionError(
                f"variable sets overlap on {sorted(a_set & b_set)}"
            )
        mi = self.entropy(a_set) + self.entropy(b_set) - self.entropy(a_set | b_set)
        return max(mi, 0.0)

    # -- structural transforms ----------------------------------------------

    def reordered(self, names: Sequence[str]) -> "JointDistribution":
        """Permute the variable order; the table content is unchanged."""
        names = tuple(names)
        if sorted(names) != sorted(self.names):
            raise DistributionError(
                f"reorder {names} is not a permutation of {self.names}"
            )
        if names == self.names:
            return self
        perm = [self._axis[n] for n in names]
        new_vars = tuple(self._variables[i] for i in perm)
        if self._table is not None:
            return JointDistribution(
                new_vars, np.transpose(self._table, perm), normalize=False
            )
        cells = {
            tuple(a[i] for i in perm): p for a, p in self._cells.items()
        }
        return JointDistribution(new_vars, cells, normalize=False)

    def with_function_variable(
        self,
        name: str,
        cardinality: int,
        of: Sequence[str],
        fn: Callable,
    ) -> "JointDistribution":
        """Append a new variable deterministically computed from ``of``.

        ``fn`` receives the source value directly when ``of`` has a single
        variable, otherwise the tuple of source values.  Mass is preserved
        exactly: each cell keeps its probability at the computed label.
        """
        new_var = VarSpec(name, cardinality)
        if name in self._axis:
            raise DistributionError(f"variable {name!r} already exists")
        of = tuple(of)
        of_axes = [self._axis_of(n) for n in of]
        new_vars = self._variables + (new_var,)

        def label_of(assignment: Assignment) -> int:
            arg = assignment[of_axes[0]] if len(of_axes) == 1 else tuple(
                assignment[i] for i in of_axes
            )
            label = int(fn(arg))
            if not (0 <= label < cardinality):
                raise DistributionError(
                    f"label {label} out of range for {name!r} "
                    f"(cardinality {cardinality})"
                )
            return label

        if self._table is not None and len(of_axes) == 1:
            axis = of_axes[0]
            out = np.zeros(self._table.shape + (cardinality,))
            index: list = [slice(None)] * len(self._variables)
            for value in range(self._variables[axis].cardinality):
                index[axis] = value
                label = label_of(tuple(
                    value if i == axis else 0 for i in range(len(self._variables))
                ))
                out[tuple(index) + (label,)] = self._table[tuple(index)]
            return JointDistribution(new_vars, out, normalize=False)

        cells: dict[Assignment, float] = {}
        for assignment, p in self.items():
            cells[assignment + (label_of(assignment),)] = p
        return JointDistribution(new_vars, cells, normalize=False)

    # -- serialization --------------------------------------------------------

    @classmethod
    def from_text(cls, text: str) -> "JointDistribution":
        """Parse the distribution text format.

        Line 1 is ``vars <name:cardinality> ...``; every other non-empty
        line is ``<idx> <idx> ... <probability>``.  ``#`` starts a comment
        and unlisted cells are zero.
        """
        variables, cells = _parse_distribution_lines(text.splitlines())
        try:
            return cls(variables, cells)
        except DistributionError as exc:
            raise FormatError(str(exc)) from exc

    def to_text(self) -> str:
        header = "vars " + " ".join(
            f"{v.name}:{v.cardinality}" for v in self._variables
        )
        lines = [header]
        for assignment in sorted(dict(self.items())):
            p = self.prob(assignment)
            lines.append(" ".join(str(i) for i in assignment) + f" {p!r}")
        return "\n".join(lines) + "\n"

    # -- internals --------------------------------------------------------------

    def _axis_of(self, name: str) -> int:
        try:
            return self._axis[name]
        except KeyError:
            raise DistributionError(
                f"unknown variable {name!r}; known: {list(self.names)}"
            ) from None

    def _known_subset(self, names: Iterable[str], what: str) -> set[str]:
        out = set()
        for name in names:
            self._axis_of(name)
            out.add(name)
        return out

    def _check_assignment(self, assignment: Assignment) -> None:
        if len(assignment) != len(self._variables):
            raise DistributionError(
                f"assignment {assignment} has {len(assignment)} entries, "
                f"expected {len(self._variables)}"
            )
        for value, var in zip(assignment, self._variables):
            if not (0 <= int(value) < var.cardinality):
                raise DistributionError(
                    f"value {value} out of range for {var.name!r} "
                    f"(cardinality {var.cardinality})"
                )

    def _validate_values(self) -> None:
        if self._table is not None:
            if not np.all(np.isfinite(self._table)):
                raise DistributionError("probabilities must be finite (no NaN/inf)")
            if np.any(self._table < 0.0):
                raise DistributionError("probabilities must be non-negative")
        else:
            for assignment, p in self._cells.items():
                if not math.isfinite(p):
                    raise DistributionError(
                        f"probability at {assignment} is not finite"
                    )
                if p < 0.0:
                    raise DistributionError(
                        f"probability at {assignment} is negative"
                    )

    def _scale(self, factor: float) -> None:
        if self._table is not None:
            self._table *= factor
        else:
            self._cells = {a: p * factor for a, p in self._cells.items()}

    def __repr__(self) -> str:
        spec = " ".join(f"{v.name}:{v.cardinality}" for v in self._variables)
        kind = "dense" if self.is_dense else "sparse"
        return f"JointDistribution({spec}, {kind}, support={self.support_size()})"


def kl_divergence(p: JointDistribution, q: JointDistribution) -> float:
    """D_KL(p || q) in bits, or ``math.inf`` where p has mass and q does not.

    The two distributions must have identical variable lists (names, order
    and cardinalities).  Cells with zero p-mass contribute nothing.
    """
    if p.variables != q.variables:
        raise DistributionError(
            f"variable mismatch: {p.names} vs {q.names}"
        )
    if p.is_dense and q.is_dense:
        pt, qt = p.table, q.table
        mask = pt > 0.0
        if np.any(qt[mask] <= 0.0):
            return math.inf
        total = float(np.sum(pt[mask] * (np.log2(pt[mask]) - np.log2(qt[mask]))))
    else:
        total = 0.0
        for assignment, pp in p.items():
            qq = q.prob(assignment)
            if qq <= 0.0:
                return math.inf
            total += pp * (math.log2(pp) - math.log2(qq))
    return total if total > 0.0 else 0.0


def max_abs_diff(p: JointDistribution, q: JointDistribution) -> float:
    """Largest absolute cell difference between two aligned distributions."""
    if p.variables != q.variables:
        raise DistributionError(f"variable mismatch: {p.names} vs {q.names}")
    if p.is_dense and q.is_dense:
        return float(np.max(np.abs(p.table - q.table)))
    keys = {a for a, _ in p.items()} | {a for a, _ in q.items()}
    return max((abs(p.prob(a) - q.prob(a)) for a in keys), default=0.0)


def _strip_comment(line: str) -> str:
    cut = line.find("#")
    return line if cut < 0 else line[:cut]


def _parse_distribution_lines(
    lines: Sequence[str],
) -> tuple[tuple[VarSpec, ...], dict[Assignment, float]]:
    variables: tuple[VarSpec, ...] | None = None
    cells: dict[Assignment, float] = {}
    for lineno, raw in enumerate(lines, start=1):
        tokens = _strip_comment(raw).split()
        if not tokens:
            continue
        if variables is None:
            if tokens[0] != "vars":
                raise FormatError(f"expected 'vars' line, got {tokens[0]!r}", lineno)
            if len(tokens) < 2:
                raise FormatError("'vars' line names no variables", lineno)
            specs = []
            for token in tokens[1:]:
                name, sep, card = token.partition(":")
                if not sep or not card.isdigit():
                    raise FormatError(
                        f"bad variable spec {token!r}, expected name:cardinality",
                        lineno,
                    )
                try:
                    specs.append(VarSpec(name, int(card)))
                except DistributionError as exc:
                    raise FormatError(str(exc), lineno) from exc
            variables = tuple(specs)
            continue
        if len(tokens) != len(variables) + 1:
            raise FormatError(
                f"expected {len(variables)} indices and a probability, "
                f"got {len(tokens)} tokens",
                lineno,
            )
        try:
            assignment = tuple(int(t) for t in tokens[:-1])
        except ValueError:
            raise FormatError(f"bad cell indices {tokens[:-1]}", lineno) from None
        try:
            prob = float(tokens[-1])
        except ValueError:
            raise FormatError(f"bad probability literal {tokens[-1]!r}", lineno) from None
        if not math.isfinite(prob):
            raise FormatError(f"probability {tokens[-1]!r} is not finite", lineno)
        for value, var in zip(assignment, variables):
            if not (0 <= value < var.cardinality):
                raise FormatError(
                    f"index {value} out of range for {var.name!r}", lineno
                )
        if assignment in cells:
            raise FormatError(f"duplicate cell {assignment}", lineno)
        cells[assignment] = prob
    if variables is None:
        raise FormatError("no 'vars' line found")
    return variables, cells
