"""DAGs over named variables, factorization semantics, and d-separation.

A distribution "satisfies" a DAG within ``eps`` bits when the KL divergence
from the distribution to its factorization projection onto the DAG is at
most ``eps``.  The projection multiplies the distribution's own
conditionals along the DAG's parent structure; conditionals at
zero-probability parent configurations are defined as uniform, which
carries no weight in any KL against the source distribution but keeps the
projection normalized.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dist import Assignment, JointDistribution, VarSpec, kl_divergence
from .errors import GraphError

#: Projection mass must land within this distance of 1 (it does, up to
#: float roundoff); it is then renormalized.
_PROJECTION_MASS_TOL = 1e-9

Edge = tuple[str, str]


class Dag:
    """Immutable directed acyclic graph over variable names."""

    __slots__ = ("_nodes", "_edges", "_parents", "_children", "_order")

    def __init__(self, nodes: Iterable[str], edges: Iterable[Edge] = ()):
        node_set = frozenset(nodes)
        for node in node_set:
            if not isinstance(node, str) or not node.isidentifier():
                raise GraphError(f"node name must be an identifier, got {node!r}")
        edge_set = set()
        parents: dict[str, set[str]] = {n: set() for n in node_set}
        children: dict[str, set[str]] = {n: set() for n in node_set}
        for parent, child in edges:
            if parent not in node_set or child not in node_set:
                raise GraphError(f"edge ({parent!r}, {child!r}) references unknown node")
            if parent == child:
                raise GraphError(f"self-loop on {parent!r}")
            edge_set.add((parent, child))
            parents[child].add(parent)
            children[parent].add(child)
        self._nodes = node_set
        self._edges = frozenset(edge_set)
        self._parents = {n: frozenset(s) for n, s in parents.items()}
        self._children = {n: frozenset(s) for n, s in children.items()}
        order = _lex_topological_order(node_set, edge_set)
        if order is None:
            pair = _some_cycle_pair(node_set, edge_set)
            raise GraphError(f"graph has a cycle (through {pair[0]!r} and {pair[1]!r})")
        self._order = order

    @classmethod
    def edgeless(cls, nodes: Iterable[str]) -> "Dag":
        return cls(nodes)

    @classmethod
    def complete(cls, order: Sequence[str]) -> "Dag":
        """Complete DAG along the given order; satisfied exactly by any
        distribution (chain rule)."""
        order = tuple(order)
        edges = [
            (order[i], order[j])
            for i in range(len(order))
            for j in range(i + 1, len(order))
        ]
        return cls(order, edges)

    @property
    def nodes(self) -> frozenset[str]:
        return self._nodes

    @property
    def edges(self) -> frozenset[Edge]:
        return self._edges

    @property
    def topological_order(self) -> tuple[str, ...]:
        return self._order

    def parents(self, node: str) -> frozenset[str]:
        self._check_node(node)
        return self._parents[node]

    def children(self, node: str) -> frozenset[str]:
        self._check_node(node)
        return self._children[node]

    def descendants(self, node: str) -> frozenset[str]:
        self._check_node(node)
        seen: set[str] = set()
        stack = [node]
        while stack:
            for child in self._children[stack.pop()]:
                if child not in seen:
                    seen.add(child)
                    stack.append(child)
        return frozenset(seen)

    def ancestral_closure(self, nodes: Iterable[str]) -> frozenset[str]:
        """The given nodes together with all of their ancestors."""
        seen = set()
        stack = list(nodes)
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            self._check_node(node)
            seen.add(node)
            stack.extend(self._parents[node])
        return frozenset(seen)

    def with_child(self, parent: str, new_node: str) -> "Dag":
        """Add a fresh leaf ``new_node`` whose only parent is ``parent``."""
        self._check_node(parent)
        if new_node in self._nodes:
            raise GraphError(f"node {new_node!r} already present")
        return Dag(self._nodes | {new_node}, set(self._edges) | {(parent, new_node)})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dag):
            return NotImplemented
        return self._nodes == other._nodes and self._edges == other._edges

    def __hash__(self) -> int:
        return hash((self._nodes, self._edges))

    def __repr__(self) -> str:
        edges = ",".join(f"{p}->{c}" for p, c in sorted(self._edges))
        return f"Dag({sorted(self._nodes)}, [{edges}])"

    @classmethod
    def from_text(cls, text: str) -> "Dag":
        """Parse the graph text format: a ``nodes`` line then ``edge`` lines."""
        from .errors import FormatError

        nodes: tuple[str, ...] | None = None
        edges: list[Edge] = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            cut = raw.find("#")
            tokens = (raw if cut < 0 else raw[:cut]).split()
            if not tokens:
                continue
            if nodes is None:
                if tokens[0] != "nodes":
                    raise FormatError(f"expected 'nodes' line, got {tokens[0]!r}", lineno)
                if len(tokens) < 2:
                    raise FormatError("'nodes' line names no nodes", lineno)
                nodes = tuple(tokens[1:])
                continue
            if tokens[0] != "edge" or len(tokens) != 3:
                raise FormatError(f"expected 'edge <parent> <child>', got {raw!r}", lineno)
            edges.append((tokens[1], tokens[2]))
        if nodes is None:
            raise FormatError("no 'nodes' line found")
        try:
            return cls(nodes, edges)
        except GraphError as exc:
            raise FormatError(str(exc)) from exc

    def to_text(self) -> str:
        lines = ["nodes " + " ".join(sorted(self._nodes))]
        lines += [f"edge {p} {c}" for p, c in sorted(self._edges)]
        return "\n".join(lines) + "\n"

    def _check_node(self, node: str) -> None:
        if node not in self._nodes:
            raise GraphError(f"unknown node {node!r}; known: {sorted(self._nodes)}")


@dataclass(frozen=True)
class FactorizationError:
    """Approximation error of a distribution against a DAG, in bits."""

    epsilon_bits: float
    graph: Dag
    distribution: JointDistribution

    def __post_init__(self):
        if not (self.epsilon_bits >= 0.0):
            raise GraphError(f"epsilon must be >= 0, got {self.epsilon_bits}")


def factorization_projection(p: JointDistribution, g: Dag) -> JointDistribution:
    """Product of p's conditionals along g's parent structure."""
    _check_node_match(p, g)
    if p.is_dense:
        return _project_dense(p, g)
    return _project_sparse(p, g)


def factorization_error(p: JointDistribution, g: Dag) -> FactorizationError:
    """KL divergence from p to its projection onto g; 0 iff p satisfies g."""
    q = factorization_projection(p, g)
    return FactorizationError(kl_divergence(p, q), g, p)


def _check_node_match(p: JointDistribution, g: Dag) -> None:
    if set(p.names) != set(g.nodes):
        raise GraphError(
            f"graph nodes {sorted(g.nodes)} do not match variables {sorted(p.names)}"
        )


def _project_dense(p: JointDistribution, g: Dag) -> JointDistribution:
    table = p.table
    n = len(p.variables)
    axis = {v.name: i for i, v in enumerate(p.variables)}
    q = np.ones_like(table)
    for i, var in enumerate(p.variables):
        family = sorted({axis[name] for name in g.parents(var.name)} | {i})
        others = tuple(a for a in range(n) if a not in family)
        m_fam = table.sum(axis=others, keepdims=True) if others else table
        m_pa = m_fam.sum(axis=i, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            cond = np.where(
                m_pa > 0.0,
                m_fam / np.where(m_pa > 0.0, m_pa, 1.0),
                1.0 / var.cardinality,
            )
        q = q * cond
    mass = float(q.sum())
    if abs(mass - 1.0) > _PROJECTION_MASS_TOL:
        raise ArithmeticError(
            f"projection mass {mass!r} drifted beyond {_PROJECTION_MASS_TOL:g}"
        )
    return JointDistribution(p.variables, q / mass, normalize=False)


def _project_sparse(p: JointDistribution, g: Dag) -> JointDistribution:
    axis = {v.name: i for i, v in enumerate(p.variables)}
    card = {v.name: v.cardinality for v in p.variables}
    # Per-node conditional factors keyed by parent assignment.
    factors: dict[str, tuple[tuple[str, ...], dict, dict]] = {}
    for name in g.topological_order:
        pa = tuple(sorted(g.parents(name), key=lambda x: axis[x]))
        fam_axes = [axis[x] for x in pa] + [axis[name]]
        pa_axes = [axis[x] for x in pa]
        m_fam: dict[tuple, float] = {}
        m_pa: dict[tuple, float] = {}
        for assignment, prob in p.items():
            fam_key = tuple(assignment[i] for i in fam_axes)
            pa_key = tuple(assignment[i] for i in pa_axes)
            m_fam[fam_key] = m_fam.get(fam_key, 0.0) + prob
            m_pa[pa_key] = m_pa.get(pa_key, 0.0) + prob
        factors[name] = (pa, m_fam, m_pa)

    order = g.topological_order
    pos = {name: i for i, name in enumerate(order)}
    partial: dict[tuple, float] = {(): 1.0}
    for name in order:
        pa, m_fam, m_pa = factors[name]
        expanded: dict[tuple, float] = {}
        for key, weight in partial.items():
            pa_key = tuple(key[pos[x]] for x in pa)
            pa_mass = m_pa.get(pa_key, 0.0)
            for value in range(card[name]):
                if pa_mass > 0.0:
                    cond = m_fam.get(pa_key + (value,), 0.0) / pa_mass
                else:
                    cond = 1.0 / card[name]
                if cond > 0.0:
                    expanded[key + (value,)] = weight * cond
        partial = expanded

    cells = {
        tuple(key[pos[v.name]] for v in p.variables): w
        for key, w in partial.items()
    }
    mass = math.fsum(cells.values())
    if abs(mass - 1.0) > _PROJECTION_MASS_TOL:
        raise ArithmeticError(
            f"projection mass {mass!r} drifted beyond {_PROJECTION_MASS_TOL:g}"
        )
    cells = {k: w / mass for k, w in cells.items()}
    return JointDistribution(p.variables, cells, normalize=False)


# -- d-separation ---------------------------------------------------------


def d_separated(
    g: Dag, a: Iterable[str], b: Iterable[str], c: Iterable[str]
) -> bool:
    """Standard d-separation verdict for disjoint node sets a, b given c."""
    return d_separated_bayes_ball(g, a, b, c)


def d_separated_bayes_ball(
    g: Dag, a: Iterable[str], b: Iterable[str], c: Iterable[str]
) -> bool:
    """Active-trail reachability (the Koller & Friedman procedure)."""
    a_set, b_set, c_set = _check_query(g, a, b, c)
    if not a_set or not b_set:
        return True
    observed_or_above = g.ancestral_closure(c_set)

    visited: set[tuple[str, str]] = set()
    stack = [(node, "up") for node in a_set]
    while stack:
        node, direction = stack.pop()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node not in c_set and node in b_set:
            return False
        if direction == "up" and node not in c_set:
            stack.extend((p, "up") for p in g.parents(node))
            stack.extend((ch, "down") for ch in g.children(node))
        elif direction == "down":
            if node not in c_set:
                stack.extend((ch, "down") for ch in g.children(node))
            if node in observed_or_above:
                stack.extend((p, "up") for p in g.parents(node))
    return True


def d_separated_moralization(
    g: Dag, a: Iterable[str], b: Iterable[str], c: Iterable[str]
) -> bool:
    """Ancestral-moralization test: separate a from b in the moral graph of
    the ancestral closure after deleting c."""
    a_set, b_set, c_set = _check_query(g, a, b, c)
    if not a_set or not b_set:
        return True
    relevant = g.ancestral_closure(a_set | b_set | c_set)
    neighbors: dict[str, set[str]] = {n: set() for n in relevant}
    for parent, child in g.edges:
        if parent in relevant and child in relevant:
            neighbors[parent].add(child)
            neighbors[child].add(parent)
    for node in relevant:
        pa = [x for x in g.parents(node) if x in relevant]
        for i in range(len(pa)):
            for j in range(i + 1, len(pa)):
                neighbors[pa[i]].add(pa[j])
                neighbors[pa[j]].add(pa[i])
    live = relevant - c_set
    seen = set(x for x in a_set if x in live)
    stack = list(seen)
    while stack:
        node = stack.pop()
        if node in b_set:
            return False
        for other in neighbors[node]:
            if other in live and other not in seen:
                seen.add(other)
                stack.append(other)
    return not (seen & b_set)


def _check_query(
    g: Dag, a: Iterable[str], b: Iterable[str], c: Iterable[str]
) -> tuple[set[str], set[str], set[str]]:
    a_set, b_set, c_set = set(a), set(b), set(c)
    for node in a_set | b_set | c_set:
        if node not in g.nodes:
            raise GraphError(f"unknown node {node!r} in d-separation query")
    if a_set & b_set or a_set & c_set or b_set & c_set:
        raise GraphError("d-separation query sets must be disjoint")
    return a_set, b_set, c_set


# -- implication between graphs ----------------------------------------------


def find_implication_witness(
    g1: Dag, g2: Dag
) -> tuple[str, frozenset[str], frozenset[str]] | None:
    """Return a local Markov statement of g2 not d-separated in g1, or None.

    The statement is (node, non-descendants beyond parents, parents); g1
    implies g2 exactly when no witness exists.
    """
    if g1.nodes != g2.nodes:
        raise GraphError(
            f"node sets differ: {sorted(g1.nodes)} vs {sorted(g2.nodes)}"
        )
    for node in g2.topological_order:
        pa = g2.parents(node)
        nondesc = g2.nodes - g2.descendants(node) - pa - {node}
        if not nondesc:
            continue
        if not d_separated_bayes_ball(g1, {node}, nondesc, pa):
            return (node, frozenset(nondesc), pa)
    return None


def graph_implies(g1: Dag, g2: Dag) -> bool:
    """True iff every distribution factoring over g1 also factors over g2."""
    return find_implication_witness(g1, g2) is None


def common_topological_order(graphs: Sequence[Dag]) -> tuple[str, ...] | None:
    """An ordering consistent with every graph's edges, or None.

    Deterministic: returns the lexicographically smallest valid order.
    """
    if not graphs:
        raise GraphError("need at least one graph")
    nodes = graphs[0].nodes
    for g in graphs[1:]:
        if g.nodes != nodes:
            raise GraphError(
                f"node sets differ: {sorted(nodes)} vs {sorted(g.nodes)}"
            )
    edges = set()
    for g in graphs:
        edges |= g.edges
    return _lex_topological_order(nodes, edges)


def order_conflict_pair(graphs: Sequence[Dag]) -> tuple[str, str]:
    """A pair of nodes on an ordering cycle of the graphs' combined edges."""
    edges = set()
    for g in graphs:
        edges |= g.edges
    return _some_cycle_pair(graphs[0].nodes, edges)


def _lex_topological_order(
    nodes: frozenset[str], edges: set[Edge] | frozenset[Edge]
) -> tuple[str, ...] | None:
    indegree = {n: 0 for n in nodes}
    children: dict[str, list[str]] = {n: [] for n in nodes}
    for parent, child in edges:
        indegree[child] += 1
        children[parent].append(child)
    ready = [n for n in nodes if indegree[n] == 0]
    heapq.heapify(ready)
    order: list[str] = []
    while ready:
        node = heapq.heappop(ready)
        order.append(node)
        for child in children[node]:
            indegree[child] -= 1
            if indegree[child] == 0:
                heapq.heappush(ready, child)
    if len(order) != len(nodes):
        return None
    return tuple(order)


def _some_cycle_pair(
    nodes: frozenset[str], edges: set[Edge] | frozenset[Edge]
) -> tuple[str, str]:
    remaining = {n for n in nodes}
    indegree = {n: 0 for n in nodes}
    children: dict[str, list[str]] = {n: [] for n in nodes}
    for parent, child in edges:
        indegree[child] += 1
        children[parent].append(child)
    changed = True
    while changed:
        changed = False
        for node in list(remaining):
            if indegree[node] == 0:
                remaining.discard(node)
                for child in children[node]:
                    indegree[child] -= 1
                changed = True
    # Every remaining node lies on or downstream of a cycle; walk one.
    start = sorted(remaining)[0]
    path, seen = [start], {start}
    while True:
        nxt = sorted(c for c in children[path[-1]] if c in remaining)[0]
        if nxt in seen:
            cycle_start = path.index(nxt)
            cycle = path[cycle_start:]
            return (cycle[0], cycle[1] if len(cycle) > 1 else cycle[0])
        path.append(nxt)
        seen.add(nxt)
