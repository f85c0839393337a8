"""Directed multigraphs, graph homomorphisms and the categorical kernel.

Graphs carry named nodes and arrows identified by (source, label, target)
triples.  Everything in this module is immutable; operations return new
values.  The pushout and pullback-complement constructions implemented here
are the building blocks for co-span rule application: a rule L -> I <- R is
applied to a host graph by gluing I \\ L onto the host (pushout) and then
removing the images of I \\ R (pullback complement).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

from .errors import (
    DanglingArrow,
    DanglingDeletion,
    DuplicateArrow,
    DuplicateNode,
    GraphMismatch,
    NotInclusion,
)

Arrow = Tuple[str, str, str]  # (source, label, target)


@dataclass(frozen=True)
class Graph:
    """A directed multigraph with named elements.

    Node names are unique; arrows are identified by their full
    (source, label, target) triple, so two arrows may share a label as long
    as their endpoints differ.
    """

    name: str
    nodes: FrozenSet[str] = frozenset()
    arrows: FrozenSet[Arrow] = frozenset()

    def __post_init__(self):
        for src, _, tgt in self.arrows:
            if src not in self.nodes or tgt not in self.nodes:
                raise DanglingArrow(
                    f"{self.name}: arrow endpoints {(src, tgt)} not declared"
                )

    @property
    def elements(self) -> FrozenSet:
        return self.nodes | self.arrows

    def has(self, element) -> bool:
        return element in self.nodes or element in self.arrows

    def incident(self, node: str) -> FrozenSet[Arrow]:
        return frozenset(a for a in self.arrows if node in (a[0], a[2]))

    def is_empty(self) -> bool:
        return not self.nodes and not self.arrows

    def renamed(self, name: str) -> "Graph":
        return Graph(name, self.nodes, self.arrows)


def build_graph(name: str, nodes: Iterable[str], arrows: Iterable[Arrow]) -> Graph:
    """Construct a graph, rejecting duplicates and undeclared endpoints."""
    node_set = set()
    for n in nodes:
        if n in node_set:
            raise DuplicateNode(f"{name}: duplicate node {n!r}")
        node_set.add(n)
    arrow_set = set()
    for a in arrows:
        a = tuple(a)
        if a in arrow_set:
            raise DuplicateArrow(f"{name}: duplicate arrow {a!r}")
        if a[0] not in node_set or a[2] not in node_set:
            raise DanglingArrow(f"{name}: arrow {a!r} has undeclared endpoint")
        arrow_set.add(a)
    return Graph(name, frozenset(node_set), frozenset(arrow_set))


@dataclass(frozen=True)
class Subgraph:
    """A subset of a host graph's elements, closed under arrow endpoints."""

    host: Graph
    nodes: FrozenSet[str]
    arrows: FrozenSet[Arrow]

    def __post_init__(self):
        if not self.nodes <= self.host.nodes or not self.arrows <= self.host.arrows:
            raise GraphMismatch(f"subgraph not contained in {self.host.name}")
        for src, _, tgt in self.arrows:
            if src not in self.nodes or tgt not in self.nodes:
                raise DanglingArrow(
                    f"subgraph of {self.host.name} not closed at {(src, tgt)}"
                )

    def as_graph(self, name: Optional[str] = None) -> Graph:
        return Graph(name or self.host.name, self.nodes, self.arrows)

    def intersection(self, other: "Subgraph") -> "Subgraph":
        return Subgraph(
            self.host, self.nodes & other.nodes, self.arrows & other.arrows
        )

    def __contains__(self, element) -> bool:
        return element in self.nodes or element in self.arrows

    def __le__(self, other: "Subgraph") -> bool:
        return self.nodes <= other.nodes and self.arrows <= other.arrows


def full_subgraph(g: Graph) -> Subgraph:
    return Subgraph(g, g.nodes, g.arrows)


def empty_subgraph(g: Graph) -> Subgraph:
    return Subgraph(g, frozenset(), frozenset())


@dataclass(frozen=True)
class TotalMorphism:
    """A total graph homomorphism given by node and arrow maps."""

    src: Graph
    dst: Graph
    node_map: Dict[str, str] = field(default_factory=dict)
    arrow_map: Dict[Arrow, Arrow] = field(default_factory=dict)

    def __post_init__(self):
        if set(self.node_map) != set(self.src.nodes):
            raise GraphMismatch(
                f"node map not total on {self.src.name}"
            )
        if set(self.arrow_map) != set(self.src.arrows):
            raise GraphMismatch(f"arrow map not total on {self.src.name}")
        for n, img in self.node_map.items():
            if img not in self.dst.nodes:
                raise GraphMismatch(f"node image {img!r} not in {self.dst.name}")
        for a, img in self.arrow_map.items():
            if img not in self.dst.arrows:
                raise GraphMismatch(f"arrow image {img!r} not in {self.dst.name}")
            if self.node_map[a[0]] != img[0] or self.node_map[a[2]] != img[2]:
                raise GraphMismatch(
                    f"morphism breaks source/target maps at {a!r}"
                )

    def __call__(self, element):
        if element in self.node_map:
            return self.node_map[element]
        return self.arrow_map[element]

    def is_inclusion(self) -> bool:
        return all(k == v for k, v in self.node_map.items()) and all(
            k == v for k, v in self.arrow_map.items()
        )

    def is_injective(self) -> bool:
        return len(set(self.node_map.values())) == len(self.node_map) and len(
            set(self.arrow_map.values())
        ) == len(self.arrow_map)

    def image(self) -> Subgraph:
        return Subgraph(
            self.dst,
            frozenset(self.node_map.values()),
            frozenset(self.arrow_map.values()),
        )

    def then(self, other: "TotalMorphism") -> "TotalMorphism":
        if other.src.name != self.dst.name or other.src.elements != self.dst.elements:
            raise GraphMismatch("morphisms not composable")
        return TotalMorphism(
            self.src,
            other.dst,
            {k: other.node_map[v] for k, v in self.node_map.items()},
            {k: other.arrow_map[v] for k, v in self.arrow_map.items()},
        )


def identity(g: Graph) -> TotalMorphism:
    return TotalMorphism(g, g, {n: n for n in g.nodes}, {a: a for a in g.arrows})


def inclusion(sub: Graph, sup: Graph) -> TotalMorphism:
    """The inclusion of `sub` into `sup`; fails if `sub` is not contained."""
    if not (sub.nodes <= sup.nodes and sub.arrows <= sup.arrows):
        raise NotInclusion(f"{sub.name} is not a subgraph of {sup.name}")
    return TotalMorphism(
        sub, sup, {n: n for n in sub.nodes}, {a: a for a in sub.arrows}
    )


@dataclass(frozen=True)
class PartialMorphism:
    """A partial graph homomorphism: total on its domain of definition."""

    src: Graph
    dst: Graph
    node_map: Dict[str, str] = field(default_factory=dict)
    arrow_map: Dict[Arrow, Arrow] = field(default_factory=dict)

    def __post_init__(self):
        # the domain of definition must be a genuine subgraph
        dom = Subgraph(
            self.src, frozenset(self.node_map), frozenset(self.arrow_map)
        )
        TotalMorphism(dom.as_graph(), self.dst, dict(self.node_map), dict(self.arrow_map))

    @property
    def domain(self) -> Subgraph:
        return Subgraph(
            self.src, frozenset(self.node_map), frozenset(self.arrow_map)
        )

    def is_total(self) -> bool:
        return (
            set(self.node_map) == set(self.src.nodes)
            and set(self.arrow_map) == set(self.src.arrows)
        )

    def defined_on(self, element) -> bool:
        return element in self.node_map or element in self.arrow_map

    def __call__(self, element):
        if element in self.node_map:
            return self.node_map[element]
        return self.arrow_map[element]

    def total_part(self) -> TotalMorphism:
        return TotalMorphism(
            self.domain.as_graph(), self.dst, dict(self.node_map), dict(self.arrow_map)
        )

    def restricted_to(self, nodes, arrows) -> "PartialMorphism":
        return PartialMorphism(
            self.src,
            self.dst,
            {n: v for n, v in self.node_map.items() if n in nodes},
            {a: v for a, v in self.arrow_map.items() if a in arrows},
        )

    def agrees_with(self, other: "PartialMorphism") -> bool:
        """Domain inclusion plus pointwise agreement on the smaller domain."""
        for n, v in self.node_map.items():
            if other.node_map.get(n) != v:
                return False
        for a, v in self.arrow_map.items():
            if other.arrow_map.get(a) != v:
                return False
        return True


def partial_from_total(t: TotalMorphism, host: Graph) -> PartialMorphism:
    """View a total morphism out of a subgraph of `host` as partial on `host`."""
    return PartialMorphism(host, t.dst, dict(t.node_map), dict(t.arrow_map))


def total_as_partial(t: TotalMorphism) -> PartialMorphism:
    return PartialMorphism(t.src, t.dst, dict(t.node_map), dict(t.arrow_map))


def compose_partial(g: PartialMorphism, h: PartialMorphism) -> PartialMorphism:
    """Compose g: A -+-> B with h: B -+-> C by pullback (inverse image).

    The composite is defined exactly on the g-preimage of h's domain of
    definition, so it is total whenever both factors are.
    """
    if g.dst.name != h.src.name or g.dst.elements != h.src.elements:
        raise GraphMismatch(
            f"cannot compose through {g.dst.name} and {h.src.name}"
        )
    node_map = {
        n: h.node_map[v] for n, v in g.node_map.items() if v in h.node_map
    }
    arrow_map = {
        a: h.arrow_map[v] for a, v in g.arrow_map.items() if v in h.arrow_map
    }
    return PartialMorphism(g.src, h.dst, node_map, arrow_map)


def fresh_name(base: str, taken) -> str:
    """Deterministic fresh names: base$k with the smallest free k."""
    k = 0
    while f"{base}${k}" in taken:
        k += 1
    return f"{base}${k}"


def pushout(
    l: TotalMorphism, m: TotalMorphism
) -> Tuple[Graph, TotalMorphism, TotalMorphism]:
    """Pushout of S <-m- L -l-> I where l is an inclusion.

    Returns (D, s, d) with s: S -> D an inclusion and d: I -> D.  D extends S
    with a fresh copy of I minus L; copied elements are renamed with a `$k`
    suffix so repeated applications stay collision-free and deterministic.
    """
    if not l.is_inclusion():
        raise NotInclusion("left leg of the pushout span must be an inclusion")
    if l.src.elements != m.src.elements:
        raise GraphMismatch("pushout legs must share their source graph")
    L, I, S = l.src, l.dst, m.dst

    new_nodes = sorted(I.nodes - L.nodes)
    taken = set(S.nodes)
    node_copy: Dict[str, str] = {}
    for n in new_nodes:
        node_copy[n] = fresh_name(n, taken)
        taken.add(node_copy[n])

    def map_node(n: str) -> str:
        return node_copy[n] if n in node_copy else m.node_map[n]

    new_arrows = sorted(I.arrows - L.arrows)
    d_nodes = set(S.nodes) | set(node_copy.values())
    d_arrows = set(S.arrows)
    arrow_copy: Dict[Arrow, Arrow] = {}
    for a in new_arrows:
        src, label, tgt = map_node(a[0]), a[1], map_node(a[2])
        k = 0
        while (src, f"{label}${k}", tgt) in d_arrows:
            k += 1
        img = (src, f"{label}${k}", tgt)
        arrow_copy[a] = img
        d_arrows.add(img)

    D = Graph(S.name, frozenset(d_nodes), frozenset(d_arrows))
    s = inclusion(S, D)
    d = TotalMorphism(
        I,
        D,
        {n: map_node(n) for n in I.nodes},
        {a: (arrow_copy[a] if a in arrow_copy else m.arrow_map[a]) for a in I.arrows},
    )
    return D, s, d


def pullback_complement(
    r: TotalMorphism, d: TotalMorphism
) -> Tuple[Graph, TotalMorphism, TotalMorphism]:
    """Pullback complement of R -r-> I -d-> D where r is an inclusion.

    Removes from D the d-images of all elements of I outside R, and returns
    (T, R -> T, T -> D).  Raises DanglingDeletion when removing a node image
    would orphan a surviving arrow, or when a deleted image is shared with a
    preserved element (both are gluing-condition violations).
    """
    if not r.is_inclusion():
        raise NotInclusion("right leg must be an inclusion")
    if r.dst.elements != d.src.elements:
        raise GraphMismatch("r and d must share the interface graph")
    R, I, D = r.src, r.dst, d.dst

    gone_nodes = {d.node_map[n] for n in I.nodes - R.nodes}
    gone_arrows = {d.arrow_map[a] for a in I.arrows - R.arrows}
    kept_nodes = {d.node_map[n] for n in R.nodes}
    kept_arrows = {d.arrow_map[a] for a in R.arrows}
    if gone_nodes & kept_nodes or gone_arrows & kept_arrows:
        raise DanglingDeletion(
            "deleted image coincides with a preserved one (non-injective match)"
        )

    t_arrows = D.arrows - frozenset(gone_arrows)
    t_nodes = D.nodes - frozenset(gone_nodes)
    for a in t_arrows:
        if a[0] in gone_nodes or a[2] in gone_nodes:
            raise DanglingDeletion(
                f"deleting a node would orphan surviving arrow {a!r}"
            )
    T = Graph(D.name, t_nodes, t_arrows)
    t_in = TotalMorphism(
        R,
        T,
        {n: d.node_map[n] for n in R.nodes},
        {a: d.arrow_map[a] for a in R.arrows},
    )
    return T, t_in, inclusion(T, D)


def find_homomorphisms(
    pattern: Graph, target: Graph, injective: bool = False
) -> List[TotalMorphism]:
    """Exhaustively enumerate all total homomorphisms pattern -> target.

    Brute force by design: this is the oracle the optimised matcher is
    checked against, so it must stay independent of it.
    """
    p_nodes = sorted(pattern.nodes)
    results: List[TotalMorphism] = []
    if injective and len(p_nodes) > len(target.nodes):
        return results
    candidates = (
        itertools.permutations(sorted(target.nodes), len(p_nodes))
        if injective
        else itertools.product(sorted(target.nodes), repeat=len(p_nodes))
    )
    p_arrows = sorted(pattern.arrows)
    for assignment in candidates:
        node_map = dict(zip(p_nodes, assignment))
        # each pattern arrow may map to any parallel target arrow
        per_arrow = []
        ok = True
        for (src, label, tgt) in p_arrows:
            options = sorted(
                a
                for a in target.arrows
                if a[0] == node_map[src] and a[2] == node_map[tgt]
            )
            if not options:
                ok = False
                break
            per_arrow.append(options)
        if not ok:
            continue
        for choice in itertools.product(*per_arrow):
            if injective and len(set(choice)) != len(choice):
                continue
            arrow_map = dict(zip(p_arrows, choice))
            results.append(TotalMorphism(pattern, target, node_map, arrow_map))
    return results
