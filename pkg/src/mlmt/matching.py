"""Matching META patterns against typing chains, and rule proliferation.

The META pattern chain of an MCMT rule is matched level by level against the
typing chain above a target model: a strictly monotone level map plus one
injective, type-consistent binding per META level.  Each complete match
turns the rule into concrete two-level rules by substituting the bound types
and expanding bounded multiplicities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .chains import ChainMorphism, GraphChain, build_chain
from .errors import UnresolvedReference
from .graphs import Arrow, Graph, PartialMorphism, TotalMorphism, build_graph
from .hierarchy import (
    ElementKey,
    ModelNode,
    MultilevelHierarchy,
    TypeRef,
    transitive_type_at,
)
from .rules import (
    ARROW,
    NODE,
    McmtRule,
    MetaElement,
    RulePattern,
    expand_cardinalities,
    type_chain,
)


@dataclass(frozen=True)
class MetaMatch:
    """A complete match of a META chain into a typing chain."""

    level_map: Tuple[Tuple[int, int], ...]  # meta level -> stack level
    bindings: Tuple[Tuple[int, Tuple[Tuple[str, ElementKey], ...]], ...]

    def f(self, meta_level: int) -> int:
        return dict(self.level_map)[meta_level]

    def binding(self, meta_level: int) -> Dict[str, ElementKey]:
        return dict(dict(self.bindings)[meta_level])


def _freeze_match(level_map: Dict[int, int], bindings: Dict[int, Dict[str, ElementKey]]) -> MetaMatch:
    return MetaMatch(
        tuple(sorted(level_map.items())),
        tuple(
            (lvl, tuple(sorted(b.items(), key=lambda kv: repr(kv))))
            for lvl, b in sorted(bindings.items())
        ),
    )


def _root_binding(rule: McmtRule, root: ModelNode) -> Dict[str, ElementKey]:
    """The trivial level-0 binding: root type names resolve by name."""
    binding: Dict[str, ElementKey] = {}
    arrows_by_label: Dict[str, List[Arrow]] = {}
    for a in root.graph.arrows:
        arrows_by_label.setdefault(a[1], []).append(a)
    for el in rule.meta_elements + rule.implicit_elements:
        if el.type_name is None or el.type_level != 0:
            continue
        if el.kind == NODE:
            if el.type_name not in root.graph.nodes:
                raise UnresolvedReference(
                    f"{rule.name}: unknown root type {el.type_name!r}"
                )
            binding[el.type_name] = el.type_name
        else:
            candidates = arrows_by_label.get(el.type_name, [])
            if len(candidates) != 1:
                raise UnresolvedReference(
                    f"{rule.name}: root arrow type {el.type_name!r} "
                    f"not uniquely resolvable"
                )
            binding[el.type_name] = candidates[0]
    return binding


def _type_profile(
    rule: McmtRule, element: MetaElement
) -> Tuple[Dict[int, Tuple[str, int]], int, bool]:
    """Anchors of an element's META type chain, keyed by META level.

    Returns (anchors, floor, open); anchors maps a META level to the
    (name, level) of the chain element there; `open` is true when the chain
    ends at an implicit constant instead of reaching the root.
    """
    anchors: Dict[int, Tuple[str, int]] = {}
    chain = type_chain(rule, element)
    for el in chain:
        anchors[el.level] = (el.name, el.level)
    last = chain[-1]
    if last.type_name is not None and last.type_level == 0:
        anchors[0] = (last.type_name, 0)
        return anchors, 0, False
    return anchors, last.level, True


def _element_satisfies(
    h: MultilevelHierarchy,
    rule: McmtRule,
    meta_el: MetaElement,
    model: ModelNode,
    candidate: ElementKey,
    level_map: Dict[int, int],
    bindings: Dict[int, Dict[str, ElementKey]],
) -> bool:
    """Type consistency via transitive types, over the whole chain profile."""
    anchors, floor, open_chain = _type_profile(rule, meta_el)
    for meta_level in range(meta_el.level - 1, floor - 1, -1):
        stack_level = level_map[meta_level]
        actual = transitive_type_at(h, model.name, candidate, stack_level)
        if meta_level in anchors:
            name, lvl = anchors[meta_level]
            required = bindings[lvl].get(name)
            if required is None or actual != required:
                return False
        else:
            if actual is not None:
                return False
    if meta_el.potency is not None:
        lo, hi = model.info_for(candidate).potency
        if not (lo <= meta_el.potency[0] and meta_el.potency[1] <= hi):
            return False
    if meta_el.multiplicity is not None:
        if not isinstance(candidate, tuple):
            return False
        target_mult = model.info_for(candidate).multiplicity or (0, None)
        lo, hi = meta_el.multiplicity
        if target_mult[0] > lo:
            return False
        if target_mult[1] is not None and (hi is None or hi > target_mult[1]):
            return False
    return True


def graph_match(
    pattern: Sequence[MetaElement],
    target: ModelNode,
    h: MultilevelHierarchy,
    rule: McmtRule,
    level_map: Dict[int, int],
    bindings: Dict[int, Dict[str, ElementKey]],
) -> List[Dict[str, ElementKey]]:
    """All injective, type- and structure-consistent bindings of one level."""
    nodes = [el for el in pattern if el.kind == NODE]
    arrows = [el for el in pattern if el.kind == ARROW]
    results: List[Dict[str, ElementKey]] = []

    def assign_nodes(i: int, binding: Dict[str, ElementKey], used: set):
        if i == len(nodes):
            assign_arrows(0, binding, set())
            return
        el = nodes[i]
        for cand in sorted(target.graph.nodes):
            if cand in used:
                continue
            if el.constant and cand != el.name:
                continue
            if not _element_satisfies(
                h, rule, el, target, cand, level_map, {**bindings, el.level: binding}
            ):
                continue
            binding[el.name] = cand
            used.add(cand)
            assign_nodes(i + 1, binding, used)
            used.discard(cand)
            del binding[el.name]

    def assign_arrows(i: int, binding: Dict[str, ElementKey], used: set):
        if i == len(arrows):
            results.append(dict(binding))
            return
        el = arrows[i]
        for cand in sorted(target.graph.arrows):
            if cand in used:
                continue
            if el.constant and cand[1] != el.name:
                continue
            if binding.get(el.source) != cand[0] or binding.get(el.target) != cand[2]:
                continue
            if not _element_satisfies(
                h, rule, el, target, cand, level_map, {**bindings, el.level: binding}
            ):
                continue
            binding[el.name] = cand
            used.add(cand)
            assign_arrows(i + 1, binding, used)
            used.discard(cand)
            del binding[el.name]

    assign_nodes(0, {}, set())
    return results


def match(
    rule: McmtRule,
    stack: Sequence[ModelNode],
    mm_level: int,
    tg_level: int,
    matches: List[MetaMatch],
    h: MultilevelHierarchy,
    _level_map: Optional[Dict[int, int]] = None,
    _bindings: Optional[Dict[int, Dict[str, ElementKey]]] = None,
) -> bool:
    """Recursive META-chain matching; complete matches land in `matches`.

    `stack` is the typing chain above the target model, root first.  Both
    level counters start at 0; descending a META level also advances the
    stack level, and a while-style sweep lets the stack level slide further
    down when the META chain is shorter than the stack.
    """
    depth = rule.depth
    if _level_map is None:
        _level_map = {0: 0}
        _bindings = {0: _root_binding(rule, stack[0])}
    if mm_level == depth:
        matches.append(_freeze_match(_level_map, _bindings))
        return True
    found = False
    # leave room below for the remaining META levels
    for t in range(tg_level + 1, len(stack) - (depth - mm_level - 1)):
        level_map = {**_level_map, mm_level + 1: t}
        for binding in graph_match(
            rule.meta_at(mm_level + 1), stack[t], h, rule, level_map, _bindings
        ):
            bindings = {**_bindings, mm_level + 1: binding}
            if match(
                rule, stack, mm_level + 1, t, matches, h, level_map, bindings
            ):
                found = True
    return found


def find_meta_matches(
    rule: McmtRule, h: MultilevelHierarchy, target_model: str
) -> List[MetaMatch]:
    stack = typing_stack(h, target_model)
    matches: List[MetaMatch] = []
    match(rule, stack, 0, 0, matches, h)
    return matches


def typing_stack(h: MultilevelHierarchy, target_model: str) -> List[ModelNode]:
    """The models a target is typed over: its root path, itself excluded."""
    path = h.root_path(target_model)
    return [h.model(name) for name in path[:-1]]


# ---------------------------------------------------------------------------
# proliferation


@dataclass(frozen=True)
class TwoLevelRule:
    """A concrete co-span rule produced from an MCMT match.

    Element types are references into the hierarchy; `level_types` pins the
    full transitive-type profile per element across the stack levels, with
    None marking levels where the element must be untyped.
    """

    name: str
    lhs: Graph
    interface: Graph
    rhs: Graph
    types: Dict[ElementKey, TypeRef]
    level_types: Dict[ElementKey, Tuple[Tuple[int, Optional[ElementKey]], ...]]
    source_rule: str
    source_match: MetaMatch


def _pattern_graphs(rule: McmtRule, name: str) -> Tuple[Graph, Graph, Graph]:
    lhs = rule.from_pattern.graph(name)
    rhs = rule.to_pattern.graph(name)
    inter = build_graph(
        name,
        sorted(lhs.nodes | rhs.nodes),
        sorted(lhs.arrows | rhs.arrows),
    )
    return lhs, inter, rhs


def _element_key(e) -> ElementKey:
    return e.name if e.kind == NODE else (e.source, e.name, e.target)


def _instance_profile(
    rule: McmtRule,
    meta_el: MetaElement,
    mm_match: MetaMatch,
    stack: Sequence[ModelNode],
) -> Tuple[Tuple[int, Optional[ElementKey]], ...]:
    """Per-stack-level type constraints for an instance of `meta_el`."""
    anchors, floor, open_chain = _type_profile(rule, meta_el)
    anchors = dict(anchors)
    anchors[meta_el.level] = (meta_el.name, meta_el.level)
    constraints: List[Tuple[int, Optional[ElementKey]]] = []
    for meta_level in range(meta_el.level, floor - 1, -1):
        stack_level = mm_match.f(meta_level)
        if meta_level in anchors:
            name, lvl = anchors[meta_level]
            constraints.append(
                (stack_level, mm_match.binding(lvl)[name])
            )
        else:
            constraints.append((stack_level, None))
    # stack levels between mapped meta levels must also be untyped
    mapped = {mm_match.f(l) for l in range(meta_el.level, floor - 1, -1)}
    top = mm_match.f(meta_el.level)
    bottom = mm_match.f(floor)
    for stack_level in range(bottom, top):
        if stack_level not in mapped:
            constraints.append((stack_level, None))
    return tuple(sorted(constraints, reverse=True))


def proliferate(
    rule: McmtRule, h: MultilevelHierarchy, target_model: str
) -> List[TwoLevelRule]:
    """Compile one MCMT into concrete two-level rules over a branch."""
    stack = typing_stack(h, target_model)
    out: List[TwoLevelRule] = []
    for mm_match in find_meta_matches(rule, h, target_model):
        bound_mults = {}
        for el in rule.meta_elements + rule.implicit_elements:
            if el.kind != ARROW or el.level < 1:
                continue
            bound = mm_match.binding(el.level).get(el.name)
            if bound is None:
                continue
            model = stack[mm_match.f(el.level)]
            bound_mults[(el.level, el.name)] = (
                model.info_for(bound).multiplicity or (0, None)
            )
        for expanded in expand_cardinalities(rule, bound_mults):
            name = f"{rule.name}_{len(out)}"
            lhs, inter, rhs = _pattern_graphs(expanded, target_model)
            types: Dict[ElementKey, TypeRef] = {}
            level_types = {}
            for e in expanded.to_pattern.elements + expanded.from_pattern.elements:
                key = _element_key(e)
                if key in types:
                    continue
                meta_el = rule.meta_element(e.type_name, e.type_level)
                stack_level = mm_match.f(meta_el.level)
                bound = mm_match.binding(meta_el.level)[meta_el.name]
                types[key] = (stack[stack_level].name, bound)
                level_types[key] = _instance_profile(rule, meta_el, mm_match, stack)
            out.append(
                TwoLevelRule(
                    name, lhs, inter, rhs, types, level_types, rule.name, mm_match
                )
            )
    return out


def proliferate_all(
    rules: Sequence[McmtRule], h: MultilevelHierarchy, target_model: str
) -> Dict[str, List[TwoLevelRule]]:
    """Proliferate a rule set; keyed per source rule for breakdown reports."""
    return {rule.name: proliferate(rule, h, target_model) for rule in rules}


def rule_set_to_json(rules: Sequence[TwoLevelRule]) -> dict:
    def graph_json(g: Graph, types: Dict[ElementKey, TypeRef]) -> dict:
        nodes = [
            {"name": n, "type": f"{types[n][0]}.{types[n][1]}"}
            for n in sorted(g.nodes)
        ]
        arrows = [
            {
                "name": a[1],
                "source": a[0],
                "target": a[2],
                "type": f"{types[a][0]}.{types[a][1][1]}",
            }
            for a in sorted(g.arrows)
        ]
        return {"nodes": nodes, "arrows": arrows}

    return {
        "rules": [
            {
                "name": r.name,
                "lhs": graph_json(r.lhs, r.types),
                "interface": graph_json(r.interface, r.types),
                "rhs": graph_json(r.rhs, r.types),
            }
            for r in rules
        ]
    }


# ---------------------------------------------------------------------------
# chain-morphism view of a match (used by validation and the direct engine)


def meta_chain_for_match(
    rule: McmtRule,
    mm_match: MetaMatch,
    h: MultilevelHierarchy,
    stack: Sequence[ModelNode],
) -> Tuple[GraphChain, ChainMorphism]:
    """Realize a MetaMatch as a chain morphism META chain -> typing chain.

    Implicit constants carry no declared root type, so their typing is
    completed from the elements they are bound to.
    """
    depth = rule.depth
    graphs = [stack[0].graph.renamed(f"{rule.name}@0")]
    for lvl in range(1, depth + 1):
        els = rule.meta_at(lvl)
        graphs.append(
            build_graph(
                f"{rule.name}@{lvl}",
                [e.name for e in els if e.kind == NODE],
                [(e.source, e.name, e.target) for e in els if e.kind == ARROW],
            )
        )

    def bound(lvl: int, name: str) -> ElementKey:
        return mm_match.binding(lvl)[name] if lvl > 0 else name

    typings: Dict[Tuple[int, int], PartialMorphism] = {}
    for j in range(1, depth + 1):
        for i in range(j):
            node_map: Dict[str, str] = {}
            arrow_map: Dict[Arrow, Arrow] = {}
            for el in rule.meta_at(j):
                tt = transitive_type_at(
                    h,
                    stack[mm_match.f(j)].name,
                    mm_match.binding(j)[el.name],
                    mm_match.f(i),
                )
                if tt is None:
                    continue
                # name the type element inside the META graph at level i
                if i == 0:
                    image = tt
                else:
                    named = [
                        e.name
                        for e in rule.meta_at(i)
                        if mm_match.binding(i).get(e.name) == tt
                        and e.kind == el.kind
                    ]
                    if not named:
                        continue
                    image_el = rule.meta_element(named[0], i)
                    image = (
                        image_el.name
                        if image_el.kind == NODE
                        else (image_el.source, image_el.name, image_el.target)
                    )
                key = (
                    el.name if el.kind == NODE else (el.source, el.name, el.target)
                )
                if el.kind == NODE:
                    node_map[key] = image
                else:
                    arrow_map[key] = image
            typings[(j, i)] = PartialMorphism(
                graphs[j], graphs[i], node_map, arrow_map
            )
    meta_chain = build_chain(graphs, typings)

    tg_graphs = [m.graph.renamed(m.name) for m in stack]
    tg_typings: Dict[Tuple[int, int], PartialMorphism] = {}
    for j in range(1, len(stack)):
        for i in range(j):
            node_map, arrow_map = {}, {}
            for n in tg_graphs[j].nodes:
                t = transitive_type_at(h, stack[j].name, n, i)
                if t is not None:
                    node_map[n] = t
            for a in tg_graphs[j].arrows:
                t = transitive_type_at(h, stack[j].name, a, i)
                if t is not None:
                    arrow_map[a] = t
            tg_typings[(j, i)] = PartialMorphism(
                tg_graphs[j], tg_graphs[i], node_map, arrow_map
            )
    tg_chain = build_chain(tg_graphs, tg_typings)

    components = {}
    for lvl in range(depth + 1):
        g = meta_chain.graph_at(lvl)
        tg = tg_chain.graph_at(mm_match.f(lvl))
        node_map = {n: bound(lvl, n) for n in g.nodes}
        arrow_map = {a: a if lvl == 0 else bound(lvl, a[1]) for a in g.arrows}
        components[lvl] = TotalMorphism(g, tg, node_map, arrow_map)
    cm = ChainMorphism(
        meta_chain, tg_chain, dict(mm_match.level_map), components
    )
    return meta_chain, cm
