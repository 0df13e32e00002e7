"""Exemplary-logical-form enumeration: exhaustive search of the KB
neighborhood of linked entities and literals up to two hops, converted
to s-expressions.

Only JOIN/AND chains are enumerated (no counting, comparatives, or
superlatives); a class constraint may wrap each form at the outermost
level. Every emitted form has a non-empty denotation by construction,
and the output is deduplicated by canonical print and ordered by
(relation count, canonical print) before the candidate cap applies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .executor import _eval_set, evaluate
from .sexpr import (And, ClassRef, EntityRef, Join, LiteralRef, LogicalForm,
                    Reverse, print_canonical, relation_count)
from .store import LiteralValue, TripleStore


@dataclass(frozen=True)
class StartPoint:
    kind: str  # "entity" | "literal"
    value: Union[str, LiteralValue]

    @staticmethod
    def entity(entity_id: str) -> "StartPoint":
        return StartPoint("entity", entity_id)

    @staticmethod
    def literal(value: LiteralValue) -> "StartPoint":
        return StartPoint("literal", value)

    def ref(self) -> LogicalForm:
        if self.kind == "entity":
            return EntityRef(self.value)
        return LiteralRef(self.value)


@dataclass(frozen=True)
class EnumConfig:
    hop_limit: int = 2
    include_class_constraint: bool = True
    max_candidates: int = 2000

    def __post_init__(self):
        if self.hop_limit not in (1, 2):
            raise ValueError("hop_limit must be 1 or 2")
        if self.max_candidates < 0:
            raise ValueError("max_candidates must be non-negative")


def _one_hop(start: StartPoint, store: TripleStore) -> list[LogicalForm]:
    """JOIN forms reaching a new variable from the start, both
    orientations, built from edges that actually exist."""
    anchor = start.ref()
    forms: list[LogicalForm] = []
    for relation, _subject in store.neighbors_in(start.value):
        forms.append(Join(relation, anchor))
    if start.kind == "entity":
        for relation, _obj in store.neighbors_out(start.value):
            forms.append(Join(Reverse(relation), anchor))
    return forms


def _extensions(base: LogicalForm, members, store: TripleStore) -> list[LogicalForm]:
    in_rels: set[str] = set()
    out_rels: set[str] = set()
    for member in members:
        for relation, _subject in store.neighbors_in(member):
            in_rels.add(relation)
        if isinstance(member, str):
            for relation, _obj in store.neighbors_out(member):
                out_rels.add(relation)
    forms: list[LogicalForm] = [Join(r, base) for r in sorted(in_rels)]
    forms.extend(Join(Reverse(r), base) for r in sorted(out_rels))
    return forms


def _class_wraps(form: LogicalForm, members, store: TripleStore) -> list[LogicalForm]:
    classes = set()
    for member in members:
        if isinstance(member, str):
            for relation, obj in store.neighbors_out(member, store.type_relation):
                if isinstance(obj, str):
                    classes.add(obj)
    return [And(ClassRef(c), form) for c in sorted(classes)]


def enumerate_elfs(starts: list[StartPoint], store: TripleStore,
                   cfg: EnumConfig = EnumConfig()) -> list[LogicalForm]:
    """Index-driven neighborhood walk; see the module docstring for the
    output contract."""
    collected: dict[str, LogicalForm] = {}

    def keep(form: LogicalForm, members) -> None:
        if not members:
            return
        key = print_canonical(form)
        if key not in collected:
            collected[key] = form

    for start in dict.fromkeys(starts):
        hop1 = _one_hop(start, store)
        hop1_members = []
        for form in hop1:
            members = _eval_set(form, store)
            hop1_members.append(members)
            keep(form, members)
            if cfg.include_class_constraint:
                for wrapped in _class_wraps(form, members, store):
                    keep(wrapped, _eval_set(wrapped, store))
        if cfg.hop_limit < 2:
            continue
        for form, members in zip(hop1, hop1_members):
            if not members:
                continue
            for extended in _extensions(form, members, store):
                ext_members = _eval_set(extended, store)
                keep(extended, ext_members)
                if cfg.include_class_constraint:
                    for wrapped in _class_wraps(extended, ext_members, store):
                        keep(wrapped, _eval_set(wrapped, store))

    ordered = sorted(collected.values(),
                     key=lambda f: (relation_count(f), print_canonical(f)))
    return ordered[:cfg.max_candidates]


def completeness_oracle(starts: list[StartPoint], store: TripleStore,
                        cfg: EnumConfig = EnumConfig()) -> list[LogicalForm]:
    """Brute-force reference: try every relation from the catalog in
    every orientation at every hop, keep what evaluates non-empty.
    Exercised by tests against enumerate_elfs; quadratic in the catalog."""
    relations = store.relations()
    classes = store.classes()
    collected: dict[str, LogicalForm] = {}

    def keep_nonempty(form: LogicalForm) -> bool:
        answer = evaluate(form, store)
        if answer.is_empty():
            return False
        collected.setdefault(print_canonical(form), form)
        return True

    def wraps(form: LogicalForm) -> None:
        if not cfg.include_class_constraint:
            return
        for class_name in classes:
            keep_nonempty(And(ClassRef(class_name), form))

    for start in dict.fromkeys(starts):
        anchor = start.ref()
        level1 = []
        for relation in relations:
            for candidate in (Join(relation, anchor), Join(Reverse(relation), anchor)):
                if keep_nonempty(candidate):
                    level1.append(candidate)
                    wraps(candidate)
        if cfg.hop_limit < 2:
            continue
        for base in level1:
            for relation in relations:
                for candidate in (Join(relation, base), Join(Reverse(relation), base)):
                    if keep_nonempty(candidate):
                        wraps(candidate)

    ordered = sorted(collected.values(),
                     key=lambda f: (relation_count(f), print_canonical(f)))
    return ordered[:cfg.max_candidates]
