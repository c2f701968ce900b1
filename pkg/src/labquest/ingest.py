"""Turning external data into games: annotated documents and raw text.

Annotated documents use this repo's `tl-annot/1` JSON schema over the public
synthesis annotation types.  Chaining between operations is modeled
explicitly: each operation's implicit result mixture is routed as an input
to its successor, replacing next-operation links.  Raw text goes through a
gazetteer tagger (longest match, left to right) standing in for a trained
NER model.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import NamedTuple

from .env import DEFAULT_EPISODE_CAP, Game
from .errors import (
    ConversionError,
    CyclicOperationOrder,
    InsufficientEntities,
    SchemaViolation,
    UnmappableRelation,
)
from .quests import goal_of
from .rules import GroundedAction, Verb, mixture_id_for
from .surface import realize_instructions
from .world import (
    DEFAULT_LEXICON,
    ID_PREFIXES,
    Entity,
    EntityKind,
    Lexicon,
    WorldState,
    schema_entity_kind,
)

ANNOT_FORMAT = "tl-annot/1"

# Annotation relation types with an action mapping.  Next-Operation carries
# ordering only; the published mapping has no other relation rows.
RELATION_ACTIONS = {
    "Participant-Material": Verb.INPUT_ASSIGN,
    "Apparatus-of": Verb.LOCATE,
    "Recipe-Target": Verb.OBTAIN,
    "Descriptor-of": Verb.LINK_DESCRIPTOR,
}
ORDERING_RELATION = "Next-Operation"


class Span(NamedTuple):
    start: int
    end: int


@dataclass
class AnnotatedEntity:
    id: str
    span: Span
    schema_type: str


@dataclass
class AnnotatedRelation:
    schema_type: str
    head: str
    tail: str | None


@dataclass
class AnnotatedDoc:
    text: str
    entities: list[AnnotatedEntity]
    relations: list[AnnotatedRelation]
    operation_order: list[str] = field(default_factory=list)
    id: str = "annotated-1"

    def validate(self) -> None:
        ids = set()
        for entity in self.entities:
            if entity.id in ids:
                raise SchemaViolation(f"$.entities.{entity.id}", "duplicate entity id")
            ids.add(entity.id)
            if not (0 <= entity.span.start <= entity.span.end <= len(self.text)):
                raise SchemaViolation(f"$.entities.{entity.id}", "span out of bounds")
        for index, relation in enumerate(self.relations):
            for endpoint in (relation.head, relation.tail):
                if endpoint is not None and endpoint not in ids:
                    raise SchemaViolation(
                        f"$.relations[{index}]", f"unknown endpoint {endpoint!r}"
                    )
        for op_id in self.operation_order:
            if op_id not in ids:
                raise SchemaViolation("$.operation_order", f"unknown entity {op_id!r}")


def doc_from_json(text: str) -> AnnotatedDoc:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation("$", f"not valid JSON: {exc}") from None
    if not isinstance(raw, dict) or raw.get("format") != ANNOT_FORMAT:
        raise SchemaViolation("$.format", f"expected {ANNOT_FORMAT!r}")
    try:
        entities = [
            AnnotatedEntity(e["id"], Span(int(e["start"]), int(e["end"])), e["type"])
            for e in raw["entities"]
        ]
        relations = [
            AnnotatedRelation(r["type"], r["head"], r.get("tail")) for r in raw["relations"]
        ]
        doc = AnnotatedDoc(
            text=raw["text"],
            entities=entities,
            relations=relations,
            operation_order=list(raw.get("operation_order", [])),
            id=raw.get("id", "annotated-1"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation("$", f"malformed document: {exc}") from None
    doc.validate()
    return doc


def _derive_order(doc: AnnotatedDoc, operations: list[str]) -> list[str]:
    """Topological order from Next-Operation links; explicit order preferred.

    Public next-operation annotations are unreliable, so conversion refuses
    to guess beyond what the document states.
    """
    if doc.operation_order:
        if set(doc.operation_order) != set(operations) or len(doc.operation_order) != len(
            operations
        ):
            raise ConversionError("operation_order must list every operation exactly once")
        return list(doc.operation_order)
    edges = [(r.head, r.tail) for r in doc.relations if r.schema_type == ORDERING_RELATION]
    if not edges and len(operations) > 1:
        raise ConversionError(
            "multiple operations but no operation_order and no Next-Operation links"
        )
    order: list[str] = []
    pending = {op: {src for src, dst in edges if dst == op} for op in operations}
    while pending:
        ready = sorted(op for op, deps in pending.items() if not deps)
        if not ready:
            raise CyclicOperationOrder("Next-Operation links form a cycle")
        op = ready[0]
        del pending[op]
        order.append(op)
        for deps in pending.values():
            deps.discard(op)
    return order


def convert_annotated(doc: AnnotatedDoc) -> Game:
    """Build a game from an annotated document.

    The start state is one room holding every mapped entity; relations
    become actions; the operations chain through their implicit result
    mixtures in document order; the final product entity, when annotated,
    is absorbed into its operation's implicit output.
    """
    game, _ = convert_annotated_with_warnings(doc)
    return game


def convert_annotated_with_warnings(doc: AnnotatedDoc) -> tuple[Game, int]:
    """convert_annotated plus the count of relations discarded over drops."""
    doc.validate()
    kind_by_ann: dict[str, EntityKind] = {}
    dropped: set[str] = set()
    for entity in doc.entities:
        kind = schema_entity_kind(entity.schema_type)
        if kind is None:
            dropped.add(entity.id)
        else:
            kind_by_ann[entity.id] = kind

    # Product mentions (Recipe-Target tails) exist in the text but not in the
    # world: the operation's implicit mixture stands in for them.
    for relation in doc.relations:
        if relation.schema_type == "Recipe-Target" and relation.tail is not None:
            dropped.add(relation.tail)
            kind_by_ann.pop(relation.tail, None)

    counters: dict[str, int] = {}
    internal: dict[str, Entity] = {}
    for entity in doc.entities:
        kind = kind_by_ann.get(entity.id)
        if kind is None:
            continue
        prefix = ID_PREFIXES[kind]
        counters[prefix] = counters.get(prefix, 0) + 1
        name = doc.text[entity.span.start : entity.span.end]
        internal[entity.id] = Entity(f"{prefix}-{counters[prefix]}", kind, name)

    operations = [e.id for e in doc.entities if kind_by_ann.get(e.id) is EntityKind.OPERATION]
    if not operations:
        raise ConversionError("document annotates no operations")
    order = _derive_order(doc, operations)

    inputs: dict[str, list[str]] = {op: [] for op in operations}
    locations: dict[str, list[str]] = {}  # located entity -> apparatus list
    links: dict[str, list[str]] = {}  # target -> descriptor list
    obtain_ops: list[str] = []
    warnings = 0
    for relation in doc.relations:
        if relation.schema_type == ORDERING_RELATION:
            continue
        verb = RELATION_ACTIONS.get(relation.schema_type)
        if verb is None:
            raise UnmappableRelation(relation.schema_type)
        if verb is Verb.OBTAIN:
            if relation.head in dropped:
                warnings += 1
                continue
            obtain_ops.append(relation.head)
            continue
        if relation.head in dropped or relation.tail in dropped:
            warnings += 1
            continue
        assert relation.tail is not None
        if verb is Verb.INPUT_ASSIGN:
            if relation.tail not in inputs:
                raise ConversionError(
                    f"Participant-Material tail {relation.tail!r} is not an operation"
                )
            inputs[relation.tail].append(relation.head)
        elif verb is Verb.LOCATE:
            locations.setdefault(relation.head, []).append(relation.tail)
        elif verb is Verb.LINK_DESCRIPTOR:
            links.setdefault(relation.tail, []).append(relation.head)

    actions: list[GroundedAction] = []

    def emit_links(ann_id: str) -> None:
        for descriptor in links.pop(ann_id, []):
            actions.append(
                GroundedAction(Verb.LINK_DESCRIPTOR, internal[descriptor].id, internal[ann_id].id)
            )

    def emit_locates(ann_id: str) -> None:
        for apparatus in locations.pop(ann_id, []):
            emit_links(apparatus)
            actions.append(
                GroundedAction(Verb.LOCATE, internal[ann_id].id, internal[apparatus].id)
            )

    previous: str | None = None
    for op_ann in order:
        op = internal[op_ann]
        emit_links(op_ann)
        for material_ann in inputs[op_ann]:
            emit_links(material_ann)
            emit_locates(material_ann)
            actions.append(
                GroundedAction(Verb.INPUT_ASSIGN, internal[material_ann].id, op.id)
            )
        if previous is not None:
            actions.append(GroundedAction(Verb.INPUT_ASSIGN, mixture_id_for(previous), op.id))
        emit_locates(op_ann)
        actions.append(GroundedAction(Verb.RUN_OP, op.id))
        previous = op.id
    for remaining in sorted(locations):
        emit_locates(remaining)
    for remaining in sorted(links):
        emit_links(remaining)
    if not obtain_ops:
        obtain_ops = [order[-1]]
    for op_ann in dict.fromkeys(obtain_ops):
        actions.append(GroundedAction(Verb.OBTAIN, internal[op_ann].id))

    s0 = WorldState.initial(internal.values())
    try:
        goal = goal_of(s0, actions)
    except Exception as exc:
        raise ConversionError(f"derived action sequence does not replay: {exc}") from exc

    game = Game(
        id=doc.id,
        s0=s0,
        surface=doc.text,
        instructions=realize_instructions(goal, s0.entities),
        goal=goal,
        reference_k=actions,
        level=0,
        seed=0,
        episode_cap=max(DEFAULT_EPISODE_CAP, len(actions)),
    )
    return game, warnings


# ---------------------------------------------------------------------------
# Gazetteer tagging


_TOKEN = re.compile(r"[A-Za-z0-9]+")


class TaggedEntity(NamedTuple):
    entity: Entity
    start: int
    end: int


@dataclass
class Gazetteer:
    """Per-kind term lists matched longest-first, left to right."""

    terms: dict[EntityKind, tuple[str, ...]]

    def __post_init__(self):
        seen: dict[str, EntityKind] = {}
        self._index: dict[str, list[tuple[tuple[str, ...], EntityKind, str]]] = {}
        for kind, names in self.terms.items():
            for name in names:
                tokens = tuple(t.lower() for t in _TOKEN.findall(name))
                if not tokens:
                    raise ValueError(f"unmatchable gazetteer term {name!r}")
                normalized = " ".join(tokens)
                if normalized in seen:
                    raise ValueError(
                        f"term {name!r} appears under both {seen[normalized].value} "
                        f"and {kind.value}"
                    )
                seen[normalized] = kind
                self._index.setdefault(tokens[0], []).append((tokens, kind, name))
        for candidates in self._index.values():
            candidates.sort(key=lambda item: len(item[0]), reverse=True)

    @classmethod
    def from_lexicon(cls, lexicon: Lexicon = DEFAULT_LEXICON) -> "Gazetteer":
        return cls({kind: tuple(names) for kind, names in lexicon.names.items()})

    def tag(self, text: str) -> list[TaggedEntity]:
        """Longest-match, non-overlapping tagging; each match is an entity."""
        words = [(m.group(0).lower(), m.start(), m.end()) for m in _TOKEN.finditer(text)]
        counters: dict[str, int] = {}
        tagged: list[TaggedEntity] = []
        position = 0
        while position < len(words):
            token, start, _ = words[position]
            match = None
            for tokens, kind, name in self._index.get(token, []):
                window = words[position : position + len(tokens)]
                if len(window) == len(tokens) and all(
                    w[0] == t for w, t in zip(window, tokens)
                ):
                    match = (tokens, kind, name, window[-1][2])
                    break
            if match is None:
                position += 1
                continue
            tokens, kind, name, end = match
            prefix = ID_PREFIXES[kind]
            counters[prefix] = counters.get(prefix, 0) + 1
            tagged.append(
                TaggedEntity(Entity(f"{prefix}-{counters[prefix]}", kind, name), start, end)
            )
            position += len(tokens)
        return tagged


def tag_entities(text: str, gazetteer: Gazetteer | None = None) -> list[TaggedEntity]:
    gazetteer = gazetteer or Gazetteer.from_lexicon()
    return gazetteer.tag(text)


def game_from_text(
    text: str, gazetteer: Gazetteer | None = None, game_id: str = "wild-1"
) -> Game:
    """Mode-(iii) game: tagged roster, no goal, no reward.

    Whatever action sequence an agent emits on this game is its extracted
    action graph; scoring needs annotations this game does not have.
    """
    matches = tag_entities(text, gazetteer)
    roster: list[Entity] = []
    seen: set[tuple[EntityKind, str]] = set()
    for match in matches:
        key = (match.entity.kind, match.entity.display_name)
        if key in seen:
            continue
        seen.add(key)
        roster.append(match.entity)
    # Repeated mentions collapse, so reassign ids densely per kind.
    counters: dict[str, int] = {}
    dense: list[Entity] = []
    for entity in roster:
        prefix = ID_PREFIXES[entity.kind]
        counters[prefix] = counters.get(prefix, 0) + 1
        dense.append(Entity(f"{prefix}-{counters[prefix]}", entity.kind, entity.display_name))
    kinds = {e.kind for e in dense}
    if EntityKind.OPERATION not in kinds or EntityKind.MATERIAL not in kinds:
        raise InsufficientEntities(
            "text must mention at least one operation and one material"
        )
    return Game(
        id=game_id,
        s0=WorldState.initial(dense),
        surface=text,
        instructions=realize_instructions(frozenset(), {}),
        goal=frozenset(),
        reference_k=[],
        level=0,
        seed=0,
    )
