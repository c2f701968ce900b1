"""Typed entity vocabulary, facts, world state, and the sampling lexicon.

The world is a single lab room.  Entities are opaque named tokens; there is
no chemistry here beyond the type system.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, NamedTuple

from .errors import LexiconTooSmall, UnknownSchemaType


class EntityKind(str, Enum):
    MATERIAL = "material"
    MIXTURE = "mixture"
    OPERATION = "operation"
    DESCRIPTOR = "descriptor"
    MATERIAL_DESCRIPTOR = "material-descriptor"
    OPERATION_DESCRIPTOR = "operation-descriptor"
    APPARATUS = "apparatus"
    APPARATUS_DESCRIPTOR = "apparatus-descriptor"
    PLAYER = "player"


DESCRIPTOR_KINDS = frozenset(
    {
        EntityKind.DESCRIPTOR,
        EntityKind.MATERIAL_DESCRIPTOR,
        EntityKind.OPERATION_DESCRIPTOR,
        EntityKind.APPARATUS_DESCRIPTOR,
    }
)

# Kinds a sampler may place in a start roster.  Mixtures only ever come out
# of operations and the player is added by the world state itself.
SAMPLABLE_KINDS = frozenset(
    {
        EntityKind.MATERIAL,
        EntityKind.OPERATION,
        EntityKind.DESCRIPTOR,
        EntityKind.MATERIAL_DESCRIPTOR,
        EntityKind.OPERATION_DESCRIPTOR,
        EntityKind.APPARATUS,
        EntityKind.APPARATUS_DESCRIPTOR,
    }
)

ID_PREFIXES = {
    EntityKind.MATERIAL: "m",
    EntityKind.MIXTURE: "mx",
    EntityKind.OPERATION: "op",
    EntityKind.DESCRIPTOR: "d",
    EntityKind.MATERIAL_DESCRIPTOR: "md",
    EntityKind.OPERATION_DESCRIPTOR: "od",
    EntityKind.APPARATUS: "sa",
    EntityKind.APPARATUS_DESCRIPTOR: "ad",
    EntityKind.PLAYER: "player",
}

ID_PATTERN = re.compile(r"^[a-z]+-[0-9]+$")

PLAYER_ID = "player-1"


class Entity(NamedTuple):
    id: str
    kind: EntityKind
    display_name: str
    implicit: bool = False


class RelationKind(str, Enum):
    INPUT = "input"
    OUTPUT = "output"
    DESCRIBES = "describes"
    LOCATED = "located"
    HOLDS = "holds"
    IN_ROOM = "in-room"
    CONSUMED = "consumed"
    OP_RUN = "op-run"
    OBTAINED = "obtained"


# head-kind / tail-kind compatibility per relation.  A tail entry of None
# marks the relation as unary.
_ANY_OBJECT = frozenset(EntityKind) - {EntityKind.PLAYER}
_LOCATABLE = frozenset({EntityKind.MATERIAL, EntityKind.MIXTURE, EntityKind.OPERATION})

RELATION_SIGNATURES: dict[RelationKind, tuple[frozenset[EntityKind], frozenset[EntityKind] | None]] = {
    RelationKind.INPUT: (
        frozenset({EntityKind.MATERIAL, EntityKind.MIXTURE}),
        frozenset({EntityKind.OPERATION}),
    ),
    RelationKind.OUTPUT: (
        frozenset({EntityKind.OPERATION}),
        frozenset({EntityKind.MIXTURE}),
    ),
    RelationKind.DESCRIBES: (DESCRIPTOR_KINDS, _ANY_OBJECT),
    RelationKind.LOCATED: (_LOCATABLE, frozenset({EntityKind.APPARATUS})),
    RelationKind.HOLDS: (frozenset({EntityKind.PLAYER}), _ANY_OBJECT),
    RelationKind.IN_ROOM: (_ANY_OBJECT, None),
    RelationKind.CONSUMED: (_ANY_OBJECT, None),
    RelationKind.OP_RUN: (frozenset({EntityKind.OPERATION}), None),
    RelationKind.OBTAINED: (frozenset({EntityKind.MIXTURE}), None),
}

# Allowed targets per descriptor sub-kind (what a descriptor may describe).
DESCRIBE_TARGETS: dict[EntityKind, frozenset[EntityKind]] = {
    EntityKind.DESCRIPTOR: frozenset(
        {EntityKind.MATERIAL, EntityKind.MIXTURE, EntityKind.OPERATION, EntityKind.APPARATUS}
    ),
    EntityKind.MATERIAL_DESCRIPTOR: frozenset({EntityKind.MATERIAL, EntityKind.MIXTURE}),
    EntityKind.OPERATION_DESCRIPTOR: frozenset({EntityKind.OPERATION}),
    EntityKind.APPARATUS_DESCRIPTOR: frozenset({EntityKind.APPARATUS}),
}

LOCATION_RELATIONS = frozenset(
    {RelationKind.IN_ROOM, RelationKind.HOLDS, RelationKind.LOCATED}
)


class Fact(NamedTuple):
    relation: RelationKind
    head: str
    tail: str | None = None

    def as_triple(self) -> list[str | None]:
        return [self.relation.value, self.head, self.tail]


class Validity(NamedTuple):
    ok: bool
    error: str | None = None
    detail: str = ""


UNKNOWN_ENTITY = "unknown-entity"
ARITY_MISMATCH = "arity-mismatch"
KIND_MISMATCH = "kind-mismatch"


def validate_fact(fact: Fact, roster: dict[str, Entity]) -> Validity:
    """Check arity and kind compatibility of a fact against a roster."""
    head_kinds, tail_kinds = RELATION_SIGNATURES[fact.relation]
    binary = tail_kinds is not None
    if binary != (fact.tail is not None):
        return Validity(False, ARITY_MISMATCH, f"{fact.relation.value} arity")
    head = roster.get(fact.head)
    if head is None:
        return Validity(False, UNKNOWN_ENTITY, fact.head)
    if head.kind not in head_kinds:
        return Validity(False, KIND_MISMATCH, f"{fact.head} is {head.kind.value}")
    if binary:
        tail = roster.get(fact.tail)  # type: ignore[arg-type]
        if tail is None:
            return Validity(False, UNKNOWN_ENTITY, str(fact.tail))
        if tail.kind not in tail_kinds:
            return Validity(False, KIND_MISMATCH, f"{fact.tail} is {tail.kind.value}")
        if fact.relation is RelationKind.DESCRIBES:
            if tail.kind not in DESCRIBE_TARGETS[head.kind]:
                return Validity(
                    False, KIND_MISMATCH, f"{head.kind.value} cannot describe {tail.kind.value}"
                )
    return Validity(True)


@dataclass
class WorldState:
    """A set of facts over a roster of entities.

    Mutated only through the rules engine (single writer); everything else
    treats instances as values.
    """

    entities: dict[str, Entity] = field(default_factory=dict)
    facts: set[Fact] = field(default_factory=set)

    @classmethod
    def initial(cls, entities: Iterable[Entity]) -> "WorldState":
        """Room state: the player plus every entity placed in the room."""
        state = cls()
        state.add_entity(Entity(PLAYER_ID, EntityKind.PLAYER, "you"))
        for entity in entities:
            state.add_entity(entity)
            state.facts.add(Fact(RelationKind.IN_ROOM, entity.id))
        return state

    def copy(self) -> "WorldState":
        return WorldState(dict(self.entities), set(self.facts))

    def add_entity(self, entity: Entity) -> None:
        if entity.id in self.entities:
            raise ValueError(f"duplicate entity id {entity.id}")
        if not ID_PATTERN.match(entity.id):
            raise ValueError(f"bad entity id {entity.id}")
        self.entities[entity.id] = entity

    def has(self, relation: RelationKind, head: str, tail: str | None = None) -> bool:
        return Fact(relation, head, tail) in self.facts

    def consumed(self, entity_id: str) -> bool:
        return Fact(RelationKind.CONSUMED, entity_id) in self.facts

    def op_run(self, op_id: str) -> bool:
        return Fact(RelationKind.OP_RUN, op_id) in self.facts

    def location_fact(self, entity_id: str) -> Fact | None:
        for fact in self.facts:
            if fact.relation in LOCATION_RELATIONS:
                subject = fact.tail if fact.relation is RelationKind.HOLDS else fact.head
                if subject == entity_id:
                    return fact
        return None

    def inputs_of(self, op_id: str) -> list[str]:
        return sorted(
            f.head for f in self.facts if f.relation is RelationKind.INPUT and f.tail == op_id
        )

    def output_of(self, op_id: str) -> str | None:
        for fact in self.facts:
            if fact.relation is RelationKind.OUTPUT and fact.head == op_id:
                return fact.tail
        return None

    def pending_input_target(self, entity_id: str) -> str | None:
        """Operation this entity is committed to and which has not yet run."""
        for fact in self.facts:
            if (
                fact.relation is RelationKind.INPUT
                and fact.head == entity_id
                and not self.op_run(fact.tail)  # type: ignore[arg-type]
            ):
                return fact.tail
        return None

    def ids_of_kind(self, kind: EntityKind) -> list[str]:
        return sorted(e.id for e in self.entities.values() if e.kind is kind)

    def object_ids(self) -> list[str]:
        """All entity ids except the player, sorted."""
        return sorted(e.id for e in self.entities.values() if e.kind is not EntityKind.PLAYER)


def audit_state(state: WorldState) -> list[str]:
    """Return invariant violations (empty when the state is sound).

    Run by tests after every mutation; cheap enough for debug use.
    """
    problems: list[str] = []
    players = [e for e in state.entities.values() if e.kind is EntityKind.PLAYER]
    if len(players) != 1:
        problems.append(f"expected exactly one player, found {len(players)}")
    for fact in state.facts:
        verdict = validate_fact(fact, state.entities)
        if not verdict.ok:
            problems.append(f"invalid fact {fact}: {verdict.error} ({verdict.detail})")
    for entity in state.entities.values():
        if entity.kind is EntityKind.PLAYER:
            continue
        locations = [
            f
            for f in state.facts
            if f.relation in LOCATION_RELATIONS
            and (f.tail if f.relation is RelationKind.HOLDS else f.head) == entity.id
        ]
        if len(locations) != 1:
            problems.append(f"{entity.id} has {len(locations)} location facts")
        if entity.kind is EntityKind.MIXTURE:
            producers = [
                f
                for f in state.facts
                if f.relation is RelationKind.OUTPUT and f.tail == entity.id
            ]
            if len(producers) != 1:
                problems.append(f"mixture {entity.id} has {len(producers)} producers")
            if not entity.implicit:
                problems.append(f"mixture {entity.id} is not marked implicit")
        elif entity.implicit:
            problems.append(f"{entity.id} is implicit but not a mixture")
    for fact in state.facts:
        if fact.relation is RelationKind.CONSUMED:
            pending = state.pending_input_target(fact.head)
            if pending is not None:
                problems.append(f"{fact.head} is consumed but still pending for {pending}")
        elif fact.relation is RelationKind.OUTPUT and not state.op_run(fact.head):
            problems.append(f"{fact.head} has output but never ran")
    return problems


# ---------------------------------------------------------------------------
# Lexicon


LEXICON_KIND_NAMES = {
    "material": EntityKind.MATERIAL,
    "operation": EntityKind.OPERATION,
    "descriptor": EntityKind.DESCRIPTOR,
    "material-descriptor": EntityKind.MATERIAL_DESCRIPTOR,
    "operation-descriptor": EntityKind.OPERATION_DESCRIPTOR,
    "apparatus": EntityKind.APPARATUS,
    "apparatus-descriptor": EntityKind.APPARATUS_DESCRIPTOR,
}


@dataclass(frozen=True)
class Lexicon:
    """Display-name pools for sampling synthetic rosters."""

    names: dict[EntityKind, tuple[str, ...]]

    def __post_init__(self):
        for kind in SAMPLABLE_KINDS:
            pool = self.names.get(kind, ())
            if not pool:
                raise ValueError(f"lexicon has no names for kind {kind.value}")
            if len(set(pool)) != len(pool):
                raise ValueError(f"duplicate names within kind {kind.value}")

    def pool(self, kind: EntityKind) -> tuple[str, ...]:
        return self.names[kind]

    @classmethod
    def from_file(cls, path: str | Path) -> "Lexicon":
        """Parse a `kind<TAB>name` table, one entry per line."""
        names: dict[EntityKind, list[str]] = {k: [] for k in SAMPLABLE_KINDS}
        for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                kind_name, name = line.split("\t")
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected kind<TAB>name") from None
            kind = LEXICON_KIND_NAMES.get(kind_name.strip())
            if kind is None:
                raise ValueError(f"{path}:{lineno}: unknown kind {kind_name!r}")
            names[kind].append(name.strip())
        return cls({k: tuple(v) for k, v in names.items()})


DEFAULT_LEXICON = Lexicon(
    {
        EntityKind.MATERIAL: (
            "NaCl",
            "H2O",
            "KOH",
            "TiO2",
            "ZnO",
            "ethanol",
            "acetone",
            "urea",
            "glycerol",
            "CuSO4",
            "NaOH",
            "graphite",
        ),
        EntityKind.OPERATION: (
            "mix",
            "heat",
            "stir",
            "grind",
            "dry",
            "calcine",
            "sinter",
            "dissolve",
            "anneal",
            "wash",
        ),
        EntityKind.DESCRIPTOR: ("pure", "fresh", "coarse", "white", "labeled", "sealed"),
        EntityKind.MATERIAL_DESCRIPTOR: (
            "powdered",
            "anhydrous",
            "aqueous",
            "granular",
            "crystalline",
            "deionized",
        ),
        EntityKind.OPERATION_DESCRIPTOR: (
            "slowly",
            "gently",
            "thoroughly",
            "overnight",
            "briefly",
            "vigorously",
        ),
        EntityKind.APPARATUS: (
            "crucible",
            "furnace",
            "beaker",
            "autoclave",
            "mortar",
            "flask",
        ),
        EntityKind.APPARATUS_DESCRIPTOR: (
            "ceramic",
            "alumina",
            "quartz",
            "steel",
            "borosilicate",
            "chilled",
        ),
    }
)


# Difficulty level -> (materials, operations, descriptors, apparatus).
LEVEL_TABLE: dict[int, tuple[int, int, int, int]] = {
    1: (2, 1, 1, 0),
    2: (3, 1, 2, 0),
    3: (3, 2, 3, 1),
    4: (4, 3, 4, 1),
    5: (6, 4, 5, 2),
}

LEVELS = tuple(sorted(LEVEL_TABLE))


def sample_entities(
    level: int, rng: random.Random, lexicon: Lexicon = DEFAULT_LEXICON
) -> list[Entity]:
    """Sample a start roster for a difficulty level.

    Ids are assigned deterministically from the rng draw order; descriptor
    sub-kinds are drawn uniformly among those compatible with the roster.
    """
    if level not in LEVEL_TABLE:
        raise ValueError(f"level must be one of {sorted(LEVEL_TABLE)}, got {level}")
    n_materials, n_operations, n_descriptors, n_apparatus = LEVEL_TABLE[level]

    def draw(kind: EntityKind, count: int) -> list[str]:
        pool = lexicon.pool(kind)
        if count > len(pool):
            raise LexiconTooSmall(
                f"need {count} names of kind {kind.value}, lexicon has {len(pool)}"
            )
        return rng.sample(pool, count)

    roster: list[Entity] = []
    counters: dict[str, int] = {}

    def new_entity(kind: EntityKind, name: str) -> None:
        prefix = ID_PREFIXES[kind]
        counters[prefix] = counters.get(prefix, 0) + 1
        roster.append(Entity(f"{prefix}-{counters[prefix]}", kind, name))

    for name in draw(EntityKind.MATERIAL, n_materials):
        new_entity(EntityKind.MATERIAL, name)
    for name in draw(EntityKind.OPERATION, n_operations):
        new_entity(EntityKind.OPERATION, name)

    descriptor_kinds = [
        EntityKind.DESCRIPTOR,
        EntityKind.MATERIAL_DESCRIPTOR,
        EntityKind.OPERATION_DESCRIPTOR,
    ]
    if n_apparatus > 0:
        descriptor_kinds.append(EntityKind.APPARATUS_DESCRIPTOR)
    picked: dict[EntityKind, list[str]] = {k: [] for k in descriptor_kinds}
    for _ in range(n_descriptors):
        kind = rng.choice(descriptor_kinds)
        pool = [n for n in lexicon.pool(kind) if n not in picked[kind]]
        if not pool:
            raise LexiconTooSmall(f"ran out of {kind.value} names")
        name = rng.choice(pool)
        picked[kind].append(name)
        new_entity(kind, name)

    for name in draw(EntityKind.APPARATUS, n_apparatus):
        new_entity(EntityKind.APPARATUS, name)
    return roster


# ---------------------------------------------------------------------------
# Annotation schema mapping

# Entity types of the public synthesis annotation schema -> engine kinds.
# Nonrecipe-Material is deliberately dropped (None): not part of a synthesis.
SCHEMA_ENTITY_KINDS: dict[str, EntityKind | None] = {
    "Material": EntityKind.MATERIAL,
    "Number": EntityKind.DESCRIPTOR,
    "Operation": EntityKind.OPERATION,
    "Amount-Unit": EntityKind.DESCRIPTOR,
    "Condition-Unit": EntityKind.OPERATION_DESCRIPTOR,
    "Material-Descriptor": EntityKind.MATERIAL_DESCRIPTOR,
    "Condition-Misc": EntityKind.OPERATION_DESCRIPTOR,
    "Synthesis-Apparatus": EntityKind.APPARATUS,
    "Nonrecipe-Material": None,
    "Brand": EntityKind.DESCRIPTOR,
    "Apparatus-Descriptor": EntityKind.APPARATUS_DESCRIPTOR,
}


def schema_entity_kind(schema_type: str) -> EntityKind | None:
    """Map an annotation entity type to an engine kind (None = dropped)."""
    try:
        return SCHEMA_ENTITY_KINDS[schema_type]
    except KeyError:
        raise UnknownSchemaType(schema_type) from None
