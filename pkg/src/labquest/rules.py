"""The eight action verbs as linear-logic production rules.

Pure transition functions over an explicitly passed state.  Consumption is
linear: a consumed entity can never again be an action argument (examine is
the lone exception).  run-op and link-descriptor have no inverse action;
the irreversibility is intentional, not an accident of implementation.
"""

from __future__ import annotations

import random
from enum import Enum
from typing import NamedTuple

from .errors import PreconditionViolated
from .world import (
    DESCRIBE_TARGETS,
    DESCRIPTOR_KINDS,
    Entity,
    EntityKind,
    Fact,
    PLAYER_ID,
    RelationKind,
    WorldState,
)


class Verb(str, Enum):
    TAKE = "take"
    DROP = "drop"
    EXAMINE = "examine"
    LINK_DESCRIPTOR = "link-descriptor"
    INPUT_ASSIGN = "input-assign"
    LOCATE = "locate"
    RUN_OP = "run-op"
    OBTAIN = "obtain"


# Enumeration order for the action space: unary and binary verbs interleaved
# exactly as declared above.
VERB_ORDER = tuple(Verb)

BINARY_VERBS = frozenset({Verb.LINK_DESCRIPTOR, Verb.INPUT_ASSIGN, Verb.LOCATE})
UNARY_VERBS = frozenset(v for v in Verb if v not in BINARY_VERBS)
NEUTRAL_VERBS = frozenset({Verb.TAKE, Verb.DROP, Verb.EXAMINE})


class GroundedAction(NamedTuple):
    verb: Verb
    arg1: str
    arg2: str | None = None

    def command(self) -> str:
        if self.arg2 is None:
            return f"{self.verb.value} {self.arg1}"
        return f"{self.verb.value} {self.arg1} {self.arg2}"


class Precondition(NamedTuple):
    ok: bool
    reason: str = ""


class TransitionResult(NamedTuple):
    next_state: WorldState
    created: list[Entity]
    feedback: str


def mixture_id_for(op_id: str) -> str:
    """Canonical id of the mixture an operation produces (`mx-<op index>`)."""
    return f"mx-{op_id.rsplit('-', 1)[1]}"


def producer_of(mixture_id: str) -> str:
    return f"op-{mixture_id.rsplit('-', 1)[1]}"


def _check_args(state: WorldState, action: GroundedAction) -> Precondition | None:
    """Shared argument checks: existence, arity shape, distinctness, player."""
    binary = action.verb in BINARY_VERBS
    if binary != (action.arg2 is not None):
        return Precondition(False, "arity mismatch")
    for arg in (action.arg1, action.arg2):
        if arg is None:
            continue
        entity = state.entities.get(arg)
        if entity is None:
            return Precondition(False, f"unknown entity {arg}")
        if entity.kind is EntityKind.PLAYER:
            return Precondition(False, "the player is not a valid argument")
    if binary and action.arg1 == action.arg2:
        return Precondition(False, "arguments must differ")
    return None


def preconditions_hold(state: WorldState, action: GroundedAction) -> Precondition:
    """Decide whether an action may fire; the reason names the first failure."""
    failed = _check_args(state, action)
    if failed is not None:
        return failed

    verb = action.verb
    a1 = state.entities[action.arg1]
    a2 = state.entities[action.arg2] if action.arg2 is not None else None

    if verb is Verb.EXAMINE:
        return Precondition(True)

    # Linear consumption: consumed tokens are gone for every other verb.
    if state.consumed(action.arg1) or (a2 is not None and state.consumed(a2.id)):
        return Precondition(False, "argument consumed")

    if verb is Verb.TAKE:
        if not state.has(RelationKind.IN_ROOM, a1.id):
            return Precondition(False, "not in the room")
        return Precondition(True)

    if verb is Verb.DROP:
        if not state.has(RelationKind.HOLDS, PLAYER_ID, a1.id):
            return Precondition(False, "not held")
        return Precondition(True)

    if verb is Verb.LINK_DESCRIPTOR:
        if a1.kind not in DESCRIPTOR_KINDS:
            return Precondition(False, "first argument is not a descriptor")
        assert a2 is not None
        if a2.kind not in DESCRIBE_TARGETS[a1.kind]:
            return Precondition(False, "incompatible descriptor target")
        return Precondition(True)

    if verb is Verb.INPUT_ASSIGN:
        if a1.kind not in (EntityKind.MATERIAL, EntityKind.MIXTURE):
            return Precondition(False, "first argument is not a material or mixture")
        assert a2 is not None
        if a2.kind is not EntityKind.OPERATION:
            return Precondition(False, "second argument is not an operation")
        if state.op_run(a2.id):
            return Precondition(False, "operation already run")
        if state.pending_input_target(a1.id) is not None:
            return Precondition(False, "already committed to an operation")
        return Precondition(True)

    if verb is Verb.LOCATE:
        if a1.kind not in (EntityKind.MATERIAL, EntityKind.MIXTURE, EntityKind.OPERATION):
            return Precondition(False, "first argument cannot be located")
        assert a2 is not None
        if a2.kind is not EntityKind.APPARATUS:
            return Precondition(False, "second argument is not an apparatus")
        location = state.location_fact(a1.id)
        if location is not None and location.relation is RelationKind.LOCATED:
            return Precondition(False, "already placed in an apparatus")
        return Precondition(True)

    if verb is Verb.RUN_OP:
        if a1.kind is not EntityKind.OPERATION:
            return Precondition(False, "not an operation")
        if state.op_run(a1.id):
            return Precondition(False, "operation already run")
        inputs = state.inputs_of(a1.id)
        if not inputs:
            return Precondition(False, "operation has no inputs")
        if any(state.consumed(m) for m in inputs):
            return Precondition(False, "an input was already consumed")
        return Precondition(True)

    if verb is Verb.OBTAIN:
        if a1.kind is not EntityKind.OPERATION:
            return Precondition(False, "not an operation")
        if not state.op_run(a1.id):
            return Precondition(False, "operation has not been run")
        mixture = state.output_of(a1.id)
        if mixture is None:
            return Precondition(False, "operation has no output")
        if state.has(RelationKind.OBTAINED, mixture):
            return Precondition(False, "product already obtained")
        if state.consumed(mixture):
            return Precondition(False, "product consumed")
        return Precondition(True)

    raise AssertionError(f"unhandled verb {verb}")


def _describe(state: WorldState, entity: Entity) -> str:
    bits = [f"{entity.display_name} ({entity.kind.value} {entity.id})"]
    if state.consumed(entity.id):
        bits.append("already used up")
    location = state.location_fact(entity.id)
    if location is not None and location.relation is RelationKind.LOCATED:
        apparatus = state.entities[location.tail]  # type: ignore[index]
        bits.append(f"set up in the {apparatus.display_name}")
    elif location is not None and location.relation is RelationKind.HOLDS:
        bits.append("in your hands")
    adjectives = [
        state.entities[f.head].display_name
        for f in state.facts
        if f.relation is RelationKind.DESCRIBES and f.tail == entity.id
    ]
    if adjectives:
        bits.append("noted as " + ", ".join(sorted(adjectives)))
    return ". ".join(bits) + "."


def _move(state: WorldState, entity_id: str, new_fact: Fact) -> None:
    location = state.location_fact(entity_id)
    if location is not None:
        state.facts.discard(location)
    state.facts.add(new_fact)


def apply(
    state: WorldState, action: GroundedAction, rng: random.Random | None = None
) -> TransitionResult:
    """Fire a production rule, returning the successor state.

    Only facts named in the verb's effect row change; everything else is
    copied verbatim.  The rng argument is reserved for result-entity naming
    and is currently unused: result mixtures take the canonical name derived
    from their producing operation, which the reward monitor and the graph
    equivalence check both rely on.
    """
    verdict = preconditions_hold(state, action)
    if not verdict.ok:
        raise PreconditionViolated(verdict.reason)

    nxt = state.copy()
    created: list[Entity] = []
    verb = action.verb
    a1 = nxt.entities[action.arg1]

    if verb is Verb.TAKE:
        _move(nxt, a1.id, Fact(RelationKind.HOLDS, PLAYER_ID, a1.id))
        feedback = f"You pick up the {a1.display_name}."
    elif verb is Verb.DROP:
        _move(nxt, a1.id, Fact(RelationKind.IN_ROOM, a1.id))
        feedback = f"You put down the {a1.display_name}."
    elif verb is Verb.EXAMINE:
        feedback = _describe(state, a1)
    elif verb is Verb.LINK_DESCRIPTOR:
        target = nxt.entities[action.arg2]  # type: ignore[index]
        nxt.facts.add(Fact(RelationKind.DESCRIBES, a1.id, target.id))
        # The descriptor's free token is spent: it links exactly once.
        nxt.facts.add(Fact(RelationKind.CONSUMED, a1.id))
        feedback = f"You note the {target.display_name} as {a1.display_name}."
    elif verb is Verb.INPUT_ASSIGN:
        op = nxt.entities[action.arg2]  # type: ignore[index]
        nxt.facts.add(Fact(RelationKind.INPUT, a1.id, op.id))
        feedback = f"You set aside the {a1.display_name} for the {op.display_name} step."
    elif verb is Verb.LOCATE:
        apparatus = nxt.entities[action.arg2]  # type: ignore[index]
        _move(nxt, a1.id, Fact(RelationKind.LOCATED, a1.id, apparatus.id))
        feedback = f"You set up the {a1.display_name} in the {apparatus.display_name}."
    elif verb is Verb.RUN_OP:
        inputs = nxt.inputs_of(a1.id)
        nxt.facts.add(Fact(RelationKind.OP_RUN, a1.id))
        for material in inputs:
            nxt.facts.add(Fact(RelationKind.CONSUMED, material))
        mixture = Entity(
            mixture_id_for(a1.id), EntityKind.MIXTURE, f"{a1.display_name} product", implicit=True
        )
        nxt.add_entity(mixture)
        nxt.facts.add(Fact(RelationKind.OUTPUT, a1.id, mixture.id))
        nxt.facts.add(Fact(RelationKind.IN_ROOM, mixture.id))
        created.append(mixture)
        feedback = (
            f"You {a1.display_name} the prepared inputs. A {mixture.display_name} appears."
        )
    elif verb is Verb.OBTAIN:
        mixture_id = nxt.output_of(a1.id)
        assert mixture_id is not None
        mixture = nxt.entities[mixture_id]
        _move(nxt, mixture_id, Fact(RelationKind.HOLDS, PLAYER_ID, mixture_id))
        nxt.facts.add(Fact(RelationKind.OBTAINED, mixture_id))
        feedback = f"You collect the {mixture.display_name}."
    else:
        raise AssertionError(f"unhandled verb {verb}")

    return TransitionResult(nxt, created, feedback)


def full_action_space(roster: dict[str, Entity]) -> list[GroundedAction]:
    """Every arity-respecting verb/argument combination over the roster.

    Covers all non-player entities regardless of kind compatibility (that is
    the job of the preconditions), excludes self-pairs, and enumerates in a
    fixed order: verb declaration order, then argument ids lexicographically.
    """
    ids = sorted(e.id for e in roster.values() if e.kind is not EntityKind.PLAYER)
    actions: list[GroundedAction] = []
    for verb in VERB_ORDER:
        if verb in BINARY_VERBS:
            for arg1 in ids:
                for arg2 in ids:
                    if arg1 != arg2:
                        actions.append(GroundedAction(verb, arg1, arg2))
        else:
            for arg1 in ids:
                actions.append(GroundedAction(verb, arg1))
    return actions


def valid_actions(state: WorldState) -> list[GroundedAction]:
    """All actions whose preconditions hold, in full_action_space order.

    Built constructively for speed; tests check exact equality against the
    brute-force filter of the full space.
    """
    ids = state.object_ids()
    by_kind: dict[EntityKind, list[str]] = {}
    for entity_id in ids:
        by_kind.setdefault(state.entities[entity_id].kind, []).append(entity_id)

    consumed = {f.head for f in state.facts if f.relation is RelationKind.CONSUMED}
    in_room = {f.head for f in state.facts if f.relation is RelationKind.IN_ROOM}
    held = {f.tail for f in state.facts if f.relation is RelationKind.HOLDS}
    placed = {f.head for f in state.facts if f.relation is RelationKind.LOCATED}
    ran = {f.head for f in state.facts if f.relation is RelationKind.OP_RUN}
    obtained = {f.head for f in state.facts if f.relation is RelationKind.OBTAINED}
    pending: dict[str, list[str]] = {}
    committed: set[str] = set()
    for fact in state.facts:
        if fact.relation is RelationKind.INPUT and fact.tail not in ran:
            pending.setdefault(fact.tail, []).append(fact.head)  # type: ignore[arg-type]
            committed.add(fact.head)
    outputs = {f.head: f.tail for f in state.facts if f.relation is RelationKind.OUTPUT}

    operations = by_kind.get(EntityKind.OPERATION, [])
    apparatus = [sa for sa in by_kind.get(EntityKind.APPARATUS, []) if sa not in consumed]
    assignable = sorted(
        by_kind.get(EntityKind.MATERIAL, []) + by_kind.get(EntityKind.MIXTURE, [])
    )
    locatable = sorted(assignable + operations)

    actions: list[GroundedAction] = []
    for entity_id in ids:
        if entity_id in in_room and entity_id not in consumed:
            actions.append(GroundedAction(Verb.TAKE, entity_id))
    for entity_id in ids:
        if entity_id in held and entity_id not in consumed:
            actions.append(GroundedAction(Verb.DROP, entity_id))
    for entity_id in ids:
        actions.append(GroundedAction(Verb.EXAMINE, entity_id))
    descriptors = sorted(
        d
        for kind in DESCRIPTOR_KINDS
        for d in by_kind.get(kind, [])
        if d not in consumed
    )
    for descriptor in descriptors:
        target_kinds = DESCRIBE_TARGETS[state.entities[descriptor].kind]
        for target in ids:
            if (
                target != descriptor
                and target not in consumed
                and state.entities[target].kind in target_kinds
            ):
                actions.append(GroundedAction(Verb.LINK_DESCRIPTOR, descriptor, target))
    for material in assignable:
        if material in consumed or material in committed:
            continue
        for op in operations:
            if op not in ran and op not in consumed:
                actions.append(GroundedAction(Verb.INPUT_ASSIGN, material, op))
    for entity_id in locatable:
        if entity_id in consumed or entity_id in placed:
            continue
        for sa in apparatus:
            actions.append(GroundedAction(Verb.LOCATE, entity_id, sa))
    for op in operations:
        if op in ran or op in consumed:
            continue
        inputs = pending.get(op)
        if inputs and not any(m in consumed for m in inputs):
            actions.append(GroundedAction(Verb.RUN_OP, op))
    for op in operations:
        if op in consumed or op not in ran:
            continue
        mixture = outputs.get(op)
        if mixture is not None and mixture not in obtained and mixture not in consumed:
            actions.append(GroundedAction(Verb.OBTAIN, op))
    return actions
