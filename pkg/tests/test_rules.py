import random

import pytest

from labquest.errors import PreconditionViolated
from labquest.rules import (
    GroundedAction,
    NEUTRAL_VERBS,
    Verb,
    apply,
    full_action_space,
    mixture_id_for,
    preconditions_hold,
    valid_actions,
)
from labquest.world import (
    Entity,
    EntityKind,
    Fact,
    RelationKind,
    WorldState,
    audit_state,
    sample_entities,
)


def act(verb, arg1, arg2=None):
    return GroundedAction(Verb(verb), arg1, arg2)


def brute_force_valid(state):
    """Independent oracle: filter the full space through the preconditions."""
    return [
        action
        for action in full_action_space(state.entities)
        if preconditions_hold(state, action).ok
    ]


def run_sequence(state, actions):
    for action in actions:
        state = apply(state, action).next_state
    return state


class TestPreconditions:
    def test_unlinked_descriptor_can_link(self, tiny_state):
        assert preconditions_hold(tiny_state, act("link-descriptor", "md-1", "m-1")).ok

    def test_consumed_argument_blocks_assignment(self, tiny_state):
        state = run_sequence(
            tiny_state, [act("input-assign", "m-1", "op-1"), act("run-op", "op-1")]
        )
        verdict = preconditions_hold(state, act("input-assign", "m-1", "op-1"))
        assert not verdict.ok
        assert verdict.reason == "argument consumed"

    def test_run_op_needs_inputs(self, tiny_state):
        verdict = preconditions_hold(tiny_state, act("run-op", "op-1"))
        assert not verdict.ok
        assert verdict.reason == "operation has no inputs"

    def test_unknown_entity_reason(self, tiny_state):
        verdict = preconditions_hold(tiny_state, act("take", "m-99"))
        assert not verdict.ok
        assert "unknown entity" in verdict.reason

    def test_double_commitment_blocked(self, tiny_state):
        state = WorldState.initial(
            [
                Entity("m-1", EntityKind.MATERIAL, "NaCl"),
                Entity("op-1", EntityKind.OPERATION, "mix"),
                Entity("op-2", EntityKind.OPERATION, "heat"),
            ]
        )
        state = run_sequence(state, [act("input-assign", "m-1", "op-1")])
        verdict = preconditions_hold(state, act("input-assign", "m-1", "op-2"))
        assert not verdict.ok
        assert verdict.reason == "already committed to an operation"

    def test_descriptor_links_exactly_once(self, tiny_state):
        state = run_sequence(tiny_state, [act("link-descriptor", "md-1", "m-1")])
        verdict = preconditions_hold(state, act("link-descriptor", "md-1", "m-2"))
        assert not verdict.ok
        assert verdict.reason == "argument consumed"

    def test_locate_is_one_shot(self, tiny_state):
        state = run_sequence(tiny_state, [act("locate", "op-1", "sa-1")])
        verdict = preconditions_hold(state, act("locate", "op-1", "sa-1"))
        assert not verdict.ok
        assert verdict.reason == "already placed in an apparatus"


class TestApply:
    def test_run_op_consumes_and_creates(self, tiny_state):
        state = run_sequence(
            tiny_state,
            [act("input-assign", "m-1", "op-1"), act("input-assign", "m-2", "op-1")],
        )
        result = apply(state, act("run-op", "op-1"))
        nxt = result.next_state
        assert nxt.has(RelationKind.OP_RUN, "op-1")
        assert nxt.consumed("m-1") and nxt.consumed("m-2")
        assert [e.id for e in result.created] == ["mx-1"]
        assert nxt.has(RelationKind.OUTPUT, "op-1", "mx-1")
        assert nxt.has(RelationKind.IN_ROOM, "mx-1")
        assert nxt.entities["mx-1"].implicit

    def test_examine_changes_nothing(self, tiny_state):
        before = set(tiny_state.facts)
        result = apply(tiny_state, act("examine", "m-1"))
        assert result.next_state.facts == before
        assert result.feedback

    def test_obtain_before_run_raises(self, tiny_state):
        with pytest.raises(PreconditionViolated):
            apply(tiny_state, act("obtain", "op-1"))

    def test_take_and_drop_move_location(self, tiny_state):
        taken = apply(tiny_state, act("take", "m-1")).next_state
        assert taken.has(RelationKind.HOLDS, "player-1", "m-1")
        assert not taken.has(RelationKind.IN_ROOM, "m-1")
        dropped = apply(taken, act("drop", "m-1")).next_state
        assert dropped.has(RelationKind.IN_ROOM, "m-1")

    def test_obtain_moves_product_to_hands(self, tiny_state):
        state = run_sequence(
            tiny_state,
            [act("input-assign", "m-1", "op-1"), act("run-op", "op-1"), act("obtain", "op-1")],
        )
        assert state.has(RelationKind.OBTAINED, "mx-1")
        assert state.has(RelationKind.HOLDS, "player-1", "mx-1")

    def test_source_state_never_mutated(self, tiny_state):
        snapshot_facts = set(tiny_state.facts)
        snapshot_ids = set(tiny_state.entities)
        apply(tiny_state, act("take", "m-1"))
        assert tiny_state.facts == snapshot_facts
        assert set(tiny_state.entities) == snapshot_ids

    def test_mixture_id_follows_producer(self):
        assert mixture_id_for("op-3") == "mx-3"


class TestFullActionSpace:
    def test_three_entity_count(self):
        # 5 unary verbs x 3 entities + 3 binary verbs x 3 x 2 ordered pairs = 33
        roster = {
            e.id: e
            for e in [
                Entity("m-1", EntityKind.MATERIAL, "NaCl"),
                Entity("m-2", EntityKind.MATERIAL, "H2O"),
                Entity("op-1", EntityKind.OPERATION, "mix"),
            ]
        }
        assert len(full_action_space(roster)) == 33

    def test_empty_roster(self):
        assert full_action_space({}) == []

    def test_player_excluded_and_duplicate_free(self, tiny_state):
        space = full_action_space(tiny_state.entities)
        assert len(space) == len(set(space))
        assert all("player" not in (a.arg1, a.arg2) for a in space)

    def test_deterministic_order(self, tiny_state):
        space = full_action_space(tiny_state.entities)
        assert space == full_action_space(tiny_state.entities)
        verbs = [a.verb for a in space]
        assert verbs == sorted(verbs, key=list(Verb).index)


class TestValidActions:
    def test_matches_brute_force_on_fresh_state(self, tiny_state):
        assert valid_actions(tiny_state) == brute_force_valid(tiny_state)

    def test_fresh_level1_contents(self, level1_state):
        state = level1_state
        valid = set(valid_actions(state))
        for entity_id in state.object_ids():
            assert act("take", entity_id) in valid
            assert act("examine", entity_id) in valid
        assert not any(a.verb is Verb.RUN_OP for a in valid)
        assert not any(a.verb is Verb.OBTAIN for a in valid)
        materials = state.ids_of_kind(EntityKind.MATERIAL)
        operations = state.ids_of_kind(EntityKind.OPERATION)
        for material in materials:
            for op in operations:
                assert act("input-assign", material, op) in valid

    def test_obtain_available_after_final_run(self, tiny_state):
        state = run_sequence(
            tiny_state,
            [
                act("input-assign", "m-1", "op-1"),
                act("input-assign", "m-2", "op-1"),
                act("run-op", "op-1"),
            ],
        )
        assert all(state.consumed(m) for m in ("m-1", "m-2"))
        assert act("obtain", "op-1") in valid_actions(state)

    def test_subset_of_full_space(self, level1_state):
        assert set(valid_actions(level1_state)) <= set(full_action_space(level1_state.entities))

    @pytest.mark.parametrize("level,seed", [(1, 0), (2, 3), (3, 11)])
    def test_random_walk_matches_brute_force(self, level, seed):
        rng = random.Random(f"walk:{level}:{seed}")
        state = WorldState.initial(sample_entities(level, rng))
        for _ in range(25):
            constructive = valid_actions(state)
            assert constructive == brute_force_valid(state)
            state = apply(state, rng.choice(constructive)).next_state
        assert valid_actions(state) == brute_force_valid(state)


class TestLinearityAndFrames:
    """Random-walk property checks over seeded trajectories."""

    def walk(self, level, seed, steps=40):
        rng = random.Random(f"lin:{level}:{seed}")
        state = WorldState.initial(sample_entities(level, rng))
        trail = []
        for _ in range(steps):
            options = valid_actions(state)
            action = rng.choice(options)
            result = apply(state, action)
            trail.append((state, action, result.next_state))
            state = result.next_state
        return trail

    @pytest.mark.parametrize("seed", range(5))
    def test_consumed_entities_never_used_again(self, seed):
        for state, action, nxt in self.walk(3, seed):
            if action.verb is Verb.EXAMINE:
                continue
            assert not state.consumed(action.arg1)
            if action.arg2 is not None:
                assert not state.consumed(action.arg2)

    @pytest.mark.parametrize("seed", range(5))
    def test_state_stays_sound_after_every_action(self, seed):
        for _, _, nxt in self.walk(4, seed):
            assert audit_state(nxt) == []

    @pytest.mark.parametrize("seed", range(3))
    def test_entities_created_only_by_run_op(self, seed):
        rng = random.Random(f"created:{seed}")
        state = WorldState.initial(sample_entities(3, rng))
        for _ in range(40):
            action = rng.choice(valid_actions(state))
            result = apply(state, action)
            if action.verb is Verb.RUN_OP:
                assert len(result.created) == 1
            else:
                assert result.created == []
            state = result.next_state

    ALLOWED_RELATION_CHANGES = {
        Verb.TAKE: {RelationKind.IN_ROOM, RelationKind.HOLDS, RelationKind.LOCATED},
        Verb.DROP: {RelationKind.IN_ROOM, RelationKind.HOLDS, RelationKind.LOCATED},
        Verb.EXAMINE: set(),
        Verb.LINK_DESCRIPTOR: {RelationKind.DESCRIBES, RelationKind.CONSUMED},
        Verb.INPUT_ASSIGN: {RelationKind.INPUT},
        Verb.LOCATE: {RelationKind.IN_ROOM, RelationKind.HOLDS, RelationKind.LOCATED},
        Verb.RUN_OP: {
            RelationKind.OP_RUN,
            RelationKind.CONSUMED,
            RelationKind.OUTPUT,
            RelationKind.IN_ROOM,
        },
        Verb.OBTAIN: {
            RelationKind.OBTAINED,
            RelationKind.IN_ROOM,
            RelationKind.HOLDS,
            RelationKind.LOCATED,
        },
    }

    @pytest.mark.parametrize("seed", range(5))
    def test_frame_property(self, seed):
        # apply only touches facts named in the verb's effect row
        for state, action, nxt in self.walk(3, seed):
            changed = state.facts.symmetric_difference(nxt.facts)
            allowed = self.ALLOWED_RELATION_CHANGES[action.verb]
            assert {f.relation for f in changed} <= allowed
            touched_args = {action.arg1, action.arg2}
            for fact in changed:
                subjects = {fact.head, fact.tail}
                # every changed fact involves an argument or the new mixture
                assert subjects & (
                    touched_args
                    | {mixture_id_for(action.arg1)}
                    | {"player-1"}
                    | set(state.inputs_of(action.arg1))
                    | {state.output_of(action.arg1)}
                )

    @pytest.mark.parametrize("seed", range(3))
    def test_apply_deterministic(self, seed):
        rng_a = random.Random(f"det:{seed}")
        rng_b = random.Random(f"det:{seed}")
        state_a = WorldState.initial(sample_entities(3, rng_a))
        state_b = WorldState.initial(sample_entities(3, rng_b))
        for _ in range(30):
            options_a = valid_actions(state_a)
            options_b = valid_actions(state_b)
            assert options_a == options_b
            pick = rng_a.choice(options_a)
            rng_b.choice(options_b)
            state_a = apply(state_a, pick).next_state
            state_b = apply(state_b, pick).next_state
            assert state_a.facts == state_b.facts

    def test_no_inverse_for_run_and_link(self, tiny_state):
        # irreversibility: no verb removes OP_RUN, DESCRIBES, or CONSUMED facts
        for verb, allowed in self.ALLOWED_RELATION_CHANGES.items():
            if verb in (Verb.RUN_OP, Verb.LINK_DESCRIPTOR):
                continue
            assert RelationKind.OP_RUN not in allowed
            assert RelationKind.DESCRIBES not in allowed
