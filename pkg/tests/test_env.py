import pytest

from labquest.env import (
    GameEnv,
    build_game,
    game_to_doc,
    load_game,
    normalized_score,
    parse_command,
    save_game,
)
from labquest.errors import (
    CorruptGame,
    EmptyReference,
    EpisodeOver,
    ParseError,
    SchemaViolation,
)
from labquest.ingest import game_from_text
from labquest.rules import GroundedAction, Verb, preconditions_hold
from labquest.world import EntityKind, RelationKind


def env_for(level, seed):
    game = build_game(level, seed)
    env = GameEnv(game)
    observation, info = env.reset()
    return game, env, observation, info


class TestParseCommand:
    def test_binary_command(self):
        action = parse_command("input-assign m-1 op-1")
        assert action == GroundedAction(Verb.INPUT_ASSIGN, "m-1", "op-1")

    def test_surface_verbs_rejected(self):
        with pytest.raises(ParseError):
            parse_command("mix m-1")

    def test_arity_mismatch_rejected(self):
        with pytest.raises(ParseError):
            parse_command("run-op op-1 op-2")

    def test_malformed_id_rejected(self):
        with pytest.raises(ParseError) as excinfo:
            parse_command("take NaCl")
        assert excinfo.value.token == "NaCl"

    def test_empty_command_rejected(self):
        with pytest.raises(ParseError):
            parse_command("   ")


class TestReset:
    def test_goal_not_satisfied_at_start(self):
        for level in range(1, 6):
            _, env, _, info = env_for(level, 0)
            assert not info["goal_satisfied"]

    def test_observation_contains_instructions_and_surface(self):
        game, _, observation, _ = env_for(1, 4)
        assert game.instructions in observation
        assert game.surface in observation
        assert "recent:" in observation and "room:" in observation

    def test_reset_idempotent(self):
        game, env, first, _ = env_for(2, 3)
        env.step(game.reference_k[0])
        second, info = env.reset()
        assert second == first
        assert env.steps == 0 and env.rewards == []

    def test_corrupt_game_detected(self):
        game = build_game(1, 0)
        game.reference_k.insert(0, game.reference_k[-1])  # obtain before run
        with pytest.raises(CorruptGame):
            GameEnv(game).reset()


class TestStep:
    def test_reference_walk_scores_one(self):
        game, env, _, _ = env_for(3, 2)
        outcomes = [env.step(action) for action in game.reference_k]
        assert all(o.reward == 1 for o in outcomes)
        assert outcomes[-1].done and outcomes[-1].info["goal_satisfied"]
        assert env.score() == 1.0

    def test_examine_is_neutral_and_frameless(self):
        game, env, _, _ = env_for(1, 1)
        target = game.reference_k[0].arg1
        before = set(env.state.facts)
        outcome = env.step(GroundedAction(Verb.EXAMINE, target))
        assert outcome.reward == 0
        assert env.state.facts == before
        assert not outcome.done

    def test_take_and_drop_are_neutral(self):
        game, env, _, _ = env_for(1, 2)
        material = game.reference_k[0].arg1
        assert env.step(GroundedAction(Verb.TAKE, material)).reward == 0
        assert env.step(GroundedAction(Verb.DROP, material)).reward == 0

    def test_off_quest_but_legal_action_penalized(self):
        game, env, _, info = env_for(1, 0)
        link = next(a for a in game.reference_k if a.verb is Verb.LINK_DESCRIPTOR)
        wrong_targets = [
            a
            for a in info["valid_actions"]
            if a.verb is Verb.LINK_DESCRIPTOR and a != link
        ]
        assert wrong_targets
        outcome = env.step(wrong_targets[0])
        assert outcome.reward == -1

    def test_invalid_command_keeps_state(self):
        game, env, _, _ = env_for(1, 0)
        before = set(env.state.facts)
        op = next(a.arg1 for a in game.reference_k if a.verb is Verb.RUN_OP)
        outcome = env.step(GroundedAction(Verb.RUN_OP, op))  # no inputs yet
        assert outcome.reward == -1
        assert env.state.facts == before
        assert "can't" in outcome.observation.splitlines()[0]

    def test_duplicate_credit_denied(self):
        game, env, _, _ = env_for(1, 3)
        first = game.reference_k[0]
        assert env.step(first).reward == 1
        outcome = env.step(first)  # now invalid (already committed)
        assert outcome.reward == -1

    def test_recent_banner_tracks_last_four(self):
        game, env, _, _ = env_for(2, 1)
        ids = sorted(env.state.object_ids())[:5]
        last_obs = None
        for entity_id in ids:
            last_obs = env.step(GroundedAction(Verb.EXAMINE, entity_id)).observation
        banner = next(line for line in last_obs.splitlines() if line.startswith("recent:"))
        assert all(f"examine {i}" in banner for i in ids[1:])
        assert f"examine {ids[0]}" not in banner

    def test_instructions_repeated_every_step(self):
        game, env, _, _ = env_for(1, 6)
        outcome = env.step(game.reference_k[0])
        assert game.instructions in outcome.observation

    def test_episode_cap_reached_by_examines(self):
        game, env, _, _ = env_for(1, 5)
        entity_id = env.state.object_ids()[0]
        done = False
        steps = 0
        while not done:
            outcome = env.step(GroundedAction(Verb.EXAMINE, entity_id))
            done = outcome.done
            steps += 1
        assert steps == game.episode_cap
        assert env.score() == 0.0

    def test_rewards_always_in_unit_band(self):
        import random as random_mod

        rng = random_mod.Random("band")
        game, env, _, info = env_for(3, 8)
        done = False
        while not done:
            outcome = env.step(rng.choice(info["valid_actions"]))
            assert outcome.reward in (-1, 0, 1)
            info = outcome.info
            done = outcome.done
        assert env.score() <= 1.0

    def test_step_after_done_raises(self):
        game, env, _, _ = env_for(1, 0)
        for action in game.reference_k:
            env.step(action)
        with pytest.raises(EpisodeOver):
            env.step(game.reference_k[0])

    def test_step_before_reset_raises(self):
        game = build_game(1, 0)
        with pytest.raises(EpisodeOver):
            GameEnv(game).step(game.reference_k[0])

    def test_monitor_frontier_always_satisfiable(self):
        # frontier soundness: every frontier action passes preconditions, and
        # frontier-only play never dead-ends before the goal
        game, env, _, _ = env_for(4, 7)
        for action in game.reference_k:
            frontier = env.monitor.frontier()
            assert frontier
            for frontier_action in frontier:
                assert preconditions_hold(env.state, frontier_action).ok
            env.step(action)
        assert env.monitor.frontier() == []


class TestNormalizedScore:
    def test_perfect_run(self):
        reference = build_game(1, 0).reference_k
        assert normalized_score([1] * len(reference), reference) == 1.0

    def test_all_zero(self):
        reference = build_game(1, 0).reference_k
        assert normalized_score([0] * 50, reference) == 0.0

    def test_one_slip(self):
        reference = build_game(2, 0).reference_k
        k = len(reference)
        assert normalized_score([1] * k + [-1], reference) == (k - 1) / k

    def test_empty_reference_raises(self):
        with pytest.raises(EmptyReference):
            normalized_score([1], [])


class TestRewardFreeMode:
    def make(self):
        return game_from_text("Mix the NaCl and H2O. Then heat the mixture.")

    def test_rewards_all_zero_and_cap_only(self):
        game = self.make()
        env = GameEnv(game)
        _, info = env.reset()
        done = False
        steps = 0
        while not done:
            outcome = env.step(info["valid_actions"][0])
            info = outcome.info
            assert outcome.reward == 0
            done = outcome.done
            steps += 1
        assert steps == game.episode_cap

    def test_score_undefined(self):
        game = self.make()
        env = GameEnv(game)
        env.reset()
        with pytest.raises(EmptyReference):
            env.score()


class TestGameFiles:
    def test_round_trip_identity(self):
        game = build_game(3, 9)
        loaded = load_game(save_game(game))
        assert loaded == game

    def test_save_is_byte_stable(self):
        assert save_game(build_game(2, 11)) == save_game(build_game(2, 11))
        game = build_game(2, 11)
        assert save_game(load_game(save_game(game))) == save_game(game)

    def test_tampered_goal_kind_rejected(self):
        doc = game_to_doc(build_game(1, 0))
        for triple in doc["goal"]:
            if triple[0] == "describes":
                triple[0] = "input"  # descriptor as an operation input: kind error
        import json

        with pytest.raises(SchemaViolation) as excinfo:
            load_game(json.dumps(doc))
        assert "goal" in excinfo.value.path

    def test_unknown_field_types_rejected(self):
        import json

        doc = game_to_doc(build_game(1, 0))
        doc["level"] = "one"
        with pytest.raises(SchemaViolation):
            load_game(json.dumps(doc))

    def test_cap_below_reference_rejected(self):
        import json

        doc = game_to_doc(build_game(1, 0))
        doc["episode_cap"] = 1
        with pytest.raises(SchemaViolation) as excinfo:
            load_game(json.dumps(doc))
        assert "episode_cap" in excinfo.value.path

    def test_not_json_rejected(self):
        with pytest.raises(SchemaViolation):
            load_game("not json at all")
