"""Baseline solvers and the train/test evaluation harness.

Agents only ever pick from the pruned valid-action list, so a wrong move is
always a legal rule application, never a rejected command.  The Q-learning
baseline is tabular over (unsatisfied-goal signature, last four commands);
the environment API stays agent-agnostic so richer learners can be attached
externally.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Any, Iterable

from . import rules
from .env import Game, GameEnv, build_game
from .errors import BudgetExhausted, EmptyReference
from .rules import GroundedAction, NEUTRAL_VERBS, Verb
from .world import DEFAULT_LEXICON, Fact, Lexicon, RelationKind, WorldState

TRAIN_SEED_START = 0
TEST_SEED_START = 1000


# ---------------------------------------------------------------------------
# Oracle


def oracle_replay(game: Game) -> float:
    """Step the stored reference through the environment; returns the score.

    Doubles as the environment-correctness oracle: a sound environment
    scores exactly 1.0 on every generated game.
    """
    if not game.reference_k:
        raise EmptyReference(game.id)
    env = GameEnv(game)
    env.reset()
    for action in game.reference_k:
        outcome = env.step(action)
    assert outcome.done, "reference sequence must finish the episode"
    return env.score()


# ---------------------------------------------------------------------------
# Goal-directed search


def _unsatisfied(goal: frozenset[Fact], state: WorldState) -> list[Fact]:
    return [f for f in goal if f not in state.facts]


def _remaining_cost(goal: frozenset[Fact], state: WorldState) -> int | None:
    """Exact count of still-needed actions, or None when the goal is dead.

    Every unsatisfied goal fact demands its own producing action except
    Output facts, which come free with their operation's run.  Deadness
    means some needed argument was already consumed or committed elsewhere.
    """
    cost = 0
    for fact in _unsatisfied(goal, state):
        relation = fact.relation
        if relation is RelationKind.OUTPUT:
            continue
        if relation is RelationKind.DESCRIBES:
            if state.consumed(fact.head) or state.consumed(fact.tail):  # type: ignore[arg-type]
                return None
        elif relation is RelationKind.INPUT:
            if state.consumed(fact.head) or state.op_run(fact.tail):  # type: ignore[arg-type]
                return None
            pending = state.pending_input_target(fact.head)
            if pending is not None and pending != fact.tail:
                return None
        elif relation is RelationKind.LOCATED:
            if state.consumed(fact.head):
                return None
            location = state.location_fact(fact.head)
            if location is not None and location.relation is RelationKind.LOCATED:
                return None
        elif relation is RelationKind.OBTAINED:
            if fact.head in state.entities and state.consumed(fact.head):
                return None
        cost += 1
    return cost


def plan_search(game: Game, budget: int = 200_000) -> list[GroundedAction]:
    """Best-first search from s0 to a goal-satisfying state.

    Uses only the start state and the goal facts, never the reference.
    Neutral verbs are excluded from expansion; the node budget counts
    expanded states.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    goal = game.goal
    start = game.s0.copy()
    start_cost = _remaining_cost(goal, start)
    if start_cost == 0:
        return []
    if start_cost is None:
        raise BudgetExhausted(f"{game.id}: goal unreachable from the start state")

    start_key = frozenset(start.facts)
    counter = 0
    frontier: list[tuple[int, int, int]] = [(start_cost, 0, counter)]
    payload: dict[int, tuple[WorldState, frozenset]] = {counter: (start, start_key)}
    best_g: dict[frozenset, int] = {start_key: 0}
    came_from: dict[frozenset, tuple[frozenset, GroundedAction] | None] = {start_key: None}
    expanded = 0

    while frontier:
        f_value, g_value, tag = heapq.heappop(frontier)
        state, key = payload.pop(tag)
        if best_g.get(key, -1) != g_value:
            continue  # stale entry
        if not _unsatisfied(goal, state):
            actions: list[GroundedAction] = []
            cursor = key
            while came_from[cursor] is not None:
                cursor, action = came_from[cursor]  # type: ignore[misc]
                actions.append(action)
            return list(reversed(actions))
        expanded += 1
        if expanded > budget:
            raise BudgetExhausted(f"{game.id}: expanded {expanded} nodes")
        for action in rules.valid_actions(state):
            if action.verb in NEUTRAL_VERBS:
                continue
            nxt = rules.apply(state, action).next_state
            nxt_key = frozenset(nxt.facts)
            g_next = g_value + 1
            if best_g.get(nxt_key, g_next + 1) <= g_next:
                continue
            h_next = _remaining_cost(goal, nxt)
            if h_next is None:
                continue
            best_g[nxt_key] = g_next
            came_from[nxt_key] = (key, action)
            counter += 1
            payload[counter] = (nxt, nxt_key)
            heapq.heappush(frontier, (g_next + h_next, g_next, counter))
    raise BudgetExhausted(f"{game.id}: state space exhausted without reaching the goal")


# ---------------------------------------------------------------------------
# Random baseline


def random_rollout(game: Game, rng: random.Random) -> float:
    """Uniform choice over the pruned action list until done or cap."""
    env = GameEnv(game)
    _, info = env.reset()
    done = False
    while not done:
        action = rng.choice(info["valid_actions"])
        outcome = env.step(action)
        info = outcome.info
        done = outcome.done
    return env.score()


# ---------------------------------------------------------------------------
# Tabular Q-learning


@dataclass(frozen=True)
class QHyperparams:
    alpha: float = 0.1
    gamma: float = 0.9
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    episodes_per_game: int = 50

    def as_dict(self) -> dict[str, float]:
        return {
            "alpha": self.alpha,
            "gamma": self.gamma,
            "epsilon_start": self.epsilon_start,
            "epsilon_end": self.epsilon_end,
            "episodes_per_game": self.episodes_per_game,
        }


def feature_key(goal: Iterable[Fact], state: WorldState, recent: list[str]) -> str:
    """Observation features: unsatisfied-goal signature plus command recency."""
    unsatisfied = sorted(
        f"{f.relation.value},{f.head},{f.tail or ''}" for f in goal if f not in state.facts
    )
    return "|".join(unsatisfied) + "#" + ";".join(recent[-4:])


@dataclass
class TabularPolicy:
    """Greedy lookup policy over feature keys; unseen states act uniformly."""

    q: dict[str, dict[str, float]] = field(default_factory=dict)
    hyperparams: QHyperparams = field(default_factory=QHyperparams)

    def action_values(self, key: str, valid: list[GroundedAction]) -> list[float]:
        row = self.q.get(key)
        if row is None:
            return [0.0] * len(valid)
        return [row.get(action.command(), 0.0) for action in valid]

    def choose(
        self, key: str, valid: list[GroundedAction], rng: random.Random
    ) -> GroundedAction:
        """Pick a greedy action, breaking ties uniformly at random."""
        values = self.action_values(key, valid)
        best = max(values)
        ties = [action for action, value in zip(valid, values) if value == best]
        return rng.choice(ties)

    def update(self, key: str, action: GroundedAction, target: float) -> None:
        row = self.q.setdefault(key, {})
        command = action.command()
        old = row.get(command, 0.0)
        row[command] = old + self.hyperparams.alpha * (target - old)

    def value(self, key: str, action: GroundedAction) -> float:
        return self.q.get(key, {}).get(action.command(), 0.0)

    def to_doc(self) -> dict[str, Any]:
        return {
            "format": "tlq/1",
            "hyperparams": self.hyperparams.as_dict(),
            "q": self.q,
        }

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "TabularPolicy":
        hp = doc.get("hyperparams", {})
        return cls(
            q={k: dict(v) for k, v in doc["q"].items()},
            hyperparams=QHyperparams(
                alpha=hp.get("alpha", 0.1),
                gamma=hp.get("gamma", 0.9),
                epsilon_start=hp.get("epsilon_start", 1.0),
                epsilon_end=hp.get("epsilon_end", 0.05),
                episodes_per_game=int(hp.get("episodes_per_game", 50)),
            ),
        )


def _run_episode(
    env: GameEnv,
    policy: TabularPolicy,
    rng: random.Random,
    epsilon: float,
    learn: bool,
) -> float:
    game = env.game
    _, info = env.reset()
    key = feature_key(game.goal, env.state, env.recent)
    valid = info["valid_actions"]
    done = False
    while not done:
        if epsilon > 0.0 and rng.random() < epsilon:
            action = rng.choice(valid)
        else:
            action = policy.choose(key, valid, rng)
        outcome = env.step(action)
        next_key = feature_key(game.goal, env.state, env.recent)
        next_valid = outcome.info["valid_actions"]
        if learn:
            if outcome.done:
                target = float(outcome.reward)
            else:
                best_next = max(
                    policy.action_values(next_key, next_valid), default=0.0
                )
                target = outcome.reward + policy.hyperparams.gamma * best_next
            policy.update(key, action, target)
        key, valid, done = next_key, next_valid, outcome.done
    return env.score()


def q_train(
    levels: Iterable[int],
    games_per_level: int = 100,
    hyperparams: QHyperparams = QHyperparams(),
    master_seed: int = 0,
    lexicon: Lexicon = DEFAULT_LEXICON,
    train_seed_start: int = TRAIN_SEED_START,
) -> TabularPolicy:
    """Epsilon-greedy tabular Q-learning over the training corpus.

    One policy serves all levels: feature signatures from different levels
    never collide.  Epsilon decays linearly per level from epsilon_start to
    epsilon_end over all episodes; training is reproducible given the master
    seed.
    """
    policy = TabularPolicy(hyperparams=hyperparams)
    rng = random.Random(f"qtrain:{master_seed}")
    for level in levels:
        games = [
            build_game(level, seed, lexicon)
            for seed in range(train_seed_start, train_seed_start + games_per_level)
        ]
        envs = [GameEnv(game) for game in games]
        total = hyperparams.episodes_per_game * len(games)
        episode = 0
        for _ in range(hyperparams.episodes_per_game):
            for env in envs:
                span = max(total - 1, 1)
                epsilon = hyperparams.epsilon_start + (
                    hyperparams.epsilon_end - hyperparams.epsilon_start
                ) * (episode / span)
                _run_episode(env, policy, rng, epsilon, learn=True)
                episode += 1
    return policy


# ---------------------------------------------------------------------------
# Evaluation protocol


@dataclass
class LevelResult:
    level: int
    n_games: int
    mean_score: float
    mean_reference_length: float
    scores: list[float] = field(default_factory=list)


@dataclass
class EvalReport:
    agent: str
    rows: list[LevelResult]
    hyperparams: dict[str, Any] = field(default_factory=dict)
    test_seed_start: int = TEST_SEED_START

    def to_doc(self) -> dict[str, Any]:
        return {
            "format": "tlr/1",
            "agent": self.agent,
            "test_seed_start": self.test_seed_start,
            "hyperparams": self.hyperparams,
            "levels": [
                {
                    "level": row.level,
                    "n_games": row.n_games,
                    "mean_score": row.mean_score,
                    "mean_len": row.mean_reference_length,
                    "scores": row.scores,
                }
                for row in self.rows
            ],
        }

    def to_table(self) -> str:
        lines = ["level\tn_games\tmean_score\tmean_len"]
        for row in self.rows:
            lines.append(
                f"{row.level}\t{row.n_games}\t{row.mean_score:.4f}"
                f"\t{row.mean_reference_length:.2f}"
            )
        return "\n".join(lines) + "\n"


class Agent:
    """Episode player: begin_episode() then act() per step."""

    name = "agent"

    def begin_episode(self, game: Game) -> None:  # pragma: no cover - default no-op
        pass

    def act(self, env: GameEnv, valid: list[GroundedAction]) -> GroundedAction:
        raise NotImplementedError


class OracleAgent(Agent):
    name = "oracle"

    def begin_episode(self, game: Game) -> None:
        self._plan = list(game.reference_k)
        self._cursor = 0

    def act(self, env: GameEnv, valid: list[GroundedAction]) -> GroundedAction:
        action = self._plan[self._cursor]
        self._cursor += 1
        return action


class RandomAgent(Agent):
    name = "random"

    def __init__(self, seed: int = 0):
        self._rng = random.Random(f"random-agent:{seed}")

    def act(self, env: GameEnv, valid: list[GroundedAction]) -> GroundedAction:
        return self._rng.choice(valid)


class SearchAgent(Agent):
    """Plans once per episode with the goal-directed search, then executes."""

    name = "search"

    def __init__(self, budget: int = 200_000):
        self.budget = budget

    def begin_episode(self, game: Game) -> None:
        try:
            self._plan = plan_search(game, self.budget)
        except BudgetExhausted:
            self._plan = []
        self._cursor = 0

    def act(self, env: GameEnv, valid: list[GroundedAction]) -> GroundedAction:
        if self._cursor < len(self._plan):
            action = self._plan[self._cursor]
            self._cursor += 1
            return action
        for action in valid:  # plan exhausted: idle harmlessly until the cap
            if action.verb is Verb.EXAMINE:
                return action
        return valid[0]


class PolicyAgent(Agent):
    name = "qlearn"

    def __init__(self, policy: TabularPolicy, seed: int = 0):
        self.policy = policy
        self._rng = random.Random(f"policy-agent:{seed}")

    def act(self, env: GameEnv, valid: list[GroundedAction]) -> GroundedAction:
        key = feature_key(env.game.goal, env.state, env.recent)
        return self.policy.choose(key, valid, self._rng)


def play_episode(agent: Agent, game: Game) -> float:
    env = GameEnv(game)
    agent.begin_episode(game)
    _, info = env.reset()
    done = False
    while not done:
        action = agent.act(env, info["valid_actions"])
        outcome = env.step(action)
        info = outcome.info
        done = outcome.done
    return env.score()


def evaluate(
    agent: Agent,
    levels: Iterable[int],
    games_per_level: int = 10,
    test_seed_start: int = TEST_SEED_START,
    lexicon: Lexicon = DEFAULT_LEXICON,
    hyperparams: dict[str, Any] | None = None,
) -> EvalReport:
    """Run the agent over unseen test games and aggregate per level."""
    rows: list[LevelResult] = []
    for level in levels:
        games = [
            build_game(level, seed, lexicon)
            for seed in range(test_seed_start, test_seed_start + games_per_level)
        ]
        scores = [play_episode(agent, game) for game in games]
        lengths = [len(game.reference_k) for game in games]
        rows.append(
            LevelResult(
                level=level,
                n_games=len(games),
                mean_score=sum(scores) / len(scores),
                mean_reference_length=sum(lengths) / len(lengths),
                scores=scores,
            )
        )
    return EvalReport(
        agent=agent.name,
        rows=rows,
        hyperparams=dict(hyperparams or {}),
        test_seed_start=test_seed_start,
    )
