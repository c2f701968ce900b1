"""The game environment: episodes, rewards, observations, and game files.

Commands use canonical verb names and entity ids; mapping the surface text
onto them is the learner's problem.  Rewards follow the quest monitor: +1
for a reference action whose prerequisites are already credited, 0 for the
neutral verbs, -1 otherwise, with illegal commands rejected unchanged.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from typing import Any

from . import quests, rules, surface
from .errors import (
    CorruptGame,
    EmptyReference,
    EpisodeOver,
    ParseError,
    ReplayFailed,
    SchemaViolation,
)
from .quests import ActionGraph
from .rules import GroundedAction, NEUTRAL_VERBS, Verb
from .world import (
    DEFAULT_LEXICON,
    Entity,
    EntityKind,
    Fact,
    Lexicon,
    RelationKind,
    WorldState,
    validate_fact,
)

DEFAULT_EPISODE_CAP = 50
GAME_FORMAT = "tlg/1"
GRAPH_FORMAT = "tlk/1"

_ID_TOKEN = re.compile(r"^[a-z]+-[0-9]+$")


@dataclass
class Game:
    id: str
    s0: WorldState
    surface: str
    instructions: str
    goal: frozenset[Fact]
    reference_k: list[GroundedAction]
    level: int
    seed: int
    episode_cap: int = DEFAULT_EPISODE_CAP
    discount: float = 1.0

    @property
    def reward_free(self) -> bool:
        """In-the-wild games carry no goal and no reference; rewards are off."""
        return not self.goal and not self.reference_k


def build_game(level: int, seed: int, lexicon: Lexicon = DEFAULT_LEXICON) -> Game:
    """Generate a quest and wrap it with its surface and instructions."""
    graph = quests.generate(level, seed, lexicon)
    text = surface.realize_surface(graph, random.Random(f"surface:{level}:{seed}"))
    instructions = surface.realize_instructions(graph.goal, graph.s0.entities)
    return Game(
        id=f"quest-l{level}-s{seed}",
        s0=graph.s0,
        surface=text,
        instructions=instructions,
        goal=graph.goal,
        reference_k=list(graph.actions),
        level=level,
        seed=seed,
        episode_cap=max(DEFAULT_EPISODE_CAP, len(graph.actions)),
    )


def parse_command(text: str) -> GroundedAction:
    """Parse `verb arg1 [arg2]` over entity ids; anything else is rejected."""
    tokens = text.split()
    if not tokens:
        raise ParseError("", "empty command")
    try:
        verb = Verb(tokens[0])
    except ValueError:
        raise ParseError(tokens[0], f"unknown verb {tokens[0]!r}") from None
    arity = 2 if verb in rules.BINARY_VERBS else 1
    args = tokens[1:]
    if len(args) != arity:
        raise ParseError(text, f"{verb.value} takes {arity} argument(s), got {len(args)}")
    for arg in args:
        if not _ID_TOKEN.match(arg):
            raise ParseError(arg, f"{arg!r} is not an entity id")
    return GroundedAction(verb, args[0], args[1] if arity == 2 else None)


def normalized_score(rewards: list[int], reference_k: list[GroundedAction]) -> float:
    """Total reward over reference length; 1 means exact execution."""
    if not reference_k:
        raise EmptyReference("game has no reference sequence")
    return sum(rewards) / len(reference_k)


class QuestMonitor:
    """Tracks which reference actions remain and which are currently due.

    The frontier holds the remaining actions whose prerequisites have all
    been credited; only frontier matches earn the +1 reward, so repeating an
    already-credited action counts as a wrong action.
    """

    def __init__(self, reference: list[GroundedAction]):
        self.reference = list(reference)
        self.dependencies = quests.action_dependencies(self.reference)
        self.remaining: set[int] = set(range(len(self.reference)))
        self.credited: set[int] = set()

    def frontier(self) -> list[GroundedAction]:
        return [self.reference[i] for i in sorted(self.frontier_indices())]

    def frontier_indices(self) -> set[int]:
        return {i for i in self.remaining if self.dependencies[i] <= self.credited}

    def credit(self, action: GroundedAction) -> bool:
        for index in sorted(self.frontier_indices()):
            if self.reference[index] == action:
                self.remaining.discard(index)
                self.credited.add(index)
                return True
        return False


@dataclass
class StepOutcome:
    observation: str
    reward: int
    done: bool
    info: dict[str, Any] = field(default_factory=dict)


class GameEnv:
    """One playable episode at a time over a fixed game."""

    def __init__(self, game: Game):
        self.game = game
        self.state: WorldState = game.s0
        self.monitor: QuestMonitor | None = None
        self.steps = 0
        self.done = False
        self.rewards: list[int] = []
        self.recent: list[str] = []
        self._started = False
        self._validated = False

    # -- observation text ---------------------------------------------------

    def _room_listing(self) -> str:
        names = [
            f"{e.id} ({e.display_name})"
            for e in sorted(self.state.entities.values())
            if self.state.has(RelationKind.IN_ROOM, e.id) and not self.state.consumed(e.id)
        ]
        return "room: " + (", ".join(names) if names else "nothing")

    def _recent_banner(self) -> str:
        return "recent: " + ("; ".join(self.recent) if self.recent else "(none)")

    def _observe(self, lead: str) -> str:
        return "\n".join(
            [lead, self.game.instructions, self._recent_banner(), self._room_listing()]
        )

    def _info(self) -> dict[str, Any]:
        return {
            "valid_actions": rules.valid_actions(self.state),
            "goal_satisfied": self.goal_satisfied(),
        }

    # -- episode control ----------------------------------------------------

    def goal_satisfied(self) -> bool:
        if self.game.reward_free:
            return False
        return set(self.game.goal) <= self.state.facts

    def reset(self) -> tuple[str, dict[str, Any]]:
        if self.game.reference_k and not self._validated:
            try:
                final = quests.replay_actions(self.game.s0, self.game.reference_k)
            except ReplayFailed as exc:
                raise CorruptGame(f"reference does not replay: {exc}") from exc
            if not set(self.game.goal) <= final.facts:
                raise CorruptGame("reference replay does not reach the goal")
            self._validated = True
        self.state = self.game.s0.copy()
        self.monitor = QuestMonitor(self.game.reference_k)
        self.steps = 0
        self.done = False
        self.rewards = []
        self.recent = []
        self._started = True
        return self._observe(self.game.surface), self._info()

    def step(self, command: GroundedAction) -> StepOutcome:
        if not self._started:
            raise EpisodeOver("call reset() before step()")
        if self.done:
            raise EpisodeOver("episode already finished")
        assert self.monitor is not None
        self.steps += 1

        legal = set(rules.valid_actions(self.state))
        if command not in legal:
            verdict = rules.preconditions_hold(self.state, command)
            reward = -1
            feedback = f"You can't do that ({verdict.reason})."
        else:
            result = rules.apply(self.state, command)
            self.state = result.next_state
            if self.game.reward_free:
                reward = 0
            elif self.monitor.credit(command):
                reward = 1
            elif command.verb in NEUTRAL_VERBS:
                reward = 0
            else:
                reward = -1
            feedback = result.feedback

        self.rewards.append(reward)
        self.recent.append(command.command())
        self.recent = self.recent[-4:]
        if self.game.reward_free:
            self.done = self.steps >= self.game.episode_cap
        else:
            self.done = self.goal_satisfied() or self.steps >= self.game.episode_cap
        return StepOutcome(self._observe(feedback), reward, self.done, self._info())

    def score(self) -> float:
        return normalized_score(self.rewards, self.game.reference_k)


# ---------------------------------------------------------------------------
# Game file format (`.tlg.json`): canonical, sorted-key, round-trip stable.


def _entity_doc(entity: Entity) -> dict[str, Any]:
    return {
        "id": entity.id,
        "kind": entity.kind.value,
        "name": entity.display_name,
        "implicit": entity.implicit,
    }


def _facts_doc(facts: set[Fact] | frozenset[Fact]) -> list[list[str | None]]:
    return [f.as_triple() for f in sorted(facts, key=lambda f: (f.relation.value, f.head, f.tail or ""))]


def _actions_doc(actions: list[GroundedAction]) -> list[list[str | None]]:
    return [[a.verb.value, a.arg1, a.arg2] for a in actions]


def game_to_doc(game: Game) -> dict[str, Any]:
    return {
        "format": GAME_FORMAT,
        "id": game.id,
        "level": game.level,
        "seed": game.seed,
        "episode_cap": game.episode_cap,
        "discount": game.discount,
        "entities": [_entity_doc(e) for e in sorted(game.s0.entities.values())],
        "initial_facts": _facts_doc(game.s0.facts),
        "surface": game.surface,
        "instructions": game.instructions,
        "goal": _facts_doc(game.goal),
        "reference": _actions_doc(game.reference_k),
    }


def save_game(game: Game) -> str:
    return json.dumps(game_to_doc(game), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _require(doc: dict[str, Any], key: str, types: type | tuple, path: str) -> Any:
    if key not in doc:
        raise SchemaViolation(f"{path}.{key}", "missing field")
    value = doc[key]
    if not isinstance(value, types):
        raise SchemaViolation(f"{path}.{key}", f"expected {types}, got {type(value).__name__}")
    return value


def _fact_from_triple(triple: Any, roster: dict[str, Entity], path: str) -> Fact:
    if not (isinstance(triple, list) and len(triple) == 3):
        raise SchemaViolation(path, "facts are [relation, head, tail] triples")
    relation_name, head, tail = triple
    try:
        relation = RelationKind(relation_name)
    except ValueError:
        raise SchemaViolation(path, f"unknown relation {relation_name!r}") from None
    if not isinstance(head, str) or not (tail is None or isinstance(tail, str)):
        raise SchemaViolation(path, "fact arguments must be ids")
    fact = Fact(relation, head, tail)
    verdict = validate_fact(fact, roster)
    if not verdict.ok:
        raise SchemaViolation(path, f"{verdict.error}: {verdict.detail}")
    return fact


def load_game(text: str) -> Game:
    """Parse and validate a game document; raises SchemaViolation with a path."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation("$", f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaViolation("$", "document must be an object")
    if doc.get("format") != GAME_FORMAT:
        raise SchemaViolation("$.format", f"expected {GAME_FORMAT!r}")

    roster: dict[str, Entity] = {}
    for index, entry in enumerate(_require(doc, "entities", list, "$")):
        path = f"$.entities[{index}]"
        if not isinstance(entry, dict):
            raise SchemaViolation(path, "entity entries are objects")
        try:
            kind = EntityKind(_require(entry, "kind", str, path))
        except ValueError:
            raise SchemaViolation(f"{path}.kind", f"unknown kind {entry.get('kind')!r}") from None
        entity = Entity(
            _require(entry, "id", str, path),
            kind,
            _require(entry, "name", str, path),
            bool(entry.get("implicit", False)),
        )
        if entity.id in roster:
            raise SchemaViolation(f"{path}.id", f"duplicate id {entity.id}")
        roster[entity.id] = entity

    state = WorldState()
    for entity in roster.values():
        state.add_entity(entity)
    for index, triple in enumerate(_require(doc, "initial_facts", list, "$")):
        state.facts.add(_fact_from_triple(triple, roster, f"$.initial_facts[{index}]"))

    # Goal facts may name the implicit mixture any rostered operation will
    # produce; extend the roster with those prospective entities.
    prospective = dict(roster)
    for entity in roster.values():
        if entity.kind is EntityKind.OPERATION:
            mixture = Entity(
                rules.mixture_id_for(entity.id),
                EntityKind.MIXTURE,
                f"{entity.display_name} product",
                implicit=True,
            )
            prospective.setdefault(mixture.id, mixture)
    goal = frozenset(
        _fact_from_triple(triple, prospective, f"$.goal[{index}]")
        for index, triple in enumerate(_require(doc, "goal", list, "$"))
    )

    reference: list[GroundedAction] = []
    for index, entry in enumerate(_require(doc, "reference", list, "$")):
        path = f"$.reference[{index}]"
        if not (isinstance(entry, list) and len(entry) == 3):
            raise SchemaViolation(path, "actions are [verb, arg1, arg2] triples")
        verb_name, arg1, arg2 = entry
        try:
            verb = Verb(verb_name)
        except ValueError:
            raise SchemaViolation(path, f"unknown verb {verb_name!r}") from None
        if not isinstance(arg1, str) or not (arg2 is None or isinstance(arg2, str)):
            raise SchemaViolation(path, "action arguments must be ids")
        reference.append(GroundedAction(verb, arg1, arg2))

    episode_cap = _require(doc, "episode_cap", int, "$")
    if reference and episode_cap < len(reference):
        raise SchemaViolation("$.episode_cap", "smaller than the reference length")

    return Game(
        id=_require(doc, "id", str, "$"),
        s0=state,
        surface=_require(doc, "surface", str, "$"),
        instructions=_require(doc, "instructions", str, "$"),
        goal=goal,
        reference_k=reference,
        level=_require(doc, "level", int, "$"),
        seed=_require(doc, "seed", int, "$"),
        episode_cap=episode_cap,
        discount=float(_require(doc, "discount", (int, float), "$")),
    )


def graph_to_doc(graph: ActionGraph) -> dict[str, Any]:
    """Serialize a bare action graph (same conventions as the game format)."""
    return {
        "format": GRAPH_FORMAT,
        "level": graph.level,
        "seed": graph.seed,
        "entities": [_entity_doc(e) for e in sorted(graph.s0.entities.values())],
        "initial_facts": _facts_doc(graph.s0.facts),
        "actions": _actions_doc(graph.actions),
        "goal": _facts_doc(graph.goal),
    }


def save_graph(graph: ActionGraph) -> str:
    return json.dumps(graph_to_doc(graph), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
