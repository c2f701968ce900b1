"""Quest generation: action graphs built by forward chaining.

A quest is an ordered action sequence rooted at a start state, together with
the goal facts its replay establishes.  Operations form a dag mediated by
their result mixtures; every start material is incorporated into the route
and the final action collects the sink operation's product.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import rules
from .errors import GenerationFailed, PreconditionViolated, ReplayFailed
from .rules import GroundedAction, Verb, mixture_id_for, producer_of
from .world import (
    DEFAULT_LEXICON,
    DESCRIBE_TARGETS,
    Entity,
    EntityKind,
    Fact,
    Lexicon,
    RelationKind,
    WorldState,
    sample_entities,
)

MAX_GENERATION_ATTEMPTS = 32

# Goal facts record the synthesis structure, never where things ended up.
GOAL_RELATIONS = (
    RelationKind.DESCRIBES,
    RelationKind.INPUT,
    RelationKind.LOCATED,
    RelationKind.OP_RUN,
    RelationKind.OUTPUT,
    RelationKind.OBTAINED,
)


def max_quest_length(level: int) -> int:
    return 4 * level + 4


@dataclass(frozen=True)
class OperationDag:
    """Mixture-mediated dependencies between operations."""

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]  # (producer, consumer)

    def predecessors(self, op_id: str) -> list[str]:
        return sorted(src for src, dst in self.edges if dst == op_id)

    def sinks(self) -> list[str]:
        producers = {src for src, _ in self.edges}
        return [op for op in self.nodes if op not in producers]


@dataclass
class ActionGraph:
    s0: WorldState
    actions: list[GroundedAction]
    goal: frozenset[Fact] = field(default_factory=frozenset)
    level: int = 1
    seed: int = 0


def replay_actions(s0: WorldState, actions: list[GroundedAction]) -> WorldState:
    """Fold apply over a sequence; loud failure on any precondition miss."""
    state = s0
    for index, action in enumerate(actions):
        try:
            state = rules.apply(state, action).next_state
        except PreconditionViolated as exc:
            raise ReplayFailed(index, exc.reason) from exc
    return state


def replay(graph: ActionGraph) -> WorldState:
    return replay_actions(graph.s0, graph.actions)


def goal_of(
    s0: "WorldState | ActionGraph", actions: list[GroundedAction] | None = None
) -> frozenset[Fact]:
    """Goal facts of a sequence: its synthesis structure after replay.

    Accepts either (s0, actions) or a whole ActionGraph.  Location and
    consumption bookkeeping is excluded so winning does not depend on where
    the agent left things.
    """
    if actions is None:
        graph = s0
        assert isinstance(graph, ActionGraph)
        s0, actions = graph.s0, graph.actions
    final = replay_actions(s0, actions)
    keep = frozenset(GOAL_RELATIONS)
    return frozenset(f for f in final.facts if f.relation in keep)


def canonical_facts(state: WorldState) -> frozenset[Fact]:
    """Facts with implicit mixtures renamed after their producing operation."""
    renames: dict[str, str] = {}
    for fact in state.facts:
        if fact.relation is RelationKind.OUTPUT and fact.tail is not None:
            renames[fact.tail] = mixture_id_for(fact.head)

    def fix(name: str | None) -> str | None:
        if name is None:
            return None
        return renames.get(name, name)

    return frozenset(Fact(f.relation, fix(f.head), fix(f.tail)) for f in state.facts)  # type: ignore[arg-type]


def equivalent(
    actions_a: list[GroundedAction], actions_b: list[GroundedAction], s0: WorldState
) -> bool:
    """Whether two sequences from the same start reach the same final state.

    Final states are compared up to renaming of implicit mixtures, which the
    canonical naming scheme makes a straight set comparison.
    """
    final_a = replay_actions(s0, actions_a)
    final_b = replay_actions(s0, actions_b)
    return canonical_facts(final_a) == canonical_facts(final_b)


def action_dependencies(actions: list[GroundedAction]) -> list[set[int]]:
    """Prerequisite indices per action for a well-formed reference sequence.

    An action depends on another when replaying it earlier would either be
    impossible (its argument does not exist yet, its operation has not run)
    or would destroy a later action's argument (running an operation consumes
    the pending inputs that links and placements still need).
    """
    run_index: dict[str, int] = {}
    assign_indices: dict[str, list[int]] = {}
    touch_indices: dict[str, list[int]] = {}  # actions requiring an entity unconsumed
    for index, action in enumerate(actions):
        if action.verb is Verb.RUN_OP:
            run_index[action.arg1] = index
        elif action.verb is Verb.INPUT_ASSIGN:
            assign_indices.setdefault(action.arg2, []).append(index)  # type: ignore[arg-type]
            touch_indices.setdefault(action.arg1, []).append(index)
        elif action.verb is Verb.LINK_DESCRIPTOR:
            touch_indices.setdefault(action.arg2, []).append(index)  # type: ignore[arg-type]
        elif action.verb is Verb.LOCATE:
            touch_indices.setdefault(action.arg1, []).append(index)

    deps: list[set[int]] = [set() for _ in actions]

    def needs_mixture(index: int, entity_id: str) -> None:
        if entity_id.startswith("mx-"):
            producer = producer_of(entity_id)
            if producer in run_index:
                deps[index].add(run_index[producer])

    for index, action in enumerate(actions):
        verb = action.verb
        if verb is Verb.INPUT_ASSIGN:
            needs_mixture(index, action.arg1)
        elif verb is Verb.LINK_DESCRIPTOR:
            needs_mixture(index, action.arg2)  # type: ignore[arg-type]
        elif verb is Verb.LOCATE:
            needs_mixture(index, action.arg1)
        elif verb is Verb.RUN_OP:
            for assign_index in assign_indices.get(action.arg1, []):
                deps[index].add(assign_index)
                material = actions[assign_index].arg1
                # Everything that needs this input unconsumed must precede the run.
                for touch_index in touch_indices.get(material, []):
                    if touch_index != index:
                        deps[index].add(touch_index)
        elif verb is Verb.OBTAIN:
            if action.arg1 in run_index:
                deps[index].add(run_index[action.arg1])
    return deps


def operation_dag(actions: list[GroundedAction]) -> OperationDag:
    """Recover the mixture-mediated operation dag from a sequence."""
    nodes = tuple(a.arg1 for a in actions if a.verb is Verb.RUN_OP)
    edges = tuple(
        (producer_of(a.arg1), a.arg2)
        for a in actions
        if a.verb is Verb.INPUT_ASSIGN and a.arg1.startswith("mx-")
    )
    return OperationDag(nodes, edges)  # type: ignore[arg-type]


def _sample_plan(
    level: int, rng: random.Random, roster: list[Entity]
) -> list[GroundedAction]:
    materials = [e.id for e in roster if e.kind is EntityKind.MATERIAL]
    operations = [e.id for e in roster if e.kind is EntityKind.OPERATION]
    descriptors = [e for e in roster if e.kind in DESCRIBE_TARGETS]
    apparatus = [e.id for e in roster if e.kind is EntityKind.APPARATUS]
    kinds = {e.id: e.kind for e in roster}

    # Run order, then an in-tree over it: every non-sink operation feeds its
    # mixture to exactly one later operation, so the dag is connected,
    # acyclic, and has a single sink.
    order = list(operations)
    rng.shuffle(order)
    successor: dict[str, str] = {}
    for position, op in enumerate(order[:-1]):
        successor[op] = order[rng.randrange(position + 1, len(order))]

    fed = set(successor.values())
    sources = [op for op in order if op not in fed]
    if len(sources) > len(materials):
        raise GenerationFailed(f"{len(sources)} source operations for {len(materials)} materials")

    shuffled = list(materials)
    rng.shuffle(shuffled)
    raw_inputs: dict[str, list[str]] = {op: [] for op in order}
    for source, material in zip(sources, shuffled):
        raw_inputs[source].append(material)
    for material in shuffled[len(sources):]:
        raw_inputs[rng.choice(sources)].append(material)

    located_ops = dict(zip(rng.sample(order, len(apparatus)), apparatus))

    sequence: list[GroundedAction] = []
    consumer: dict[str, str] = {}  # material -> operation that will consume it
    for op in order:
        for material in sorted(raw_inputs[op]):
            sequence.append(GroundedAction(Verb.INPUT_ASSIGN, material, op))
            consumer[material] = op
        for predecessor in sorted(src for src, dst in successor.items() if dst == op):
            sequence.append(GroundedAction(Verb.INPUT_ASSIGN, mixture_id_for(predecessor), op))
        if op in located_ops:
            sequence.append(GroundedAction(Verb.LOCATE, op, located_ops[op]))
        sequence.append(GroundedAction(Verb.RUN_OP, op))
    sequence.append(GroundedAction(Verb.OBTAIN, order[-1]))

    # Interleave descriptor links anywhere before their target's consumption.
    for descriptor in sorted(descriptors, key=lambda e: e.id):
        choices = [
            e.id
            for e in roster
            if e.kind in DESCRIBE_TARGETS[descriptor.kind] and e.kind is not EntityKind.MIXTURE
        ]
        target = rng.choice(sorted(choices))
        if kinds[target] is EntityKind.MATERIAL:
            deadline = sequence.index(GroundedAction(Verb.RUN_OP, consumer[target]))
        else:
            deadline = len(sequence) - 1  # obtain stays final
        position = rng.randint(0, deadline)
        sequence.insert(position, GroundedAction(Verb.LINK_DESCRIPTOR, descriptor.id, target))
    return sequence


def generate(level: int, seed: int, lexicon: Lexicon = DEFAULT_LEXICON) -> ActionGraph:
    """Generate a solvable action graph for a difficulty level.

    Deterministic in (level, seed, lexicon).  Retries a bounded number of
    times if a sampled plan violates its own constraints, then gives up.
    """
    rng = random.Random(f"quest:{level}:{seed}")
    last_error = "no attempt made"
    for _ in range(MAX_GENERATION_ATTEMPTS):
        roster = sample_entities(level, rng, lexicon)
        try:
            actions = _sample_plan(level, rng, roster)
        except GenerationFailed as exc:
            last_error = str(exc)
            continue
        if len(actions) > max_quest_length(level):
            last_error = f"plan length {len(actions)} exceeds cap"
            continue
        s0 = WorldState.initial(roster)
        try:
            goal = goal_of(s0, actions)
        except ReplayFailed as exc:
            last_error = str(exc)
            continue
        return ActionGraph(s0=s0, actions=actions, goal=goal, level=level, seed=seed)
    raise GenerationFailed(f"level {level} seed {seed}: {last_error}")
