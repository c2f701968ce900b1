"""Rule-based surface realization for quests and goal instructions.

One sentence group per operation: its input assignments, placement and run
collapse into a single imperative sentence, with descriptor links rendered
as premodifiers at their target's mention.  Result mixtures stay implicit
in the text ("the mixture"), never by display name.
"""

from __future__ import annotations

import random
from pathlib import Path

from .errors import MissingTemplate
from .quests import ActionGraph
from .rules import Verb, producer_of
from .world import Entity, EntityKind, Fact, RelationKind

# verb -> surface patterns; a pattern is chosen per use with the caller's rng.
# link-descriptor patterns decorate the mention of the described entity
# (including an operation's verb slot), so descriptor names always surface.
DEFAULT_TEMPLATES: dict[Verb, tuple[str, ...]] = {
    Verb.INPUT_ASSIGN: ("the {name}", "some {name}", "the {name}"),
    Verb.LINK_DESCRIPTOR: ("{descriptor} {name}", "{name} ({descriptor})"),
    Verb.LOCATE: (" in the {name}", " inside the {name}", " using the {name}"),
    Verb.RUN_OP: (
        "Now {verb} {inputs}{where}.",
        "Then {verb} {inputs}{where}.",
        "Next, {verb} {inputs}{where}.",
    ),
    Verb.OBTAIN: (
        "Finally, collect the product.",
        "Collect the resulting product.",
        "Recover the final product.",
    ),
}

MIXTURE_MENTIONS = ("the mixture", "the resulting mixture")


def load_templates(path: str | Path) -> dict[Verb, tuple[str, ...]]:
    """Parse a `verb<TAB>pattern` table; listed verbs replace the defaults."""
    loaded: dict[Verb, list[str]] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        try:
            verb_name, pattern = line.split("\t", 1)
        except ValueError:
            raise ValueError(f"{path}:{lineno}: expected verb<TAB>pattern") from None
        loaded.setdefault(Verb(verb_name.strip()), []).append(pattern)
    templates = dict(DEFAULT_TEMPLATES)
    templates.update({verb: tuple(patterns) for verb, patterns in loaded.items()})
    return templates


def _pick(
    templates: dict[Verb, tuple[str, ...]], verb: Verb, rng: random.Random
) -> str:
    patterns = templates.get(verb)
    if not patterns:
        raise MissingTemplate(verb.value)
    return rng.choice(patterns)


def _join(mentions: list[str]) -> str:
    if len(mentions) == 1:
        return mentions[0]
    return ", ".join(mentions[:-1]) + " and " + mentions[-1]


def realize_surface(
    graph: ActionGraph,
    rng: random.Random,
    templates: dict[Verb, tuple[str, ...]] | None = None,
) -> str:
    """Render an action graph as procedure text.

    Deterministic given (graph, rng seed); mentions every explicit entity by
    its roster display name, and never names an implicit mixture.
    """
    templates = templates or DEFAULT_TEMPLATES
    entities = graph.s0.entities

    adjectives: dict[str, list[str]] = {}
    for action in graph.actions:
        if action.verb is Verb.LINK_DESCRIPTOR:
            adjectives.setdefault(action.arg2, []).append(action.arg1)  # type: ignore[arg-type]

    def decorated(entity_id: str, base: str) -> str:
        name = base
        for descriptor_id in adjectives.get(entity_id, []):
            pattern = _pick(templates, Verb.LINK_DESCRIPTOR, rng)
            name = pattern.format(descriptor=entities[descriptor_id].display_name, name=name)
        return name

    raw_inputs: dict[str, list[str]] = {}
    mixture_inputs: dict[str, int] = {}
    located_in: dict[str, str] = {}
    op_order: list[str] = []
    for action in graph.actions:
        if action.verb is Verb.INPUT_ASSIGN:
            if action.arg1.startswith("mx-"):
                mixture_inputs[action.arg2] = mixture_inputs.get(action.arg2, 0) + 1  # type: ignore[index]
            else:
                raw_inputs.setdefault(action.arg2, []).append(action.arg1)  # type: ignore[arg-type]
        elif action.verb is Verb.LOCATE and action.arg1 in entities and entities[
            action.arg1
        ].kind is EntityKind.OPERATION:
            located_in[action.arg1] = action.arg2  # type: ignore[assignment]
        elif action.verb is Verb.RUN_OP:
            op_order.append(action.arg1)

    sentences: list[str] = []
    for op_id in op_order:
        mentions: list[str] = []
        for material_id in raw_inputs.get(op_id, []):
            pattern = _pick(templates, Verb.INPUT_ASSIGN, rng)
            mentions.append(
                pattern.format(name=decorated(material_id, entities[material_id].display_name))
            )
        mixture_count = mixture_inputs.get(op_id, 0)
        if mixture_count == 1:
            mentions.append(rng.choice(MIXTURE_MENTIONS))
        elif mixture_count > 1:
            mentions.append("the prepared mixtures")

        where = ""
        if op_id in located_in:
            apparatus_id = located_in[op_id]
            pattern = _pick(templates, Verb.LOCATE, rng)
            where = pattern.format(
                name=decorated(apparatus_id, entities[apparatus_id].display_name)
            )

        verb_phrase = decorated(op_id, entities[op_id].display_name)
        sentence = _pick(templates, Verb.RUN_OP, rng).format(
            verb=verb_phrase, inputs=_join(mentions), where=where
        )
        sentences.append(sentence)

    if any(action.verb is Verb.OBTAIN for action in graph.actions):
        sentences.append(_pick(templates, Verb.OBTAIN, rng))
    return " ".join(sentences)


# Canonical instruction order: structure first, collection last.
_INSTRUCTION_ORDER = (
    RelationKind.DESCRIBES,
    RelationKind.INPUT,
    RelationKind.LOCATED,
    RelationKind.OP_RUN,
    RelationKind.OUTPUT,
    RelationKind.OBTAINED,
)

INSTRUCTION_HEADER = "Your goal:"


def realize_instructions(goal: frozenset[Fact] | set[Fact], roster: dict[str, Entity]) -> str:
    """Enumerate goal facts as imperative clauses, in canonical order.

    A pure function of (goal, roster); the environment repeats the result
    verbatim in every observation.
    """
    clauses: list[str] = []
    rank = {relation: index for index, relation in enumerate(_INSTRUCTION_ORDER)}
    for fact in sorted(goal, key=lambda f: (rank[f.relation], f.head, f.tail or "")):
        if fact.relation is RelationKind.DESCRIBES:
            clauses.append(f"link-descriptor {fact.head} onto {fact.tail}.")
        elif fact.relation is RelationKind.INPUT:
            clauses.append(f"input-assign {fact.head} to {fact.tail}.")
        elif fact.relation is RelationKind.LOCATED:
            clauses.append(f"locate {fact.head} in {fact.tail}.")
        elif fact.relation is RelationKind.OP_RUN:
            clauses.append(f"run-op {fact.head}.")
        elif fact.relation is RelationKind.OUTPUT:
            clauses.append(f"make {fact.head} yield {fact.tail}.")
        elif fact.relation is RelationKind.OBTAINED:
            clauses.append(f"obtain {producer_of(fact.head)} to collect {fact.head}.")
    if not clauses:
        return INSTRUCTION_HEADER
    return INSTRUCTION_HEADER + " " + " ".join(clauses)
