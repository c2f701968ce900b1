"""labquest: materials-synthesis procedures as solvable text games."""

from .agents import (
    Agent,
    EvalReport,
    OracleAgent,
    PolicyAgent,
    QHyperparams,
    RandomAgent,
    SearchAgent,
    TabularPolicy,
    evaluate,
    oracle_replay,
    plan_search,
    q_train,
    random_rollout,
)
from .env import (
    Game,
    GameEnv,
    StepOutcome,
    build_game,
    load_game,
    normalized_score,
    parse_command,
    save_game,
)
from .ingest import (
    AnnotatedDoc,
    Gazetteer,
    convert_annotated,
    game_from_text,
    tag_entities,
)
from .quests import ActionGraph, OperationDag, equivalent, generate, goal_of, replay
from .rules import (
    GroundedAction,
    Verb,
    apply,
    full_action_space,
    preconditions_hold,
    valid_actions,
)
from .surface import realize_instructions, realize_surface
from .world import (
    DEFAULT_LEXICON,
    Entity,
    EntityKind,
    Fact,
    Lexicon,
    RelationKind,
    WorldState,
    sample_entities,
    schema_entity_kind,
    validate_fact,
)

__version__ = "0.1.0"
