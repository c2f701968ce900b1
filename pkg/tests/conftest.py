import random

import pytest

from labquest.world import DEFAULT_LEXICON, Entity, EntityKind, WorldState, sample_entities


@pytest.fixture
def lexicon():
    return DEFAULT_LEXICON


@pytest.fixture
def tiny_state():
    """Two materials, an operation, a material descriptor, an apparatus."""
    roster = [
        Entity("m-1", EntityKind.MATERIAL, "NaCl"),
        Entity("m-2", EntityKind.MATERIAL, "H2O"),
        Entity("op-1", EntityKind.OPERATION, "mix"),
        Entity("md-1", EntityKind.MATERIAL_DESCRIPTOR, "powdered"),
        Entity("sa-1", EntityKind.APPARATUS, "beaker"),
    ]
    return WorldState.initial(roster)


@pytest.fixture
def level1_state():
    rng = random.Random("fixtures:level1")
    return WorldState.initial(sample_entities(1, rng))
