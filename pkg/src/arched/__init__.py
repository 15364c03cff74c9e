"""ARCHED: staged human-in-the-loop development of learning objectives.

Generation proposes candidates from educator parameters, analysis evaluates
them against the six-level cognitive taxonomy and a five-criterion rubric,
and the educator curates what survives. An evaluation harness covers the
agreement statistics (weighted kappa, confusion matrices, Mann-Whitney U).
"""

from .bloom import (
    AGREEMENT_WEIGHTS,
    BloomLevel,
    VerbLexicon,
    agreement_weight,
    bundled_lexicon,
    classify_by_verb,
    level_distance,
    verbs_for_level,
)
from .objectives import (
    AbcdParts,
    CurationStatus,
    GenerationSpec,
    LearningObjective,
    ObjectiveSet,
    Provenance,
    SmartChecklist,
    StructuralFailure,
    check_smart,
    decompose_abcd,
    export_set,
    import_set,
)

__version__ = "0.1.0"

__all__ = [
    "AGREEMENT_WEIGHTS",
    "AbcdParts",
    "BloomLevel",
    "CurationStatus",
    "GenerationSpec",
    "LearningObjective",
    "ObjectiveSet",
    "Provenance",
    "SmartChecklist",
    "StructuralFailure",
    "VerbLexicon",
    "agreement_weight",
    "bundled_lexicon",
    "check_smart",
    "classify_by_verb",
    "decompose_abcd",
    "export_set",
    "import_set",
    "level_distance",
    "verbs_for_level",
]
