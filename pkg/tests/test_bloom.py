import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from arched.bloom import (
    AGREEMENT_WEIGHTS,
    LEVELS,
    BloomLevel,
    VerbLexicon,
    agreement_weight,
    classify_by_verb,
    level_distance,
    verbs_for_level,
)
from arched.errors import InvalidInputError

levels_st = st.sampled_from(LEVELS)


def test_exactly_six_ordered_levels():
    assert len(LEVELS) == 6
    assert [lv.label for lv in LEVELS] == [
        "Remember",
        "Understand",
        "Apply",
        "Analyze",
        "Evaluate",
        "Create",
    ]
    assert int(BloomLevel.REMEMBER) == 0
    assert int(BloomLevel.CREATE) == 5


def test_parse_is_case_insensitive():
    assert BloomLevel.parse("remember") is BloomLevel.REMEMBER
    assert BloomLevel.parse(" CREATE ") is BloomLevel.CREATE
    with pytest.raises(InvalidInputError):
        BloomLevel.parse("Synthesize")


def test_level_distance_examples():
    assert level_distance(BloomLevel.REMEMBER, BloomLevel.REMEMBER) == 0
    assert level_distance(BloomLevel.REMEMBER, BloomLevel.CREATE) == 5
    assert level_distance(BloomLevel.APPLY, BloomLevel.ANALYZE) == 1


def test_agreement_weight_examples():
    assert agreement_weight(BloomLevel.UNDERSTAND, BloomLevel.UNDERSTAND) == 1.0
    assert agreement_weight(BloomLevel.APPLY, BloomLevel.ANALYZE) == 0.8
    assert agreement_weight(BloomLevel.REMEMBER, BloomLevel.CREATE) == 0.0


def test_weight_table_is_exact_for_all_distances():
    for d, expected in enumerate((1.0, 0.8, 0.6, 0.4, 0.2, 0.0)):
        a = BloomLevel.REMEMBER
        b = BloomLevel(d)
        assert agreement_weight(a, b) == expected  # exact float equality, by contract


def test_weights_match_linear_formula():
    for d in range(6):
        assert AGREEMENT_WEIGHTS[d] == pytest.approx(1 - d / 5, abs=1e-15)


@given(levels_st, levels_st)
def test_weight_symmetric_and_diagonal(a, b):
    assert agreement_weight(a, b) == agreement_weight(b, a)
    assert (agreement_weight(a, b) == 1.0) == (a == b)
    assert agreement_weight(a, b) in {1.0, 0.8, 0.6, 0.4, 0.2, 0.0}


@given(levels_st, levels_st, levels_st)
def test_distance_triangle_inequality(a, b, c):
    assert level_distance(a, c) <= level_distance(a, b) + level_distance(b, c)


def test_classify_examples():
    assert classify_by_verb("Students will list the six levels of the taxonomy") is BloomLevel.REMEMBER
    assert classify_by_verb("Students will design a caching layer for a web service") is BloomLevel.CREATE
    assert classify_by_verb("Students will vibe with recursion") is None


def test_classify_rejects_empty_text():
    with pytest.raises(InvalidInputError):
        classify_by_verb("")
    with pytest.raises(InvalidInputError):
        classify_by_verb("   ")


def test_classify_first_hit_wins():
    # "list" (Remember) appears before "design" (Create)
    assert classify_by_verb("Students will list design patterns") is BloomLevel.REMEMBER


def test_classify_handles_inflected_forms():
    assert classify_by_verb("Designing a scheduler is the goal") is BloomLevel.CREATE
    assert classify_by_verb("Learners classified the rock samples") is BloomLevel.UNDERSTAND
    assert classify_by_verb("She evaluates three proposals") is BloomLevel.EVALUATE
    assert classify_by_verb("They planned the experiment") is BloomLevel.CREATE


@given(st.text(min_size=1).filter(lambda t: t.strip()))
def test_classify_deterministic(text):
    assert classify_by_verb(text) == classify_by_verb(text)


def test_canonical_sentence_family_full_lexicon(lexicon):
    # every lexicon verb, used as the operative verb, classifies to its level
    for verb, level in lexicon.entries.items():
        sentence = f"Students will {verb} the assigned material"
        assert classify_by_verb(sentence, lexicon) == level, verb


def test_verbs_for_level_contents_and_order(lexicon):
    remember = verbs_for_level(BloomLevel.REMEMBER)
    create = verbs_for_level(BloomLevel.CREATE)
    assert {"list", "define", "recall"} <= set(remember)
    assert {"design", "compose"} <= set(create)
    for level in LEVELS:
        verbs = verbs_for_level(level)
        assert len(verbs) >= 10
        assert verbs == sorted(verbs)


def test_every_verb_maps_to_exactly_one_level(lexicon):
    seen = {}
    for level in LEVELS:
        for verb in lexicon.verbs_for_level(level):
            assert verb not in seen
            seen[verb] = level
    assert len(seen) == len(lexicon.entries)


def test_lexicon_parsing_from_text():
    lex = VerbLexicon.from_text(
        "# version: 9\n"
        "# a comment line\n"
        "frobnicate\tApply\t# inline note\n"
        "zork\tCreate\n"
    )
    assert lex.version == "9"
    assert lex.level_of("frobnicate") is BloomLevel.APPLY
    assert lex.verbs_for_level(BloomLevel.CREATE) == ["zork"]


def test_lexicon_rejects_bad_lines():
    with pytest.raises(InvalidInputError):
        VerbLexicon.from_text("onlyonefield\n")
    with pytest.raises(InvalidInputError):
        VerbLexicon.from_text("verb\tNotALevel\n")
    with pytest.raises(InvalidInputError):
        VerbLexicon.from_text("dup\tApply\ndup\tCreate\n")
    with pytest.raises(InvalidInputError):
        VerbLexicon.from_text("# nothing but comments\n")


def test_lexicon_file_override(tmp_path):
    path = tmp_path / "custom.tsv"
    path.write_text("# version: custom\nponder\tEvaluate\n", encoding="utf-8")
    lex = VerbLexicon.load(path)
    assert lex.version == "custom"
    assert classify_by_verb("Students will ponder the tradeoffs", lex) is BloomLevel.EVALUATE


def test_distance_symmetry_exhaustive():
    for a, b in itertools.product(LEVELS, repeat=2):
        assert level_distance(a, b) == level_distance(b, a)
        assert 0 <= level_distance(a, b) <= 5
