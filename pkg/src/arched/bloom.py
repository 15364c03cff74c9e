"""Six-level cognitive taxonomy core.

Ordered levels, an action-verb lexicon, ordinal distance, the partial-credit
agreement weights used by the evaluation statistics, and a deterministic
rule-based level classifier that doubles as offline fallback and test oracle.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .errors import InvalidInputError


class BloomLevel(IntEnum):
    """The six cognitive-process levels, ordered lowest to highest."""

    REMEMBER = 0
    UNDERSTAND = 1
    APPLY = 2
    ANALYZE = 3
    EVALUATE = 4
    CREATE = 5

    @property
    def label(self) -> str:
        """Display name, e.g. ``"Remember"``."""
        return self.name.capitalize()

    @classmethod
    def parse(cls, name: str) -> "BloomLevel":
        """Parse a level from its name, case-insensitively."""
        try:
            return cls[name.strip().upper()]
        except (KeyError, AttributeError):
            raise InvalidInputError(f"unknown taxonomy level: {name!r}") from None


LEVELS: tuple[BloomLevel, ...] = tuple(BloomLevel)

# Ordinal partial-credit scheme: full credit on the diagonal, minus 0.2 per
# level of separation. Kept as a literal table because 1 - d/5 in binary
# floating point does not reproduce 0.2 exactly at distance 4.
AGREEMENT_WEIGHTS: tuple[float, ...] = (1.0, 0.8, 0.6, 0.4, 0.2, 0.0)


def level_distance(a: BloomLevel, b: BloomLevel) -> int:
    """Ordinal distance between two levels (0..5)."""
    return abs(int(a) - int(b))


def agreement_weight(a: BloomLevel, b: BloomLevel) -> float:
    """Agreement credit for a rating pair: 1.0 when equal, 0.0 at distance 5."""
    return AGREEMENT_WEIGHTS[level_distance(a, b)]


_TOKEN_RE = re.compile(r"[a-z]+")

# Irregular past/participle forms that objective texts commonly surface for
# lexicon verbs; regular inflections are handled by the suffix rules below.
_IRREGULAR_FORMS = {
    "built": "build",
    "broke": "break",
    "chose": "choose",
    "chosen": "choose",
    "drew": "draw",
    "drawn": "draw",
    "gave": "give",
    "given": "give",
    "made": "make",
    "ran": "run",
    "told": "tell",
    "wrote": "write",
    "written": "write",
}


def _lemma_candidates(token: str):
    """Yield base-form candidates for ``token`` in a fixed, deterministic order."""
    yield token
    if token in _IRREGULAR_FORMS:
        yield _IRREGULAR_FORMS[token]
    if token.endswith("ies") and len(token) > 4:
        yield token[:-3] + "y"  # classifies -> classify
    if token.endswith("ied") and len(token) > 4:
        yield token[:-3] + "y"  # classified -> classify
    if token.endswith("s") and len(token) > 2:
        yield token[:-1]  # lists -> list
    if token.endswith("es") and len(token) > 3:
        yield token[:-2]  # matches -> match
    if token.endswith("ing") and len(token) > 4:
        stem = token[:-3]
        yield stem  # designing -> design
        yield stem + "e"  # creating -> create
        if len(stem) >= 3 and stem[-1] == stem[-2]:
            yield stem[:-1]  # planning -> plan
    if token.endswith("ed") and len(token) > 3:
        stem = token[:-2]
        yield stem  # listed -> list
        yield stem + "e"  # evaluated -> evaluate
        if len(stem) >= 3 and stem[-1] == stem[-2]:
            yield stem[:-1]  # planned -> plan


@dataclass(frozen=True)
class VerbLexicon:
    """Mapping from base-form action verbs to their taxonomy level.

    Loaded from a line-oriented UTF-8 file (``verb<TAB>Level``, ``#`` comments);
    the bundled file ships with the package and can be overridden by path.
    """

    entries: dict[str, BloomLevel]
    version: str = "unversioned"

    def __post_init__(self):
        if not self.entries:
            raise InvalidInputError("verb lexicon is empty")

    @classmethod
    def from_text(cls, text: str) -> "VerbLexicon":
        entries: dict[str, BloomLevel] = {}
        version = "unversioned"
        for line_no, raw in enumerate(text.splitlines(), start=1):
            stripped = raw.strip()
            if stripped.startswith("#"):
                m = re.match(r"#\s*version:\s*(\S+)", stripped)
                if m:
                    version = m.group(1)
                continue
            body = raw.split("#", 1)[0].strip()
            if not body:
                continue
            fields = [f.strip() for f in body.split("\t") if f.strip()]
            if len(fields) < 2:
                raise InvalidInputError(f"lexicon line {line_no}: expected 'verb<TAB>Level'")
            verb = fields[0].lower()
            level = BloomLevel.parse(fields[1])
            if verb in entries:
                raise InvalidInputError(f"lexicon line {line_no}: duplicate verb {verb!r}")
            entries[verb] = level
        return cls(entries=entries, version=version)

    @classmethod
    def load(cls, path: str | Path) -> "VerbLexicon":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def level_of(self, verb: str) -> BloomLevel | None:
        return self.entries.get(verb.lower())

    def lemmatize(self, token: str) -> str | None:
        """Return the lexicon base form ``token`` inflects from, if any."""
        for candidate in _lemma_candidates(token.lower()):
            if candidate in self.entries:
                return candidate
        return None

    def verbs_for_level(self, level: BloomLevel) -> list[str]:
        return sorted(v for v, lv in self.entries.items() if lv == level)


@lru_cache(maxsize=1)
def bundled_lexicon() -> VerbLexicon:
    """The versioned lexicon shipped with the package."""
    text = resources.files("arched").joinpath("data/bloom_verbs.tsv").read_text(encoding="utf-8")
    return VerbLexicon.from_text(text)


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens in order of appearance."""
    return _TOKEN_RE.findall(text.lower())


def classify_by_verb(text: str, lexicon: VerbLexicon | None = None) -> BloomLevel | None:
    """Classify an objective sentence by its first lexicon verb.

    Tokens are scanned in order; the first one whose lemma is in the lexicon
    decides the level (objectives lead with their operative verb). Returns
    ``None`` when no verb matches.
    """
    if not text or not text.strip():
        raise InvalidInputError("objective text must be non-empty")
    lex = lexicon or bundled_lexicon()
    for token in tokenize(text):
        lemma = lex.lemmatize(token)
        if lemma is not None:
            return lex.entries[lemma]
    return None


def verbs_for_level(level: BloomLevel, lexicon: VerbLexicon | None = None) -> list[str]:
    """All lexicon verbs for ``level``, sorted lexicographically."""
    lex = lexicon or bundled_lexicon()
    return lex.verbs_for_level(level)
