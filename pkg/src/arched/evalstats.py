"""Agreement statistics over the six-level ordinal scale.

Confusion matrices, linearly weighted Cohen's kappa with a percentile
bootstrap CI, exact/normal Mann-Whitney U tests with midranks and tie
correction, Bonferroni adjustment, and corpus-level evaluation runs.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import random
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .bloom import AGREEMENT_WEIGHTS, LEVELS, BloomLevel, verbs_for_level
from .canonical import canonical_json_bytes
from .errors import (
    DegenerateMarginalsError,
    InvalidInputError,
    UnstableEstimateError,
)

N_LEVELS = len(LEVELS)

# weight_matrix[i][j] = agreement credit between levels i and j
_W = np.array(
    [[AGREEMENT_WEIGHTS[abs(i - j)] for j in range(N_LEVELS)] for i in range(N_LEVELS)]
)

_DEGENERATE_EPS = 1e-12


@dataclass(frozen=True)
class CorpusItem:
    objective_id: str
    text: str
    expert_level: BloomLevel
    system_level: BloomLevel | None = None


@dataclass(frozen=True)
class LabeledCorpus:
    items: tuple[CorpusItem, ...]
    description: str = ""

    def __post_init__(self):
        ids = [it.objective_id for it in self.items]
        if len(ids) != len(set(ids)):
            raise InvalidInputError("corpus item ids must be unique")


@dataclass(frozen=True)
class ConfusionMatrix:
    """6x6 tally; rows are expert levels, columns are system levels."""

    counts: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.counts) != N_LEVELS or any(len(r) != N_LEVELS for r in self.counts):
            raise InvalidInputError("confusion matrix must be 6x6")
        if any(c < 0 for row in self.counts for c in row):
            raise InvalidInputError("confusion counts must be non-negative")

    @property
    def n(self) -> int:
        return sum(sum(row) for row in self.counts)

    def as_array(self) -> np.ndarray:
        return np.array(self.counts, dtype=float)

    @classmethod
    def from_array(cls, arr) -> "ConfusionMatrix":
        return cls(counts=tuple(tuple(int(c) for c in row) for row in arr))


class KappaComponents(NamedTuple):
    kappa: float
    observed_agreement: float
    expected_agreement: float


@dataclass(frozen=True)
class KappaResult:
    kappa: float
    observed_agreement: float
    expected_agreement: float
    ci_low: float
    ci_high: float
    bootstrap_resamples: int
    seed: int
    skipped_resamples: int = 0


@dataclass(frozen=True)
class MwuResult:
    u: float
    p_two_sided: float
    method: str  # "exact" | "normal-approx"
    n1: int
    n2: int


def confusion(corpus: LabeledCorpus) -> ConfusionMatrix:
    """Tally expert vs system labels into a 6x6 matrix."""
    counts = [[0] * N_LEVELS for _ in range(N_LEVELS)]
    for item in corpus.items:
        if item.system_level is None:
            raise InvalidInputError(f"item {item.objective_id!r} has no system level")
        counts[int(item.expert_level)][int(item.system_level)] += 1
    return ConfusionMatrix(counts=tuple(tuple(row) for row in counts))


def _kappa_from_array(c: np.ndarray) -> KappaComponents | None:
    """Weighted kappa from a counts array; None when marginals are degenerate."""
    n = c.sum()
    if n <= 0:
        raise InvalidInputError("confusion matrix is empty")
    p_o = float((_W * c).sum() / n)
    rows = c.sum(axis=1)
    cols = c.sum(axis=0)
    p_e = float((_W * np.outer(rows, cols)).sum() / (n * n))
    if 1.0 - p_e < _DEGENERATE_EPS:
        return None
    return KappaComponents((p_o - p_e) / (1.0 - p_e), p_o, p_e)


def weighted_kappa(m: ConfusionMatrix) -> KappaComponents:
    """Linearly weighted Cohen's kappa for an ordinal confusion matrix.

    Observed and expected agreement are weighted by the partial-credit
    scheme (1.0 on the diagonal, minus 0.2 per level of distance).
    """
    components = _kappa_from_array(m.as_array())
    if components is None:
        raise DegenerateMarginalsError(
            "both raters are constant on a single level; kappa is undefined"
        )
    return components


def kappa_ci(
    corpus: LabeledCorpus, resamples: int = 10_000, seed: int = 42
) -> KappaResult:
    """Weighted kappa with a nonparametric bootstrap 95% CI.

    Items are resampled with replacement; degenerate resamples are skipped
    and counted. CI bounds are the 2.5th/97.5th percentiles under the
    linear-interpolation percentile definition. Deterministic given seed:
    each resample draws from its own PRNG stream keyed by (seed, index).
    """
    items = corpus.items
    if len(items) < 2:
        raise InvalidInputError("kappa CI requires at least two items")
    if any(it.system_level is None for it in items):
        raise InvalidInputError("kappa CI requires a fully labeled corpus")
    if len({it.expert_level for it in items}) < 2 or len({it.system_level for it in items}) < 2:
        raise InvalidInputError("kappa CI requires each rater to use at least two levels")

    point = weighted_kappa(confusion(corpus))

    n = len(items)
    pair_index = np.array(
        [int(it.expert_level) * N_LEVELS + int(it.system_level) for it in items]
    )
    kappas = np.empty(resamples)
    skipped = 0
    filled = 0
    for r in range(resamples):
        rng = np.random.default_rng((seed, r))
        draw = rng.integers(0, n, size=n)
        cells = np.bincount(pair_index[draw], minlength=N_LEVELS * N_LEVELS)
        comps = _kappa_from_array(cells.reshape(N_LEVELS, N_LEVELS))
        if comps is None:
            skipped += 1
            continue
        kappas[filled] = comps.kappa
        filled += 1
    if skipped > resamples / 2:
        raise UnstableEstimateError(
            f"{skipped}/{resamples} bootstrap resamples were degenerate"
        )
    lo, hi = np.percentile(kappas[:filled], [2.5, 97.5])
    return KappaResult(
        kappa=point.kappa,
        observed_agreement=point.observed_agreement,
        expected_agreement=point.expected_agreement,
        ci_low=float(lo),
        ci_high=float(hi),
        bootstrap_resamples=resamples,
        seed=seed,
        skipped_resamples=skipped,
    )


# --- Mann-Whitney U -----------------------------------------------------------

EXACT_SIZE_LIMIT = 16  # full enumeration up to C(16, 8) = 12870 assignments


def _doubled_midranks(pooled: list[float]) -> list[int]:
    """Midranks of the pooled sample, doubled so ties stay in exact integers."""
    order = sorted(range(len(pooled)), key=lambda i: pooled[i])
    doubled = [0] * len(pooled)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        # ranks i+1 .. j+1 share the midrank (i + j + 2) / 2
        for k in range(i, j + 1):
            doubled[order[k]] = i + j + 2
        i = j + 1
    return doubled


def _exact_two_sided_p(rank2: list[int], n1: int, u1_doubled: int) -> float:
    """Doubled-smaller-tail exact p over all label assignments."""
    n = len(rank2)
    offset = n1 * (n1 + 1)
    at_most = 0
    at_least = 0
    total = 0
    for combo in itertools.combinations(range(n), n1):
        u1x = sum(rank2[i] for i in combo) - offset  # 2 * U1 for this assignment
        total += 1
        if u1x <= u1_doubled:
            at_most += 1
        if u1x >= u1_doubled:
            at_least += 1
    return min(1.0, 2.0 * min(at_most, at_least) / total)


def _normal_two_sided_p(rank2: list[int], n1: int, n2: int, u: float) -> float:
    """Normal approximation with tie-corrected variance and continuity correction."""
    n = n1 + n2
    mean = n1 * n2 / 2.0
    tie_term = 0.0
    for _, group in itertools.groupby(sorted(rank2)):
        t = len(list(group))
        tie_term += t**3 - t
    variance = (n1 * n2 / 12.0) * ((n + 1) - tie_term / (n * (n - 1)))
    if variance <= 0:
        return 1.0  # every pooled value identical
    z = (u - mean + 0.5) / math.sqrt(variance)  # u = min(U1, U2) <= mean
    p = 2.0 * 0.5 * math.erfc(-z / math.sqrt(2.0))
    return min(1.0, max(0.0, p))


def mann_whitney_u(a: list[float], b: list[float], method: str = "auto") -> MwuResult:
    """Two-sided Mann-Whitney U test with midranks for ties.

    Exact by full enumeration of label assignments when n1 + n2 <= 16 (or
    when forced), otherwise a tie-corrected normal approximation with
    continuity correction.
    """
    if not a or not b:
        raise InvalidInputError("both samples must be non-empty")
    if method not in ("auto", "exact", "normal-approx"):
        raise InvalidInputError(f"unknown method: {method!r}")
    n1, n2 = len(a), len(b)
    pooled = [float(x) for x in a] + [float(x) for x in b]
    if any(math.isnan(x) or math.isinf(x) for x in pooled):
        raise InvalidInputError("samples must contain finite values")
    rank2 = _doubled_midranks(pooled)
    u1_doubled = sum(rank2[:n1]) - n1 * (n1 + 1)
    u2_doubled = 2 * n1 * n2 - u1_doubled
    u = min(u1_doubled, u2_doubled) / 2.0

    if method == "exact" or (method == "auto" and n1 + n2 <= EXACT_SIZE_LIMIT):
        if n1 + n2 > 22:  # C(22, 11) is the last desk-scale enumeration
            raise InvalidInputError("exact method is limited to n1 + n2 <= 22")
        p = _exact_two_sided_p(rank2, n1, u1_doubled)
        chosen = "exact"
    else:
        p = _normal_two_sided_p(rank2, n1, n2, u)
        chosen = "normal-approx"
    return MwuResult(u=u, p_two_sided=p, method=chosen, n1=n1, n2=n2)


def bonferroni(p_values: list[float], m: int | None = None) -> list[float]:
    """Bonferroni adjustment: min(1, p * m), m defaulting to the family size."""
    if m is None:
        m = len(p_values)
    if m < len(p_values):
        raise InvalidInputError("m must be at least the number of p-values")
    for p in p_values:
        if not (0.0 <= p <= 1.0):
            raise InvalidInputError(f"p-value out of range: {p}")
    return [min(1.0, p * m) for p in p_values]


# --- corpus-level evaluation ---------------------------------------------------

@dataclass(frozen=True)
class EvaluationRun:
    confusion: ConfusionMatrix
    kappa: KappaResult
    per_level_recall: tuple[float | None, ...]
    adjacent_confusion_share: float
    no_disagreements: bool
    n: int
    description: str = ""


def evaluate_corpus(
    corpus: LabeledCorpus,
    classifier: Callable[[str], BloomLevel] | None = None,
    resamples: int = 10_000,
    seed: int = 42,
) -> EvaluationRun:
    """Full agreement evaluation of a labeled corpus.

    Items missing a system label are classified first (with ``classifier``,
    defaulting to the analysis engine's rule fallback). Reports the confusion
    matrix, kappa with CI, per-level recall, and the share of disagreement
    mass sitting at ordinal distance 1.
    """
    items = list(corpus.items)
    if any(it.system_level is None for it in items):
        if classifier is None:
            from .analysis import rule_classify_level

            classifier = lambda text: rule_classify_level(text)[0]  # noqa: E731
        items = [
            it
            if it.system_level is not None
            else CorpusItem(it.objective_id, it.text, it.expert_level, classifier(it.text))
            for it in items
        ]
    labeled = LabeledCorpus(items=tuple(items), description=corpus.description)

    matrix = confusion(labeled)
    kappa = kappa_ci(labeled, resamples=resamples, seed=seed)

    arr = matrix.as_array()
    recalls: list[float | None] = []
    for i in range(N_LEVELS):
        row_total = arr[i].sum()
        recalls.append(float(arr[i][i] / row_total) if row_total > 0 else None)

    off_diagonal = float(arr.sum() - np.trace(arr))
    if off_diagonal == 0:
        share, clean = 0.0, True
    else:
        adjacent = sum(
            arr[i][j] for i in range(N_LEVELS) for j in range(N_LEVELS) if abs(i - j) == 1
        )
        share, clean = float(adjacent / off_diagonal), False

    return EvaluationRun(
        confusion=matrix,
        kappa=kappa,
        per_level_recall=tuple(recalls),
        adjacent_confusion_share=share,
        no_disagreements=clean,
        n=matrix.n,
        description=corpus.description,
    )


def format_kappa_line(result: KappaResult) -> str:
    """Reporting string, e.g. ``κw = 0.834 (95% CI: [0.771, 0.891])``."""
    return (
        f"κw = {result.kappa:.3f} "
        f"(95% CI: [{result.ci_low:.3f}, {result.ci_high:.3f}])"
    )


def format_confusion_text(m: ConfusionMatrix) -> str:
    """Plain-text confusion grid: rows expert, columns system."""
    labels = [lv.label for lv in LEVELS]
    width = max(len(s) for s in labels) + 2
    header = " " * width + "".join(f"{s:>{width}}" for s in labels)
    lines = [header]
    for i, row in enumerate(m.counts):
        lines.append(f"{labels[i]:>{width}}" + "".join(f"{c:>{width}}" for c in row))
    return "\n".join(lines)


def evaluation_to_dict(run: EvaluationRun) -> dict:
    return {
        "description": run.description,
        "n": run.n,
        "confusion": [list(row) for row in run.confusion.counts],
        "kappa": {
            "kappa": run.kappa.kappa,
            "observed_agreement": run.kappa.observed_agreement,
            "expected_agreement": run.kappa.expected_agreement,
            "ci_low": run.kappa.ci_low,
            "ci_high": run.kappa.ci_high,
            "bootstrap_resamples": run.kappa.bootstrap_resamples,
            "seed": run.kappa.seed,
            "skipped_resamples": run.kappa.skipped_resamples,
        },
        "per_level_recall": {
            lv.label: run.per_level_recall[int(lv)] for lv in LEVELS
        },
        "adjacent_confusion_share": run.adjacent_confusion_share,
        "no_disagreements": run.no_disagreements,
    }


def render_evaluation(run: EvaluationRun, format: str) -> bytes:
    """Canonical JSON or markdown summary of an evaluation run."""
    if format == "json":
        return canonical_json_bytes(evaluation_to_dict(run))
    if format == "markdown":
        lines = ["# Agreement evaluation", ""]
        if run.description:
            lines += [run.description, ""]
        lines += [f"Items: {run.n}", "", "## Confusion matrix (rows expert, columns system)", ""]
        header = "| | " + " | ".join(lv.label for lv in LEVELS) + " |"
        sep = "|" + "---|" * (N_LEVELS + 1)
        lines += [header, sep]
        for i, row in enumerate(run.confusion.counts):
            lines.append(f"| {LEVELS[i].label} | " + " | ".join(str(c) for c in row) + " |")
        lines += ["", f"**{format_kappa_line(run.kappa)}**", ""]
        lines += ["## Per-level recall", ""]
        for lv in LEVELS:
            r = run.per_level_recall[int(lv)]
            lines.append(f"- {lv.label}: " + (f"{r:.3f}" if r is not None else "n/a"))
        share = (
            "no disagreements"
            if run.no_disagreements
            else f"{run.adjacent_confusion_share:.3f}"
        )
        lines += ["", f"Adjacent-confusion share: {share}", ""]
        return "\n".join(lines).encode("utf-8")
    raise InvalidInputError(f"unsupported render format: {format!r}")


# --- corpus file I/O -----------------------------------------------------------

CORPUS_COLUMNS = ("id", "text", "expert_level", "system_level")


def load_corpus_csv(payload: bytes, description: str = "") -> LabeledCorpus:
    """Parse the labeled-corpus CSV (``id,text,expert_level,system_level``)."""
    if not payload or not payload.strip():
        raise InvalidInputError("corpus payload is empty")
    reader = csv.reader(io.StringIO(payload.decode("utf-8"), newline=""))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise InvalidInputError("corpus payload is empty") from None
    required = {"id", "text", "expert_level"}
    if not required.issubset(header):
        raise InvalidInputError(f"corpus CSV must include columns {sorted(required)}")
    items = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        values = dict(zip(header, row))
        text = (values.get("text") or "").strip()
        if not text:
            raise InvalidInputError(f"row {line_no}: text must be non-empty")
        raw_expert = (values.get("expert_level") or "").strip()
        if not raw_expert:
            raise InvalidInputError(f"row {line_no}: expert_level must be non-empty")
        raw_system = (values.get("system_level") or "").strip()
        items.append(
            CorpusItem(
                objective_id=(values.get("id") or "").strip() or f"item-{line_no}",
                text=text,
                expert_level=BloomLevel.parse(raw_expert),
                system_level=BloomLevel.parse(raw_system) if raw_system else None,
            )
        )
    return LabeledCorpus(items=tuple(items), description=description)


def corpus_to_csv(corpus: LabeledCorpus) -> bytes:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CORPUS_COLUMNS)
    for it in corpus.items:
        writer.writerow(
            [
                it.objective_id,
                it.text,
                it.expert_level.label,
                it.system_level.label if it.system_level is not None else "",
            ]
        )
    return out.getvalue().encode("utf-8")


def synthetic_corpus(
    n: int = 120, diagonal_mass: float = 0.85, seed: int = 42
) -> LabeledCorpus:
    """Seeded synthetic corpus with controlled diagonal agreement.

    Expert labels are uniform over the six levels; the system label matches
    with probability ``diagonal_mass`` and otherwise lands on another level
    with probability proportional to its agreement weight, so near misses
    dominate the noise.
    """
    rng = random.Random(seed)
    items = []
    for i in range(n):
        expert = rng.choice(LEVELS)
        if rng.random() < diagonal_mass:
            system = expert
        else:
            others = [lv for lv in LEVELS if lv != expert]
            weights = [AGREEMENT_WEIGHTS[abs(int(lv) - int(expert))] for lv in others]
            system = rng.choices(others, weights=weights, k=1)[0]
        verb_pool = verbs_for_level(expert)
        verb = verb_pool[i % len(verb_pool)]
        items.append(
            CorpusItem(
                objective_id=f"synth-{i:03d}",
                text=f"Students will {verb} concept {i} of the course material",
                expert_level=expert,
                system_level=system,
            )
        )
    return LabeledCorpus(
        items=tuple(items),
        description=f"synthetic corpus (n={n}, diagonal={diagonal_mass}, seed={seed})",
    )
