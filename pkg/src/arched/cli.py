"""Command-line surface for batch and offline use.

Subcommands: classify objective files, run the agreement evaluation, compare
score files, one-shot generation, and serving the HTTP API. Every path is a
thin wrapper over the domain operations.

Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from pathlib import Path

import click

from .analysis import ObjectiveAnalyzer, format_mean_sd, rule_classify_level
from .bloom import BloomLevel
from .errors import (
    ArchedError,
    GatewayError,
    InvalidInputError,
    ServiceStartupError,
)
from .evalstats import (
    bonferroni,
    evaluate_corpus,
    format_confusion_text,
    format_kappa_line,
    load_corpus_csv,
    mann_whitney_u,
    render_evaluation,
)
from .gateway import LlmGateway, config_from_env
from .generation import ObjectiveGenerator
from .objectives import LearningObjective, Provenance, export_set, spec_from_dict

SIGNIFICANCE = 0.05


def _read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise InvalidInputError(f"cannot read {path}: {e}") from None


def _write_bytes(path: str, data: bytes) -> None:
    try:
        Path(path).write_bytes(data)
    except OSError as e:
        raise InvalidInputError(f"cannot write {path}: {e}") from None


@click.group(name="arched")
@click.option("--json-errors", is_flag=True, help="Emit machine-readable errors on stderr.")
@click.pass_context
def cli(ctx, json_errors):
    """Objective workflow tools: classify, eval, compare, generate, serve."""
    ctx.ensure_object(dict)
    ctx.obj["json_errors"] = json_errors


@cli.command()
@click.option("--in", "in_path", required=True, help="Input CSV (id,text[,expert_level]).")
@click.option("--out", "out_path", required=True, help="Output CSV with system_level filled.")
@click.option("--llm", is_flag=True, help="Classify with the configured model backend instead of the rule classifier.")
def classify(in_path, out_path, llm):
    """Append a system_level column to an objective file."""
    corpus_rows = _read_objective_rows(in_path)
    if llm:
        gateway = LlmGateway(config_from_env())
        analyzer = ObjectiveAnalyzer(gateway)

        def classify_text(text: str) -> BloomLevel:
            obj = LearningObjective(id="cli", text=text, provenance=Provenance.IMPORTED)
            level, _reasoning, _via = analyzer.classify_level(obj)
            return level

    else:

        def classify_text(text: str) -> BloomLevel:
            return rule_classify_level(text)[0]

    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["id", "text", "expert_level", "system_level"])
    for row_id, text, expert in corpus_rows:
        writer.writerow([row_id, text, expert, classify_text(text).label])
    _write_bytes(out_path, out.getvalue().encode("utf-8"))
    click.echo(f"classified {len(corpus_rows)} objectives -> {out_path}")


def _read_objective_rows(path: str) -> list[tuple[str, str, str]]:
    payload = _read_bytes(path)
    reader = csv.reader(io.StringIO(payload.decode("utf-8"), newline=""))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise InvalidInputError(f"{path} is empty") from None
    if "text" not in header:
        raise InvalidInputError(f"{path}: header must include a 'text' column")
    rows = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        values = dict(zip(header, row))
        text = (values.get("text") or "").strip()
        if not text:
            raise InvalidInputError(f"row {line_no}: text must be non-empty")
        rows.append(
            (
                (values.get("id") or "").strip() or f"item-{line_no}",
                text,
                (values.get("expert_level") or "").strip(),
            )
        )
    return rows


@cli.command(name="eval")
@click.option("--in", "in_path", required=True, help="Labeled corpus CSV (id,text,expert_level[,system_level]).")
@click.option("--resamples", default=10_000, show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--out", "out_path", default=None, help="Write the evaluation run as canonical JSON.")
@click.option("--llm", is_flag=True, help="Fill missing system labels with the model backend.")
def eval_cmd(in_path, resamples, seed, out_path, llm):
    """Agreement evaluation: confusion matrix, weighted kappa with CI."""
    corpus = load_corpus_csv(_read_bytes(in_path), description=Path(in_path).name)
    classify_fn = None
    if llm:
        gateway = LlmGateway(config_from_env())
        analyzer = ObjectiveAnalyzer(gateway)

        def classify_fn(text: str) -> BloomLevel:
            obj = LearningObjective(id="cli", text=text, provenance=Provenance.IMPORTED)
            return analyzer.classify_level(obj)[0]

    run = evaluate_corpus(corpus, classifier=classify_fn, resamples=resamples, seed=seed)
    click.echo(format_confusion_text(run.confusion))
    click.echo("")
    click.echo(format_kappa_line(run.kappa))
    share = "n/a (no disagreements)" if run.no_disagreements else f"{run.adjacent_confusion_share:.3f}"
    click.echo(f"Adjacent-confusion share: {share}")
    if out_path:
        _write_bytes(out_path, render_evaluation(run, "json"))
        click.echo(f"wrote {out_path}")


def _read_score_table(path: str) -> dict[str, list[float]]:
    payload = _read_bytes(path)
    reader = csv.reader(io.StringIO(payload.decode("utf-8"), newline=""))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise InvalidInputError(f"{path} is empty") from None
    if not header:
        raise InvalidInputError(f"{path}: missing header")
    table: dict[str, list[float]] = {name: [] for name in header}
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise InvalidInputError(f"{path} row {line_no}: expected {len(header)} columns")
        for name, cell in zip(header, row):
            try:
                table[name].append(float(cell))
            except ValueError:
                raise InvalidInputError(
                    f"{path} row {line_no}: column {name!r} is not numeric"
                ) from None
    if not next(iter(table.values()), []):
        raise InvalidInputError(f"{path}: no score rows")
    return table


@cli.command()
@click.option("--a", "a_path", required=True, help="First score CSV (criterion columns).")
@click.option("--b", "b_path", required=True, help="Second score CSV (same columns).")
@click.option("--m", "m_override", default=None, type=int, help="Bonferroni family size (default: number of shared criteria).")
def compare(a_path, b_path, m_override):
    """Per-criterion rank comparison of two score files."""
    table_a = _read_score_table(a_path)
    table_b = _read_score_table(b_path)
    criteria = [c for c in table_a if c in table_b]
    if not criteria:
        raise InvalidInputError("the two files share no criterion columns")

    results = [mann_whitney_u(table_a[c], table_b[c]) for c in criteria]
    adjusted = bonferroni([r.p_two_sided for r in results], m=m_override)

    def mean_sd(values: list[float]) -> str:
        import statistics

        mean = statistics.fmean(values)
        sd = statistics.stdev(values) if len(values) >= 2 else 0.0
        return format_mean_sd(mean, sd)

    header = f"{'Criterion':<14} {'A':>10} {'B':>10} {'U':>8} {'p':>8} {'p(adj)':>8}  method"
    click.echo(header)
    click.echo("-" * len(header))
    for criterion, result, p_adj in zip(criteria, results, adjusted):
        click.echo(
            f"{criterion:<14} {mean_sd(table_a[criterion]):>10} {mean_sd(table_b[criterion]):>10} "
            f"{result.u:>8.1f} {result.p_two_sided:>8.3f} {p_adj:>8.3f}  {result.method}"
        )
    significant = [c for c, p in zip(criteria, adjusted) if p <= SIGNIFICANCE]
    if significant:
        click.echo(f"Significant differences (adjusted p <= {SIGNIFICANCE}): {', '.join(significant)}")
    else:
        click.echo(f"No significant differences (all adjusted p > {SIGNIFICANCE}).")


@cli.command()
@click.option("--spec", "spec_path", required=True, help="Generation spec JSON file.")
@click.option("--out", "out_path", required=True, help="Output objective CSV.")
@click.option("--json", "as_json", is_flag=True, help="Write JSON instead of CSV.")
def generate(spec_path, out_path, as_json):
    """One-shot generation batch from a spec file (stub or live backend)."""
    try:
        raw = json.loads(_read_bytes(spec_path).decode("utf-8"))
    except ValueError as e:
        raise InvalidInputError(f"{spec_path} is not valid JSON: {e}") from None
    spec = spec_from_dict(raw)
    gateway = LlmGateway(config_from_env())
    batch = ObjectiveGenerator(gateway).generate(spec)
    from .canonical import utc_now
    from .objectives import ObjectiveSet

    objset = ObjectiveSet(
        id="generated",
        title=f"{spec.subject}: {spec.topic}",
        objectives=list(batch.objectives),
        created_at=utc_now(),
        source="cli-generate",
    )
    _write_bytes(out_path, export_set(objset, "json" if as_json else "csv"))
    click.echo(f"generated {len(batch.objectives)} objectives -> {out_path}")
    for note in batch.audit_notes:
        click.echo(f"note: {note}")


@cli.command()
@click.option("--port", default=None, type=int, help="Listen port.")
@click.option("--host", default=None, help="Bind address (default loopback).")
@click.option("--data", "data_dir", default=None, help="Session data directory.")
@click.option("--static", "static_dir", default=None, help="Directory of built UI assets to serve.")
@click.option("--config", "config_path", default=None, help="JSON config file.")
def serve(port, host, data_dir, static_dir, config_path):
    """Run the HTTP API (and the UI, when built assets are provided)."""
    from .service import load_service_config
    from .service import serve as run_service

    config = load_service_config(
        config_path,
        overrides={"port": port, "host": host, "data_dir": data_dir, "static_dir": static_dir},
    )
    run_service(config)


def main(argv: list[str] | None = None) -> int:
    args = list(sys.argv[1:] if argv is None else argv)
    json_errors = "--json-errors" in args

    def emit(code: str, message: str, detail=None) -> None:
        if json_errors:
            sys.stderr.write(
                json.dumps({"code": code, "message": message, "detail": detail}) + "\n"
            )
        else:
            sys.stderr.write(f"error ({code}): {message}\n")

    try:
        cli.main(args=args, standalone_mode=False)
        return 0
    except click.exceptions.Exit as e:
        return int(e.exit_code)
    except click.UsageError as e:
        emit("usage", e.format_message())
        return 1
    except click.ClickException as e:
        emit("usage", e.format_message())
        return 1
    except click.exceptions.Abort:
        emit("usage", "aborted")
        return 1
    except ServiceStartupError as e:
        emit(e.code, e.message, e.detail)
        return 3
    except GatewayError as e:
        emit(e.code, e.message, e.detail)
        return 3
    except ArchedError as e:
        emit(e.code, e.message, e.detail)
        return 2


if __name__ == "__main__":
    sys.exit(main())
