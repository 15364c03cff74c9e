import json
import re

import pytest

from arched.bloom import BloomLevel
from arched.cli import main
from arched.evalstats import corpus_to_csv, synthetic_corpus


@pytest.fixture()
def corpus_csv(tmp_path):
    path = tmp_path / "corpus.csv"
    path.write_bytes(corpus_to_csv(synthetic_corpus(n=60, seed=11)))
    return path


def write_scores(path, rows, header=("structural", "taxonomic", "measurable", "clarity", "technical")):
    lines = [",".join(header)]
    lines += [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def test_classify_rule_mode_deterministic(tmp_path, capsys):
    source = tmp_path / "objectives.csv"
    source.write_text(
        "id,text\n"
        "a,Students will list the phases of testing\n"
        "b,Students will design a small compiler\n"
        "c,Students will ponder quietly\n"
    )
    out1 = tmp_path / "out1.csv"
    out2 = tmp_path / "out2.csv"
    assert main(["classify", "--in", str(source), "--out", str(out1)]) == 0
    assert main(["classify", "--in", str(source), "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    rows = out1.read_text().splitlines()
    assert rows[0] == "id,text,expert_level,system_level"
    assert rows[1].endswith("Remember")
    assert rows[2].endswith("Create")
    assert rows[3].endswith("Understand")  # unclassifiable default


def test_classify_matches_domain_calls(tmp_path):
    from arched.analysis import rule_classify_level

    source = tmp_path / "objectives.csv"
    texts = [
        "Students will summarize the reading",
        "Students will critique a proof",
    ]
    source.write_text("id,text\n" + "\n".join(f"r{i},{t}" for i, t in enumerate(texts)) + "\n")
    out = tmp_path / "out.csv"
    assert main(["classify", "--in", str(source), "--out", str(out)]) == 0
    got = [line.rsplit(",", 1)[1] for line in out.read_text().splitlines()[1:]]
    expected = [rule_classify_level(t)[0].label for t in texts]
    assert got == expected


def test_eval_prints_kappa_line_and_writes_reproducible_json(tmp_path, corpus_csv, capsys):
    out1 = tmp_path / "run1.json"
    out2 = tmp_path / "run2.json"
    assert main(
        ["eval", "--in", str(corpus_csv), "--resamples", "300", "--seed", "42", "--out", str(out1)]
    ) == 0
    stdout = capsys.readouterr().out
    assert re.search(r"κw = \d\.\d{3} \(95% CI: \[\d\.\d{3}, \d\.\d{3}\]\)", stdout)
    assert "Remember" in stdout  # text confusion matrix includes level names
    assert main(
        ["eval", "--in", str(corpus_csv), "--resamples", "300", "--seed", "42", "--out", str(out2)]
    ) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_eval_fills_missing_system_labels(tmp_path, capsys):
    path = tmp_path / "partial.csv"
    path.write_text(
        "id,text,expert_level,system_level\n"
        "a,Students will list the parts,Remember,\n"
        "b,Students will explain the idea,Understand,\n"
        "c,Students will design a poster,Create,\n"
        "d,Students will judge the entries,Evaluate,\n"
    )
    assert main(["eval", "--in", str(path), "--resamples", "200", "--seed", "1"]) == 0
    assert "κw = 1.000" in capsys.readouterr().out


def test_compare_identical_files_not_significant(tmp_path, capsys):
    rows = [[4, 4, 4, 4, 4]] * 6
    a = write_scores(tmp_path / "a.csv", rows)
    b = write_scores(tmp_path / "b.csv", rows)
    assert main(["compare", "--a", str(a), "--b", str(b)]) == 0
    out = capsys.readouterr().out
    assert "No significant differences" in out
    assert "4.0±0.0" in out
    for line in out.splitlines():
        if line.startswith(("structural", "taxonomic")):
            adjusted = float(line.split()[-2])
            assert adjusted == 1.0


def test_compare_mixed_scores_table(tmp_path, capsys):
    a = write_scores(tmp_path / "a.csv", [[4, 5, 3, 4, 4], [5, 4, 4, 4, 3], [4, 4, 4, 5, 4]])
    b = write_scores(tmp_path / "b.csv", [[4, 4, 4, 4, 4], [5, 5, 3, 4, 4], [4, 4, 5, 4, 3]])
    assert main(["compare", "--a", str(a), "--b", str(b)]) == 0
    out = capsys.readouterr().out
    assert "Criterion" in out and "p(adj)" in out
    assert "exact" in out  # n1 + n2 = 6 <= 16


def test_compare_disjoint_columns_is_data_error(tmp_path, capsys):
    a = write_scores(tmp_path / "a.csv", [[1]], header=("x",))
    b = write_scores(tmp_path / "b.csv", [[1]], header=("y",))
    assert main(["compare", "--a", str(a), "--b", str(b)]) == 2


def test_generate_stub_writes_importable_csv(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("ARCHED_LLM_BACKEND", "stub")
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(
        json.dumps(
            {
                "grade_level": "graduate",
                "subject": "statistics",
                "topic": "resampling",
                "target_levels": ["Apply", "Evaluate"],
                "count_per_level": 2,
            }
        )
    )
    out = tmp_path / "set.csv"
    assert main(["generate", "--spec", str(spec_path), "--out", str(out)]) == 0
    from arched.objectives import import_set

    objset = import_set(out.read_bytes(), "csv")
    assert len(objset.objectives) == 4
    declared = {o.bloom_declared for o in objset.objectives}
    assert declared == {BloomLevel.APPLY, BloomLevel.EVALUATE}


def test_usage_errors_exit_1(capsys):
    assert main(["classify"]) == 1  # missing required options
    assert main(["no-such-command"]) == 1


def test_data_errors_exit_2(tmp_path):
    missing = tmp_path / "missing.csv"
    assert main(["eval", "--in", str(missing)]) == 2


def test_json_errors_flag_emits_machine_readable(tmp_path, capsys):
    missing = tmp_path / "missing.csv"
    code = main(["--json-errors", "eval", "--in", str(missing)])
    assert code == 2
    err = capsys.readouterr().err
    parsed = json.loads(err.strip())
    assert parsed["code"] == "invalid-input"


def test_help_exits_cleanly(capsys):
    assert main(["--help"]) == 0
    assert "classify" in capsys.readouterr().out
