import csv
import io
import json
import math
import sys
from pathlib import Path

import pytest

from sktscore.cli import main
from sktscore.norms import example_norms_path
from sktscore.simulate import SimConfig, cohort_to_records, generate_cohort
from sktscore.model import Source

NORMS = str(example_norms_path())


@pytest.fixture(scope="module")
def records(tmp_path_factory):
    d = tmp_path_factory.mktemp("fixture")
    cohort = generate_cohort(SimConfig(n_subjects=24, seed=11))
    p = d / "records.json"
    p.write_text(json.dumps({"subjects": cohort_to_records(cohort, Source.ASR)}))
    return p


def tree(root: Path) -> dict:
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


def score(records, out, *extra, env=None):
    return main(["score", "--records", str(records), "--norms", NORMS,
                 "--allow-example-norms", "--out", str(out), *extra], env or {})


def test_score_writes_results_and_is_deterministic(records, tmp_path):
    out = tmp_path / "o"
    assert score(records, out) == 0
    first = tree(out)
    assert "summary.csv" in first and "manifest.json" in first
    assert len([k for k in first if k.startswith("results/")]) == 24
    assert score(records, out) == 0
    assert tree(out) == first
    par = tmp_path / "p"
    assert score(records, par, "--jobs", "8") == 0
    both = {k: v for k, v in tree(par).items() if k != "manifest.json"}
    assert both == {k: v for k, v in first.items() if k != "manifest.json"}


def test_manifest_contents(records, tmp_path):
    score(records, tmp_path)
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["command"] == "score" and m["tool_version"]
    assert str(records) in m["inputs"] and len(m["config_hash"]) == 64
    assert "summary.csv" in m["outputs"]


def test_example_norms_refused(records, tmp_path, capsys):
    rc = main(["score", "--records", str(records), "--norms", NORMS, "--out", str(tmp_path)], {})
    assert rc == 2
    assert "example" in capsys.readouterr().err


def test_missing_norm_cell_exit_2(records, tmp_path):
    table = json.loads(Path(NORMS).read_text())
    table["age_bands"] = [{"label": "18-20", "min": 18, "max": 20}]
    table["cutoffs"] = {s: {"18-20": v[next(iter(v))]} for s, v in table["cutoffs"].items()}
    table["example"] = False
    p = tmp_path / "narrow.json"
    p.write_text(json.dumps(table))
    rc = main(["score", "--records", str(records), "--norms", str(p), "--out",
               str(tmp_path / "o")], {})
    assert rc == 2


def test_malformed_json_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"subjects": [\n  {"subject_id": 1,,}\n]}')
    assert score(bad, tmp_path / "o") == 1
    assert "bad.json:2:" in capsys.readouterr().err


def test_validation_failure_exit_1(records, tmp_path):
    data = json.loads(records.read_text())
    tok = data["subjects"][0]["subtests"][0]["transcript"]["tokens"][0]
    tok["end_s"] = tok["start_s"] - 1
    p = tmp_path / "r.json"
    p.write_text(json.dumps(data))
    assert score(p, tmp_path / "o") == 1


def test_precedence_cli_over_env_over_file(records, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"threshold": 0.5, "s6_mode": "last_word"}))

    def used(*extra, env=None):
        out = tmp_path / "o"
        assert score(records, out, "--config", str(cfg), *extra, env=env) == 0
        return json.loads((out / "manifest.json").read_text())["options"]

    assert used()["threshold"] == 0.5
    assert used(env={"SKT_THRESHOLD": "0.7"})["threshold"] == 0.7
    opts = used("--threshold", "0.95", env={"SKT_THRESHOLD": "0.7"})
    assert opts["threshold"] == 0.95 and opts["s6_mode"] == "last_word"


def test_json_stdout(records, tmp_path, capsys):
    assert score(records, tmp_path, "--json") == 0
    data = json.loads(capsys.readouterr().out)
    assert len(data["subjects"]) == 24


def test_negation_command_failure_exit_3(records, tmp_path):
    fail = tmp_path / "fail.py"
    fail.write_text("import sys\nsys.exit(1)\n")
    env = {"SKT_NEGATION_FILTER": "command", "SKT_NEGATION_CMD": f"{sys.executable} {fail}"}
    assert score(records, tmp_path / "o", env=env) == 3


# --- evaluate on five hand-checked subjects ---------------------------------

AUTO = {"a": 1, "b": 2, "c": 3, "d": 4, "e": 6}
EXPERT = {"a": 1, "b": 3, "c": 2, "d": 5, "e": 6}
TOTALS = {"a": 2, "b": 3, "c": 10, "d": 15, "e": 20}


@pytest.fixture
def five(tmp_path):
    res = tmp_path / "auto" / "results"
    res.mkdir(parents=True)
    for sid, v in AUTO.items():
        (res / f"{sid}.json").write_text(json.dumps(
            {"subject_id": sid, "raw_scores": {"S2": {"value": v}}}))
    expert = tmp_path / "expert.csv"
    with open(expert, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject_id", "subtest", "expert_raw", "expert_total"])
        for sid in AUTO:
            w.writerow([sid, "S2", EXPERT[sid], TOTALS[sid]])
    return tmp_path


def test_evaluate_matches_hand_computation(five, capsys):
    rc = main(["evaluate", "--auto", str(five / "auto"), "--expert", str(five / "expert.csv")], {})
    assert rc == 0
    rows = {(r["group"], r["subtest"]): r
            for r in csv.DictReader(io.StringIO(capsys.readouterr().out))}
    # deviations from the means 3.2 / 3.4, and 13/3 / 13/3 for DEM
    pooled = 14.6 / math.sqrt(14.8 * 17.2)
    dem = 51 / math.sqrt(42 * 78)
    assert float(rows[("All", "S2")]["pearson_asr"]) == pytest.approx(pooled, abs=1e-6)
    assert float(rows[("DEM", "S2")]["pearson_asr"]) == pytest.approx(dem, abs=1e-6)
    assert float(rows[("NCI", "S2")]["pearson_asr"]) == pytest.approx(1.0)
    assert ("MCI", "S2") not in rows


def test_evaluate_markdown_and_group_file(five, capsys):
    groups = five / "groups.json"
    groups.write_text(json.dumps({"a": "NCI", "b": "NCI", "c": "NCI", "d": "DEM", "e": "DEM"}))
    rc = main(["evaluate", "--auto", str(five / "auto"), "--expert", str(five / "expert.csv"),
               "--groups", str(groups), "--format", "md"], {})
    assert rc == 0
    out = capsys.readouterr().out
    assert "| Subtest |" in out and "NCI (n=3)" in out


def test_evaluate_without_overlap(five):
    other = five / "other.csv"
    other.write_text("subject_id,subtest,expert_raw\nz,S2,1\n")
    assert main(["evaluate", "--auto", str(five / "auto"), "--expert", str(other)], {}) == 1


# --- simulate / normalize / transcribe ----------------------------------------

def test_simulate_missing_config(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.json"), "--out",
                 str(tmp_path / "o")], {}) == 1


def test_simulate_small_config_is_reproducible(tmp_path):
    cfg = tmp_path / "sim.json"
    cfg.write_text(json.dumps({"n_subjects": 30}))
    for out in ("a", "b"):
        assert main(["simulate", "--config", str(cfg), "--seed", "5", "--out",
                     str(tmp_path / out)], {}) == 0
    assert tree(tmp_path / "a").keys() == tree(tmp_path / "b").keys()
    a = {k: v for k, v in tree(tmp_path / "a").items() if k != "manifest.json"}
    b = {k: v for k, v in tree(tmp_path / "b").items() if k != "manifest.json"}
    assert a == b
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert {"pooled_r", "group_r"} <= set(summary["pitfalls"])
    assert "word_count" in summary["confound_accuracy"]


def test_normalize(tmp_path, capsys):
    t = tmp_path / "t.json"
    t.write_text(json.dumps({"tokens": [{"text": "zwo", "start_s": 0, "end_s": 1}]}))
    assert main(["normalize", str(t)], {}) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["transcript"]["tokens"][0]["text"] == "2"


FAKE_ASR = """import json, sys
req = json.load(sys.stdin)
ref = req["audio_chunk_ref"]
if ref["chunk"] == int(sys.argv[1]):
    sys.stderr.write("model crashed")
    sys.exit(2)
print(json.dumps({"tokens": [{"text": "Hut", "start_s": 0.1, "end_s": 0.4}]}))
"""


def test_transcribe_with_command_client(tmp_path, capsys):
    script = tmp_path / "asr.py"
    script.write_text(FAKE_ASR)
    segs = tmp_path / "vad.json"
    segs.write_text(json.dumps([{"start_s": 1.0, "end_s": 2.0}, {"start_s": 5.0, "end_s": 6.0}]))
    args = ["transcribe", "--segments", str(segs), "--audio", "a.wav", "--strategy", "chunked"]
    env = {"SKT_ASR_CMD": f"{sys.executable} {script} 0"}
    assert main(args, env) == 0
    out = json.loads(capsys.readouterr().out)
    assert [t["start_s"] for t in out["transcript"]["tokens"]] == [0.85, 4.85]
    env = {"SKT_ASR_CMD": f"{sys.executable} {script} 2"}
    assert main(args, env) == 3
    assert "chunk 2 of 2" in capsys.readouterr().err
    assert main(args, {}) == 1
