from __future__ import annotations

import json

import pytest

from peplead.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from peplead.config import ConfigError, config_from_dict, load_config
from peplead.pretrain_data import TrainingPair, unmask
from peplead.runlog import RunLog, read_log, validate_record, without_time

from conftest import DATA, RBP


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def write_config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def test_mask_example_string(capsys):
    assert run(capsys, "mask", "A|B|C|D", "--positions", "0,2,3") == (EXIT_OK, "?|B|?|?\n", "")


def test_shift_offset_zero_echoes(capsys):
    code, out, _ = run(capsys, "shift", RBP, "--offset", "0")
    assert code == EXIT_OK and out.strip() == RBP


def test_bad_ring_closure_exit(capsys):
    code, _, err = run(capsys, "tokenize", "N1CC(=O)|NCC(=O)")
    assert code == EXIT_RUNTIME and "'1'" in err


def test_tokenize_json(capsys):
    code, out, _ = run(capsys, "tokenize", "NCC(=O)", "--json")
    assert code == EXIT_OK and [t["text"] for t in json.loads(out)] == ["N", "C", "C", "(", "=", "O", ")"]


def test_tokenize_file(capsys, tmp_path):
    f = tmp_path / "p.chk"
    f.write_text("# comment\nNC(=O)|NC\n")
    assert run(capsys, "tokenize", "--file", str(f))[1] == "N C ( = O ) | N C\n"


def test_score_all_pass(capsys, tmp_path):
    cfg = write_config(
        tmp_path,
        {
            "scoring": {
                "components": [
                    {"name": "ring", "source": "max_ring", "transform": {"kind": "step-max", "threshold": 30}},
                    {"name": "alerts", "source": "alerts", "transform": {"kind": "boolean-pass", "expect": False}},
                ],
                "alerts": str(DATA / "alerts_demo.json"),
            }
        },
    )
    code, out, _ = run(capsys, "score", RBP, "--config", cfg)
    doc = json.loads(out)
    assert code == EXIT_OK and doc["aggregate"] == 1.0 and doc["peptide"] == RBP


def test_score_alert_near_floor(capsys):
    peroxide = "N[C@@H](COO)C(=O)|NCC(=O)"
    code, out, _ = run(capsys, "score", peroxide, "--config", "builtin:score_demo")
    doc = json.loads(out)
    alert = [c for c in doc["components"] if c["name"] == "structural_alerts"][0]
    assert code == EXIT_OK and alert["score"] == 1e-3
    assert doc["aggregate"] <= 1e-3 ** (1 / 6)


def test_score_text_format(capsys):
    code, out, _ = run(capsys, "score", "--config", "builtin:score_demo", "--format", "text")
    assert code == EXIT_OK and "aggregate" in out and "permeability" in out


def test_config_errors_exit_two(capsys, tmp_path):
    assert run(capsys, "score", "A|B", "--config", write_config(tmp_path, {"scoring": {"components": []}, "colour": 1}))[0] == EXIT_CONFIG
    assert run(capsys, "score", "A|B", "--config", str(tmp_path / "missing.json"))[0] == EXIT_CONFIG
    assert run(capsys, "score", "A|B", "--config", "builtin:nope")[0] == EXIT_CONFIG
    assert run(capsys, "route", "--config", write_config(tmp_path, {"peptide_file": "gone.chk"}, "b.json"))[0] == EXIT_CONFIG
    assert run(capsys, "route")[0] == EXIT_CONFIG


def test_config_rejects_unknown_section_keys():
    with pytest.raises(ConfigError):
        config_from_dict({"router": {"K": 2}})
    with pytest.raises(ConfigError):
        config_from_dict({"evolve": {"targets": [1]}}).evolve_config(mode="sideways")
    assert load_config("builtin:rbp_evolve").evolve_config().targets == (2, 3, 7, 8)


def test_route_steps_zero(capsys, tmp_path):
    code, out, _ = run(capsys, "route", "--config", "builtin:hbd_route_k1", "--steps", "0", "--out", str(tmp_path))
    recs = read_log(tmp_path / "route_log.jsonl")
    steps = [r for r in recs if r["kind"] == "route_step"]
    assert code == EXIT_OK and len(steps) == 1
    assert steps[0]["payload"]["probs"] == pytest.approx([1 / 16] * 16)
    assert "final probabilities" in out
    assert json.loads((tmp_path / "checkpoint.json").read_text())["router"]["step"] == 0


def test_route_rerun_identical(capsys, tmp_path):
    logs = []
    for i, threads in enumerate(("1", "1", "4")):
        out = tmp_path / str(i)
        assert run(capsys, "route", "--config", "builtin:hbd_route_k2", "--steps", "5", "--threads", threads, "--out", str(out))[0] == EXIT_OK
        logs.append(without_time(read_log(out / "route_log.jsonl")))
    assert logs[0] == logs[1] == logs[2]


def test_evolve_outputs(capsys, tmp_path):
    code, out, _ = run(capsys, "evolve", "--config", "builtin:rbp_evolve", "--steps", "2", "--out", str(tmp_path))
    assert code == EXIT_OK
    recs = read_log(tmp_path / "evolve_log.jsonl")
    steps = [r["payload"] for r in recs if r["kind"] == "evolve_step"]
    assert [s["n_candidates"] for s in steps[1:]] == [512, 512]
    assert all(sum(s["histogram"]) == s["unique_total"] for s in steps)
    rows = (tmp_path / "top_peptides.tsv").read_text().splitlines()
    assert rows[0].split("\t") == ["rank", "score", "chuckles", "breakdown"] and len(rows) == 21
    hist = (tmp_path / "histogram.tsv").read_text().splitlines()[1:]
    assert len(hist) == 50 and hist[0].startswith("0.00\t0.02") and hist[-1].startswith("0.98\t1.00")
    assert sum(int(h.split("\t")[2]) for h in hist) == steps[-1]["unique_total"]


def test_evolve_static_flag(capsys, tmp_path):
    code, _, _ = run(capsys, "evolve", "--config", "builtin:rbp_evolve", "--steps", "3", "--baseline", "static", "-K", "4", "-G", "2", "--out", str(tmp_path))
    steps = [r["payload"] for r in read_log(tmp_path / "evolve_log.jsonl") if r["kind"] == "evolve_step"]
    assert code == EXIT_OK and all(s["seeds"] == [RBP] * 4 for s in steps)
    assert steps[1]["n_candidates"] == 4 * 4 * 2


def test_evolve_bad_target(capsys, tmp_path):
    code, _, err = run(capsys, "evolve", "--config", "builtin:rbp_evolve", "--steps", "1", "--peptide", "A|B", "--out", str(tmp_path))
    assert code == EXIT_RUNTIME and "out of range" in err


def test_dataset(capsys, tmp_path):
    code, out, err = run(capsys, "dataset", "--corpus", str(DATA / "corpus_demo.chk"), "--mode", "shifted")
    lines = out.splitlines()
    assert code == EXIT_OK and len(lines) == 123 and "emitted 123 pairs" in err
    for line in lines:
        pair = TrainingPair.from_tsv(line)
        assert unmask(pair) == pair.target
    code, _, _ = run(capsys, "dataset", "--config", "builtin:dataset_demo", "--epoch", "1", "--out", str(tmp_path))
    e1 = (tmp_path / "pairs_epoch1_shifted.tsv").read_text().splitlines()
    assert code == EXIT_OK and e1 != lines


def test_dataset_reports_bad_lines(capsys, tmp_path):
    corpus = tmp_path / "c.chk"
    corpus.write_text("A|B|C\nN1CC(=O)\n")
    code, out, err = run(capsys, "dataset", "--corpus", str(corpus))
    assert code == EXIT_OK and len(out.splitlines()) == 1 and "line 2" in err and "skipped 1" in err


def test_runlog_schema(tmp_path):
    with RunLog(tmp_path / "x.jsonl") as log:
        log.write("run_start", None, {"a": 1})
        log.write("evolve_step", 0, {"b": [1, 2]})
    recs = read_log(tmp_path / "x.jsonl")
    assert [r["kind"] for r in recs] == ["run_start", "evolve_step"]
    for bad in ({"schema": 1}, {"schema": 2, "kind": "run_end", "step": 0, "time": "", "payload": {}}):
        with pytest.raises(ValueError):
            validate_record(bad)
    with pytest.raises(ValueError):
        RunLog(tmp_path / "y.jsonl").write("party", 0, {})
