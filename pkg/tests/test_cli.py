import json
import logging
import subprocess
import sys

import pytest

from conftest import CITY_RECORDS, CITIES_RU
from deepcorpus.cli import run
from deepcorpus.config import validate
from deepcorpus.subword import RESERVED

STAGES = ["link", "pack", "noise", "emit", "sample", "eval", "stats"]


@pytest.fixture
def world_dir(tmp_path):
    assert run(["synth", "--out", str(tmp_path / "w"), "--seed", "7"]) == 0
    return tmp_path / "w"


def stage_logs(caplog, stage):
    return [json.loads(r.getMessage()) for r in caplog.records if r.name == "deepcorpus" and f'"stage":"{stage}"' in r.getMessage()]


def test_synth_then_link_recovers_every_span(world_dir, caplog):
    caplog.set_level(logging.INFO, logger="deepcorpus")
    assert run(["link", "--config", str(world_dir / "config.json")]) == 0
    logs = stage_logs(caplog, "link")
    assert [l["corpus"] for l in logs] == ["mono", "train", "test"]
    assert all(l["recovered"] == 1.0 for l in logs)


def test_full_pipeline_outputs(world_dir):
    cfg = str(world_dir / "config.json")
    for stage in STAGES:
        assert run([stage, "--config", cfg]) == 0, stage
    assert run(["noise", "--config", cfg, "--objective", "dae"]) == 0
    out = world_dir / "out"
    for name in ("links.mono.jsonl", "segments.jsonl", "segments.links.jsonl", "pairs.deep.jsonl", "pairs.dae.jsonl",
                 "train.deep.src", "train.deep.tgt", "lexicon.tsv", "plan.multitask.deep.epoch0.jsonl",
                 "report.json", "bins.csv", "gain.csv", "stats.json"):
        assert (out / name).stat().st_size > 0, name
    header = json.loads((out / "plan.multitask.deep.epoch0.jsonl").read_text().splitlines()[0])["header"]
    assert abs(header["mono_subwords"] - header["parallel_subwords"]) <= header["max_segment_subwords"]
    assert all(line.startswith("[DEEP] ") for line in (out / "train.deep.src").read_text().splitlines())
    truth = json.loads((world_dir / "truth.json").read_text())
    lex = {tuple(l.split("\t")) for l in (out / "lexicon.tsv").read_text().splitlines()}
    assert lex <= {tuple(p) for p in truth["lexicon"]}
    report = json.loads((out / "report.json").read_text())
    assert set(report["entity"]["group"].values()) <= {"PFT", "PT", "FT", "other"}


def test_eval_identity(world_dir):
    cfg = str(world_dir / "config.json")
    assert run(["link", "--config", cfg]) == 0
    ref = str(world_dir / "test.ref.txt")
    assert run(["eval", "--config", cfg, "--hyp", ref, "--baseline", ref]) == 0
    report = json.loads((world_dir / "out" / "report.json").read_text())
    assert report["bleu"] == pytest.approx(100.0)
    assert report["entity"]["macro_accuracy"] == 1.0
    assert all(v in (None, 0.0) for row in report["gain"]["values"] for v in row)


@pytest.fixture
def cities_dir(tmp_path):
    d = tmp_path / "cities"
    d.mkdir()
    (d / "kb.jsonl").write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in CITY_RECORDS), encoding="utf-8")
    letters = sorted(set("".join(CITIES_RU)))
    (d / "vocab.txt").write_text("\n".join([*RESERVED, *letters]) + "\n", encoding="utf-8")
    (d / "mono.jsonl").write_text(json.dumps({"doc_id": "cities", "sentences": [CITIES_RU]}, ensure_ascii=False) + "\n", encoding="utf-8")
    cfg = {
        "seed": 1,
        "languages": {"src": "en", "tgt": "ru"},
        "paths": {"kb": "kb.jsonl", "vocab": "vocab.txt", "mono": "mono.jsonl", "out_dir": "out"},
    }
    (d / "config.json").write_text(json.dumps(cfg))
    return d


def test_deep_noise_on_city_sentence(cities_dir):
    cfg = str(cities_dir / "config.json")
    for stage in ("link", "pack"):
        assert run([stage, "--config", cfg]) == 0
    assert run(["noise", "--config", cfg, "--objective", "deep"]) == 0
    (pair,) = [json.loads(l) for l in (cities_dir / "out" / "pairs.deep.jsonl").read_text(encoding="utf-8").splitlines()]
    assert {"Krasnodar", "Saratov", "Ulyanovsk"} <= set(pair["src"])
    assert pair["tgt"] == CITIES_RU and pair["task"] == "DEEP"


def test_validate_examples(world_dir):
    raw = json.loads((world_dir / "config.json").read_text())
    assert validate(raw, ["kb", "vocab", "mono"], world_dir) == []
    bad = json.loads(json.dumps(raw))
    bad["noise"]["mask_ratio"] = 1.5
    assert validate(bad) == ["noise.mask_ratio: mask_ratio must be in (0,1]"]
    del bad["paths"]["kb"]
    bad["noise"]["mask_ratio"] = 0.35
    assert validate(bad, ["kb"], world_dir) == ["paths.kb: required but missing"]
    assert validate({**raw, "seed": None}) == ["seed: required (no implicit default)"]


def test_config_errors_exit_2(world_dir, capsys):
    raw = json.loads((world_dir / "config.json").read_text())
    raw["noise"]["mask_ratio"] = 1.5
    raw["paths"]["kb"] = "missing.jsonl"
    bad = world_dir / "bad.json"
    bad.write_text(json.dumps(raw))
    assert run(["link", "--config", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "noise.mask_ratio" in err and "paths.kb: file not found" in err
    assert run(["link", "--config", str(world_dir / "nope.json")]) == 2
    assert run(["synth", "--out", str(world_dir / "x")]) == 2


def test_data_errors_exit_1(world_dir, capsys):
    cfg = str(world_dir / "config.json")
    assert run(["noise", "--config", cfg]) == 1
    assert "run `deepcorpus pack` first" in capsys.readouterr().err
    (world_dir / "kb.jsonl").write_text("{broken\n")
    assert run(["link", "--config", cfg]) == 1
    assert "line 1" in capsys.readouterr().err


def test_build_kb_from_tsv(tmp_path):
    tsv = tmp_path / "kb.tsv"
    tsv.write_text("Q1\ten\tKrasnodar\nQ1\tru\tКраснодаре\n", encoding="utf-8")
    out = tmp_path / "kb.jsonl"
    assert run(["build-kb", "--tsv", str(tsv), "--out", str(out)]) == 0
    assert json.loads(out.read_text(encoding="utf-8")) == {"id": "Q1", "surfaces": {"en": ["Krasnodar"], "ru": ["Краснодаре"]}}


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "deepcorpus.cli", "synth", "--out", str(tmp_path / "w"), "--seed", "1"],
        capture_output=True,
        text=True,
        env={"DEEPCORPUS_LOG": "info", "PATH": ""},
    )
    assert proc.returncode == 0, proc.stderr
    assert '"stage":"synth"' in proc.stderr
