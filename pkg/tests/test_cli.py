"""End-to-end CLI behavior against offline mock clients."""

import json
from pathlib import Path

import pytest

from rubriceval import cli
from rubriceval.annotations import AnnotationStore
from rubriceval.packs import load_builtin_rubric
from rubriceval.rubric import content_hash

RUBRIC = load_builtin_rubric("guide_cane")
HASH = content_hash(RUBRIC)


def run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def verdict_json(values_by_key, overall=None):
    evaluation = {}
    for theme in RUBRIC.themes:
        evaluation[theme.id] = {
            c.id: values_by_key.get(f"{theme.id}/{c.id}", 1) for c in theme.criteria
        }
    if overall is None:
        overall = min(min(v.values()) for v in evaluation.values())
    return json.dumps(
        {"criteria_evaluation": evaluation, "overall_assessment": overall}
    )


def human_record(image_id, annotator, not_met=(), **extra):
    judgments = {}
    for theme in RUBRIC.themes:
        judgments[theme.id] = {
            c.id: ("not_met" if f"{theme.id}/{c.id}" in not_met else "met")
            for c in theme.criteria
        }
    return {
        "kind": "criterion_annotation",
        "source": {"kind": "human", "annotator_id": annotator},
        "image_id": image_id,
        "rubric": {
            "rubric_id": RUBRIC.rubric_id,
            "version": RUBRIC.version,
            "content_hash": HASH,
        },
        "judgments": judgments,
        **extra,
    }


@pytest.fixture
def world(tmp_path, capsys):
    """A generated 3-image dataset plus mock judge script and human labels."""
    out_dir = tmp_path / "images"
    code, out, _ = run(
        capsys,
        "dataset",
        "generate",
        "--artifact",
        "guide_cane",
        "--model-id",
        "dalle3",
        "--n",
        "3",
        "--out-dir",
        str(out_dir),
        "--mock-imagegen",
    )
    assert code == 0
    manifest_path = Path(json.loads(out)["manifest"])
    image_ids = [
        json.loads(line)["image_id"]
        for line in manifest_path.read_text().splitlines()
        if json.loads(line).get("kind") == "image"
    ]

    script = tmp_path / "judge_script.jsonl"
    entries = [
        {"image_id": image_ids[0], "response": verdict_json({})},
        {"image_id": image_ids[1], "response": verdict_json({"Theme1/C2": 0})},
        {"image_id": image_ids[2], "response": verdict_json({})},
    ]
    script.write_text("".join(json.dumps(e) + "\n" for e in entries))

    human_path = tmp_path / "human_in.jsonl"
    rows = [
        human_record(image_ids[0], "a1"),
        human_record(image_ids[1], "a1", not_met=("Theme1/C2",)),
        human_record(image_ids[2], "a1", not_met=("Theme2/C1",)),
    ]
    human_path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return {
        "dir": tmp_path,
        "manifest": manifest_path,
        "image_ids": image_ids,
        "script": script,
        "human_in": human_path,
    }


# rubric commands


def test_rubric_validate_pack_and_file(tmp_path, capsys):
    code, out, _ = run(capsys, "rubric", "validate", "guide_cane")
    assert code == 0
    assert "ok: guide_cane" in out

    path = tmp_path / "bad.json"
    path.write_text(
        json.dumps(
            {
                "rubric_id": "bad",
                "artifact_id": "bad",
                "version": "1.0",
                "themes": [
                    {"id": "Theme1", "description": "d", "criteria": []}
                ],
            }
        )
    )
    code, out, err = run(capsys, "rubric", "validate", str(path))
    assert code == 1


def test_rubric_validate_unknown_ref(capsys):
    code, _, err = run(capsys, "rubric", "validate", "no_such_rubric")
    assert code == 1


def test_usage_errors_exit_2(capsys):
    code, _, _ = run(capsys, "rubric", "validate")
    assert code == 2
    code, _, _ = run(capsys, "no-such-command")
    assert code == 2
    code, _, _ = run(capsys, "judge", "run", "--bogus-flag")
    assert code == 2


def test_rubric_diff_formats(capsys):
    code, out, _ = run(capsys, "rubric", "diff", "guide_cane", "guide_cane", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert len(doc["matched"]) == 7
    assert doc["unmatched_left"] == []

    code, out, _ = run(capsys, "rubric", "diff", "guide_cane", "mridangam")
    assert code == 0
    assert "Lexical comparison only" in out


def test_rubric_generate_from_mock_response(tmp_path, capsys):
    response = tmp_path / "llm.txt"
    response.write_text(json.dumps(["A thing.", "Another thing."]))
    out_path = tmp_path / "generated" / "rubric.json"
    code, _, _ = run(
        capsys,
        "rubric",
        "generate",
        "--prompt",
        "A photo of a guide cane",
        "--artifact-id",
        "guide_cane",
        "--mock-response",
        str(response),
        "--out",
        str(out_path),
    )
    assert code == 0
    doc = json.loads(out_path.read_text())
    assert doc["themes"][0]["criteria"][0]["text"] == "A thing."
    runs = (out_path.parent / "runs.jsonl").read_text().splitlines()
    entry = json.loads(runs[0])
    assert entry["command"] == "rubric generate"
    assert entry["counts"] == {"criteria": 2}
    assert entry["config_hash"]


# dataset commands


def test_dataset_generate_and_validate(world, capsys):
    code, out, _ = run(capsys, "dataset", "validate", "--manifest", str(world["manifest"]))
    assert code == 0
    assert "ok: 3 images" in out

    victim = world["dir"] / "images" / "guide_cane"
    first = sorted(victim.glob("*.png"))[0]
    first.write_bytes(b"tampered")
    code, out, _ = run(capsys, "dataset", "validate", "--manifest", str(world["manifest"]))
    assert code == 1
    assert "hash mismatch" in out


def test_dataset_generate_writes_run_record(world):
    runs = (world["manifest"].parent / "runs.jsonl").read_text().splitlines()
    entry = json.loads(runs[0])
    assert entry["command"] == "dataset generate"
    assert entry["counts"] == {"generated": 3, "skipped": 0}
    assert entry["config"]["mock"] is True


# judge run


def test_judge_run_idempotent_and_force(world, capsys):
    store = world["dir"] / "mllm.jsonl"
    argv = [
        "judge",
        "run",
        "--manifest",
        str(world["manifest"]),
        "--rubric",
        "guide_cane",
        "--store",
        str(store),
        "--model-id",
        "mock-judge",
        "--mock-judge",
        str(world["script"]),
        "--seeds",
        "2",
    ]
    code, out, _ = run(capsys, *argv)
    assert code == 0
    counts = json.loads(out)
    assert counts["verdicts"] == 6
    assert counts["seeds_skipped"] == 0

    code, out, _ = run(capsys, *argv)
    counts = json.loads(out)
    assert counts["verdicts"] == 0
    assert counts["seeds_skipped"] == 6

    code, out, _ = run(capsys, *argv, "--force")
    counts = json.loads(out)
    assert counts["verdicts"] == 6

    records = AnnotationStore(store, [RUBRIC]).records()
    assert len(records) == 12  # audit log keeps the forced duplicates
    runs = [
        json.loads(line)
        for line in (store.parent / "runs.jsonl").read_text().splitlines()
    ]
    assert [r["command"] for r in runs if r["command"] == "judge run"].count("judge run") == 3


def test_judge_run_raw_archive(world, capsys):
    store = world["dir"] / "mllm_raw.jsonl"
    archive = world["dir"] / "raw.jsonl"
    code, _, _ = run(
        capsys,
        "judge",
        "run",
        "--manifest",
        str(world["manifest"]),
        "--rubric",
        "guide_cane",
        "--store",
        str(store),
        "--model-id",
        "mock-judge",
        "--mock-judge",
        str(world["script"]),
        "--seeds",
        "1",
        "--raw-archive",
        str(archive),
    )
    assert code == 0
    lines = [json.loads(l) for l in archive.read_text().splitlines()]
    assert len(lines) == 3
    assert all(e["status"] == "ok" for e in lines)


# annotate


def test_annotate_import_export_round_trip(world, capsys):
    store = world["dir"] / "human.jsonl"
    code, out, _ = run(
        capsys,
        "annotate",
        "import",
        str(world["human_in"]),
        "--store",
        str(store),
        "--rubric",
        "guide_cane",
    )
    assert code == 0
    summary = json.loads(out)
    assert summary["imported"] == 3
    assert summary["rejected"] == 0

    code, out, _ = run(
        capsys, "annotate", "export", "--store", str(store), "--rubric", "guide_cane"
    )
    lines = [json.loads(l) for l in out.splitlines()]
    assert len(lines) == 3
    assert all(l["source"]["annotator_id"] == "a1" for l in lines)

    code, out, _ = run(
        capsys,
        "annotate",
        "export",
        "--store",
        str(store),
        "--image-id",
        world["image_ids"][0],
    )
    assert len(out.splitlines()) == 1


def test_annotate_import_reports_bad_lines(world, capsys):
    bad = world["dir"] / "mixed.jsonl"
    rows = [
        json.dumps(human_record(world["image_ids"][0], "a9")),
        "{broken json",
        json.dumps({"kind": "mystery"}),
    ]
    bad.write_text("".join(r + "\n" for r in rows))
    store = world["dir"] / "mixed_store.jsonl"
    code, out, _ = run(
        capsys,
        "annotate",
        "import",
        str(bad),
        "--store",
        str(store),
        "--rubric",
        "guide_cane",
    )
    assert code == 0
    summary = json.loads(out)
    assert summary["imported"] == 1
    assert [r["line"] for r in summary["rejects"]] == [2, 3]


# analyze


@pytest.fixture
def analyzed(world, capsys):
    mllm_store = world["dir"] / "mllm.jsonl"
    human_store = world["dir"] / "human.jsonl"
    code, _, _ = run(
        capsys,
        "judge",
        "run",
        "--manifest",
        str(world["manifest"]),
        "--rubric",
        "guide_cane",
        "--store",
        str(mllm_store),
        "--model-id",
        "mock-judge",
        "--mock-judge",
        str(world["script"]),
        "--seeds",
        "3",
    )
    assert code == 0
    code, _, _ = run(
        capsys,
        "annotate",
        "import",
        str(world["human_in"]),
        "--store",
        str(human_store),
        "--rubric",
        "guide_cane",
    )
    assert code == 0
    return {**world, "mllm": mllm_store, "human": human_store}


def test_analyze_agreement_json(analyzed, capsys):
    code, out, _ = run(
        capsys,
        "analyze",
        "agreement",
        "--human",
        str(analyzed["human"]),
        "--mllm",
        str(analyzed["mllm"]),
        "--rubric",
        "guide_cane",
        "--format",
        "json",
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["n_images"] == 3
    assert doc["reduction"] == "mean"
    # judge disagrees with the human only on image 3's Theme2/C1 (judge met,
    # human not_met), so overall agreement is 2/3 on every seed
    assert doc["overall"]["agreement"] == pytest.approx(2 / 3)
    assert doc["exclusions"] == 0
    assert doc["seeds_used"] == [0, 1, 2]

    code, out, _ = run(
        capsys,
        "analyze",
        "agreement",
        "--human",
        str(analyzed["human"]),
        "--mllm",
        str(analyzed["mllm"]),
        "--rubric",
        "guide_cane",
        "--reduction",
        "majority",
        "--format",
        "md",
    )
    assert code == 0
    assert "| Final label |" in out


def test_analyze_interannotator(analyzed, capsys):
    second = [
        human_record(analyzed["image_ids"][0], "a2"),
        human_record(analyzed["image_ids"][1], "a2"),
        human_record(analyzed["image_ids"][2], "a2", not_met=("Theme2/C1",)),
    ]
    extra = analyzed["dir"] / "a2.jsonl"
    extra.write_text("".join(json.dumps(r) + "\n" for r in second))
    code, _, _ = run(
        capsys,
        "annotate",
        "import",
        str(extra),
        "--store",
        str(analyzed["human"]),
        "--rubric",
        "guide_cane",
    )
    assert code == 0
    code, out, _ = run(
        capsys,
        "analyze",
        "interannotator",
        "--store",
        str(analyzed["human"]),
        "--rubric",
        "guide_cane",
        "--annotator-a",
        "a1",
        "--annotator-b",
        "a2",
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["n_images"] == 3
    # a1 and a2 disagree only on image 2 (a1 marked Theme1/C2 not met)
    assert doc["agreement"] == pytest.approx(2 / 3)


def test_analyze_validation(analyzed, capsys):
    ratings = []
    for image_id, rating in zip(analyzed["image_ids"], (3, 1, 1)):
        ratings.append(
            {
                "kind": "holistic_rating",
                "source": {"kind": "human", "annotator_id": "p1"},
                "image_id": image_id,
                "rubric": {
                    "rubric_id": RUBRIC.rubric_id,
                    "version": RUBRIC.version,
                    "content_hash": HASH,
                },
                "rating": rating,
                "rating_scale": "three_point",
            }
        )
    ratings_path = analyzed["dir"] / "ratings.jsonl"
    ratings_path.write_text("".join(json.dumps(r) + "\n" for r in ratings))
    code, _, _ = run(
        capsys,
        "annotate",
        "import",
        str(ratings_path),
        "--store",
        str(analyzed["human"]),
        "--rubric",
        "guide_cane",
    )
    assert code == 0
    code, out, _ = run(
        capsys,
        "analyze",
        "validation",
        "--store",
        str(analyzed["human"]),
        "--rubric",
        "guide_cane",
    )
    assert code == 0
    doc = json.loads(out)
    # rubric labels: 1,0,0; ratings binarize to 1,0,0 -> full agreement
    assert doc["n_images"] == 3
    assert doc["agreement"] == pytest.approx(1.0)
    assert doc["community_base_rate"] == pytest.approx(1 / 3)
    assert doc["measure_base_rate"] == pytest.approx(1 / 3)


def test_analyze_breakdown(analyzed, capsys):
    code, out, _ = run(
        capsys,
        "analyze",
        "breakdown",
        "--store",
        str(analyzed["human"]),
        "--rubric",
        "guide_cane",
        "--manifest",
        str(analyzed["manifest"]),
        "--source",
        "human",
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["models"]["dalle3"]["n"] == 3
    assert doc["models"]["dalle3"]["appropriate_fraction"] == pytest.approx(1 / 3)

    code, out, _ = run(
        capsys,
        "analyze",
        "breakdown",
        "--store",
        str(analyzed["mllm"]),
        "--rubric",
        "guide_cane",
        "--manifest",
        str(analyzed["manifest"]),
        "--source",
        "mllm",
        "--format",
        "csv",
    )
    assert code == 0
    assert out.splitlines()[0] == "model_id,criterion,violation_frequency"


# report render


def test_report_render_from_file(tmp_path, capsys):
    data = {
        "rows": [
            {"label": "Guide cane", "reference_base_rate": 0.4,
             "prediction_base_rate": 0.44, "overall": 0.84, "pos": 0.84,
             "neg": 0.83},
        ]
    }
    path = tmp_path / "table1.json"
    path.write_text(json.dumps(data))
    code, out, _ = run(
        capsys,
        "report",
        "render",
        "--data",
        str(path),
        "--target",
        "table1",
        "--format",
        "csv",
    )
    assert code == 0
    assert out.splitlines()[1] == "Guide cane,0.40,0.44,0.84,0.84,0.83"


# config handling


def test_config_supplies_defaults_and_flags_win(world, capsys, tmp_path):
    config = {
        "manifest": str(world["manifest"]),
        "rubric": "guide_cane",
        "model_id": "mock-judge",
        "seeds": 1,
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config))
    store = world["dir"] / "via_config.jsonl"
    code, out, _ = run(
        capsys,
        "judge",
        "run",
        "--config",
        str(config_path),
        "--store",
        str(store),
        "--mock-judge",
        str(world["script"]),
        "--seeds",
        "2",  # flag beats config's 1
    )
    assert code == 0
    assert json.loads(out)["verdicts"] == 6


def test_config_rejects_embedded_secrets(tmp_path, capsys):
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({"judge_api_key": "sk-123"}))
    code, _, err = run(
        capsys, "analyze", "agreement", "--config", str(config_path)
    )
    assert code == 1
    doc = json.loads(err)
    assert doc["error"] == "ConfigError"
    assert "environment variables" in doc["message"]


def test_missing_required_option_is_runtime_error(capsys):
    code, _, err = run(capsys, "analyze", "agreement", "--rubric", "guide_cane")
    assert code == 1
    assert json.loads(err)["error"] == "ConfigError"
