"""
Offline walkthrough: mock dataset, scripted judge, agreement report
===================================================================

Runs the whole evaluation loop without any network access: deterministic
mock images, a scripted judge that replays canned JSON verdicts, and a
small set of hand-written human annotations to compare against.

Usage: python3 demos/demo_judge_offline.py [workdir]
"""

import json
import sys
import tempfile
from pathlib import Path

from rubriceval.analytics import build_agreement_report, reference_labels
from rubriceval.annotations import AnnotationStore, record_from_dict, resolve
from rubriceval.dataset import (
    MockImageGenClient,
    builtin_profiles,
    generate_images,
    image_bytes,
)
from rubriceval.judge import (
    ImagePayload,
    JudgeConfig,
    MockJudgeClient,
    judge_image,
    verdict_to_record,
)
from rubriceval.packs import load_builtin_rubric
from rubriceval.reporting import RenderSpec, per_criterion_data, render
from rubriceval.rubric import content_hash

workdir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
print(f"working in {workdir}")

# 1. A tiny image dataset from the deterministic mock generator. Each
# "image" is a solid-color PNG derived from the prompt hash, so reruns
# produce identical files and manifests.
rubric = load_builtin_rubric("guide_cane")
rubric_hash = content_hash(rubric)
profile = builtin_profiles()["guide_cane"]
manifest = generate_images(
    profile,
    variant="artifact_only",
    model_id="demo-model",
    client=MockImageGenClient(),
    n=4,
    out_dir=workdir / "images",
)
ids = [rec.image_id for rec in manifest.records]
print(f"generated {len(ids)} images for prompt "
      f"{manifest.generator_config['prompt_text']!r}")


# 2. A scripted judge. Each script line pairs an image id with the raw
# response the "model" returns; here image 1 fails one criterion.
def verdict(zeroed=()):
    evaluation = {
        theme.id: {
            c.id: (0 if f"{theme.id}/{c.id}" in zeroed else 1)
            for c in theme.criteria
        }
        for theme in rubric.themes
    }
    overall = min(min(v.values()) for v in evaluation.values())
    return json.dumps({"criteria_evaluation": evaluation, "overall_assessment": overall})


script = workdir / "judge_script.jsonl"
entries = [{"image_id": i, "response": verdict()} for i in ids]
entries[1] = {"image_id": ids[1], "response": verdict(("Theme1/C2",))}
script.write_text("".join(json.dumps(e) + "\n" for e in entries))

# 3. Run the judge: three seeds per image, verdicts appended to a store.
config = JudgeConfig(model_id="demo-judge", n_seeds=3)
client = MockJudgeClient(script)
store = AnnotationStore(workdir / "mllm.jsonl", [rubric])
verdict_count = 0
for rec in manifest.records:
    payload = ImagePayload(
        image_id=rec.image_id,
        data=image_bytes(manifest, workdir / "images", rec.image_id),
    )
    result = judge_image(
        payload, rubric, config, client,
        artifact_name=profile.display_name,
        generation_prompt=rec.prompt_text,
    )
    for v in result.verdicts:
        store.append(verdict_to_record(v, config.model_id))
        verdict_count += 1
print(f"judge produced {verdict_count} verdicts "
      f"({config.n_seeds} seeds x {len(ids)} images)")


# 4. Human reference labels: image 1 and image 3 rejected by the annotator.
def human(image_id, not_met=()):
    judgments = {
        theme.id: {
            c.id: ("not_met" if f"{theme.id}/{c.id}" in not_met else "met")
            for c in theme.criteria
        }
        for theme in rubric.themes
    }
    return record_from_dict(
        {
            "kind": "criterion_annotation",
            "source": {"kind": "human", "annotator_id": "demo-annotator"},
            "image_id": image_id,
            "rubric": {
                "rubric_id": rubric.rubric_id,
                "version": rubric.version,
                "content_hash": rubric_hash,
            },
            "judgments": judgments,
        },
        require_id=False,
    )


humans = AnnotationStore(workdir / "human.jsonl", [rubric])
humans.append(human(ids[0]))
humans.append(human(ids[1], not_met=("Theme1/C2",)))
humans.append(human(ids[2]))
humans.append(human(ids[3], not_met=("Theme2/C1",)))

# 5. Agreement: resolve both stores and compare. The judge catches the
# image-1 violation but misses image 3, so overall agreement is 3/4.
human_resolved = [
    resolve(rec, rubric)
    for rec in humans.effective_records(kind="criterion_annotation")
]
mllm_resolved = [
    resolve(rec, rubric)
    for rec in store.records(kind="criterion_annotation", source_kind="mllm")
]
report = build_agreement_report(mllm_resolved, human_resolved, rubric, "mean")
print(f"overall agreement: {report.overall.agreement} "
      f"over {report.overall.n} (image, seed) pairs")
print(f"human base rate {report.reference_base_rate}, "
      f"judge base rate {report.prediction_base_rate}")

# 6. Render the per-criterion table as markdown.
table = render(per_criterion_data(report, rubric), RenderSpec("markdown", "per_criterion"))
print()
print(table.decode("utf-8"))

# 7. The reference labels themselves, for the curious.
for image_id, labels in reference_labels(human_resolved, rubric).items():
    print(f"{image_id}: overall={labels.overall}")
