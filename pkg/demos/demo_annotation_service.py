"""
Annotation service: a headless session against the HTTP API
============================================================

Starts the annotation service on an ephemeral port, then plays the part
of the browser UI: fetch the session, pull images off the queue, post
criterion judgments, and watch progress reach 100%.

Usage: python3 demos/demo_annotation_service.py
"""

import sys
import tempfile
from pathlib import Path

import requests

from rubriceval.annotations import AnnotationStore
from rubriceval.dataset import MockImageGenClient, builtin_profiles, generate_images
from rubriceval.packs import load_builtin_rubric
from rubriceval.rubric import content_hash
from rubriceval.service import AnnotationService

workdir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())

# 1. Something to annotate: three mock images of a Mridangam.
rubric = load_builtin_rubric("mridangam")
profile = builtin_profiles()["mridangam"]
manifest = generate_images(
    profile,
    variant="revised",
    model_id="demo-model",
    client=MockImageGenClient(),
    n=3,
    out_dir=workdir / "images",
)

# 2. The service: ephemeral port, no UI assets (the JSON API alone).
store = AnnotationStore(workdir / "annotations.jsonl", [rubric])
service = AnnotationService(rubric, manifest, workdir / "images", store)
service.start_background()
root = f"http://{service.host}:{service.port}"
print(f"service listening at {root}")

try:
    # 3. The session document carries everything a UI needs to render:
    # rubric themes and criteria, rating scales, and current progress.
    session = requests.get(root + "/api/v1/session", params={"annotator": "demo"}).json()
    print(f"artifact: {session['artifact']['display_name']}")
    for theme in session["rubric"]["themes"]:
        print(f"  {theme['id']}: {len(theme['criteria'])} criteria")
    print(f"progress: {session['progress']}")

    # 4. Work the queue. Every criterion gets an explicit judgment; the
    # second image marks one criterion not visible (defaults to pass).
    count = 0
    while True:
        resp = requests.get(root + "/api/v1/images/next", params={"annotator": "demo"})
        if resp.status_code == 204:
            break
        image_id = resp.json()["image_id"]
        judgments = {
            theme["id"]: {c["id"]: "met" for c in theme["criteria"]}
            for theme in session["rubric"]["themes"]
        }
        if count == 1:
            judgments["Theme2"]["C1"] = "not_visible"
        posted = requests.post(
            root + "/api/v1/annotations",
            json={
                "kind": "criterion_annotation",
                "source": {"kind": "human", "annotator_id": "demo"},
                "image_id": image_id,
                "rubric": {
                    "rubric_id": rubric.rubric_id,
                    "version": rubric.version,
                    "content_hash": content_hash(rubric),
                },
                "judgments": judgments,
            },
        )
        print(f"annotated {image_id}: HTTP {posted.status_code}")
        count += 1

    # 5. Done: the queue is empty and progress reads 100%.
    progress = requests.get(root + "/api/v1/progress", params={"annotator": "demo"}).json()
    print(f"final progress: {progress['done']}/{progress['total']}")
    print(f"records on disk: {len(store.records())} in {store.path}")
finally:
    service.shutdown()
