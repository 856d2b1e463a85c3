"""HTTP annotation service: queue flow, validation statuses, static files."""

import http.client
import json
from concurrent.futures import ThreadPoolExecutor

import pytest
import requests

from rubriceval.annotations import AnnotationStore
from rubriceval.dataset import MockImageGenClient, builtin_profiles, generate_images
from rubriceval.errors import ContractError
from rubriceval.packs import load_builtin_rubric
from rubriceval.rubric import content_hash
from rubriceval.service import AnnotationService

RUBRIC = load_builtin_rubric("guide_cane")
HASH = content_hash(RUBRIC)


def annotation_doc(image_id, annotator, not_met=(), **extra):
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
def svc(tmp_path):
    profile = builtin_profiles()["guide_cane"]
    manifest = generate_images(
        profile,
        variant="artifact_only",
        model_id="dalle3",
        client=MockImageGenClient(),
        n=3,
        out_dir=tmp_path / "images",
    )
    store = AnnotationStore(tmp_path / "store.jsonl", [RUBRIC])
    service = AnnotationService(RUBRIC, manifest, tmp_path / "images", store)
    service.start_background()
    yield service
    service.shutdown()


def base(svc):
    return f"http://{svc.host}:{svc.port}"


def image_ids(svc):
    return [rec.image_id for rec in svc.manifest.records]


def test_session_payload(svc):
    resp = requests.get(base(svc) + "/api/v1/session", params={"annotator": "a1"})
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["annotator_id"] == "a1"
    assert doc["artifact"] == {
        "artifact_id": "guide_cane",
        "display_name": "guide cane",
    }
    rubric = doc["rubric"]
    assert rubric["content_hash"] == HASH
    assert [t["id"] for t in rubric["themes"]] == ["Theme1", "Theme2"]
    assert all(t["description"] for t in rubric["themes"])
    criteria = [c for t in rubric["themes"] for c in t["criteria"]]
    assert len(criteria) == 7
    assert all(set(c) == {"id", "text", "vacuous_note"} for c in criteria)
    assert doc["rating_scales"]["three_point"] == [1, 2, 3]
    assert doc["rating_scales"]["two_point"] == [1, 2]
    assert doc["progress"] == {"done": 0, "total": 3}


def test_missing_annotator_is_400(svc):
    for path in ("/api/v1/session", "/api/v1/images/next", "/api/v1/progress"):
        resp = requests.get(base(svc) + path)
        assert resp.status_code == 400
        assert resp.json()["error"] == "bad_request"


def test_queue_walk_to_completion(svc):
    ids = image_ids(svc)
    for expected_done, image_id in enumerate(ids):
        resp = requests.get(
            base(svc) + "/api/v1/progress", params={"annotator": "a1"}
        )
        assert resp.json() == {"annotator_id": "a1", "done": expected_done, "total": 3}

        resp = requests.get(
            base(svc) + "/api/v1/images/next", params={"annotator": "a1"}
        )
        assert resp.status_code == 200
        nxt = resp.json()
        assert nxt["image_id"] == image_id
        assert nxt["url"] == f"/images/{image_id}"

        img = requests.get(base(svc) + nxt["url"])
        assert img.status_code == 200
        assert img.headers["Content-Type"] == "image/png"
        assert img.content.startswith(b"\x89PNG")

        resp = requests.post(
            base(svc) + "/api/v1/annotations", json=annotation_doc(image_id, "a1")
        )
        assert resp.status_code == 201
        created = resp.json()
        assert created["image_id"] == image_id
        assert created["record_id"]

    resp = requests.get(base(svc) + "/api/v1/images/next", params={"annotator": "a1"})
    assert resp.status_code == 204
    resp = requests.get(base(svc) + "/api/v1/progress", params={"annotator": "a1"})
    assert resp.json()["done"] == 3


def test_queues_are_per_annotator(svc):
    first = image_ids(svc)[0]
    resp = requests.post(
        base(svc) + "/api/v1/annotations", json=annotation_doc(first, "a1")
    )
    assert resp.status_code == 201
    resp = requests.get(base(svc) + "/api/v1/images/next", params={"annotator": "a2"})
    assert resp.json()["image_id"] == first


def test_duplicate_then_overwrite(svc):
    first = image_ids(svc)[0]
    doc = annotation_doc(first, "a1")
    assert requests.post(base(svc) + "/api/v1/annotations", json=doc).status_code == 201

    resp = requests.post(base(svc) + "/api/v1/annotations", json=doc)
    assert resp.status_code == 409
    assert resp.json()["error"] == "duplicate"

    redo = annotation_doc(first, "a1", not_met=("Theme1/C1",), overwrite=True)
    resp = requests.post(base(svc) + "/api/v1/annotations", json=redo)
    assert resp.status_code == 201


def test_invalid_judgments_are_422_and_do_not_advance(svc):
    first = image_ids(svc)[0]
    doc = annotation_doc(first, "a1")
    doc["judgments"]["Theme1"]["C99"] = "met"
    resp = requests.post(base(svc) + "/api/v1/annotations", json=doc)
    assert resp.status_code == 422
    body = resp.json()
    assert body["error"] == "validation"
    assert any("C99" in issue for issue in body["issues"])

    resp = requests.get(base(svc) + "/api/v1/progress", params={"annotator": "a1"})
    assert resp.json()["done"] == 0


def test_incomplete_judgments_are_422(svc):
    first = image_ids(svc)[0]
    doc = annotation_doc(first, "a1")
    del doc["judgments"]["Theme2"]["C2"]
    resp = requests.post(base(svc) + "/api/v1/annotations", json=doc)
    assert resp.status_code == 422


def test_not_visible_accepted_from_humans(svc):
    first = image_ids(svc)[0]
    doc = annotation_doc(first, "a1")
    doc["judgments"]["Theme2"]["C1"] = "not_visible"
    resp = requests.post(base(svc) + "/api/v1/annotations", json=doc)
    assert resp.status_code == 201


def test_holistic_rating_accepted(svc):
    first = image_ids(svc)[0]
    doc = {
        "kind": "holistic_rating",
        "source": {"kind": "human", "annotator_id": "a1"},
        "image_id": first,
        "rubric": {
            "rubric_id": RUBRIC.rubric_id,
            "version": RUBRIC.version,
            "content_hash": HASH,
        },
        "rating": 3,
        "rating_scale": "three_point",
    }
    resp = requests.post(base(svc) + "/api/v1/annotations", json=doc)
    assert resp.status_code == 201


def test_malformed_posts_are_400(svc):
    url = base(svc) + "/api/v1/annotations"
    resp = requests.post(url, data=b"{nope", headers={"Content-Type": "application/json"})
    assert resp.status_code == 400
    resp = requests.post(url, json=[1, 2, 3])
    assert resp.status_code == 400
    resp = requests.post(base(svc) + "/api/v1/other", json={})
    assert resp.status_code == 404


def test_unknown_image_is_404(svc):
    resp = requests.get(base(svc) + "/images/never_generated")
    assert resp.status_code == 404
    assert "never_generated" in resp.json()["message"]


def test_placeholder_page_without_ui_dir(svc):
    resp = requests.get(base(svc) + "/")
    assert resp.status_code == 200
    assert resp.headers["Content-Type"].startswith("text/html")
    assert "/api/v1/" in resp.text
    assert requests.get(base(svc) + "/missing.js").status_code == 404


def test_static_files_and_traversal_guard(tmp_path):
    ui = tmp_path / "ui"
    ui.mkdir()
    (ui / "index.html").write_text("<html>console</html>")
    (ui / "app.js").write_text("export {};")
    (tmp_path / "secret.txt").write_text("keep out")

    profile = builtin_profiles()["guide_cane"]
    manifest = generate_images(
        profile,
        variant="artifact_only",
        model_id="m",
        client=MockImageGenClient(),
        n=1,
        out_dir=tmp_path / "images",
    )
    store = AnnotationStore(tmp_path / "store.jsonl", [RUBRIC])
    service = AnnotationService(RUBRIC, manifest, tmp_path / "images", store, ui_dir=ui)
    service.start_background()
    try:
        assert requests.get(base(service) + "/").text == "<html>console</html>"
        resp = requests.get(base(service) + "/app.js")
        assert resp.status_code == 200
        assert resp.headers["Content-Type"].startswith("text/javascript")

        conn = http.client.HTTPConnection(service.host, service.port)
        conn.request("GET", "/../secret.txt")
        assert conn.getresponse().status == 404
        conn.close()
    finally:
        service.shutdown()


def test_missing_ui_dir_rejected(tmp_path):
    profile = builtin_profiles()["guide_cane"]
    manifest = generate_images(
        profile,
        variant="artifact_only",
        model_id="m",
        client=MockImageGenClient(),
        n=1,
        out_dir=tmp_path / "images",
    )
    store = AnnotationStore(tmp_path / "store.jsonl", [RUBRIC])
    with pytest.raises(ContractError):
        AnnotationService(
            RUBRIC, manifest, tmp_path / "images", store, ui_dir=tmp_path / "nope"
        )


def test_concurrent_submissions_from_two_annotators(svc):
    ids = image_ids(svc)
    docs = [
        annotation_doc(image_id, annotator)
        for annotator in ("a1", "a2")
        for image_id in ids
    ]

    def post(doc):
        return requests.post(base(svc) + "/api/v1/annotations", json=doc).status_code

    with ThreadPoolExecutor(max_workers=6) as pool:
        statuses = list(pool.map(post, docs))
    assert statuses == [201] * 6

    lines = svc.store.path
    with open(lines) as fh:
        stored = [json.loads(line) for line in fh if line.strip()]
    assert len(stored) == 6
    for annotator in ("a1", "a2"):
        resp = requests.get(
            base(svc) + "/api/v1/progress", params={"annotator": annotator}
        )
        assert resp.json()["done"] == 3
