"""Prompt rendering, image generation batches, and manifest integrity."""

import base64
import json

import pytest
import requests

from rubriceval.dataset import (
    ArtifactProfile,
    HttpImageGenClient,
    Manifest,
    MockImageGenClient,
    builtin_profiles,
    generate_images,
    image_bytes,
    load_manifest,
    make_png,
    merge_manifests,
    render_generation_prompt,
    sha256_hex,
    validate_manifest,
    write_manifest,
)
from rubriceval.errors import (
    ConfigError,
    ContractError,
    GenerationRejectedError,
    TransportError,
)
from rubriceval.httpclient import HttpJsonClient
from rubriceval.packs import PACK_RUBRIC_IDS

GUIDE_CANE_DESCRIBED = (
    "A photo of a guide cane. A guide cane, or white cane, is an assistive "
    "technology used by people who are blind. It is a collapsible "
    "lightweight cane made of aluminum."
)


# Prompt rendering


def test_artifact_only_prompt():
    profile = builtin_profiles()["guide_cane"]
    assert render_generation_prompt(profile, "artifact_only") == "A photo of a guide cane"


def test_described_prompt_exact():
    profile = builtin_profiles()["guide_cane"]
    assert render_generation_prompt(profile, "described") == GUIDE_CANE_DESCRIBED


def test_revised_prompt_verbatim():
    profile = builtin_profiles()["chundan_vallam"]
    text = render_generation_prompt(profile, "revised")
    assert text.startswith("A realistic photograph of a traditional Chundan Vallam")
    assert text.endswith("enhancing the tranquil atmosphere of the scene.")
    assert text == profile.revised_prompt


def test_profiles_cover_every_builtin_rubric():
    assert set(builtin_profiles()) == set(PACK_RUBRIC_IDS)


def test_missing_field_is_config_error():
    bare = ArtifactProfile(artifact_id="x", display_name="x thing")
    assert render_generation_prompt(bare, "artifact_only") == "A photo of a x thing"
    with pytest.raises(ConfigError):
        render_generation_prompt(bare, "described")
    with pytest.raises(ConfigError):
        render_generation_prompt(bare, "revised")
    with pytest.raises(ContractError):
        render_generation_prompt(bare, "fancy")


def test_blank_profile_fields_rejected():
    with pytest.raises(ContractError):
        ArtifactProfile(artifact_id=" ", display_name="x")


# Generation batches


class FixedClient:
    def __init__(self, data=b"pixels"):
        self.data = data
        self.calls = []

    def generate(self, prompt, model_id, index):
        self.calls.append((prompt, model_id, index))
        return self.data


class FlakyClient(FixedClient):
    def __init__(self, fail_indices, error=TransportError("HTTP 500")):
        super().__init__()
        self.fail_indices = set(fail_indices)
        self.error = error

    def generate(self, prompt, model_id, index):
        if index in self.fail_indices:
            raise self.error
        return super().generate(prompt, model_id, index)


@pytest.fixture
def profile():
    return builtin_profiles()["guide_cane"]


def test_stub_batch_is_uniform(tmp_path, profile):
    client = FixedClient()
    manifest = generate_images(profile, "artifact_only", "stub-model", client, 10, tmp_path)
    assert len(manifest.records) == 10
    assert len({r.content_hash for r in manifest.records}) == 1
    assert len({r.image_id for r in manifest.records}) == 10
    assert all(r.prompt_text == "A photo of a guide cane" for r in manifest.records)
    assert all((tmp_path / r.file_ref).is_file() for r in manifest.records)
    assert validate_manifest(manifest, tmp_path) == []


def test_partial_failure_keeps_successes(tmp_path, profile):
    client = FlakyClient(fail_indices=[1])
    manifest = generate_images(profile, "artifact_only", "stub", client, 3, tmp_path)
    assert len(manifest.records) == 2
    assert len(manifest.skipped) == 1
    assert manifest.skipped[0].index == 1
    assert manifest.skipped[0].reason.startswith("transport:")


def test_policy_rejection_recorded_with_reason(tmp_path, profile):
    client = FlakyClient(
        fail_indices=[0], error=GenerationRejectedError("content policy")
    )
    manifest = generate_images(profile, "artifact_only", "stub", client, 2, tmp_path)
    assert len(manifest.records) == 1
    assert manifest.skipped[0].reason == "rejected: content policy"


def test_parallel_batch_matches_serial(tmp_path, profile):
    serial = generate_images(
        profile, "artifact_only", "stub", MockImageGenClient(), 8,
        tmp_path / "serial",
    )
    parallel = generate_images(
        profile, "artifact_only", "stub", MockImageGenClient(), 8,
        tmp_path / "parallel", parallelism=4,
    )
    assert [r.image_id for r in serial.records] == [r.image_id for r in parallel.records]
    assert [r.content_hash for r in serial.records] == [
        r.content_hash for r in parallel.records
    ]


def test_generate_rejects_bad_counts(tmp_path, profile):
    with pytest.raises(ContractError):
        generate_images(profile, "artifact_only", "stub", FixedClient(), 0, tmp_path)


def test_mock_client_is_deterministic_png():
    client = MockImageGenClient()
    a = client.generate("A photo of a guide cane", "m", 0)
    b = client.generate("A photo of a guide cane", "m", 0)
    c = client.generate("A photo of a guide cane", "m", 1)
    assert a == b
    assert a != c
    assert a.startswith(b"\x89PNG\r\n\x1a\n")


def test_make_png_structure():
    data = make_png((10, 20, 30), size=4)
    assert data.startswith(b"\x89PNG\r\n\x1a\n")
    assert b"IHDR" in data and b"IDAT" in data and data.endswith(b"IEND\xaeB`\x82")


# Manifest round trip and validation


def test_manifest_round_trip(tmp_path, profile):
    client = FlakyClient(fail_indices=[2])
    manifest = generate_images(profile, "described", "stub", client, 4, tmp_path)
    path = tmp_path / "manifest.jsonl"
    write_manifest(manifest, path)
    loaded = load_manifest(path)
    assert loaded == manifest
    assert loaded.generator_config["prompt_text"] == GUIDE_CANE_DESCRIBED


def test_validate_detects_tampered_file(tmp_path, profile):
    manifest = generate_images(profile, "artifact_only", "stub", FixedClient(), 3, tmp_path)
    victim = manifest.records[1]
    (tmp_path / victim.file_ref).write_bytes(b"tampered")
    issues = validate_manifest(manifest, tmp_path)
    assert len(issues) == 1
    assert victim.image_id in issues[0]
    assert "hash mismatch" in issues[0]


def test_validate_detects_missing_file_and_duplicate_id(tmp_path, profile):
    manifest = generate_images(profile, "artifact_only", "stub", FixedClient(), 2, tmp_path)
    duplicated = Manifest(
        manifest_id="dup",
        records=manifest.records + (manifest.records[0],),
    )
    (tmp_path / manifest.records[1].file_ref).unlink()
    issues = validate_manifest(duplicated, tmp_path)
    assert any("duplicate image_id" in i for i in issues)
    assert any("missing file" in i for i in issues)


def test_merge_manifests_rejects_id_collisions(tmp_path, profile):
    a = generate_images(profile, "artifact_only", "stub", FixedClient(), 2, tmp_path)
    b = generate_images(profile, "artifact_only", "other", FixedClient(), 2, tmp_path)
    merged = merge_manifests("combo", [a, b])
    assert len(merged.records) == 4
    with pytest.raises(ContractError, match="duplicate image ids"):
        merge_manifests("bad", [a, a])


def test_image_bytes_lookup(tmp_path, profile):
    manifest = generate_images(profile, "artifact_only", "stub", FixedClient(b"abc"), 1, tmp_path)
    assert image_bytes(manifest, tmp_path, manifest.records[0].image_id) == b"abc"
    assert sha256_hex(b"abc") == manifest.records[0].content_hash
    with pytest.raises(ContractError):
        image_bytes(manifest, tmp_path, "ghost")


def test_load_manifest_rejects_garbage(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text("not json\n")
    with pytest.raises(ContractError, match="invalid JSON"):
        load_manifest(path)
    path.write_text(json.dumps({"kind": "mystery"}) + "\n")
    with pytest.raises(ContractError, match="unknown record kind"):
        load_manifest(path)
    path.write_text(json.dumps({"kind": "image", "image_id": "x"}) + "\n")
    with pytest.raises(ContractError, match="missing fields"):
        load_manifest(path)


# HTTP plumbing


class FakeResponse:
    def __init__(self, status_code=200, body=None, content=b""):
        self.status_code = status_code
        self._body = body
        self.content = content
        self.text = json.dumps(body) if body is not None else ""

    def json(self):
        if self._body is None:
            raise ValueError("no body")
        return self._body


class FakeSession:
    def __init__(self, post_results=(), get_results=()):
        self.post_results = list(post_results)
        self.get_results = list(get_results)
        self.posts = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.posts.append((url, json))
        result = self.post_results.pop(0)
        if isinstance(result, Exception):
            raise result
        return result

    def get(self, url, headers=None, timeout=None):
        result = self.get_results.pop(0)
        if isinstance(result, Exception):
            raise result
        return result


def test_post_json_retries_transient_then_succeeds():
    session = FakeSession(
        post_results=[
            requests.ConnectionError("boom"),
            FakeResponse(status_code=503),
            FakeResponse(body={"ok": True}),
        ]
    )
    client = HttpJsonClient(max_retries=3, backoff=0.0, session=session)
    assert client.post_json("http://svc/x", {}) == {"ok": True}
    assert len(session.posts) == 3


def test_post_json_gives_up_after_bounded_retries():
    session = FakeSession(post_results=[FakeResponse(status_code=500)] * 3)
    client = HttpJsonClient(max_retries=2, backoff=0.0, session=session)
    with pytest.raises(TransportError, match="after 3 attempts"):
        client.post_json("http://svc/x", {})


def test_post_json_does_not_retry_client_errors():
    session = FakeSession(
        post_results=[FakeResponse(status_code=401, body={"error": "no auth"})]
    )
    client = HttpJsonClient(max_retries=3, backoff=0.0, session=session)
    with pytest.raises(TransportError, match="HTTP 401"):
        client.post_json("http://svc/x", {})
    assert len(session.posts) == 1


def test_get_bytes_retries_then_returns_content():
    session = FakeSession(
        get_results=[FakeResponse(status_code=429), FakeResponse(content=b"img")]
    )
    client = HttpJsonClient(max_retries=1, backoff=0.0, session=session)
    assert client.get_bytes("http://svc/img") == b"img"


def test_imagegen_openai_adapter_b64_and_url():
    png = make_png((1, 2, 3), size=2)
    session = FakeSession(
        post_results=[
            FakeResponse(body={"data": [{"b64_json": base64.b64encode(png).decode()}]}),
            FakeResponse(body={"data": [{"url": "http://svc/img.png"}]}),
        ],
        get_results=[FakeResponse(content=png)],
    )
    http = HttpJsonClient(backoff=0.0, session=session)
    client = HttpImageGenClient("http://svc/images", api_key="k", http=http)
    assert client.generate("p", "m", 0) == png
    assert client.generate("p", "m", 1) == png
    assert http.headers["Authorization"] == "Bearer k"
    assert session.posts[0][1]["prompt"] == "p"


def test_imagegen_simple_adapter_and_rejection():
    session = FakeSession(
        post_results=[
            FakeResponse(body={"image_b64": base64.b64encode(b"xy").decode()}),
            FakeResponse(body={"error": {"message": "content policy"}}),
        ]
    )
    http = HttpJsonClient(backoff=0.0, session=session)
    client = HttpImageGenClient("http://svc/gen", adapter="simple", http=http)
    assert client.generate("p", "m", 0) == b"xy"
    with pytest.raises(GenerationRejectedError, match="content policy"):
        client.generate("p", "m", 1)


def test_imagegen_unknown_adapter_rejected():
    with pytest.raises(ConfigError):
        HttpImageGenClient("http://svc", adapter="mystery")
