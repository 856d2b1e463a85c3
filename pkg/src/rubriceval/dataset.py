"""Image dataset generation and the provenance manifest.

Builds prompts for text-to-image services from artifact profiles, collects
the returned images on disk, and records provenance (exact prompt, model,
content hash) in a line-delimited manifest so downstream judging and
analysis can trace every image back to how it was made.
"""

from __future__ import annotations

import base64
import hashlib
import json
import re
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

from .annotations import now_timestamp
from .errors import (
    ConfigError,
    ContractError,
    GenerationRejectedError,
    TransportError,
)
from .httpclient import HttpJsonClient

PROMPT_VARIANTS = ("artifact_only", "described", "revised")


@dataclass(frozen=True)
class ArtifactProfile:
    """What we know about one artifact, enough to prompt an image model."""

    artifact_id: str
    display_name: str
    description: str | None = None
    revised_prompt: str | None = None

    def __post_init__(self):
        if not self.artifact_id.strip():
            raise ContractError("artifact_id must be non-empty")
        if not self.display_name.strip():
            raise ContractError("display_name must be non-empty")


_BUILTIN_PROFILES = (
    ArtifactProfile(
        artifact_id="guide_cane",
        display_name="guide cane",
        description=(
            "A guide cane, or white cane, is an assistive technology used by "
            "people who are blind. It is a collapsible lightweight cane made "
            "of aluminum."
        ),
    ),
    ArtifactProfile(
        artifact_id="braille_notetaker",
        display_name="braille notetaker",
    ),
    ArtifactProfile(
        artifact_id="pallanguzhi",
        display_name="Pallanguzhi",
        revised_prompt=(
            "A realistic photograph of a traditional Pallanguzhi board on a "
            "rustic wooden table. The wooden board features intricate "
            "carvings, with two rows of seven circular pits, filled with "
            "vibrant, colorful seeds or shells used as counters. The scene "
            "is illuminated by warm natural lighting, which highlights the "
            "detailed craftsmanship of the board and the vivid hues of the "
            "seeds. Surrounding elements include traditional Indian decor, "
            "such as a brass lamp emitting a soft golden glow and a vibrant, "
            "patterned textile cloth draped in the background. The overall "
            "atmosphere of the image exudes nostalgia and serenity, "
            "celebrating the cultural heritage of this ancient Indian board "
            "game."
        ),
    ),
    ArtifactProfile(
        artifact_id="mridangam",
        display_name="Mridangam",
        revised_prompt=(
            "A high-resolution image of an Indian mridangam, a traditional "
            "percussion instrument, placed on an ornately decorated cloth "
            "featuring intricate patterns in rich shades of gold and red. "
            "The wooden body of the mridangam is shown clearly, with its "
            "leather straps and detailed craftsmanship prominently visible. "
            "The setting is a warm, softly-lit indoor space with ambient "
            "light creating gentle shadows. The lighting emphasizes the "
            "mridangam as the centerpiece of the composition, exuding "
            "cultural beauty in a serene and elegant atmosphere."
        ),
    ),
    ArtifactProfile(
        artifact_id="chundan_vallam",
        display_name="Chundan Vallam",
        revised_prompt=(
            "A realistic photograph of a traditional Chundan Vallam, also "
            "known as a snake boat, floating on the still waters of Kerala's "
            "serene backwaters. The handcrafted, dark wooden boat is long "
            "with a slender shape and an elegantly rising, pointed bow. "
            "Intricate carvings glimmer on the boat, reflecting the bright "
            "sunlight. In the backdrop, there's a dense wall of lush, green "
            "coconut trees and tropical vegetation along the riverbanks. The "
            "sky is a clear, vibrant blue, contrasting beautifully with the "
            "greenery. The calm water creates a perfect mirror image of the "
            "boat and the surrounding landscape, enhancing the tranquil "
            "atmosphere of the scene."
        ),
    ),
    ArtifactProfile(
        artifact_id="kasavu_saree",
        display_name="Kasavu saree",
        revised_prompt=(
            "A serene and elegant presentation of an Indian Kasavu saree "
            "neatly folded on a rustic wooden table. The saree is "
            "predominantly white with a golden border and features intricate "
            "golden zari work embellishing its border and pallu. The scene "
            "is illuminated with warm, golden lighting, emphasizing the "
            "cultural heritage tied to Kerala. The background is softly "
            "blurred and plain to maintain a minimalist aesthetic. Near the "
            "saree, a small vase of fresh, simple flowers adds a delicate "
            "touch. The natural texture of the wooden table reinforces the "
            "timeless charm and grace of the scene, creating an artistic, "
            "warm-toned environment."
        ),
    ),
)


def builtin_profiles() -> dict[str, ArtifactProfile]:
    return {p.artifact_id: p for p in _BUILTIN_PROFILES}


def render_generation_prompt(profile: ArtifactProfile, variant: str) -> str:
    """The exact prompt string to send for one (artifact, variant) pair."""
    if variant not in PROMPT_VARIANTS:
        raise ContractError(
            f"unknown prompt variant {variant!r}; expected one of {PROMPT_VARIANTS}"
        )
    base = f"A photo of a {profile.display_name}"
    if variant == "artifact_only":
        return base
    if variant == "described":
        if not profile.description:
            raise ConfigError(
                f"profile {profile.artifact_id} has no description; "
                "cannot render the described variant"
            )
        return f"{base}. {profile.description}"
    if not profile.revised_prompt:
        raise ConfigError(
            f"profile {profile.artifact_id} has no revised prompt; "
            "cannot render the revised variant"
        )
    return profile.revised_prompt


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    artifact_id: str
    model_id: str
    prompt_variant: str
    prompt_text: str
    file_ref: str
    content_hash: str
    created_at: str
    seed: int | None = None
    group: str | None = None


@dataclass(frozen=True)
class SkippedImage:
    index: int
    reason: str


@dataclass(frozen=True)
class Manifest:
    manifest_id: str
    records: tuple[ImageRecord, ...]
    generator_config: dict = field(default_factory=dict)
    skipped: tuple[SkippedImage, ...] = ()

    def by_id(self) -> dict[str, ImageRecord]:
        return {r.image_id: r for r in self.records}


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


# Generation clients


class ImageGenClient(Protocol):
    def generate(self, prompt: str, model_id: str, index: int) -> bytes:
        """One image as raw bytes for the given prompt."""
        ...


class HttpImageGenClient:
    """Client for hosted text-to-image HTTP services.

    `adapter` selects the wire shape:
      - "openai_images": request {model, prompt, n, response_format};
        response {"data": [{"b64_json": ...} | {"url": ...}]}
      - "simple": request {model, prompt}; response {"image_b64": ...}
        or {"image_url": ...}
    """

    ADAPTERS = ("openai_images", "simple")

    def __init__(
        self,
        endpoint: str,
        adapter: str = "openai_images",
        api_key: str | None = None,
        api_key_env: str = "IMAGEGEN_API_KEY",
        http: HttpJsonClient | None = None,
    ):
        if adapter not in self.ADAPTERS:
            raise ConfigError(f"unknown image service adapter {adapter!r}")
        self.endpoint = endpoint
        self.adapter = adapter
        self.http = http if http is not None else HttpJsonClient()
        key = api_key
        if key is None:
            import os

            key = os.environ.get(api_key_env)
        if key:
            self.http.headers.setdefault("Authorization", f"Bearer {key}")

    def generate(self, prompt: str, model_id: str, index: int) -> bytes:
        if self.adapter == "openai_images":
            payload = {
                "model": model_id,
                "prompt": prompt,
                "n": 1,
                "response_format": "b64_json",
            }
        else:
            payload = {"model": model_id, "prompt": prompt}
        body = self.http.post_json(self.endpoint, payload)
        if "error" in body:
            message = body["error"]
            if isinstance(message, dict):
                message = message.get("message", json.dumps(message))
            raise GenerationRejectedError(str(message))
        return self._extract_bytes(body)

    def _extract_bytes(self, body: dict) -> bytes:
        if self.adapter == "openai_images":
            data = body.get("data")
            if not isinstance(data, list) or not data:
                raise TransportError("image response has no data array")
            entry = data[0]
            if "b64_json" in entry:
                return base64.b64decode(entry["b64_json"])
            if "url" in entry:
                return self.http.get_bytes(entry["url"])
            raise TransportError("image response entry has neither b64_json nor url")
        if "image_b64" in body:
            return base64.b64decode(body["image_b64"])
        if "image_url" in body:
            return self.http.get_bytes(body["image_url"])
        raise TransportError("image response has neither image_b64 nor image_url")


def make_png(rgb: tuple[int, int, int], size: int = 64) -> bytes:
    """A minimal valid solid-color PNG, for offline demos and tests."""

    def chunk(tag: bytes, data: bytes) -> bytes:
        return (
            struct.pack(">I", len(data))
            + tag
            + data
            + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF)
        )

    header = struct.pack(">IIBBBBB", size, size, 8, 2, 0, 0, 0)
    row = b"\x00" + bytes(rgb) * size
    body = zlib.compress(row * size)
    return (
        b"\x89PNG\r\n\x1a\n"
        + chunk(b"IHDR", header)
        + chunk(b"IDAT", body)
        + chunk(b"IEND", b"")
    )


class MockImageGenClient:
    """Deterministic offline stand-in: a solid-color PNG per (prompt, index)."""

    def generate(self, prompt: str, model_id: str, index: int) -> bytes:
        digest = hashlib.sha256(f"{model_id}|{prompt}|{index}".encode()).digest()
        return make_png((digest[0], digest[1], digest[2]))


# Manifest assembly


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-") or "x"


def generate_images(
    profile: ArtifactProfile,
    variant: str,
    model_id: str,
    client: ImageGenClient,
    n: int,
    out_dir: str | Path,
    parallelism: int = 1,
    manifest_id: str | None = None,
    group: str | None = None,
) -> Manifest:
    """Request n images and return a manifest of what actually landed.

    Failures never abort the batch: each failed index becomes a skipped
    entry with its reason, and the manifest carries whatever succeeded.
    """
    if n < 1:
        raise ContractError("n must be >= 1")
    if parallelism < 1:
        raise ContractError("parallelism must be >= 1")
    prompt = render_generation_prompt(profile, variant)
    root = Path(out_dir)
    (root / profile.artifact_id).mkdir(parents=True, exist_ok=True)

    def fetch(index: int):
        try:
            return index, client.generate(prompt, model_id, index), None
        except GenerationRejectedError as exc:
            return index, None, f"rejected: {exc}"
        except TransportError as exc:
            return index, None, f"transport: {exc}"

    if parallelism == 1:
        outcomes = [fetch(i) for i in range(n)]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(fetch, range(n)))

    records = []
    skipped = []
    for index, data, reason in sorted(outcomes):
        if data is None:
            skipped.append(SkippedImage(index=index, reason=reason))
            continue
        image_id = f"{profile.artifact_id}_{_slug(model_id)}_{variant}_{index:03d}"
        file_ref = f"{profile.artifact_id}/{image_id}.png"
        (root / file_ref).write_bytes(data)
        records.append(
            ImageRecord(
                image_id=image_id,
                artifact_id=profile.artifact_id,
                model_id=model_id,
                prompt_variant=variant,
                prompt_text=prompt,
                file_ref=file_ref,
                content_hash=sha256_hex(data),
                created_at=now_timestamp(),
                group=group,
            )
        )
    return Manifest(
        manifest_id=manifest_id
        or f"{profile.artifact_id}_{_slug(model_id)}_{variant}",
        records=tuple(records),
        generator_config={
            "model_id": model_id,
            "prompt_variant": variant,
            "prompt_text": prompt,
            "n_requested": n,
            "parallelism": parallelism,
        },
        skipped=tuple(skipped),
    )


def merge_manifests(manifest_id: str, parts: list[Manifest]) -> Manifest:
    records = []
    skipped = []
    for part in parts:
        records.extend(part.records)
        skipped.extend(part.skipped)
    merged = Manifest(
        manifest_id=manifest_id,
        records=tuple(records),
        generator_config={"merged_from": [p.manifest_id for p in parts]},
        skipped=tuple(skipped),
    )
    duplicates = _duplicate_ids(merged)
    if duplicates:
        raise ContractError(f"duplicate image ids across parts: {duplicates}")
    return merged


def _duplicate_ids(manifest: Manifest) -> list[str]:
    seen = set()
    duplicates = []
    for record in manifest.records:
        if record.image_id in seen and record.image_id not in duplicates:
            duplicates.append(record.image_id)
        seen.add(record.image_id)
    return duplicates


# Manifest file format: one JSON object per line. The first line is a
# header ({"kind": "manifest", ...}); each record line has kind "image"
# and each skip line kind "skipped". file_ref paths are relative to the
# manifest file's directory so the dataset can be moved as a unit.


def _record_to_dict(record: ImageRecord) -> dict:
    out = {
        "kind": "image",
        "image_id": record.image_id,
        "artifact_id": record.artifact_id,
        "model_id": record.model_id,
        "prompt_variant": record.prompt_variant,
        "prompt_text": record.prompt_text,
        "file_ref": record.file_ref,
        "content_hash": record.content_hash,
        "created_at": record.created_at,
    }
    if record.seed is not None:
        out["seed"] = record.seed
    if record.group is not None:
        out["group"] = record.group
    return out


def _record_from_dict(doc: dict) -> ImageRecord:
    required = (
        "image_id",
        "artifact_id",
        "model_id",
        "prompt_variant",
        "prompt_text",
        "file_ref",
        "content_hash",
        "created_at",
    )
    missing = [k for k in required if k not in doc]
    if missing:
        raise ContractError(f"image record missing fields: {', '.join(missing)}")
    return ImageRecord(
        image_id=doc["image_id"],
        artifact_id=doc["artifact_id"],
        model_id=doc["model_id"],
        prompt_variant=doc["prompt_variant"],
        prompt_text=doc["prompt_text"],
        file_ref=doc["file_ref"],
        content_hash=doc["content_hash"],
        created_at=doc["created_at"],
        seed=doc.get("seed"),
        group=doc.get("group"),
    )


def write_manifest(manifest: Manifest, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        json.dumps(
            {
                "kind": "manifest",
                "manifest_id": manifest.manifest_id,
                "generator_config": manifest.generator_config,
            },
            sort_keys=True,
        )
    ]
    for record in manifest.records:
        lines.append(json.dumps(_record_to_dict(record), sort_keys=True))
    for skip in manifest.skipped:
        lines.append(
            json.dumps(
                {"kind": "skipped", "index": skip.index, "reason": skip.reason},
                sort_keys=True,
            )
        )
    path.write_text("".join(line + "\n" for line in lines))


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    manifest_id = path.stem
    generator_config: dict = {}
    records = []
    skipped = []
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ContractError(f"{path.name}:{line_no}: invalid JSON ({exc})")
        kind = doc.get("kind", "image")
        if kind == "manifest":
            manifest_id = doc.get("manifest_id", manifest_id)
            generator_config = doc.get("generator_config", {})
        elif kind == "image":
            records.append(_record_from_dict(doc))
        elif kind == "skipped":
            skipped.append(
                SkippedImage(index=doc.get("index", -1), reason=doc.get("reason", ""))
            )
        else:
            raise ContractError(f"{path.name}:{line_no}: unknown record kind {kind!r}")
    return Manifest(
        manifest_id=manifest_id,
        records=tuple(records),
        generator_config=generator_config,
        skipped=tuple(skipped),
    )


def validate_manifest(manifest: Manifest, root: str | Path) -> list[str]:
    """All invariant violations, re-hashing every file; empty means valid."""
    root = Path(root)
    issues = [f"duplicate image_id: {i}" for i in _duplicate_ids(manifest)]
    for record in manifest.records:
        target = root / record.file_ref
        if not target.is_file():
            issues.append(f"{record.image_id}: missing file {record.file_ref}")
            continue
        actual = sha256_hex(target.read_bytes())
        if actual != record.content_hash:
            issues.append(
                f"{record.image_id}: content hash mismatch "
                f"(manifest {record.content_hash[:12]}..., file {actual[:12]}...)"
            )
    return issues


def image_bytes(manifest: Manifest, root: str | Path, image_id: str) -> bytes:
    record = manifest.by_id().get(image_id)
    if record is None:
        raise ContractError(f"unknown image_id {image_id!r}")
    return (Path(root) / record.file_ref).read_bytes()
