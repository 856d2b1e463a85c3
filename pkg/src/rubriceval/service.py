"""HTTP service for the annotation workflow.

Serves the rubric and image queue to a browser UI and accepts criterion
annotations into the store. Requests are handled on worker threads;
store access is serialized through one lock so the append-only file sees
a single writer. All JSON endpoints live under /api/v1/.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .annotations import KIND_CRITERION, RATING_SCALES, AnnotationStore, record_from_dict
from .dataset import Manifest
from .errors import (
    ContractError,
    DuplicateRecordError,
    HarnessError,
    RecordValidationError,
)
from .rubric import Rubric, content_hash

_MEDIA_TYPES = {
    ".png": "image/png",
    ".jpg": "image/jpeg",
    ".jpeg": "image/jpeg",
    ".gif": "image/gif",
    ".webp": "image/webp",
    ".html": "text/html; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".json": "application/json",
    ".svg": "image/svg+xml",
    ".ico": "image/x-icon",
}

_PLACEHOLDER_PAGE = (
    "<!doctype html><title>annotation service</title>"
    "<h1>Annotation service is running</h1>"
    "<p>No UI assets are configured. The JSON API lives under /api/v1/.</p>"
)


def rubric_view(rubric: Rubric) -> dict:
    return {
        "rubric_id": rubric.rubric_id,
        "artifact_id": rubric.artifact_id,
        "version": rubric.version,
        "content_hash": content_hash(rubric),
        "themes": [
            {
                "id": theme.id,
                "description": theme.description,
                "criteria": [
                    {
                        "id": criterion.id,
                        "text": criterion.text,
                        "vacuous_note": criterion.vacuous_note,
                    }
                    for criterion in theme.criteria
                ],
            }
            for theme in rubric.themes
        ],
    }


class AnnotationService:
    def __init__(
        self,
        rubric: Rubric,
        manifest: Manifest,
        image_root: str | Path,
        store: AnnotationStore,
        host: str = "127.0.0.1",
        port: int = 0,
        ui_dir: str | Path | None = None,
    ):
        self.rubric = rubric
        self.rubric_hash = content_hash(rubric)
        self.manifest = manifest
        self.image_root = Path(image_root)
        self.store = store
        self.store_lock = threading.Lock()
        self.ui_dir = Path(ui_dir) if ui_dir is not None else None
        if self.ui_dir is not None and not self.ui_dir.is_dir():
            raise ContractError(f"ui dir {self.ui_dir} does not exist")
        self._httpd = _Server((host, port), _Handler, self)
        self._thread: threading.Thread | None = None

    @property
    def host(self) -> str:
        return self._httpd.server_address[0]

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def start_background(self) -> None:
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()

    def shutdown(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    # queue state

    def annotated_images(self, annotator: str) -> set[str]:
        with self.store_lock:
            records = self.store.effective_records(
                kind=KIND_CRITERION, source_kind="human", rubric_hash=self.rubric_hash
            )
        return {
            rec.image_id for rec in records if rec.source.annotator_id == annotator
        }

    def progress(self, annotator: str) -> dict:
        done_ids = self.annotated_images(annotator)
        manifest_ids = [rec.image_id for rec in self.manifest.records]
        done = sum(1 for image_id in manifest_ids if image_id in done_ids)
        return {"annotator_id": annotator, "done": done, "total": len(manifest_ids)}

    def next_image(self, annotator: str) -> dict | None:
        done_ids = self.annotated_images(annotator)
        for rec in self.manifest.records:
            if rec.image_id not in done_ids:
                return {"image_id": rec.image_id, "url": f"/images/{rec.image_id}"}
        return None

    def submit(self, doc: dict) -> dict:
        try:
            record = record_from_dict(doc, require_id=False)
        except (HarnessError, KeyError, TypeError) as exc:
            raise RecordValidationError(str(exc))
        with self.store_lock:
            stored = self.store.append(record)
        return {"record_id": stored.record_id, "image_id": stored.image_id}


class _Server(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, handler, service: AnnotationService):
        self.service = service
        super().__init__(address, handler)


class _Handler(BaseHTTPRequestHandler):
    server: _Server

    def log_message(self, format, *args):  # keep test output quiet
        pass

    # plumbing

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_bytes(self, status: int, body: bytes, media_type: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", media_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_empty(self, status: int) -> None:
        self.send_response(status)
        self.send_header("Content-Length", "0")
        self.end_headers()

    def _annotator(self, query: dict) -> str | None:
        values = query.get("annotator", [])
        if not values or not values[0].strip():
            self._send_json(400, {"error": "bad_request", "message": "annotator query parameter is required"})
            return None
        return values[0]

    # routes

    def do_GET(self):
        service = self.server.service
        url = urlparse(self.path)
        query = parse_qs(url.query)
        path = url.path

        if path == "/api/v1/session":
            annotator = self._annotator(query)
            if annotator is None:
                return
            profile_name = service.rubric.artifact_id.replace("_", " ")
            self._send_json(
                200,
                {
                    "annotator_id": annotator,
                    "artifact": {
                        "artifact_id": service.rubric.artifact_id,
                        "display_name": profile_name,
                    },
                    "rubric": rubric_view(service.rubric),
                    "rating_scales": {
                        name: list(scale) for name, scale in RATING_SCALES.items()
                    },
                    "progress": {
                        key: value
                        for key, value in service.progress(annotator).items()
                        if key in ("done", "total")
                    },
                },
            )
            return

        if path == "/api/v1/images/next":
            annotator = self._annotator(query)
            if annotator is None:
                return
            nxt = service.next_image(annotator)
            if nxt is None:
                self._send_empty(204)
            else:
                self._send_json(200, nxt)
            return

        if path == "/api/v1/progress":
            annotator = self._annotator(query)
            if annotator is None:
                return
            self._send_json(200, service.progress(annotator))
            return

        if path.startswith("/images/"):
            image_id = path.removeprefix("/images/")
            record = service.manifest.by_id().get(image_id)
            if record is None:
                self._send_json(404, {"error": "not_found", "message": f"unknown image {image_id!r}"})
                return
            target = service.image_root / record.file_ref
            try:
                body = target.read_bytes()
            except OSError:
                self._send_json(404, {"error": "not_found", "message": f"image file missing for {image_id!r}"})
                return
            media = _MEDIA_TYPES.get(Path(record.file_ref).suffix.lower(), "application/octet-stream")
            self._send_bytes(200, body, media)
            return

        self._serve_static(path)

    def _serve_static(self, path: str) -> None:
        service = self.server.service
        if service.ui_dir is None:
            if path in ("/", "/index.html"):
                self._send_bytes(200, _PLACEHOLDER_PAGE.encode("utf-8"), "text/html; charset=utf-8")
            else:
                self._send_json(404, {"error": "not_found", "message": path})
            return
        relative = path.lstrip("/") or "index.html"
        root = service.ui_dir.resolve()
        target = (root / relative).resolve()
        if root not in target.parents and target != root:
            self._send_json(404, {"error": "not_found", "message": path})
            return
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            self._send_json(404, {"error": "not_found", "message": path})
            return
        media = _MEDIA_TYPES.get(target.suffix.lower(), "application/octet-stream")
        self._send_bytes(200, target.read_bytes(), media)

    def do_POST(self):
        service = self.server.service
        url = urlparse(self.path)
        if url.path != "/api/v1/annotations":
            self._send_json(404, {"error": "not_found", "message": url.path})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            raw = self.rfile.read(length)
            doc = json.loads(raw)
            if not isinstance(doc, dict):
                raise ValueError("body must be a JSON object")
        except (ValueError, json.JSONDecodeError) as exc:
            self._send_json(400, {"error": "bad_request", "message": str(exc)})
            return
        try:
            result = service.submit(doc)
        except DuplicateRecordError as exc:
            self._send_json(409, {"error": "duplicate", "message": str(exc)})
            return
        except RecordValidationError as exc:
            self._send_json(
                422, {"error": "validation", "issues": str(exc).split("; ")}
            )
            return
        self._send_json(201, result)
