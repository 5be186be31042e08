"""HTTP API serving the labeling loop to annotator clients.

Endpoints: GET /api/state, GET /api/queue?annotator=ID,
POST /api/annotations, POST /api/rounds/advance, GET /api/export, and
GET /media/<ref> for post images. Queue items carry masked text and no
model score (blind labeling); the score is revealed in the annotation
acknowledgment. Domain rejections surface as 409 so clients refresh.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional
from urllib.parse import parse_qs, urlparse

from .corpus import mask_text
from .errors import HitlError
from .hitl import Annotation, HitlService, Trainer, linear_round_trainer

logger = logging.getLogger(__name__)


def state_summary(service: HitlService) -> dict:
    state = service.state
    by_round: dict[str, int] = {}
    for _, (_, provenance) in state.labeled.items():
        by_round[provenance] = by_round.get(provenance, 0) + 1
    return {
        "round_index": state.round_index,
        "labeled_count": len(state.labeled),
        "stop_at": service.config.stop_at,
        "pool_count": len(state.unlabeled_pool),
        "queue_remaining": len(state.pending_queue),
        "conflict_count": len(state.conflicts),
        "adoption_by_round": dict(sorted(by_round.items())),
        "stopped": service.should_stop(),
        "annotators_required": service.config.annotators_required,
        "model_snapshot_id": state.model_snapshot_id,
    }


def queue_view(service: HitlService, annotator_id: str) -> list[dict]:
    """Queue items the annotator has not judged yet, in queue order."""
    items = []
    for post_id, _score in service.state.pending_queue:
        votes = service.state.live_annotations.get(post_id, {})
        if annotator_id in votes:
            continue
        post = service.corpus[post_id]
        items.append(
            {
                "post_id": post_id,
                "text": mask_text(post.text),
                "image_urls": ["/media/%s" % ref for ref in post.image_refs],
                "ocr_text": mask_text(post.ocr_text) if post.ocr_text else None,
                "votes_recorded": len(votes),
            }
        )
    return items


class HitlHTTPServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(
        self,
        address: tuple[str, int],
        service: HitlService,
        trainer: Optional[Trainer] = None,
        media_root: Optional[str | Path] = None,
    ):
        super().__init__(address, _Handler)
        self.service = service
        self.trainer = trainer or linear_round_trainer()
        self.media_root = Path(media_root) if media_root else None


class _Handler(BaseHTTPRequestHandler):
    server: HitlHTTPServer

    def log_message(self, fmt, *args):
        logger.debug("http: " + fmt, *args)

    def _send_json(self, status: int, payload: dict | list) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, message: str) -> None:
        self._send_json(status, {"error": message})

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length)
        return json.loads(raw)

    # ----- GET ---------------------------------------------------------

    def do_GET(self):
        url = urlparse(self.path)
        if url.path == "/api/state":
            self._send_json(200, state_summary(self.server.service))
        elif url.path == "/api/queue":
            params = parse_qs(url.query)
            annotator = params.get("annotator", [""])[0]
            if not annotator:
                return self._error(400, "annotator query parameter required")
            if annotator not in self.server.service.config.annotators:
                return self._error(409, "annotator %r is not registered" % annotator)
            self._send_json(200, {"items": queue_view(self.server.service, annotator)})
        elif url.path == "/api/export":
            out_dir = self.server.service.state_dir / "export"
            manifest = self.server.service.export_dataset(out_dir)
            self._send_json(200, {"out_dir": str(out_dir), "manifest": manifest})
        elif url.path.startswith("/media/"):
            self._serve_media(url.path[len("/media/"):])
        else:
            self._error(404, "unknown path %s" % url.path)

    def _serve_media(self, ref: str) -> None:
        root = self.server.media_root
        if root is None:
            return self._error(404, "no media root configured")
        target = (root / ref).resolve()
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            return self._error(404, "no such media file")
        content_type = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        data = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    # ----- POST ----------------------------------------------------------

    def do_POST(self):
        url = urlparse(self.path)
        if url.path == "/api/annotations":
            self._post_annotation()
        elif url.path == "/api/rounds/advance":
            self._advance_round()
        else:
            self._error(404, "unknown path %s" % url.path)

    def _post_annotation(self):
        try:
            body = self._read_body()
            annotator_id = body["annotator_id"]
            post_id = body["post_id"]
            verdict = body["verdict"]
        except (json.JSONDecodeError, KeyError) as exc:
            return self._error(400, "bad annotation body: %s" % exc)
        if verdict not in (0, 1, "skip"):
            return self._error(400, "verdict must be 0, 1 or \"skip\"")
        service = self.server.service
        score = service.state.queue_scores().get(post_id)
        try:
            outcome = service.submit_annotation(
                Annotation(annotator_id=annotator_id, post_id=post_id, verdict=verdict)
            )
        except HitlError as exc:
            return self._error(409, str(exc))
        self._send_json(
            200,
            {
                "post_id": outcome.post_id,
                "status": outcome.status,
                "label": outcome.label,
                "score": score,
            },
        )

    def _advance_round(self):
        service = self.server.service
        try:
            service.run_round(self.server.trainer)
        except HitlError as exc:
            return self._error(409, str(exc))
        self._send_json(200, state_summary(service))


def create_server(
    service: HitlService,
    host: str = "127.0.0.1",
    port: int = 8080,
    trainer: Optional[Trainer] = None,
    media_root: Optional[str | Path] = None,
) -> HitlHTTPServer:
    return HitlHTTPServer((host, port), service, trainer=trainer, media_root=media_root)


def serve_in_thread(server: HitlHTTPServer) -> threading.Thread:
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread
