"""Stateless HTTP render service.

POST /api/render  {spec, params?, events?, seed?} -> {svg, manifest, warnings}
GET  /api/health  -> {"status": "ok", "version": ...}
GET  /            -> built editor assets, when a directory is configured

Every render request is self-contained (events replayed from scratch), so
concurrent requests cannot interfere. Relative data paths resolve against
the configured asset root only; absolute paths are rejected.
"""

from __future__ import annotations

import json
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from . import __version__
from .errors import (
    DependencyError, NetpanoError, RuntimeEvalError, SpecSyntaxError, SpecValidationError,
)
from .runtime import evaluate_spec


def _error_payload(e: Exception) -> dict:
    payload: dict = {"error": str(e)}
    if isinstance(e, SpecSyntaxError):
        payload["line"] = e.line
        payload["column"] = e.column
    construct = getattr(e, "construct", None)
    if construct:
        payload["construct"] = construct
    return payload


class RenderHandler(BaseHTTPRequestHandler):
    server_version = f"netpano/{__version__}"
    asset_root = "."
    editor_dir: str | None = None

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self._cors()
        self.end_headers()
        self.wfile.write(body)

    def _cors(self) -> None:
        origin = self.headers.get("Origin", "")
        if origin.startswith("http://localhost") or origin.startswith("http://127.0.0.1"):
            self.send_header("Access-Control-Allow-Origin", origin)
        else:
            self.send_header("Access-Control-Allow-Origin", "http://localhost")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")

    def do_OPTIONS(self):
        self.send_response(204)
        self._cors()
        self.end_headers()

    def do_GET(self):
        if self.path == "/api/health":
            self._send_json(200, {"status": "ok", "version": __version__})
            return
        self._serve_static()

    def _serve_static(self):
        if self.editor_dir is None:
            self._send_json(404, {"error": "no editor assets configured"})
            return
        root = Path(self.editor_dir).resolve()
        rel = self.path.lstrip("/") or "index.html"
        target = (root / rel).resolve()
        if root != target and root not in target.parents:
            self._send_json(404, {"error": "not found"})
            return
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            self._send_json(404, {"error": "not found"})
            return
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self._cors()
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):
        if self.path != "/api/render":
            self._send_json(404, {"error": "unknown endpoint"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            request = json.loads(self.rfile.read(length).decode("utf-8"))
        except (ValueError, json.JSONDecodeError):
            self._send_json(400, {"error": "malformed JSON body"})
            return
        spec = request.get("spec")
        if not isinstance(spec, str) or not spec.strip():
            self._send_json(400, {"error": "missing spec text"})
            return
        try:
            svg, manifest = evaluate_spec(
                spec,
                params=request.get("params"),
                events=request.get("events"),
                seed=int(request.get("seed", 0)),
                asset_root=self.asset_root,
                sandboxed=True,
            )
        except (SpecSyntaxError, SpecValidationError, DependencyError,
                RuntimeEvalError, NetpanoError) as e:
            self._send_json(400, _error_payload(e))
            return
        except Exception as e:  # internal fault
            self._send_json(500, {"error": f"internal error: {e}"})
            return
        self._send_json(200, {
            "svg": svg.text,
            "manifest": manifest.as_dict(),
            "warnings": manifest.warnings,
        })


def make_server(host: str = "127.0.0.1", port: int = 8787, asset_root: str = ".",
                editor_dir: str | None = None) -> ThreadingHTTPServer:
    handler = type("BoundRenderHandler", (RenderHandler,), {
        "asset_root": asset_root,
        "editor_dir": editor_dir,
    })
    return ThreadingHTTPServer((host, port), handler)


def serve(host: str = "127.0.0.1", port: int = 8787, asset_root: str = ".",
          editor_dir: str | None = None) -> None:
    httpd = make_server(host, port, asset_root, editor_dir)
    print(f"netpano render service on http://{host}:{port} (assets: {asset_root})")
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()


def serve_background(host: str = "127.0.0.1", port: int = 0, asset_root: str = ".",
                     editor_dir: str | None = None):
    """Start the service on a background thread; returns (server, thread).
    Used by tests and the editor dev loop."""
    httpd = make_server(host, port, asset_root, editor_dir)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    return httpd, thread
