"""Serve the simulator (or the builtin inpainter/tagger) over the adapter wire protocol.

    python -m reducemt.adapters.server --role sut --scene scene.json [--http PORT]

Without ``--http`` the server reads JSON Lines requests from stdin and answers on stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Callable

from ..imagery import BBox
from .roles import BuiltinInpainter, BuiltinTagger
from .simulator import DetectorSpec, FaultSpec, SimulatedCaptioner, SimulatedDetector, SyntheticScene
from .transport import decode_image, encode_image

Handler = Callable[[dict[str, Any]], dict[str, Any]]


def make_handler(role: str, scene: SyntheticScene | None = None, fault: FaultSpec | None = None,
                 detector: DetectorSpec | None = None) -> Handler:
    if role in ("sut", "od") and scene is None:
        raise ValueError(f"role {role!r} needs a scene")
    if role == "sut":
        cap = SimulatedCaptioner(scene, fault)  # type: ignore[arg-type]
        return lambda req: {"caption": cap.caption(decode_image(req["image_png_b64"]))}
    if role == "od":
        det = SimulatedDetector(scene, detector)  # type: ignore[arg-type]
        return lambda req: {"objects": [d.to_json() for d in det.detect(decode_image(req["image_png_b64"]))]}
    if role == "inpaint":
        inp = BuiltinInpainter()
        return lambda req: {"image_png_b64": encode_image(
            inp.inpaint(decode_image(req["image_png_b64"]), BBox.from_list(req["box"])))}
    if role == "pos":
        tagger = BuiltinTagger()
        return lambda req: {"tokens": [{"t": s, "pos": p, "lemma": l} for s, p, l in tagger.tag(req["text"])]}
    raise ValueError(f"unknown role {role!r}")


def answer(handler: Handler, request: Any) -> dict[str, Any]:
    req_id = request.get("id") if isinstance(request, dict) else None
    try:
        body = handler(request)
    except Exception as exc:  # reported to the client, never fatal to the server
        body = {"error": f"{type(exc).__name__}: {exc}"}
    body["id"] = req_id
    return body


def serve_jsonl(handler: Handler, stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            request = None
            reply = {"id": None, "error": f"bad json: {exc}"}
        else:
            reply = answer(handler, request)
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()


def make_http_server(handler: Handler, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    class _Handler(BaseHTTPRequestHandler):
        def do_POST(self) -> None:  # noqa: N802
            length = int(self.headers.get("Content-Length", 0))
            try:
                request = json.loads(self.rfile.read(length))
            except json.JSONDecodeError:
                self.send_error(400, "bad json")
                return
            data = json.dumps(answer(handler, request)).encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, *args) -> None:
            pass

    return ThreadingHTTPServer((host, port), _Handler)


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="python -m reducemt.adapters.server")
    ap.add_argument("--role", required=True, choices=["sut", "od", "inpaint", "pos"])
    ap.add_argument("--scene", help="scene JSON (the sidecar format); required for sut and od")
    ap.add_argument("--http", type=int, metavar="PORT", help="serve HTTP on PORT instead of stdin/stdout")
    args = ap.parse_args(argv)
    scene = fault = detector = None
    if args.scene:
        with open(args.scene, encoding="utf-8") as fh:
            data = json.load(fh)
        scene = SyntheticScene.from_json(data)
        fault = FaultSpec.from_json(data.get("fault"))
        detector = DetectorSpec.from_json(data.get("detector"))
    try:
        handler = make_handler(args.role, scene, fault, detector)
    except ValueError as exc:
        ap.error(str(exc))
    if args.http is not None:
        server = make_http_server(handler, port=args.http)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
        return 0
    serve_jsonl(handler)
    return 0


if __name__ == "__main__":
    sys.exit(main())
