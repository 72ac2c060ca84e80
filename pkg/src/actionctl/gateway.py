"""HTTP gateway around a mapping document.

Publishes the entry annotation document, executes the ground -> proxy ->
lift pipeline for uniform POST invocations, hosts flow-session endpoints
for agents and the web console, and bundles a small in-memory hotel
backend so the whole handshake runs self-contained.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from urllib.parse import parse_qsl, urlsplit

import httpx
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from . import agent as flow
from .actions import (
    AuthenticationSpec,
    serialize_action,
    validate_request_inputs,
    validate_response_outputs,
)
from .graph import ToolkitError, _valid_date, parse_graph, serialize_graph
from .mapping import (
    MappingDocument,
    MissingCredentialsError,
    MissingPathValueError,
    NativeParseError,
    UnresolvedActionRefError,
    ValidationFailedError,
    ground_request,
    lift_response,
    load_mapping_file,
)
from .vocab import Vocabulary, load_vocabulary_files

PACKAGED_FIXTURES = Path(__file__).parent / "fixtures"
DEFAULT_MAPPING = PACKAGED_FIXTURES / "mappings" / "hotel.json"
LD_JSON = "application/ld+json"
MOCK_TOKEN = "hotel-demo-token"

MOCK_ROOMS = (
    {"id": "r1", "name": "Einzelzimmer", "pricePerNight": 75, "maxAdults": 1},
    {"id": "r2", "name": "Doppelzimmer", "pricePerNight": 110, "maxAdults": 2},
    {"id": "r3", "name": "Doppelzimmer Superior", "pricePerNight": 140, "maxAdults": 2},
    {"id": "r4", "name": "Suite", "pricePerNight": 220, "maxAdults": 4},
)


class GatewayConfigError(ToolkitError):
    """Gateway configuration is unusable."""


@dataclass(frozen=True)
class GatewayConfig:
    mapping_path: Path = DEFAULT_MAPPING
    vocab_paths: tuple[Path, ...] = ()
    port: int = 8080
    backend_override: str | None = None
    credentials: tuple[tuple[str, str], ...] = ()  # (resourceId, secret)
    cors_origins: tuple[str, ...] = ("*",)
    public_base_url: str | None = None
    console_dir: Path | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.port <= 65535:
            raise GatewayConfigError(f"port {self.port} outside 1..65535")

    @property
    def public_base(self) -> str:
        return (self.public_base_url or f"http://127.0.0.1:{self.port}").rstrip("/")


def load_gateway_vocabulary(paths: tuple[Path, ...] = ()) -> Vocabulary:
    chosen = list(paths) or sorted((PACKAGED_FIXTURES / "vocab").glob("*.json"))
    return load_vocabulary_files(chosen)


def rewrite_for_public(doc: MappingDocument, public_base: str) -> MappingDocument:
    """Re-target every descriptor at this gateway's uniform invoke endpoint.

    Attached instance actions inherit the rewritten entry points, so a
    client can follow any advertised action without knowing the backend.
    """
    resources = []
    for r in doc.resources:
        ep = replace(r.descriptor.entry_point,
                     url_template=f"{public_base}/invoke/{r.resource_id}",
                     http_method="POST", encoding_type=LD_JSON, content_type=LD_JSON)
        d = replace(r.descriptor, id=f"{public_base}/actions/{r.resource_id}",
                    entry_point=ep)
        resources.append(replace(r, descriptor=d))
    return MappingDocument(doc.id, doc.backend_base_url, tuple(resources), doc.vocabulary)


def entry_resources(doc: MappingDocument) -> list:
    """Resources advertised in the entry document.

    Anything reachable through another resource's follow-up actions is
    discovered mid-flow, not listed up front.
    """
    referenced = {ra.action_ref for r in doc.resources for ra in r.response_actions}
    return [r for r in doc.resources if r.resource_id not in referenced]


def entry_document_text(doc: MappingDocument) -> str:
    items = [json.loads(serialize_graph(serialize_action(r.descriptor)))
             for r in entry_resources(doc)]
    return json.dumps(items, indent=2)


class MockInventory:
    """In-memory hotel backend: fixed rooms, bookings, a request counter.

    Booking is check-then-insert under one lock, so two overlapping
    bookings can never both succeed.
    """

    def __init__(self) -> None:
        self.rooms = [dict(r) for r in MOCK_ROOMS]
        self.bookings: list[dict] = []
        self.requests = 0
        self.omit_confirmation = False
        self._counter = 0
        self._lock = threading.Lock()

    def search(self, params: dict) -> tuple[int, dict]:
        with self._lock:
            self.requests += 1
        try:
            start, end = params["from"], params["to"]
            adults, children = int(params["adults"]), int(params["children"])
        except (KeyError, ValueError):
            return 400, {"error": "search needs from, to, adults and children"}
        if not (_valid_date(start) and _valid_date(end)):
            return 400, {"error": "from and to must be ISO dates"}
        if start >= end:
            return 400, {"error": "from must precede to"}
        if adults < 1 or children < 0:
            return 400, {"error": "adults must be at least 1, children at least 0"}
        rooms = [{"id": r["id"], "name": r["name"], "price": r["pricePerNight"],
                  "maxAdults": r["maxAdults"], "currency": "EUR",
                  "from": start, "to": end}
                 for r in sorted(self.rooms, key=lambda r: r["id"])
                 if r["maxAdults"] >= adults]
        return 200, {"rooms": rooms}

    def book(self, payload: dict, authorization: str | None) -> tuple[int, dict]:
        with self._lock:
            self.requests += 1
            if authorization != f"Bearer {MOCK_TOKEN}":
                return 401, {"error": "missing or invalid token"}
            try:
                room_id, guest = payload["roomId"], payload["guestName"]
                start, end = payload["from"], payload["to"]
            except (KeyError, TypeError):
                return 400, {"error": "book needs roomId, from, to and guestName"}
            if not (_valid_date(str(start)) and _valid_date(str(end))) or start >= end:
                return 400, {"error": "from must be an ISO date preceding to"}
            if not any(r["id"] == room_id for r in self.rooms):
                return 404, {"error": f"no such room {room_id!r}"}
            for b in self.bookings:
                if b["roomId"] == room_id and start < b["to"] and end > b["from"]:
                    return 409, {"error": f"room {room_id!r} already booked then"}
            self._counter += 1
            booking = {"confirmation": f"C-{self._counter}", "roomId": room_id,
                       "from": start, "to": end, "guestName": guest}
            self.bookings.append(booking)
        if self.omit_confirmation:
            return 200, {}
        return 200, {"confirmation": booking["confirmation"]}


def _echo_payload(method: str, query: dict, headers: dict, body: str) -> dict:
    """Reflect a request; `json` carries the parsed body when it parses."""
    try:
        parsed = json.loads(body) if body else None
    except json.JSONDecodeError:
        parsed = None
    return {"method": method, "path": "/mock/echo", "query": query,
            "headers": headers, "body": body, "json": parsed}


def _resolve_auth(auth: AuthenticationSpec, configured: str | None,
                  incoming: str | None) -> tuple[AuthenticationSpec, str | None]:
    """Pick the credential for a native call.

    Configured secrets win; a token/basic spec without one forwards the
    caller's own Authorization header verbatim.
    """
    if configured is not None:
        if auth.method in ("token", "basic"):
            return replace(auth, token=configured), None
        if auth.method == "custom":
            return replace(auth, value=configured), None
    if auth.method in ("token", "basic") and auth.token is None:
        return replace(auth, method="none"), incoming
    return auth, None


def create_app(config: GatewayConfig | None = None) -> FastAPI:
    config = config or GatewayConfig()
    vocab = load_gateway_vocabulary(config.vocab_paths)
    doc = load_mapping_file(config.mapping_path, vocab)
    if config.backend_override:
        doc = MappingDocument(doc.id, config.backend_override.rstrip("/"),
                              doc.resources, doc.vocabulary)
    doc = rewrite_for_public(doc, config.public_base)
    credentials = dict(config.credentials)
    mock = MockInventory()
    entry_text = entry_document_text(doc)

    app = FastAPI(title="actionctl gateway", docs_url=None, redoc_url=None)
    app.add_middleware(CORSMiddleware, allow_origins=list(config.cors_origins),
                       allow_methods=["*"], allow_headers=["*"])
    app.state.mapping = doc
    app.state.vocabulary = vocab
    app.state.mock = mock

    sessions: dict[str, flow.FlowSession] = {}
    locks: dict[str, threading.Lock] = {}
    registry_lock = threading.Lock()

    # --- invocation pipeline --------------------------------------------

    def dispatch_mock(req) -> tuple[int, str]:
        parts = urlsplit(req.url)
        path = "/" + parts.path.lstrip("/")
        headers = {k.lower(): v for k, v in req.headers}
        if req.method == "GET" and path == "/mock/search":
            status, payload = mock.search(dict(parse_qsl(parts.query)))
        elif req.method == "POST" and path == "/mock/book":
            try:
                body = json.loads(req.body or "{}")
            except json.JSONDecodeError:
                body = {}
            status, payload = mock.book(body, headers.get("authorization"))
        elif path == "/mock/echo":
            status, payload = 200, _echo_payload(
                req.method, dict(parse_qsl(parts.query)), headers, req.body or "")
        else:
            status, payload = 404, {"error": f"no mock endpoint {req.method} {path}"}
        return status, json.dumps(payload)

    def execute(req) -> tuple[int, str] | None:
        if doc.backend_base_url == "internal:mock":
            return dispatch_mock(req)
        try:
            resp = httpx.request(req.method, req.url, headers=list(req.headers),
                                 content=req.body, timeout=10.0)
        except httpx.HTTPError:
            return None
        return resp.status_code, resp.text

    def invoke(rid: str, body_text: str,
               incoming_auth: str | None = None) -> tuple[int, dict]:
        try:
            res = doc.resource(rid)
        except UnresolvedActionRefError:
            return 404, {"detail": f"unknown resource {rid!r}"}
        try:
            g = parse_graph(body_text)
        except ToolkitError as exc:
            return 400, {"detail": f"unreadable action instance: {exc}"}
        if not g.roots:
            return 400, {"detail": "request graph has no root node"}
        report = validate_request_inputs(res.descriptor, g, vocab)
        if not report.ok:
            return 422, report.to_dict()

        auth, passthrough = _resolve_auth(
            res.descriptor.auth, credentials.get(rid), incoming_auth)
        started = time.perf_counter()

        def ms() -> int:
            return int((time.perf_counter() - started) * 1000)

        try:
            req = ground_request(doc, rid, g, auth)
        except ValidationFailedError as exc:
            return 422, exc.report.to_dict()
        except (MissingPathValueError, MissingCredentialsError) as exc:
            return 422, {"detail": str(exc)}
        if passthrough:
            headers = tuple(h for h in req.headers if h[0].lower() != "authorization")
            req = replace(req, headers=headers + (("Authorization", passthrough),))

        outcome = execute(req)
        if outcome is None:
            return 502, {"request": req.to_dict(), "response": None, "nativeStatus": 0,
                         "violations": [], "timing": ms(),
                         "detail": "backend unreachable"}
        native_status, text = outcome
        try:
            lifted = lift_response(doc, rid, text, native_status)
        except NativeParseError as exc:
            return 502, {"request": req.to_dict(), "response": None,
                         "nativeStatus": native_status, "violations": [],
                         "timing": ms(), "detail": str(exc)}
        violations = validate_response_outputs(res.descriptor, lifted, vocab)
        return 200, {"request": req.to_dict(),
                     "response": json.loads(serialize_graph(lifted)),
                     "nativeStatus": native_status,
                     "violations": violations.to_dict()["violations"],
                     "timing": ms()}

    def session_transport(url: str, body_text: str) -> tuple[int, dict]:
        rid = url.rstrip("/").rsplit("/", 1)[-1]
        return invoke(rid, body_text)

    async def read_json(request: Request) -> dict | None:
        raw = await request.body()
        try:
            data = json.loads(raw.decode() or "{}")
        except (UnicodeDecodeError, json.JSONDecodeError):
            return None
        return data if isinstance(data, dict) else None

    # --- annotated surface ----------------------------------------------

    @app.get("/actions")
    def actions_document() -> Response:
        return Response(content=entry_text, media_type=LD_JSON)

    @app.post("/invoke/{rid}")
    async def invoke_resource(rid: str, request: Request) -> JSONResponse:
        body = (await request.body()).decode(errors="replace")
        status, payload = invoke(rid, body, request.headers.get("authorization"))
        return JSONResponse(payload, status_code=status)

    # --- mock backend -----------------------------------------------------

    @app.get("/mock/search")
    def mock_search(request: Request) -> JSONResponse:
        status, payload = mock.search(dict(request.query_params))
        return JSONResponse(payload, status_code=status)

    @app.post("/mock/book")
    async def mock_book(request: Request) -> JSONResponse:
        data = await read_json(request)
        status, payload = mock.book(data if data is not None else {},
                                    request.headers.get("authorization"))
        return JSONResponse(payload, status_code=status)

    @app.api_route("/mock/echo", methods=["GET", "POST"])
    async def mock_echo(request: Request) -> dict:
        return _echo_payload(request.method, dict(request.query_params),
                             dict(request.headers),
                             (await request.body()).decode(errors="replace"))

    @app.get("/mock/stats")
    def mock_stats() -> dict:
        return {"requests": mock.requests, "bookings": len(mock.bookings)}

    @app.post("/mock/config")
    async def mock_config(request: Request) -> JSONResponse:
        data = await read_json(request)
        if data is None:
            return JSONResponse({"detail": "body must be a JSON object"}, status_code=400)
        if "omitConfirmation" in data:
            mock.omit_confirmation = bool(data["omitConfirmation"])
        return JSONResponse({"omitConfirmation": mock.omit_confirmation})

    # --- flow sessions ----------------------------------------------------

    def find_session(sid: str) -> tuple[flow.FlowSession, threading.Lock] | None:
        with registry_lock:
            if sid not in sessions:
                return None
            return sessions[sid], locks[sid]

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request) -> JSONResponse:
        data = await read_json(request)
        if data is None or "actionId" not in data:
            return JSONResponse({"detail": "body must carry actionId"}, status_code=400)
        wanted = data["actionId"]
        matches = [r for r in doc.resources
                   if wanted in (r.resource_id, r.descriptor.id)]
        if not matches:
            return JSONResponse({"detail": f"unknown action {wanted!r}"}, status_code=404)
        s = flow.start_session(matches[0].descriptor, vocab)
        with registry_lock:
            sessions[s.id] = s
            locks[s.id] = threading.Lock()
        return JSONResponse(flow.session_to_dict(s), status_code=201)

    @app.get("/sessions/{sid}")
    def get_session(sid: str) -> JSONResponse:
        found = find_session(sid)
        if found is None:
            return JSONResponse({"detail": f"unknown session {sid!r}"}, status_code=404)
        s, lock = found
        with lock:
            return JSONResponse(flow.session_to_dict(s))

    @app.post("/sessions/{sid}/slots")
    async def fill_session_slot(sid: str, request: Request) -> JSONResponse:
        found = find_session(sid)
        if found is None:
            return JSONResponse({"detail": f"unknown session {sid!r}"}, status_code=404)
        data = await read_json(request)
        if data is None or "path" not in data or "value" not in data:
            return JSONResponse({"detail": "body must carry path and value"},
                                status_code=400)
        s, lock = found
        with lock:
            try:
                flow.fill_slot(s, str(data["path"]), str(data["value"]))
            except flow.StateError as exc:
                return JSONResponse({"detail": str(exc)}, status_code=409)
            except flow.AgentError as exc:
                return JSONResponse({"detail": str(exc), "path": data["path"]},
                                    status_code=422)
            return JSONResponse(flow.session_to_dict(s))

    @app.post("/sessions/{sid}/invoke")
    def invoke_session(sid: str) -> JSONResponse:
        found = find_session(sid)
        if found is None:
            return JSONResponse({"detail": f"unknown session {sid!r}"}, status_code=404)
        s, lock = found
        with lock:
            try:
                flow.invoke_current(s, session_transport)
            except flow.StateError as exc:
                return JSONResponse({"detail": str(exc)}, status_code=409)
            return JSONResponse(flow.session_to_dict(s))

    @app.post("/sessions/{sid}/choose")
    async def choose_in_session(sid: str, request: Request) -> JSONResponse:
        found = find_session(sid)
        if found is None:
            return JSONResponse({"detail": f"unknown session {sid!r}"}, status_code=404)
        data = await read_json(request)
        if data is None or not isinstance(data.get("index"), int):
            return JSONResponse({"detail": "body must carry an integer index"},
                                status_code=400)
        s, lock = found
        with lock:
            try:
                flow.choose(s, data["index"])
            except flow.StateError as exc:
                return JSONResponse({"detail": str(exc)}, status_code=409)
            except flow.IndexOutOfRangeError as exc:
                return JSONResponse({"detail": str(exc)}, status_code=422)
            return JSONResponse(flow.session_to_dict(s))

    if config.console_dir is not None and Path(config.console_dir).is_dir():
        app.mount("/console", StaticFiles(directory=config.console_dir, html=True),
                  name="console")

    return app


def run(config: GatewayConfig | None = None) -> None:
    """Blocking server start; used by the command line."""
    import uvicorn

    config = config or GatewayConfig()
    app = create_app(config)
    uvicorn.run(app, host="0.0.0.0", port=config.port, log_level="warning")
