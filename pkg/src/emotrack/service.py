"""Read-only JSON-over-HTTP front end for chatbot integration.

All artifacts are loaded once at startup and never mutated, so the
threaded server needs no locking.

Endpoints::

    GET  /health                      -> "ok"
    POST /estimate  {"tokens": [...]} -> {"estimates": [{token, kind, e, p, a, provenance}]}
    POST /simulate  {"transcript": {...}, "deflection": "euclidean"} -> trajectory rows
    POST /recommend {"actor", "object", "behavior", "role", "k"}   -> {"recommendations": [...]}
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Mapping, Sequence

from .embeddings import EmbeddingTable
from .engine import DEFLECTION_MODES, AmalgamationEquationSet, ImpressionEquationSet, recommend_modifier
from .lexicon import AffectiveLexicon, Kind, normalize_term
from .mapper import MappingModel, estimate_epa
from .simulation import Transcript, TranscriptError, UnresolvedTermError, simulate_variants, trajectories_to_json

logger = logging.getLogger(__name__)


class RequestError(ValueError):
    """Malformed request (HTTP 400)."""


class UnresolvableError(LookupError):
    """Well-formed request naming something we cannot resolve (HTTP 422)."""


@dataclass(frozen=True)
class ServiceState:
    lexicon: AffectiveLexicon
    equations: ImpressionEquationSet
    amalgamation: AmalgamationEquationSet
    model: MappingModel | None = None
    embeddings: EmbeddingTable | None = None


def estimate_tokens(state: ServiceState, tokens: Sequence, kind: str = "emoji") -> dict:
    """Lexicon value when the token is already known, otherwise a model estimate."""
    out = []
    for token in tokens:
        if not isinstance(token, str) or not token.strip():
            raise RequestError(f"tokens must be non-empty strings, got {token!r}")
        entry = state.lexicon.get(token, kind)
        if entry is not None:
            out.append({"token": token, "kind": entry.kind.value, **entry.epa.to_dict(),
                        "provenance": entry.provenance.value})
            continue
        key = normalize_term(token, kind)
        vec = state.embeddings.get(key) if state.embeddings is not None else None
        if vec is None or state.model is None:
            raise UnresolvableError(f"unknown token {token!r}")
        epa = estimate_epa(state.model, vec)
        out.append({"token": token, "kind": Kind(kind).value, **epa.to_dict(), "provenance": "estimated"})
    return {"estimates": out}


def simulate_json(state: ServiceState, transcript: Transcript, mode: str = "euclidean") -> str:
    return trajectories_to_json(simulate_variants(transcript, state.lexicon, state.equations,
                                                  state.amalgamation, mode=mode))


def recommend(state: ServiceState, actor: str, obj: str, behavior: str, role: str = "actor",
              k: int = 3, mode: str = "euclidean") -> list[dict]:
    """Emoji for the *role* party ranked by the deflection of the next event."""
    if role not in ("actor", "object"):
        raise RequestError("role must be 'actor' or 'object'")
    if k < 1:
        raise RequestError("k must be >= 1")
    entries = {}
    for label, term, kind in (("actor", actor, Kind.IDENTITY), ("object", obj, Kind.IDENTITY),
                              ("behavior", behavior, Kind.BEHAVIOR)):
        entry = state.lexicon.get(term, kind)
        if entry is None:
            raise UnresolvableError(f"{label} {kind.value} {term!r} not in lexicon")
        entries[label] = entry.epa
    candidates = state.lexicon.of_kind(Kind.EMOJI)
    if not candidates:
        raise UnresolvableError("no candidates: lexicon has no emoji entries")
    base, other = (entries["actor"], entries["object"]) if role == "actor" else (entries["object"], entries["actor"])
    ranked = recommend_modifier(state.equations, state.amalgamation, base, entries["behavior"], other,
                                candidates, role=role, mode=mode)
    return [{"rank": i + 1, "emoji": e.term, "deflection": score} for i, (e, score) in enumerate(ranked[:k])]


def _mode(body: Mapping) -> str:
    mode = body.get("deflection", "euclidean")
    if mode not in DEFLECTION_MODES:
        raise RequestError(f"deflection must be one of {DEFLECTION_MODES}")
    return mode


def handle(state: ServiceState, method: str, path: str, body: bytes | None) -> tuple[int, str, str]:
    """Dispatch one request; returns ``(status, content_type, text)``."""
    try:
        if method == "GET" and path == "/health":
            return 200, "text/plain; charset=utf-8", "ok"
        if method != "POST" or path not in ("/estimate", "/simulate", "/recommend"):
            return 404, "application/json", json.dumps({"error": f"no route {method} {path}"})
        try:
            payload = json.loads(body or b"{}")
        except (ValueError, UnicodeDecodeError):
            raise RequestError("request body is not valid JSON") from None
        if not isinstance(payload, dict):
            raise RequestError("request body must be a JSON object")
        if path == "/estimate":
            tokens = payload.get("tokens")
            if not isinstance(tokens, list):
                raise RequestError("'tokens' must be a list")
            text = json.dumps(estimate_tokens(state, tokens, payload.get("kind", "emoji")),
                              indent=2, ensure_ascii=False) + "\n"
        elif path == "/simulate":
            if "transcript" not in payload:
                raise RequestError("'transcript' is required")
            try:
                transcript = Transcript.from_dict(payload["transcript"])
            except TranscriptError as exc:
                raise RequestError(str(exc)) from None
            text = simulate_json(state, transcript, _mode(payload))
        else:
            try:
                k = int(payload.get("k", 3))
                args = (str(payload["actor"]), str(payload["object"]), str(payload["behavior"]))
            except (KeyError, TypeError, ValueError):
                raise RequestError("'actor', 'object' and 'behavior' are required; 'k' must be an integer") from None
            text = json.dumps({"recommendations": recommend(state, *args, role=payload.get("role", "actor"),
                                                            k=k, mode=_mode(payload))},
                              indent=2, ensure_ascii=False) + "\n"
        return 200, "application/json; charset=utf-8", text
    except RequestError as exc:
        return 400, "application/json", json.dumps({"error": str(exc)}, ensure_ascii=False)
    except (UnresolvableError, UnresolvedTermError, ValueError) as exc:
        message = exc.args[0] if exc.args else str(exc)
        return 422, "application/json", json.dumps({"error": message}, ensure_ascii=False)


def make_handler(state: ServiceState):
    class Handler(BaseHTTPRequestHandler):
        server_version = "emotrack"

        def _respond(self, method: str):
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length) if length else None
            status, ctype, text = handle(state, method, self.path, body)
            data = text.encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_GET(self):
            self._respond("GET")

        def do_POST(self):
            self._respond("POST")

        def log_message(self, fmt, *args):
            logger.info("%s %s", self.address_string(), fmt % args)

    return Handler


def make_server(state: ServiceState, host: str = "127.0.0.1", port: int = 8080) -> ThreadingHTTPServer:
    return ThreadingHTTPServer((host, port), make_handler(state))
