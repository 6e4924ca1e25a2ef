"""Readers and writers for word2vec-style embedding files.

Both layouts are streamed one line / record at a time so that multi-GB
files can be filtered down to a working vocabulary without holding the
whole file in memory.

Text layout::

    [count dim]
    token v1 v2 ... vd

Binary layout: ``b"count dim\\n"`` followed by ``count`` records of
``token + b" "`` and ``dim`` little-endian float32 values.  Records may be
separated by a newline (as the original word2vec tool writes them).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Collection, Iterable, Sequence

import numpy as np

from .lexicon import AffectiveLexicon, Kind

logger = logging.getLogger(__name__)

_FLOAT32_LE = np.dtype("<f4")


class EmbeddingParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        prefix = f"{path}:" if path else ""
        if line is not None:
            prefix += f"line {line}: "
        elif prefix:
            prefix += " "
        super().__init__(prefix + message)


class NoOverlapError(ValueError):
    """The lexicon and the embedding table share no terms."""


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """Token -> vector table backed by a single ``(n, dimension)`` float32 array."""

    dimension: int
    tokens: tuple[str, ...]
    vectors: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if vectors.ndim != 2 or vectors.shape != (len(self.tokens), self.dimension):
            raise ValueError(
                f"vectors must have shape ({len(self.tokens)}, {self.dimension}), got {vectors.shape}"
            )
        if not np.all(np.isfinite(vectors)):
            raise ValueError("embedding vectors must be finite")
        index = {}
        for i, token in enumerate(self.tokens):
            if token in index:
                raise ValueError(f"duplicate token {token!r}")
            index[token] = i
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_dict(cls, mapping: dict[str, Sequence[float]], **metadata) -> "EmbeddingTable":
        tokens = tuple(mapping)
        if not tokens:
            raise ValueError("cannot infer dimension of an empty mapping")
        vectors = np.array([np.asarray(mapping[t], dtype=np.float32) for t in tokens])
        return cls(vectors.shape[1], tokens, vectors, dict(metadata))

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def __getitem__(self, token: str) -> np.ndarray:
        return self.vectors[self._index[token]]

    def get(self, token: str):
        i = self._index.get(token)
        return None if i is None else self.vectors[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingTable):
            return NotImplemented
        return (self.dimension == other.dimension and self.tokens == other.tokens
                and np.array_equal(self.vectors, other.vectors))

    __hash__ = None


def _is_header(parts: list[str]) -> bool:
    return len(parts) == 2 and all(p.isdigit() for p in parts)


def parse_embeddings_text(path: str | Path, vocabulary: Collection[str] | None = None) -> EmbeddingTable:
    """Parse a word2vec text file.

    If *vocabulary* is given only those tokens are kept; every line is still
    validated.  A leading ``count dim`` header is optional; when present the
    number of data lines must equal ``count``.
    """
    path = Path(path)
    keep = None if vocabulary is None else set(vocabulary)
    declared_count = None
    dim = None
    tokens: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()
    n_lines = 0
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.rstrip().split(" ")
            if lineno == 1 and _is_header(parts):
                declared_count, dim = int(parts[0]), int(parts[1])
                if dim < 1:
                    raise EmbeddingParseError("dimension must be positive", lineno, str(path))
                continue
            token, values = parts[0], parts[1:]
            if not token:
                raise EmbeddingParseError("empty token", lineno, str(path))
            if dim is None:
                dim = len(values)
                if dim < 1:
                    raise EmbeddingParseError("line has no vector components", lineno, str(path))
            if len(values) != dim:
                raise EmbeddingParseError(
                    f"expected {dim} components for {token!r}, got {len(values)}", lineno, str(path))
            try:
                vec = np.array([float(v) for v in values], dtype=np.float32)
            except ValueError:
                raise EmbeddingParseError(f"non-numeric component for {token!r}", lineno, str(path)) from None
            if not np.all(np.isfinite(vec)):
                raise EmbeddingParseError(f"non-finite component for {token!r}", lineno, str(path))
            if token in seen:
                raise EmbeddingParseError(f"duplicate token {token!r}", lineno, str(path))
            seen.add(token)
            n_lines += 1
            if keep is None or token in keep:
                tokens.append(token)
                rows.append(vec)
    if dim is None:
        raise EmbeddingParseError("file contains no embeddings", path=str(path))
    if declared_count is not None and declared_count != n_lines:
        raise EmbeddingParseError(
            f"header declares {declared_count} tokens but file has {n_lines}", path=str(path))
    vectors = np.vstack(rows) if rows else np.zeros((0, dim), dtype=np.float32)
    return EmbeddingTable(dim, tuple(tokens), vectors, _metadata(path, n_lines, keep))


def _metadata(path: Path, n_read: int, keep) -> dict:
    return {"source": path.name, "token_count": n_read,
            "vocabulary_filter": "none" if keep is None else f"{len(keep)} tokens"}


def parse_embeddings_binary(path: str | Path, vocabulary: Collection[str] | None = None) -> EmbeddingTable:
    """Parse the word2vec binary layout; same semantics as :func:`parse_embeddings_text`."""
    path = Path(path)
    keep = None if vocabulary is None else set(vocabulary)
    tokens: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()
    with path.open("rb") as fh:
        header = fh.readline()
        try:
            count, dim = (int(x) for x in header.split())
        except ValueError:
            raise EmbeddingParseError("malformed header, expected 'count dim'", 1, str(path)) from None
        if dim < 1 or count < 0:
            raise EmbeddingParseError("header counts must be positive", 1, str(path))
        nbytes = dim * _FLOAT32_LE.itemsize
        for record in range(1, count + 1):
            token = _read_token(fh, path, record)
            buf = fh.read(nbytes)
            if len(buf) != nbytes:
                raise EmbeddingParseError(
                    f"truncated vector for {token!r} ({len(buf)} of {nbytes} bytes)", record, str(path))
            vec = np.frombuffer(buf, dtype=_FLOAT32_LE).astype(np.float32)
            if not np.all(np.isfinite(vec)):
                raise EmbeddingParseError(f"non-finite component for {token!r}", record, str(path))
            if token in seen:
                raise EmbeddingParseError(f"duplicate token {token!r}", record, str(path))
            seen.add(token)
            if keep is None or token in keep:
                tokens.append(token)
                rows.append(vec)
        if fh.read().strip():
            raise EmbeddingParseError(f"data beyond the {count} records declared in the header",
                                      path=str(path))
    vectors = np.vstack(rows) if rows else np.zeros((0, dim), dtype=np.float32)
    return EmbeddingTable(dim, tuple(tokens), vectors, _metadata(path, count, keep))


def _read_token(fh, path: Path, record: int) -> str:
    chunks = bytearray()
    while True:
        ch = fh.read(1)
        if not ch:
            raise EmbeddingParseError("unexpected end of file while reading token", record, str(path))
        if ch == b" ":
            break
        if ch == b"\n" and not chunks:
            continue
        chunks += ch
    if not chunks:
        raise EmbeddingParseError("empty token", record, str(path))
    try:
        return chunks.decode("utf-8")
    except UnicodeDecodeError:
        raise EmbeddingParseError("token is not valid UTF-8", record, str(path)) from None


def load_embeddings(path: str | Path, binary: bool | None = None,
                    vocabulary: Collection[str] | None = None) -> EmbeddingTable:
    """Dispatch on *binary*, or on the ``.bin`` suffix when it is None."""
    path = Path(path)
    if binary is None:
        binary = path.suffix == ".bin"
    parser = parse_embeddings_binary if binary else parse_embeddings_text
    return parser(path, vocabulary=vocabulary)


def write_embeddings_text(table: EmbeddingTable, path: str | Path, header: bool = True) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        if header:
            fh.write(f"{len(table)} {table.dimension}\n")
        for token, vec in zip(table.tokens, table.vectors):
            fh.write(token + " " + " ".join(repr(float(v)) for v in vec) + "\n")


def write_embeddings_binary(table: EmbeddingTable, path: str | Path) -> None:
    with Path(path).open("wb") as fh:
        fh.write(f"{len(table)} {table.dimension}\n".encode("ascii"))
        for token, vec in zip(table.tokens, table.vectors):
            fh.write(token.encode("utf-8") + b" ")
            fh.write(np.asarray(vec, dtype=_FLOAT32_LE).tobytes())
            fh.write(b"\n")


@dataclass(frozen=True, eq=False)
class AlignedPairs:
    """Rows ``(token, x_i, z_i)`` linking embedding vectors to surveyed EPA."""

    tokens: tuple[str, ...]
    x: np.ndarray
    z: np.ndarray
    missing: tuple[str, ...] = ()

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        z = np.asarray(self.z, dtype=float)
        if x.ndim != 2 or z.shape != (x.shape[0], 3) or len(self.tokens) != x.shape[0]:
            raise ValueError("AlignedPairs needs x (n, d), z (n, 3) and n tokens")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("tokens in AlignedPairs must be unique")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "tokens", tuple(self.tokens))

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def dimension(self) -> int:
        return self.x.shape[1]

    def subset(self, indices: Iterable[int]) -> "AlignedPairs":
        idx = np.asarray(list(indices), dtype=int)
        return AlignedPairs(tuple(self.tokens[i] for i in idx), self.x[idx], self.z[idx])


_KIND_ORDER = (Kind.IDENTITY, Kind.BEHAVIOR, Kind.MODIFIER, Kind.EMOJI)


def align_with_lexicon(table: EmbeddingTable, lexicon: AffectiveLexicon,
                       kinds: Collection[Kind | str] = (Kind.IDENTITY, Kind.BEHAVIOR, Kind.MODIFIER)
                       ) -> AlignedPairs:
    """Pair each lexicon term of *kinds* with its embedding, sorted by term.

    Terms absent from *table* are listed in ``missing``.  A term that occurs
    under several of the requested kinds is used once, taking the first kind
    in identity/behavior/modifier/emoji order.
    """
    wanted = {Kind(k) for k in kinds}
    chosen: dict[str, object] = {}
    for kind in _KIND_ORDER:
        if kind not in wanted:
            continue
        for entry in lexicon.of_kind(kind):
            if entry.term in chosen:
                logger.info("term %r appears under several kinds; keeping %s",
                            entry.term, chosen[entry.term].kind.value)
                continue
            chosen[entry.term] = entry
    found, missing = [], []
    for term in sorted(chosen):
        (found if term in table else missing).append(chosen[term])
    if not found:
        raise NoOverlapError("no overlap between lexicon terms and embedding vocabulary")
    if missing:
        logger.info("%d lexicon terms have no embedding", len(missing))
    x = np.array([table[e.term] for e in found], dtype=float)
    z = np.array([e.epa.to_array() for e in found], dtype=float)
    return AlignedPairs(tuple(e.term for e in found), x, z, tuple(e.term for e in missing))
