"""EPA vectors and the affective lexicon ("affective dictionary").

A lexicon maps ``(term, kind)`` keys to EPA sentiments.  Word terms are
lower-cased and use underscores between words (``shout_at``); emoji terms
are kept as the exact codepoint sequence.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

import numpy as np

EPA_LIMIT = 4.3
CSV_HEADER = ("term", "kind", "e", "p", "a", "provenance")


class LexiconError(ValueError):
    """Raised for malformed lexicon files or invalid entries."""


class LexiconParseError(LexiconError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class DuplicateEntryError(LexiconError):
    """Two entries share the same ``(term, kind)`` key."""


class OutOfRangeWarning(UserWarning):
    """An EPA component lies outside the nominal [-4.3, 4.3] scale."""


class Kind(str, Enum):
    IDENTITY = "identity"
    BEHAVIOR = "behavior"
    MODIFIER = "modifier"
    EMOJI = "emoji"


class Provenance(str, Enum):
    SURVEYED = "surveyed"
    ESTIMATED = "estimated"


@dataclass(frozen=True)
class EpaVector:
    """A point in Evaluation / Potency / Activity space."""

    e: float
    p: float
    a: float

    def __post_init__(self):
        for name in ("e", "p", "a"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"EPA component {name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)

    @classmethod
    def from_array(cls, values) -> "EpaVector":
        values = np.asarray(values, dtype=float).ravel()
        if values.shape != (3,):
            raise ValueError(f"expected 3 EPA components, got shape {values.shape}")
        return cls(float(values[0]), float(values[1]), float(values[2]))

    def to_array(self) -> np.ndarray:
        return np.array([self.e, self.p, self.a], dtype=float)

    def to_dict(self) -> dict[str, float]:
        return {"e": self.e, "p": self.p, "a": self.a}

    @property
    def out_of_range(self) -> bool:
        return any(abs(v) > EPA_LIMIT for v in (self.e, self.p, self.a))

    def distance(self, other: "EpaVector") -> float:
        return math.sqrt((self.e - other.e) ** 2 + (self.p - other.p) ** 2 + (self.a - other.a) ** 2)

    def __iter__(self) -> Iterator[float]:
        return iter((self.e, self.p, self.a))


def normalize_term(term: str, kind: Kind | str) -> str:
    """Canonical key for *term*: emojis untouched apart from trimming."""
    kind = Kind(kind)
    term = term.strip()
    if kind is not Kind.EMOJI:
        term = "_".join(term.lower().split())
    if not term:
        raise LexiconError("term must be non-empty")
    return term


@dataclass(frozen=True)
class LexiconEntry:
    term: str
    kind: Kind
    epa: EpaVector
    provenance: Provenance = Provenance.SURVEYED

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        object.__setattr__(self, "term", normalize_term(self.term, kind))

    @property
    def key(self) -> tuple[str, Kind]:
        return (self.term, self.kind)


@dataclass(frozen=True, eq=False)
class AffectiveLexicon:
    """Immutable store of :class:`LexiconEntry` keyed by ``(term, kind)``.

    Equality compares entries only; ``metadata`` (source name, culture tag,
    collection year, ...) is descriptive.
    """

    entries: Mapping[tuple[str, Kind], LexiconEntry] = field(default_factory=dict)
    metadata: Mapping[str, str] = field(default_factory=dict)

    @classmethod
    def from_entries(cls, entries: Iterable[LexiconEntry], **metadata) -> "AffectiveLexicon":
        table: dict[tuple[str, Kind], LexiconEntry] = {}
        for entry in entries:
            if entry.key in table:
                raise DuplicateEntryError(f"duplicate entry {entry.term!r} ({entry.kind.value})")
            _warn_if_out_of_range(entry)
            table[entry.key] = entry
        return cls(entries=MappingProxyType(table), metadata=MappingProxyType(dict(metadata)))

    def get(self, term: str, kind: Kind | str) -> LexiconEntry | None:
        try:
            key = (normalize_term(term, kind), Kind(kind))
        except LexiconError:
            return None
        return self.entries.get(key)

    def lookup(self, term: str, kind: Kind | str) -> LexiconEntry:
        entry = self.get(term, kind)
        if entry is None:
            raise KeyError(f"term {term!r} of kind {Kind(kind).value!r} not in lexicon")
        return entry

    def of_kind(self, kind: Kind | str) -> list[LexiconEntry]:
        kind = Kind(kind)
        return sorted((e for e in self.entries.values() if e.kind is kind), key=lambda e: e.term)

    def merged(self, other: "AffectiveLexicon") -> "AffectiveLexicon":
        """Union of two lexicons; overlapping keys are an error."""
        return AffectiveLexicon.from_entries(
            list(self.entries.values()) + list(other.entries.values()), **dict(self.metadata)
        )

    def __contains__(self, key) -> bool:
        term, kind = key
        return self.get(term, kind) is not None

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[LexiconEntry]:
        return iter(sorted(self.entries.values(), key=lambda e: (e.kind.value, e.term)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, AffectiveLexicon):
            return NotImplemented
        return dict(self.entries) == dict(other.entries)

    def __hash__(self):
        return hash(frozenset(self.entries.items()))


def _warn_if_out_of_range(entry: LexiconEntry) -> None:
    if entry.epa.out_of_range:
        warnings.warn(
            f"{entry.kind.value} {entry.term!r} has EPA {tuple(entry.epa)} outside "
            f"[-{EPA_LIMIT}, {EPA_LIMIT}]",
            OutOfRangeWarning,
            stacklevel=3,
        )


def load_lexicon(path: str | Path) -> AffectiveLexicon:
    """Read a lexicon CSV (``term,kind,e,p,a,provenance``)."""
    path = Path(path)
    entries = []
    seen: dict[tuple[str, Kind], int] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise LexiconParseError("missing header", line=1, path=str(path))
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise LexiconParseError(f"expected header {','.join(CSV_HEADER)}", line=1, path=str(path))
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise LexiconParseError(
                    f"expected {len(CSV_HEADER)} columns, got {len(row)}", line=line, path=str(path)
                )
            term, kind, e, p, a, provenance = row
            try:
                kind_ = Kind(kind.strip())
                prov = Provenance(provenance.strip())
            except ValueError as exc:
                raise LexiconParseError(str(exc), line=line, path=str(path)) from None
            try:
                epa = EpaVector(float(e), float(p), float(a))
            except ValueError:
                raise LexiconParseError(f"non-numeric or non-finite EPA value in {row[2:5]}",
                                        line=line, path=str(path)) from None
            try:
                entry = LexiconEntry(term, kind_, epa, prov)
            except LexiconError as exc:
                raise LexiconParseError(str(exc), line=line, path=str(path)) from None
            if entry.key in seen:
                raise DuplicateEntryError(
                    f"{path}:line {line}: duplicate entry {entry.term!r} ({kind_.value}), "
                    f"first seen on line {seen[entry.key]}"
                )
            seen[entry.key] = line
            entries.append(entry)
    return AffectiveLexicon.from_entries(entries, source=path.name)


def save_lexicon(lexicon: AffectiveLexicon, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for entry in lexicon:
            # repr() keeps floats exact across a round trip
            writer.writerow([entry.term, entry.kind.value, repr(entry.epa.e), repr(entry.epa.p),
                             repr(entry.epa.a), entry.provenance.value])


def nearest_entries(lexicon: AffectiveLexicon, query: EpaVector, kind: Kind | str,
                    k: int = 1) -> list[tuple[LexiconEntry, float]]:
    """The *k* entries of *kind* closest to *query*, nearest first.

    Ties in distance are broken by term order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scored = [(entry, entry.epa.distance(query)) for entry in lexicon.of_kind(kind)]
    scored.sort(key=lambda item: (item[1], item[0].term))
    return scored[:k]
