"""Affect control theory core: impression change, amalgamation, deflection.

Event features are ordered ``Ae Ap Aa Be Bp Ba Oe Op Oa`` (actor,
behavior, object; each in E, P, A).  Impression-change equations are
polynomials in these nine values; each term is a product of feature names
such as ``AeBeOe`` and the constant term is written ``1``.
"""

from __future__ import annotations

import csv
import math
import re
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .lexicon import EpaVector, LexiconEntry

FEATURES = ("Ae", "Ap", "Aa", "Be", "Bp", "Ba", "Oe", "Op", "Oa")
_FEATURE_INDEX = {name: i for i, name in enumerate(FEATURES)}
_BEHAVIOR = (3, 4, 5)
_TERM_TOKEN = re.compile(r"[ABO][epa]")
DEFLECTION_MODES = ("euclidean", "squared")


class EquationError(ValueError):
    pass


class NonlinearBehaviorError(EquationError):
    pass


class SingularSystemError(EquationError):
    pass


class EventFeatures:
    """The nine ABO values of one event; immutable."""

    __slots__ = ("_values",)

    def __init__(self, values: Sequence[float]):
        arr = np.array(values, dtype=float).ravel()
        if arr.shape != (9,):
            raise ValueError(f"EventFeatures needs 9 values, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("event features must be finite")
        arr.setflags(write=False)
        self._values = arr

    @classmethod
    def from_abo(cls, actor: EpaVector, behavior: EpaVector, obj: EpaVector) -> "EventFeatures":
        return cls(np.concatenate([actor.to_array(), behavior.to_array(), obj.to_array()]))

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def actor(self) -> EpaVector:
        return EpaVector.from_array(self._values[0:3])

    @property
    def behavior(self) -> EpaVector:
        return EpaVector.from_array(self._values[3:6])

    @property
    def object(self) -> EpaVector:
        return EpaVector.from_array(self._values[6:9])

    def __getitem__(self, name: str) -> float:
        return float(self._values[_FEATURE_INDEX[name]])

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventFeatures):
            return NotImplemented
        return bool(np.array_equal(self._values, other._values))

    def __hash__(self):
        return hash(self._values.tobytes())

    def __repr__(self) -> str:
        inner = ", ".join(f"{n}={v:.3f}" for n, v in zip(FEATURES, self._values))
        return f"EventFeatures({inner})"


@dataclass(frozen=True, order=True)
class PolyTerm:
    """A product of event features; the empty product is the constant term."""

    factors: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(sorted(self.factors)))
        if any(not 0 <= f < 9 for f in self.factors):
            raise EquationError(f"invalid factor index in {self.factors}")

    @classmethod
    def parse(cls, text: str) -> "PolyTerm":
        text = text.strip()
        if text == "1":
            return cls(())
        tokens = _TERM_TOKEN.findall(text)
        if not tokens or "".join(tokens) != text:
            raise EquationError(f"cannot parse equation term {text!r}")
        return cls(tuple(_FEATURE_INDEX[t] for t in tokens))

    @property
    def degree(self) -> int:
        return len(self.factors)

    @property
    def behavior_degree(self) -> int:
        return sum(1 for f in self.factors if f in _BEHAVIOR)

    def evaluate(self, values: np.ndarray) -> float:
        out = 1.0
        for f in self.factors:
            out *= values[f]
        return out

    def __str__(self) -> str:
        return "".join(FEATURES[f] for f in self.factors) or "1"


class ImpressionEquationSet:
    """Rows of polynomial terms, each with one coefficient per output feature."""

    def __init__(self, terms: Sequence[PolyTerm], coefficients):
        coefficients = np.array(coefficients, dtype=float).reshape(len(terms), 9)
        if not np.all(np.isfinite(coefficients)):
            raise EquationError("equation coefficients must be finite")
        if len(set(terms)) != len(terms):
            dupes = sorted({str(t) for t in terms if list(terms).count(t) > 1})
            raise EquationError(f"duplicate equation terms: {', '.join(dupes)}")
        coefficients.setflags(write=False)
        self.terms = tuple(terms)
        self.coefficients = coefficients

    @classmethod
    def from_mapping(cls, rows: Mapping[str, Mapping[str, float]]) -> "ImpressionEquationSet":
        """Build from ``{term: {output_feature: coefficient}}``; missing outputs are 0."""
        terms, coefs = [], []
        for term, outputs in rows.items():
            unknown = set(outputs) - set(FEATURES)
            if unknown:
                raise EquationError(f"unknown output features {sorted(unknown)}")
            terms.append(PolyTerm.parse(term))
            coefs.append([float(outputs.get(f, 0.0)) for f in FEATURES])
        return cls(terms, np.array(coefs).reshape(len(terms), 9))

    @classmethod
    def identity(cls) -> "ImpressionEquationSet":
        return cls([PolyTerm((i,)) for i in range(9)], np.eye(9))

    def term_values(self, values: np.ndarray) -> np.ndarray:
        return np.array([t.evaluate(values) for t in self.terms])

    def apply(self, pre: EventFeatures) -> EventFeatures:
        return EventFeatures(self.term_values(pre.values) @ self.coefficients)

    def column(self, output: str) -> dict[str, float]:
        j = _FEATURE_INDEX[output]
        return {str(t): float(c) for t, c in zip(self.terms, self.coefficients[:, j]) if c != 0.0}

    def __len__(self) -> int:
        return len(self.terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ImpressionEquationSet):
            return NotImplemented
        mine = {t: tuple(c) for t, c in zip(self.terms, self.coefficients)}
        theirs = {t: tuple(c) for t, c in zip(other.terms, other.coefficients)}
        return mine == theirs

    __hash__ = None


def load_equations(path: str | Path) -> ImpressionEquationSet:
    """Read an equation CSV with header ``term,Ae,Ap,Aa,Be,Bp,Ba,Oe,Op,Oa``."""
    path = Path(path)
    terms, rows = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != ["term", *FEATURES]:
            raise EquationError(f"{path}: expected header term,{','.join(FEATURES)}")
        for row in reader:
            if not row or row[0].startswith("#"):
                continue
            if len(row) != 10:
                raise EquationError(f"{path}:line {reader.line_num}: expected 10 columns")
            try:
                terms.append(PolyTerm.parse(row[0]))
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise EquationError(f"{path}:line {reader.line_num}: {exc}") from None
    return ImpressionEquationSet(terms, np.array(rows).reshape(len(terms), 9))


def save_equations(eqs: ImpressionEquationSet, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["term", *FEATURES])
        for term, coefs in zip(eqs.terms, eqs.coefficients):
            writer.writerow([str(term), *(repr(float(c)) for c in coefs)])


def apply_event(eqs: ImpressionEquationSet, pre: EventFeatures) -> EventFeatures:
    """Post-event transients predicted by *eqs* for the pre-event state *pre*."""
    return eqs.apply(pre)


@dataclass(frozen=True)
class AmalgamationEquationSet:
    """Per output dimension: ``c + m . M + i * I_g`` for modifier M and identity I."""

    constant: tuple[float, float, float] = (0.0, 0.0, 0.0)
    modifier: tuple[tuple[float, float, float], ...] = ((0.0,) * 3,) * 3
    identity: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        const = tuple(float(c) for c in self.constant)
        mod = tuple(tuple(float(c) for c in row) for row in self.modifier)
        ident = tuple(float(c) for c in self.identity)
        if len(const) != 3 or len(ident) != 3 or len(mod) != 3 or any(len(r) != 3 for r in mod):
            raise EquationError("amalgamation needs three output rows")
        if not all(math.isfinite(v) for v in (*const, *ident, *(c for r in mod for c in r))):
            raise EquationError("amalgamation coefficients must be finite")
        object.__setattr__(self, "constant", const)
        object.__setattr__(self, "modifier", mod)
        object.__setattr__(self, "identity", ident)

    def apply(self, modifier: EpaVector, identity: EpaVector) -> EpaVector:
        m = modifier.to_array()
        i = identity.to_array()
        out = np.array(self.constant) + np.array(self.modifier) @ m + np.array(self.identity) * i
        return EpaVector.from_array(out)


AMALGAMATION_COLUMNS = ("output", "const", "Me", "Mp", "Ma", "I")


def load_amalgamation(path: str | Path) -> AmalgamationEquationSet:
    """Read ``output,const,Me,Mp,Ma,I`` rows.

    Output dimensions without a row pass the identity through unchanged,
    with a warning.
    """
    path = Path(path)
    rows: dict[str, list[float]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(h.strip() for h in next(reader, []))
        if header != AMALGAMATION_COLUMNS:
            raise EquationError(f"{path}: expected header {','.join(AMALGAMATION_COLUMNS)}")
        for row in reader:
            if not row or row[0].startswith("#"):
                continue
            if len(row) != 6:
                raise EquationError(f"{path}:line {reader.line_num}: expected 6 columns")
            dim = row[0].strip().lower()
            if dim not in ("e", "p", "a") or dim in rows:
                raise EquationError(f"{path}:line {reader.line_num}: bad or repeated output {row[0]!r}")
            try:
                rows[dim] = [float(v) for v in row[1:]]
            except ValueError:
                raise EquationError(f"{path}:line {reader.line_num}: non-numeric coefficient") from None
    missing = [d for d in "epa" if d not in rows]
    if missing:
        warnings.warn(f"{path.name}: no amalgamation row for {', '.join(missing)}; "
                      "identity passes through unchanged", stacklevel=2)
    full = {d: rows.get(d, [0.0, 0.0, 0.0, 0.0, 1.0]) for d in "epa"}
    return AmalgamationEquationSet(
        constant=tuple(full[d][0] for d in "epa"),
        modifier=tuple(tuple(full[d][1:4]) for d in "epa"),
        identity=tuple(full[d][4] for d in "epa"),
    )


def amalgamate(amalg: AmalgamationEquationSet, modifier: EpaVector, identity: EpaVector) -> EpaVector:
    return amalg.apply(modifier, identity)


def _as_nine(triple) -> np.ndarray:
    if isinstance(triple, EventFeatures):
        return triple.values
    if isinstance(triple, np.ndarray):
        return np.asarray(triple, dtype=float).ravel()
    parts = list(triple)
    if len(parts) == 3 and all(isinstance(p, EpaVector) for p in parts):
        return np.concatenate([p.to_array() for p in parts])
    return np.asarray(parts, dtype=float).ravel()


def _finish(sq: float, mode: str) -> float:
    if mode == "euclidean":
        return math.sqrt(sq)
    if mode == "squared":
        return sq
    raise ValueError(f"deflection mode must be one of {DEFLECTION_MODES}")


def deflection_total(fundamentals, transients, mode: str = "euclidean") -> float:
    """Distance over the nine ABO components.

    Accepts ``EventFeatures``, an ``(actor, behavior, object)`` triple of
    ``EpaVector`` or any 9 numbers.  ``mode="squared"`` gives the classic
    sum of squared differences.
    """
    diff = _as_nine(fundamentals) - _as_nine(transients)
    if diff.shape != (9,):
        raise ValueError("deflection_total needs 9 components per side")
    return _finish(float(diff @ diff), mode)


def deflection_agent(fundamental: EpaVector, transient: EpaVector, mode: str = "euclidean") -> float:
    diff = fundamental.to_array() - transient.to_array()
    return _finish(float(diff @ diff), mode)


def behavior_affine_form(eqs: ImpressionEquationSet, actor: EpaVector, obj: EpaVector
                         ) -> tuple[np.ndarray, np.ndarray]:
    """``(c, M)`` with ``post = c + M @ b`` for fixed actor / object inputs.

    Only valid when no equation term has more than one behavior factor.
    """
    bad = [str(t) for t in eqs.terms if t.behavior_degree > 1]
    if bad:
        raise NonlinearBehaviorError(f"equations are nonlinear in behavior: {', '.join(bad)}")
    base = np.concatenate([actor.to_array(), np.zeros(3), obj.to_array()])
    c = eqs.term_values(base) @ eqs.coefficients
    M = np.empty((9, 3))
    for j, idx in enumerate(_BEHAVIOR):
        probe = base.copy()
        probe[idx] = 1.0
        M[:, j] = eqs.term_values(probe) @ eqs.coefficients - c
    return c, M


def solve_optimal_behavior(eqs: ImpressionEquationSet, actor: EpaVector, obj: EpaVector,
                           actor_transient: EpaVector | None = None,
                           object_transient: EpaVector | None = None) -> EpaVector:
    """Behavior EPA that minimises total deflection of the next event.

    The behavior enters both as the event's behavior input and as its own
    fundamental, so with behavior-affine equations the problem is linear
    least squares.  Transients default to the fundamentals.  The result is
    not clamped to the EPA scale.
    """
    a_t = actor if actor_transient is None else actor_transient
    o_t = obj if object_transient is None else object_transient
    c, M = behavior_affine_form(eqs, a_t, o_t)
    # residual f - post = (f0 - c) - (M - S) b, where S selects the B block
    S = np.zeros((9, 3))
    S[3:6, :] = np.eye(3)
    f0 = np.concatenate([actor.to_array(), np.zeros(3), obj.to_array()])
    A = M - S
    rhs = f0 - c
    Q, Rq = np.linalg.qr(A)
    if not np.isfinite(np.linalg.cond(Rq)) or np.linalg.cond(Rq) > 1e12:
        raise SingularSystemError("deflection is not uniquely minimised over behaviors")
    return EpaVector.from_array(np.linalg.solve(Rq, Q.T @ rhs))


def event_deflection(eqs: ImpressionEquationSet, actor: EpaVector, behavior: EpaVector, obj: EpaVector,
                     actor_transient: EpaVector | None = None, object_transient: EpaVector | None = None,
                     mode: str = "euclidean") -> float:
    """Deflection of a single event, with fundamentals ``(actor, behavior, obj)``."""
    a_t = actor if actor_transient is None else actor_transient
    o_t = obj if object_transient is None else object_transient
    post = apply_event(eqs, EventFeatures.from_abo(a_t, behavior, o_t))
    return deflection_total((actor, behavior, obj), post, mode)


def recommend_modifier(eqs: ImpressionEquationSet, amalg: AmalgamationEquationSet,
                       base_identity: EpaVector, next_behavior: EpaVector, other_party: EpaVector,
                       candidates: Iterable[LexiconEntry], role: str = "actor",
                       mode: str = "euclidean") -> list[tuple[LexiconEntry, float]]:
    """Rank modifier candidates by the deflection of the next event.

    Each candidate is amalgamated with *base_identity*; the modified
    identity takes the actor or object slot (per *role*) opposite
    *other_party*, and the event is scored with ``deflection_total``.
    """
    if role not in ("actor", "object"):
        raise ValueError("role must be 'actor' or 'object'")
    scored = []
    for entry in candidates:
        modified = amalgamate(amalg, entry.epa, base_identity)
        if role == "actor":
            score = event_deflection(eqs, modified, next_behavior, other_party, mode=mode)
        else:
            score = event_deflection(eqs, other_party, next_behavior, modified, mode=mode)
        scored.append((entry, score))
    scored.sort(key=lambda item: (item[1], item[0].term))
    return scored
