"""Embedding -> EPA mapping.

The pipeline is: seeded train/test split, a least-squares translation
matrix ``R`` taking embeddings into a 3-d space, then for each of E, P, A a
stepwise-selected regression on the second-order expansion of the
translated vector.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .embeddings import AlignedPairs, EmbeddingTable
from .lexicon import AffectiveLexicon, EpaVector, Kind, LexiconEntry, Provenance, normalize_term

logger = logging.getLogger(__name__)

DIMENSIONS = ("e", "p", "a")
FEATURE_NAMES = ("1", "e", "p", "a", "e2", "p2", "a2", "ep", "ea", "pa")
CRITERIA = ("bic", "aic")

# condition number above which the unregularised normal system is refused
_MAX_CONDITION = 1e12


class MappingError(ValueError):
    pass


class SingularSystemError(MappingError):
    pass


class CorrelationUndefinedError(MappingError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.85
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")


def split_train_test(pairs: AlignedPairs, split: SplitSpec = SplitSpec()) -> tuple[AlignedPairs, AlignedPairs]:
    """Seeded shuffle split; each side keeps the original (term-sorted) order."""
    n = len(pairs)
    if n < 2:
        raise MappingError("need at least 2 pairs to split")
    f = split.train_fraction
    if n * min(f, 1.0 - f) < 1.0:
        raise MappingError("split produces empty side")
    n_train = int(math.floor(f * n + 0.5))
    n_train = min(max(n_train, 1), n - 1)
    perm = np.random.default_rng(split.seed).permutation(n)
    return pairs.subset(np.sort(perm[:n_train])), pairs.subset(np.sort(perm[n_train:]))


def _design(x: np.ndarray, intercept: bool) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if intercept:
        x = np.hstack([x, np.ones((x.shape[0], 1))])
    return x


def fit_translation_matrix(x: np.ndarray, z: np.ndarray, ridge: float = 0.0,
                           intercept: bool = False) -> np.ndarray:
    """Least-squares ``R`` minimising ``sum ||x_i R - z_i||^2 + ridge ||R||_F^2``.

    Solved through a QR factorisation rather than forming ``(X^T X)^{-1}``.
    With ``intercept=True`` a constant column is appended to ``x`` and the
    returned matrix has ``d + 1`` rows (the last one is the offset).
    """
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    X = _design(x, intercept)
    Z = np.asarray(z, dtype=float)
    if X.shape[0] != Z.shape[0]:
        raise ValueError("x and z must have the same number of rows")
    n, d = X.shape
    if ridge > 0:
        X = np.vstack([X, math.sqrt(ridge) * np.eye(d)])
        Z = np.vstack([Z, np.zeros((d, Z.shape[1]))])
    elif n < d:
        raise SingularSystemError(
            f"{n} training pairs for {d} unknowns per column; use ridge > 0")
    Q, Rq = np.linalg.qr(X, mode="reduced")
    cond = np.linalg.cond(Rq)
    if not np.isfinite(cond) or cond > _MAX_CONDITION:
        raise SingularSystemError(
            f"normal matrix is singular or ill-conditioned (cond={cond:.3g}); use ridge > 0")
    return np.linalg.solve(Rq, Q.T @ Z)


def translate(x: np.ndarray, R: np.ndarray, intercept: bool = False) -> np.ndarray:
    return _design(np.atleast_2d(x), intercept) @ R


def second_order_expand(v: Sequence[float]) -> np.ndarray:
    """``(1, e, p, a, e^2, p^2, a^2, e*p, e*a, p*a)`` for one translated vector."""
    return second_order_features(np.asarray(v, dtype=float).reshape(1, 3))[0]


def second_order_features(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    e, p, a = t[:, 0], t[:, 1], t[:, 2]
    return np.column_stack([np.ones_like(e), e, p, a, e * e, p * p, a * a, e * p, e * a, p * a])


@dataclass(frozen=True)
class StepwiseRegression:
    selected: tuple[int, ...]
    coefficients: tuple[float, ...]
    criterion: str = "bic"
    score: float = float("nan")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(FEATURE_NAMES[i] for i in self.selected)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.coefficients))

    @classmethod
    def from_dict(cls, coefs: dict[str, float], criterion: str = "bic") -> "StepwiseRegression":
        idx = sorted(FEATURE_NAMES.index(name) for name in coefs)
        return cls(tuple(idx), tuple(float(coefs[FEATURE_NAMES[i]]) for i in idx), criterion)

    def predict(self, features: np.ndarray) -> np.ndarray:
        features = np.atleast_2d(features)
        return features[:, list(self.selected)] @ np.asarray(self.coefficients)


def _ols(X: np.ndarray, y: np.ndarray):
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return beta, float(resid @ resid)


def information_criterion(rss: float, n: int, k: int, criterion: str = "bic",
                          rss_floor: float = 0.0) -> float:
    """Gaussian-likelihood AIC / BIC up to an additive constant.

    ``rss_floor`` keeps exactly-fitting models finite; any two models at
    the floor are then compared on their parameter counts alone.
    """
    rss = max(rss, rss_floor, np.finfo(float).tiny)
    penalty = k * math.log(n) if criterion == "bic" else 2.0 * k
    return n * math.log(rss / n) + penalty


def _rss_floor(y: np.ndarray) -> float:
    # residuals below ~1e-9 of the target's scale are treated as an exact fit
    scale = max(float(np.std(y)), float(np.max(np.abs(y))) if y.size else 0.0, 1.0)
    return y.shape[0] * (1e-9 * scale) ** 2


def subset_score(features: np.ndarray, target: np.ndarray, subset: Iterable[int],
                 criterion: str = "bic") -> float:
    """Criterion value of the OLS fit on *subset*; ``inf`` if rank deficient."""
    cols = sorted(set(subset))
    X = features[:, cols]
    if np.linalg.matrix_rank(X) < len(cols):
        return math.inf
    _, rss = _ols(X, target)
    return information_criterion(rss, len(target), len(cols), criterion, _rss_floor(target))


def stepwise_fit(features: np.ndarray, target: np.ndarray, criterion: str = "bic") -> StepwiseRegression:
    """Forward selection from the intercept, then one backward elimination pass.

    Column 0 of *features* is taken to be the intercept and is always kept.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}")
    F = np.asarray(features, dtype=float)
    y = np.asarray(target, dtype=float)
    n, m = F.shape
    if n < m + 2:
        raise MappingError(f"stepwise_fit needs at least {m + 2} rows, got {n}")
    selected = [0]
    best = subset_score(F, y, selected, criterion)
    while True:
        candidates = [j for j in range(1, m) if j not in selected]
        scored = [(subset_score(F, y, selected + [j], criterion), j) for j in candidates]
        scored = [s for s in scored if s[0] < best]
        if not scored:
            break
        best, j = min(scored)
        selected.append(j)
    while True:
        scored = [(subset_score(F, y, [c for c in selected if c != j], criterion), j)
                  for j in selected if j != 0]
        scored = [s for s in scored if s[0] < best]
        if not scored:
            break
        best, j = min(scored)
        selected.remove(j)
    selected.sort()
    X = F[:, selected]
    if np.linalg.matrix_rank(X) < len(selected):
        raise MappingError("selected design matrix is rank deficient")
    beta, _ = _ols(X, y)
    return StepwiseRegression(tuple(selected), tuple(float(b) for b in beta), criterion, best)


@dataclass(frozen=True, eq=False)
class MappingModel:
    """Translation matrix plus one stepwise regression per EPA dimension."""

    R: np.ndarray
    regressions: dict[str, StepwiseRegression]
    intercept_used: bool = False
    ridge: float = 0.0
    seed: int | None = None
    train_fraction: float | None = None
    train_size: int | None = None
    test_size: int | None = None
    criterion: str = "bic"
    metrics: dict[str, dict[str, float]] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        R = np.array(self.R, dtype=float)
        if R.ndim != 2 or R.shape[1] != 3 or not np.all(np.isfinite(R)):
            raise ValueError("R must be a finite (d, 3) matrix")
        R.setflags(write=False)
        object.__setattr__(self, "R", R)
        for dim in DIMENSIONS:
            if 0 not in self.regressions[dim].selected:
                raise ValueError(f"regression for {dim} must include the intercept")

    @property
    def dimension(self) -> int:
        return self.R.shape[0] - (1 if self.intercept_used else 0)

    def translate(self, x: np.ndarray) -> np.ndarray:
        return translate(x, self.R, self.intercept_used)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """EPA estimates for each row of *x*, shape ``(n, 3)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dimension:
            raise ValueError(f"embedding has {x.shape[1]} components, model expects {self.dimension}")
        feats = second_order_features(self.translate(x))
        return np.column_stack([self.regressions[d].predict(feats) for d in DIMENSIONS])

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "intercept_used": self.intercept_used,
            "ridge": self.ridge,
            "seed": self.seed,
            "train_fraction": self.train_fraction,
            "train_size": self.train_size,
            "test_size": self.test_size,
            "criterion": self.criterion,
            "R": self.R.tolist(),
            "regressions": {d: self.regressions[d].as_dict() for d in DIMENSIONS},
            "metrics": self.metrics,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MappingModel":
        criterion = data.get("criterion", "bic")
        model = cls(
            R=np.array(data["R"], dtype=float),
            regressions={d: StepwiseRegression.from_dict(data["regressions"][d], criterion)
                         for d in DIMENSIONS},
            intercept_used=bool(data["intercept_used"]),
            ridge=float(data.get("ridge", 0.0)),
            seed=data.get("seed"),
            train_fraction=data.get("train_fraction"),
            train_size=data.get("train_size"),
            test_size=data.get("test_size"),
            criterion=criterion,
            metrics=data.get("metrics", {}),
            metadata=data.get("metadata", {}),
        )
        if model.dimension != data["dimension"]:
            raise ValueError("model dimension does not match the shape of R")
        return model

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False, sort_keys=False)

    @classmethod
    def from_json(cls, text: str) -> "MappingModel":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "MappingModel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def __eq__(self, other) -> bool:
        if not isinstance(other, MappingModel):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x, dtype=float) - np.mean(x)
    y = np.asarray(y, dtype=float) - np.mean(y)
    denom = math.sqrt(float(x @ x) * float(y @ y))
    if denom == 0.0:
        raise CorrelationUndefinedError("correlation undefined for zero-variance input")
    return float(np.clip((x @ y) / denom, -1.0, 1.0))


def score_estimates(estimates: np.ndarray, targets: np.ndarray) -> dict[str, dict[str, float]]:
    estimates = np.atleast_2d(estimates)
    targets = np.atleast_2d(targets)
    out = {}
    for j, dim in enumerate(DIMENSIONS):
        rmse = float(np.sqrt(np.mean((estimates[:, j] - targets[:, j]) ** 2)))
        out[dim] = {"r": pearson(estimates[:, j], targets[:, j]), "rmse": rmse}
    return out


def evaluate_mapping(model: MappingModel, test: AlignedPairs) -> dict[str, dict[str, float]]:
    """Per-dimension Pearson r and RMSE of the model's estimates on *test*."""
    if len(test) < 3:
        raise MappingError("evaluation needs at least 3 test pairs")
    return score_estimates(model.predict(test.x), test.z)


def fit_mapping(pairs: AlignedPairs, split: SplitSpec = SplitSpec(), ridge: float = 0.0,
                intercept: bool = False, criterion: str = "bic", metadata: dict | None = None
                ) -> MappingModel:
    train, test = split_train_test(pairs, split)
    R = fit_translation_matrix(train.x, train.z, ridge=ridge, intercept=intercept)
    feats = second_order_features(translate(train.x, R, intercept))
    regressions = {d: stepwise_fit(feats, train.z[:, j], criterion) for j, d in enumerate(DIMENSIONS)}
    model = MappingModel(R, regressions, intercept_used=intercept, ridge=float(ridge), seed=split.seed,
                         train_fraction=split.train_fraction, train_size=len(train),
                         test_size=len(test), criterion=criterion, metadata=dict(metadata or {}))
    metrics = evaluate_mapping(model, test) if len(test) >= 3 else {}
    for dim, m in metrics.items():
        logger.info("test %s: r=%.3f rmse=%.3f", dim, m["r"], m["rmse"])
    object.__setattr__(model, "metrics", metrics)
    return model


def estimate_epa(model: MappingModel, embedding: Sequence[float]) -> EpaVector:
    embedding = np.asarray(embedding, dtype=float)
    if embedding.ndim != 1 or embedding.shape[0] != model.dimension:
        raise ValueError(f"embedding length {embedding.shape} does not match model dimension {model.dimension}")
    return EpaVector.from_array(model.predict(embedding[None, :])[0])


@dataclass
class ExtensionReport:
    added: list[str] = field(default_factory=list)
    missing: list[str] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)


def extend_lexicon(model: MappingModel, table: EmbeddingTable, tokens: Iterable[tuple[str, Kind | str]],
                   base: AffectiveLexicon) -> tuple[AffectiveLexicon, ExtensionReport]:
    """Add model estimates for *tokens* to *base*.

    Surveyed entries are never replaced; earlier estimates are.
    """
    entries = dict(base.entries)
    report = ExtensionReport()
    for token, kind in tokens:
        kind = Kind(kind)
        existing = base.get(token, kind)
        if existing is not None and existing.provenance is Provenance.SURVEYED:
            report.skipped.append(token)
            continue
        key_term = normalize_term(token, kind)
        vec = table.get(key_term)
        if vec is None:
            report.missing.append(token)
            continue
        entry = LexiconEntry(key_term, kind, estimate_epa(model, vec), Provenance.ESTIMATED)
        entries[entry.key] = entry
        report.added.append(token)
    return AffectiveLexicon.from_entries(entries.values(), **dict(base.metadata)), report


def dictionary_correlation(first: AffectiveLexicon, second: AffectiveLexicon,
                           kinds: Iterable[Kind | str] = (Kind.IDENTITY, Kind.BEHAVIOR, Kind.MODIFIER)
                           ) -> dict[str, dict[str, float]]:
    """Agreement between two dictionaries on the terms they share."""
    a, b = [], []
    for kind in kinds:
        for entry in first.of_kind(kind):
            other = second.get(entry.term, kind)
            if other is not None:
                a.append(entry.epa.to_array())
                b.append(other.epa.to_array())
    if len(a) < 3:
        raise MappingError("dictionaries share fewer than 3 terms")
    out = score_estimates(np.array(a), np.array(b))
    for m in out.values():
        m["n"] = len(a)
    return out
