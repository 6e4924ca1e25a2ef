"""Turn-by-turn replay of a scripted two-party chat through the ACT engine.

Each participant carries a transient impression from event to event.  On a
turn the speaker is the actor and the other participant the object; an
emoji on the turn modifies the speaker's identity for that turn only.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .engine import (
    AmalgamationEquationSet,
    EventFeatures,
    ImpressionEquationSet,
    amalgamate,
    apply_event,
    deflection_agent,
    deflection_total,
)
from .lexicon import AffectiveLexicon, EpaVector, Kind

DEFAULT_VARIANT = "default"
TRANSIENT_COLUMNS = ("t_Ae", "t_Ap", "t_Aa", "t_Be", "t_Bp", "t_Ba", "t_Oe", "t_Op", "t_Oa")
FUNDAMENTAL_COLUMNS = ("f_Ae", "f_Ap", "f_Aa")
DEFLECTION_COLUMNS = ("deflection", "actor_deflection", "object_deflection")
CSV_COLUMNS = ("variant", "turn", "actor", "behavior",
               *TRANSIENT_COLUMNS, *FUNDAMENTAL_COLUMNS, *DEFLECTION_COLUMNS)


class TranscriptError(ValueError):
    pass


class UnresolvedTermError(TranscriptError):
    def __init__(self, message: str, turn: int | None = None, term: str | None = None):
        self.turn = turn
        self.term = term
        super().__init__(message)


@dataclass(frozen=True)
class Participant:
    name: str
    identity: str


@dataclass(frozen=True)
class Turn:
    index: int
    speaker: str
    behavior: str
    emoji: str | None = None
    variants: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class Transcript:
    participants: tuple[Participant, Participant]
    turns: tuple[Turn, ...]

    def __post_init__(self):
        participants = tuple(self.participants)
        turns = tuple(self.turns)
        if len(participants) != 2:
            raise TranscriptError("a transcript needs exactly two participants")
        names = [p.name for p in participants]
        if names[0] == names[1]:
            raise TranscriptError("participant names must differ")
        last = 0
        for turn in turns:
            if turn.index <= last:
                raise TranscriptError(f"turn indices must increase strictly (turn {turn.index})")
            last = turn.index
            if turn.speaker not in names:
                raise TranscriptError(f"turn {turn.index}: unknown speaker {turn.speaker!r}")
        object.__setattr__(self, "participants", participants)
        object.__setattr__(self, "turns", turns)

    def other(self, name: str) -> Participant:
        return next(p for p in self.participants if p.name != name)

    def participant(self, name: str) -> Participant:
        return next(p for p in self.participants if p.name == name)

    def variant_names(self) -> list[str]:
        names: list[str] = []
        for turn in self.turns:
            for name in turn.variants:
                if name not in names:
                    names.append(name)
        return names

    def variant_assignments(self) -> dict[str, dict[int, str]]:
        """``{variant: {turn index: emoji}}`` collected from the turns' variant columns."""
        return {name: {t.index: t.variants[name] for t in self.turns if name in t.variants}
                for name in self.variant_names()}

    def with_emojis(self, assignment: Mapping[int, str]) -> "Transcript":
        turns = tuple(Turn(t.index, t.speaker, t.behavior, assignment.get(t.index), t.variants)
                      for t in self.turns)
        return Transcript(self.participants, turns)

    def to_dict(self) -> dict:
        turns = []
        for t in self.turns:
            row = {"index": t.index, "speaker": t.speaker, "behavior": t.behavior}
            if t.emoji is not None:
                row["emoji"] = t.emoji
            if t.variants:
                row["variants"] = dict(t.variants)
            turns.append(row)
        return {"participants": [{"name": p.name, "identity": p.identity} for p in self.participants],
                "turns": turns}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Transcript":
        try:
            participants = tuple(Participant(str(p["name"]), str(p["identity"]))
                                 for p in data["participants"])
            turns = tuple(Turn(int(t["index"]), str(t["speaker"]), str(t["behavior"]),
                               t.get("emoji"), dict(t.get("variants", {})))
                          for t in data["turns"])
        except (KeyError, TypeError, ValueError) as exc:
            raise TranscriptError(f"malformed transcript: {exc!r}") from None
        return cls(participants, turns)


def load_transcript(path: str | Path) -> Transcript:
    return Transcript.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_transcript(transcript: Transcript, path: str | Path) -> None:
    Path(path).write_text(json.dumps(transcript.to_dict(), indent=2, ensure_ascii=False) + "\n",
                          encoding="utf-8")


@dataclass(frozen=True)
class TrajectoryPoint:
    turn: int
    actor: str
    object: str
    behavior: str
    emoji: str | None
    actor_fundamental: EpaVector
    behavior_fundamental: EpaVector
    object_fundamental: EpaVector
    transients: EventFeatures
    deflection: float
    actor_deflection: float
    object_deflection: float

    def participant_deflection(self, name: str) -> float:
        return self.actor_deflection if name == self.actor else self.object_deflection

    def participant_transient(self, name: str) -> EpaVector:
        return self.transients.actor if name == self.actor else self.transients.object


def _resolve(lexicon: AffectiveLexicon, term: str, kind: Kind, turn: int | None) -> EpaVector:
    entry = lexicon.get(term, kind)
    if entry is None:
        where = f"turn {turn}: " if turn is not None else ""
        raise UnresolvedTermError(f"{where}{kind.value} {term!r} not found in lexicon", turn, term)
    return entry.epa


def simulate(transcript: Transcript, lexicon: AffectiveLexicon, eqs: ImpressionEquationSet,
             amalg: AmalgamationEquationSet, mode: str = "euclidean") -> list[TrajectoryPoint]:
    """One :class:`TrajectoryPoint` per turn of *transcript*."""
    base = {p.name: _resolve(lexicon, p.identity, Kind.IDENTITY, None) for p in transcript.participants}
    # resolve everything before running so errors surface before any output
    behaviors = {t.index: _resolve(lexicon, t.behavior, Kind.BEHAVIOR, t.index) for t in transcript.turns}
    emojis = {t.index: _resolve(lexicon, t.emoji, Kind.EMOJI, t.index)
              for t in transcript.turns if t.emoji is not None}
    transient = dict(base)
    points = []
    for turn in transcript.turns:
        speaker = turn.speaker
        other = transcript.other(speaker).name
        if turn.index in emojis:
            actor_f = amalgamate(amalg, emojis[turn.index], base[speaker])
        else:
            actor_f = base[speaker]
        behavior_f = behaviors[turn.index]
        object_f = base[other]
        pre = EventFeatures.from_abo(transient[speaker], behavior_f, transient[other])
        post = apply_event(eqs, pre)
        points.append(TrajectoryPoint(
            turn=turn.index, actor=speaker, object=other, behavior=turn.behavior, emoji=turn.emoji,
            actor_fundamental=actor_f, behavior_fundamental=behavior_f, object_fundamental=object_f,
            transients=post,
            deflection=deflection_total((actor_f, behavior_f, object_f), post, mode),
            actor_deflection=deflection_agent(actor_f, post.actor, mode),
            object_deflection=deflection_agent(object_f, post.object, mode),
        ))
        transient[speaker] = post.actor
        transient[other] = post.object
    return points


def simulate_variants(transcript: Transcript, lexicon: AffectiveLexicon, eqs: ImpressionEquationSet,
                      amalg: AmalgamationEquationSet, variants: Mapping[str, Mapping[int, str]] | None = None,
                      mode: str = "euclidean") -> dict[str, list[TrajectoryPoint]]:
    """Run the same behavior script once per emoji assignment.

    With ``variants=None`` the transcript's own ``emoji`` fields run as
    ``"default"`` followed by each variant column found in the turns.
    """
    if variants is None:
        runs = {DEFAULT_VARIANT: transcript}
        runs.update({name: transcript.with_emojis(a) for name, a in transcript.variant_assignments().items()})
    else:
        runs = {name: transcript.with_emojis(a) for name, a in variants.items()}
    return {name: simulate(t, lexicon, eqs, amalg, mode) for name, t in runs.items()}


def _as_named(trajectories) -> dict[str, list[TrajectoryPoint]]:
    if isinstance(trajectories, Mapping):
        return dict(trajectories)
    return {DEFAULT_VARIANT: list(trajectories)}


def trajectory_rows(trajectories) -> list[dict]:
    """Flat records, one per (variant, turn), in the export column order."""
    rows = []
    for variant, points in _as_named(trajectories).items():
        for pt in points:
            row = {"variant": variant, "turn": pt.turn, "actor": pt.actor, "behavior": pt.behavior}
            row.update({c: float(v) for c, v in zip(TRANSIENT_COLUMNS, pt.transients.values)})
            row.update({c: v for c, v in zip(FUNDAMENTAL_COLUMNS, pt.actor_fundamental)})
            row.update({"deflection": pt.deflection, "actor_deflection": pt.actor_deflection,
                        "object_deflection": pt.object_deflection})
            rows.append(row)
    return rows


def trajectories_to_csv(trajectories) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in trajectory_rows(trajectories):
        writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in CSV_COLUMNS])
    return buf.getvalue()


def trajectories_to_json(trajectories) -> str:
    return json.dumps(trajectory_rows(trajectories), indent=2, ensure_ascii=False) + "\n"


def read_trajectory_csv(path: str | Path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = []
        for raw in csv.DictReader(fh):
            row = dict(raw)
            row["turn"] = int(row["turn"])
            for col in (*TRANSIENT_COLUMNS, *FUNDAMENTAL_COLUMNS, *DEFLECTION_COLUMNS):
                row[col] = float(row[col])
            rows.append(row)
        return rows


def export_trajectory(trajectories, path: str | Path, format: str | None = None) -> None:
    """Write trajectories as CSV or JSON (chosen from the suffix when *format* is None)."""
    path = Path(path)
    fmt = format or ("json" if path.suffix.lower() == ".json" else "csv")
    if fmt == "csv":
        text = trajectories_to_csv(trajectories)
    elif fmt == "json":
        text = trajectories_to_json(trajectories)
    else:
        raise ValueError("format must be 'csv' or 'json'")
    path.write_text(text, encoding="utf-8", newline="\n")


SVG_SERIES = ("deflection", "agent_deflection", "epa_actor", "epa_object")
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
            "#bcbd22", "#17becf")


def _series_lines(named: dict[str, list[TrajectoryPoint]], series: str):
    lines = []
    for variant, points in named.items():
        if series == "deflection":
            lines.append((variant, [(p.turn, p.deflection) for p in points]))
        elif series == "agent_deflection":
            names = []
            for p in points:
                for n in (p.actor, p.object):
                    if n not in names:
                        names.append(n)
            for n in names:
                lines.append((f"{variant} / {n}", [(p.turn, p.participant_deflection(n)) for p in points]))
        elif series in ("epa_actor", "epa_object"):
            for j, dim in enumerate("EPA"):
                vals = []
                for p in points:
                    vec = p.transients.actor if series == "epa_actor" else p.transients.object
                    vals.append((p.turn, tuple(vec)[j]))
                lines.append((f"{variant} / {dim}", vals))
        else:
            raise ValueError(f"series must be one of {SVG_SERIES}")
    return lines


def render_svg(trajectories, series: str = "deflection", path: str | Path | None = None,
               width: int = 720, height: int = 420, title: str | None = None) -> str:
    """Line chart of one series per turn; returns the SVG text and writes it if *path* is given.

    ``epa_actor`` / ``epa_object`` plot the post-event actor / object
    transients, one line per (variant, dimension).
    """
    named = _as_named(trajectories)
    if not named or not any(named.values()):
        raise ValueError("render_svg needs at least one non-empty trajectory")
    lines = _series_lines(named, series)
    xs = [x for _, pts in lines for x, _ in pts]
    ys = [y for _, pts in lines for _, y in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(min(ys), 0.0), max(ys)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1.0
    left, right, top, bottom = 60, 180, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">'
           f'{_esc(title or series.replace("_", " "))}</text>',
           f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
           f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>']
    for x in sorted(set(xs)):
        out.append(f'<text x="{sx(x):.2f}" y="{top + ph + 16}" text-anchor="middle">{x}</text>')
    for k in range(5):
        yv = y0 + (y1 - y0) * k / 4
        out.append(f'<text x="{left - 6}" y="{sy(yv) + 4:.2f}" text-anchor="end">{yv:.2f}</text>')
        out.append(f'<line x1="{left}" y1="{sy(yv):.2f}" x2="{left + pw}" y2="{sy(yv):.2f}" '
                   f'stroke="#dddddd"/>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">turn</text>')
    ylabel = "deflection" if "deflection" in series else "EPA"
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">{ylabel}</text>')
    for i, (label, pts) in enumerate(lines):
        color = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}">'
                   f'<title>{_esc(label)}</title></polyline>')
        ly = top + 14 + 18 * i
        out.append(f'<line x1="{left + pw + 12}" y1="{ly - 4}" x2="{left + pw + 32}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 38}" y="{ly}">{_esc(label)}</text>')
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8", newline="\n")
    return text


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def participant_track(points: Sequence[TrajectoryPoint], name: str) -> list[tuple[int, EpaVector]]:
    """Post-event transient of *name* after every turn, whichever role it played."""
    return [(p.turn, p.participant_transient(name)) for p in points]
