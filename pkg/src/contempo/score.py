"""Symbolic score model and parsers.

A :class:`Score` is a flat, single-stream list of notes in beat time
(quarter note = 1 beat) plus dynamics/wedge markings and time signatures.
Two input formats are supported: a strict JSON schema (see
:func:`parse_score_json`) and a partwise MusicXML subset
(:func:`parse_musicxml`).
"""

import json
import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

LOGGER = logging.getLogger(__name__)

DYNAMICS_LEVELS = ("pp", "p", "mp", "mf", "f", "ff")
MARKING_KINDS = DYNAMICS_LEVELS + ("crescendo", "diminuendo")

# onsets closer than this are considered the same temporal position
ONSET_EPS = 1e-9

_STEP_SEMITONES = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}


class ScoreError(ValueError):
    """Invalid score input (malformed document or broken invariant)."""


@dataclass(frozen=True)
class ScoreNote:
    id: str
    pitch: int
    onset_beats: float
    duration_beats: float
    voice: int = 1
    accent: bool = False
    fermata: bool = False
    slur_member: bool = False

    def __post_init__(self):
        if not 0 <= self.pitch <= 127:
            raise ScoreError(f"note {self.id!r}: pitch {self.pitch} outside [0, 127]")
        if self.onset_beats < 0:
            raise ScoreError(f"note {self.id!r}: onset must be >= 0")
        if self.duration_beats <= 0:
            raise ScoreError(f"note {self.id!r}: duration must be positive")


@dataclass(frozen=True)
class Marking:
    """A dynamics mark (point, end == start) or a wedge span."""

    kind: str
    start_beats: float
    end_beats: float

    def __post_init__(self):
        if self.kind not in MARKING_KINDS:
            raise ScoreError(f"unknown marking kind {self.kind!r}")
        if self.end_beats < self.start_beats:
            raise ScoreError(f"marking {self.kind!r}: end before start")


@dataclass(frozen=True)
class TimeSignature:
    numerator: int
    denominator: int
    start_beats: float

    def __post_init__(self):
        if self.numerator < 1 or self.denominator < 1:
            raise ScoreError("time signature members must be positive")

    @property
    def measure_beats(self) -> float:
        """Measure length in quarter-note beats."""
        return self.numerator * 4.0 / self.denominator


def _sort_key(note: ScoreNote):
    return (note.onset_beats, note.pitch, note.voice, note.id)


@dataclass(frozen=True)
class Score:
    """Validated, canonically sorted score.

    Notes are sorted by (onset, pitch, voice, id); a time signature always
    covers beat 0 (4/4 is inserted when none is given).
    """

    notes: tuple[ScoreNote, ...]
    markings: tuple[Marking, ...] = ()
    time_signatures: tuple[TimeSignature, ...] = (TimeSignature(4, 4, 0.0),)
    title: str = ""

    def __post_init__(self):
        if not self.notes:
            raise ScoreError("score has no notes")
        notes = tuple(sorted(self.notes, key=_sort_key))
        seen = set()
        for n in notes:
            if n.id in seen:
                raise ScoreError(f"duplicate note id {n.id!r}")
            seen.add(n.id)
        sigs = tuple(sorted(self.time_signatures, key=lambda s: s.start_beats))
        starts = [s.start_beats for s in sigs]
        if len(set(starts)) != len(starts):
            raise ScoreError("duplicate time signature start")
        if not sigs or sigs[0].start_beats > 0:
            sigs = (TimeSignature(4, 4, 0.0),) + sigs
        object.__setattr__(self, "notes", notes)
        object.__setattr__(self, "markings", tuple(self.markings))
        object.__setattr__(self, "time_signatures", sigs)


@dataclass(frozen=True)
class OnsetIndex:
    """Distinct score onsets and the note ids starting at each."""

    onsets: tuple[float, ...]
    note_groups: tuple[tuple[str, ...], ...]
    note_to_onset: dict[str, int] = field(repr=False, default_factory=dict)


def build_onset_index(score: Score) -> OnsetIndex:
    """Group score notes by distinct onset position.

    Onsets closer than ``ONSET_EPS`` collapse into one group; the group's
    onset value is the first note's.
    """
    onsets: list[float] = []
    groups: list[list[str]] = []
    for note in score.notes:
        if onsets and note.onset_beats - onsets[-1] <= ONSET_EPS:
            groups[-1].append(note.id)
        else:
            onsets.append(note.onset_beats)
            groups.append([note.id])
    note_to_onset = {nid: t for t, group in enumerate(groups) for nid in group}
    return OnsetIndex(tuple(onsets), tuple(tuple(g) for g in groups), note_to_onset)


# ---------------------------------------------------------------------------
# JSON format

_TOP_KEYS = {"title", "time_signatures", "notes", "markings", "slurs"}
_SIG_KEYS = {"num", "den", "start"}
_NOTE_KEYS = {"id", "pitch", "onset", "duration", "voice", "accent", "fermata"}
_MARKING_KEYS = {"kind", "start", "end"}
_SLUR_KEYS = {"start", "end"}


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise ScoreError(f"{path}: missing required field {key!r}")
    return obj[key]


def _reject_unknown(obj: dict, allowed: set, path: str):
    for key in obj:
        if key not in allowed:
            raise ScoreError(f"{path}: unknown key {key!r}")


def parse_score_json(data: bytes) -> Score:
    """Parse the documented JSON score schema into a validated Score.

    Every schema violation is reported with the path of the offending
    element, e.g. ``notes[3].duration``.
    """
    try:
        raw = json.loads(data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ScoreError(f"malformed JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ScoreError("top level: expected an object")
    _reject_unknown(raw, _TOP_KEYS, "top level")

    title = raw.get("title", "")
    if not isinstance(title, str):
        raise ScoreError("title: expected a string")

    sigs = []
    for i, item in enumerate(raw.get("time_signatures", [])):
        path = f"time_signatures[{i}]"
        if not isinstance(item, dict):
            raise ScoreError(f"{path}: expected an object")
        _reject_unknown(item, _SIG_KEYS, path)
        num = _require(item, "num", path)
        den = _require(item, "den", path)
        start = _require(item, "start", path)
        if not (_is_int(num) and _is_int(den)) or num < 1 or den < 1:
            raise ScoreError(f"{path}: num/den must be positive integers")
        if not _is_number(start) or start < 0:
            raise ScoreError(f"{path}.start: expected a number >= 0")
        sigs.append(TimeSignature(num, den, float(start)))

    notes_raw = _require(raw, "notes", "top level")
    if not isinstance(notes_raw, list) or not notes_raw:
        raise ScoreError("notes: expected a non-empty array")
    notes = []
    ids = set()
    for i, item in enumerate(notes_raw):
        path = f"notes[{i}]"
        if not isinstance(item, dict):
            raise ScoreError(f"{path}: expected an object")
        _reject_unknown(item, _NOTE_KEYS, path)
        nid = _require(item, "id", path)
        pitch = _require(item, "pitch", path)
        onset = _require(item, "onset", path)
        duration = _require(item, "duration", path)
        if not isinstance(nid, str) or not nid:
            raise ScoreError(f"{path}.id: expected a non-empty string")
        if nid in ids:
            raise ScoreError(f"{path}.id: duplicate note id {nid!r}")
        ids.add(nid)
        if not _is_int(pitch) or not 0 <= pitch <= 127:
            raise ScoreError(f"{path}.pitch: expected an integer in [0, 127]")
        if not _is_number(onset) or onset < 0:
            raise ScoreError(f"{path}.onset: expected a number >= 0")
        if not _is_number(duration) or duration <= 0:
            raise ScoreError(f"{path}.duration: duration must be positive")
        voice = item.get("voice", 1)
        if not _is_int(voice):
            raise ScoreError(f"{path}.voice: expected an integer")
        for flag in ("accent", "fermata"):
            if flag in item and not isinstance(item[flag], bool):
                raise ScoreError(f"{path}.{flag}: expected a boolean")
        notes.append(
            ScoreNote(
                id=nid,
                pitch=pitch,
                onset_beats=float(onset),
                duration_beats=float(duration),
                voice=voice,
                accent=item.get("accent", False),
                fermata=item.get("fermata", False),
            )
        )

    markings = []
    for i, item in enumerate(raw.get("markings", [])):
        path = f"markings[{i}]"
        if not isinstance(item, dict):
            raise ScoreError(f"{path}: expected an object")
        _reject_unknown(item, _MARKING_KEYS, path)
        kind = _require(item, "kind", path)
        start = _require(item, "start", path)
        end = _require(item, "end", path)
        if kind not in MARKING_KINDS:
            raise ScoreError(f"{path}.kind: unknown kind {kind!r}")
        if not (_is_number(start) and _is_number(end)):
            raise ScoreError(f"{path}: start/end must be numbers")
        if end < start:
            raise ScoreError(f"{path}: end before start")
        markings.append(Marking(kind, float(start), float(end)))

    slur_spans = []
    for i, item in enumerate(raw.get("slurs", [])):
        path = f"slurs[{i}]"
        if not isinstance(item, dict):
            raise ScoreError(f"{path}: expected an object")
        _reject_unknown(item, _SLUR_KEYS, path)
        start = _require(item, "start", path)
        end = _require(item, "end", path)
        if not (_is_number(start) and _is_number(end)) or end < start:
            raise ScoreError(f"{path}: expected numbers with end >= start")
        slur_spans.append((float(start), float(end)))

    notes = _apply_slur_spans(notes, slur_spans)
    return Score(tuple(notes), tuple(markings), tuple(sigs), title)


def _apply_slur_spans(notes: list[ScoreNote], spans: list[tuple[float, float]]) -> list[ScoreNote]:
    if not spans:
        return notes
    out = []
    for n in notes:
        member = any(s - ONSET_EPS <= n.onset_beats <= e + ONSET_EPS for s, e in spans)
        if member and not n.slur_member:
            n = ScoreNote(n.id, n.pitch, n.onset_beats, n.duration_beats, n.voice, n.accent, n.fermata, True)
        out.append(n)
    return out


def serialize_score(score: Score) -> bytes:
    """Serialize to the JSON schema; inverse of :func:`parse_score_json`."""
    onset_index = build_onset_index(score)
    slur_onsets = [
        t
        for t, group in enumerate(onset_index.note_groups)
        if any(_note_by_id(score, nid).slur_member for nid in group)
    ]
    slurs = []
    for t in slur_onsets:
        if slurs and slurs[-1][1] == t - 1:
            slurs[-1] = (slurs[-1][0], t)
        else:
            slurs.append((t, t))
    doc = {
        "title": score.title,
        "time_signatures": [
            {"num": s.numerator, "den": s.denominator, "start": s.start_beats}
            for s in score.time_signatures
        ],
        "notes": [
            {
                "id": n.id,
                "pitch": n.pitch,
                "onset": n.onset_beats,
                "duration": n.duration_beats,
                "voice": n.voice,
                "accent": n.accent,
                "fermata": n.fermata,
            }
            for n in score.notes
        ],
        "markings": [
            {"kind": m.kind, "start": m.start_beats, "end": m.end_beats} for m in score.markings
        ],
        "slurs": [
            {"start": onset_index.onsets[a], "end": onset_index.onsets[b]} for a, b in slurs
        ],
    }
    return json.dumps(doc, indent=2).encode("utf-8")


def _note_by_id(score: Score, nid: str) -> ScoreNote:
    for n in score.notes:
        if n.id == nid:
            return n
    raise KeyError(nid)


# ---------------------------------------------------------------------------
# MusicXML subset

_DYNAMICS_TAGS = set(DYNAMICS_LEVELS)


def parse_musicxml(data: bytes) -> Score:
    """Parse a partwise MusicXML document restricted to the supported subset.

    Durations are converted from divisions to beats (quarter note = 1);
    tied note pairs merge into a single note; dynamics, wedges, slurs,
    accents and fermatas map onto markings and note flags. Elements outside
    the subset are skipped with a warning. Note ids are assigned as
    ``n1..nN`` in canonical note order.
    """
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise ScoreError(f"invalid XML: {exc}") from exc
    if root.tag != "score-partwise":
        raise ScoreError(f"unsupported document root {root.tag!r} (need score-partwise)")

    title = ""
    movement = root.find("movement-title")
    work = root.find("work/work-title")
    if movement is not None and movement.text:
        title = movement.text.strip()
    elif work is not None and work.text:
        title = work.text.strip()

    parts = root.findall("part")
    if not parts:
        raise ScoreError("document has no part")
    if len(parts) > 1:
        LOGGER.warning("multi-part score: keeping first part, skipping %d", len(parts) - 1)

    state = _PartState()
    for measure in parts[0].findall("measure"):
        state.begin_measure()
        for elem in measure:
            state.handle(elem)
        state.end_measure()
    return state.finish(title)


class _RawNote:
    __slots__ = ("pitch", "onset", "duration", "voice", "accent", "fermata", "slur_member",
                 "tie_start", "tie_stop")

    def __init__(self, pitch, onset, duration, voice):
        self.pitch = pitch
        self.onset = onset
        self.duration = duration
        self.voice = voice
        self.accent = False
        self.fermata = False
        self.slur_member = False
        self.tie_start = False
        self.tie_stop = False


class _PartState:
    """Cursor-based traversal of one MusicXML part."""

    def __init__(self):
        self.divisions = None
        self.signatures: list[TimeSignature] = []
        self.measure_start = 0.0
        self.position = 0.0
        self.notes: list[_RawNote] = []
        self.markings: list[Marking] = []
        self.open_wedges: list[tuple[str, float]] = []
        self.open_slurs = 0
        self.slur_spans: list[tuple[float, float]] = []
        self.last_onset = 0.0

    def begin_measure(self):
        self.position = 0.0

    def end_measure(self):
        sig = self.signatures[-1] if self.signatures else TimeSignature(4, 4, 0.0)
        self.measure_start += sig.measure_beats

    @property
    def cursor(self) -> float:
        return self.measure_start + self.position

    def _beats(self, divisions_value: float) -> float:
        if self.divisions is None:
            raise ScoreError("note duration before <divisions> was set")
        return divisions_value / self.divisions

    def handle(self, elem: ET.Element):
        tag = elem.tag
        if tag == "attributes":
            self._handle_attributes(elem)
        elif tag == "note":
            self._handle_note(elem)
        elif tag == "backup":
            self.position -= self._beats(float(elem.findtext("duration", "0")))
        elif tag == "forward":
            self.position += self._beats(float(elem.findtext("duration", "0")))
        elif tag == "direction":
            self._handle_direction(elem)
        elif tag in ("barline", "print", "sound"):
            pass
        else:
            LOGGER.warning("skipping unsupported element <%s>", tag)

    def _handle_attributes(self, elem: ET.Element):
        div = elem.findtext("divisions")
        if div is not None:
            self.divisions = int(div)
            if self.divisions < 1:
                raise ScoreError("divisions must be positive")
        time = elem.find("time")
        if time is not None:
            num = int(time.findtext("beats", "4"))
            den = int(time.findtext("beat-type", "4"))
            self.signatures.append(TimeSignature(num, den, self.measure_start))

    def _handle_note(self, elem: ET.Element):
        if elem.find("grace") is not None:
            LOGGER.warning("skipping grace note")
            return
        duration = self._beats(float(elem.findtext("duration", "0")))
        is_chord = elem.find("chord") is not None
        onset = self.last_onset if is_chord else self.cursor
        if elem.find("rest") is not None:
            if not is_chord:
                self.position += duration
            return
        pitch_elem = elem.find("pitch")
        if pitch_elem is None:
            LOGGER.warning("skipping unpitched note")
            if not is_chord:
                self.position += duration
            return
        step = pitch_elem.findtext("step", "C").strip()
        octave = int(pitch_elem.findtext("octave", "4"))
        alter = int(float(pitch_elem.findtext("alter", "0")))
        midi = 12 * (octave + 1) + _STEP_SEMITONES[step] + alter
        voice = int(elem.findtext("voice", "1"))

        note = _RawNote(midi, onset, duration, voice)
        for tie in elem.findall("tie"):
            if tie.get("type") == "start":
                note.tie_start = True
            elif tie.get("type") == "stop":
                note.tie_stop = True
        notations = elem.find("notations")
        if notations is not None:
            if notations.find("articulations/accent") is not None:
                note.accent = True
            if notations.find("fermata") is not None:
                note.fermata = True
            for slur in notations.findall("slur"):
                stype = slur.get("type")
                if stype == "start":
                    if self.open_slurs == 0:
                        self.slur_spans.append((onset, onset))
                    self.open_slurs += 1
                elif stype == "stop" and self.open_slurs > 0:
                    self.open_slurs -= 1
                    if self.open_slurs == 0:
                        start = self.slur_spans[-1][0]
                        self.slur_spans[-1] = (start, onset)
        self.notes.append(note)
        if not is_chord:
            self.last_onset = onset
            self.position += duration

    def _handle_direction(self, elem: ET.Element):
        for dtype in elem.findall("direction-type"):
            dyn = dtype.find("dynamics")
            if dyn is not None:
                for child in dyn:
                    if child.tag in _DYNAMICS_TAGS:
                        self.markings.append(Marking(child.tag, self.cursor, self.cursor))
                    else:
                        LOGGER.warning("skipping unsupported dynamics <%s>", child.tag)
            wedge = dtype.find("wedge")
            if wedge is not None:
                wtype = wedge.get("type")
                if wtype in ("crescendo", "diminuendo"):
                    self.open_wedges.append((wtype, self.cursor))
                elif wtype == "stop":
                    if self.open_wedges:
                        kind, start = self.open_wedges.pop()
                        self.markings.append(Marking(kind, start, self.cursor))
                    else:
                        LOGGER.warning("wedge stop without start")

    def finish(self, title: str) -> Score:
        for kind, start in self.open_wedges:
            LOGGER.warning("unterminated %s wedge, closing at piece end", kind)
            self.markings.append(Marking(kind, start, self.measure_start))
        merged = _merge_ties(self.notes)
        merged.sort(key=lambda n: (n.onset, n.pitch, n.voice))
        if not merged:
            raise ScoreError("part contains no notes")
        notes = []
        for i, raw in enumerate(merged):
            member = raw.slur_member or any(
                s - ONSET_EPS <= raw.onset <= e + ONSET_EPS for s, e in self.slur_spans
            )
            notes.append(
                ScoreNote(
                    id=f"n{i + 1}",
                    pitch=raw.pitch,
                    onset_beats=raw.onset,
                    duration_beats=raw.duration,
                    voice=raw.voice,
                    accent=raw.accent,
                    fermata=raw.fermata,
                    slur_member=member,
                )
            )
        return Score(tuple(notes), tuple(self.markings), tuple(self.signatures), title)


def _merge_ties(raw_notes: list[_RawNote]) -> list[_RawNote]:
    """Merge tie start/stop chains into single sounding notes."""
    notes = sorted(raw_notes, key=lambda n: (n.onset, n.pitch, n.voice))
    consumed = [False] * len(notes)
    out = []
    for i, note in enumerate(notes):
        if consumed[i]:
            continue
        current = note
        while current.tie_start:
            end = current.onset + current.duration
            successor = None
            for j in range(i + 1, len(notes)):
                cand = notes[j]
                if consumed[j] or not cand.tie_stop:
                    continue
                if cand.pitch == note.pitch and cand.voice == note.voice and abs(cand.onset - end) <= ONSET_EPS:
                    successor = j
                    break
            if successor is None:
                LOGGER.warning("tie start without matching stop (pitch %d)", note.pitch)
                break
            nxt = notes[successor]
            consumed[successor] = True
            note.duration += nxt.duration
            note.accent = note.accent or nxt.accent
            note.fermata = note.fermata or nxt.fermata
            current = nxt
        out.append(note)
    return out


# ---------------------------------------------------------------------------
# Metrical helpers shared with the feature code

def signature_at(score: Score, beats: float) -> TimeSignature:
    """The time signature in force at a beat position."""
    active = score.time_signatures[0]
    for sig in score.time_signatures:
        if sig.start_beats <= beats + ONSET_EPS:
            active = sig
        else:
            break
    return active


def measure_position(score: Score, beats: float) -> tuple[float, bool]:
    """Return (beat phase in [0, 1), is measure start) for a beat position."""
    sig = signature_at(score, beats)
    length = sig.measure_beats
    k = int((beats - sig.start_beats) / length + ONSET_EPS)
    phase = (beats - (sig.start_beats + k * length)) / length
    if phase >= 1.0 - ONSET_EPS:
        phase = 0.0
    downbeat = abs(phase) <= ONSET_EPS
    if downbeat:
        phase = 0.0
    return phase, downbeat
