"""Timeline score model.

A score is a tree of :class:`PartGroup` and :class:`Part` objects. Every
part owns a :class:`TimeLine`, a sorted sequence of :class:`TimePoint`
pegs at integer positions (in divisions). Score elements such as notes,
measures and signatures are registered with the timepoints at which they
start and end, and the timepoints keep back-references to them.

Positions are plain integers. Their meaning in quarter notes is given by
the :class:`Divisions` objects of the part, see :meth:`Part.quarter_map`.
"""

from __future__ import annotations

import bisect
import math
from fractions import Fraction
from typing import Iterator, NamedTuple, Optional

import numpy as np

from staffline.errors import DomainError, IntegrityError, StateError

STEPS = "CDEFGAB"
STEP_BASE = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}
BEAT_TYPES = (1, 2, 4, 8, 16, 32)
KEY_MODES = ("major", "minor", "none")


def spelled_midi_pitch(step, alter, octave):
    """MIDI pitch of a spelled note, with C4 = 60."""
    return (octave + 1) * 12 + STEP_BASE[step] + alter


class TimePoint:
    """A peg on the timeline at position `t`.

    `starting` and `ending` list the objects that begin and end here, in
    registration order.
    """

    def __init__(self, t):
        self.t = t
        self.starting = []
        self.ending = []

    def __repr__(self):
        return f"TimePoint(t={self.t}, starting={len(self.starting)}, ending={len(self.ending)})"

    def is_empty(self):
        return not self.starting and not self.ending


class TimeLine:
    """Sorted sequence of timepoints with distinct positions."""

    def __init__(self):
        self._ts = []
        self._points = []

    def __len__(self):
        return len(self._points)

    def __iter__(self):
        return iter(self._points)

    @property
    def points(self):
        return tuple(self._points)

    def get(self, t):
        i = bisect.bisect_left(self._ts, t)
        if i < len(self._ts) and self._ts[i] == t:
            return self._points[i]
        return None

    def get_or_add(self, t):
        i = bisect.bisect_left(self._ts, t)
        if i < len(self._ts) and self._ts[i] == t:
            return self._points[i]
        tp = TimePoint(t)
        self._ts.insert(i, t)
        self._points.insert(i, tp)
        return tp

    def discard_if_empty(self, tp):
        if tp.is_empty():
            i = bisect.bisect_left(self._ts, tp.t)
            if i < len(self._points) and self._points[i] is tp:
                del self._ts[i]
                del self._points[i]

    def slice(self, start=None, end=None):
        """Timepoints with `start <= t < end`."""
        lo = 0 if start is None else bisect.bisect_left(self._ts, start)
        hi = len(self._ts) if end is None else bisect.bisect_left(self._ts, end)
        return self._points[lo:hi]

    @property
    def last_t(self):
        return self._ts[-1] if self._ts else None


class TimedObject:
    """Base class of everything that can be registered on a timeline."""

    #: classes whose instances may start and end at the same position
    point_like = False

    def __init__(self, id=None):
        self.id = id
        self.start = None
        self.end = None
        self._part = None
        self._order = None

    @property
    def allows_zero_duration(self):
        return self.point_like

    @property
    def duration(self):
        if self.start is None:
            return None
        return self.end.t - self.start.t

    @property
    def label(self):
        """Identifier used in violation reports."""
        return self.id if self.id is not None else type(self).__name__

    def __repr__(self):
        span = "unregistered" if self.start is None else f"[{self.start.t}, {self.end.t})"
        return f"{type(self).__name__}({self._fields()}{span})"

    def _fields(self):
        return ""


class Note(TimedObject):
    """A pitched note.

    A note is either spelled (`step`, `alter`, `octave` set) or carries
    only a raw `midi_pitch`, as notes read from MIDI files do. Spelling an
    unspelled note is done with :meth:`spell`.

    Parameters
    ----------
    step : str or None
        Letter name, one of ``C D E F G A B``.
    octave : int or None
        Scientific octave number (C4 is middle C).
    alter : int, optional
        Chromatic alteration in semitones.
    midi_pitch : int or None, optional
        Pitch for unspelled notes. Ignored when `step` is given.
    voice, staff : int or None, optional
    id : str or None, optional
    grace : bool, optional
        Grace notes are registered with zero duration.
    """

    def __init__(self, step=None, octave=None, alter=0, *, midi_pitch=None,
                 voice=None, staff=None, id=None, grace=False):
        super().__init__(id)
        if step is None:
            if midi_pitch is None:
                raise DomainError("a note needs either a spelling or a midi_pitch")
            self.step = self.alter = self.octave = None
            self._midi_pitch = int(midi_pitch)
        else:
            if step not in STEP_BASE:
                raise DomainError(f"invalid step {step!r}")
            if octave is None:
                raise DomainError("a spelled note needs an octave")
            self.step, self.alter, self.octave = step, int(alter or 0), int(octave)
            self._midi_pitch = None
        self.voice = voice
        self.staff = staff
        self.grace = bool(grace)
        self.tie_prev = None
        self.tie_next = None

    @property
    def allows_zero_duration(self):
        return self.grace

    @property
    def spelled(self):
        return self.step is not None

    @property
    def midi_pitch(self):
        if self.step is None:
            return self._midi_pitch
        return spelled_midi_pitch(self.step, self.alter, self.octave)

    def spell(self, step, alter, octave):
        if spelled_midi_pitch(step, alter, octave) != self.midi_pitch:
            raise DomainError(
                f"spelling {step}{alter:+d}/{octave} does not match pitch {self.midi_pitch}")
        self.step, self.alter, self.octave = step, alter, octave
        self._midi_pitch = None

    def tie_to(self, other):
        """Link this note to the next written note of the same sounding note."""
        self.tie_next = other
        other.tie_prev = self

    def _fields(self):
        if self.spelled:
            name = f"{self.step}{'#' * max(self.alter, 0)}{'b' * max(-self.alter, 0)}{self.octave}"
        else:
            name = f"midi={self._midi_pitch}"
        return f"{name}, id={self.id!r}, "


class Rest(TimedObject):
    def __init__(self, voice=None, staff=None, id=None):
        super().__init__(id)
        self.voice = voice
        self.staff = staff


class Measure(TimedObject):
    def __init__(self, number, id=None):
        super().__init__(id)
        self.number = number

    @property
    def label(self):
        return self.id if self.id is not None else f"Measure {self.number}"

    def _fields(self):
        return f"{self.number}, "


class Divisions(TimedObject):
    """Number of divisions per quarter note from this position onwards."""

    point_like = True

    def __init__(self, value, id=None):
        super().__init__(id)
        self.value = value

    def _fields(self):
        return f"{self.value}, "


class TimeSignature(TimedObject):
    point_like = True

    def __init__(self, beats, beat_type, id=None):
        super().__init__(id)
        self.beats = beats
        self.beat_type = beat_type

    def _fields(self):
        return f"{self.beats}/{self.beat_type}, "


class KeySignature(TimedObject):
    point_like = True

    def __init__(self, fifths, mode="none", id=None):
        super().__init__(id)
        self.fifths = fifths
        self.mode = mode

    def _fields(self):
        return f"{self.fifths}, {self.mode}, "


class Tempo(TimedObject):
    point_like = True

    def __init__(self, quarter_bpm, id=None):
        super().__init__(id)
        self.quarter_bpm = quarter_bpm


class Words(TimedObject):
    point_like = True

    def __init__(self, text, id=None):
        super().__init__(id)
        self.text = text


class Slur(TimedObject):
    def __init__(self, start_note, end_note, id=None):
        super().__init__(id)
        self.start_note = start_note
        self.end_note = end_note


class NoteArrayRow(NamedTuple):
    onset_div: int
    duration_div: int
    onset_quarter: float
    duration_quarter: float
    midi_pitch: int
    voice: int
    staff: int
    id: str


class Violation(NamedTuple):
    invariant: str
    obj_id: Optional[str]
    t: Optional[int]
    detail: str = ""

    def __str__(self):
        where = f" at t={self.t}" if self.t is not None else ""
        detail = f": {self.detail}" if self.detail else ""
        return f"{self.invariant} [{self.obj_id}]{where}{detail}"


class Part:
    """A score part, typically one instrument, with its own timeline.

    Parameters
    ----------
    id : str
        Identifier, unique among the parts of a score.
    name : str or None, optional
    staff_count : int, optional
        Number of staves; note and rest staff indices are 1-based.
    """

    def __init__(self, id, name=None, staff_count=1):
        self.id = id
        self.name = name
        self.staff_count = staff_count
        self.timeline = TimeLine()
        self.parent = None
        self._n_added = 0

    def __repr__(self):
        return f"Part(id={self.id!r}, name={self.name!r}, points={len(self.timeline)})"

    @property
    def points(self):
        return self.timeline.points

    def add(self, obj, start, end=None):
        """Register `obj` on the timeline over ``[start, end)``.

        `end` defaults to `start`, which suits point-like objects such as
        signatures and directions.
        """
        if end is None:
            end = start
        if start < 0 or end < 0:
            raise DomainError(f"negative position ({start}, {end})")
        if end < start:
            raise DomainError(f"end {end} precedes start {start}")
        if obj._part is not None:
            raise StateError(f"{obj!r} is already registered")
        tp_start = self.timeline.get_or_add(start)
        tp_end = self.timeline.get_or_add(end)
        tp_start.starting.append(obj)
        tp_end.ending.append(obj)
        obj.start, obj.end = tp_start, tp_end
        obj._part = self
        obj._order = self._n_added
        self._n_added += 1
        return obj

    def add_slur(self, start_note, end_note, id=None):
        """Create and register a slur spanning from `start_note` to `end_note`."""
        lo = min(start_note.start.t, end_note.start.t)
        hi = max(start_note.end.t, end_note.end.t)
        return self.add(Slur(start_note, end_note, id=id), lo, hi)

    def remove(self, obj):
        if obj._part is not self:
            raise StateError(f"{obj!r} is not registered in part {self.id!r}")
        if isinstance(obj, Note):
            for slur in self.iter_kind(Slur):
                if slur.start_note is obj or slur.end_note is obj:
                    raise IntegrityError(f"{obj!r} is referenced by {slur!r}")
        tp_start, tp_end = obj.start, obj.end
        tp_start.starting.remove(obj)
        tp_end.ending.remove(obj)
        self.timeline.discard_if_empty(tp_start)
        self.timeline.discard_if_empty(tp_end)
        obj.start = obj.end = None
        obj._part = None
        obj._order = None

    def contains(self, obj):
        return obj._part is self

    def iter_kind(self, kind, start=None, end=None) -> Iterator[TimedObject]:
        """Objects of class `kind` starting in ``[start, end)``.

        Ordered by start position, then by registration order.
        """
        if start is not None and end is not None and start > end:
            raise DomainError(f"start {start} > end {end}")
        for tp in self.timeline.slice(start, end):
            for obj in tp.starting:
                if isinstance(obj, kind):
                    yield obj

    @property
    def notes(self):
        return list(self.iter_kind(Note))

    # time maps

    def _divisions_segments(self):
        segments = {}
        for d in self.iter_kind(Divisions):
            segments[d.start.t] = d.value
        if 0 not in segments:
            raise StateError(f"part {self.id!r} has no Divisions at t=0")
        ts = sorted(segments)
        out = []
        q = Fraction(0)
        for i, t in enumerate(ts):
            out.append((t, q, segments[t]))
            if i + 1 < len(ts):
                q += Fraction(ts[i + 1] - t, segments[t])
        return out

    def quarter_fraction(self, t):
        """Exact quarter-note offset of position `t`."""
        if t < 0:
            raise DomainError(f"negative position {t}")
        segs = self._divisions_segments()
        i = bisect.bisect_right([s[0] for s in segs], t) - 1
        t0, q0, d = segs[i]
        return q0 + Fraction(t - t0, d)

    def quarter_map(self, t):
        """Quarter-note offset of position `t` as a float.

        The map is piecewise linear; inside the segment governed by a
        Divisions value `d` it advances by ``1/d`` per division.
        """
        return float(self.quarter_fraction(t))

    def beat_fraction(self, t):
        if t < 0:
            raise DomainError(f"negative position {t}")
        sigs = {}
        for ts in self.iter_kind(TimeSignature):
            sigs[ts.start.t] = ts.beat_type
        if 0 not in sigs:
            raise StateError(f"part {self.id!r} has no TimeSignature at t=0")
        starts = sorted(sigs)
        beats = Fraction(0)
        for i, t0 in enumerate(starts):
            if t0 > t:
                break
            t1 = starts[i + 1] if i + 1 < len(starts) else None
            seg_end = t if t1 is None or t1 > t else t1
            dq = self.quarter_fraction(seg_end) - self.quarter_fraction(t0)
            beats += dq * Fraction(sigs[t0], 4)
        return beats

    def beat_map(self, t):
        """Offset of position `t` in beats of the governing time signature."""
        return float(self.beat_fraction(t))

    # reductive views

    def tied_chains(self, include_grace=False):
        """Lists of notes joined by ties, one list per sounding note."""
        chains = []
        for note in self.iter_kind(Note):
            if note.grace and not include_grace:
                continue
            prev = note.tie_prev
            if prev is not None and prev._part is self and prev is not note:
                continue
            chain = [note]
            seen = {id(note)}
            nxt = note.tie_next
            while nxt is not None and nxt._part is self and id(nxt) not in seen:
                chain.append(nxt)
                seen.add(id(nxt))
                nxt = nxt.tie_next
            chains.append(chain)
        return chains

    def note_array(self, include_grace=False):
        """Flatten the part into one :class:`NoteArrayRow` per sounding note.

        Tied notes are merged into a single row spanning the whole chain.
        Rows are sorted by onset, pitch and id.
        """
        chains = self.tied_chains(include_grace=include_grace)
        if not chains:
            return []
        rows = []
        for chain in chains:
            head = chain[0]
            on = head.start.t
            off = chain[-1].end.t
            q_on = self.quarter_fraction(on)
            q_off = self.quarter_fraction(off)
            rows.append(NoteArrayRow(
                on, off - on, float(q_on), float(q_off - q_on), head.midi_pitch,
                head.voice or 0, head.staff or 0, head.id or ""))
        rows.sort(key=lambda r: (r.onset_div, r.midi_pitch, r.id))
        return rows

    def piano_roll(self, divs_per_cell=1):
        """Binary 128 x W pitch/time occupancy matrix.

        Cell ``(p, w)`` is 1 when a non-grace note of pitch `p` sounds
        somewhere in ``[w * divs_per_cell, (w + 1) * divs_per_cell)``.
        """
        if divs_per_cell < 1:
            raise DomainError("divs_per_cell must be >= 1")
        last = self.timeline.last_t or 0
        width = math.ceil(last / divs_per_cell)
        roll = np.zeros((128, width), dtype=np.uint8)
        for note in self.iter_kind(Note):
            if note.grace or note.end.t == note.start.t:
                continue
            lo = note.start.t // divs_per_cell
            hi = (note.end.t - 1) // divs_per_cell
            roll[note.midi_pitch, lo:hi + 1] = 1
        return roll

    # integrity

    def validate(self):
        """Check every model invariant; return a list of :class:`Violation`."""
        out = []

        def bad(inv, obj, t, detail=""):
            out.append(Violation(inv, obj if isinstance(obj, (str, type(None))) else obj.label, t, detail))

        if not self.id:
            bad("part.id", None, None, "empty part id")
        if not isinstance(self.staff_count, int) or self.staff_count < 1:
            bad("part.staff_count", self.id, None, f"staff_count={self.staff_count}")

        prev_t = -1
        for tp in self.timeline:
            if tp.t < 0:
                bad("timepoint.t", None, tp.t, "negative position")
            if tp.t <= prev_t:
                bad("timeline.order", None, tp.t, "positions not strictly increasing")
            prev_t = tp.t
            if tp.is_empty():
                bad("timeline.empty", None, tp.t, "empty timepoint")
            for obj in tp.starting:
                if obj.start is not tp:
                    bad("timepoint.backref", obj, tp.t, "start mismatch")
            for obj in tp.ending:
                if obj.end is not tp:
                    bad("timepoint.backref", obj, tp.t, "end mismatch")

        objs = [o for tp in self.timeline for o in tp.starting]
        timed = False
        for obj in objs:
            t = obj.start.t
            if obj.end.t < obj.start.t:
                bad("object.span", obj, t, "end before start")
            elif obj.end.t == obj.start.t and not obj.allows_zero_duration:
                bad("object.span", obj, t, "zero duration")
            if isinstance(obj, (Note, Rest, Measure)):
                timed = True
            if isinstance(obj, (Note, Rest)):
                if obj.staff is not None and not (1 <= obj.staff <= max(self.staff_count, 1)):
                    bad("note.staff", obj, t, f"staff {obj.staff} outside 1..{self.staff_count}")
                if obj.voice is not None and obj.voice < 1:
                    bad("note.voice", obj, t, f"voice {obj.voice}")
            if isinstance(obj, Note):
                self._check_note(obj, bad)
            elif isinstance(obj, Slur):
                self._check_slur(obj, bad)
            elif isinstance(obj, Divisions):
                if not isinstance(obj.value, int) or obj.value < 1:
                    bad("divisions.value", obj, t, f"value={obj.value}")
            elif isinstance(obj, TimeSignature):
                if not isinstance(obj.beats, int) or obj.beats < 1:
                    bad("timesig.beats", obj, t, f"beats={obj.beats}")
                if obj.beat_type not in BEAT_TYPES:
                    bad("timesig.beat_type", obj, t, f"beat_type={obj.beat_type}")
            elif isinstance(obj, KeySignature):
                if not isinstance(obj.fifths, int) or not -7 <= obj.fifths <= 7:
                    bad("keysig.fifths", obj, t, f"fifths={obj.fifths}")
                if obj.mode not in KEY_MODES:
                    bad("keysig.mode", obj, t, f"mode={obj.mode!r}")
            elif isinstance(obj, Tempo):
                if not obj.quarter_bpm > 0:
                    bad("tempo.value", obj, t, f"quarter_bpm={obj.quarter_bpm}")
            elif isinstance(obj, Measure):
                if not isinstance(obj.number, int) or obj.number < 0:
                    bad("measure.number", obj, t, f"number={obj.number}")

        divs = list(self.iter_kind(Divisions))
        if divs:
            if divs[0].start.t != 0:
                bad("divisions.first", divs[0], divs[0].start.t, "first Divisions not at t=0")
            seen = set()
            for d in divs:
                if d.start.t in seen:
                    bad("divisions.distinct", d, d.start.t, "two Divisions at one position")
                seen.add(d.start.t)
        elif timed:
            bad("divisions.first", self.id, None, "no Divisions in a non-empty part")

        measures = list(self.iter_kind(Measure))
        if measures:
            first_t = self.timeline.points[0].t
            if measures[0].start.t != first_t:
                bad("measure.tiling", measures[0], measures[0].start.t, "measures do not start the timeline")
            for a, b in zip(measures, measures[1:]):
                if a.end.t != b.start.t:
                    bad("measure.tiling", b, b.start.t, f"gap or overlap after measure ending at {a.end.t}")
                if isinstance(a.number, int) and isinstance(b.number, int) and b.number <= a.number:
                    bad("measure.number", b, b.start.t, f"number {b.number} after {a.number}")
            if measures[-1].end.t != self.timeline.last_t:
                bad("measure.tiling", measures[-1], measures[-1].end.t, "measures do not reach the timeline end")
        return out

    def _check_note(self, note, bad):
        t = note.start.t
        if note.spelled:
            if note.alter not in (-2, -1, 0, 1, 2):
                bad("note.alter", note, t, f"alter={note.alter}")
        if not 0 <= note.midi_pitch <= 127:
            bad("note.pitch", note, t, f"midi_pitch={note.midi_pitch}")
        nxt = note.tie_next
        if nxt is not None:
            if nxt._part is not self:
                bad("note.tie", note, t, "tie_next not in this part")
            elif nxt.midi_pitch != note.midi_pitch:
                bad("note.tie", note, t, "tied notes differ in pitch")
            elif nxt.start.t != note.end.t:
                bad("note.tie", note, t, "tied note does not start where this note ends")
            if nxt.tie_prev is not note:
                bad("note.tie", note, t, "tie_next.tie_prev does not point back")
        prev = note.tie_prev
        if prev is not None and prev.tie_next is not note:
            bad("note.tie", note, t, "tie_prev.tie_next does not point back")

    def _check_slur(self, slur, bad):
        a, b = slur.start_note, slur.end_note
        t = slur.start.t
        if a is None or b is None or a._part is not self or b._part is not self:
            bad("slur.notes", slur, t, "slur note not registered in this part")
            return
        if a.start.t > b.start.t:
            bad("slur.order", slur, t, f"end note at {b.start.t} precedes start note at {a.start.t}")


class PartGroup:
    """Ordered, possibly nested grouping of parts. The root of a score is
    a PartGroup as well."""

    def __init__(self, children=(), name=None):
        self.name = name
        self.children = []
        self.parent = None
        for child in children:
            self.append(child)

    def __repr__(self):
        return f"PartGroup(name={self.name!r}, children={len(self.children)})"

    def append(self, child):
        if child.parent is not None:
            raise StateError(f"{child!r} already belongs to a group")
        node = self
        while node is not None:
            if node is child:
                raise StateError("group cycle")
            node = node.parent
        child.parent = self
        self.children.append(child)
        return child

    @property
    def parts(self):
        return list(iter_parts(self))


def iter_parts(node):
    """Parts of a Part/PartGroup tree in document order."""
    if isinstance(node, Part):
        yield node
    else:
        for child in node.children:
            yield from iter_parts(child)


# structural equality ignoring object identity

def _note_key(n):
    return (n.start.t, n.end.t, n.midi_pitch, n.step, n.alter, n.octave,
            n.voice, n.staff, n.id, n.grace)


def _obj_key(obj):
    name = type(obj).__name__
    if isinstance(obj, Note):
        return (name, _note_key(obj),
                _note_key(obj.tie_prev) if obj.tie_prev is not None and obj.tie_prev.start else None,
                _note_key(obj.tie_next) if obj.tie_next is not None and obj.tie_next.start else None)
    if isinstance(obj, Slur):
        return (name, obj.start.t, obj.end.t, obj.id,
                _note_key(obj.start_note), _note_key(obj.end_note))
    attrs = {k: v for k, v in vars(obj).items()
             if k not in ("start", "end", "_part", "_order")}
    return (name, obj.start.t, obj.end.t, tuple(sorted(attrs.items())))


def canonical_form(node):
    """Hashable description of a part or group that is equal for two
    models with the same content, regardless of object identity and of
    registration order within a timepoint."""
    if isinstance(node, Part):
        objs = sorted((_obj_key(o) for tp in node.timeline for o in tp.starting), key=repr)
        return ("Part", node.id, node.name, node.staff_count, tuple(objs))
    return ("PartGroup", node.name, tuple(canonical_form(c) for c in node.children))


def models_equal(a, b):
    return canonical_form(a) == canonical_form(b)
