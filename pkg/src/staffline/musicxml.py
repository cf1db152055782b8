"""MusicXML (score-partwise) reader and writer for the timeline model.

Only a fixed subset of MusicXML is mapped onto the model: the part list
with part groups, measures, divisions, key and time signatures, staves,
notes and rests (pitch, chord, grace, duration, tie, voice, staff),
slurs, words and tempo. Any other element is skipped and counted in a
:class:`MusicXmlSubsetReport`.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from staffline.errors import (ParseError, StateError, StructureError,
                              UnsupportedFormatError, ValidationError)
from staffline.score import (Divisions, KeySignature, Measure, Note, Part,
                             PartGroup, Rest, Slur, Tempo, TimeSignature,
                             Words, iter_parts)

DOCTYPE = ('<!DOCTYPE score-partwise PUBLIC "-//Recordare//DTD MusicXML 3.1 Partwise//EN" '
           '"http://www.musicxml.org/dtds/partwise.dtd">')


@dataclass
class MusicXmlSubsetReport:
    """What a load consumed and what it skipped.

    `skipped` holds ``(element name, count)`` pairs sorted by name.
    `warnings` lists non-fatal inconsistencies such as measures whose
    content does not match the time signature.
    """

    supported: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    warnings: list = field(default_factory=list)


def _int(text, what):
    try:
        return int(text.strip())
    except (AttributeError, ValueError):
        raise StructureError(f"invalid integer for {what}: {text!r}") from None


def _number(text):
    v = float(text)
    return int(v) if v.is_integer() else v


def _fmt_number(v):
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


class _Loader:
    def __init__(self, root):
        self.root = root
        self.used = set()
        self.skipped = Counter()
        self.warnings = []
        self.explicit_ids = {n.get("id") for n in root.iter("note") if n.get("id")}
        self.n_generated = 0

    def use(self, el):
        self.used.add(el.tag)

    def skip(self, el):
        self.skipped[el.tag] += 1

    def new_note_id(self):
        while True:
            self.n_generated += 1
            nid = f"n{self.n_generated}"
            if nid not in self.explicit_ids:
                return nid

    def load(self):
        root = self.root
        self.use(root)
        score = PartGroup()
        parts = {}
        for child in root:
            if child.tag == "part-list":
                self.use(child)
                self._part_list(child, score, parts)
            elif child.tag != "part":
                self.skip(child)
        if not parts:
            raise StructureError("score has no parts")
        for el in root.findall("part"):
            self.use(el)
            pid = el.get("id")
            if pid not in parts:
                raise StructureError(f"part {pid!r} not declared in part-list")
            self._part(el, parts[pid])
        report = MusicXmlSubsetReport(
            supported=sorted(self.used),
            skipped=sorted(self.skipped.items()),
            warnings=self.warnings)
        return score, report

    def _part_list(self, el, score, parts):
        open_groups = {}
        order = []

        def container():
            return order[-1] if order else score

        for child in el:
            if child.tag == "part-group":
                self.use(child)
                number = child.get("number", "1")
                if child.get("type") == "start":
                    name_el = child.find("group-name")
                    group = PartGroup(name=name_el.text if name_el is not None else None)
                    for sub in child:
                        if sub.tag == "group-name":
                            self.use(sub)
                        else:
                            self.skip(sub)
                    container().append(group)
                    open_groups[number] = group
                    order.append(group)
                elif child.get("type") == "stop":
                    group = open_groups.pop(number, None)
                    if group is not None:
                        order.remove(group)
            elif child.tag == "score-part":
                self.use(child)
                pid = child.get("id")
                if not pid:
                    raise StructureError("score-part without id")
                if pid in parts:
                    raise StructureError(f"duplicate part id {pid!r}")
                name = None
                for sub in child:
                    if sub.tag == "part-name":
                        self.use(sub)
                        name = (sub.text or "").strip() or None
                    else:
                        self.skip(sub)
                part = Part(pid, name=name)
                parts[pid] = part
                container().append(part)
            else:
                self.skip(child)

    def _part(self, el, part):
        state = _PartState()
        for measure in el:
            if measure.tag != "measure":
                self.skip(measure)
                continue
            self.use(measure)
            self._measure(measure, part, state)
        for pending in state.ties.values():
            for note in pending:
                if note.tie_next is None:
                    self.warnings.append(f"part {part.id}: tie start on {note.id} never stopped")

    def _measure(self, el, part, st):
        ms = st.cursor = st.measure_end
        reached = ms
        number_text = el.get("number")
        try:
            number = int(number_text)
        except (TypeError, ValueError):
            number = st.last_number + 1
        last_onset = ms
        for child in el:
            tag = child.tag
            if tag == "attributes":
                self.use(child)
                self._attributes(child, part, st)
            elif tag == "note":
                self.use(child)
                onset, end, is_chord = self._note(child, part, st, last_onset)
                if not is_chord:
                    last_onset = onset
                reached = max(reached, st.cursor, end)
            elif tag == "backup":
                self.use(child)
                st.cursor -= self._duration(child, "backup")
                if st.cursor < 0:
                    raise StructureError(f"backup before the start of the score in measure {number_text}")
            elif tag == "forward":
                self.use(child)
                st.cursor += self._duration(child, "forward")
                reached = max(reached, st.cursor)
            elif tag == "direction":
                self.use(child)
                self._direction(child, part, st)
            elif tag == "sound":
                self.use(child)
                if child.get("tempo") is not None:
                    part.add(Tempo(_number(child.get("tempo"))), st.cursor)
            else:
                self.skip(child)
        if reached > ms:
            part.add(Measure(number, id=el.get("id")), ms, reached)
        st.measure_end = reached
        st.last_number = number
        if st.time is not None and st.divisions and reached > ms:
            beats, beat_type = st.time
            expected = Fraction(beats * 4 * st.divisions, beat_type)
            if expected != reached - ms:
                self.warnings.append(
                    f"part {part.id}: measure {number_text} spans {reached - ms} divisions, "
                    f"time signature implies {expected}")

    def _duration(self, el, what):
        d = el.find("duration")
        if d is None:
            raise StructureError(f"{what} without duration")
        self.use(d)
        value = _int(d.text, f"{what} duration")
        if value < 0:
            raise StructureError(f"negative {what} duration {value}")
        return value

    def _attributes(self, el, part, st):
        t = st.cursor
        for child in el:
            tag = child.tag
            if tag == "divisions":
                self.use(child)
                value = _int(child.text, "divisions")
                existing = [d for d in part.iter_kind(Divisions, t, t + 1)]
                if not any(d.value == value for d in existing):
                    part.add(Divisions(value), t)
                st.divisions = value
            elif tag == "key":
                fifths = child.find("fifths")
                if fifths is None:
                    self.skip(child)
                    continue
                self.use(child)
                mode = "none"
                for sub in child:
                    if sub.tag == "fifths":
                        self.use(sub)
                    elif sub.tag == "mode" and (sub.text or "").strip() in ("major", "minor"):
                        self.use(sub)
                        mode = sub.text.strip()
                    else:
                        self.skip(sub)
                part.add(KeySignature(_int(fifths.text, "fifths"), mode), t)
            elif tag == "time":
                beats, beat_type = child.find("beats"), child.find("beat-type")
                try:
                    b, bt = int(beats.text), int(beat_type.text)
                except (AttributeError, TypeError, ValueError):
                    self.skip(child)
                    continue
                self.use(child)
                for sub in child:
                    if sub.tag in ("beats", "beat-type"):
                        self.use(sub)
                    else:
                        self.skip(sub)
                part.add(TimeSignature(b, bt), t)
                st.time = (b, bt)
            elif tag == "staves":
                self.use(child)
                part.staff_count = max(part.staff_count, _int(child.text, "staves"))
            else:
                self.skip(child)

    def _note(self, el, part, st, last_onset):
        grace = el.find("grace") is not None
        is_chord = el.find("chord") is not None
        if el.find("unpitched") is not None:
            self.skip(el.find("unpitched"))
            dur = 0 if grace else self._duration(el, "note")
            onset = last_onset if is_chord else st.cursor
            if not is_chord:
                st.cursor += dur
            return onset, onset + dur, is_chord
        pitch = el.find("pitch")
        rest = el.find("rest")
        if grace:
            dur = 0
        else:
            dur = self._duration(el, "note")
        onset = last_onset if is_chord else st.cursor
        voice = staff = None
        ties = []
        slurs = []
        for child in el:
            tag = child.tag
            if tag in ("grace", "chord", "duration"):
                self.use(child)
            elif tag == "pitch" or tag == "rest":
                self.use(child)
                for sub in child:
                    if tag == "pitch" and sub.tag in ("step", "alter", "octave"):
                        self.use(sub)
                    else:
                        self.skip(sub)
            elif tag == "voice":
                self.use(child)
                voice = self._voice(child)
            elif tag == "staff":
                self.use(child)
                staff = _int(child.text, "staff")
            elif tag == "tie":
                self.use(child)
                ties.append(child.get("type"))
            elif tag == "notations":
                self.use(child)
                for sub in child:
                    if sub.tag == "slur":
                        self.use(sub)
                        slurs.append((sub.get("type"), sub.get("number", "1")))
                    elif sub.tag == "tied":
                        self.use(sub)
                    else:
                        self.skip(sub)
            else:
                self.skip(child)
        if pitch is not None:
            step = pitch.findtext("step", "").strip()
            alter_text = pitch.findtext("alter")
            alter = round(float(alter_text)) if alter_text else 0
            octave = _int(pitch.findtext("octave"), "octave")
            obj = Note(step, octave, alter, voice=voice, staff=staff,
                       id=el.get("id") or self.new_note_id(), grace=grace)
        elif rest is not None:
            obj = Rest(voice=voice, staff=staff, id=el.get("id"))
        else:
            raise StructureError("note without pitch or rest")
        part.add(obj, onset, onset + dur)
        if not is_chord:
            st.cursor += dur
        if isinstance(obj, Note):
            self._ties(obj, ties, st)
            self._slurs(obj, slurs, part, st)
        return onset, onset + dur, is_chord

    def _voice(self, el):
        try:
            v = int(el.text.strip())
        except (AttributeError, ValueError):
            self.warnings.append(f"ignoring non-numeric voice {el.text!r}")
            return None
        return v if v >= 1 else None

    def _ties(self, note, ties, st):
        key = note.midi_pitch
        if "stop" in ties:
            pending = st.ties[key]
            match = next((n for n in pending if n.end.t == note.start.t), None)
            if match is None and pending:
                match = pending[-1]
            if match is not None:
                pending.remove(match)
                match.tie_to(note)
            else:
                self.warnings.append(f"tie stop on {note.id} without a matching start")
        if "start" in ties:
            st.ties[key].append(note)

    def _slurs(self, note, slurs, part, st):
        for kind, number in slurs:
            if kind == "start":
                st.slurs[number].append(note)
            elif kind == "stop":
                if not st.slurs[number]:
                    raise StructureError(f"slur stop (number {number}) on {note.id} without a start")
                start_note = st.slurs[number].popleft()
                part.add_slur(start_note, note)

    def _direction(self, el, part, st):
        t = st.cursor
        for child in el:
            if child.tag == "direction-type":
                self.use(child)
                for sub in child:
                    if sub.tag == "words":
                        self.use(sub)
                        part.add(Words(sub.text or ""), t)
                    else:
                        self.skip(sub)
            elif child.tag == "sound":
                self.use(child)
                if child.get("tempo") is not None:
                    part.add(Tempo(_number(child.get("tempo"))), t)
            else:
                self.skip(child)


class _PartState:
    def __init__(self):
        self.cursor = 0
        self.measure_end = 0
        self.last_number = 0
        self.divisions = None
        self.time = None
        self.ties = defaultdict(list)
        self.slurs = defaultdict(deque)


def load_musicxml(document):
    """Parse a score-partwise document.

    Parameters
    ----------
    document : bytes, str or binary file object

    Returns
    -------
    score : PartGroup
    report : MusicXmlSubsetReport
    """
    if hasattr(document, "read"):
        document = document.read()
    try:
        root = ET.fromstring(document)
    except ET.ParseError as e:
        line, col = e.position
        raise ParseError(f"malformed XML: {e.msg if hasattr(e, 'msg') else e}", line, col) from None
    if root.tag == "score-timewise":
        raise UnsupportedFormatError("score-timewise documents are not supported")
    if root.tag != "score-partwise":
        raise UnsupportedFormatError(f"unexpected root element <{root.tag}>")
    return _Loader(root).load()


def read_musicxml(path):
    return load_musicxml(Path(path).read_bytes())


# writer

class _Item:
    """One note or rest as written, possibly a piece of a split note."""

    __slots__ = ("obj", "start", "end", "id", "tie_stop", "tie_start", "first")

    def __init__(self, obj, start, end, id, tie_stop, tie_start, first):
        self.obj, self.start, self.end, self.id = obj, start, end, id
        self.tie_stop, self.tie_start, self.first = tie_stop, tie_start, first


def _measure_spans(part):
    measures = list(part.iter_kind(Measure))
    if measures:
        return [(m.start.t, m.end.t, m.number, m.id) for m in measures]
    last = part.timeline.last_t or 0
    if last == 0:
        return [(0, 0, 1, None)]
    sigs = {ts.start.t: ts for ts in part.iter_kind(TimeSignature)}
    spans = []
    ms, number, beats, beat_type = 0, 1, 4, 4
    while ms < last:
        for t in sorted(sigs):
            if t <= ms:
                beats, beat_type = sigs[t].beats, sigs[t].beat_type
        divs = part.quarter_fraction(ms + 1) - part.quarter_fraction(ms)
        length = math.ceil(Fraction(beats * 4, beat_type) / divs)
        spans.append((ms, ms + length, number, None))
        ms += length
        number += 1
    return spans


def _split_items(part, spans):
    bounds = [s[1] for s in spans[:-1]]
    items = []
    for obj in part.iter_kind((Note, Rest)):
        s, e = obj.start.t, obj.end.t
        cuts = [b for b in bounds if s < b < e]
        edges = [s] + cuts + [e]
        is_note = isinstance(obj, Note)
        n = len(edges) - 1
        for k in range(n):
            pid = obj.id if k == 0 or obj.id is None else f"{obj.id}-{k + 1}"
            items.append(_Item(
                obj, edges[k], edges[k + 1], pid,
                tie_stop=is_note and (k > 0 or obj.tie_prev is not None),
                tie_start=is_note and (k < n - 1 or obj.tie_next is not None),
                first=k == 0))
    return items


class _Writer:
    def __init__(self):
        self.slur_events = []

    def score(self, score):
        root = ET.Element("score-partwise", version="3.1")
        part_list = ET.SubElement(root, "part-list")
        parts = list(iter_parts(score))
        ids = [p.id for p in parts]
        if len(set(ids)) != len(ids):
            raise StateError(f"duplicate part ids in {ids}")
        if isinstance(score, Part):
            self._score_part(part_list, score)
        else:
            for child in score.children:
                self._part_list(part_list, child, 1)
        for part in parts:
            self.part(root, part)
        self._number_slurs()
        return root

    def _part_list(self, el, node, depth):
        if isinstance(node, Part):
            self._score_part(el, node)
            return
        start = ET.SubElement(el, "part-group", type="start", number=str(depth))
        if node.name is not None:
            ET.SubElement(start, "group-name").text = node.name
        for child in node.children:
            self._part_list(el, child, depth + 1)
        ET.SubElement(el, "part-group", type="stop", number=str(depth))

    def _score_part(self, el, part):
        sp = ET.SubElement(el, "score-part", id=part.id)
        ET.SubElement(sp, "part-name").text = part.name or ""

    def part(self, root, part):
        violations = part.validate()
        if violations:
            raise ValidationError(violations)
        unspelled = [n for n in part.iter_kind(Note) if not n.spelled]
        if unspelled:
            raise StateError(
                f"part {part.id!r} has {len(unspelled)} unspelled note(s); run analysis.enrich first")
        el = ET.SubElement(root, "part", id=part.id)
        spans = _measure_spans(part)
        items = _split_items(part, spans)
        points = [o for tp in part.timeline for o in tp.starting
                  if isinstance(o, (Divisions, KeySignature, TimeSignature, Words, Tempo))]
        last = len(spans) - 1
        by_measure = defaultdict(list)
        for it in items:
            by_measure[self._measure_index(spans, it.start, it.end == it.start)].append(it)
        points_by_measure = defaultdict(list)
        for o in points:
            points_by_measure[self._measure_index(spans, o.start.t, True)].append(o)
        for i, (ms, me, number, mid) in enumerate(spans):
            m_el = ET.SubElement(el, "measure", number=str(number))
            if mid is not None:
                m_el.set("id", mid)
            staves = part.staff_count if i == 0 and part.staff_count > 1 else None
            self.measure(m_el, ms, me, points_by_measure[i], by_measure[i], staves, i == last)
        return el

    @staticmethod
    def _measure_index(spans, t, point):
        for i, (ms, me, _, _) in enumerate(spans):
            if ms <= t < me:
                return i
        return len(spans) - 1

    def measure(self, el, ms, me, points, items, staves, is_last):
        cursor = ms
        reached = ms
        by_t = defaultdict(list)
        for o in points:
            by_t[o.start.t].append(o)
        if staves is not None:
            by_t.setdefault(ms, [])
        for t in sorted(by_t):
            if t > cursor:
                self._move(el, "forward", t - cursor)
                cursor = t
                reached = max(reached, cursor)
            objs = by_t[t]
            attrs = [o for o in objs if isinstance(o, (Divisions, KeySignature, TimeSignature))]
            if attrs or (staves is not None and t == ms):
                a_el = ET.SubElement(el, "attributes")
                for o in attrs:
                    if isinstance(o, Divisions):
                        ET.SubElement(a_el, "divisions").text = str(o.value)
                for o in attrs:
                    if isinstance(o, KeySignature):
                        k = ET.SubElement(a_el, "key")
                        ET.SubElement(k, "fifths").text = str(o.fifths)
                        if o.mode in ("major", "minor"):
                            ET.SubElement(k, "mode").text = o.mode
                for o in attrs:
                    if isinstance(o, TimeSignature):
                        ts = ET.SubElement(a_el, "time")
                        ET.SubElement(ts, "beats").text = str(o.beats)
                        ET.SubElement(ts, "beat-type").text = str(o.beat_type)
                if staves is not None and t == ms:
                    ET.SubElement(a_el, "staves").text = str(staves)
            for o in objs:
                if isinstance(o, Words):
                    d = ET.SubElement(el, "direction")
                    ET.SubElement(ET.SubElement(d, "direction-type"), "words").text = o.text
                elif isinstance(o, Tempo):
                    ET.SubElement(el, "sound", tempo=_fmt_number(o.quarter_bpm))

        for stream in self._streams(items):
            if cursor > ms:
                self._move(el, "backup", cursor - ms)
                cursor = ms
            for unit in stream:
                start = unit[0].start
                if start > cursor:
                    self._move(el, "forward", start - cursor)
                    cursor = start
                for k, it in enumerate(unit):
                    self._note(el, it, chord=k > 0)
                    reached = max(reached, it.end)
                cursor = start + (unit[0].end - unit[0].start)
                reached = max(reached, cursor)
        if reached < me:
            self._move(el, "forward", me - cursor)

    @staticmethod
    def _move(el, tag, amount):
        ET.SubElement(ET.SubElement(el, tag), "duration").text = str(amount)

    @staticmethod
    def _streams(items):
        groups = defaultdict(list)
        for it in items:
            groups[(it.obj.voice or 0, it.obj.staff or 0)].append(it)
        streams = []
        for key in sorted(groups):
            units = defaultdict(list)
            rests = []
            for it in groups[key]:
                if isinstance(it.obj, Rest):
                    rests.append([it])
                else:
                    units[(it.start, not it.obj.grace)].append(it)
            all_units = [sorted(u, key=lambda i: (i.end, i.obj.midi_pitch, i.id or "")) for u in units.values()]
            all_units += rests
            all_units.sort(key=lambda u: (u[0].start, 0 if getattr(u[0].obj, "grace", False) else 1,
                                          isinstance(u[0].obj, Rest), u[0].id or ""))
            lanes = []
            for unit in all_units:
                start = unit[0].start
                for lane in lanes:
                    if lane[0] <= start:
                        break
                else:
                    lane = [0, []]
                    lanes.append(lane)
                lane[1].append(unit)
                lane[0] = start + (unit[0].end - unit[0].start)
            streams.extend(lane[1] for lane in lanes)
        return streams

    def _note(self, el, it, chord):
        obj = it.obj
        n_el = ET.SubElement(el, "note")
        if it.id is not None:
            n_el.set("id", it.id)
        is_note = isinstance(obj, Note)
        if is_note and obj.grace:
            ET.SubElement(n_el, "grace")
        if chord:
            ET.SubElement(n_el, "chord")
        if is_note:
            p = ET.SubElement(n_el, "pitch")
            ET.SubElement(p, "step").text = obj.step
            if obj.alter:
                ET.SubElement(p, "alter").text = str(obj.alter)
            ET.SubElement(p, "octave").text = str(obj.octave)
        else:
            ET.SubElement(n_el, "rest")
        if not (is_note and obj.grace):
            ET.SubElement(n_el, "duration").text = str(it.end - it.start)
        if it.tie_stop:
            ET.SubElement(n_el, "tie", type="stop")
        if it.tie_start:
            ET.SubElement(n_el, "tie", type="start")
        if obj.voice is not None:
            ET.SubElement(n_el, "voice").text = str(obj.voice)
        if obj.staff is not None:
            ET.SubElement(n_el, "staff").text = str(obj.staff)
        if not is_note:
            return
        slurs = [] if not it.first or obj._part is None else [
            s for s in obj._part.iter_kind(Slur) if s.start_note is obj or s.end_note is obj]
        if not (it.tie_stop or it.tie_start or slurs):
            return
        nt = ET.SubElement(n_el, "notations")
        if it.tie_stop:
            ET.SubElement(nt, "tied", type="stop")
        if it.tie_start:
            ET.SubElement(nt, "tied", type="start")
        stops = [s for s in slurs if s.end_note is obj and s.start_note is not obj]
        starts = [s for s in slurs if s.start_note is obj]
        selfs = [s for s in slurs if s.start_note is obj and s.end_note is obj]
        for kind, group in (("stop", stops), ("start", starts), ("stop", selfs)):
            for s in group:
                s_el = ET.SubElement(nt, "slur", type=kind)
                self.slur_events.append((kind, s, s_el))

    def _number_slurs(self):
        open_numbers = {}
        for kind, slur, el in self.slur_events:
            if kind == "start":
                used = set(open_numbers.values())
                n = next(i for i in range(1, len(used) + 2) if i not in used)
                open_numbers[id(slur)] = n
            else:
                if id(slur) not in open_numbers:
                    raise StateError(f"{slur!r} ends before it starts in document order")
                n = open_numbers.pop(id(slur))
            el.set("number", str(n))


def save_musicxml(score):
    """Serialize a Part or PartGroup as a score-partwise document (UTF-8 bytes).

    Every part must validate without violations and every note must be
    spelled. Divisions objects are written where they are registered,
    so durations in the output are the raw timeline differences.
    """
    root = _Writer().score(score)
    ET.indent(root, space="  ")
    body = ET.tostring(root, encoding="unicode")
    text = '<?xml version="1.0" encoding="UTF-8"?>\n' + DOCTYPE + "\n" + body + "\n"
    return text.encode("utf-8")


def write_musicxml(score, path):
    Path(path).write_bytes(save_musicxml(score))
