import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, strategies as st

from conftest import FIXTURES, MUSICXML_FIXTURES
from staffline.errors import (ParseError, StateError, StructureError,
                              UnsupportedFormatError, ValidationError)
from staffline.musicxml import load_musicxml, read_musicxml, save_musicxml
from staffline.score import (Divisions, KeySignature, Measure, Note, Part,
                             PartGroup, Rest, Slur, Tempo, TimeSignature,
                             Words, iter_parts, models_equal)

HEAD = '<?xml version="1.0"?><score-partwise version="3.1"><part-list>' \
       '<score-part id="P1"><part-name>X</part-name></score-part></part-list><part id="P1">'
TAIL = "</part></score-partwise>"


def doc(measures):
    return (HEAD + measures + TAIL).encode()


def only_part(score):
    (part,) = iter_parts(score)
    return part


def test_minimal_document():
    score, _ = load_musicxml(doc(
        '<measure number="1"><attributes><divisions>1</divisions></attributes>'
        '<note><pitch><step>C</step><octave>4</octave></pitch><duration>4</duration></note></measure>'))
    part = only_part(score)
    (d,) = part.iter_kind(Divisions)
    (m,) = part.iter_kind(Measure)
    (n,) = part.iter_kind(Note)
    assert (d.value, d.start.t) == (1, 0)
    assert (m.start.t, m.end.t, m.number) == (0, 4, 1)
    assert (n.step, n.octave, n.alter, n.start.t, n.end.t) == ("C", 4, 0, 0, 4)


def test_chord_members_share_onset():
    score, _ = load_musicxml(doc(
        '<measure number="1"><attributes><divisions>1</divisions></attributes>'
        '<note><pitch><step>C</step><octave>4</octave></pitch><duration>2</duration></note>'
        '<note><chord/><pitch><step>E</step><octave>4</octave></pitch><duration>2</duration></note>'
        '<note><pitch><step>D</step><octave>4</octave></pitch><duration>2</duration></note></measure>'))
    starts = [(n.step, n.start.t) for n in only_part(score).iter_kind(Note)]
    assert starts == [("C", 0), ("E", 0), ("D", 2)]


def test_tie_across_barline_links_and_merges():
    score, _ = read_musicxml(FIXTURES / "musicxml" / "03_ties.musicxml")
    part = only_part(score)
    g = [n for n in part.iter_kind(Note) if n.step == "G"]
    assert len(g) == 3
    assert g[0].tie_next is g[1] and g[1].tie_prev is g[0]
    assert g[1].tie_next is g[2] and g[2].tie_prev is g[1]
    assert g[0].end.t == g[1].start.t == 12
    rows = part.note_array()
    assert [(r.midi_pitch, r.onset_div, r.duration_div) for r in rows] == [(76, 0, 8), (79, 8, 20)]


def test_two_voices_via_backup():
    score, _ = read_musicxml(FIXTURES / "musicxml" / "04_two_voices.musicxml")
    part = only_part(score)
    v2 = [(n.step, n.start.t) for n in part.iter_kind(Note) if n.voice == 2]
    assert v2 == [("C", 0), ("D", 1), ("E", 2), ("F", 5)]
    out = save_musicxml(score)
    assert b"<backup>" in out
    again = only_part(load_musicxml(out)[0])
    assert {n.voice for n in again.iter_kind(Note)} == {1, 2}
    assert models_equal(part, again)


def test_slurs_first_open_first_closed():
    score, _ = read_musicxml(FIXTURES / "musicxml" / "05_slurs.musicxml")
    slurs = [(s.start_note.step, s.end_note.step) for s in only_part(score).iter_kind(Slur)]
    assert sorted(slurs) == [("C", "D"), ("C", "F"), ("G", "B")]


def test_grace_notes_are_points():
    score, _ = read_musicxml(FIXTURES / "musicxml" / "08_grace_notes.musicxml")
    graces = [n for n in only_part(score).iter_kind(Note) if n.grace]
    assert [(n.step, n.start.t, n.end.t) for n in graces] == [("D", 0, 0), ("A", 4, 4), ("C", 4, 4)]


def test_part_groups_nest():
    score, report = read_musicxml(FIXTURES / "musicxml" / "10_part_groups.musicxml")
    strings, horn = score.children
    assert isinstance(strings, PartGroup) and strings.name == "Strings"
    assert isinstance(horn, Part) and horn.id == "P4"
    violin, low = strings.children
    assert violin.id == "P1" and low.name == "Low"
    assert [p.id for p in low.children] == ["P2", "P3"]
    assert ("group-symbol", 1) in report.skipped


def test_directions_words_and_tempo():
    score, report = read_musicxml(FIXTURES / "musicxml" / "11_directions.musicxml")
    part = only_part(score)
    assert [(w.text, w.start.t) for w in part.iter_kind(Words)] == [("Allegro", 0), ("dolce", 8)]
    assert [(t.quarter_bpm, t.start.t) for t in part.iter_kind(Tempo)] == [(132, 0), (96.5, 16)]
    assert dict(report.skipped) == {"barline": 1, "dynamics": 1}


def test_signatures_and_staves():
    score, _ = read_musicxml(FIXTURES / "musicxml" / "06_signatures.musicxml")
    part = only_part(score)
    assert [(k.fifths, k.mode, k.start.t) for k in part.iter_kind(KeySignature)] == [(-3, "minor", 0), (2, "none", 6)]
    assert [(s.beats, s.beat_type, s.start.t) for s in part.iter_kind(TimeSignature)] == [(3, 4, 0), (6, 8, 6), (2, 2, 12)]
    piano = only_part(read_musicxml(FIXTURES / "musicxml" / "09_two_staves.musicxml")[0])
    assert piano.staff_count == 2


def test_pickup_measure_follows_content():
    score, report = read_musicxml(FIXTURES / "musicxml" / "12_pickup.musicxml")
    measures = [(m.number, m.start.t, m.end.t) for m in only_part(score).iter_kind(Measure)]
    assert measures == [(0, 0, 2), (1, 2, 8), (2, 8, 14)]
    assert len(report.warnings) == 1


def test_malformed_xml_reports_position():
    with pytest.raises(ParseError) as e:
        load_musicxml(b"<score-partwise>\n<part-list></score-partwise>")
    assert e.value.line == 2


def test_timewise_rejected():
    with pytest.raises(UnsupportedFormatError):
        read_musicxml(FIXTURES / "musicxml" / "timewise.musicxml")


def test_slur_stop_without_start():
    with pytest.raises(StructureError):
        load_musicxml(doc(
            '<measure number="1"><attributes><divisions>1</divisions></attributes>'
            '<note><pitch><step>C</step><octave>4</octave></pitch><duration>1</duration>'
            '<notations><slur type="stop"/></notations></note></measure>'))


@pytest.mark.parametrize("duration", ["", "<duration>-1</duration>"])
def test_missing_or_negative_duration(duration):
    with pytest.raises(StructureError):
        load_musicxml(doc(
            '<measure number="1"><attributes><divisions>1</divisions></attributes>'
            f'<note><pitch><step>C</step><octave>4</octave></pitch>{duration}</note></measure>'))


def test_skipped_elements_counted_not_fatal():
    score, report = load_musicxml(doc(
        '<measure number="1"><print/><attributes><divisions>1</divisions><clef/></attributes>'
        '<harmony/><harmony/>'
        '<note><pitch><step>C</step><octave>4</octave></pitch><duration>1</duration>'
        '<type>quarter</type><lyric/></note></measure>'))
    assert dict(report.skipped) == {"print": 1, "clef": 1, "harmony": 2, "type": 1, "lyric": 1}
    assert all(count >= 1 for _, count in report.skipped)
    assert "note" in report.supported


def test_save_empty_part_emits_one_empty_measure():
    out = save_musicxml(PartGroup([Part("P1", name="Empty")]))
    root = ET.fromstring(out)
    measures = root.findall("part/measure")
    assert len(measures) == 1 and len(measures[0]) == 0
    assert models_equal(load_musicxml(out)[0], PartGroup([Part("P1", name="Empty")]))


def test_save_declares_utf8_and_is_deterministic():
    score, _ = read_musicxml(MUSICXML_FIXTURES[4])
    a, b = save_musicxml(score), save_musicxml(score)
    assert a == b
    assert a.startswith(b'<?xml version="1.0" encoding="UTF-8"?>')


def test_save_rejects_invalid_part():
    p = Part("P1")
    p.add(Divisions(1), 0)
    p.add(Note("C", 4, staff=3), 0, 1)
    with pytest.raises(ValidationError) as e:
        save_musicxml(p)
    assert e.value.violations[0].invariant == "note.staff"


def test_save_rejects_unspelled_notes():
    p = Part("P1")
    p.add(Divisions(1), 0)
    p.add(Note(midi_pitch=61), 0, 1)
    with pytest.raises(StateError):
        save_musicxml(p)


def test_save_splits_notes_at_barlines():
    p = Part("P1")
    p.add(Divisions(1), 0)
    p.add(TimeSignature(2, 4), 0)
    p.add(Note("C", 4, id="c", voice=1), 1, 6)
    score, _ = load_musicxml(save_musicxml(p))
    again = only_part(score)
    notes = list(again.iter_kind(Note))
    assert [(n.start.t, n.end.t) for n in notes] == [(1, 2), (2, 4), (4, 6)]
    assert [tuple(r)[:5] for r in again.note_array()] == [tuple(r)[:5] for r in p.note_array()]
    assert again.validate() == []


@pytest.mark.parametrize("path", MUSICXML_FIXTURES, ids=lambda p: p.stem)
def test_note_count_matches_document(path):
    score, report = read_musicxml(path)
    n_elements = len(ET.parse(path).getroot().findall(".//note"))
    n_model = sum(1 for p in iter_parts(score) for _ in p.iter_kind((Note, Rest)))
    assert n_model == n_elements


@pytest.mark.parametrize("path", MUSICXML_FIXTURES, ids=lambda p: p.stem)
def test_round_trip(path):
    score, _ = read_musicxml(path)
    saved = save_musicxml(score)
    again, report = load_musicxml(saved)
    assert models_equal(score, again)
    assert save_musicxml(again) == saved
    assert report.skipped == []


voices = st.integers(1, 3)


@st.composite
def small_parts(draw):
    """Random single-part scores inside the supported subset."""
    p = Part("P1", name=draw(st.sampled_from([None, "Solo"])), staff_count=draw(st.integers(1, 2)))
    p.add(Divisions(draw(st.sampled_from([1, 2, 4]))), 0)
    p.add(TimeSignature(4, 4), 0)
    length = 0
    k = 0
    for v in range(1, draw(st.integers(1, 3)) + 1):
        t = 0
        for _ in range(draw(st.integers(1, 6))):
            t += draw(st.integers(0, 2))
            d = draw(st.integers(1, 4))
            k += 1
            if draw(st.booleans()):
                step = draw(st.sampled_from("CDEFGAB"))
                p.add(Note(step, draw(st.integers(2, 6)), draw(st.integers(-1, 1)),
                           voice=v, staff=draw(st.integers(1, p.staff_count)), id=f"n{k}"), t, t + d)
            else:
                p.add(Rest(voice=v, id=f"r{k}"), t, t + d)
            t += d
        length = max(length, t)
    m = draw(st.integers(1, 4))
    edges = list(range(0, length, m)) + [length]
    for i, (a, b) in enumerate(zip(edges, edges[1:])):
        p.add(Measure(i + 1), a, b)
    return p


@given(small_parts())
def test_round_trip_random_parts(part):
    assert part.validate() == []
    saved = save_musicxml(part)
    (again,) = iter_parts(load_musicxml(saved)[0])
    assert [tuple(r) for r in again.note_array()] == [tuple(r) for r in part.note_array()]
    assert save_musicxml(again) == save_musicxml(load_musicxml(save_musicxml(again))[0])
    bars = {m.start.t for m in part.iter_kind(Measure)}
    if not any(n.start.t < b < n.end.t for n in part.iter_kind((Note, Rest)) for b in bars):
        assert models_equal(part, again)
