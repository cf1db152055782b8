"""Standard MIDI File reader and writer.

Reading maps ticks one-to-one onto timeline divisions (``Divisions`` =
PPQ), so no quantization happens. Notes read from MIDI carry a raw MIDI
pitch and no spelling or voice; see :func:`staffline.analysis.enrich`.
"""

from __future__ import annotations

import math
import struct
import warnings
from collections import defaultdict, deque
from pathlib import Path

from staffline.errors import (CapacityError, ParseError, UnsupportedFormatError,
                              ValidationError)
from staffline.score import (Divisions, KeySignature, Note, Part, PartGroup,
                             Tempo, TimeSignature, iter_parts)

MAX_PPQ = 960 * 16
DEFAULT_BPM = 120.0
PERCUSSION_CHANNEL = 9

META_TRACK_NAME = 0x03
META_END_OF_TRACK = 0x2F
META_TEMPO = 0x51
META_TIME_SIGNATURE = 0x58
META_KEY_SIGNATURE = 0x59

# data bytes following each channel status nibble
_DATA_LEN = {0x8: 2, 0x9: 2, 0xA: 2, 0xB: 2, 0xC: 1, 0xD: 1, 0xE: 2}


class MidiWarning(UserWarning):
    """Recoverable irregularity in a MIDI file (e.g. a dangling note-on)."""


def read_vlq(data, pos):
    """Decode a variable-length quantity starting at `pos`.

    Returns ``(value, next_pos)``.
    """
    value = 0
    for i in range(4):
        if pos >= len(data):
            raise ParseError(f"truncated variable-length quantity at byte {pos}")
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
    raise ParseError(f"variable-length quantity longer than 4 bytes at byte {pos}")


def write_vlq(value):
    if value < 0 or value > 0x0FFFFFFF:
        raise CapacityError(f"value {value} does not fit a variable-length quantity")
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(out))


def _chunks(data):
    pos = 0
    while pos < len(data):
        if pos + 8 > len(data):
            raise ParseError(f"truncated chunk header at byte {pos}")
        kind = data[pos:pos + 4]
        (length,) = struct.unpack(">I", data[pos + 4:pos + 8])
        body = data[pos + 8:pos + 8 + length]
        if len(body) != length:
            raise ParseError(f"chunk {kind!r} at byte {pos} declares {length} bytes, {len(body)} present")
        yield kind, body
        pos += 8 + length


def parse_track(body):
    """Decode the events of one MTrk chunk.

    Returns a list of ``(tick, kind, payload)`` where kind is ``"channel"``
    (payload ``(status, data bytes)``), ``"meta"`` (payload
    ``(type, data)``) or ``"sysex"``; and the final tick.
    """
    events = []
    pos = tick = 0
    running = None
    while pos < len(body):
        delta, pos = read_vlq(body, pos)
        tick += delta
        if pos >= len(body):
            raise ParseError("event missing after delta time")
        status = body[pos]
        if status == 0xFF:
            if pos + 1 >= len(body):
                raise ParseError("truncated meta event")
            mtype = body[pos + 1]
            length, pos = read_vlq(body, pos + 2)
            payload = body[pos:pos + length]
            if len(payload) != length:
                raise ParseError("truncated meta event data")
            pos += length
            events.append((tick, "meta", (mtype, payload)))
            if mtype == META_END_OF_TRACK:
                break
        elif status in (0xF0, 0xF7):
            length, pos = read_vlq(body, pos + 1)
            pos += length
            if pos > len(body):
                raise ParseError("truncated sysex event")
            events.append((tick, "sysex", None))
        else:
            if status & 0x80:
                if status >= 0xF0:
                    raise ParseError(f"unexpected system message 0x{status:02X} in track")
                running = status
                pos += 1
            elif running is None:
                raise ParseError("data byte without running status")
            n = _DATA_LEN[running >> 4]
            payload = body[pos:pos + n]
            if len(payload) != n:
                raise ParseError("truncated channel event")
            pos += n
            events.append((tick, "channel", (running, payload)))
    return events, tick


def _parse_header(body):
    if len(body) < 6:
        raise ParseError(f"MThd chunk too short ({len(body)} bytes)")
    fmt, ntrks, division = struct.unpack(">HHH", body[:6])
    if fmt not in (0, 1):
        raise UnsupportedFormatError(f"SMF type {fmt} is not supported")
    if division & 0x8000:
        raise UnsupportedFormatError("SMPTE time division is not supported")
    if division == 0:
        raise ParseError("zero ticks per quarter note")
    return fmt, ntrks, division


def _meta_objects(mtype, payload):
    if mtype == META_TEMPO and len(payload) == 3:
        usec = int.from_bytes(payload, "big")
        if usec > 0:
            return Tempo(60e6 / usec)
    elif mtype == META_TIME_SIGNATURE and len(payload) >= 2:
        return TimeSignature(payload[0], 2 ** payload[1])
    elif mtype == META_KEY_SIGNATURE and len(payload) == 2:
        sf = struct.unpack("b", payload[:1])[0]
        return KeySignature(sf, "minor" if payload[1] else "major")
    return None


def load_midi(file, merge_channels=False):
    """Read a type 0 or type 1 Standard MIDI File.

    One part is created per (track, channel) pair that contains notes,
    or per track when `merge_channels` is true. Tempo and time signature
    events apply to every part; key signatures apply to the parts of the
    track carrying them, or to every part when found in a track without
    notes. Dangling note-ons are closed at the end of their track and
    reported with a :class:`MidiWarning`.

    Parameters
    ----------
    file : bytes or binary file object
    merge_channels : bool, optional

    Returns
    -------
    PartGroup
    """
    data = file.read() if hasattr(file, "read") else bytes(file)
    if data[:4] != b"MThd":
        raise ParseError("missing MThd header")
    chunks = list(_chunks(data))
    fmt, ntrks, ppq = _parse_header(chunks[0][1])
    tracks = [body for kind, body in chunks[1:] if kind == b"MTrk"]
    if len(tracks) != ntrks:
        raise ParseError(f"header declares {ntrks} track(s), found {len(tracks)}")

    global_meta = {}
    track_parts = []
    orphan_keys = {}
    note_id = 0
    for ti, body in enumerate(tracks):
        events, last_tick = parse_track(body)
        name = None
        keys = {}
        notes = defaultdict(list)
        pending = defaultdict(deque)
        for tick, kind, payload in events:
            if kind == "meta":
                mtype, mdata = payload
                if mtype == META_TRACK_NAME and name is None:
                    name = mdata.decode("latin-1")
                obj = _meta_objects(mtype, mdata)
                if isinstance(obj, KeySignature):
                    keys[(tick, obj.fifths, obj.mode)] = obj
                elif obj is not None:
                    global_meta.setdefault(_meta_key(tick, obj), (tick, obj))
            elif kind == "channel":
                status, (pitch, *rest) = payload[0], payload[1]
                ch, kind_nibble = status & 0x0F, status >> 4
                if kind_nibble == 0x9 and rest[0] > 0:
                    pending[(ch, pitch)].append(tick)
                elif kind_nibble == 0x8 or kind_nibble == 0x9:
                    if pending[(ch, pitch)]:
                        on = pending[(ch, pitch)].popleft()
                        _close(notes, ch, pitch, on, tick, ti)
                    else:
                        warnings.warn(f"track {ti}: note-off without note-on (channel {ch + 1}, "
                                      f"pitch {pitch}, tick {tick})", MidiWarning, stacklevel=2)
        for (ch, pitch), ons in sorted(pending.items()):
            for on in ons:
                warnings.warn(f"track {ti}: dangling note-on (channel {ch + 1}, pitch {pitch}, "
                              f"tick {on}) closed at tick {last_tick}", MidiWarning, stacklevel=2)
                _close(notes, ch, pitch, on, last_tick, ti)
        if merge_channels:
            merged = [n for ch in sorted(notes) for n in notes[ch]]
            groups = {None: merged} if merged else {}
        else:
            groups = {ch: notes[ch] for ch in sorted(notes) if notes[ch]}
        if not groups:
            orphan_keys.update(keys)
        for ch, group in groups.items():
            pid = f"P{ti + 1}" if ch is None else f"P{ti + 1}-{ch + 1}"
            pname = name
            percussion = (ch == PERCUSSION_CHANNEL) or (
                ch is None and any(n[0] == PERCUSSION_CHANNEL for n in group))
            if percussion:
                pname = f"{name} (percussion)" if name else "percussion"
            part = Part(pid, name=pname)
            part.add(Divisions(ppq), 0)
            for _, pitch, on, off in sorted(group, key=lambda n: (n[2], n[1], n[3])):
                note_id += 1
                part.add(Note(midi_pitch=pitch, id=f"n{note_id}"), on, off)
            track_parts.append((part, keys))

    score = PartGroup()
    for part, keys in track_parts:
        for tick, obj in sorted(global_meta.values(), key=lambda x: _meta_key(*x)):
            part.add(_copy_meta(obj), tick)
        for tick, fifths, mode in sorted({**orphan_keys, **keys}):
            part.add(KeySignature(fifths, mode), tick)
        score.append(part)
    return score


def _meta_key(tick, obj):
    if isinstance(obj, Tempo):
        return (tick, "tempo", obj.quarter_bpm)
    return (tick, "time", obj.beats, obj.beat_type)


def _copy_meta(obj):
    if isinstance(obj, Tempo):
        return Tempo(obj.quarter_bpm)
    return TimeSignature(obj.beats, obj.beat_type)


def _close(notes, ch, pitch, on, off, ti):
    if off > on:
        notes[ch].append((ch, pitch, on, off))
    else:
        warnings.warn(f"track {ti}: dropping zero-length note (channel {ch + 1}, pitch {pitch}, "
                      f"tick {on})", MidiWarning, stacklevel=3)


def read_midi(path, merge_channels=False):
    return load_midi(Path(path).read_bytes(), merge_channels=merge_channels)


# writer

def _track(events):
    """Encode ``(tick, order, bytes)`` events into an MTrk chunk."""
    out = bytearray()
    tick = 0
    for t, _, msg in sorted(events, key=lambda e: (e[0], e[1])):
        out += write_vlq(t - tick)
        out += msg
        tick = t
    out += b"\x00\xff\x2f\x00"
    return b"MTrk" + struct.pack(">I", len(out)) + bytes(out)


def _meta(mtype, payload):
    return bytes([0xFF, mtype]) + write_vlq(len(payload)) + payload


def score_ppq(parts):
    values = sorted({d.value for p in parts for d in p.iter_kind(Divisions)})
    ppq = math.lcm(*values) if values else 1
    if ppq > MAX_PPQ:
        raise CapacityError(f"common PPQ {ppq} of divisions {values} exceeds {MAX_PPQ}")
    return ppq


def save_midi(score):
    """Write a type 1 Standard MIDI File.

    PPQ is the least common multiple of all Divisions values. Track 0 is
    a conductor track with tempo and time signature events (120 quarter
    bpm when the score has no tempo); every part follows as its own
    track. Tied notes are written as single notes, grace notes are
    omitted.
    """
    parts = list(iter_parts(score))
    for part in parts:
        violations = part.validate()
        if violations:
            raise ValidationError(violations)
    ppq = score_ppq(parts)

    def ticks(part, t):
        q = part.quarter_fraction(t) * ppq
        assert q.denominator == 1
        return int(q)

    conductor = {}
    for part in parts:
        for obj in part.iter_kind((Tempo, TimeSignature)):
            tick = ticks(part, obj.start.t)
            if isinstance(obj, Tempo):
                usec = max(1, min(0xFFFFFF, round(60e6 / obj.quarter_bpm)))
                key = (tick, 0, usec.to_bytes(3, "big"))
                conductor.setdefault(key, _meta(META_TEMPO, usec.to_bytes(3, "big")))
            else:
                dd = int(math.log2(obj.beat_type))
                payload = bytes([obj.beats, dd, 24, 8])
                conductor.setdefault((tick, 1, payload), _meta(META_TIME_SIGNATURE, payload))
    if not any(k[1] == 0 for k in conductor):
        usec = round(60e6 / DEFAULT_BPM)
        conductor[(0, 0, usec.to_bytes(3, "big"))] = _meta(META_TEMPO, usec.to_bytes(3, "big"))
    chunks = [_track([(k[0], (k[1], k[2]), msg) for k, msg in conductor.items()])]

    channels = [c for c in range(16) if c != PERCUSSION_CHANNEL]
    melodic = 0
    for part in parts:
        if part.name and part.name.endswith("percussion"):
            ch = PERCUSSION_CHANNEL
        else:
            ch = channels[melodic % len(channels)]
            melodic += 1
        events = []
        if part.name:
            events.append((0, (0, 0, 0), _meta(META_TRACK_NAME, part.name.encode("latin-1", "replace"))))
        for k in part.iter_kind(KeySignature):
            payload = struct.pack("bB", k.fifths, 1 if k.mode == "minor" else 0)
            events.append((ticks(part, k.start.t), (0, 1, k.fifths), _meta(META_KEY_SIGNATURE, payload)))
        for row in part.note_array():
            on = ticks(part, row.onset_div)
            off = ticks(part, row.onset_div + row.duration_div)
            # offs sort before ons at the same tick
            events.append((on, (2, row.midi_pitch, row.id), bytes([0x90 | ch, row.midi_pitch, 64])))
            events.append((off, (1, row.midi_pitch, row.id), bytes([0x80 | ch, row.midi_pitch, 0])))
        chunks.append(_track(events))

    header = b"MThd" + struct.pack(">IHHH", 6, 1, len(chunks), ppq)
    return header + b"".join(chunks)


def write_midi(score, path):
    Path(path).write_bytes(save_midi(score))

