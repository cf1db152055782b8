"""Test-side builders and brute-force oracles.

Nothing in here calls into the code paths it is used to check: the SMF
builder encodes bytes by hand, and the oracles recompute results from
first principles (per-division scans, exhaustive enumeration).
"""

import itertools
import random
import statistics
import struct
from fractions import Fraction

from staffline.score import Divisions, Note, Part

STEPS = "CDEFGAB"
BASE = [0, 2, 4, 5, 7, 9, 11]


# --- Standard MIDI Files ------------------------------------------------

def vlq(n):
    groups = [n & 0x7F]
    while n > 127:
        n >>= 7
        groups.insert(0, (n & 0x7F) | 0x80)
    return bytes(groups)


def mtrk(events, running_status=False):
    """`events` is a list of (absolute tick, raw message bytes)."""
    out = b""
    now = 0
    last_status = None
    for tick, msg in sorted(events, key=lambda e: e[0]):
        out += vlq(tick - now)
        now = tick
        if running_status and msg[0] < 0xF0 and msg[0] == last_status:
            out += msg[1:]
        else:
            out += msg
        last_status = msg[0] if msg[0] < 0xF0 else None
    out += b"\x00\xff\x2f\x00"
    return b"MTrk" + struct.pack(">I", len(out)) + out


def smf(tracks, ppq=480, fmt=None, running_status=False):
    if fmt is None:
        fmt = 0 if len(tracks) == 1 else 1
    head = b"MThd" + struct.pack(">IHHH", 6, fmt, len(tracks), ppq)
    return head + b"".join(mtrk(t, running_status) for t in tracks)


def on(tick, pitch, vel=64, ch=0):
    return (tick, bytes([0x90 | ch, pitch, vel]))


def off(tick, pitch, ch=0, as_zero_on=False):
    if as_zero_on:
        return (tick, bytes([0x90 | ch, pitch, 0]))
    return (tick, bytes([0x80 | ch, pitch, 0]))


def note(start, end, pitch, ch=0):
    return [on(start, pitch, ch=ch), off(end, pitch, ch=ch)]


def tempo(tick, bpm):
    usec = round(60e6 / bpm)
    return (tick, b"\xff\x51\x03" + usec.to_bytes(3, "big"))


def timesig(tick, beats, beat_type):
    return (tick, bytes([0xFF, 0x58, 4, beats, beat_type.bit_length() - 1, 24, 8]))


def keysig(tick, fifths, minor=False):
    return (tick, bytes([0xFF, 0x59, 2, fifths & 0xFF, int(minor)]))


def track_name(name):
    raw = name.encode()
    return (0, bytes([0xFF, 0x03, len(raw)]) + raw)


def midi_fixtures():
    """Hand-built SMF byte strings covering the supported reader surface."""
    f = {}
    f["single_note"] = smf([note(0, 480, 60)])
    scale = [60, 62, 64, 65, 67, 69, 71, 72]
    f["c_major_scale"] = smf([[e for i, p in enumerate(scale) for e in note(i * 240, (i + 1) * 240, p)]])
    f["overlap_same_pitch"] = smf([note(0, 480, 64) + note(240, 720, 64) + note(720, 960, 64)])
    f["multitrack"] = smf([
        [tempo(0, 100), timesig(0, 3, 4), track_name("conductor")],
        [track_name("upper")] + note(0, 480, 72) + note(480, 1440, 74),
        [track_name("lower")] + note(0, 1440, 48) + note(0, 1440, 55),
    ])
    f["two_channels_one_track"] = smf([note(0, 960, 60, ch=0) + note(0, 480, 67, ch=3) + note(480, 960, 65, ch=3)])
    f["chords"] = smf([note(0, 960, 60) + note(0, 960, 64) + note(0, 960, 67)
                       + note(960, 1920, 59) + note(960, 1920, 62) + note(960, 1920, 67)])
    f["running_status_zero_velocity"] = smf(
        [[on(0, 60), off(120, 60, as_zero_on=True), on(120, 62), off(240, 62, as_zero_on=True),
          on(240, 64), off(360, 64, as_zero_on=True)]], ppq=120, running_status=True)
    f["tempo_and_meter_changes"] = smf([
        [tempo(0, 90), timesig(0, 4, 4), tempo(1920, 140), timesig(1920, 6, 8)],
        note(0, 1920, 67) + note(1920, 2400, 69) + note(2400, 2640, 71),
    ])
    f["key_signature_minor"] = smf([[keysig(0, -3, minor=True)] + note(0, 96, 60) + note(96, 192, 63)
                                    + note(192, 288, 67) + note(288, 384, 68)], ppq=96)
    f["percussion"] = smf([[track_name("kit")] + note(0, 60, 36, ch=9) + note(120, 180, 38, ch=9)
                           + note(0, 480, 60, ch=0)], ppq=240)
    f["triplets_ppq96"] = smf([note(0, 32, 60) + note(32, 64, 62) + note(64, 96, 64) + note(96, 288, 65)], ppq=96)
    f["dangling_note_on"] = smf([note(0, 240, 60) + [on(240, 62), (480, b"\xff\x01\x01x")]])
    return f


# --- random scores --------------------------------------------------------

def random_score(rng, max_notes=20, span=48, grace=True):
    """A random part with Divisions changes, tied chains and grace notes.

    Returns ``(part, divisions, chains)`` where `divisions` is the list of
    ``(t, value)`` segments and `chains` lists ``(start, end, pitch,
    head_id, n_pieces)`` per sounding note.
    """
    part = Part("P1")
    div_ts = sorted({0} | {rng.randrange(1, span) for _ in range(rng.randint(0, 2))})
    divisions = [(t, rng.choice([1, 2, 3, 4, 6, 8])) for t in div_ts]
    for t, v in divisions:
        part.add(Divisions(v), t)
    chains = []
    budget = rng.randint(0, max_notes)
    k = 0
    while budget > 0:
        pieces = min(budget, rng.randint(1, 3))
        budget -= pieces
        start = rng.randrange(0, span)
        pitch = rng.randrange(0, 128)
        t = start
        prev = None
        head = None
        for _ in range(pieces):
            k += 1
            d = rng.randint(1, 8)
            n = part.add(Note(midi_pitch=pitch, id=f"r{k}"), t, t + d)
            if prev is not None:
                prev.tie_to(n)
            head = head or n
            prev = n
            t += d
        chains.append((start, t, pitch, head.id, pieces))
    if grace:
        for _ in range(rng.randint(0, 2)):
            k += 1
            t = rng.randrange(0, span)
            part.add(Note(midi_pitch=rng.randrange(128), id=f"g{k}", grace=True), t, t)
    return part, divisions, chains


def divisions_at(divisions, x):
    value = None
    for t, v in divisions:
        if t <= x:
            value = v
    return value


def quarters_by_scan(divisions, t):
    """Quarter offset of position `t`, summing 1/d division by division."""
    return sum((Fraction(1, divisions_at(divisions, x)) for x in range(t)), Fraction(0))


def note_array_oracle(divisions, chains):
    rows = []
    for start, end, pitch, head, _ in chains:
        q0 = quarters_by_scan(divisions, start)
        q1 = quarters_by_scan(divisions, end)
        rows.append((start, end - start, float(q0), float(q1 - q0), pitch, 0, 0, head))
    rows.sort(key=lambda r: (r[0], r[4], r[7]))
    return rows


def piano_roll_oracle(notes, last_t, cell):
    """Set of (pitch, column) cells by scanning every division of every note."""
    width = -(-last_t // cell)
    cells = set()
    for start, end, pitch in notes:
        for x in range(start, end):
            cells.add((pitch, x // cell))
    return width, cells


# --- key finding ------------------------------------------------------------

def key_correlation_oracle(notes, major, minor):
    hist = [0.0] * 12
    for pitch, dur in notes:
        hist[pitch % 12] += dur
    out = []
    for profile in (major, minor):
        for tonic in range(12):
            rotated = [profile[(pc - tonic) % 12] for pc in range(12)]
            out.append(statistics.correlation(hist, rotated))
    return out


# --- pitch spelling ---------------------------------------------------------

def spelling_oracle(pitches, k_pre, k_post, degree_to_morph, tonic_to_morph):
    out = []
    n = len(pitches)
    for i, pitch in enumerate(pitches):
        c = pitch % 12
        context = [pitches[j] % 12 for j in range(n) if i - k_pre <= j <= i + k_post]

        def implied(tonic):
            return (tonic_to_morph[tonic] + degree_to_morph[(c - tonic) % 12]) % 7

        score = {m: sum(1 for tonic in context if implied(tonic) == m) for m in range(7)}
        best = max(score.values())
        tied = sorted(m for m in range(7) if score[m] == best)
        morph = tied[0]
        if len(tied) > 1:
            weight = {p: context.count(p) for p in set(context)}
            top = max(weight.values())
            leaders = [p for p in weight if weight[p] == top]
            if len(leaders) == 1 and implied(leaders[0]) in tied:
                morph = implied(leaders[0])
        # nearest letter with |alter| <= 2; distance ties go upward
        order = sorted(range(7), key=lambda m: (min((m - morph) % 7, (morph - m) % 7),
                                                0 if (m - morph) % 7 <= 3 else 1))
        for m in order:
            alter = (c - BASE[m] + 6) % 12 - 6
            if abs(alter) <= 2:
                break
        octave = next(o for o in range(-2, 12) if (o + 1) * 12 + BASE[m] + alter == pitch)
        out.append((STEPS[m], alter, octave))
    return out


# --- voice separation -------------------------------------------------------

def elementary_segments(notes):
    times = sorted({t for a, b, _ in notes for t in (a, b)})
    segs = []
    for a, b in zip(times, times[1:]):
        sounding = [i for i, (on_, off_, _) in enumerate(notes) if on_ <= a and off_ >= b]
        if sounding:
            segs.append(sounding)
    return segs


def best_boundary_cost(left, right, pitches):
    """Exhaustive minimum cost over all admissible boundary matchings."""
    held = set(left) & set(right)
    fl = [i for i in left if i not in held]
    fr = [i for i in right if i not in held]
    k = min(len(fl), len(fr))
    best = None
    for chosen_l in itertools.combinations(fl, k):
        for chosen_r in itertools.permutations(fr, k):
            cost = sum(abs(pitches[a] - pitches[b]) for a, b in zip(chosen_l, chosen_r))
            best = cost if best is None else min(best, cost)
    return best or 0


def exhaustive_total_cost(notes):
    pitches = [p for _, _, p in notes]
    segs = elementary_segments(notes)
    return sum(best_boundary_cost(a, b, pitches) for a, b in zip(segs, segs[1:]))


def random_voice_instance(rng, n, span=40, pitch_range=(36, 84)):
    notes = []
    for _ in range(n):
        a = rng.randrange(span)
        notes.append((a, a + rng.randint(1, 8), rng.randint(*pitch_range)))
    return notes


def new_rng(seed):
    return random.Random(seed)
