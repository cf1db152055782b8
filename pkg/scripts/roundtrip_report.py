"""Round-trip every given score through MusicXML and MIDI and report
what survives.

    python scripts/roundtrip_report.py [files ...]

With no arguments, the MusicXML fixtures under tests/fixtures are used.
"""

import argparse
import sys
import warnings
from collections import Counter
from pathlib import Path

from staffline.analysis import enrich
from staffline.errors import StafflineError
from staffline.midi import MidiWarning, load_midi, save_midi
from staffline.musicxml import load_musicxml, save_musicxml
from staffline.score import iter_parts, models_equal

ROOT = Path(__file__).resolve().parent.parent


def events(score):
    return Counter((r.onset_quarter, r.duration_quarter, r.midi_pitch)
                   for p in iter_parts(score) for r in p.note_array())


def load(path):
    data = path.read_bytes()
    if path.suffix.lower() in (".mid", ".midi"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", MidiWarning)
            score = load_midi(data)
        for part in iter_parts(score):
            enrich(part)
        return score
    return load_musicxml(data)[0]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("files", nargs="*", type=Path)
    args = ap.parse_args()
    files = args.files or sorted((ROOT / "tests" / "fixtures" / "musicxml").glob("[0-9]*.musicxml"))
    print(f"{'file':<28} {'notes':>5}  xml-model  xml-bytes  midi-events")
    failures = 0
    for path in files:
        try:
            score = load(path)
            saved = save_musicxml(score)
            again = load_musicxml(saved)[0]
            via_midi = load_midi(save_midi(score))
        except StafflineError as e:
            print(f"{path.name:<28} error: {e}")
            failures += 1
            continue
        row = (models_equal(score, again), save_musicxml(again) == saved,
               events(via_midi) == events(score))
        failures += not all(row)
        n = sum(events(score).values())
        print(f"{path.name:<28} {n:>5}  " + "  ".join(f"{'ok' if ok else 'DIFF':<9}" for ok in row))
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
