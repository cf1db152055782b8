"""Command line interface: ``staffline convert|analyze|notearray|validate``.

Exit status is 0 on success, 1 for data errors (unreadable or invalid
input, failed estimation, validation violations) and 2 for usage errors.
Payloads go to standard output (or ``--output``), diagnostics to
standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import warnings
from pathlib import Path

from staffline.analysis import (enrich, estimate_key, estimate_spelling,
                                estimate_voices, load_config)
from staffline.analysis.config import AnalysisConfig
from staffline.errors import StafflineError
from staffline.midi import load_midi, save_midi
from staffline.musicxml import load_musicxml, save_musicxml
from staffline.score import iter_parts

FORMATS = {".musicxml": "musicxml", ".xml": "musicxml", ".mid": "midi", ".midi": "midi"}
CONFIG_ENV = "STAFFLINE_CONFIG"
CSV_HEADER = ["onset_div", "duration_div", "onset_quarter", "duration_quarter",
              "pitch", "voice", "staff", "id"]


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _format(path, forced):
    if forced:
        return forced
    fmt = FORMATS.get(Path(path).suffix.lower())
    if fmt is None:
        raise UsageError(f"unknown format for {path!r}; use --from/--to")
    return fmt


def _load(path, fmt, merge_channels=False):
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e.strerror}") from None
    if fmt == "musicxml":
        score, report = load_musicxml(data)
        for name, count in report.skipped:
            print(f"skipped <{name}> x{count}", file=sys.stderr)
        for w in report.warnings:
            print(f"warning: {w}", file=sys.stderr)
        return score
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        score = load_midi(data, merge_channels=merge_channels)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return score


def _config():
    path = os.environ.get(CONFIG_ENV)
    if not path:
        return AnalysisConfig()
    try:
        return load_config(path)
    except OSError as e:
        raise DataError(f"cannot read {CONFIG_ENV}={path}: {e.strerror}") from None


def _emit(text, output):
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_convert(args):
    src = _format(args.input, args.from_)
    dst = _format(args.output, args.to)
    score = _load(args.input, src, args.merge_channels)
    if args.enrich:
        if src != "midi":
            print("note: --enrich only applies to MIDI input; ignored", file=sys.stderr)
        else:
            config = _config()
            for part in iter_parts(score):
                enrich(part, config)
    data = save_musicxml(score) if dst == "musicxml" else save_midi(score)
    try:
        Path(args.output).write_bytes(data)
    except OSError as e:
        raise DataError(f"cannot write {args.output}: {e.strerror}") from None
    return 0


def cmd_analyze(args):
    if not (args.key or args.voices or args.spelling):
        raise UsageError("analyze needs at least one of --key, --voices, --spelling")
    score = _load(args.input, _format(args.input, args.from_))
    config = _config()
    parts = list(iter_parts(score))
    result = {}
    if args.key:
        notes = [(r.midi_pitch, r.duration_quarter) for p in parts for r in p.note_array()]
        fifths, mode = estimate_key(notes, config.profiles)
        result["key"] = {"fifths": fifths, "mode": mode}
    if args.voices:
        result["voices"] = []
        for p in parts:
            rows = p.note_array()
            if rows:
                result["voices"] += estimate_voices(
                    [(r.onset_div, r.onset_div + r.duration_div, r.midi_pitch) for r in rows])
    if args.spelling:
        result["spelling"] = []
        for p in parts:
            rows = p.note_array()
            if rows:
                triples = estimate_spelling([r.midi_pitch for r in rows], config.spelling)
                result["spelling"] += [{"id": r.id, "step": s, "alter": a, "octave": o}
                                       for r, (s, a, o) in zip(rows, triples)]
    if args.json:
        text = json.dumps(result, separators=(",", ":")) + "\n"
    else:
        lines = []
        if "key" in result:
            lines.append(f"key: fifths={result['key']['fifths']} mode={result['key']['mode']}")
        if "voices" in result:
            lines.append("voices: " + " ".join(str(v) for v in result["voices"]))
        if "spelling" in result:
            lines.append("spelling:")
            lines += [f"  {s['id']} {s['step']} {s['alter']:+d} {s['octave']}" for s in result["spelling"]]
        text = "\n".join(lines) + "\n"
    _emit(text, args.output)
    return 0


def cmd_notearray(args):
    score = _load(args.input, _format(args.input, args.from_))
    rows = [r for p in iter_parts(score) for r in p.note_array()]
    cells = [[str(r.onset_div), str(r.duration_div), f"{r.onset_quarter:.6f}",
              f"{r.duration_quarter:.6f}", str(r.midi_pitch), str(r.voice), str(r.staff), r.id]
             for r in rows]
    buf = io.StringIO()
    if args.csv:
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(cells)
    else:
        widths = [max([len(h)] + [len(c[i]) for c in cells]) for i, h in enumerate(CSV_HEADER)]
        for line in [CSV_HEADER] + cells:
            buf.write("  ".join(c.rjust(w) for c, w in zip(line, widths)).rstrip() + "\n")
    _emit(buf.getvalue(), args.output)
    return 0


def cmd_validate(args):
    score = _load(args.input, _format(args.input, args.from_))
    n = 0
    for part in iter_parts(score):
        for v in part.validate():
            print(f"{part.id}: {v}")
            n += 1
    if n:
        print(f"{n} violation(s)", file=sys.stderr)
        return 1
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="staffline", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    fmt_choices = ("musicxml", "midi")

    p = sub.add_parser("convert", help="convert between MusicXML and MIDI")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--from", dest="from_", choices=fmt_choices)
    p.add_argument("--to", choices=fmt_choices)
    p.add_argument("--enrich", action="store_true",
                   help="estimate key, spelling and voices for MIDI input")
    p.add_argument("--merge-channels", action="store_true",
                   help="one part per MIDI track instead of per (track, channel)")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("analyze", help="estimate key, voices and pitch spelling")
    p.add_argument("input")
    p.add_argument("--from", dest="from_", choices=fmt_choices)
    p.add_argument("--key", action="store_true")
    p.add_argument("--voices", action="store_true")
    p.add_argument("--spelling", action="store_true")
    p.add_argument("--json", action="store_true")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("notearray", help="print the note array")
    p.add_argument("input")
    p.add_argument("--from", dest="from_", choices=fmt_choices)
    p.add_argument("--csv", action="store_true")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_notearray)

    p = sub.add_parser("validate", help="check model invariants")
    p.add_argument("input")
    p.add_argument("--from", dest="from_", choices=fmt_choices)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"staffline: error: {e}", file=sys.stderr)
        return 2
    except (DataError, StafflineError) as e:
        print(f"staffline: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
