"""Estimators that fill in notation missing from reductive input: key
signature, pitch spelling and voices."""

from __future__ import annotations

from staffline.analysis.config import (AnalysisConfig, KeyProfilePair,
                                       SpellingParams, load_config,
                                       parse_config)
from staffline.analysis.key import (estimate_key, estimate_tonic,
                                    key_correlations)
from staffline.analysis.spelling import estimate_spelling
from staffline.analysis.voices import (contig_map, estimate_voices,
                                       separate_voices)
from staffline.score import KeySignature

__all__ = [
    "AnalysisConfig", "KeyProfilePair", "SpellingParams", "load_config", "parse_config",
    "estimate_key", "estimate_tonic", "key_correlations", "estimate_spelling",
    "contig_map", "estimate_voices", "separate_voices", "enrich",
]


def enrich(part, config=None):
    """Fill in key signature, spelling and voices of `part` in place.

    Adds a KeySignature at t=0 when the part has none, spells every
    unspelled note and assigns a voice to every note without one. Values
    already present are left alone. Tied chains are treated as one
    sounding note. Returns `part`.
    """
    config = config or AnalysisConfig()
    chains = part.tied_chains(include_grace=True)
    if not chains:
        return part
    sounding = [c for c in chains if not c[0].grace]

    if not any(True for _ in part.iter_kind(KeySignature)) and sounding:
        durations = [(c[0].midi_pitch,
                      float(part.quarter_fraction(c[-1].end.t) - part.quarter_fraction(c[0].start.t)))
                     for c in sounding]
        fifths, mode = estimate_key(durations, config.profiles)
        part.add(KeySignature(fifths, mode), 0)

    if any(not n.spelled for c in chains for n in c):
        ordered = sorted(chains, key=lambda c: (c[0].start.t, c[0].midi_pitch, c[0].id or ""))
        spelled = estimate_spelling([c[0].midi_pitch for c in ordered], config.spelling)
        for chain, (step, alter, octave) in zip(ordered, spelled):
            for note in chain:
                if not note.spelled:
                    note.spell(step, alter, octave)

    if any(n.voice is None for c in chains for n in c):
        voices = estimate_voices([(c[0].start.t, c[-1].end.t, c[0].midi_pitch) for c in sounding]) \
            if sounding else []
        for chain, v in zip(sounding, voices):
            for note in chain:
                if note.voice is None:
                    note.voice = v
        for chain in chains:
            if chain[0].grace and chain[0].voice is None:
                chain[0].voice = _grace_voice(chain[0], sounding)
    return part


def _grace_voice(grace, sounding):
    t = grace.start.t
    near = [c[0] for c in sounding if c[0].start.t == t and c[0].voice is not None]
    if not near:
        return 1
    return min(near, key=lambda n: (abs(n.midi_pitch - grace.midi_pitch), n.voice)).voice
