"""Pitch spelling with the first stage of Meredith's ps13 algorithm.

Each note is assigned a morph (letter index, 0 = C ... 6 = B). Every
pitch class occurring in the note's context window votes as a possible
tonic; the vote goes to the morph that the note would have relative to
that tonic, weighted by how often the tonic pitch class occurs.
"""

from __future__ import annotations

from staffline.analysis.config import SpellingParams
from staffline.errors import DomainError, StafflineError
from staffline.score import STEP_BASE, STEPS


def morph_votes(chroma, counts, params):
    """Summed tonic weights per candidate morph for a note of `chroma`."""
    votes = [0] * 7
    for p in range(12):
        if counts[p]:
            m = (params.tonic_chroma_to_morph[p] + params.degree_to_morph[(chroma - p) % 12]) % 7
            votes[m] += counts[p]
    return votes


def choose_morph(chroma, counts, params):
    votes = morph_votes(chroma, counts, params)
    top = max(votes)
    tied = [m for m in range(7) if votes[m] == top]
    if len(tied) == 1:
        return tied[0]
    heaviest = max(counts)
    tonics = [p for p in range(12) if counts[p] == heaviest]
    if len(tonics) == 1:
        p = tonics[0]
        implied = (params.tonic_chroma_to_morph[p] + params.degree_to_morph[(chroma - p) % 12]) % 7
        if implied in tied:
            return implied
    return tied[0]


def _alter(chroma, morph):
    return (chroma - STEP_BASE[STEPS[morph]] + 6) % 12 - 6


def spell_from_morph(pitch, morph):
    """(step, alter, octave) for `pitch` written with letter `morph`.

    Falls back to the nearest letter (upwards first) when the alteration
    would exceed a double sharp or flat.
    """
    chroma = pitch % 12
    for offset in (0, 1, -1, 2, -2, 3, -3):
        m = (morph + offset) % 7
        alter = _alter(chroma, m)
        if abs(alter) <= 2:
            step = STEPS[m]
            octave, rem = divmod(pitch - STEP_BASE[step] - alter, 12)
            if rem:
                raise StafflineError(f"cannot spell pitch {pitch} with {step}{alter:+d}")
            return step, alter, octave - 1
    raise StafflineError(f"no letter spells pitch {pitch}")


def estimate_spelling(pitches, params=None):
    """Spell a sequence of MIDI pitches ordered by onset and pitch.

    Returns one ``(step, alter, octave)`` triple per input pitch.
    """
    params = params or SpellingParams()
    pitches = [int(p) for p in pitches]
    if not pitches:
        raise DomainError("pitch spelling needs at least one note")
    chromas = [p % 12 for p in pitches]
    n = len(pitches)
    out = []
    for i, pitch in enumerate(pitches):
        lo = max(0, i - params.k_pre)
        hi = min(n, i + params.k_post + 1)
        counts = [0] * 12
        for c in chromas[lo:hi]:
            counts[c] += 1
        out.append(spell_from_morph(pitch, choose_morph(chromas[i], counts, params)))
    return out
