"""Key estimation by correlating a pitch-class duration histogram with
major and minor key profiles (the Krumhansl-Schmuckler procedure)."""

from __future__ import annotations

import numpy as np

from staffline.analysis.config import KeyProfilePair
from staffline.errors import DomainError

MODES = ("major", "minor")


def key_index(tonic, mode):
    """0..11 for C..B major, 12..23 for C..B minor."""
    return tonic + (12 if mode == "minor" else 0)


def key_fifths(tonic, mode):
    """Key-signature accidentals of a key, in [-6, 6] (F#/Gb major -> +6)."""
    v = (tonic * 7 + (9 if mode == "minor" else 0)) % 12
    return v - 12 if v > 6 else v


def pitch_class_histogram(notes):
    """Duration-weighted pitch-class histogram of ``(midi_pitch, duration)`` pairs."""
    h = np.zeros(12)
    for pitch, duration in notes:
        h[int(pitch) % 12] += duration
    return h


def key_correlations(notes, profiles=None):
    """Pearson correlation of the histogram with each of the 24 rotated
    profiles, in :func:`key_index` order."""
    profiles = profiles or KeyProfilePair()
    h = pitch_class_histogram(notes)
    if not len(notes) or h.sum() <= 0:
        raise DomainError("key estimation needs at least one note with positive duration")
    hc = h - h.mean()
    hn = np.sqrt(hc @ hc)
    out = np.zeros(24)
    for m, profile in enumerate((profiles.major, profiles.minor)):
        base = np.asarray(profile, dtype=float)
        for tonic in range(12):
            p = np.roll(base, tonic)
            pc = p - p.mean()
            denom = hn * np.sqrt(pc @ pc)
            # a flat histogram correlates with nothing
            out[12 * m + tonic] = (hc @ pc) / denom if denom > 0 else 0.0
    return out


def estimate_key(notes, profiles=None):
    """Most likely key of a set of notes.

    Parameters
    ----------
    notes : sequence of (midi_pitch, duration_quarter)
    profiles : KeyProfilePair, optional

    Returns
    -------
    fifths : int
    mode : {'major', 'minor'}
    """
    corr = key_correlations(notes, profiles)
    best = int(np.argmax(corr))
    tonic, mode = best % 12, MODES[best // 12]
    return key_fifths(tonic, mode), mode


def estimate_tonic(notes, profiles=None):
    """Like :func:`estimate_key` but returns ``(tonic pitch class, mode)``."""
    best = int(np.argmax(key_correlations(notes, profiles)))
    return best % 12, MODES[best // 12]
