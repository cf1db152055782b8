"""Configuration data for the analysis estimators.

A configuration file is plain text with one ``key = value`` per line and
``#`` comments. Recognised keys::

    major_profile = 6.35, 2.23, ...        # 12 weights, tonic first
    minor_profile = 6.33, 2.68, ...
    k_pre = 10
    k_post = 42
    degree_to_morph = 0, 1, 1, 2, 2, 3, 3, 4, 5, 5, 6, 6
    tonic_chroma_to_morph = 0, 0, 1, 1, 2, 3, 3, 4, 4, 5, 5, 6

Missing keys keep their defaults.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from staffline.errors import DomainError

# Krumhansl & Kessler probe-tone ratings as published in Krumhansl (1990),
# "Cognitive Foundations of Musical Pitch"; indexed by semitones above
# the tonic.
KK_MAJOR = (6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88)
KK_MINOR = (6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17)

DEGREE_TO_MORPH = (0, 1, 1, 2, 2, 3, 3, 4, 5, 5, 6, 6)
TONIC_CHROMA_TO_MORPH = (0, 0, 1, 1, 2, 3, 3, 4, 4, 5, 5, 6)


@dataclass(frozen=True)
class KeyProfilePair:
    major: tuple = KK_MAJOR
    minor: tuple = KK_MINOR

    def __post_init__(self):
        for name in ("major", "minor"):
            w = tuple(float(x) for x in getattr(self, name))
            if len(w) != 12 or min(w) <= 0:
                raise DomainError(f"{name} profile needs 12 positive weights, got {w}")
            object.__setattr__(self, name, w)


@dataclass(frozen=True)
class SpellingParams:
    k_pre: int = 10
    k_post: int = 42
    degree_to_morph: tuple = DEGREE_TO_MORPH
    tonic_chroma_to_morph: tuple = TONIC_CHROMA_TO_MORPH

    def __post_init__(self):
        if self.k_pre < 0 or self.k_post < 1:
            raise DomainError(f"need k_pre >= 0 and k_post >= 1, got {self.k_pre}, {self.k_post}")
        for name in ("degree_to_morph", "tonic_chroma_to_morph"):
            table = tuple(int(x) for x in getattr(self, name))
            if len(table) != 12 or not all(0 <= m <= 6 for m in table):
                raise DomainError(f"{name} needs 12 entries in 0..6, got {table}")
            object.__setattr__(self, name, table)
        if self.degree_to_morph[0] != 0:
            raise DomainError("degree_to_morph[0] must be 0")


@dataclass(frozen=True)
class AnalysisConfig:
    profiles: KeyProfilePair = field(default_factory=KeyProfilePair)
    spelling: SpellingParams = field(default_factory=SpellingParams)


def _floats(text):
    return tuple(float(x) for x in text.replace(",", " ").split())


def _ints(text):
    return tuple(int(x) for x in text.replace(",", " ").split())


def parse_config(text):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string("[analysis]\n" + text)
    except configparser.Error as e:
        raise DomainError(f"bad analysis configuration: {e}") from None
    sec = parser["analysis"]
    known = {"major_profile", "minor_profile", "k_pre", "k_post",
             "degree_to_morph", "tonic_chroma_to_morph"}
    unknown = set(sec) - known
    if unknown:
        raise DomainError(f"unknown configuration keys: {sorted(unknown)}")
    cfg = AnalysisConfig()
    try:
        profiles = KeyProfilePair(
            _floats(sec["major_profile"]) if "major_profile" in sec else cfg.profiles.major,
            _floats(sec["minor_profile"]) if "minor_profile" in sec else cfg.profiles.minor)
        changes = {}
        for key in ("k_pre", "k_post"):
            if key in sec:
                changes[key] = int(sec[key])
        for key in ("degree_to_morph", "tonic_chroma_to_morph"):
            if key in sec:
                changes[key] = _ints(sec[key])
        spelling = replace(cfg.spelling, **changes)
    except ValueError as e:
        raise DomainError(f"bad analysis configuration: {e}") from None
    return AnalysisConfig(profiles, spelling)


def load_config(path):
    return parse_config(Path(path).read_text())
