"""Voice separation by contig mapping (VoSA, Chew & Wu 2004).

The time axis is cut at every onset and offset. Each resulting span in
which at least one note sounds is a contig; the pieces of notes inside a
contig are its fragments. Fragments of neighbouring contigs are
connected into threads, starting from the contigs with the most
fragments and walking outwards. Every thread becomes one voice.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

from staffline.errors import DomainError


@dataclass
class Contig:
    start: int
    end: int
    # note indices, highest pitch first
    fragments: list
    is_maximal: bool = False


@dataclass
class Connection:
    left: int
    """Index of the left contig; the right one is ``left + 1``."""
    pairs: list = field(default_factory=list)
    cost: int = 0


@dataclass
class VoiceSeparation:
    voices: list
    contigs: list
    connections: list

    @property
    def total_cost(self):
        return sum(c.cost for c in self.connections)


def _check(notes):
    notes = [(int(a), int(b), int(p)) for a, b, p in notes]
    if not notes:
        raise DomainError("voice separation needs at least one note")
    for a, b, p in notes:
        if b <= a:
            raise DomainError(f"note ({a}, {b}, {p}) has no positive duration")
    return notes


def contig_map(notes):
    """Contigs of ``(onset, offset, pitch)`` notes, in time order."""
    notes = _check(notes)
    starts, ends = {}, {}
    for i, (a, b, _) in enumerate(notes):
        starts.setdefault(a, []).append(i)
        ends.setdefault(b, []).append(i)
    times = sorted(set(starts) | set(ends))
    active = set()
    contigs = []
    for a, b in zip(times, times[1:]):
        active.difference_update(ends.get(a, ()))
        active.update(starts.get(a, ()))
        if active:
            frags = sorted(active, key=lambda i: (-notes[i][2], i))
            contigs.append(Contig(a, b, frags))
    top = max(len(c.fragments) for c in contigs)
    for c in contigs:
        c.is_maximal = len(c.fragments) == top
    return contigs


def _order_preserving_match(left, right):
    """Minimum-cost matching of size ``min(len(left), len(right))``
    between two descending pitch lists that never crosses.

    Returns ``(cost, [(i, j), ...])``. On equal cost, pairing the current
    elements wins over skipping one.
    """
    swap = len(left) > len(right)
    a, b = (right, left) if swap else (left, right)
    n, m = len(a), len(b)

    @lru_cache(maxsize=None)
    def best(i, j):
        if i == n:
            return 0, ()
        take_cost, take_rest = best(i + 1, j + 1)
        take = (abs(a[i] - b[j]) + take_cost, ((i, j),) + take_rest)
        if m - j > n - i:
            skip = best(i, j + 1)
            if skip[0] < take[0]:
                return skip
        return take

    cost, pairs = best(0, 0)
    if swap:
        pairs = tuple((j, i) for i, j in pairs)
    return cost, list(pairs)


def connect(left, right, pitches):
    """Connect the fragments of two neighbouring contigs.

    Fragments of the same note are always connected. The remaining
    fragments are paired at minimum total pitch distance; surplus
    fragments stay unconnected.

    Returns ``(pairs of note indices, cost)``.
    """
    held = set(left) & set(right)
    pairs = [(i, i) for i in left if i in held]
    free_l = [i for i in left if i not in held]
    free_r = [i for i in right if i not in held]
    cost, matched = _order_preserving_match(
        tuple(pitches[i] for i in free_l), tuple(pitches[i] for i in free_r))
    pairs += [(free_l[i], free_r[j]) for i, j in matched]
    return pairs, cost


def separate_voices(notes):
    """Full voice separation result for ``(onset, offset, pitch)`` notes."""
    notes = _check(notes)
    pitches = [p for _, _, p in notes]
    contigs = contig_map(notes)
    maximal = [k for k, c in enumerate(contigs) if c.is_maximal]

    def distance(k):
        # boundary k lies between contigs k and k + 1
        return min(k - j if j <= k else j - (k + 1) for j in maximal)

    connections = []
    for k in sorted(range(len(contigs) - 1), key=lambda k: (distance(k), k)):
        pairs, cost = connect(contigs[k].fragments, contigs[k + 1].fragments, pitches)
        connections.append(Connection(k, pairs, cost))
    connections.sort(key=lambda c: c.left)

    parent = list(range(len(notes)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for conn in connections:
        for i, j in conn.pairs:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)

    threads = {}
    for i in range(len(notes)):
        threads.setdefault(find(i), []).append(i)

    def rank(members):
        mean = sum(pitches[i] for i in members) / len(members)
        return (-mean, min(notes[i][0] for i in members), min(members))

    voices = [0] * len(notes)
    for v, members in enumerate(sorted(threads.values(), key=rank), start=1):
        for i in members:
            voices[i] = v
    return VoiceSeparation(voices, contigs, connections)


def estimate_voices(notes):
    """Voice number (1 = highest) for each ``(onset, offset, pitch)`` note."""
    return separate_voices(notes).voices
