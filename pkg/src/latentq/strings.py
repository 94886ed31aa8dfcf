"""Labelled strings, concatenation, pair products and their reordering isomorphisms.

A character remembers which string instance it was born in (its ``tag``) and
its 1-based position there, so ``i_N`` and ``i_M`` stay distinct even when
``N`` and ``M`` have equal content.  Pair strings keep the ordered pairs the
constructors emit; comparisons that should ignore orientation go through
:func:`pair_key`.

Permutations are returned as destination images: item ``p`` of the source
list lands at index ``images[p]`` of the target list (0-based).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import Iterable, Sequence


@dataclass(frozen=True, order=True)
class Char:
    tag: str
    index: int  # 1-based position in the parent string

    def __repr__(self) -> str:
        return f"{self.index}_{self.tag}"


Pair = tuple[Char, Char]


@dataclass(frozen=True)
class LabelledString:
    chars: tuple[Char, ...] = ()

    @classmethod
    def fresh(cls, length: int, tag: str) -> "LabelledString":
        return cls(tuple(Char(tag, i) for i in range(1, length + 1)))

    def __len__(self) -> int:
        return len(self.chars)

    def __iter__(self):
        return iter(self.chars)

    def __getitem__(self, i):
        return self.chars[i]


EMPTY = LabelledString()


@dataclass(frozen=True)
class PairString:
    pairs: tuple[Pair, ...] = ()

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __getitem__(self, i):
        return self.pairs[i]

    def __add__(self, other: "PairString") -> "PairString":
        return PairString(self.pairs + other.pairs)

    def keys(self) -> list[frozenset]:
        return [pair_key(p) for p in self.pairs]


def pair_key(pair: Pair) -> frozenset:
    """Orientation-free identity of a pair of characters."""
    return frozenset(pair)


def concat(*strings: LabelledString) -> LabelledString:
    return LabelledString(tuple(itertools.chain.from_iterable(s.chars for s in strings)))


def times(n: LabelledString, m: LabelledString) -> PairString:
    """All pairs ``(i_N, j_M)``, ``i`` major, ``j`` minor."""
    return PairString(tuple((a, b) for a in n for b in m))


def odot(n: LabelledString) -> PairString:
    """Pairs ``(i_N, j_N)`` with ``j < i``, ordered by ``i`` then ``j``."""
    return PairString(tuple((n[i], n[j]) for i in range(len(n)) for j in range(i)))


@dataclass(frozen=True)
class PairPermutation:
    """Reordering of a pair string, with per-item orientation flips.

    ``flipped[p]`` records whether source pair ``p`` appears reversed in the
    target (``(a, b) -> (b, a)``).
    """

    images: tuple[int, ...]
    flipped: tuple[bool, ...]

    def __post_init__(self):
        if sorted(self.images) != list(range(len(self.images))):
            raise ValueError(f"{self.images} is not a bijection")
        if len(self.flipped) != len(self.images):
            raise ValueError("flip metadata length mismatch")

    def __len__(self) -> int:
        return len(self.images)

    def apply(self, pairs: Sequence[Pair] | PairString) -> PairString:
        seq = list(pairs)
        if len(seq) != len(self):
            raise ValueError(f"expected {len(self)} pairs, got {len(seq)}")
        out: list = [None] * len(seq)
        for p, (pair, dst) in enumerate(zip(seq, self.images)):
            out[dst] = (pair[1], pair[0]) if self.flipped[p] else pair
        return PairString(tuple(out))

    def inverse(self) -> "PairPermutation":
        inv = [0] * len(self)
        flips = [False] * len(self)
        for src, dst in enumerate(self.images):
            inv[dst] = src
            flips[dst] = self.flipped[src]
        return PairPermutation(tuple(inv), tuple(flips))

    @classmethod
    def identity(cls, n: int) -> "PairPermutation":
        return cls(tuple(range(n)), (False,) * n)


def _tri(i: int) -> int:
    # number of odot pairs whose major index is below i (0-based)
    return i * (i - 1) // 2


def odot_decomposition_perm(n: LabelledString, e: LabelledString) -> PairPermutation:
    """Reorder ``(N ⊞ E)⊙(N ⊞ E)`` into ``(E⊙E) ⊞ (E×N) ⊞ (N⊙N)``.

    A cross pair of the left side has its ``E`` character in the major slot,
    which is already the ``E×N`` orientation, so no flips occur.
    """
    nl, el = len(n), len(e)
    ee, en = comb(el, 2), el * nl
    images = []
    for i in range(nl + el):
        for j in range(i):
            if i < nl:  # both in N
                images.append(ee + en + _tri(i) + j)
            elif j >= nl:  # both in E
                images.append(_tri(i - nl) + (j - nl))
            else:  # (e_a, n_j)
                images.append(ee + (i - nl) * nl + j)
    return PairPermutation(tuple(images), (False,) * len(images))


def times_symmetry_perm(n1: LabelledString, n2: LabelledString) -> PairPermutation:
    """``N1×N2 ≅ N2×N1``: every pair is flipped, then reindexed."""
    a, b = len(n1), len(n2)
    images = tuple(j * a + i for i in range(a) for j in range(b))
    return PairPermutation(images, (True,) * (a * b))


def boxplus_symmetry_perm(e: LabelledString, n1: LabelledString,
                          n2: LabelledString) -> PairPermutation:
    """``E×(N1⊞N2) ≅ E×(N2⊞N1)``: per ``E`` character, swap the two blocks."""
    a, b = len(n1), len(n2)
    w = a + b
    images = []
    for k in range(len(e)):
        for p in range(w):
            q = p + b if p < a else p - a
            images.append(k * w + q)
    return PairPermutation(tuple(images), (False,) * len(images))


def match_pairs(source: Iterable[Pair], target: Iterable[Pair]) -> PairPermutation:
    """Permutation sending each source pair to the target slot holding the same
    unordered pair.  Brute-force reference used by the tests and by callers that
    need an ad-hoc reordering."""
    src, tgt = list(source), list(target)
    if len(src) != len(tgt):
        raise ValueError("pair strings of different lengths")
    slots: dict[frozenset, list[int]] = {}
    for q, pair in enumerate(tgt):
        slots.setdefault(pair_key(pair), []).append(q)
    images, flips = [], []
    for pair in src:
        free = slots.get(pair_key(pair))
        if not free:
            raise ValueError(f"pair {pair} has no counterpart")
        q = free.pop(0)
        images.append(q)
        flips.append(tgt[q] != pair)
    return PairPermutation(tuple(images), tuple(flips))
