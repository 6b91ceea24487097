"""Dynamic masked-infilling pairs for pretraining a sequence model.

Every epoch re-draws, per corpus line, an optional rotation and a mask set
whose size follows a descending triangular law peaked at a single residue.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, TextIO

import numpy as np

from .chuckles import MASK, ChucklesError, Peptide, mask, parse_peptide, render, shift

MODES = ("standard", "shifted")


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class MaskCountSampler:
    """Mask counts from the descending triangular density ``2(b - x)/(b - a)**2`` on ``[a, b]``.

    ``b = b_fraction * L``; draws are rounded half-up and clamped into
    ``[1, max(1, min(L, round(b_fraction * L)))]``. With the default ``a = 0``
    everything below 1.5 lands on a single mask, so the count pmf is
    non-increasing from 1. Starting the density at 1 instead would give the
    count 1 only a half-width rounding cell and put the mode at 2.
    """

    a: float = 0.0
    b_fraction: float = 0.4

    def upper(self, L: int) -> float:
        return self.b_fraction * L

    def max_count(self, L: int) -> int:
        return max(1, min(L, round_half_up(self.b_fraction * L)))

    def sample(self, L: int, rng: np.random.Generator) -> int:
        if L < 1:
            raise ValueError("peptide length must be at least 1")
        b = self.upper(L)
        if b <= self.a:
            return 1
        x = rng.triangular(self.a, self.a, b)
        return min(max(1, round_half_up(x)), self.max_count(L))

    def pmf(self, L: int) -> dict[int, float]:
        """Exact count probabilities by integrating the density over rounding cells."""
        b = self.upper(L)
        if b <= self.a:
            return {1: 1.0}
        a = self.a

        def cdf(x: float) -> float:
            x = min(max(x, a), b)
            return 1.0 - ((b - x) / (b - a)) ** 2

        hi = self.max_count(L)
        out = {}
        for n in range(1, hi + 1):
            lo_edge = -math.inf if n == 1 else n - 0.5
            hi_edge = math.inf if n == hi else n + 0.5
            out[n] = cdf(hi_edge) - cdf(lo_edge)
        return out


def sample_mask_count(L: int, rng: np.random.Generator, sampler: MaskCountSampler | None = None) -> int:
    return (sampler or MaskCountSampler()).sample(L, rng)


@dataclass(frozen=True)
class TrainingPair:
    source: str
    target: str
    indices: tuple[int, ...]
    offset: int = 0

    def to_tsv(self) -> str:
        idx = ",".join(map(str, self.indices))
        return f"{self.source}\t{self.target}\t#offset={self.offset};mask={idx}"

    @classmethod
    def from_tsv(cls, line: str) -> TrainingPair:
        source, target, meta = line.rstrip("\n").split("\t")
        m = re.fullmatch(r"#offset=(\d+);mask=([\d,]*)", meta)
        if m is None:
            raise ValueError(f"malformed metadata column {meta!r}")
        idx = tuple(int(i) for i in m.group(2).split(",") if i)
        return cls(source, target, idx, int(m.group(1)))


def make_training_pair(
    p: Peptide,
    rng: np.random.Generator,
    shift_enabled: bool,
    sampler: MaskCountSampler | None = None,
    indices: Iterable[int] | None = None,
) -> TrainingPair:
    """Rotate (optionally), then mask a uniformly placed set of residues.

    ``indices`` forces the mask set and skips the count draw.
    """
    L = len(p)
    offset = int(rng.integers(0, L)) if shift_enabled else 0
    q = shift(p, offset) if offset else p
    if indices is None:
        n = sample_mask_count(L, rng, sampler)
        chosen = tuple(sorted(int(i) for i in rng.choice(L, size=n, replace=False)))
    else:
        chosen = tuple(sorted(set(indices)))
    return TrainingPair(mask(q, chosen).render(), render(q), chosen, offset)


def unmask(pair: TrainingPair) -> str:
    """Put the target's residues back at the recorded mask positions."""
    src = pair.source.split("|")
    tgt = parse_peptide(pair.target, strict=False).monomers
    for i in pair.indices:
        if src[i] != MASK:
            raise ValueError(f"position {i} is not masked in the source")
        src[i] = tgt[i].raw
    return "|".join(src)


@dataclass
class EpochStats:
    emitted: int = 0
    skipped: int = 0
    errors: list[str] | None = None


def emit_epoch(
    lines: Iterable[str],
    seed: int,
    epoch: int,
    mode: str = "standard",
    sampler: MaskCountSampler | None = None,
    stats: EpochStats | None = None,
) -> Iterator[TrainingPair]:
    """One pair per valid line, in input order; invalid lines are counted and skipped.

    The epoch index salts the random stream so each epoch re-draws masks
    (and rotations, in ``shifted`` mode).
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    rng = np.random.default_rng([seed, epoch])
    stats = stats if stats is not None else EpochStats()
    if stats.errors is None:
        stats.errors = []
    for lineno, line in enumerate(lines, 1):
        try:
            p = parse_peptide(line)
        except ChucklesError as e:
            stats.skipped += 1
            stats.errors.append(f"line {lineno}: {e}")
            continue
        stats.emitted += 1
        yield make_training_pair(p, rng, mode == "shifted", sampler)


def write_pairs(pairs: Iterable[TrainingPair], out: TextIO) -> int:
    n = 0
    for pair in pairs:
        out.write(pair.to_tsv() + "\n")
        n += 1
    return n

