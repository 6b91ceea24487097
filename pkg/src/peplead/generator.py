"""Generator contract and a tabular monomer-library policy.

A generator takes a masked peptide and proposes ``G`` filled-in candidates.
:class:`GeneratorPolicy` keeps one logit vector over the monomer vocabulary
per ``(context, position)`` key and learns by the score-function gradient.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .chuckles import (
    ChucklesError,
    MaskedPeptide,
    Monomer,
    Peptide,
    parse_monomer,
)

Key = tuple[str, int]


class VocabularyError(ValueError):
    pass


@dataclass(frozen=True)
class MonomerVocabulary:
    entries: tuple[str, ...]
    monomers: tuple[Monomer, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.entries:
            raise VocabularyError("vocabulary is empty")
        if len(set(self.entries)) != len(self.entries):
            raise VocabularyError("vocabulary entries must be unique")
        mons = []
        for e in self.entries:
            m = parse_monomer(e)
            for lbl in m.ring_labels():
                if sum(t.text == lbl for t in m.tokens) % 2:
                    raise VocabularyError(f"monomer {e!r} has an unpaired ring label {lbl!r}")
            mons.append(m)
        object.__setattr__(self, "monomers", tuple(mons))

    def __len__(self) -> int:
        return len(self.entries)

    def digest(self) -> str:
        return hashlib.sha256("\n".join(self.entries).encode()).hexdigest()


def load_vocabulary(path: str | Path) -> MonomerVocabulary:
    """One monomer per line; blank lines and ``#`` comments are skipped."""
    entries: list[str] = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        if text in seen:
            raise VocabularyError(f"{path}:{lineno}: duplicate monomer {text!r} (first on line {seen[text]})")
        try:
            MonomerVocabulary((text,))
        except (ChucklesError, VocabularyError) as e:
            raise VocabularyError(f"{path}:{lineno}: {e}") from e
        seen[text] = lineno
        entries.append(text)
    return MonomerVocabulary(tuple(entries))


@dataclass(frozen=True)
class Candidate:
    peptide: Peptide
    choices: tuple[tuple[int, int], ...]  # (position, vocabulary index)


@dataclass(frozen=True)
class CandidateBatch:
    source: MaskedPeptide
    context: str
    candidates: tuple[Candidate, ...]

    def __len__(self) -> int:
        return len(self.candidates)

    @property
    def peptides(self) -> list[Peptide]:
        return [c.peptide for c in self.candidates]


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


class GeneratorPolicy:
    """Tabular sampler over a monomer vocabulary.

    Unseen keys behave as all-zero logits, i.e. uniform sampling.
    ``update`` is single-writer; ``generate`` only reads the table.
    """

    def __init__(self, vocabulary: MonomerVocabulary, temperature: float = 1.0, learning_rate: float = 0.1):
        if not temperature > 0:
            raise ValueError("temperature must be positive")
        if not learning_rate > 0:
            raise ValueError("learning rate must be positive")
        self.vocabulary = vocabulary
        self.temperature = float(temperature)
        self.learning_rate = float(learning_rate)
        self.logits: dict[Key, np.ndarray] = {}

    def _logits(self, key: Key) -> np.ndarray:
        z = self.logits.get(key)
        return np.zeros(len(self.vocabulary)) if z is None else z

    def probs(self, key: Key) -> np.ndarray:
        return _softmax(self._logits(key) / self.temperature)

    def generate(self, masked: MaskedPeptide, G: int, rng: np.random.Generator, context: str = "shared") -> CandidateBatch:
        if G < 1:
            raise ValueError("G must be at least 1")
        positions = sorted(masked.masked)
        V = len(self.vocabulary)
        draws = np.empty((G, len(positions)), dtype=np.int64)
        for j, pos in enumerate(positions):
            draws[:, j] = rng.choice(V, size=G, p=self.probs((context, pos)))
        mons = self.vocabulary.monomers
        candidates = []
        for row in draws:
            choices = tuple((pos, int(v)) for pos, v in zip(positions, row))
            peptide = masked.fill({pos: mons[v] for pos, v in choices})
            candidates.append(Candidate(peptide, choices))
        return CandidateBatch(masked, context, tuple(candidates))

    def gradient(self, batch: CandidateBatch, advantages: Sequence[float]) -> dict[Key, np.ndarray]:
        """Gradient of ``-(1/G) sum_g A_g log pi(choices_g)`` w.r.t. the logits."""
        if len(advantages) != len(batch):
            raise ValueError(f"expected {len(batch)} advantages, got {len(advantages)}")
        G = len(batch)
        grads: dict[Key, np.ndarray] = {}
        probs: dict[Key, np.ndarray] = {}
        for cand, a in zip(batch.candidates, advantages):
            if a == 0:
                continue
            for pos, v in cand.choices:
                key = (batch.context, pos)
                if key not in probs:
                    probs[key] = self.probs(key)
                    grads[key] = np.zeros(len(self.vocabulary))
                score = -probs[key]
                score[v] += 1.0
                grads[key] -= (a / G) * score / self.temperature
        return grads

    def update(self, batch: CandidateBatch, advantages: Sequence[float]) -> None:
        for key, g in self.gradient(batch, advantages).items():
            self.logits[key] = self._logits(key) - self.learning_rate * g

    def surrogate_loss(self, batch: CandidateBatch, advantages: Sequence[float]) -> float:
        G = len(batch)
        total = 0.0
        for cand, a in zip(batch.candidates, advantages):
            for pos, v in cand.choices:
                total -= a * np.log(self.probs((batch.context, pos))[v])
        return total / G

    def to_dict(self) -> dict[str, Any]:
        return {
            "vocabulary_sha256": self.vocabulary.digest(),
            "temperature": self.temperature,
            "learning_rate": self.learning_rate,
            "logits": {f"{ctx}|{pos}": z.tolist() for (ctx, pos), z in sorted(self.logits.items())},
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any], vocabulary: MonomerVocabulary) -> GeneratorPolicy:
        if data["vocabulary_sha256"] != vocabulary.digest():
            raise VocabularyError("checkpoint was written for a different vocabulary")
        g = cls(vocabulary, data["temperature"], data["learning_rate"])
        for key, z in data["logits"].items():
            ctx, pos = key.rsplit("|", 1)
            g.logits[(ctx, int(pos))] = np.asarray(z, dtype=float)
        return g


def vocabulary_from(entries: Iterable[str]) -> MonomerVocabulary:
    return MonomerVocabulary(tuple(entries))
