"""CHUCKLES peptide strings: tokenizing, parsing, masking and rotational shifting.

A CHUCKLES string is a SMILES string split into residues by ``|``. Each
residue is written N-to-C (amine first, carbonyl last), so removing the
separators yields the SMILES of the whole peptide. Head-to-tail macrocycles
carry one ring-closure label joining the first residue's amine nitrogen to
the last residue's carbonyl carbon.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Mapping, NamedTuple

SEPARATOR = "|"
MASK = "?"


class TokenKind(str, Enum):
    ATOM = "atom"
    BRACKET_ATOM = "bracket-atom"
    BOND = "bond"
    RING_CLOSURE = "ring-closure"
    BRANCH_OPEN = "branch-open"
    BRANCH_CLOSE = "branch-close"
    SEPARATOR = "monomer-separator"
    MASK = "mask"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str

    @property
    def is_atom(self) -> bool:
        return self.kind is TokenKind.ATOM or self.kind is TokenKind.BRACKET_ATOM


class ChucklesError(ValueError):
    """Malformed CHUCKLES input.

    ``position`` is a character offset into the offending string when known.
    """

    def __init__(self, message: str, text: str | None = None, position: int | None = None):
        self.text = text
        self.position = position
        if text is not None and position is not None:
            message = f"{message} at position {position}: {text[:position]}>>>{text[position:]}"
        super().__init__(message)


class RingClosureError(ChucklesError):
    def __init__(self, label: str, message: str):
        self.label = label
        super().__init__(message)


_TOKEN_RE = re.compile(
    r"""
    (?P<bracket>\[[^\[\]]*\])
  | (?P<ring>%\d\d|\d)
  | (?P<atom>Cl|Br|[BCNOPSFI]|[bcnops])
  | (?P<bond>[-=\#$:/\\])
  | (?P<open>\()
  | (?P<close>\))
  | (?P<sep>\|)
  | (?P<mask>\?)
    """,
    re.VERBOSE,
)

_GROUP_KIND = {
    "bracket": TokenKind.BRACKET_ATOM,
    "ring": TokenKind.RING_CLOSURE,
    "atom": TokenKind.ATOM,
    "bond": TokenKind.BOND,
    "open": TokenKind.BRANCH_OPEN,
    "close": TokenKind.BRANCH_CLOSE,
    "sep": TokenKind.SEPARATOR,
    "mask": TokenKind.MASK,
}

# Opaque residue labels such as "A" or "r1", used by the control-loop demos.
_PLACEHOLDER_RE = re.compile(r"[A-Za-z][A-Za-z0-9]*")


def tokenize(s: str) -> list[Token]:
    """Split a CHUCKLES string into tokens.

    Two-letter organic atoms (``Cl``, ``Br``) and bracket atoms are single
    tokens. ``"".join(t.text for t in tokenize(s)) == s`` always holds.
    """
    if not s:
        raise ChucklesError("empty CHUCKLES string")
    if not s.isascii():
        raise ChucklesError("non-ASCII character in CHUCKLES string")
    tokens: list[Token] = []
    pos = 0
    while pos < len(s):
        m = _TOKEN_RE.match(s, pos)
        if m is None:
            if s[pos] == "[":
                raise ChucklesError("unterminated bracket atom", s, pos)
            raise ChucklesError(f"unknown character {s[pos]!r}", s, pos)
        tokens.append(Token(_GROUP_KIND[m.lastgroup], m.group()))
        pos = m.end()
    return tokens


def detokenize(tokens: Iterable[Token]) -> str:
    return "".join(t.text for t in tokens)


def _anchor_index(tokens: tuple[Token, ...] | list[Token], ti: int) -> int:
    """Index of the atom token a ring-closure token at ``ti`` attaches to."""
    j = ti - 1
    while j >= 0 and tokens[j].kind in (TokenKind.RING_CLOSURE, TokenKind.BOND):
        j -= 1
    if j < 0 or not tokens[j].is_atom:
        raise ChucklesError(f"ring closure {tokens[ti].text!r} does not follow an atom")
    return j


@dataclass(frozen=True)
class Monomer:
    tokens: tuple[Token, ...]
    raw: str

    def __post_init__(self) -> None:
        depth = 0
        for t in self.tokens:
            if t.kind is TokenKind.SEPARATOR:
                raise ChucklesError(f"monomer {self.raw!r} contains a separator")
            if t.kind is TokenKind.BRANCH_OPEN:
                depth += 1
            elif t.kind is TokenKind.BRANCH_CLOSE:
                depth -= 1
                if depth < 0:
                    raise ChucklesError(f"unbalanced ')' in monomer {self.raw!r}")
        if depth:
            raise ChucklesError(f"unbalanced '(' in monomer {self.raw!r}")

    @classmethod
    def from_tokens(cls, tokens: Iterable[Token]) -> Monomer:
        tokens = tuple(tokens)
        return cls(tokens, detokenize(tokens))

    @property
    def is_label(self) -> bool:
        """True for opaque single-token residue labels (placeholder alphabet)."""
        return (
            len(self.tokens) == 1
            and self.tokens[0].kind is TokenKind.ATOM
            and _PLACEHOLDER_RE.fullmatch(self.raw) is not None
        )

    @cached_property
    def first_atom(self) -> int | None:
        for i, t in enumerate(self.tokens):
            if t.is_atom:
                return i
        return None

    @cached_property
    def carbonyl_carbon(self) -> int | None:
        """Index of the last ``C`` atom token carrying a ``(=O)`` branch."""
        found = None
        toks = self.tokens
        for i, t in enumerate(toks):
            if t.kind is not TokenKind.ATOM or t.text != "C":
                continue
            j = i + 1
            while j < len(toks) and toks[j].kind in (TokenKind.RING_CLOSURE, TokenKind.BOND):
                if toks[j].kind is TokenKind.BOND and (
                    j + 1 >= len(toks) or toks[j + 1].kind is not TokenKind.RING_CLOSURE
                ):
                    break
                j += 1
            if [x.text for x in toks[j : j + 4]] == ["(", "=", "O", ")"]:
                found = i
        return found

    def ring_labels(self) -> set[str]:
        return {t.text for t in self.tokens if t.kind is TokenKind.RING_CLOSURE}


def parse_monomer(text: str) -> Monomer:
    """Parse a single residue; rejects separators and masks."""
    if _PLACEHOLDER_RE.fullmatch(text) and not _is_chemistry(text):
        return Monomer((Token(TokenKind.ATOM, text),), text)
    tokens = tokenize(text)
    for t in tokens:
        if t.kind is TokenKind.SEPARATOR:
            raise ChucklesError(f"monomer {text!r} contains a separator")
        if t.kind is TokenKind.MASK:
            raise ChucklesError(f"monomer {text!r} contains a mask token")
    return Monomer(tuple(tokens), text)


def _is_chemistry(text: str) -> bool:
    try:
        tokenize(text)
    except ChucklesError:
        return False
    return True


class Endpoint(NamedTuple):
    monomer: int
    token: int


class Closure(NamedTuple):
    label: str
    first: Endpoint
    second: Endpoint

    @property
    def is_cross(self) -> bool:
        return self.first.monomer != self.second.monomer


def _pair_closures(monomers: tuple[Monomer, ...], strict: bool) -> tuple[tuple[Closure, ...], tuple[Endpoint, ...]]:
    """Pair ring-closure tokens SMILES-style: a label opens, its next use closes it."""
    open_: dict[str, Endpoint] = {}
    closures: list[Closure] = []
    for mi, mono in enumerate(monomers):
        for ti, t in enumerate(mono.tokens):
            if t.kind is not TokenKind.RING_CLOSURE:
                continue
            _anchor_index(mono.tokens, ti)
            here = Endpoint(mi, ti)
            if t.text in open_:
                closures.append(Closure(t.text, open_.pop(t.text), here))
            else:
                open_[t.text] = here
    if open_ and strict:
        label = next(iter(open_))
        raise RingClosureError(label, f"unbalanced ring-closure label {label!r}")
    return tuple(closures), tuple(open_.values())


@dataclass(frozen=True)
class Peptide:
    """An ordered residue list with resolved ring closures.

    ``strict=False`` tolerates ring labels that never close; they are kept
    in ``dangling`` and travel with their residue.
    """

    monomers: tuple[Monomer, ...]
    strict: bool = field(default=True, compare=False)
    closures: tuple[Closure, ...] = field(init=False, compare=False, repr=False)
    dangling: tuple[Endpoint, ...] = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        if not self.monomers:
            raise ChucklesError("peptide has no monomers")
        object.__setattr__(self, "monomers", tuple(self.monomers))
        if self.placeholder:
            object.__setattr__(self, "closures", ())
            object.__setattr__(self, "dangling", ())
            return
        closures, dangling = _pair_closures(self.monomers, self.strict)
        object.__setattr__(self, "closures", closures)
        object.__setattr__(self, "dangling", dangling)

    def __len__(self) -> int:
        return len(self.monomers)

    def __str__(self) -> str:
        return render(self)

    @property
    def placeholder(self) -> bool:
        return all(m.is_label for m in self.monomers)

    @property
    def cross_closures(self) -> tuple[Closure, ...]:
        return tuple(c for c in self.closures if c.is_cross)


@dataclass(frozen=True)
class MaskedPeptide:
    base: Peptide
    masked: frozenset[int]

    def render(self) -> str:
        return SEPARATOR.join(
            MASK if i in self.masked else m.raw for i, m in enumerate(self.base.monomers)
        )

    def __str__(self) -> str:
        return self.render()

    def tokens(self) -> list[Token]:
        out: list[Token] = []
        for i, m in enumerate(self.base.monomers):
            if i:
                out.append(Token(TokenKind.SEPARATOR, SEPARATOR))
            out.extend((Token(TokenKind.MASK, MASK),) if i in self.masked else m.tokens)
        return out

    def fill(self, replacements: Mapping[int, Monomer]) -> Peptide:
        if set(replacements) != set(self.masked):
            raise ValueError("replacements must cover exactly the masked positions")
        return substitute(self.base, replacements)


class Topology(str, Enum):
    LINEAR = "linear"
    HEAD_TO_TAIL = "head-to-tail-cyclic"
    OTHER_CYCLIC = "other-cyclic"


def parse_peptide(s: str, strict: bool = True) -> Peptide:
    """Parse a CHUCKLES string into a :class:`Peptide`.

    Strings whose residues are all opaque labels (``"A|B|C|D"``,
    ``"r1|r2|r3"``) parse in placeholder mode, one atom token per residue.
    """
    try:
        tokens = tokenize(s)
    except ChucklesError:
        chunks = s.split(SEPARATOR)
        if chunks and all(_PLACEHOLDER_RE.fullmatch(c) for c in chunks):
            return Peptide(tuple(Monomer((Token(TokenKind.ATOM, c),), c) for c in chunks))
        raise
    runs: list[list[Token]] = [[]]
    for t in tokens:
        if t.kind is TokenKind.SEPARATOR:
            runs.append([])
        elif t.kind is TokenKind.MASK:
            raise ChucklesError("mask token in peptide string; masked peptides are built with mask()")
        else:
            runs[-1].append(t)
    for i, run in enumerate(runs):
        if not run:
            raise ChucklesError(f"empty monomer at index {i}")
    return Peptide(tuple(Monomer.from_tokens(run) for run in runs), strict=strict)


def render(p: Peptide) -> str:
    return SEPARATOR.join(m.raw for m in p.monomers)


def peptide_from_monomers(monomers: Iterable[Monomer | str], cyclic: bool = False) -> Peptide:
    """Assemble residues into a peptide, optionally closing it head-to-tail."""
    mons = [parse_monomer(m) if isinstance(m, str) else m for m in monomers]
    if not cyclic:
        return Peptide(tuple(mons))
    return _close_macrocycle(mons, preferred=None)


def mask(p: Peptide, indices: Iterable[int]) -> MaskedPeptide:
    idx = frozenset(indices)
    if not idx:
        raise ValueError("mask index set must be non-empty")
    bad = [i for i in idx if not 0 <= i < len(p)]
    if bad:
        raise IndexError(f"mask indices {sorted(bad)} out of range for L={len(p)}")
    return MaskedPeptide(p, idx)


def _endpoint_atom(p: Peptide, e: Endpoint) -> int:
    return _anchor_index(p.monomers[e.monomer].tokens, e.token)


def macrocycle_closure(p: Peptide) -> Closure | None:
    """The closure joining first-residue N to last-residue carbonyl C, if unique."""
    if len(p) < 2 or p.placeholder:
        return None
    first, last = p.monomers[0], p.monomers[-1]
    hits = []
    for c in p.cross_closures:
        ends = sorted((c.first, c.second))
        a, b = ends
        if (
            a.monomer == 0
            and b.monomer == len(p) - 1
            and _endpoint_atom(p, a) == first.first_atom
            and _endpoint_atom(p, b) == last.carbonyl_carbon
        ):
            hits.append(c)
    return hits[0] if len(hits) == 1 else None


def topology(p: Peptide) -> Topology:
    if macrocycle_closure(p) is not None:
        return Topology.HEAD_TO_TAIL
    if p.cross_closures:
        return Topology.OTHER_CYCLIC
    return Topology.LINEAR


def ring_label_candidates() -> Iterator[str]:
    yield from "23456789"
    for n in range(10, 100):
        yield f"%{n}"


def _strip_tokens(m: Monomer, drop: set[int]) -> Monomer:
    """Remove ring-closure tokens at ``drop`` plus any bond symbol right before them."""
    keep: list[Token] = []
    toks = m.tokens
    for i, t in enumerate(toks):
        if i in drop:
            continue
        if t.kind is TokenKind.BOND and (i + 1) in drop:
            continue
        keep.append(t)
    return Monomer.from_tokens(keep)


@lru_cache(maxsize=65536)
def _insert_label(m: Monomer, atom_index: int, label: str) -> Monomer:
    toks = list(m.tokens)
    toks.insert(atom_index + 1, Token(TokenKind.RING_CLOSURE, label))
    return Monomer.from_tokens(toks)


def _strip_macrocycle(p: Peptide, c: Closure) -> list[Monomer]:
    mons = list(p.monomers)
    for e in (c.first, c.second):
        mons[e.monomer] = _strip_tokens(mons[e.monomer], {e.token})
    return mons


def _close_macrocycle(mons: list[Monomer], preferred: str | None, strict: bool = True) -> Peptide:
    if len(mons) < 2:
        raise ChucklesError("head-to-tail closure needs at least two monomers")
    first, last = mons[0], mons[-1]
    if first.first_atom is None or last.carbonyl_carbon is None:
        bad = first.raw if first.first_atom is None else last.raw
        raise ChucklesError(f"cannot place macrocycle closure: no backbone N/carbonyl pattern in {bad!r}")
    used = set().union(*(m.ring_labels() for m in mons))
    if preferred is None or preferred in used:
        preferred = next(lbl for lbl in ring_label_candidates() if lbl not in used)
    out = list(mons)
    out[0] = _insert_label(first, first.first_atom, preferred)
    out[-1] = _insert_label(last, last.carbonyl_carbon, preferred)
    return Peptide(tuple(out), strict=strict)


def shift(p: Peptide, offset: int) -> Peptide:
    """Rotate residue order left by ``offset``.

    Head-to-tail macrocycles get their closure moved to the amine nitrogen
    of the new first residue and the carbonyl carbon of the new last
    residue, labeled with the smallest label no side-chain ring uses; all
    other ring labels travel with their residues.
    """
    n = len(p)
    if not 0 <= offset < n:
        raise ValueError(f"offset {offset} out of range for L={n}")
    if offset == 0:
        return p
    macro = macrocycle_closure(p)
    if macro is None:
        if p.cross_closures:
            warnings.warn(
                "shifting a non head-to-tail cyclic peptide rotates residue order only",
                stacklevel=2,
            )
        mons = p.monomers[offset:] + p.monomers[:offset]
        return Peptide(mons, strict=p.strict)
    stripped = _strip_macrocycle(p, macro)
    rotated = stripped[offset:] + stripped[:offset]
    return _close_macrocycle(rotated, preferred=None, strict=p.strict)


def _relabel_internal(m: Monomer, avoid: set[str]) -> Monomer:
    """Renumber a residue's own ring labels so none collides with ``avoid``."""
    own = m.ring_labels()
    clash = own & avoid
    if not clash:
        return m
    taken = own | avoid
    mapping = {}
    free = (lbl for lbl in ring_label_candidates() if lbl not in taken)
    for lbl in sorted(clash):
        mapping[lbl] = next(free)
    return Monomer.from_tokens(
        Token(t.kind, mapping.get(t.text, t.text)) if t.kind is TokenKind.RING_CLOSURE else t
        for t in m.tokens
    )


def substitute(p: Peptide, replacements: Mapping[int, Monomer]) -> Peptide:
    """Replace residues by index, keeping any head-to-tail closure intact."""
    if not replacements:
        return p
    n = len(p)
    for i in replacements:
        if not 0 <= i < n:
            raise IndexError(f"position {i} out of range for L={n}")
    if p.placeholder:
        mons = list(p.monomers)
        for i, m in replacements.items():
            mons[i] = m
        return Peptide(tuple(mons))

    macro = macrocycle_closure(p)
    mons = _strip_macrocycle(p, macro) if macro is not None else list(p.monomers)
    cross = [c for c in p.cross_closures if c is not macro]
    cross_labels = {c.label for c in cross} | {p.monomers[e.monomer].tokens[e.token].text for e in p.dangling}
    for c in cross:
        for e in (c.first, c.second):
            if e.monomer in replacements:
                raise ChucklesError(
                    f"position {e.monomer} carries cross-residue ring closure {c.label!r}; cannot replace it"
                )
    for i, m in replacements.items():
        mons[i] = _relabel_internal(m, cross_labels)
    if macro is None:
        return Peptide(tuple(mons), strict=p.strict)
    return _close_macrocycle(mons, preferred=macro.label, strict=p.strict)


def strip_macrocycle_labels(p: Peptide) -> tuple[Monomer, ...]:
    """Residues with the head-to-tail closure removed (side-chain rings untouched)."""
    macro = macrocycle_closure(p)
    if macro is None:
        return p.monomers
    return tuple(_strip_macrocycle(p, macro))


def read_corpus(path: str | Path) -> list[str]:
    """Read CHUCKLES lines from a corpus file, skipping blanks and ``#`` comments."""
    lines = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            lines.append(line)
    return lines
