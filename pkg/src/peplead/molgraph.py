"""Minimal molecular graph for assembled peptides and the descriptors scoring needs.

Descriptors are always computed on the whole assembled peptide and then
attributed to residues by atom origin, so backbone amide nitrogens see their
real neighbours.
"""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

from .chuckles import Peptide, TokenKind, tokenize

AROMATIC = 1.5

_BOND_ORDER = {"-": 1, "/": 1, "\\": 1, "=": 2, "#": 3, "$": 4, ":": AROMATIC}

# Allowed valences for organic-subset atoms; the smallest one that fits is used.
DEFAULT_VALENCE: dict[str, tuple[int, ...]] = {
    "B": (3,),
    "C": (4,),
    "N": (3,),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}

_BRACKET_RE = re.compile(
    r"\[(?P<iso>\d+)?(?P<sym>se|as|Cl|Br|[A-Z][a-z]?|[bcnops])"
    r"(?P<chiral>@{1,2})?(?:H(?P<h>\d*))?(?P<charge>[+-]+\d*)?(?::\d+)?\]"
)


class GraphError(ValueError):
    pass


class Atom(NamedTuple):
    element: str
    aromatic: bool
    charge: int
    explicit_h: int | None
    monomer: int

    @property
    def atom_class(self) -> str:
        return self.element.lower() if self.aromatic else self.element


class Bond(NamedTuple):
    a: int
    b: int
    order: float


@dataclass(frozen=True)
class MolecularGraph:
    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]
    hydrogens: tuple[int, ...]
    n_monomers: int

    def neighbors(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in self.atoms]
        for b in self.bonds:
            adj[b.a].append(b.b)
            adj[b.b].append(b.a)
        return adj


def _parse_bracket(text: str) -> tuple[str, bool, int, int]:
    m = _BRACKET_RE.fullmatch(text)
    if m is None:
        raise GraphError(f"unsupported bracket atom {text}")
    sym = m["sym"]
    aromatic = sym.islower()
    element = sym.capitalize() if aromatic else sym
    h = 0
    if m.group("h") is not None:
        h = int(m["h"]) if m["h"] else 1
    charge = 0
    if m["charge"]:
        c = m["charge"]
        sign = 1 if c[0] == "+" else -1
        digits = c.lstrip("+-")
        charge = sign * (int(digits) if digits else len(c))
    return element, aromatic, charge, h


def _implicit_h(atom: Atom, valence_sum: int, n_aromatic: int) -> int:
    if atom.explicit_h is not None:
        return atom.explicit_h
    allowed = DEFAULT_VALENCE.get(atom.element)
    if allowed is None:
        raise GraphError(f"no default valence for element {atom.element}")
    used = valence_sum + n_aromatic
    if atom.aromatic and n_aromatic:
        # one extra unit for the pi bond; pyrrole-type atoms have none to spare
        for extra in (1, 0):
            for v in allowed:
                if v >= used + extra:
                    return v - used - extra
    else:
        for v in allowed:
            if v >= used:
                return v - used
    raise GraphError(f"valence violation on {atom.element} (bond order sum {used})")


def build_graph(p: Peptide) -> MolecularGraph:
    """Parse the separator-stripped token stream of ``p`` as SMILES."""
    if p.placeholder:
        raise GraphError("placeholder-mode peptide has no chemistry")
    atoms: list[Atom] = []
    bonds: list[Bond] = []
    prev: int | None = None
    pending: str | None = None
    stack: list[int | None] = []
    ring_open: dict[str, tuple[int, str | None]] = {}

    def order_for(sym: str | None, a: int, b: int) -> float:
        if sym is not None:
            return _BOND_ORDER[sym]
        return AROMATIC if atoms[a].aromatic and atoms[b].aromatic else 1

    for mi, mono in enumerate(p.monomers):
        for t in mono.tokens:
            kind = t.kind
            if kind is TokenKind.ATOM:
                sym = t.text
                aromatic = sym.islower()
                atoms.append(Atom(sym.upper() if aromatic else sym, aromatic, 0, None, mi))
            elif kind is TokenKind.BRACKET_ATOM:
                element, aromatic, charge, h = _parse_bracket(t.text)
                atoms.append(Atom(element, aromatic, charge, h, mi))
            elif kind is TokenKind.BOND:
                pending = t.text
                continue
            elif kind is TokenKind.BRANCH_OPEN:
                stack.append(prev)
                continue
            elif kind is TokenKind.BRANCH_CLOSE:
                prev = stack.pop()
                continue
            elif kind is TokenKind.RING_CLOSURE:
                if prev is None:
                    raise GraphError(f"ring closure {t.text} before any atom")
                if t.text in ring_open:
                    other, sym = ring_open.pop(t.text)
                    bsym = pending if pending is not None else sym
                    bonds.append(Bond(other, prev, order_for(bsym, other, prev)))
                else:
                    ring_open[t.text] = (prev, pending)
                pending = None
                continue
            else:
                raise GraphError(f"token {t.text!r} cannot appear in a molecular graph")
            new = len(atoms) - 1
            if prev is not None:
                bonds.append(Bond(prev, new, order_for(pending, prev, new)))
            prev = new
            pending = None
    if ring_open:
        raise GraphError(f"unpaired ring closure {next(iter(ring_open))}")

    valence = [0.0] * len(atoms)
    n_arom = [0] * len(atoms)
    for b in bonds:
        for i in (b.a, b.b):
            if b.order == AROMATIC:
                n_arom[i] += 1
            else:
                valence[i] += b.order
    hydrogens = tuple(
        _implicit_h(a, int(valence[i]), n_arom[i]) for i, a in enumerate(atoms)
    )
    return MolecularGraph(tuple(atoms), tuple(bonds), hydrogens, len(p))


# ---------------------------------------------------------------------------
# Hydrogen-bond donors and additive LogP


_DONOR_ELEMENTS = frozenset({"N", "O", "S"})


def hbd_count(g: MolecularGraph, per_hydrogen: bool = False) -> tuple[int, list[int]]:
    """Donor atoms (N/O/S bearing at least one H), total and per residue.

    With ``per_hydrogen`` each attached H counts instead of each atom.
    """
    per = [0] * g.n_monomers
    for a, h in zip(g.atoms, g.hydrogens):
        if a.element in _DONOR_ELEMENTS and h > 0:
            per[a.monomer] += h if per_hydrogen else 1
    return sum(per), per


DEFAULT_CONTRIBUTIONS: dict[str, float] = {
    "c": 0.30,
    "C": 0.20,
    "N": -0.60,
    "n": -0.40,
    "O": -0.40,
    "o": -0.10,
    "S": 0.25,
    "s": 0.30,
    "P": -0.20,
    "B": 0.00,
    "F": 0.20,
    "Cl": 0.50,
    "Br": 0.70,
    "I": 1.00,
}


@dataclass(frozen=True)
class ContributionTable:
    """Per-atom-class LogP increments (heavy atoms only)."""

    values: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_CONTRIBUTIONS))

    @classmethod
    def from_dict(cls, data: Mapping[str, float]) -> ContributionTable:
        merged = dict(DEFAULT_CONTRIBUTIONS)
        merged.update({str(k): float(v) for k, v in data.items()})
        return cls(merged)

    @classmethod
    def load(cls, path: str | Path) -> ContributionTable:
        doc = json.loads(Path(path).read_text())
        return cls.from_dict(doc.get("contributions", doc))


def logp_estimate(g: MolecularGraph, table: ContributionTable | None = None) -> tuple[float, list[float]]:
    values = (table or ContributionTable()).values
    per = [0.0] * g.n_monomers
    for a in g.atoms:
        key = a.atom_class
        if key not in values:
            raise GraphError(f"no LogP contribution for atom class {key!r}")
        per[a.monomer] += values[key]
    total = 0.0
    for v in per:
        total += v
    return total, per


# ---------------------------------------------------------------------------
# Rings


def _shortest_path(adj: list[list[int]], src: int, dst: int, banned: tuple[int, int]) -> list[int] | None:
    prev = {src: -1}
    q = deque([src])
    while q:
        u = q.popleft()
        if u == dst:
            break
        for v in adj[u]:
            if v in prev or (u, v) == banned or (v, u) == banned:
                continue
            prev[v] = u
            q.append(v)
    if dst not in prev:
        return None
    path = [dst]
    while path[-1] != src:
        path.append(prev[path[-1]])
    return path[::-1]


def _cycle_mask(path: list[int], edge_index: dict[tuple[int, int], int]) -> int:
    mask = 0
    for u, v in zip(path, path[1:] + path[:1]):
        mask |= 1 << edge_index[(u, v) if (u, v) in edge_index else (v, u)]
    return mask


def ring_sizes(g: MolecularGraph) -> list[int]:
    """Ring sizes of a minimum cycle basis, smallest first.

    Candidates are the shortest cycle through each spanning-tree chord; if
    those do not span the cycle space, Horton candidates fill the gap.
    """
    n = len(g.atoms)
    if not g.bonds:
        return []
    adj = g.neighbors()
    edge_index = {(b.a, b.b): i for i, b in enumerate(g.bonds)}
    seen = [False] * n
    tree: set[tuple[int, int]] = set()
    components = 0
    for root in range(n):
        if seen[root]:
            continue
        components += 1
        seen[root] = True
        q = deque([root])
        while q:
            u = q.popleft()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    tree.add((min(u, v), max(u, v)))
                    q.append(v)
    rank_needed = len(g.bonds) - n + components
    if rank_needed == 0:
        return []

    candidates: list[tuple[int, int]] = []
    for b in g.bonds:
        if (min(b.a, b.b), max(b.a, b.b)) in tree:
            continue
        path = _shortest_path(adj, b.a, b.b, (b.a, b.b))
        if path is not None:
            candidates.append((len(path), _cycle_mask(path, edge_index)))

    basis, sizes = _reduce(sorted(candidates), rank_needed)
    if len(sizes) < rank_needed:
        extra = _horton_candidates(g, adj, edge_index)
        basis, sizes = _reduce(sorted(candidates + extra), rank_needed)
    return sorted(sizes)


def _reduce(candidates: list[tuple[int, int]], rank_needed: int) -> tuple[list[int], list[int]]:
    """Greedy GF(2) independence over cycles sorted by size."""
    pivots: dict[int, int] = {}
    sizes: list[int] = []
    kept: list[int] = []
    for size, mask in candidates:
        x = mask
        while x:
            top = x.bit_length() - 1
            if top not in pivots:
                pivots[top] = x
                sizes.append(size)
                kept.append(mask)
                break
            x ^= pivots[top]
        if len(sizes) == rank_needed:
            break
    return kept, sizes


def _horton_candidates(g: MolecularGraph, adj, edge_index) -> list[tuple[int, int]]:
    out = []
    n = len(g.atoms)
    for v in range(n):
        parent = {v: -1}
        q = deque([v])
        order = []
        while q:
            u = q.popleft()
            order.append(u)
            for w in adj[u]:
                if w not in parent:
                    parent[w] = u
                    q.append(w)

        def to_root(x):
            path = [x]
            while parent[path[-1]] != -1:
                path.append(parent[path[-1]])
            return path

        for b in g.bonds:
            if b.a not in parent or b.b not in parent:
                continue
            pa, pb = to_root(b.a), to_root(b.b)
            if set(pa) & set(pb) != {v}:
                continue
            cycle = list(reversed(pa)) + pb[:-1]
            if len(cycle) < 3:
                continue
            out.append((len(cycle), _cycle_mask(cycle, edge_index)))
    return out


def max_ring_size(g: MolecularGraph) -> int:
    sizes = ring_sizes(g)
    return sizes[-1] if sizes else 0


# ---------------------------------------------------------------------------
# Token-pattern alerts


@dataclass(frozen=True)
class AlertSet:
    """Named contiguous token patterns, a bounded stand-in for SMARTS."""

    patterns: tuple[tuple[str, tuple[str, ...]], ...] = ()

    @classmethod
    def from_dict(cls, data: Mapping[str, str]) -> AlertSet:
        return cls(tuple((name, tuple(t.text for t in tokenize(pat))) for name, pat in data.items()))

    @classmethod
    def load(cls, path: str | Path) -> AlertSet:
        doc = json.loads(Path(path).read_text())
        return cls.from_dict(doc.get("alerts", doc))

    def __len__(self) -> int:
        return len(self.patterns)


def _stream(p: Peptide) -> list[str]:
    return [t.text for m in p.monomers for t in m.tokens]


def match_alerts(p: Peptide, alerts: AlertSet) -> list[str]:
    if not alerts.patterns:
        return []
    stream = _stream(p)
    hits = []
    for name, pat in alerts.patterns:
        k = len(pat)
        if any(stream[i : i + k] == list(pat) for i in range(len(stream) - k + 1)):
            hits.append(name)
    return hits


# ---------------------------------------------------------------------------
# Reports and fingerprints


@dataclass(frozen=True)
class DescriptorReport:
    hbd_total: int
    hbd_by_monomer: tuple[int, ...]
    logp: float
    logp_by_monomer: tuple[float, ...]
    max_ring: int
    alerts: tuple[str, ...]


def describe(
    p: Peptide,
    table: ContributionTable | None = None,
    alerts: AlertSet | None = None,
    per_hydrogen: bool = False,
) -> DescriptorReport:
    g = build_graph(p)
    hbd, hbd_per = hbd_count(g, per_hydrogen)
    logp, logp_per = logp_estimate(g, table)
    return DescriptorReport(
        hbd, tuple(hbd_per), logp, tuple(logp_per), max_ring_size(g),
        tuple(match_alerts(p, alerts or AlertSet())),
    )


class Fingerprint(NamedTuple):
    atoms: str
    bonds: str
    rings: tuple[int, ...]
    hbd: int
    logp: float


def _digest(items: Sequence) -> str:
    return hashlib.sha256(repr(sorted(Counter(items).items())).encode()).hexdigest()[:16]


def graph_fingerprint(g: MolecularGraph, table: ContributionTable | None = None) -> Fingerprint:
    """Atom-order independent summary used to compare re-encoded peptides."""
    classes = [(a.atom_class, a.charge, h) for a, h in zip(g.atoms, g.hydrogens)]
    bond_classes = [
        (tuple(sorted((classes[b.a], classes[b.b]))), b.order) for b in g.bonds
    ]
    return Fingerprint(
        _digest(classes),
        _digest(bond_classes),
        tuple(ring_sizes(g)),
        hbd_count(g)[0],
        round(logp_estimate(g, table)[0], 6),
    )
