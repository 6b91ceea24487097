"""Unit-interval component scores and their weighted geometric-mean aggregate."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

from .chuckles import Peptide, render
from .molgraph import (
    AlertSet,
    ContributionTable,
    build_graph,
    hbd_count,
    logp_estimate,
    match_alerts,
    max_ring_size,
)

TRANSFORM_KINDS = ("reverse-sigmoid", "sigmoid", "gaussian-target", "step-max", "boolean-pass")
SOURCES = ("hbd", "logp", "max_ring", "alerts", "surrogate-permeability", "external")


class ScoringError(RuntimeError):
    pass


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@dataclass(frozen=True)
class TransformSpec:
    """Maps a raw descriptor to [0, 1].

    ``reverse-sigmoid``/``sigmoid`` use ``midpoint`` and ``steepness``;
    ``gaussian-target`` is ``exp(-((x - target) / width)**2)``; ``step-max``
    passes when ``x <= threshold``; ``boolean-pass`` passes when
    ``bool(x) == expect``. Failed step/boolean checks score ``floor``.
    """

    kind: str
    midpoint: float = 0.0
    steepness: float = 1.0
    target: float = 0.0
    width: float = 1.0
    threshold: float = 0.0
    expect: bool = False

    def __post_init__(self) -> None:
        if self.kind not in TRANSFORM_KINDS:
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if self.kind in ("reverse-sigmoid", "sigmoid") and not self.steepness > 0:
            raise ValueError("sigmoid steepness must be positive")
        if self.kind == "gaussian-target" and not self.width > 0:
            raise ValueError("gaussian width must be positive")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> TransformSpec:
        allowed = {"kind", "midpoint", "steepness", "target", "width", "threshold", "expect"}
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown transform keys {sorted(unknown)}")
        return cls(**data)


def transform(raw: float, spec: TransformSpec, floor: float = 1e-3) -> float:
    k = spec.kind
    if k == "reverse-sigmoid":
        return _sigmoid(-spec.steepness * (raw - spec.midpoint))
    if k == "sigmoid":
        return _sigmoid(spec.steepness * (raw - spec.midpoint))
    if k == "gaussian-target":
        z = (raw - spec.target) / spec.width
        return math.exp(-z * z)
    if k == "step-max":
        return 1.0 if raw <= spec.threshold else floor
    return 1.0 if bool(raw) == spec.expect else floor


def aggregate(scores: Iterable[tuple[float, float]]) -> float:
    """Weighted geometric mean ``(prod s_i**w_i) ** (1 / sum w_i)``."""
    scores = list(scores)
    if not scores:
        raise ValueError("cannot aggregate an empty score list")
    for s, w in scores:
        if not w > 0:
            raise ValueError(f"weights must be positive, got {w}")
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"component score {s} outside [0, 1]")
    if any(s == 0.0 for s, _ in scores):
        return 0.0
    total_w = sum(w for _, w in scores)
    log_sum = sum(w * math.log(s) for s, w in scores)
    return math.exp(log_sum / total_w)


@dataclass(frozen=True)
class ComponentSpec:
    name: str
    source: str
    weight: float = 1.0
    transform: TransformSpec | None = None
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.source not in SOURCES:
            raise ValueError(f"component {self.name!r}: unknown source {self.source!r}")
        if not self.weight > 0:
            raise ValueError(f"component {self.name!r}: weight must be positive")
        if self.transform is None and self.source not in ("surrogate-permeability", "external"):
            raise ValueError(f"component {self.name!r}: source {self.source!r} needs a transform")


_PERM_DEFAULTS = {"hbd_midpoint": 6.0, "hbd_steepness": 1.0, "logp_target": 0.0, "logp_width": 4.0}


@dataclass(frozen=True)
class ScoringConfig:
    components: tuple[ComponentSpec, ...]
    epsilon_floor: float = 1e-3
    hard_zero: bool = False
    hbd_per_hydrogen: bool = False
    contributions: ContributionTable = field(default_factory=ContributionTable)
    alerts: AlertSet = field(default_factory=AlertSet)

    def __post_init__(self) -> None:
        if not self.components:
            raise ValueError("scoring config needs at least one component")
        names = [c.name for c in self.components]
        if len(set(names)) != len(names):
            raise ValueError("component names must be unique")
        if not self.epsilon_floor > 0:
            raise ValueError("epsilon_floor must be positive (use hard_zero for exact zeros)")

    @property
    def floor(self) -> float:
        return 0.0 if self.hard_zero else self.epsilon_floor

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base_dir=None) -> ScoringConfig:
        allowed = {"components", "epsilon_floor", "hard_zero", "hbd_per_hydrogen", "contributions", "alerts"}
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown scoring keys {sorted(unknown)}")
        comps = []
        for c in data.get("components", []):
            extra = set(c) - {"name", "source", "weight", "transform", "params"}
            if extra:
                raise ValueError(f"unknown component keys {sorted(extra)}")
            tr = c.get("transform")
            comps.append(
                ComponentSpec(
                    name=c["name"],
                    source=c["source"],
                    weight=float(c.get("weight", 1.0)),
                    transform=TransformSpec.from_dict(tr) if tr is not None else None,
                    params=dict(c.get("params", {})),
                )
            )
        contributions = data.get("contributions")
        alerts = data.get("alerts")
        return cls(
            components=tuple(comps),
            epsilon_floor=float(data.get("epsilon_floor", 1e-3)),
            hard_zero=bool(data.get("hard_zero", False)),
            hbd_per_hydrogen=bool(data.get("hbd_per_hydrogen", False)),
            contributions=_load_table(contributions, base_dir),
            alerts=_load_alerts(alerts, base_dir),
        )


def _resolve(path, base_dir) -> Path:
    p = Path(path)
    if base_dir is not None and not p.is_absolute():
        p = Path(base_dir) / p
    if not p.exists():
        raise FileNotFoundError(f"referenced file not found: {p}")
    return p


def _load_table(spec, base_dir) -> ContributionTable:
    if spec is None:
        return ContributionTable()
    if isinstance(spec, str):
        return ContributionTable.load(_resolve(spec, base_dir))
    return ContributionTable.from_dict(spec)


def _load_alerts(spec, base_dir) -> AlertSet:
    if spec is None:
        return AlertSet()
    if isinstance(spec, str):
        return AlertSet.load(_resolve(spec, base_dir))
    return AlertSet.from_dict(spec)


@dataclass(frozen=True)
class ComponentScore:
    name: str
    raw: float
    score: float
    weight: float


@dataclass(frozen=True)
class ScoreBreakdown:
    components: tuple[ComponentScore, ...]
    aggregate: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "aggregate": self.aggregate,
            "components": [
                {"name": c.name, "raw": c.raw, "score": c.score, "weight": c.weight}
                for c in self.components
            ],
        }


ExternalFn = Callable[[Peptide], "float | Sequence[float]"]


class _Descriptors:
    """Lazily computed descriptors shared by the components of one peptide."""

    def __init__(self, p: Peptide, cfg: ScoringConfig):
        self.p = p
        self.cfg = cfg
        self._graph = None
        self._cache: dict[str, Any] = {}

    @property
    def graph(self):
        if self._graph is None:
            self._graph = build_graph(self.p)
        return self._graph

    def get(self, name: str):
        if name not in self._cache:
            if name == "hbd":
                self._cache[name] = hbd_count(self.graph, self.cfg.hbd_per_hydrogen)[0]
            elif name == "logp":
                self._cache[name] = logp_estimate(self.graph, self.cfg.contributions)[0]
            elif name == "max_ring":
                self._cache[name] = max_ring_size(self.graph)
            elif name == "alerts":
                self._cache[name] = len(match_alerts(self.p, self.cfg.alerts))
        return self._cache[name]


def surrogate_permeability(hbd: float, logp: float, params: Mapping[str, Any] | None = None) -> float:
    """Declared stand-in landscape: few donors and a moderate LogP score high."""
    q = {**_PERM_DEFAULTS, **(params or {})}
    donors = transform(hbd, TransformSpec("reverse-sigmoid", midpoint=q["hbd_midpoint"], steepness=q["hbd_steepness"]))
    lipo = transform(logp, TransformSpec("gaussian-target", target=q["logp_target"], width=q["logp_width"]))
    return donors * lipo


def _table_lookup(p: Peptide, params: Mapping[str, Any]) -> list[float]:
    table = params.get("table", {})
    default = float(params.get("default", 0.0))
    positions = params.get("positions")
    idx = range(len(p)) if positions is None else positions
    return [float(table.get(p.monomers[i].raw, default)) for i in idx]


def score_peptide(
    p: Peptide,
    cfg: ScoringConfig,
    externals: Mapping[str, ExternalFn] | None = None,
) -> ScoreBreakdown:
    """Evaluate every component of ``cfg`` on ``p``.

    ``external`` components either carry a ``table`` (monomer -> score, one
    sub-score per position, each at the component weight) or name a callable
    in ``externals``.
    """
    d = _Descriptors(p, cfg)
    floor = cfg.floor
    parts: list[ComponentScore] = []
    for comp in cfg.components:
        try:
            if comp.source == "external":
                if "table" in comp.params:
                    values = _table_lookup(p, comp.params)
                else:
                    fn = (externals or {}).get(comp.params.get("callable", comp.name))
                    if fn is None:
                        raise ScoringError("no external scorer registered")
                    out = fn(p)
                    values = list(out) if isinstance(out, (list, tuple)) else [float(out)]
                for i, v in enumerate(values):
                    raw = v
                    s = transform(v, comp.transform, floor) if comp.transform else min(1.0, max(0.0, v))
                    name = comp.name if len(values) == 1 else f"{comp.name}[{i}]"
                    parts.append(ComponentScore(name, raw, s, comp.weight))
                continue
            if p.placeholder:
                raise ScoringError("placeholder peptides only support external components")
            if comp.source == "surrogate-permeability":
                raw = surrogate_permeability(d.get("hbd"), d.get("logp"), comp.params)
            else:
                raw = d.get(comp.source)
            s = transform(raw, comp.transform, floor) if comp.transform else min(1.0, max(0.0, raw))
        except ScoringError as e:
            raise ScoringError(f"component {comp.name!r}: {e}") from e
        except ValueError as e:
            raise ScoringError(f"component {comp.name!r}: {e}") from e
        parts.append(ComponentScore(comp.name, float(raw), s, comp.weight))
    return ScoreBreakdown(tuple(parts), aggregate((c.score, c.weight) for c in parts))


class Scorer:
    """Callable reward: peptide -> aggregate score, memoized by CHUCKLES string.

    ``threads > 1`` scores batches on a thread pool; results come back in
    input order either way.
    """

    def __init__(
        self,
        cfg: ScoringConfig,
        externals: Mapping[str, ExternalFn] | None = None,
        threads: int = 1,
    ):
        self.cfg = cfg
        self.externals = dict(externals or {})
        self.threads = max(1, int(threads))
        self._cache: dict[str, ScoreBreakdown] = {}
        self._pool = ThreadPoolExecutor(self.threads) if self.threads > 1 else None

    def breakdown(self, p: Peptide) -> ScoreBreakdown:
        key = render(p)
        hit = self._cache.get(key)
        if hit is None:
            hit = score_peptide(p, self.cfg, self.externals)
            self._cache[key] = hit
        return hit

    def __call__(self, p: Peptide) -> float:
        return self.breakdown(p).aggregate

    def score_many(self, peptides: Sequence[Peptide]) -> list[float]:
        if self._pool is None or len(peptides) < 2:
            return [self(p) for p in peptides]
        return list(self._pool.map(self, peptides))

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None
