"""Evolving optimization: a seed pool that is regenerated, scored and re-selected each step.

Every step builds one context per target position for every seed, samples
``G`` candidates per (context, seed) group, standardizes rewards within the
group and updates the context's agent. All candidates then go into one pool
ranked by raw score, and the top ``K`` become the next seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .chuckles import MaskedPeptide, Peptide, mask, render
from .generator import GeneratorPolicy, MonomerVocabulary

MODES = ("self", "neighbor")
AGENT_MODES = ("single", "multi")
BASELINES = ("evolving", "static")
HIST_BINS = 50  # width 0.02 over [0, 1]


def group_relative_advantage(rewards: Sequence[float], epsilon: float = 1e-8) -> np.ndarray:
    """``(R - mean) / (std + epsilon)`` with the population standard deviation."""
    r = np.asarray(rewards, dtype=float)
    if r.size < 2:
        raise ValueError("group-relative advantage needs at least two rewards")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if np.all(r == r[0]):
        return np.zeros_like(r)
    centered = r - r.mean()
    return centered / (r.std() + epsilon)


@dataclass(frozen=True)
class EvolveConfig:
    targets: tuple[int, ...]
    K: int = 16
    G: int = 8
    mode: str = "self"
    agents: str = "single"
    steps: int = 250
    epsilon: float = 1e-8
    dedup: bool = True
    elitism: bool = True
    baseline: str = "evolving"

    def __post_init__(self) -> None:
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if not self.targets:
            raise ValueError("target position set must be non-empty")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError("target positions must be distinct")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.G < 2:
            raise ValueError("G must be at least 2 for group-relative advantages")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.agents not in AGENT_MODES:
            raise ValueError(f"agents must be one of {AGENT_MODES}")
        if self.baseline not in BASELINES:
            raise ValueError(f"baseline must be one of {BASELINES}")
        if self.mode == "neighbor" and len(self.targets) < 2:
            raise ValueError("neighbor-mask needs at least two target positions")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")

    @property
    def candidates_per_step(self) -> int:
        return self.K * len(self.targets) * self.G


def context_mask(seed: Peptide, target: int, targets: Sequence[int], mode: str) -> MaskedPeptide:
    if mode == "self":
        return mask(seed, {target})
    if len(targets) < 2:
        raise ValueError("neighbor-mask needs at least two target positions")
    return mask(seed, set(targets) - {target})


def build_contexts(seed: Peptide, targets: Sequence[int], mode: str) -> list[tuple[int, MaskedPeptide]]:
    """Self-mask hides only the target; neighbor-mask hides the other targets."""
    for t in targets:
        if not 0 <= t < len(seed):
            raise IndexError(f"target {t} out of range for L={len(seed)}")
    return [(t, context_mask(seed, t, targets, mode)) for t in targets]


class AgentPool:
    """Agents by target position: one shared policy or one per target."""

    def __init__(self, vocabulary: MonomerVocabulary, cfg: EvolveConfig, temperature: float = 1.0, learning_rate: float = 0.1):
        self.cfg = cfg
        if cfg.agents == "single":
            shared = GeneratorPolicy(vocabulary, temperature, learning_rate)
            self.agents = {t: shared for t in cfg.targets}
        else:
            self.agents = {t: GeneratorPolicy(vocabulary, temperature, learning_rate) for t in cfg.targets}

    def __getitem__(self, target: int) -> GeneratorPolicy:
        return self.agents[target]

    def context_key(self, target: int) -> str:
        return "shared" if self.cfg.agents == "single" else f"{self.cfg.mode}:{target}"

    def distinct(self) -> list[GeneratorPolicy]:
        out: list[GeneratorPolicy] = []
        for a in self.agents.values():
            if all(a is not b for b in out):
                out.append(a)
        return out


@dataclass
class Scored:
    peptide: Peptide
    score: float
    key: str


@dataclass
class EvolveState:
    step: int
    seeds: list[Scored]
    pool: list[Scored] = field(default_factory=list)
    seen: dict[str, float] = field(default_factory=dict)
    n_generated: int = 0
    sum_generated: float = 0.0


def _scored(peptides: Sequence[Peptide], scorer) -> list[Scored]:
    score_many = getattr(scorer, "score_many", None)
    scores = score_many(peptides) if score_many else [scorer(p) for p in peptides]
    return [Scored(p, float(s), render(p)) for p, s in zip(peptides, scores)]


def select_top(pool: Sequence[Scored], K: int, dedup: bool) -> list[Scored]:
    """Stable top-K by raw score; pool order breaks ties."""
    items = list(pool)
    if dedup:
        seen: set[str] = set()
        unique = []
        for s in items:
            if s.key not in seen:
                seen.add(s.key)
                unique.append(s)
        items = unique
    order = sorted(range(len(items)), key=lambda i: -items[i].score)
    top = [items[i] for i in order[:K]]
    while len(top) < K:
        top.append(top[len(top) % max(1, len(order))])
    return top


def init_seeds(
    agent: GeneratorPolicy,
    peptide: Peptide,
    targets: Sequence[int],
    K: int,
    rng: np.random.Generator,
    scorer: Callable[[Peptide], float],
) -> list[Scored]:
    """Fill all target positions at once to produce the step-0 seeds."""
    batch = agent.generate(mask(peptide, targets), K, rng, context="init")
    return _scored(batch.peptides, scorer)


def histogram(scores: Sequence[float], bins: int = HIST_BINS) -> list[int]:
    counts = [0] * bins
    for s in scores:
        counts[min(int(s * bins), bins - 1) if s > 0 else 0] += 1
    return counts


def _note(state: EvolveState, items: Sequence[Scored]) -> None:
    for s in items:
        state.seen.setdefault(s.key, s.score)
        state.n_generated += 1
        state.sum_generated += s.score


def evolve_step(
    state: EvolveState,
    agents: AgentPool,
    cfg: EvolveConfig,
    scorer: Callable[[Peptide], float],
    rng: np.random.Generator,
) -> EvolveState:
    pool: list[Scored] = []
    for target in cfg.targets:
        agent = agents[target]
        ctx = agents.context_key(target)
        for seed in state.seeds:
            masked = context_mask(seed.peptide, target, cfg.targets, cfg.mode)
            batch = agent.generate(masked, cfg.G, rng, context=ctx)
            group = _scored(batch.peptides, scorer)
            agent.update(batch, group_relative_advantage([g.score for g in group], cfg.epsilon))
            pool.extend(group)
    _note(state, pool)
    if cfg.baseline == "static":
        seeds = state.seeds
    else:
        ranked = pool + state.seeds if cfg.elitism else pool
        seeds = select_top(ranked, cfg.K, cfg.dedup)
    return EvolveState(state.step + 1, seeds, pool, state.seen, state.n_generated, state.sum_generated)


@dataclass
class EvolveTrace:
    records: list[dict[str, Any]] = field(default_factory=list)
    final: EvolveState | None = None

    @property
    def unique_scores(self) -> dict[str, float]:
        return self.final.seen if self.final else {}

    @property
    def best(self) -> tuple[str, float]:
        key = max(self.unique_scores, key=lambda k: self.unique_scores[k])
        return key, self.unique_scores[key]

    @property
    def mean_unique(self) -> float:
        return float(np.mean(list(self.unique_scores.values())))


def _record(state: EvolveState, pool: Sequence[Scored]) -> dict[str, Any]:
    scores = [s.score for s in pool]
    uniq = list(state.seen.values())
    return {
        "step": state.step,
        "n_candidates": len(pool),
        "pool_mean": float(np.mean(scores)) if scores else None,
        "pool_max": float(np.max(scores)) if scores else None,
        "seed_scores": [s.score for s in state.seeds],
        "seeds": [s.key for s in state.seeds],
        "unique_total": len(uniq),
        "mean_unique": float(np.mean(uniq)) if uniq else None,
        "mean_all": state.sum_generated / state.n_generated if state.n_generated else None,
        "best": max(uniq) if uniq else None,
        "histogram": histogram(uniq),
    }


def run_evolve(
    peptide: Peptide,
    agents: AgentPool,
    cfg: EvolveConfig,
    scorer: Callable[[Peptide], float],
    rng: np.random.Generator,
    on_record: Callable[[dict[str, Any]], None] | None = None,
) -> EvolveTrace:
    """Initialize seeds, then run ``cfg.steps`` evolve steps.

    The static baseline keeps every seed fixed at the input peptide, which
    reproduces the fixed-input control under the same budget.
    """
    for t in cfg.targets:
        if not 0 <= t < len(peptide):
            raise IndexError(f"target {t} out of range for L={len(peptide)}")
    state = EvolveState(0, [])
    if cfg.baseline == "static":
        base = _scored([peptide], scorer)[0]
        state.seeds = [base] * cfg.K
        init_pool: list[Scored] = []
    else:
        first = agents[cfg.targets[0]]
        init_pool = init_seeds(first, peptide, cfg.targets, cfg.K, rng, scorer)
        _note(state, init_pool)
        state.seeds = select_top(init_pool, cfg.K, False)
    trace = EvolveTrace()

    def emit(rec):
        trace.records.append(rec)
        if on_record is not None:
            on_record(rec)

    emit(_record(state, init_pool))
    for _ in range(cfg.steps):
        state = evolve_step(state, agents, cfg, scorer, rng)
        emit(_record(state, state.pool))
    trace.final = state
    return trace
