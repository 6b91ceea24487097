"""Context-free bandit over residue positions.

The router keeps one logit per position. Each step it draws ``B`` subsets of
``K`` distinct positions, has the agent regenerate those positions, and
reinforces subsets whose mean reward beats a running baseline, with an
entropy bonus annealed linearly from ``beta_start`` to ``beta_end``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .chuckles import Peptide, mask
from .generator import GeneratorPolicy


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


@dataclass
class SubsetSample:
    indices: tuple[int, ...]
    logprob: float
    mean_reward: float = math.nan


@dataclass
class RouterPolicy:
    length: int
    subset_size: int = 1
    batch_size: int = 8
    learning_rate: float = 0.1
    lam: float = 0.9
    beta_start: float = 0.05
    beta_end: float = 0.001
    total_steps: int = 500
    step: int = 0
    baseline: float = 0.0
    logits: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.logits is None:
            self.logits = np.zeros(self.length)
        self.logits = np.asarray(self.logits, dtype=float)
        if self.logits.shape != (self.length,):
            raise ValueError("logits must have one entry per position")
        if not 1 <= self.subset_size <= self.length:
            raise ValueError(f"subset size K={self.subset_size} must lie in [1, L={self.length}]")
        if not 0 <= self.lam < 1:
            raise ValueError("lambda must lie in [0, 1)")
        if self.batch_size < 1 or self.total_steps < 1:
            raise ValueError("batch size and total steps must be positive")

    def probs(self) -> np.ndarray:
        return _softmax(self.logits)

    def entropy(self) -> float:
        p = self.probs()
        nz = p[p > 0]
        return float(-(nz * np.log(nz)).sum())

    def beta(self, step: int | None = None) -> float:
        s = self.step if step is None else step
        frac = min(max(s / self.total_steps, 0.0), 1.0)
        return self.beta_start * (1.0 - frac) + self.beta_end * frac

    # -- sampling -----------------------------------------------------------

    def subset_logprob(self, indices: Sequence[int]) -> float:
        """Log-probability of drawing ``indices`` in this order without replacement."""
        return subset_logprob(self.logits, indices)

    def sample_subsets(self, rng: np.random.Generator) -> list[SubsetSample]:
        out = []
        for _ in range(self.batch_size):
            p = self.probs()
            chosen: list[int] = []
            for _ in range(self.subset_size):
                q = p.copy()
                q[chosen] = 0.0
                q /= q.sum()
                chosen.append(int(rng.choice(self.length, p=q)))
            out.append(SubsetSample(tuple(chosen), self.subset_logprob(chosen)))
        return out

    # -- learning -----------------------------------------------------------

    def loss(self, samples: Sequence[SubsetSample], logits: np.ndarray | None = None) -> float:
        """``-(1/B) sum_b A_b log pi(I_b) - beta * H(pi)`` with the current baseline."""
        z = self.logits if logits is None else logits
        pg = -sum((s.mean_reward - self.baseline) * subset_logprob(z, s.indices) for s in samples) / len(samples)
        p = _softmax(z)
        nz = p[p > 0]
        h = float(-(nz * np.log(nz)).sum())
        return pg - self.beta() * h

    def gradient(self, samples: Sequence[SubsetSample]) -> np.ndarray:
        z = self.logits
        p = _softmax(z)
        grad = np.zeros_like(z)
        for s in samples:
            grad -= (s.mean_reward - self.baseline) * subset_logprob_grad(z, s.indices)
        grad /= len(samples)
        h = float(-(p[p > 0] * np.log(p[p > 0])).sum())
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = np.where(p > 0, np.log(p), 0.0)
        # d(-beta H)/dz_k = beta * p_k (log p_k + H)
        grad += self.beta() * p * (logp + h)
        return grad

    def update(self, samples: Sequence[SubsetSample]) -> None:
        """One gradient step, then the EMA baseline update, then ``step += 1``."""
        if not samples:
            raise ValueError("need at least one sampled subset")
        rewards = [s.mean_reward for s in samples]
        if not all(math.isfinite(r) for r in rewards):
            raise ValueError("non-finite subset reward")
        self.logits = self.logits - self.learning_rate * self.gradient(samples)
        self.baseline = self.lam * self.baseline + (1 - self.lam) * float(np.mean(rewards))
        self.step += 1

    def to_dict(self) -> dict[str, Any]:
        return {
            "length": self.length,
            "subset_size": self.subset_size,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "lam": self.lam,
            "beta_start": self.beta_start,
            "beta_end": self.beta_end,
            "total_steps": self.total_steps,
            "step": self.step,
            "baseline": self.baseline,
            "logits": self.logits.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RouterPolicy:
        return cls(**{**data, "logits": np.asarray(data["logits"], dtype=float)})


def subset_logprob(logits: np.ndarray, indices: Sequence[int]) -> float:
    if len(set(indices)) != len(indices):
        raise ValueError(f"duplicate index in subset {tuple(indices)}")
    z = np.asarray(logits, dtype=float)
    z = z - z.max()
    e = np.exp(z)
    remaining = np.ones(len(z), dtype=bool)
    total = 0.0
    for i in indices:
        total += z[i] - math.log(e[remaining].sum())
        remaining[i] = False
    return float(total)


def subset_logprob_grad(logits: np.ndarray, indices: Sequence[int]) -> np.ndarray:
    """Score function of the sequential without-replacement draw."""
    z = np.asarray(logits, dtype=float)
    e = np.exp(z - z.max())
    grad = np.zeros_like(z)
    remaining = np.ones_like(z, dtype=bool)
    for i in indices:
        q = np.where(remaining, e, 0.0)
        q /= q.sum()
        grad -= q
        grad[i] += 1.0
        remaining[i] = False
    return grad


@dataclass
class RouterRecord:
    step: int
    probs: list[float]
    entropy: float
    beta: float
    baseline: float
    subsets: list[list[int]]
    rewards: list[float]

    def to_dict(self) -> dict[str, Any]:
        return {
            "step": self.step,
            "probs": self.probs,
            "entropy": self.entropy,
            "beta": self.beta,
            "baseline": self.baseline,
            "subsets": self.subsets,
            "rewards": self.rewards,
        }


@dataclass
class RouterTrace:
    records: list[RouterRecord] = field(default_factory=list)
    best: tuple[float, Peptide] | None = None

    @property
    def final_probs(self) -> np.ndarray:
        return np.asarray(self.records[-1].probs)


def route(
    router: RouterPolicy,
    agent: GeneratorPolicy,
    peptide: Peptide,
    scorer: Callable[[Peptide], float],
    steps: int,
    G: int,
    rng: np.random.Generator,
    update_agent: bool = True,
    epsilon: float = 1e-8,
    on_record: Callable[[RouterRecord], None] | None = None,
    context: str = "router",
) -> RouterTrace:
    """Run ``steps`` routing steps on a fixed peptide.

    Each subset is masked, the agent fills ``G`` candidates, and their mean
    reward feeds the router update. With ``update_agent`` the agent also
    takes a group-relative step per subset.
    """
    from .evolve import group_relative_advantage

    if router.length != len(peptide):
        raise ValueError(f"router length {router.length} != peptide length {len(peptide)}")
    score_many = getattr(scorer, "score_many", None)
    trace = RouterTrace()

    def record(subsets, rewards):
        rec = RouterRecord(
            router.step,
            router.probs().tolist(),
            router.entropy(),
            router.beta(),
            router.baseline,
            subsets,
            rewards,
        )
        trace.records.append(rec)
        if on_record is not None:
            on_record(rec)

    record([], [])
    for _ in range(steps):
        samples = router.sample_subsets(rng)
        groups = []
        for s in samples:
            batch = agent.generate(mask(peptide, s.indices), G, rng, context=context)
            peps = batch.peptides
            rewards = score_many(peps) if score_many else [scorer(x) for x in peps]
            s.mean_reward = float(np.mean(rewards))
            groups.append((batch, rewards))
            for x, r in zip(peps, rewards):
                if trace.best is None or r > trace.best[0]:
                    trace.best = (r, x)
        router.update(samples)
        if update_agent and G >= 2:
            for batch, rewards in groups:
                agent.update(batch, group_relative_advantage(rewards, epsilon))
        record([list(s.indices) for s in samples], [s.mean_reward for s in samples])
    return trace
