"""Run configuration: one JSON document with per-command sections.

Relative file paths inside a config resolve against the config file's
directory. ``builtin:NAME`` loads ``NAME.json`` from the bundled configs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .chuckles import ChucklesError, Peptide, parse_peptide
from .evolve import EvolveConfig
from .generator import MonomerVocabulary, VocabularyError, load_vocabulary
from .pretrain_data import MaskCountSampler
from .router import RouterPolicy
from .scoring import ScoringConfig

TOP_KEYS = {"description", "seed", "threads", "out", "peptide", "peptide_file", "scoring", "generator", "router", "evolve", "dataset"}
GENERATOR_KEYS = {"vocabulary", "temperature", "learning_rate"}
ROUTER_KEYS = {"subset_size", "batch_size", "learning_rate", "lam", "beta_start", "beta_end", "steps", "G", "update_agent", "epsilon"}
EVOLVE_KEYS = {"targets", "K", "G", "mode", "agents", "steps", "epsilon", "dedup", "elitism", "baseline", "top_n"}
DATASET_KEYS = {"corpus", "epoch", "mode", "b_fraction"}

ROUTER_DEFAULTS = {
    "subset_size": 1,
    "batch_size": 8,
    "learning_rate": 0.1,
    "lam": 0.9,
    "beta_start": 0.05,
    "beta_end": 0.001,
    "steps": 500,
    "G": 8,
    "update_agent": True,
    "epsilon": 1e-8,
}


class ConfigError(ValueError):
    pass


def _check_keys(section: str, data: Any, allowed: set[str]) -> dict[str, Any]:
    if not isinstance(data, Mapping):
        raise ConfigError(f"section {section!r} must be an object")
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")
    return dict(data)


def builtin_config_dir() -> Path:
    return Path(str(resources.files("peplead") / "data" / "configs"))


def builtin_names() -> list[str]:
    return sorted(p.stem for p in builtin_config_dir().glob("*.json"))


def resolve_config_path(spec: str | Path) -> Path:
    s = str(spec)
    if s.startswith("builtin:"):
        path = builtin_config_dir() / f"{s.split(':', 1)[1]}.json"
        if not path.exists():
            raise ConfigError(f"no builtin config {s!r}; available: {', '.join(builtin_names())}")
        return path
    path = Path(s)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return path


@dataclass
class RunConfig:
    data: dict[str, Any]
    base_dir: Path
    seed: int = 0
    threads: int = 1
    out: Path | None = None
    sections: dict[str, dict[str, Any]] = field(default_factory=dict)
    scoring_dir: Path | None = None

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        if not p.is_absolute():
            p = self.base_dir / p
        if not p.exists():
            raise ConfigError(f"referenced file not found: {p}")
        return p

    def require(self, *names: str) -> None:
        missing = [n for n in names if n not in self.sections]
        if missing:
            raise ConfigError(f"config is missing section(s): {', '.join(missing)}")

    def peptide(self) -> Peptide:
        if "peptide" in self.data and "peptide_file" in self.data:
            raise ConfigError("give either 'peptide' or 'peptide_file', not both")
        if "peptide" in self.data:
            text = self.data["peptide"]
        elif "peptide_file" in self.data:
            lines = [ln.strip() for ln in self.resolve(self.data["peptide_file"]).read_text().splitlines()]
            lines = [ln for ln in lines if ln and not ln.startswith("#")]
            if not lines:
                raise ConfigError("peptide file is empty")
            text = lines[0]
        else:
            raise ConfigError("config needs 'peptide' or 'peptide_file'")
        return parse_peptide(text)

    def scoring(self) -> ScoringConfig:
        self.require("scoring")
        try:
            return ScoringConfig.from_dict(self.sections["scoring"], self.scoring_dir or self.base_dir)
        except (ValueError, FileNotFoundError, KeyError, TypeError) as e:
            raise ConfigError(f"scoring: {e}") from e

    def vocabulary(self) -> MonomerVocabulary:
        self.require("generator")
        g = self.sections["generator"]
        if "vocabulary" not in g:
            raise ConfigError("generator.vocabulary is required")
        try:
            return load_vocabulary(self.resolve(g["vocabulary"]))
        except (VocabularyError, ChucklesError) as e:
            raise ConfigError(f"generator.vocabulary: {e}") from e

    def generator_params(self) -> tuple[float, float]:
        g = self.sections.get("generator", {})
        return float(g.get("temperature", 1.0)), float(g.get("learning_rate", 0.1))

    def router_params(self) -> dict[str, Any]:
        self.require("router")
        return {**ROUTER_DEFAULTS, **self.sections["router"]}

    def router_policy(self, length: int, steps: int | None = None) -> RouterPolicy:
        """A fresh router for a peptide of ``length``, annealed over ``steps``."""
        rp = self.router_params()
        total = int(rp["steps"] if steps is None else steps)
        try:
            return RouterPolicy(
                length,
                subset_size=int(rp["subset_size"]),
                batch_size=int(rp["batch_size"]),
                learning_rate=float(rp["learning_rate"]),
                lam=float(rp["lam"]),
                beta_start=float(rp["beta_start"]),
                beta_end=float(rp["beta_end"]),
                total_steps=max(1, total),
            )
        except ValueError as e:
            raise ConfigError(f"router: {e}") from e

    def evolve_config(self, **overrides: Any) -> EvolveConfig:
        self.require("evolve")
        e = {k: v for k, v in self.sections["evolve"].items() if k != "top_n"}
        e.update({k: v for k, v in overrides.items() if v is not None})
        if "targets" not in e:
            raise ConfigError("evolve.targets is required")
        try:
            return EvolveConfig(**e)
        except (ValueError, TypeError) as err:
            raise ConfigError(f"evolve: {err}") from err

    def dataset_params(self) -> dict[str, Any]:
        d = {"epoch": 0, "mode": "standard", "b_fraction": 0.4, **self.sections.get("dataset", {})}
        d["sampler"] = MaskCountSampler(b_fraction=float(d.pop("b_fraction")))
        return d


def config_from_dict(data: Mapping[str, Any], base_dir: str | Path = ".") -> RunConfig:
    data = _check_keys("config", data, TOP_KEYS)
    sections = {}
    for name, allowed in (("generator", GENERATOR_KEYS), ("router", ROUTER_KEYS), ("evolve", EVOLVE_KEYS), ("dataset", DATASET_KEYS)):
        if name in data:
            sections[name] = _check_keys(name, data[name], allowed)
    scoring_dir = Path(base_dir)
    if "scoring" in data:
        # a string names a separate scoring document; key validation happens in ScoringConfig.from_dict
        spec = data["scoring"]
        if isinstance(spec, str):
            path = Path(spec) if Path(spec).is_absolute() else Path(base_dir) / spec
            if not path.exists():
                raise ConfigError(f"referenced file not found: {path}")
            try:
                spec = json.loads(path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}: invalid JSON: {e}") from e
            scoring_dir = path.parent
        if not isinstance(spec, Mapping):
            raise ConfigError("section 'scoring' must be an object or a file path")
        sections["scoring"] = dict(spec)
    cfg = RunConfig(
        data=data,
        base_dir=Path(base_dir),
        seed=int(data.get("seed", 0)),
        threads=int(data.get("threads", 1)),
        out=Path(data["out"]) if "out" in data else None,
        sections=sections,
        scoring_dir=scoring_dir,
    )
    # fail early on missing files
    for key in ("peptide_file",):
        if key in data:
            cfg.resolve(data[key])
    if "generator" in sections and "vocabulary" in sections["generator"]:
        cfg.resolve(sections["generator"]["vocabulary"])
    if "dataset" in sections and "corpus" in sections["dataset"]:
        cfg.resolve(sections["dataset"]["corpus"])
    if "scoring" in sections:
        cfg.scoring()
    if cfg.threads < 1:
        raise ConfigError("threads must be at least 1")
    return cfg


def load_config(spec: str | Path) -> RunConfig:
    path = resolve_config_path(spec)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e
    return config_from_dict(data, path.parent)
