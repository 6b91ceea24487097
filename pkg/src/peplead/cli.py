"""Command-line entry point: ``peplead {tokenize,shift,mask,score,route,evolve,dataset}``.

Exit codes: 0 success, 1 runtime/input error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .chuckles import ChucklesError, Peptide, mask, parse_peptide, render, shift, tokenize
from .config import ConfigError, RunConfig, builtin_names, config_from_dict, load_config
from .evolve import AgentPool, run_evolve
from .generator import GeneratorPolicy
from .pretrain_data import EpochStats, emit_epoch, write_pairs
from .router import route
from .runlog import RunLog
from .scoring import ScoreBreakdown, Scorer, ScoringError

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _read_input(args: argparse.Namespace) -> str:
    if args.file:
        lines = [ln.strip() for ln in Path(args.file).read_text(encoding="utf-8").splitlines()]
        lines = [ln for ln in lines if ln and not ln.startswith("#")]
        if not lines:
            raise ChucklesError(f"{args.file}: no peptide found")
        return lines[0]
    if args.peptide is None:
        raise ChucklesError("give a CHUCKLES string or --file")
    return args.peptide


def _parse_positions(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise ChucklesError(f"bad position list {text!r}") from e


def _config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else config_from_dict({})
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfg.threads = args.threads
    if args.out is not None:
        cfg.out = Path(args.out)
    return cfg


def _out_dir(cfg: RunConfig, default: str) -> Path:
    out = cfg.out if cfg.out is not None else Path(default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _peptide(cfg: RunConfig, args: argparse.Namespace) -> Peptide:
    if getattr(args, "peptide", None):
        return parse_peptide(args.peptide)
    return cfg.peptide()


# -- string commands ------------------------------------------------------------


def cmd_tokenize(args: argparse.Namespace) -> int:
    s = _read_input(args)
    parse_peptide(s)  # validate ring closures
    toks = tokenize(s)
    if args.json:
        print(json.dumps([{"kind": t.kind.value, "text": t.text} for t in toks]))
    else:
        print(" ".join(t.text for t in toks))
    return EXIT_OK


def cmd_shift(args: argparse.Namespace) -> int:
    p = parse_peptide(_read_input(args), strict=not args.lenient)
    print(render(shift(p, args.offset)))
    return EXIT_OK


def cmd_mask(args: argparse.Namespace) -> int:
    p = parse_peptide(_read_input(args), strict=not args.lenient)
    print(mask(p, _parse_positions(args.positions)).render())
    return EXIT_OK


def format_breakdown(b: ScoreBreakdown) -> str:
    rows = [f"{'component':<24} {'raw':>12} {'score':>10} {'weight':>7}"]
    for c in b.components:
        rows.append(f"{c.name:<24} {c.raw:>12.6g} {c.score:>10.6f} {c.weight:>7.3g}")
    rows.append(f"{'aggregate':<24} {'':>12} {b.aggregate:>10.6f}")
    return "\n".join(rows)


def cmd_score(args: argparse.Namespace) -> int:
    cfg = _config(args)
    scorer = Scorer(cfg.scoring())
    p = parse_peptide(args.peptide) if args.peptide else (parse_peptide(_read_input(args)) if args.file else cfg.peptide())
    b = scorer.breakdown(p)
    if args.format == "text":
        print(format_breakdown(b))
    else:
        print(json.dumps({"peptide": render(p), **b.to_dict()}))
    return EXIT_OK


# -- learning commands ------------------------------------------------------------


def cmd_route(args: argparse.Namespace) -> int:
    cfg = _config(args)
    cfg.require("router", "generator", "scoring")
    peptide = _peptide(cfg, args)
    rp = cfg.router_params()
    steps = int(args.steps if args.steps is not None else rp["steps"])
    if steps < 0:
        raise ConfigError("steps must be non-negative")
    vocab = cfg.vocabulary()
    temperature, agent_lr = cfg.generator_params()
    router = cfg.router_policy(len(peptide), steps)
    agent = GeneratorPolicy(vocab, temperature, agent_lr)
    scorer = Scorer(cfg.scoring(), threads=cfg.threads)
    out = _out_dir(cfg, "runs/route")
    rng = np.random.default_rng(cfg.seed)
    try:
        with RunLog(out / "route_log.jsonl") as log:
            log.write("run_start", None, {"command": "route", "seed": cfg.seed, "peptide": render(peptide), "steps": steps, "router": rp})
            trace = route(
                router,
                agent,
                peptide,
                scorer,
                steps,
                int(rp["G"]),
                rng,
                update_agent=bool(rp["update_agent"]),
                epsilon=float(rp["epsilon"]),
                on_record=lambda r: log.write("route_step", r.step, r.to_dict()),
            )
            summary = {
                "final_probs": trace.final_probs.tolist(),
                "argmax": int(np.argmax(trace.final_probs)),
                "best_score": trace.best[0] if trace.best else None,
                "best_peptide": render(trace.best[1]) if trace.best else None,
            }
            log.write("run_end", steps, summary)
    finally:
        scorer.close()
    (out / "checkpoint.json").write_text(json.dumps({"router": router.to_dict(), "agent": agent.to_dict()}) + "\n")
    print("final probabilities: " + " ".join(f"{i}:{p:.4f}" for i, p in enumerate(trace.final_probs)))
    print(f"argmax position: {summary['argmax']}; log: {out / 'route_log.jsonl'}")
    return EXIT_OK


def cmd_evolve(args: argparse.Namespace) -> int:
    cfg = _config(args)
    cfg.require("evolve", "generator", "scoring")
    peptide = _peptide(cfg, args)
    ecfg = cfg.evolve_config(steps=args.steps, mode=args.mode, agents=args.agents, baseline=args.baseline, K=args.K, G=args.G)
    top_n = int(cfg.sections["evolve"].get("top_n", 20))
    vocab = cfg.vocabulary()
    temperature, agent_lr = cfg.generator_params()
    agents = AgentPool(vocab, ecfg, temperature, agent_lr)
    scorer = Scorer(cfg.scoring(), threads=cfg.threads)
    out = _out_dir(cfg, "runs/evolve")
    rng = np.random.default_rng(cfg.seed)
    try:
        with RunLog(out / "evolve_log.jsonl") as log:
            log.write("run_start", None, {"command": "evolve", "seed": cfg.seed, "peptide": render(peptide), "config": _evolve_dict(ecfg)})
            trace = run_evolve(peptide, agents, ecfg, scorer, rng, on_record=lambda r: log.write("evolve_step", r["step"], r))
            best_key, best_score = trace.best
            log.write(
                "run_end",
                ecfg.steps,
                {"best": best_score, "best_peptide": best_key, "mean_unique": trace.mean_unique, "unique_total": len(trace.unique_scores)},
            )
            ranked = sorted(trace.unique_scores.items(), key=lambda kv: -kv[1])[:top_n]
            with (out / "top_peptides.tsv").open("w", encoding="utf-8") as fh:
                fh.write("rank\tscore\tchuckles\tbreakdown\n")
                for i, (key, score) in enumerate(ranked, 1):
                    b = scorer.breakdown(parse_peptide(key))
                    fh.write(f"{i}\t{score:.6f}\t{key}\t{json.dumps(b.to_dict())}\n")
            hist = trace.records[-1]["histogram"]
            with (out / "histogram.tsv").open("w", encoding="utf-8") as fh:
                fh.write("bin_low\tbin_high\tcount\n")
                width = 1.0 / len(hist)
                for i, c in enumerate(hist):
                    fh.write(f"{i * width:.2f}\t{(i + 1) * width:.2f}\t{c}\n")
    finally:
        scorer.close()
    (out / "checkpoint.json").write_text(json.dumps({"agents": [a.to_dict() for a in agents.distinct()]}) + "\n")
    print(f"best score {best_score:.6f}: {best_key}")
    print(f"unique peptides {len(trace.unique_scores)}, mean over unique {trace.mean_unique:.6f}; outputs in {out}")
    return EXIT_OK


def _evolve_dict(c) -> dict[str, Any]:
    return {
        "targets": list(c.targets),
        "K": c.K,
        "G": c.G,
        "mode": c.mode,
        "agents": c.agents,
        "steps": c.steps,
        "epsilon": c.epsilon,
        "dedup": c.dedup,
        "elitism": c.elitism,
        "baseline": c.baseline,
    }


def cmd_dataset(args: argparse.Namespace) -> int:
    cfg = _config(args)
    d = cfg.dataset_params()
    if args.corpus:
        corpus = Path(args.corpus)
    elif "corpus" in d:
        corpus = cfg.resolve(d["corpus"])
    else:
        raise ConfigError("no corpus given (--corpus or dataset.corpus)")
    if not corpus.exists():
        raise ConfigError(f"corpus not found: {corpus}")
    epoch = args.epoch if args.epoch is not None else int(d["epoch"])
    mode = args.mode or d["mode"]
    lines = [ln.strip() for ln in corpus.read_text(encoding="utf-8").splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    stats = EpochStats()
    pairs = emit_epoch(lines, cfg.seed, epoch, mode, d["sampler"], stats)
    if cfg.out is None:
        n = write_pairs(pairs, sys.stdout)
    else:
        out = _out_dir(cfg, ".")
        path = out / f"pairs_epoch{epoch}_{mode}.tsv"
        with path.open("w", encoding="utf-8") as fh:
            n = write_pairs(pairs, fh)
    for err in stats.errors or []:
        print(f"{corpus}: {err}", file=sys.stderr)
    print(f"emitted {n} pairs, skipped {stats.skipped} invalid lines", file=sys.stderr)
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="peplead", description="Peptide lead optimization toolkit.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help=f"JSON config path or builtin:NAME ({', '.join(builtin_names())})")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--steps", type=int)
        p.add_argument("--threads", type=int)

    def text_input(p: argparse.ArgumentParser) -> None:
        p.add_argument("peptide", nargs="?", help="CHUCKLES string")
        p.add_argument("--file", help="read the first peptide from this file")

    p = sub.add_parser("tokenize", help="split a CHUCKLES string into tokens")
    text_input(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("shift", help="rotate residues left by an offset")
    text_input(p)
    p.add_argument("--offset", type=int, required=True)
    p.add_argument("--lenient", action="store_true", help="tolerate unpaired ring labels")
    p.set_defaults(func=cmd_shift)

    p = sub.add_parser("mask", help="replace residues with '?'")
    text_input(p)
    p.add_argument("--positions", required=True, help="comma-separated 0-based indices")
    p.add_argument("--lenient", action="store_true", help="tolerate unpaired ring labels")
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("score", help="score a peptide and print the component breakdown")
    text_input(p)
    common(p)
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("route", help="learn which positions are worth editing")
    common(p)
    p.add_argument("--peptide", help="override the configured peptide")
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("evolve", help="run the evolving seed-pool optimization")
    common(p)
    p.add_argument("--peptide", help="override the configured peptide")
    p.add_argument("--mode", choices=("self", "neighbor"))
    p.add_argument("--agents", choices=("single", "multi"))
    p.add_argument("--baseline", choices=("static", "evolving"))
    p.add_argument("-K", type=int)
    p.add_argument("-G", type=int)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("dataset", help="emit one epoch of masked training pairs")
    common(p)
    p.add_argument("--corpus")
    p.add_argument("--epoch", type=int)
    p.add_argument("--mode", choices=("standard", "shifted"))
    p.set_defaults(func=cmd_dataset)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ChucklesError, ScoringError, ValueError, IndexError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
