"""Regenerate the bundled demo corpus from the demo monomer library.

The corpus holds the fixture peptides followed by random linear and
head-to-tail cyclic peptides drawn with a fixed seed.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from peplead.chuckles import peptide_from_monomers, render
from peplead.generator import load_vocabulary

DATA = Path(__file__).resolve().parents[1] / "src" / "peplead" / "data"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=120, help="number of random peptides")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=DATA / "corpus_demo.chk")
    args = ap.parse_args()

    vocab = load_vocabulary(DATA / "monomers_demo.txt")
    lines = [
        (DATA / "rbp.chk").read_text().strip(),
        (DATA / "hbd16.chk").read_text().strip(),
        (DATA / "luna18_analog.chk").read_text().strip(),
    ]
    rng = np.random.default_rng(args.seed)
    while len(lines) < args.n + 3:
        L = int(rng.integers(4, 15))
        mons = [vocab.monomers[i] for i in rng.integers(0, len(vocab), size=L)]
        s = render(peptide_from_monomers(mons, cyclic=bool(rng.integers(0, 2))))
        if s not in lines:
            lines.append(s)
    args.out.write_text("# Demo CHUCKLES corpus (scripts/make_corpus.py)\n" + "\n".join(lines) + "\n")
    print(f"wrote {len(lines)} peptides to {args.out}")


if __name__ == "__main__":
    main()
