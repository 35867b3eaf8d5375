#!/usr/bin/env python3
"""Show what pair extraction keeps and drops for a transcript corpus.

Runs the entity/frame pair extraction over a CTM transcript at a range of
mention-count floors, with and without plural folding, so the corpus knobs
can be picked with eyes open.  With no arguments it reports on the bundled
mini corpus.
"""

import argparse
import sys
from pathlib import Path

from groundkit.dataset import extract_entity_pairs, format_summary
from groundkit.ingest import parse_ctm, parse_vocabulary

DATA = Path(__file__).resolve().parent.parent / "data" / "mini_corpus"


def parse_args(argv):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ctm", type=Path, default=DATA / "transcripts.ctm")
    ap.add_argument("--vocab", type=Path, default=DATA / "vocab.txt")
    ap.add_argument(
        "--floors", type=int, nargs="+", default=[1, 3, 5, 10],
        help="min mention counts to sweep",
    )
    ap.add_argument("--top", type=int, default=15, help="rows of the frequency table to print")
    return ap.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    tokens = parse_ctm(args.ctm)
    vocab = parse_vocabulary(args.vocab)
    print(f"{args.ctm}: {len(tokens)} tokens; vocabulary of {len(vocab)} entities\n")

    print(f"{'floor':>6}  {'merged pairs':>12}  {'entities':>8}  {'unmerged pairs':>14}")
    for floor in sorted(args.floors):
        merged, s = extract_entity_pairs(tokens, vocab, min_count=floor)
        plain, _ = extract_entity_pairs(tokens, vocab, min_count=floor, merge_plural=False)
        print(f"{floor:>6}  {len(merged):>12}  {s.n_entities:>8}  {len(plain):>14}")

    _, summary = extract_entity_pairs(tokens, vocab, min_count=min(args.floors))
    print(f"\nat floor {min(args.floors)}:\n")
    print(format_summary(summary, top_n=args.top))
    return 0


if __name__ == "__main__":
    sys.exit(main())
