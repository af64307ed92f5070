"""Write the synthetic post corpus as JSON lines and print its statistics.

    python scripts/make_corpus.py --n 1080 --out corpus.jsonl
"""

import argparse
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from boundary_probe.textgen import corpus_stats, synthetic_corpus


@dataclass
class Settings:
    n: int = 1080
    seed: int = 0
    out: Optional[Path] = None


def main(s: Settings) -> None:
    posts = synthetic_corpus(s.n, seed=s.seed)
    if s.out:
        s.out.write_text("".join(json.dumps(p.to_dict(), sort_keys=True) + "\n" for p in posts))
    stats = corpus_stats(posts)
    print(f"posts: {stats.corpus_size}  average words: {stats.avg_sentence_len}")
    for cat, words in sorted(stats.top_keywords.items(), key=lambda kv: kv[0].value):
        print(f"  {cat.value}: {', '.join(words)}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=Settings.n)
    ap.add_argument("--seed", type=int, default=Settings.seed)
    ap.add_argument("--out", type=Path)
    a = ap.parse_args()
    main(Settings(a.n, a.seed, a.out))
