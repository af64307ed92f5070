"""Post generation for moderated safety feeds.

Random-sentence posts sample dictionary words; template posts are seeded
with a category's most common opening-sentence keywords, as measured on a
corpus; anything smarter plugs in as an external process.
"""

from __future__ import annotations

import json
import random
import subprocess
import threading
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Sequence

from ..core import Category, Image, PostDraft, ProbeError, tokenize, tomllib

__all__ = [
    "CorpusStats", "EmptyCorpus", "UnknownCategory", "SpawnFailure", "ProtocolViolation",
    "corpus_stats", "first_sentence", "rsg_generate", "template_generate", "synthetic_corpus",
    "generator_plugin", "PluginGenerator", "stopwords", "rsg_wordlist",
]


class EmptyCorpus(ProbeError):
    pass


class UnknownCategory(ProbeError):
    pass


class SpawnFailure(ProbeError):
    pass


class ProtocolViolation(ProbeError):
    pass


def _data(name: str) -> str:
    return resources.files(__package__).joinpath("data", name).read_text()


def _wordfile(name: str) -> tuple[str, ...]:
    return tuple(w.strip() for w in _data(name).splitlines() if w.strip() and not w.startswith("#"))


@lru_cache(maxsize=None)
def stopwords() -> frozenset:
    return frozenset(_wordfile("stopwords.txt"))


@lru_cache(maxsize=None)
def rsg_wordlist() -> tuple[str, ...]:
    return _wordfile("rsg_words.txt")


@lru_cache(maxsize=None)
def _toml(name: str) -> dict:
    return tomllib.loads(_data(name))


# ---------------------------------------------------------------------------
# corpus statistics

@dataclass(frozen=True)
class CorpusStats:
    avg_sentence_len: int
    top_keywords: dict
    corpus_size: int


def first_sentence(text: str) -> str:
    """Everything up to and including the first '.', '?' or '!'."""
    for i, ch in enumerate(text):
        if ch in ".?!":
            return text[: i + 1]
    return text


def corpus_stats(posts: Sequence[PostDraft]) -> CorpusStats:
    """Average description length (words, rounded half up) and, per category,
    the three most frequent non-stop-words of the opening sentences."""
    if not posts:
        raise EmptyCorpus("corpus is empty")
    total = sum(p.word_count for p in posts)
    avg = (2 * total + len(posts)) // (2 * len(posts))
    stop = stopwords()
    counts: dict[Category, Counter] = {}
    for p in posts:
        c = counts.setdefault(p.category, Counter())
        c.update(w for w in tokenize(first_sentence(p.description)) if w not in stop)
    top = {}
    for cat, c in counts.items():
        ranked = sorted(c.items(), key=lambda kv: (-kv[1], kv[0]))
        if len(ranked) < 3:
            raise EmptyCorpus(f"fewer than three keywords for {cat.value}")
        top[cat] = tuple(w for w, _ in ranked[:3])
    return CorpusStats(avg, top, len(posts))


def synthetic_corpus(n: int = 1080, seed: int = 0, target_words: tuple[int, int] = (19, 35)) -> list[PostDraft]:
    """A stand-in corpus: ``n`` posts spread evenly over the four categories.

    Each opens with a category lead sentence and is padded with filler
    sentences up to a word count drawn from ``target_words``.
    """
    rng = random.Random(seed)
    doc = _toml("corpus.toml")
    cats = list(Category)
    fillers = doc["fillers"]["sentences"]
    out = []
    for i in range(n):
        cat = cats[i % len(cats)]
        text = [rng.choice(doc["leads"][cat.value])]
        want = rng.randint(*target_words)
        words = len(tokenize(text[0]))
        while words < want:
            s = rng.choice(fillers)
            text.append(s)
            words += len(tokenize(s))
        out.append(PostDraft(cat, f"{cat.value} report {i}", " ".join(text)))
    return out


# ---------------------------------------------------------------------------
# generators

def rsg_generate(wordlist: Sequence[str], length: int, seed: int,
                 category: Category = Category.CRIME) -> PostDraft:
    """``length`` words drawn uniformly with replacement; the title is the first three."""
    if not wordlist:
        raise ValueError("wordlist is empty")
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = random.Random(seed)
    words = [rng.choice(wordlist) for _ in range(length)]
    return PostDraft(category, " ".join(words[:3]), " ".join(words))


def template_generate(category: Category, stats: CorpusStats, seed: int,
                      image: Image = Image.NONE) -> PostDraft:
    """An opening that names all of the category's keywords, followed by
    detail sentences until the length is within 20% of the corpus average."""
    if category not in stats.top_keywords:
        raise UnknownCategory(f"no keywords for {category.value}")
    kws = stats.top_keywords[category]
    doc = _toml("templates.toml")
    rng = random.Random(seed)
    text = [rng.choice(doc["openings"][category.value]).format(*kws)]
    words = len(tokenize(text[0]))
    lo, hi = stats.avg_sentence_len * 0.8, stats.avg_sentence_len * 1.2
    details = list(doc["details"]["sentences"])
    rng.shuffle(details)
    for s in details:
        if words >= lo:
            break
        n = len(tokenize(s))
        if words + n <= hi:
            text.append(s)
            words += n
    return PostDraft(category, " ".join(kws), " ".join(text), image)


class PluginGenerator:
    """Talks line-delimited JSON to an external post generator.

    Request ``{"category": ...}``, response ``{"title": ..., "description": ...}``.
    Lines that do not parse into a post are skipped and counted.
    """

    MAX_CONSECUTIVE_BAD = 10

    def __init__(self, cmd: Sequence[str]):
        try:
            self.proc = subprocess.Popen(list(cmd), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                         text=True, encoding="utf-8", bufsize=1)
        except OSError as e:
            raise SpawnFailure(f"cannot start {cmd!r}: {e}") from e
        self.skipped = 0
        self._lock = threading.Lock()

    def generate(self, category: Category, image: Image = Image.NONE) -> PostDraft:
        with self._lock:
            try:
                self.proc.stdin.write(json.dumps({"category": category.value}) + "\n")
                self.proc.stdin.flush()
            except (BrokenPipeError, OSError) as e:
                raise ProtocolViolation(f"generator went away: {e}") from e
            bad = 0
            while bad < self.MAX_CONSECUTIVE_BAD:
                line = self.proc.stdout.readline()
                if not line:
                    raise ProtocolViolation("generator closed its output")
                try:
                    d = json.loads(line)
                    return PostDraft(category, d["title"], d["description"], image)
                except (ValueError, KeyError, TypeError, AttributeError):
                    bad += 1
                    self.skipped += 1
            raise ProtocolViolation(f"{bad} consecutive malformed lines")

    def close(self) -> None:
        if self.proc.poll() is None:
            self.proc.stdin.close()
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()
        if self.proc.stdout:
            self.proc.stdout.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def generator_plugin(cmd: Sequence[str]) -> PluginGenerator:
    return PluginGenerator(cmd)
