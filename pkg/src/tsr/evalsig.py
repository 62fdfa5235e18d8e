"""Corpus-level BLEU and approximate-randomization significance testing.

BLEU here is the corpus-level geometric mean of clipped n-gram
precisions for n = 1..4 against a single reference per sentence, times
the brevity penalty min(1, exp(1 - ref_len/hyp_len)). There is no
smoothing: any zero precision zeroes the corpus score, and an empty
hypothesis corpus scores 0 by convention. Scores live in [0, 1]; use
100 * bleu_score(...) for conventional display.

Sufficient statistics are integers and strictly additive, which makes
the significance test cheap: to compare systems A and B, swap the
per-sentence statistics of a random subset of sentences, recompute both
corpus scores, and count how often the shuffled score difference
reaches the observed one. Each trial draws from its own generator
seeded by a spawned child of the master seed, so p-values are
bit-identical across runs and across worker counts.

The random source is numpy's default generator (PCG64, numpy >= 1.24)
with SeedSequence.spawn for per-trial child seeds; changing either
would change p-values, so both are pinned here.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

MAX_ORDER = 4


@dataclass(frozen=True)
class BleuStats:
    """Sufficient statistics of one hypothesis/reference pair (or, by
    summation, of a corpus): clipped n-gram matches, hypothesis n-gram
    totals, and both lengths."""

    matches: tuple[int, int, int, int]
    totals: tuple[int, int, int, int]
    hyp_len: int
    ref_len: int

    def __post_init__(self):
        for m, t in zip(self.matches, self.totals):
            if not 0 <= m <= t:
                raise ValueError("clipped matches exceed n-gram totals")

    def __add__(self, other: "BleuStats") -> "BleuStats":
        return BleuStats(
            tuple(a + b for a, b in zip(self.matches, other.matches)),
            tuple(a + b for a, b in zip(self.totals, other.totals)),
            self.hyp_len + other.hyp_len,
            self.ref_len + other.ref_len,
        )

    @classmethod
    def zero(cls) -> "BleuStats":
        return cls((0, 0, 0, 0), (0, 0, 0, 0), 0, 0)


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(
        tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)
    )


def bleu_stats(hyp: Sequence[str], ref: Sequence[str]) -> BleuStats:
    """Clipped n-gram match statistics of hyp against one reference."""
    matches = []
    totals = []
    for n in range(1, MAX_ORDER + 1):
        hyp_counts = _ngram_counts(hyp, n)
        ref_counts = _ngram_counts(ref, n)
        matches.append(sum((hyp_counts & ref_counts).values()))
        totals.append(sum(hyp_counts.values()))
    return BleuStats(tuple(matches), tuple(totals), len(hyp), len(ref))


def sum_stats(stats: Sequence[BleuStats]) -> BleuStats:
    total = BleuStats.zero()
    for s in stats:
        total = total + s
    return total


def bleu_score(stats: BleuStats) -> float:
    """Corpus BLEU in [0, 1] from summed statistics."""
    if stats.hyp_len == 0:
        return 0.0
    log_precisions = 0.0
    for m, t in zip(stats.matches, stats.totals):
        if m == 0 or t == 0:
            return 0.0
        log_precisions += math.log(m / t) / MAX_ORDER
    brevity = min(1.0, math.exp(1.0 - stats.ref_len / stats.hyp_len))
    return brevity * math.exp(log_precisions)


def _stats_array(stats: Sequence[BleuStats]) -> np.ndarray:
    rows = [
        (*s.matches, *s.totals, s.hyp_len, s.ref_len) for s in stats
    ]
    return np.asarray(rows, dtype=np.int64)


def _bleu_from_row(row: np.ndarray) -> float:
    if row[8] == 0:
        return 0.0
    log_precisions = 0.0
    for n in range(MAX_ORDER):
        m, t = int(row[n]), int(row[MAX_ORDER + n])
        if m == 0 or t == 0:
            return 0.0
        log_precisions += math.log(m / t) / MAX_ORDER
    brevity = min(1.0, math.exp(1.0 - int(row[9]) / int(row[8])))
    return brevity * math.exp(log_precisions)


def approx_randomization(
    stats_a: Sequence[BleuStats],
    stats_b: Sequence[BleuStats],
    trials: int,
    seed: int,
    workers: int = 1,
) -> float:
    """Two-sided approximate-randomization p-value for the corpus BLEU
    difference between aligned systems A and B.

    Each trial swaps every sentence's A/B statistics independently with
    probability 1/2 and recomputes the absolute corpus score
    difference; the p-value is (exceedances + 1) / (trials + 1), so it
    is never 0 and is exactly 1 for identical systems.
    """
    if len(stats_a) != len(stats_b):
        raise ValueError("systems have different sentence counts")
    if not stats_a:
        raise ValueError("no sentences to test")
    if trials < 1:
        raise ValueError("trials must be positive")
    a = _stats_array(stats_a)
    b = _stats_array(stats_b)
    sum_a = a.sum(axis=0)
    sum_b = b.sum(axis=0)
    observed = abs(_bleu_from_row(sum_a) - _bleu_from_row(sum_b))
    delta = b - a
    n = len(stats_a)
    children = np.random.SeedSequence(seed).spawn(trials)

    def count_range(lo: int, hi: int) -> int:
        count = 0
        for i in range(lo, hi):
            rng = np.random.default_rng(children[i])
            mask = rng.random(n) < 0.5
            shift = delta[mask].sum(axis=0)
            diff = abs(
                _bleu_from_row(sum_a + shift) - _bleu_from_row(sum_b - shift)
            )
            if diff >= observed:
                count += 1
        return count

    if workers <= 1:
        exceed = count_range(0, trials)
    else:
        step = -(-trials // workers)
        bounds = [
            (lo, min(lo + step, trials)) for lo in range(0, trials, step)
        ]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            exceed = sum(pool.map(lambda b_: count_range(*b_), bounds))
    return (exceed + 1) / (trials + 1)


def read_sentence_file(path) -> tuple[list[str] | None, list[list[str]]]:
    """Read system output or references.

    Two layouts are accepted: plain one-sentence-per-line token text
    (returns ids None), or ``sent_id ||| tokens`` lines (returns the id
    list). Mixing layouts within one file is an error.
    """
    ids: list[str] = []
    sentences: list[list[str]] = []
    tagged: bool | None = None
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            parts = line.split(" ||| ")
            is_tagged = len(parts) == 2
            if len(parts) > 2:
                raise ValueError(f"{path}:{lineno}: too many ||| fields")
            if tagged is None:
                tagged = is_tagged
            elif tagged != is_tagged:
                raise ValueError(
                    f"{path}:{lineno}: mixed plain and sent_id ||| layouts"
                )
            if is_tagged:
                ids.append(parts[0].strip())
                sentences.append(parts[1].split())
            else:
                sentences.append(line.split())
    return (ids if tagged else None), sentences


def align_sentences(
    paths: Sequence,
) -> list[list[list[str]]]:
    """Align several sentence files.

    Files with sent_ids are joined on id in the order of the first
    file; plain files are joined by position. Returns one aligned
    token-list per file. Misaligned inputs raise.
    """
    loaded = [read_sentence_file(p) for p in paths]
    base_ids = loaded[0][0]
    if base_ids is not None and len(set(base_ids)) != len(base_ids):
        raise ValueError(f"{paths[0]}: duplicate sent_ids")
    result: list[list[list[str]]] = []
    for path, (ids, sentences) in zip(paths, loaded):
        if (ids is None) != (base_ids is None):
            raise ValueError(
                f"{path}: layout differs from {paths[0]}"
            )
        if ids is None:
            if len(sentences) != len(loaded[0][1]):
                raise ValueError(
                    f"{path}: {len(sentences)} sentences,"
                    f" expected {len(loaded[0][1])}"
                )
            result.append(sentences)
        else:
            table = dict(zip(ids, sentences))
            if len(table) != len(ids):
                raise ValueError(f"{path}: duplicate sent_ids")
            missing = [sid for sid in base_ids if sid not in table]
            if missing or len(ids) != len(base_ids):
                raise ValueError(
                    f"{path}: sent_ids do not match {paths[0]}"
                )
            result.append([table[sid] for sid in base_ids])
    return result
