"""Hypothesis reranking against retrieved caption matches.

Each rerank candidate r (one of the first k_r decoder hypotheses) gets
a relevance score: the idf weight of every r token that is a type of a
retrieved caption, summed over all retrieved captions, normalized by
the total token count of the retrieved captions. The winner maximizes

    decoder_score(r) + interp_weight * relevance(r)

with ties going to the hypothesis the decoder ranked higher.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .retrieval import Hypothesis, KBestList, MatchList
from .textcore import types_of


@dataclass(frozen=True)
class RerankParams:
    """Rerank depth k_r and the decoder/relevance interpolation weight."""

    k_r: int = 5
    interp_weight: float = 5e4

    def __post_init__(self):
        if self.k_r < 1:
            raise ValueError("k_r must be positive")
        if self.interp_weight < 0:
            raise ValueError("interp_weight must be non-negative")


RERANK_DEFAULTS = {
    "txt": RerankParams(k_r=5, interp_weight=5e4),
    "cnn": RerankParams(k_r=5, interp_weight=70e4),
    "hca": RerankParams(k_r=5, interp_weight=10e4),
}


@dataclass
class RerankedOutput:
    sent_id: str
    chosen: Hypothesis
    combined_score: float
    relevance: float
    decoder_rank_of_chosen: int


def relevance_score(
    tokens: Sequence[str], matches: MatchList, idf
) -> float:
    """Normalized idf overlap between a token sequence and a match list.

    Every (retrieved caption, caption type, query token) triple where
    the type equals the token contributes idf(type); the total is
    divided by the summed token count of the retrieved captions. An
    empty match list scores 0, so reranking degenerates gracefully to
    the decoder order.
    """
    if not matches.matches:
        return 0.0
    counts = Counter(tokens)
    total_tokens = sum(len(doc.tokens) for doc, _ in matches.matches)
    if total_tokens == 0:
        return 0.0
    acc = 0.0
    for doc, _ in matches.matches:
        for term in sorted(types_of(doc.tokens)):
            c = counts.get(term)
            if c:
                acc += c * idf.idf(term)
    return acc / total_tokens


def select_best(
    rbest: KBestList,
    matches: MatchList,
    idf,
    params: RerankParams | None = None,
) -> RerankedOutput:
    """Pick the hypothesis maximizing decoder score plus weighted
    relevance over the first k_r hypotheses; earlier decoder rank wins
    ties."""
    if params is None:
        params = RerankParams()
    if not rbest.hyps:
        raise ValueError(f"sentence {rbest.sent_id}: empty k-best list")
    best: RerankedOutput | None = None
    for rank, hyp in enumerate(rbest.hyps[: params.k_r], start=1):
        rel = relevance_score(hyp.tokens, matches, idf)
        combined = hyp.decoder_score + params.interp_weight * rel
        if best is None or combined > best.combined_score:
            best = RerankedOutput(rbest.sent_id, hyp, combined, rel, rank)
    return best


def write_output(outputs: Iterable[RerankedOutput], path) -> None:
    """Write chosen hypotheses, one ``sent_id ||| tokens`` line each."""
    with open(path, "w", encoding="utf-8") as handle:
        for out in outputs:
            handle.write(f"{out.sent_id} ||| {' '.join(out.chosen.tokens)}\n")


def write_diagnostics(
    outputs: Iterable[tuple[RerankedOutput, bool]], path
) -> None:
    """Write per-sentence rerank diagnostics: decoder rank of the chosen
    hypothesis, its combined and relevance scores, and whether retrieval
    fell back to text-only scoring."""
    with open(path, "w", encoding="utf-8") as handle:
        for out, used_fallback in outputs:
            handle.write(
                f"{out.sent_id} ||| {out.decoder_rank_of_chosen}"
                f" ||| {out.combined_score!r} ||| {out.relevance!r}"
                f" ||| {int(used_fallback)}\n"
            )
