"""Relevance scoring of caption candidates against decoder hypotheses.

Translation hypotheses for one source sentence act as a bag-of-tokens
query against the caption collection. A candidate caption m is scored
in one of three modes:

* ``txt``  — pure term matching: every hypothesis token that is a type
  of m contributes its idf weight (token repetitions count once per
  occurrence); the sum is divided by m's type count so long captions
  are not favored.
* ``cnn``  — the txt score is damped by exp(-b * v) where v is the
  Euclidean distance between the query image embedding and m's image
  embedding, and zeroed entirely when v reaches the cutoff d. If the
  query image has no embedding, or no term-sharing candidate lies
  strictly within the cutoff, retrieval falls back to txt scoring and
  flags the match list.
* ``hca``  — the txt score passes through only when m's category set
  equals the query's category set exactly; subset or superset matches
  score zero. If no candidate scores above zero, retrieval falls back
  to txt scoring and flags the match list.

Retrieved lists hold the top k_m candidates with strictly positive
scores, ordered by descending score with ties broken by ascending
caption_id.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .collection import CaptionDoc, Collection, FeatureStore
from .textcore import types_of

MODES = ("txt", "cnn", "hca")


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[str, ...]
    decoder_score: float


@dataclass
class KBestList:
    """Decoder hypotheses for one sentence, best first.

    Token sequences are pairwise distinct and decoder scores are
    non-increasing; both are checked at construction.
    """

    sent_id: str
    hyps: list[Hypothesis]

    def __post_init__(self):
        seen: set[tuple[str, ...]] = set()
        prev = None
        for hyp in self.hyps:
            if not np.isfinite(hyp.decoder_score):
                raise ValueError(
                    f"sentence {self.sent_id}: non-finite decoder score"
                )
            if hyp.tokens in seen:
                raise ValueError(
                    f"sentence {self.sent_id}: duplicate hypothesis"
                )
            seen.add(hyp.tokens)
            if prev is not None and hyp.decoder_score > prev:
                raise ValueError(
                    f"sentence {self.sent_id}: decoder scores increase"
                )
            prev = hyp.decoder_score


@dataclass(frozen=True)
class RetrievalParams:
    """Retrieval knobs: query depth k_n, match count k_m, and the visual
    decay weight / distance cutoff used by cnn mode."""

    k_n: int = 300
    k_m: int = 500
    distance_weight: float = 0.01
    distance_cutoff: float = 90.0

    def __post_init__(self):
        if self.k_n < 1 or self.k_m < 1:
            raise ValueError("k_n and k_m must be positive")
        if self.distance_weight < 0:
            raise ValueError("distance_weight must be non-negative")
        if self.distance_cutoff <= 0:
            raise ValueError("distance_cutoff must be positive")


RETRIEVAL_DEFAULTS = {
    "txt": RetrievalParams(k_n=300, k_m=500),
    "cnn": RetrievalParams(k_n=300, k_m=300),
    "hca": RetrievalParams(k_n=300, k_m=500),
}


@dataclass
class MatchList:
    """Retrieved captions for one sentence, best first, scores > 0."""

    sent_id: str
    matches: list[tuple[CaptionDoc, float]]
    used_fallback: bool = False
    mode: str = "txt"


@dataclass(frozen=True)
class Query:
    """Per-sentence retrieval metadata: the source image id (None when
    unknown) and its category annotation (None when unannotated)."""

    sent_id: str
    image_id: str | None = None
    categories: frozenset[str] | None = None


def score_txt(m: CaptionDoc, n_list: Sequence[Hypothesis], idf) -> float:
    """Idf-weighted term overlap between hypothesis tokens and m's types,
    normalized by m's type count.

    Each hypothesis token occurrence that is a type of m adds
    idf(token); repeated tokens add repeatedly, but repeated types on
    the candidate side do not.
    """
    types = types_of(m.tokens)
    if not types:
        raise ValueError(f"caption {m.caption_id!r} has no tokens")
    counts = Counter(tok for hyp in n_list for tok in hyp.tokens)
    acc = 0.0
    for term in sorted(types):
        c = counts.get(term)
        if c:
            acc += c * idf.idf(term)
    return acc / len(types)


def visual_distance(a, b) -> float:
    """Euclidean distance between two equal-length vectors, in float64."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def score_cnn(
    m: CaptionDoc,
    n_list: Sequence[Hypothesis],
    query_image: str,
    feats: FeatureStore,
    idf,
    params: RetrievalParams,
) -> float:
    """Text score damped by visual distance, zero at or beyond the cutoff.

    The query image must have an embedding; candidates without one are
    treated as beyond the cutoff and score zero.
    """
    if query_image not in feats:
        raise ValueError(f"query image {query_image!r} has no embedding")
    if m.image_id not in feats:
        return 0.0
    v = visual_distance(feats.vector(m.image_id), feats.vector(query_image))
    if v >= params.distance_cutoff:
        return 0.0
    return score_txt(m, n_list, idf) * float(
        np.exp(-params.distance_weight * v)
    )


def score_hca(
    m: CaptionDoc,
    n_list: Sequence[Hypothesis],
    query_categories: Iterable[str] | None,
    idf,
) -> float:
    """Text score gated by exact category-set equality.

    Missing annotations on either side score zero (callers count such
    candidates toward a possible fallback).
    """
    if m.categories is None or query_categories is None:
        return 0.0
    if m.categories != frozenset(query_categories):
        return 0.0
    return score_txt(m, n_list, idf)


class Retriever:
    """Reusable scorer over one (collection, idf, features) triple.

    Precomputes the per-term idf weight vector and the doc-to-embedding
    row map; retrieve() is then a sparse matvec plus a top-k selection
    and is safe to call from many threads at once.
    """

    def __init__(self, coll: Collection, idf, feats: FeatureStore | None = None):
        self.coll = coll
        self.idf = idf
        self.feats = feats
        weights = np.zeros(len(coll.vocab), dtype=np.float64)
        for term, tid in coll.vocab.items():
            weights[tid] = idf.idf(term)
        self.weights = weights
        img_row = np.full(len(coll), -1, dtype=np.int64)
        if feats is not None and len(feats):
            for i, doc in enumerate(coll.docs):
                row = feats.row_of(doc.image_id)
                if row is not None:
                    img_row[i] = row
        self._img_row = img_row

    def _query_counts(self, hyps: Sequence[Hypothesis]) -> np.ndarray:
        counts = np.zeros(len(self.coll.vocab), dtype=np.float64)
        vocab = self.coll.vocab
        for hyp in hyps:
            for tok in hyp.tokens:
                tid = vocab.get(tok)
                if tid is not None:
                    counts[tid] += 1.0
        return counts

    def _txt_scores(self, counts: np.ndarray) -> np.ndarray:
        raw = self.coll.matrix @ (counts * self.weights)
        return raw / self.coll.type_counts

    def _overlap_mask(self, counts: np.ndarray) -> np.ndarray:
        hits = self.coll.matrix @ (counts > 0).astype(np.float64)
        return hits > 0

    def _select(self, scores: np.ndarray, k_m: int) -> list[tuple[CaptionDoc, float]]:
        pos = np.flatnonzero(scores > 0.0)
        if pos.size == 0:
            return []
        order = np.lexsort((self.coll.caption_rank[pos], -scores[pos]))
        top = pos[order[:k_m]]
        return [(self.coll.docs[i], float(scores[i])) for i in top]

    def retrieve(
        self,
        kbest: KBestList,
        query_image: str | None = None,
        query_categories: Iterable[str] | None = None,
        mode: str = "txt",
        params: RetrievalParams | None = None,
    ) -> MatchList:
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        if params is None:
            params = RETRIEVAL_DEFAULTS[mode]
        if not kbest.hyps:
            raise ValueError(f"sentence {kbest.sent_id}: empty k-best list")
        hyps = kbest.hyps[: params.k_n]
        counts = self._query_counts(hyps)
        s_txt = self._txt_scores(counts)

        if mode == "txt":
            return MatchList(
                kbest.sent_id, self._select(s_txt, params.k_m), False, mode
            )

        if mode == "cnn":
            scores = self._cnn_scores(counts, s_txt, query_image, params)
            if scores is None:
                return MatchList(
                    kbest.sent_id, self._select(s_txt, params.k_m), True, mode
                )
            return MatchList(
                kbest.sent_id, self._select(scores, params.k_m), False, mode
            )

        # hca: gate by exact category-group equality, falling back to
        # txt when nothing scores above zero.
        scores = None
        if query_categories is not None:
            group = self.coll.category_group(query_categories)
            if group is not None:
                scores = np.where(self.coll.cat_group == group, s_txt, 0.0)
        if scores is None or not np.any(scores > 0.0):
            return MatchList(
                kbest.sent_id, self._select(s_txt, params.k_m), True, mode
            )
        return MatchList(
            kbest.sent_id, self._select(scores, params.k_m), False, mode
        )

    def _cnn_scores(
        self,
        counts: np.ndarray,
        s_txt: np.ndarray,
        query_image: str | None,
        params: RetrievalParams,
    ) -> np.ndarray | None:
        """Distance-damped scores, or None when the fallback applies."""
        feats = self.feats
        qrow = None
        if feats is not None and query_image is not None:
            qrow = feats.row_of(query_image)
        if qrow is None:
            return None
        overlap = self._overlap_mask(counts)
        cand = np.flatnonzero(overlap & (self._img_row >= 0))
        if cand.size == 0:
            return None
        qvec = feats.matrix[qrow].astype(np.float64)
        rows = self._img_row[cand]
        urows, inverse = np.unique(rows, return_inverse=True)
        diffs = feats.matrix[urows].astype(np.float64) - qvec
        udist = np.sqrt(np.sum(diffs * diffs, axis=1))
        dist = udist[inverse]
        within = dist < params.distance_cutoff
        if not np.any(within):
            return None
        scores = np.zeros(len(self.coll), dtype=np.float64)
        keep = cand[within]
        scores[keep] = s_txt[keep] * np.exp(
            -params.distance_weight * dist[within]
        )
        return scores


def retrieve(
    coll: Collection,
    feats: FeatureStore | None,
    idf,
    kbest: KBestList,
    query_image: str | None = None,
    query_categories: Iterable[str] | None = None,
    mode: str = "txt",
    params: RetrievalParams | None = None,
) -> MatchList:
    """One-shot retrieval; builds a throwaway Retriever. For repeated
    queries over one collection, construct the Retriever once."""
    return Retriever(coll, idf, feats).retrieve(
        kbest, query_image, query_categories, mode, params
    )


def read_kbest(path) -> list[KBestList]:
    """Parse a k-best file: ``sent_id ||| token token ... ||| score``.

    Lines with extra ``|||`` fields keep the second field as the token
    sequence and the last as the score. Sentences must be contiguous
    with non-increasing scores; duplicate token sequences within a
    sentence keep the first (highest-scored) occurrence.
    """
    lists: list[KBestList] = []
    done: set[str] = set()
    cur_id: str | None = None
    cur_hyps: list[Hypothesis] = []
    cur_seen: set[tuple[str, ...]] = set()

    def flush():
        if cur_id is not None:
            lists.append(KBestList(cur_id, list(cur_hyps)))
            done.add(cur_id)

    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(" ||| ")
            if len(parts) < 3:
                raise ValueError(
                    f"{path}:{lineno}: expected sent_id ||| tokens ||| score"
                )
            sent_id = parts[0].strip()
            tokens = tuple(parts[1].split())
            try:
                score = float(parts[-1])
            except ValueError:
                raise ValueError(
                    f"{path}:{lineno}: bad decoder score {parts[-1]!r}"
                ) from None
            if not np.isfinite(score):
                raise ValueError(
                    f"{path}:{lineno}: non-finite decoder score"
                )
            if sent_id != cur_id:
                if sent_id in done:
                    raise ValueError(
                        f"{path}:{lineno}: sentence {sent_id} not contiguous"
                    )
                flush()
                cur_id, cur_hyps, cur_seen = sent_id, [], set()
            if cur_hyps and score > cur_hyps[-1].decoder_score:
                raise ValueError(
                    f"{path}:{lineno}: decoder scores increase within"
                    f" sentence {sent_id}"
                )
            if tokens in cur_seen:
                continue
            cur_seen.add(tokens)
            cur_hyps.append(Hypothesis(tokens, score))
    flush()
    return lists


def write_kbest(lists: Iterable[KBestList], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for kb in lists:
            for hyp in kb.hyps:
                handle.write(
                    f"{kb.sent_id} ||| {' '.join(hyp.tokens)}"
                    f" ||| {hyp.decoder_score!r}\n"
                )


def write_matchlists(matchlists: Iterable[MatchList], path) -> None:
    """Dump match lists, one ``sent_id ||| caption_id ||| score ||| flag``
    line per match. Sentences with no matches emit one line with the
    placeholder caption_id ``-`` so fallback flags survive a round trip."""
    with open(path, "w", encoding="utf-8") as handle:
        for ml in matchlists:
            flag = int(ml.used_fallback)
            if not ml.matches:
                handle.write(f"{ml.sent_id} ||| - ||| 0.0 ||| {flag}\n")
                continue
            for doc, score in ml.matches:
                handle.write(
                    f"{ml.sent_id} ||| {doc.caption_id} ||| {score!r}"
                    f" ||| {flag}\n"
                )


def read_matchlists(path, coll: Collection, mode: str = "txt") -> list[MatchList]:
    """Read a match dump back, resolving caption ids against coll."""
    lists: list[MatchList] = []
    done: set[str] = set()
    cur: MatchList | None = None
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(" ||| ")
            if len(parts) != 4:
                raise ValueError(
                    f"{path}:{lineno}: expected 4 |||-separated fields"
                )
            sent_id, caption_id, score_str, flag_str = parts
            try:
                score = float(score_str)
                flag = bool(int(flag_str))
            except ValueError:
                raise ValueError(
                    f"{path}:{lineno}: bad score or fallback flag"
                ) from None
            if cur is None or sent_id != cur.sent_id:
                if sent_id in done:
                    raise ValueError(
                        f"{path}:{lineno}: sentence {sent_id} not contiguous"
                    )
                if cur is not None:
                    lists.append(cur)
                    done.add(cur.sent_id)
                cur = MatchList(sent_id, [], flag, mode)
            if caption_id != "-":
                try:
                    doc = coll.docs[coll.index_of(caption_id)]
                except KeyError:
                    raise ValueError(
                        f"{path}:{lineno}: unknown caption_id {caption_id!r}"
                    ) from None
                cur.matches.append((doc, score))
    if cur is not None:
        lists.append(cur)
    return lists


def read_queries(path) -> dict[str, Query]:
    """Read per-sentence query metadata.

    Format: ``sent_id<TAB>image_id[<TAB>cat1,cat2]`` with ``-`` standing
    for a missing image id.
    """
    queries: dict[str, Query] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) not in (2, 3):
                raise ValueError(
                    f"{path}:{lineno}: expected 2 or 3 tab-separated fields"
                )
            sent_id = fields[0]
            if sent_id in queries:
                raise ValueError(
                    f"{path}:{lineno}: duplicate sent_id {sent_id!r}"
                )
            image_id = fields[1] if fields[1] != "-" else None
            categories: frozenset[str] | None = None
            if len(fields) == 3:
                labels = frozenset(c for c in fields[2].split(",") if c)
                categories = labels or None
            queries[sent_id] = Query(sent_id, image_id, categories)
    return queries
