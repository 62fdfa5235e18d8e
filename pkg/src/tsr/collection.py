"""Captioned-image collection: ingest, inverted index, image features.

A collection is a list of caption documents, each tying a caption (one
pre-tokenized target-language sentence) to an image id and, optionally,
to a set of object-category labels. The collection file format is one
record per line:

    caption_id<TAB>image_id<TAB>token token ...<TAB>cat1,cat2

with the fourth field optional. Feature files carry one image embedding
per line as ``image_id<TAB>f1 f2 ... fD`` with a constant D per file.

Indexing builds a docs-by-terms type-incidence matrix in CSR form, so
retrieval can score the whole collection with one sparse matrix-vector
product. Postings are derived from the CSC view and are always sorted
by ascending doc index; term ids are assigned in a deterministic order
(sorted within each doc, docs in file order) so that score accumulation
order, and therefore every output byte, is reproducible across runs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CaptionDoc:
    """One caption of one image, with optional category annotations."""

    caption_id: str
    image_id: str
    tokens: tuple[str, ...]
    categories: frozenset[str] | None = None


class Collection:
    """Immutable indexed collection of caption documents.

    Safe for concurrent reads; all derived structures are built once in
    the constructor.
    """

    def __init__(self, docs: Sequence[CaptionDoc]):
        self.docs = list(docs)
        n = len(self.docs)

        self._id_index: dict[str, int] = {}
        for i, doc in enumerate(self.docs):
            if doc.caption_id in self._id_index:
                raise ValueError(f"duplicate caption_id {doc.caption_id!r}")
            if not doc.tokens:
                raise ValueError(f"empty caption {doc.caption_id!r}")
            if doc.categories is not None and not doc.categories:
                raise ValueError(
                    f"empty category set on caption {doc.caption_id!r}"
                )
            self._id_index[doc.caption_id] = i

        # Type-incidence matrix: one row per doc, one column per term,
        # entry 1.0 where the term is a type of the doc. Term ids are
        # assigned on first appearance, iterating each doc's types in
        # sorted order, which fixes the accumulation order of sparse
        # matvec products independent of hash seeds.
        vocab: dict[str, int] = {}
        indices: list[int] = []
        indptr = [0]
        type_counts = np.empty(n, dtype=np.float64)
        token_counts = np.empty(n, dtype=np.int64)
        for i, doc in enumerate(self.docs):
            cols = [
                vocab.setdefault(term, len(vocab))
                for term in sorted(set(doc.tokens))
            ]
            cols.sort()
            indices.extend(cols)
            indptr.append(len(indices))
            type_counts[i] = len(cols)
            token_counts[i] = len(doc.tokens)
        self.vocab = vocab
        self.matrix = sparse.csr_matrix(
            (
                np.ones(len(indices), dtype=np.float64),
                np.asarray(indices, dtype=np.int64),
                np.asarray(indptr, dtype=np.int64),
            ),
            shape=(n, len(vocab)),
        )
        self._csc = self.matrix.tocsc()
        self._csc.sort_indices()
        self.type_counts = type_counts
        self.token_counts = token_counts

        groups: dict[str, list[int]] = {}
        for i, doc in enumerate(self.docs):
            groups.setdefault(doc.image_id, []).append(i)
        self.by_image = {
            img: np.asarray(ix, dtype=np.int64) for img, ix in groups.items()
        }

        # Rank of each doc's caption_id in lexicographic order, used as
        # the deterministic tie-break key when scores are equal.
        order = sorted(range(n), key=lambda i: self.docs[i].caption_id)
        rank = np.empty(n, dtype=np.int64)
        for pos, i in enumerate(order):
            rank[i] = pos
        self.caption_rank = rank

        # Category sets mapped to small group ids; -1 marks docs with
        # no annotations (they can never satisfy a strict-equality gate).
        self._cat_groups: dict[frozenset[str], int] = {}
        cat_group = np.full(n, -1, dtype=np.int64)
        for i, doc in enumerate(self.docs):
            if doc.categories is not None:
                gid = self._cat_groups.setdefault(
                    doc.categories, len(self._cat_groups)
                )
                cat_group[i] = gid
        self.cat_group = cat_group

    def __len__(self) -> int:
        return len(self.docs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Collection):
            return NotImplemented
        return self.docs == other.docs

    def __repr__(self) -> str:
        return (
            f"Collection(docs={len(self.docs)}, images={len(self.by_image)},"
            f" terms={len(self.vocab)})"
        )

    def index_of(self, caption_id: str) -> int:
        """Doc index of a caption_id; KeyError if unknown."""
        return self._id_index[caption_id]

    def postings(self, term: str) -> np.ndarray:
        """Doc indices containing term as a type, ascending. Read-only view."""
        tid = self.vocab.get(term)
        if tid is None:
            return np.empty(0, dtype=self._csc.indices.dtype)
        start, end = self._csc.indptr[tid], self._csc.indptr[tid + 1]
        return self._csc.indices[start:end]

    def category_group(self, categories: Iterable[str]) -> int | None:
        """Group id of an exact category set; None if no doc carries it."""
        return self._cat_groups.get(frozenset(categories))


def candidates_for(coll: Collection, query_terms: Iterable[str]) -> set[int]:
    """Indices of docs whose type set intersects query_terms.

    Every doc outside this set has no term in common with the query and
    therefore scores zero under all scoring modes.
    """
    arrays = [coll.postings(t) for t in set(query_terms)]
    arrays = [a for a in arrays if a.size]
    if not arrays:
        return set()
    return set(int(i) for i in np.unique(np.concatenate(arrays)))


def parse_caption_record(line: str, lineno: int | None = None) -> CaptionDoc:
    """Parse one collection-file record."""
    where = f"line {lineno}: " if lineno is not None else ""
    fields = line.rstrip("\n").split("\t")
    if len(fields) not in (3, 4):
        raise ValueError(
            f"{where}expected 3 or 4 tab-separated fields, got {len(fields)}"
        )
    caption_id, image_id = fields[0], fields[1]
    if not caption_id or not image_id:
        raise ValueError(f"{where}empty caption_id or image_id")
    tokens = tuple(fields[2].split())
    categories: frozenset[str] | None = None
    if len(fields) == 4:
        labels = frozenset(c for c in fields[3].split(",") if c)
        categories = labels or None
    return CaptionDoc(caption_id, image_id, tokens, categories)


def ingest_collection(
    lines: Iterable[str], skip_empty: bool = False
) -> Collection:
    """Build a Collection from an iterable of record lines.

    Records with empty captions are rejected (the scorers normalize by
    type count, which an empty caption would make undefined) unless
    skip_empty is set, in which case they are dropped with a warning.
    """
    docs: list[CaptionDoc] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        doc = parse_caption_record(line, lineno)
        if not doc.tokens:
            if skip_empty:
                log.warning(
                    "line %d: skipping empty caption %r",
                    lineno,
                    doc.caption_id,
                )
                continue
            raise ValueError(
                f"line {lineno}: empty caption {doc.caption_id!r}"
            )
        if doc.caption_id in seen:
            raise ValueError(
                f"line {lineno}: duplicate caption_id {doc.caption_id!r}"
            )
        seen.add(doc.caption_id)
        docs.append(doc)
    return Collection(docs)


def load_collection(path, skip_empty: bool = False) -> Collection:
    with open(path, encoding="utf-8") as handle:
        return ingest_collection(handle, skip_empty=skip_empty)


def save_collection(coll: Collection, path) -> None:
    """Persist a collection in the record format read by load_collection.

    Loading the result reproduces an equal Collection with bit-stable
    postings order.
    """
    with open(path, "w", encoding="utf-8") as handle:
        for doc in coll.docs:
            fields = [doc.caption_id, doc.image_id, " ".join(doc.tokens)]
            if doc.categories is not None:
                fields.append(",".join(sorted(doc.categories)))
            handle.write("\t".join(fields) + "\n")


class FeatureStore:
    """Dense image embeddings keyed by image id.

    Vectors are stored as float32; distance computations upcast to
    float64 so accumulation error does not depend on summation order.
    """

    def __init__(self, vectors: dict[str, Sequence[float]] | None = None):
        vectors = vectors or {}
        self.ids = list(vectors)
        self._row = {img: i for i, img in enumerate(self.ids)}
        if vectors:
            with np.errstate(over="ignore"):
                rows = [
                    np.asarray(v, dtype=np.float32) for v in vectors.values()
                ]
            dims = {r.shape for r in rows}
            if len(dims) > 1 or rows[0].ndim != 1 or rows[0].size == 0:
                raise ValueError("feature vectors must share one dimension")
            self.matrix = np.vstack(rows)
            self.dim: int | None = self.matrix.shape[1]
            if not np.all(np.isfinite(self.matrix)):
                bad = self.ids[
                    int(np.argwhere(~np.isfinite(self.matrix))[0][0])
                ]
                raise ValueError(f"non-finite feature component for {bad!r}")
        else:
            self.matrix = np.empty((0, 0), dtype=np.float32)
            self.dim = None

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._row

    def row_of(self, image_id: str) -> int | None:
        return self._row.get(image_id)

    def vector(self, image_id: str) -> np.ndarray:
        """Stored float32 vector; KeyError if the image has none."""
        return self.matrix[self._row[image_id]]


def load_features(path, expected_dim: int | None = None) -> FeatureStore:
    """Read a feature file into a FeatureStore.

    Raises on ragged vector lengths, non-finite components, repeated
    image ids, or a dimension differing from expected_dim.
    """
    vectors: dict[str, list[float]] = {}
    dim: int | None = None
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise ValueError(
                    f"{path}:{lineno}: expected image_id<TAB>components"
                )
            image_id, rest = parts
            if image_id in vectors:
                raise ValueError(
                    f"{path}:{lineno}: repeated image_id {image_id!r}"
                )
            try:
                vec = [float(x) for x in rest.split()]
            except ValueError:
                raise ValueError(
                    f"{path}:{lineno}: non-numeric feature component"
                ) from None
            if not vec:
                raise ValueError(f"{path}:{lineno}: empty feature vector")
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise ValueError(
                    f"{path}:{lineno}: vector length {len(vec)} != {dim}"
                )
            vectors[image_id] = vec
    if expected_dim is not None and dim is not None and dim != expected_dim:
        raise ValueError(
            f"{path}: feature dimension {dim} != expected {expected_dim}"
        )
    return FeatureStore(vectors)
