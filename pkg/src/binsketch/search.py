"""Exact top-k similarity search over program embeddings.

The index is a flat scan: every query is scored against every repository
entry (Jaccard for structural bit-vectors, cosine for semantic vectors)
and the top k survive. No approximation, no pruning; ranking ties break
toward the lexicographically smaller program id so results are stable.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import SemanticEmbedding, StructuralEmbedding
from .errors import ConfigError, ParseError, ValidationError
from .structural import jaccard_many, pack_rows

Entry = tuple[str, StructuralEmbedding | SemanticEmbedding]


@dataclass(frozen=True)
class Hit:
    program_id: str
    score: float


@dataclass(eq=False)
class SearchResult:
    hits: list[Hit] = field(default_factory=list)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SearchResult):
            return NotImplemented
        return self.hits == other.hits


@dataclass(eq=False)
class Repository:
    """Flat in-memory index over one kind of embedding.

    ``kind`` is "structural" or "semantic" (None while empty). Structural
    entries are kept as a packed uint64 matrix with precomputed popcounts;
    semantic entries as unit-normalized float64 rows (zero vectors stay
    zero and score 0 against everything).
    """

    kind: str | None
    program_ids: list[str]
    ids_array: np.ndarray
    words: np.ndarray | None = None
    pops: np.ndarray | None = None
    m: int | None = None
    unit: np.ndarray | None = None
    d: int | None = None

    def __len__(self) -> int:
        return len(self.program_ids)


def build(entries: Sequence[Entry]) -> Repository:
    """Index a list of (program_id, embedding) pairs."""
    ids = [pid for pid, _ in entries]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate program_id in repository entries")
    ids_array = np.array(ids, dtype=np.str_) if ids else np.empty(0, dtype=np.str_)
    if not entries:
        return Repository(kind=None, program_ids=[], ids_array=ids_array)

    kinds = {type(emb) for _, emb in entries}
    if kinds == {StructuralEmbedding}:
        ms = {emb.m for _, emb in entries}
        if len(ms) > 1:
            raise ValidationError(f"mixed bit-vector lengths in repository: {sorted(ms)}")
        words, pops = pack_rows([emb for _, emb in entries])
        return Repository(
            kind="structural",
            program_ids=ids,
            ids_array=ids_array,
            words=words,
            pops=pops,
            m=ms.pop(),
        )
    if kinds == {SemanticEmbedding}:
        ds = {emb.d for _, emb in entries}
        if len(ds) > 1:
            raise ValidationError(f"mixed dimensions in repository: {sorted(ds)}")
        V = np.stack([emb.values for _, emb in entries]).astype(np.float64)
        norms = np.linalg.norm(V, axis=1)
        nonzero = norms > 0.0
        unit = np.divide(
            V, norms[:, np.newaxis], out=np.zeros_like(V), where=nonzero[:, np.newaxis]
        )
        return Repository(
            kind="semantic",
            program_ids=ids,
            ids_array=ids_array,
            unit=unit,
            d=ds.pop(),
        )
    raise ValidationError("repository entries mix structural and semantic embeddings")


def _scores(repo: Repository, query) -> np.ndarray:
    if repo.kind == "structural":
        if not isinstance(query, StructuralEmbedding):
            raise ValidationError("structural repository requires a structural query")
        if query.m != repo.m:
            raise ValidationError(f"query m={query.m} does not match repository m={repo.m}")
        return jaccard_many(query, repo.words, repo.pops)
    if repo.kind == "semantic":
        if not isinstance(query, SemanticEmbedding):
            raise ValidationError("semantic repository requires a semantic query")
        if query.d != repo.d:
            raise ValidationError(f"query d={query.d} does not match repository d={repo.d}")
        q = query.values.astype(np.float64)
        norm = np.linalg.norm(q)
        if norm == 0.0:
            return np.zeros(len(repo), dtype=np.float64)
        return repo.unit @ (q / norm)
    return np.empty(0, dtype=np.float64)


def search(repo: Repository, query, k: int) -> SearchResult:
    """Top-k entries by score, descending; ties by ascending program id."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if len(repo) == 0:
        return SearchResult()
    scores = _scores(repo, query)
    # Two stable passes: secondary key (id) first, primary key (score) second.
    by_id = np.argsort(repo.ids_array, kind="stable")
    order = by_id[np.argsort(-scores[by_id], kind="stable")]
    top = order[:k]
    hits = [Hit(repo.program_ids[i], float(scores[i])) for i in top]
    return SearchResult(hits=hits)


def batch_search(
    repo: Repository, queries: Sequence, k: int, workers: int = 1
) -> list[SearchResult]:
    """Run :func:`search` for each query; output order follows input order.

    Results are identical for any ``workers`` value, it only changes how
    many scans run concurrently.
    """
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    if workers == 1 or len(queries) <= 1:
        return [search(repo, q, k) for q in queries]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda q: search(repo, q, k), queries))


@dataclass(frozen=True)
class BenchReport:
    comparisons: int
    seconds: float
    per_second: float


def bench(repo: Repository, queries: Sequence, rounds: int = 1) -> BenchReport:
    """Time the scoring kernel (no ranking) over all query/entry pairs."""
    if len(repo) == 0 or not queries:
        raise ValidationError("bench needs a non-empty repository and at least one query")
    if rounds < 1:
        raise ConfigError(f"rounds must be >= 1, got {rounds}")
    comparisons = 0
    start = time.perf_counter()
    for _ in range(rounds):
        for q in queries:
            _scores(repo, q)
            comparisons += len(repo)
    elapsed = time.perf_counter() - start
    rate = comparisons / elapsed if elapsed > 0 else float("inf")
    return BenchReport(comparisons=comparisons, seconds=elapsed, per_second=rate)


def save_results(results: Sequence[tuple[str, SearchResult]], path: str) -> None:
    """Write ranked hits as query_id, rank, program_id, score rows (6dp)."""
    lines = []
    for query_id, result in results:
        for rank, hit in enumerate(result.hits, start=1):
            lines.append(f"{query_id}\t{rank}\t{hit.program_id}\t{hit.score:.6f}")
    with open(path, "wb") as fh:
        payload = "\n".join(lines)
        fh.write((payload + "\n").encode("utf-8") if lines else b"")


def load_results(path: str) -> list[tuple[str, list[tuple[str, float]]]]:
    """Read a results file back as (query_id, [(program_id, score), ...])."""
    with open(path, "rb") as fh:
        text = fh.read().decode("utf-8")
    raw = text.split("\n")
    if raw and raw[-1] == "":
        raw.pop()
    grouped: list[tuple[str, list[tuple[str, float]]]] = []
    seen: set[str] = set()
    for lineno, line in enumerate(raw, start=1):
        fields = line.split("\t")
        if len(fields) != 4:
            raise ParseError(f"expected 4 tab-separated fields, got {len(fields)}", lineno)
        query_id, rank_tok, program_id, score_tok = fields
        try:
            rank = int(rank_tok)
            score = float(score_tok)
        except ValueError:
            raise ParseError("rank or score is not numeric", lineno) from None
        if not grouped or grouped[-1][0] != query_id:
            if query_id in seen:
                raise ParseError(f"query {query_id!r} appears in two separate runs", lineno)
            seen.add(query_id)
            grouped.append((query_id, []))
        if rank != len(grouped[-1][1]) + 1:
            raise ParseError(f"rank {rank} out of sequence", lineno)
        grouped[-1][1].append((program_id, score))
    return grouped
