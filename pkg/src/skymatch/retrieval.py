"""Gallery indexing, cosine ranking, and retrieval metrics (Recall@K, mAP).

Embeddings are L2-normalized at index build time and scored by inner product
(cosine). Ranking ties break by ascending id so results are deterministic.
Average precision uses the standard multi-positive retrieval formulation:
AP = (1/P) * sum over positive ranks r of (positives at ranks <= r) / r.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import Vector, ensure_vector

VIEWS = ("drone", "satellite", "ground", "other")


@dataclass(frozen=True, eq=False)
class GalleryEntry:
    """One embedded image: id, class label (building id), view, embedding."""

    id: str
    class_label: str
    view: str
    embedding: np.ndarray

    def __post_init__(self):
        if not self.id:
            raise ValueError("entry id must be non-empty")
        if not self.class_label:
            raise ValueError("class label must be non-empty")
        if self.view not in VIEWS:
            raise ValueError(f"view must be one of {VIEWS}")
        emb = ensure_vector(self.embedding).copy()
        emb.setflags(write=False)
        object.__setattr__(self, "embedding", emb)


@dataclass(frozen=True, eq=False)
class GalleryIndex:
    """An immutable gallery with unit-norm embeddings, ready for ranking."""

    ids: tuple[str, ...]
    labels: tuple[str, ...]
    views: tuple[str, ...]
    matrix: np.ndarray  # (N, D) float64, rows unit L2 norm
    _id_rank: np.ndarray = field(repr=False)  # tie-break key: rank in sorted id order
    _row_of: dict = field(repr=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.ids)


def build_index(entries: Iterable[GalleryEntry]) -> GalleryIndex:
    """L2-normalize and freeze a gallery; rejects dim mismatches, zero vectors
    and duplicate ids."""
    entries = list(entries)
    if not entries:
        raise ValueError("cannot build an index from zero entries")
    dim = entries[0].embedding.shape[0]
    seen: dict[str, int] = {}
    rows = np.empty((len(entries), dim), dtype=np.float64)
    for i, e in enumerate(entries):
        if e.embedding.shape[0] != dim:
            raise ValueError(
                f"embedding dim mismatch: entry {e.id!r} has {e.embedding.shape[0]}, expected {dim}"
            )
        if e.id in seen:
            raise ValueError(f"duplicate entry id {e.id!r}")
        seen[e.id] = i
        norm = float(np.linalg.norm(e.embedding))
        if norm == 0.0:
            raise ValueError(f"zero-norm embedding for entry {e.id!r}")
        rows[i] = e.embedding / norm
    rows.setflags(write=False)
    order = sorted(range(len(entries)), key=lambda i: entries[i].id)
    id_rank = np.empty(len(entries), dtype=np.int64)
    for r, i in enumerate(order):
        id_rank[i] = r
    id_rank.setflags(write=False)
    return GalleryIndex(
        ids=tuple(e.id for e in entries),
        labels=tuple(e.class_label for e in entries),
        views=tuple(e.view for e in entries),
        matrix=rows,
        _id_rank=id_rank,
        _row_of=seen,
    )


def _ranked_rows(
    query: Vector, index: GalleryIndex, exclude_id: str | None
) -> tuple[np.ndarray, np.ndarray]:
    q = ensure_vector(query, dim=index.dim)
    norm = float(np.linalg.norm(q))
    if norm == 0.0:
        raise ValueError("zero-norm query vector")
    scores = index.matrix @ (q / norm)
    # lexsort: primary key (-score) ascending = score descending, ties by id
    order = np.lexsort((index._id_rank, -scores))
    if exclude_id is not None and exclude_id in index._row_of:
        order = order[order != index._row_of[exclude_id]]
    return order, scores


def rank(query: Vector, index: GalleryIndex, exclude_id: str | None = None) -> list[tuple[str, float]]:
    """Rank the gallery against a query: (id, cosine) pairs, best first."""
    order, scores = _ranked_rows(query, index, exclude_id)
    return [(index.ids[i], float(scores[i])) for i in order]


def recall_at_k(rankings: Sequence[Sequence[str]], truths: Sequence[str], k: int) -> float:
    """Percentage of queries whose top-K ranked class labels contain the truth.

    ``rankings[q]`` is query q's full gallery ranking as class labels. Queries
    whose class appears nowhere in their ranking are excluded (they have no
    retrievable positive); if none remain, that is an error.
    """
    if k < 1:
        raise ValueError("K must be >= 1")
    if len(rankings) != len(truths):
        raise ValueError("rankings and truths must have equal length")
    hits = 0
    evaluable = 0
    for labels, truth in zip(rankings, truths):
        if truth not in set(labels):
            continue
        evaluable += 1
        if truth in labels[:k]:
            hits += 1
    if evaluable == 0:
        raise ValueError("no evaluable queries")
    return hits / evaluable * 100.0


def average_precision(ranking: Sequence[str], positives: Iterable[str]) -> float:
    """AP of one ranked id list against a set of positive ids (fraction in [0, 1])."""
    positive_set = set(positives)
    if not positive_set:
        raise ValueError("average_precision requires at least one positive")
    found = 0
    acc = 0.0
    for r, item in enumerate(ranking, start=1):
        if item in positive_set:
            found += 1
            acc += found / r
    return acc / len(positive_set)


@dataclass(frozen=True)
class EvalReport:
    """Metrics for one query direction, as percentages."""

    direction: str
    recall_at: dict[int, float]
    mean_ap: float
    num_queries: int
    num_skipped: int = 0

    def __post_init__(self):
        ks = sorted(self.recall_at)
        vals = [self.recall_at[k] for k in ks]
        if any(not (0.0 <= v <= 100.0) for v in vals + [self.mean_ap]):
            raise ValueError("metric percentages must lie in [0, 100]")
        if any(a > b for a, b in zip(vals, vals[1:])):
            raise ValueError("recall must be nondecreasing in K")


def _direction(queries: Sequence[GalleryEntry], index: GalleryIndex) -> str:
    qviews = {q.view for q in queries}
    gviews = set(index.views)
    qv = qviews.pop() if len(qviews) == 1 else "mixed"
    gv = gviews.pop() if len(gviews) == 1 else "mixed"
    return f"{qv}->{gv}"


def evaluate(
    queries: Sequence[GalleryEntry],
    index: GalleryIndex,
    ks: Sequence[int] = (1, 5, 10),
) -> EvalReport:
    """Recall@K for each K and mean AP over all evaluable queries.

    A query's own id, if present in the gallery, is excluded from its
    ranking. Queries whose class has no gallery positive are skipped and
    counted in num_skipped; if every query is skipped, that is an error
    ("no evaluable queries").
    """
    if not queries:
        raise ValueError("no queries given")
    if not ks:
        raise ValueError("ks must be non-empty")
    per_query_labels: list[list[str]] = []
    truths: list[str] = []
    skipped = 0
    for q in queries:
        order, _ = _ranked_rows(q.embedding, index, exclude_id=q.id)
        labels = [index.labels[i] for i in order]
        if q.class_label not in set(labels):
            skipped += 1
            continue
        per_query_labels.append(labels)
        truths.append(q.class_label)
    if not per_query_labels:
        raise ValueError("no evaluable queries")
    n = len(per_query_labels)
    recalls = {}
    for k in ks:
        hits = sum(1 for labels, t in zip(per_query_labels, truths) if t in labels[:k])
        recalls[int(k)] = hits / n * 100.0
    ap_sum = 0.0
    for labels, t in zip(per_query_labels, truths):
        positive_ranks = [r for r, lab in enumerate(labels, start=1) if lab == t]
        total = len(positive_ranks)
        acc = 0.0
        for found, r in enumerate(positive_ranks, start=1):
            acc += found / r
        ap_sum += acc / total
    return EvalReport(
        direction=_direction(queries, index),
        recall_at=recalls,
        mean_ap=ap_sum / n * 100.0,
        num_queries=n,
        num_skipped=skipped,
    )


# ---------------------------------------------------------------------------
# Text serialization: entry files, report tables, key-value records
# ---------------------------------------------------------------------------

def write_entries(entries: Sequence[GalleryEntry], path) -> None:
    """One entry per line: id, class, view, comma-joined %.17g embedding."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for e in entries:
        vals = ",".join(f"{v:.17g}" for v in e.embedding)
        lines.append(f"{e.id}\t{e.class_label}\t{e.view}\t{vals}\n")
    path.write_text("".join(lines), encoding="utf-8")


def read_entries(path) -> list[GalleryEntry]:
    path = Path(path)
    entries = []
    for ln, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise ValueError(f"{path}:{ln}: expected 4 tab-separated fields")
        id_, label, view, vals = fields
        emb = np.array([float(v) for v in vals.split(",")], dtype=np.float64)
        entries.append(GalleryEntry(id=id_, class_label=label, view=view, embedding=emb))
    return entries


def format_report_table(
    reports: Sequence[tuple[str, EvalReport]],
    fingerprint: str | None = None,
) -> str:
    """Aligned text table, one row per (variant label, report)."""
    if not reports:
        raise ValueError("no reports to format")
    ks = sorted(reports[0][1].recall_at)
    header = ["variant", "direction"] + [f"R@{k}" for k in ks] + ["mAP", "queries", "skipped"]
    rows = [header]
    for label, rep in reports:
        rows.append(
            [label, rep.direction]
            + [f"{rep.recall_at[k]:.2f}" for k in ks]
            + [f"{rep.mean_ap:.2f}", str(rep.num_queries), str(rep.num_skipped)]
        )
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    out = []
    if fingerprint is not None:
        out.append(f"# config {fingerprint}")
    for r in rows:
        out.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    return "\n".join(out) + "\n"


def format_records(reports: Sequence[tuple[str, EvalReport]]) -> str:
    """Structured key-value records, one metric per line."""
    lines = []
    for label, rep in reports:
        prefix = f"variant={label} direction={rep.direction}"
        for k in sorted(rep.recall_at):
            lines.append(f"{prefix} metric=R@{k} value={rep.recall_at[k]:.6f}")
        lines.append(f"{prefix} metric=mAP value={rep.mean_ap:.6f}")
        lines.append(f"{prefix} metric=queries value={rep.num_queries}")
        lines.append(f"{prefix} metric=skipped value={rep.num_skipped}")
    return "\n".join(lines) + "\n"
