"""Relevance, average precision, MAP and precision-recall curves for Hamming ranking."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core_types import CodeTable
from .retrieval import HammingIndex, rank_positions


def relevance(query_labels, item_labels) -> int:
    """1 when the two category sets share at least one category."""
    return int(not frozenset(query_labels).isdisjoint(item_labels))


def average_precision(flags: Sequence[int]) -> float:
    """Mean of precision@p over relevant positions p; 0 when nothing is relevant."""
    f = np.asarray(flags, dtype=np.float64).ravel()
    n_rel = f.sum()
    if n_rel == 0:
        return 0.0
    prec = np.cumsum(f) / np.arange(1, f.size + 1)
    return float((prec * f).sum() / n_rel)


@dataclass
class EvalReport:
    map: float
    ap: np.ndarray
    pr_curve: list[tuple[float, float]]
    n_queries: int
    n_database: int
    bits: int
    top_r: int | None = None
    extra: dict = field(default_factory=dict)

    def lines(self) -> list[str]:
        out = [f"{self.map:.17g} {self.n_queries} {self.n_database} {self.bits}"]
        out.extend(f"{r:.17g} {p:.17g}" for r, p in self.pr_curve)
        return out

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self.lines()) + "\n")


def load_report_header(path) -> tuple[float, int, int, int, list[tuple[float, float]]]:
    lines = Path(path).read_text().splitlines()
    m, nq, ndb, b = lines[0].split()
    pts = [tuple(float(v) for v in ln.split()) for ln in lines[1:] if ln.strip()]
    return float(m), int(nq), int(ndb), int(b), pts


def _label_matrix(labels: Sequence[frozenset], n_classes: int) -> np.ndarray:
    m = np.zeros((len(labels), n_classes), dtype=np.float64)
    for r, labs in enumerate(labels):
        m[r, list(labs)] = 1.0
    return m


def relevance_matrix(query_labels, db_labels) -> np.ndarray:
    n_classes = 1 + max((max(l) for l in list(query_labels) + list(db_labels) if l), default=-1)
    if n_classes == 0:
        return np.zeros((len(query_labels), len(db_labels)), dtype=bool)
    qa = _label_matrix([frozenset(l) for l in query_labels], n_classes)
    da = _label_matrix([frozenset(l) for l in db_labels], n_classes)
    return (qa @ da.T) > 0


def _ranked_relevance(queries: CodeTable, query_labels, index: HammingIndex, db_labels):
    if len(queries) == 0:
        raise ValueError("no queries to evaluate")
    if queries.bits != index.codes.bits:
        raise ValueError(f"code widths differ: {queries.bits} vs {index.codes.bits} bits")
    if len(query_labels) != len(queries):
        raise ValueError(f"{len(queries)} query codes but {len(query_labels)} label sets")
    if len(db_labels) != len(index):
        raise ValueError(f"{len(index)} database codes but {len(db_labels)} label sets")
    order, _ = rank_positions(queries, index)
    rel = relevance_matrix(query_labels, db_labels)
    return np.take_along_axis(rel, order, axis=1).astype(np.float64)


def _ap_rows(ranked: np.ndarray, top_r: int | None) -> np.ndarray:
    if top_r is not None:
        ranked = ranked[:, :top_r]
    hits = np.cumsum(ranked, axis=1)
    prec = hits / np.arange(1, ranked.shape[1] + 1)
    n_rel = ranked.sum(axis=1)
    num = (prec * ranked).sum(axis=1)
    return np.divide(num, n_rel, out=np.zeros_like(num), where=n_rel > 0)


def _pr_points(ranked: np.ndarray) -> list[tuple[float, float]]:
    hits = np.cumsum(ranked, axis=1)
    prec = hits / np.arange(1, ranked.shape[1] + 1)
    total = ranked.sum(axis=1, keepdims=True)
    rec = np.divide(hits, total, out=np.zeros_like(hits), where=total > 0)
    return list(zip(rec.mean(axis=0).tolist(), prec.mean(axis=0).tolist()))


def mean_average_precision(queries: CodeTable, query_labels, index: HammingIndex, db_labels,
                           top_r: int | None = None) -> EvalReport:
    """MAP over full Hamming rankings (or the first ``top_r`` positions).

    Queries with no relevant item count with AP = 0.
    """
    ranked = _ranked_relevance(queries, query_labels, index, db_labels)
    ap = _ap_rows(ranked, top_r)
    return EvalReport(float(ap.mean()), ap, _pr_points(ranked), len(queries), len(index),
                      queries.bits, top_r)


def precision_recall_curve(queries: CodeTable, query_labels, index: HammingIndex,
                           db_labels) -> list[tuple[float, float]]:
    """Macro-averaged (recall@r, precision@r) for every cutoff r = 1..database size."""
    return _pr_points(_ranked_relevance(queries, query_labels, index, db_labels))
