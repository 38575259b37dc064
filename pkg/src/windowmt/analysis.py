"""Trace-vector applications: document embeddings, storyline clustering,
nearest-neighbor search, and story boundary detection.

A document's vector is the L2-normalized sum of its per-window trace
vectors, so cosine similarity reduces to a dot product.  Boundary detection
scores each stream position by next-window prediction failure (NLL),
fused with pause and speaker-change signals as z-scores.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import Seq2SeqConfig, Seq2SeqParams, encode, sequence_nll
from .text import CharVocab, StreamDocument


@dataclass
class DocTrace:
    doc_id: str
    vectors: np.ndarray  # (n_windows, hidden)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors)
        if self.vectors.ndim != 2 or self.vectors.shape[0] == 0:
            raise ValueError("trace must be a non-empty (n, d) array")


@dataclass
class DocVector:
    doc_id: str
    vec: np.ndarray  # unit length

    def __post_init__(self):
        self.vec = np.asarray(self.vec, dtype=np.float64)


def doc_vector(trace: DocTrace) -> DocVector:
    """L2-normalized componentwise sum of the trace vectors."""
    s = trace.vectors.astype(np.float64).sum(axis=0)
    norm = float(np.linalg.norm(s))
    if norm < 1e-12:
        raise ValueError(f"degenerate document {trace.doc_id!r}: zero-norm trace sum")
    return DocVector(trace.doc_id, s / norm)


def cosine(a: DocVector, b: DocVector) -> float:
    if a.vec.shape != b.vec.shape:
        raise ValueError(f"dimension mismatch: {a.vec.shape} vs {b.vec.shape}")
    return float(np.clip(np.dot(a.vec, b.vec), -1.0, 1.0))


@dataclass
class ClusterResult:
    k: int
    assignments: np.ndarray
    centroids: np.ndarray  # unit rows
    inertia: float
    inertia_history: list = field(default_factory=list)


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / np.maximum(norms, 1e-12)


def kmeans(vectors, k: int, seed: int = 0, max_iter: int = 100) -> ClusterResult:
    """Spherical k-means with k-means++ seeding; deterministic per seed.

    Centroids are normalized means; a centroid whose cluster empties (or
    sums to zero) is re-seeded from the point farthest from its centroid.
    """
    if vectors and isinstance(vectors[0], DocVector):
        x = np.stack([v.vec for v in vectors])
    else:
        x = np.asarray(vectors, dtype=np.float64)
    n = x.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k={k} must be in [1, {n}]")
    x = _unit_rows(x)
    rng = np.random.default_rng(seed)

    # k-means++ on cosine distance
    cents = [x[int(rng.integers(n))]]
    while len(cents) < k:
        sims = x @ np.stack(cents).T
        d = np.clip(1.0 - sims.max(axis=1), 0.0, None)
        total = d.sum()
        if total <= 0:
            probs = np.full(n, 1.0 / n)
        else:
            probs = d / total
        cents.append(x[int(rng.choice(n, p=probs))])
    c = np.stack(cents)

    assign = np.argmax(x @ c.T, axis=1)
    history = []
    for _ in range(max_iter):
        for j in range(k):
            members = x[assign == j]
            if len(members):
                m = members.sum(axis=0)
                norm = np.linalg.norm(m)
            else:
                norm = 0.0
            if norm < 1e-12:
                dist = 1.0 - (x * c[assign]).sum(axis=1)
                c[j] = x[int(np.argmax(dist))]
            else:
                c[j] = m / norm
        new_assign = np.argmax(x @ c.T, axis=1)
        history.append(float((1.0 - (x * c[new_assign]).sum(axis=1)).sum()))
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    inertia = float((1.0 - (x * c[assign]).sum(axis=1)).sum())
    return ClusterResult(k, assign, c, inertia, history)


def purity(assignments, labels) -> float:
    """Fraction of items whose cluster's majority label matches their own."""
    assignments = np.asarray(assignments)
    labels = np.asarray(labels)
    correct = 0
    for cluster in np.unique(assignments):
        member_labels = labels[assignments == cluster]
        _, counts = np.unique(member_labels, return_counts=True)
        correct += int(counts.max())
    return correct / len(labels)


def nearest_neighbors(query: DocVector, pool, top_k: int):
    """Top-k pool entries by descending cosine; ties break by ascending id."""
    if top_k < 1:
        raise ValueError("top_k must be at least 1")
    pool = list(pool)
    if not pool:
        raise ValueError("pool must be non-empty")
    scored = [(v.doc_id, cosine(query, v)) for v in pool]
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored[:top_k]


def next_window_nll(doc: StreamDocument, params: Seq2SeqParams,
                    config: Seq2SeqConfig, vocab: CharVocab,
                    window: int = 5) -> list[tuple[int, float]]:
    """Per-position NLL of predicting the next ``window`` words from the
    current ones.  Positions index the first word of the predicted window."""
    words = doc.words
    n = len(words)
    if n < 2 * window:
        raise ValueError(f"document too short: {n} words, need at least {2 * window}")
    out = []
    for t in range(n - 2 * window + 1):
        src = " ".join(words[t:t + window])[:config.max_len]
        tgt = " ".join(words[t + window:t + 2 * window])[:config.max_len]
        enc = encode(params, config, vocab.encode(src))
        nll = sequence_nll(params, config, enc, vocab.encode(tgt))
        out.append((t + window, nll))
    return out


@dataclass
class BoundarySignal:
    position: int
    nll_z: float
    pause_z: float
    speaker_change: float
    combined: float


def _zscores(values: np.ndarray) -> np.ndarray:
    std = float(values.std())  # population std
    if std < 1e-12:
        return np.zeros_like(values)
    return (values - values.mean()) / std


def detect_boundaries(positions, nll, pauses=None, speaker_changes=None, *,
                      alpha: float = 1.0, beta: float = 0.5, gamma: float = 1.0,
                      z_threshold: float = 2.0, min_gap: int = 5):
    """Fuse signals and pick boundary positions.

    z-scores are computed over the whole document; positions with combined
    score above the threshold are kept greedily by descending score, with
    anything within ``min_gap`` words of a kept boundary suppressed.
    Missing pause values get pause_z = 0.  Returns (signals, boundaries).
    """
    positions = list(positions)
    if len(positions) < 3:
        raise ValueError("at least 3 signal positions are required")
    if min(alpha, beta, gamma) < 0:
        raise ValueError("fusion weights must be non-negative")
    nll_z = _zscores(np.asarray(nll, dtype=np.float64))

    pause_z = np.zeros(len(positions))
    if pauses is not None:
        present = [i for i, p in enumerate(pauses) if p is not None]
        if len(present) >= 2:
            vals = np.asarray([pauses[i] for i in present], dtype=np.float64)
            z = _zscores(vals)
            for zi, i in zip(z, present):
                pause_z[i] = zi

    spk = np.zeros(len(positions))
    if speaker_changes is not None:
        spk = np.asarray(speaker_changes, dtype=np.float64)

    combined = alpha * nll_z + beta * pause_z + gamma * spk
    signals = [BoundarySignal(p, float(nz), float(pz), float(s), float(cb))
               for p, nz, pz, s, cb in zip(positions, nll_z, pause_z, spk, combined)]

    candidates = sorted((s for s in signals if s.combined > z_threshold),
                        key=lambda s: (-s.combined, s.position))
    kept: list[int] = []
    for s in candidates:
        if all(abs(s.position - p) >= min_gap for p in kept):
            kept.append(s.position)
    return signals, sorted(kept)


def pause_before(doc: StreamDocument, position: int) -> float | None:
    """Silence between the previous token's end and this token's start."""
    if position <= 0 or position >= len(doc.tokens):
        return None
    prev, cur = doc.tokens[position - 1], doc.tokens[position]
    if prev.end is None or cur.start is None:
        return None
    return cur.start - prev.end


def speaker_changed(doc: StreamDocument, position: int) -> int:
    if position <= 0 or position >= len(doc.tokens):
        return 0
    prev, cur = doc.tokens[position - 1], doc.tokens[position]
    if prev.speaker is None or cur.speaker is None:
        return 0
    return int(prev.speaker != cur.speaker)


def segment_document(doc: StreamDocument, params: Seq2SeqParams,
                     config: Seq2SeqConfig, vocab: CharVocab, window: int = 5,
                     **fusion):
    """Score every position of one stream and detect story boundaries."""
    scored = next_window_nll(doc, params, config, vocab, window)
    positions = [p for p, _ in scored]
    nlls = [v for _, v in scored]
    pauses = [pause_before(doc, p) for p in positions]
    speakers = [speaker_changed(doc, p) for p in positions]
    return detect_boundaries(positions, nlls, pauses, speakers, **fusion)


# --- TSV exports ------------------------------------------------------------

def save_vectors_tsv(vectors, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for v in vectors:
            fh.write(v.doc_id + "\t" + "\t".join(f"{x:.8e}" for x in v.vec) + "\n")


def load_vectors_tsv(path) -> list[DocVector]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        fields = line.split("\t")
        out.append(DocVector(fields[0], np.array([float(x) for x in fields[1:]])))
    return out


def save_clusters_tsv(doc_ids, assignments, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for doc_id, cluster in zip(doc_ids, assignments):
            fh.write(f"{doc_id}\t{int(cluster)}\n")


def save_boundaries_tsv(rows, path) -> None:
    """Rows of (doc_id, word_index, combined_score)."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for doc_id, idx, score in rows:
            fh.write(f"{doc_id}\t{int(idx)}\t{score:.6f}\n")
