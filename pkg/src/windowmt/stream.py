"""Sliding-window stream translation and the column-merge vote.

Each window of source words is translated independently; output word j of
the window starting at source word t lands in column t+j.  A column's final
word is chosen by voting over 6-character prefix classes in the column and
its two neighbors: a class needs at least ``vote_threshold`` supporting
cells, one of them in the column itself.
"""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import Seq2SeqConfig, Seq2SeqParams, decode_greedy, encode
from .text import CharVocab, StreamDocument, word_windows

PREFIX_LEN = 6


def prefix_key(word: str, length: int = PREFIX_LEN) -> str:
    """First ``length`` Unicode scalar values (the whole word if shorter)."""
    if not word:
        raise ValueError("prefix_key of an empty word")
    return word[:length]


@dataclass
class WindowRow:
    start: int
    words: list[str]
    trace: np.ndarray | None = None


@dataclass
class WindowTable:
    n_columns: int
    rows: list[WindowRow]
    tgt_window: int = 5

    def cells(self) -> dict:
        """column index -> list of words stored in that column (all rows)."""
        out = defaultdict(list)
        for row in self.rows:
            for j, w in enumerate(row.words):
                if w:
                    out[row.start + j].append(w)
        return out

    def traces(self) -> np.ndarray:
        return np.stack([r.trace for r in self.rows])


@dataclass
class MergeEntry:
    column: int
    word: str
    votes: int


@dataclass
class MergedTranslation:
    entries: list[MergeEntry] = field(default_factory=list)


def translate_windows(doc, params: Seq2SeqParams, config: Seq2SeqConfig,
                      vocab: CharVocab, src_window: int = 6, tgt_window: int = 5,
                      stride: int = 1) -> WindowTable:
    """Translate every sliding window of the document into a column table.

    Accepts a StreamDocument or a plain word list.  The encoder's final
    hidden state is stored per row as the window's trace vector.
    """
    words = doc.words if isinstance(doc, StreamDocument) else list(doc)
    if not words:
        raise ValueError("cannot translate an empty document")
    rows = []
    for start, text in word_windows(words, src_window, stride, max_chars=config.max_len):
        enc = encode(params, config, vocab.encode(text))
        out_ids = decode_greedy(params, config, enc)
        out_words = vocab.decode(out_ids).split()
        rows.append(WindowRow(start, out_words[:tgt_window], enc.h.copy()))
    return WindowTable(n_columns=len(words), rows=rows, tgt_window=tgt_window)


def _representative(words_in_class) -> str:
    """Most frequent full form; ties to the shortest, then smallest."""
    wc = Counter(words_in_class)
    return min(wc, key=lambda w: (-wc[w], len(w), w))


def column_winners(table: WindowTable, vote_threshold: int = 2,
                   prefix_len: int = PREFIX_LEN) -> dict:
    """Pre-dedup vote winners: column -> (key, representative, votes)."""
    cells = table.cells()
    if not cells:
        return {}
    winners = {}
    for c in range(max(cells) + 1):
        neigh = cells.get(c - 1, []) + cells.get(c, []) + cells.get(c + 1, [])
        own = cells.get(c, [])
        if not own:
            continue
        counts = Counter(prefix_key(w, prefix_len) for w in neigh)
        own_counts = Counter(prefix_key(w, prefix_len) for w in own)
        candidates = [k for k, n in counts.items()
                      if n >= vote_threshold and own_counts.get(k, 0) >= 1]
        if not candidates:
            continue
        reps = {k: _representative([w for w in neigh if prefix_key(w, prefix_len) == k])
                for k in candidates}
        winner = min(candidates,
                     key=lambda k: (-counts[k], -own_counts[k], reps[k]))
        winners[c] = (winner, reps[winner], counts[winner])
    return winners


def merge_columns(table: WindowTable, vote_threshold: int = 2,
                  prefix_len: int = PREFIX_LEN) -> MergedTranslation:
    """Vote per column over prefix classes; a run of consecutive columns won
    by the same class is emitted once, at its leftmost column."""
    winners = column_winners(table, vote_threshold, prefix_len)
    entries = []
    prev_col = None
    prev_key = None
    for c in sorted(winners):
        key, rep, votes = winners[c]
        if prev_key == key and prev_col == c - 1:
            prev_col = c
            continue
        entries.append(MergeEntry(c, rep, votes))
        prev_col = c
        prev_key = key
    return MergedTranslation(entries)


def final_text(merged: MergedTranslation) -> str:
    return " ".join(e.word for e in merged.entries)


def save_table_tsv(table: WindowTable, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for row in table.rows:
            fh.write("\t".join([str(row.start)] + row.words) + "\n")
