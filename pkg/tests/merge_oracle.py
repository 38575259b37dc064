"""Brute-force reference for the column-merge vote, written independently
of the library implementation: explicit per-column multiset counting with
no shared helpers."""


def _key(word, prefix_len):
    return word[:prefix_len]


def _best_full_form(words):
    # most frequent full form; ties -> shortest, then lexicographically smallest
    tally = {}
    for w in words:
        tally[w] = tally.get(w, 0) + 1
    best = None
    for w, n in tally.items():
        cand = (-n, len(w), w)
        if best is None or cand < best:
            best = cand
    return best[2]


def brute_force_merge(rows, n_columns, vote_threshold=2, prefix_len=6):
    """rows: list of (start, [words]).  Returns [(column, word, votes)]."""
    columns = {}
    for start, words in rows:
        for j, w in enumerate(words):
            if w:
                columns.setdefault(start + j, []).append(w)
    max_col = max(columns) if columns else -1

    winners = {}
    for c in range(max_col + 1):
        own = columns.get(c, [])
        if not own:
            continue
        neigh = []
        for cc in (c - 1, c, c + 1):
            neigh.extend(columns.get(cc, []))
        neigh_counts = {}
        for w in neigh:
            k = _key(w, prefix_len)
            neigh_counts[k] = neigh_counts.get(k, 0) + 1
        own_counts = {}
        for w in own:
            k = _key(w, prefix_len)
            own_counts[k] = own_counts.get(k, 0) + 1
        best = None
        for k, n in neigh_counts.items():
            if n < vote_threshold or k not in own_counts:
                continue
            rep = _best_full_form([w for w in neigh if _key(w, prefix_len) == k])
            cand = (-n, -own_counts[k], rep, k)
            if best is None or cand < best:
                best = cand
        if best is not None:
            winners[c] = (best[3], best[2], -best[0])

    merged = []
    last_col = None
    last_key = None
    for c in sorted(winners):
        k, rep, votes = winners[c]
        if last_key == k and last_col == c - 1:
            last_col = c
            continue
        merged.append((c, rep, votes))
        last_col = c
        last_key = k
    return merged


def random_table(rng, max_columns=12, alphabet="abcde"):
    """Random window-table rows over a small alphabet, mirroring the fuzz
    setup used for the merge-agreement check."""
    n_columns = int(rng.integers(1, max_columns + 1))
    n_rows = int(rng.integers(1, 9))
    rows = []
    for _ in range(n_rows):
        start = int(rng.integers(0, n_columns))
        n_words = int(rng.integers(0, 6))
        words = ["".join(rng.choice(list(alphabet), size=int(rng.integers(1, 11))))
                 for _ in range(n_words)]
        rows.append((start, words))
    return n_columns, rows
