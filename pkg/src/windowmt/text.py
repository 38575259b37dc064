"""Character vocabulary, corpus ingestion, word windows and synthetic corpora.

The vocabulary is frequency-capped (top-N characters over all corpora) with
four reserved control symbols.  One global vocabulary is shared by every
language and both sides of every task, so that all models operate in a common
symbol space.
"""
from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

PAD, GO, EOS, UNK = 0, 1, 2, 3
CONTROL_TOKENS = ["<PAD>", "<GO>", "<EOS>", "<UNK>"]
N_CONTROLS = 4

# Suffix set used by the inflecting synthetic language; lemmas are at least
# 6 characters long, so all inflected variants of a lemma share their first 6.
INFLECTION_SUFFIXES = ["a", "as", "am", "iem"]


@dataclass
class CharVocab:
    """Ordered symbol inventory: 4 controls followed by content characters."""

    symbols: list[str]

    def __post_init__(self):
        if self.symbols[:N_CONTROLS] != CONTROL_TOKENS:
            raise ValueError("vocabulary must start with the 4 control symbols")
        self._char_to_id = {ch: i for i, ch in enumerate(self.symbols) if i >= N_CONTROLS}

    @property
    def size(self) -> int:
        return len(self.symbols)

    def encode(self, s: str, append_eos: bool = False) -> list[int]:
        ids = [self._char_to_id.get(ch, UNK) for ch in s]
        if append_eos:
            ids.append(EOS)
        return ids

    def decode(self, ids) -> str:
        out = []
        for i in ids:
            if i < 0 or i >= self.size:
                raise IndexError(f"symbol id {i} out of range for vocabulary of {self.size}")
            if i == EOS:
                break
            if i in (PAD, GO):
                continue
            out.append("\N{REPLACEMENT CHARACTER}" if i == UNK else self.symbols[i])
        return "".join(out)

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self.symbols) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "CharVocab":
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines = lines[:-1]
        return cls(lines)


def build_vocab(corpora, cap: int) -> CharVocab:
    """Top ``cap`` characters by frequency over all input strings.

    Ties break by ascending codepoint; the 4 control symbols are prepended.
    """
    if cap < 1:
        raise ValueError("cap must be at least 1")
    corpora = list(corpora)
    if not corpora:
        raise ValueError("at least one corpus string required")
    counts = Counter()
    for s in corpora:
        counts.update(s)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:cap]
    return CharVocab(CONTROL_TOKENS + [ch for ch, _ in ranked])


def encode_chars(v: CharVocab, s: str, append_eos: bool = False) -> list[int]:
    return v.encode(s, append_eos)


def decode_chars(v: CharVocab, ids) -> str:
    return v.decode(ids)


@dataclass
class ParallelCorpus:
    pairs: list[tuple[str, str]]
    label: str = ""
    truncate_chars: int | None = None
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.pairs)


def load_parallel(path, truncate_chars: int | None = None, label: str | None = None) -> ParallelCorpus:
    """Load a UTF-8 tab-separated parallel file.

    Extra tabs keep the first field as source and join the remainder back
    with tabs as target.  Lines with a missing or (post-truncation) empty
    side are skipped and counted.
    """
    path = Path(path)
    pairs: list[tuple[str, str]] = []
    skipped = 0
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            fields = line.split("\t")
            if len(fields) < 2:
                skipped += 1
                continue
            src, tgt = fields[0], "\t".join(fields[1:])
            if truncate_chars is not None:
                src, tgt = src[:truncate_chars], tgt[:truncate_chars]
            if not src or not tgt:
                skipped += 1
                continue
            pairs.append((src, tgt))
    return ParallelCorpus(pairs, label or path.stem, truncate_chars, skipped)


def save_parallel(corpus: ParallelCorpus, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for src, tgt in corpus.pairs:
            fh.write(f"{src}\t{tgt}\n")


@dataclass
class Token:
    word: str
    start: float | None = None
    end: float | None = None
    speaker: str | None = None


@dataclass
class StreamDocument:
    tokens: list[Token]
    doc_id: str = ""
    language: str = ""

    @property
    def words(self) -> list[str]:
        return [t.word for t in self.tokens]


def _fmt_time(t: float | None) -> str:
    return "" if t is None else f"{t:.3f}"


def save_stream_documents(docs, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for di, doc in enumerate(docs):
            if di:
                fh.write("\n")
            for tok in doc.tokens:
                fh.write(f"{tok.word}\t{_fmt_time(tok.start)}\t{_fmt_time(tok.end)}"
                         f"\t{tok.speaker or ''}\n")


def load_stream_documents(path, language: str = "") -> list[StreamDocument]:
    path = Path(path)
    docs: list[StreamDocument] = []
    tokens: list[Token] = []

    def flush():
        nonlocal tokens
        if tokens:
            docs.append(StreamDocument(tokens, f"{path.stem}#{len(docs)}", language))
            tokens = []

    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                flush()
                continue
            fields = (line.split("\t") + ["", "", ""])[:4]
            word, start, end, speaker = fields
            if not word:
                continue
            tokens.append(Token(word,
                                float(start) if start else None,
                                float(end) if end else None,
                                speaker or None))
    flush()
    return docs


def word_windows(words, window: int, stride: int = 1, max_chars: int = 100):
    """Overlapping word windows as (start, text) with text capped at max_chars.

    Starts advance by ``stride``; the last full-size window is always
    included.  Texts shorter than the window yield a single window.
    """
    if window < 1 or stride < 1:
        raise ValueError("window and stride must be at least 1")
    words = list(words)
    n = len(words)
    if n == 0:
        return []
    if n <= window:
        return [(0, " ".join(words)[:max_chars])]
    starts = list(range(0, n - window + 1, stride))
    if starts[-1] != n - window:
        starts.append(n - window)
    return [(s, " ".join(words[s:s + window])[:max_chars]) for s in starts]


_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


class SyntheticWorld:
    """Deterministic pseudo-language family for desk-scale experiments.

    A shared concept inventory is partitioned into topics; each language
    renders concepts through its own lexicon, so any two languages are
    related by a word-level bijection.  Inflected rendering appends one of
    four suffixes chosen by word position, keeping the lemma's first six
    characters intact.
    """

    def __init__(self, seed: int, lexicon_size: int = 60, n_topics: int = 4):
        if lexicon_size < 10:
            raise ValueError("lexicon_size must be at least 10")
        if n_topics < 1 or n_topics > lexicon_size:
            raise ValueError("n_topics must be in [1, lexicon_size]")
        self.seed = seed
        self.lexicon_size = lexicon_size
        self.n_topics = n_topics
        self._lexicons: dict[str, list[str]] = {}
        # contiguous concept slices per topic
        base, extra = divmod(lexicon_size, n_topics)
        self.topic_slices = []
        lo = 0
        for t in range(n_topics):
            hi = lo + base + (1 if t < extra else 0)
            self.topic_slices.append(range(lo, hi))
            lo = hi

    def lexicon(self, lang: str) -> list[str]:
        if lang not in self._lexicons:
            rng = random.Random(f"{self.seed}:lex:{lang}")
            words: list[str] = []
            prefixes: set[str] = set()
            while len(words) < self.lexicon_size:
                w = "".join(rng.choice(_CONSONANTS) + rng.choice(_VOWELS) for _ in range(3))
                if w[:6] in prefixes:
                    continue
                prefixes.add(w[:6])
                words.append(w)
            self._lexicons[lang] = words
        return self._lexicons[lang]

    def render(self, lang: str, concepts, inflect: bool = False) -> str:
        lex = self.lexicon(lang)
        out = []
        for pos, cid in enumerate(concepts):
            w = lex[cid]
            if inflect:
                w += INFLECTION_SUFFIXES[pos % len(INFLECTION_SUFFIXES)]
            out.append(w)
        return " ".join(out)

    def sample_concepts(self, rng: random.Random, topic: int,
                        min_words: int = 4, max_words: int = 9) -> list[int]:
        pool = self.topic_slices[topic]
        n = rng.randint(min_words, max_words)
        return [rng.choice(pool) for _ in range(n)]

    def concept_sentences(self, n_sentences: int, seed, min_words: int = 4,
                          max_words: int = 9) -> list[tuple[int, list[int]]]:
        """Topic-balanced (topic, concepts) sentences, round-robin over topics."""
        rng = random.Random(f"{self.seed}:sents:{seed}")
        return [(i % self.n_topics,
                 self.sample_concepts(rng, i % self.n_topics, min_words, max_words))
                for i in range(n_sentences)]

    def parallel_corpus(self, src_lang: str, tgt_lang: str, n_sentences: int,
                        seed=0, inflect_target: bool = False,
                        truncate: int | None = 100) -> ParallelCorpus:
        if n_sentences < 1:
            raise ValueError("n_sentences must be at least 1")
        pairs = []
        for _, concepts in self.concept_sentences(n_sentences, f"{seed}:{src_lang}:{tgt_lang}"):
            src = self.render(src_lang, concepts)
            tgt = self.render(tgt_lang, concepts, inflect=inflect_target)
            if truncate is not None:
                src, tgt = src[:truncate], tgt[:truncate]
            pairs.append((src, tgt))
        return ParallelCorpus(pairs, f"{src_lang}-{tgt_lang}", truncate)

    def stream_documents(self, lang: str, seed=0, docs_per_topic: int = 10,
                         min_words: int = 40, max_words: int = 80,
                         inflect: bool = False) -> list[StreamDocument]:
        """Single-topic documents with time codes and one speaker per document."""
        rng = random.Random(f"{self.seed}:docs:{lang}:{seed}")
        docs = []
        for topic in range(self.n_topics):
            for d in range(docs_per_topic):
                target = rng.randint(min_words, max_words)
                concepts: list[int] = []
                while len(concepts) < target:
                    concepts.extend(self.sample_concepts(rng, topic))
                concepts = concepts[:target]
                text = self.render(lang, concepts, inflect=inflect)
                speaker = f"spk-{lang}-{topic}-{d}"
                tokens = []
                t = 0.0
                for w in text.split(" "):
                    dur = rng.uniform(0.2, 0.4)
                    tokens.append(Token(w, round(t, 3), round(t + dur, 3), speaker))
                    t += dur + rng.uniform(0.03, 0.1)
                docs.append(StreamDocument(tokens, f"{lang}-t{topic}-d{d}", lang))
        return docs


def gen_synthetic_pair(seed: int, lexicon_size: int, n_sentences: int,
                       inflection: bool, n_topics: int = 4):
    """Deterministic synthetic language pair plus a pool of stream documents."""
    world = SyntheticWorld(seed, lexicon_size, n_topics)
    corpus = world.parallel_corpus("src", "tgt", n_sentences, seed,
                                   inflect_target=inflection)
    pool = world.stream_documents("src", seed)
    return corpus, pool


def concat_stories(stories, doc_id: str, pause: float = 2.0):
    """Concatenate single-story documents into one stream.

    Time codes are shifted so stories are separated by ``pause`` seconds;
    speakers are preserved per story.  Returns the stream plus the word
    indices where each new story starts.
    """
    tokens: list[Token] = []
    boundaries: list[int] = []
    t = 0.0
    for si, story in enumerate(stories):
        if si:
            boundaries.append(len(tokens))
        if story.tokens and story.tokens[0].start is not None:
            shift = t - story.tokens[0].start
            for tok in story.tokens:
                tokens.append(Token(tok.word,
                                    None if tok.start is None else round(tok.start + shift, 3),
                                    None if tok.end is None else round(tok.end + shift, 3),
                                    tok.speaker))
            t = (tokens[-1].end or t) + pause
        else:
            tokens.extend(Token(tok.word, speaker=tok.speaker) for tok in story.tokens)
    language = stories[0].language if stories else ""
    return StreamDocument(tokens, doc_id, language), boundaries
