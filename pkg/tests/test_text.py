import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from windowmt.text import (CONTROL_TOKENS, EOS, INFLECTION_SUFFIXES, PAD, UNK,
                           CharVocab, SyntheticWorld, Token, build_vocab,
                           concat_stories, decode_chars, encode_chars,
                           gen_synthetic_pair, load_parallel,
                           load_stream_documents, save_parallel,
                           save_stream_documents, word_windows)


class TestBuildVocab:
    def test_small_corpus(self):
        v = build_vocab(["aab"], cap=2)
        assert v.symbols == CONTROL_TOKENS + ["a", "b"]
        assert v.size == 6

    def test_cap_limits_size(self):
        v = build_vocab(["the quick brown fox jumps over the lazy dog"], cap=90)
        assert v.size <= 94

    def test_frequency_then_codepoint(self):
        # x and y appear twice each, beating ' ' and 'z' (once each);
        # equal frequency orders by codepoint.
        v = build_vocab(["xyxy z"], cap=2)
        assert v.symbols[4:] == ["x", "y"]

    def test_permutation_invariant(self):
        a = build_vocab(["abc", "bcd", "cde"], cap=5)
        b = build_vocab(["cde", "abc", "bcd"], cap=5)
        assert a.symbols == b.symbols

    def test_empty_corpora(self):
        with pytest.raises(ValueError):
            build_vocab([], cap=5)


class TestEncodeDecode:
    def setup_method(self):
        self.v = build_vocab(["abc"], cap=10)

    def test_empty_with_eos(self):
        assert encode_chars(self.v, "", append_eos=True) == [EOS]

    def test_known_chars(self):
        ids = encode_chars(self.v, "ab")
        assert len(ids) == 2 and all(i >= 4 for i in ids)

    def test_oov_becomes_unk(self):
        ids = encode_chars(self.v, "a\N{ROCKET}b")
        assert ids.count(UNK) == 1

    def test_decode_stops_at_eos(self):
        a, b, c = self.v.encode("abc")
        assert decode_chars(self.v, [a, UNK, b, EOS, c]) == "a\N{REPLACEMENT CHARACTER}b"

    def test_decode_skips_pad_and_go(self):
        a = self.v.encode("a")[0]
        assert decode_chars(self.v, [PAD, 1, a]) == "a"

    def test_decode_out_of_range(self):
        with pytest.raises(IndexError):
            decode_chars(self.v, [self.v.size])

    @settings(max_examples=50)
    @given(st.text(alphabet="abc", max_size=30))
    def test_roundtrip(self, s):
        assert decode_chars(self.v, encode_chars(self.v, s)) == s

    def test_save_load_roundtrip(self, tmp_path):
        path = tmp_path / "vocab.txt"
        self.v.save(path)
        assert CharVocab.load(path).symbols == self.v.symbols


class TestLoadParallel:
    def test_basic_pair(self, tmp_path):
        p = tmp_path / "c.tsv"
        p.write_text("hello\tsveiki\n", encoding="utf-8")
        corpus = load_parallel(p)
        assert corpus.pairs == [("hello", "sveiki")]

    def test_truncation_is_unicode_aware(self, tmp_path):
        p = tmp_path / "c.tsv"
        src = "\N{LATIN SMALL LETTER A WITH MACRON}" * 150
        p.write_text(f"{src}\tx\n", encoding="utf-8")
        corpus = load_parallel(p, truncate_chars=100)
        assert len(corpus.pairs[0][0]) == 100

    def test_extra_tabs_join_target(self, tmp_path):
        p = tmp_path / "c.tsv"
        p.write_text("src\ta\tb\tc\n", encoding="utf-8")
        corpus = load_parallel(p)
        assert corpus.pairs == [("src", "a\tb\tc")]

    def test_bad_lines_skipped_and_counted(self, tmp_path):
        p = tmp_path / "c.tsv"
        p.write_text("good\tpair\nno-tab-line\n\t\n", encoding="utf-8")
        corpus = load_parallel(p)
        assert len(corpus.pairs) == 1
        assert corpus.skipped == 2

    def test_save_roundtrip(self, tmp_path):
        from windowmt.text import ParallelCorpus
        p = tmp_path / "c.tsv"
        save_parallel(ParallelCorpus([("a b", "c d")], "x"), p)
        assert load_parallel(p).pairs == [("a b", "c d")]


class TestWordWindows:
    def test_seven_words(self):
        words = [f"w{i}" for i in range(7)]
        wins = word_windows(words, 6, 1)
        assert [s for s, _ in wins] == [0, 1]
        assert wins[0][1] == "w0 w1 w2 w3 w4 w5"
        assert wins[1][1] == "w1 w2 w3 w4 w5 w6"

    def test_short_text_single_window(self):
        wins = word_windows(["a", "b", "c"], 6)
        assert wins == [(0, "a b c")]

    def test_text_capped_at_100(self):
        words = ["x" * 40] * 6
        wins = word_windows(words, 6)
        assert all(len(t) <= 100 for _, t in wins)

    def test_empty(self):
        assert word_windows([], 6) == []

    @settings(max_examples=50)
    @given(st.integers(1, 40), st.integers(1, 10))
    def test_stride_one_window_count(self, n, window):
        words = [f"w{i}" for i in range(n)]
        wins = word_windows(words, window, 1)
        assert len(wins) == max(1, n - window + 1)

    def test_final_full_window_included_with_stride(self):
        words = [f"w{i}" for i in range(10)]
        wins = word_windows(words, 4, stride=3)
        assert wins[-1][0] == 6


class TestSyntheticWorld:
    def test_deterministic(self):
        a = SyntheticWorld(7).parallel_corpus("s", "t", 20)
        b = SyntheticWorld(7).parallel_corpus("s", "t", 20)
        assert a.pairs == b.pairs

    def test_bijection_without_inflection(self):
        world = SyntheticWorld(7)
        lex_s = world.lexicon("s")
        lex_t = world.lexicon("t")
        mapping = dict(zip(lex_s, lex_t))
        corpus = world.parallel_corpus("s", "t", 30, truncate=None)
        for src, tgt in corpus.pairs:
            assert [mapping[w] for w in src.split()] == tgt.split()

    def test_inflected_variants_share_prefix(self):
        world = SyntheticWorld(7)
        for lemma in world.lexicon("t"):
            keys = {(lemma + suf)[:6] for suf in INFLECTION_SUFFIXES}
            assert len(keys) == 1

    def test_lexicon_prefixes_unique(self):
        lex = SyntheticWorld(7, lexicon_size=200).lexicon("q")
        assert len({w[:6] for w in lex}) == len(lex)

    def test_stream_documents_topics_and_times(self):
        world = SyntheticWorld(7)
        docs = world.stream_documents("s", seed=1, docs_per_topic=3)
        assert len(docs) == 12
        for doc in docs:
            starts = [t.start for t in doc.tokens]
            assert starts == sorted(starts)
            assert len({t.speaker for t in doc.tokens}) == 1

    def test_topic_words_disjoint(self):
        world = SyntheticWorld(7)
        docs = world.stream_documents("s", seed=1, docs_per_topic=2)
        by_topic = {}
        for doc in docs:
            topic = doc.doc_id.split("-")[1]
            by_topic.setdefault(topic, set()).update(doc.words)
        topics = list(by_topic)
        for i in range(len(topics)):
            for j in range(i + 1, len(topics)):
                assert not (by_topic[topics[i]] & by_topic[topics[j]])

    def test_gen_synthetic_pair(self):
        corpus, pool = gen_synthetic_pair(3, 40, 10, inflection=True)
        assert len(corpus.pairs) == 10
        assert pool


class TestStreamFiles:
    def test_roundtrip(self, tmp_path):
        docs = SyntheticWorld(5).stream_documents("s", seed=0, docs_per_topic=1)
        path = tmp_path / "streams.txt"
        save_stream_documents(docs, path)
        loaded = load_stream_documents(path)
        assert len(loaded) == len(docs)
        for a, b in zip(loaded, docs):
            assert a.words == b.words
            assert [t.speaker for t in a.tokens] == [t.speaker for t in b.tokens]

    def test_missing_fields_allowed(self, tmp_path):
        path = tmp_path / "s.txt"
        path.write_text("hello\t\t\t\nworld\t1.0\t1.5\tspk\n", encoding="utf-8")
        docs = load_stream_documents(path)
        assert docs[0].words == ["hello", "world"]
        assert docs[0].tokens[0].start is None
        assert docs[0].tokens[1].speaker == "spk"


class TestConcatStories:
    def test_boundaries_and_pauses(self):
        docs = SyntheticWorld(5).stream_documents("s", seed=0, docs_per_topic=1,
                                                  min_words=10, max_words=12)
        stream_doc, bounds = concat_stories(docs[:3], "joined", pause=2.0)
        assert len(bounds) == 2
        assert len(stream_doc.tokens) == sum(len(d.tokens) for d in docs[:3])
        for b in bounds:
            gap = stream_doc.tokens[b].start - stream_doc.tokens[b - 1].end
            assert gap == pytest.approx(2.0, abs=1e-6)
            assert stream_doc.tokens[b].speaker != stream_doc.tokens[b - 1].speaker
