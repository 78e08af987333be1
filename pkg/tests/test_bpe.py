from collections import Counter

import pytest

from bisent.bpe import BpeModel, bpe_apply, bpe_decode, bpe_learn, learn_merges, word_symbols
from bisent.errors import DataError


def brute_force_pair_counts(word_counts):
    # Independent oracle: enumerate every adjacent symbol pair occurrence.
    counts = Counter()
    for word, freq in word_counts.items():
        syms = word_symbols(word)
        for i in range(len(syms) - 1):
            counts[(syms[i], syms[i + 1])] += freq
    return counts


def test_first_merge_is_most_frequent_pair():
    word_counts = {"aaab": 5}
    oracle = brute_force_pair_counts(word_counts)
    assert oracle[("a", "a")] == 10  # overlapping occurrences both count
    assert max(oracle.values()) == oracle[("a", "a")]
    merges = learn_merges(word_counts, 1)
    assert merges == [("a", "a")]


def test_learning_stops_when_pairs_exhausted():
    merges = learn_merges({"ab": 3}, 100)
    assert len(merges) < 100
    assert merges == [("a", "b</w>")]


def test_file_order_irrelevant(tmp_path):
    a = tmp_path / "a.txt"
    b = tmp_path / "b.txt"
    a.write_text("low lower\nnewest\n", encoding="utf-8")
    b.write_text("widest newest\nlow\n", encoding="utf-8")
    m1 = bpe_learn([a, b], 10)
    m2 = bpe_learn([b, a], 10)
    assert m1.merges == m2.merges


def test_learn_deterministic():
    counts = {"banana": 4, "bandana": 2, "cabana": 3}
    assert learn_merges(counts, 8) == learn_merges(counts, 8)


def test_empty_corpus_errors(tmp_path):
    p = tmp_path / "empty.txt"
    p.write_text("", encoding="utf-8")
    with pytest.raises(DataError):
        bpe_learn([p], 5)


def test_apply_no_merges_is_character_segmentation():
    model = BpeModel([])
    assert bpe_apply(model, "ab c") == ["a", "b</w>", "c</w>"]


def test_apply_hand_traced_merge():
    model = BpeModel([("a", "a")])
    assert bpe_apply(model, "aaab") == ["aa", "a", "b</w>"]


def test_apply_respects_merge_priority():
    # ("b", "c") outranks ("a", "b"): "abc" -> a + bc</w> needs the end-marked
    # variant, so use both orders on an inner position.
    model = BpeModel([("b", "c"), ("a", "b")])
    assert bpe_apply(model, "abcd") == ["a", "bc", "d</w>"]
    model2 = BpeModel([("a", "b"), ("b", "c")])
    assert bpe_apply(model2, "abcd") == ["ab", "c", "d</w>"]


def test_roundtrip_examples():
    model = BpeModel([("a", "a"), ("aa", "b</w>")])
    for line in ["aaab", "aaab aaab", "x y z", "unc aaab unc", ""]:
        assert bpe_decode(bpe_apply(model, line)) == " ".join(line.split())


def test_unknown_characters_pass_through():
    model = BpeModel([("a", "a")])
    assert bpe_apply(model, "日本語") == ["日", "本", "語</w>"]
    assert bpe_decode(["日", "本", "語</w>"]) == "日本語"


def test_model_file_roundtrip(tmp_path):
    model = BpeModel([("a", "a"), ("aa", "b</w>"), ("x", "y")])
    path = tmp_path / "model.bpe"
    model.save(path)
    loaded = BpeModel.load(path)
    assert loaded.merges == model.merges


def test_model_file_malformed(tmp_path):
    path = tmp_path / "bad.bpe"
    path.write_text("a b c\n", encoding="utf-8")
    with pytest.raises(DataError):
        BpeModel.load(path)


def test_duplicate_merges_rejected():
    with pytest.raises(DataError):
        BpeModel([("a", "b"), ("a", "b")])


def test_lowercase_flag():
    model = BpeModel([])
    assert bpe_apply(model, "AB", lowercase=True) == ["a", "b</w>"]
