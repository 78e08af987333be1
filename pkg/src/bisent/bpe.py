"""Byte-pair encoding learned jointly over any number of text corpora.

Words are whitespace tokens. The last character of every word carries the
"</w>" suffix so that segmentations can be decoded back to text. Merge
priority is list order; ties in pair frequency break lexicographically on
(left, right) so learning is deterministic across platforms.
"""

from collections import Counter, defaultdict

from .errors import DataError

END_MARKER = "</w>"


def word_symbols(word):
    """Initial symbol sequence of a word: characters, last one marked."""
    chars = list(word)
    chars[-1] += END_MARKER
    return chars


def _merge_word(syms, pair):
    """Greedy left-to-right replacement of an adjacent symbol pair."""
    a, b = pair
    out = []
    i = 0
    n = len(syms)
    while i < n:
        if i + 1 < n and syms[i] == a and syms[i + 1] == b:
            out.append(a + b)
            i += 2
        else:
            out.append(syms[i])
            i += 1
    return out


def learn_merges(word_counts, num_merges):
    """Greedy most-frequent-pair merging over a word frequency table.

    Returns the ordered merge list; stops early once no adjacent pair is
    left. Pair counts include overlapping occurrences ("aaa" holds two
    ("a","a") pairs).
    """
    if num_merges < 1:
        raise ValueError("num_merges must be >= 1")
    words = [[word_symbols(w), f] for w, f in sorted(word_counts.items())]
    pair_counts = Counter()
    pair_words = defaultdict(set)
    for idx, (syms, freq) in enumerate(words):
        for pair in zip(syms, syms[1:]):
            pair_counts[pair] += freq
            pair_words[pair].add(idx)

    merges = []
    for _ in range(num_merges):
        best = None
        best_key = None
        for pair, cnt in pair_counts.items():
            if cnt <= 0:
                continue
            key = (-cnt, pair)
            if best_key is None or key < best_key:
                best, best_key = pair, key
        if best is None:
            break
        merges.append(best)
        for idx in sorted(pair_words[best]):
            syms, freq = words[idx]
            old_pairs = list(zip(syms, syms[1:]))
            if best not in old_pairs:
                continue  # stale index from an earlier rewrite
            for p in old_pairs:
                pair_counts[p] -= freq
            new_syms = _merge_word(syms, best)
            words[idx][0] = new_syms
            for p in zip(new_syms, new_syms[1:]):
                pair_counts[p] += freq
                pair_words[p].add(idx)
        del pair_counts[best]
    return merges


class BpeModel:
    """Ordered merge list with an apply-time segmentation cache."""

    def __init__(self, merges):
        merges = [tuple(m) for m in merges]
        if len(set(merges)) != len(merges):
            raise DataError("duplicate merge in BPE model")
        self.merges = merges
        self.ranks = {pair: i for i, pair in enumerate(merges)}
        self._cache = {}

    def __len__(self):
        return len(self.merges)

    def segment_word(self, word):
        """Apply merges in priority order to one whitespace token."""
        cached = self._cache.get(word)
        if cached is not None:
            return list(cached)
        syms = word_symbols(word)
        while len(syms) > 1:
            ranked = [
                (self.ranks[p], p)
                for p in set(zip(syms, syms[1:]))
                if p in self.ranks
            ]
            if not ranked:
                break
            _, best = min(ranked)
            syms = _merge_word(syms, best)
        self._cache[word] = tuple(syms)
        return syms

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for left, right in self.merges:
                fh.write(f"{left} {right}\n")

    @classmethod
    def load(cls, path):
        merges = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split(" ")
                if len(parts) != 2:
                    raise DataError(f"{path}:{lineno}: expected 'left right', got {line!r}")
                merges.append((parts[0], parts[1]))
        return cls(merges)


def bpe_learn(corpus_paths, num_merges, lowercase=False):
    """Learn a BpeModel from text files (one sentence per line, UTF-8)."""
    counts = Counter()
    for path in corpus_paths:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if lowercase:
                    line = line.lower()
                counts.update(line.split())
    if not counts:
        raise DataError(f"no words found in corpora {list(corpus_paths)}")
    return BpeModel(learn_merges(counts, num_merges))


def bpe_apply(model, line, lowercase=False):
    """Segment one text line into subword units."""
    if lowercase:
        line = line.lower()
    tokens = []
    for word in line.split():
        tokens.extend(model.segment_word(word))
    return tokens


def bpe_decode(tokens):
    """Inverse of bpe_apply up to whitespace normalization."""
    return "".join(tokens).replace(END_MARKER, " ").rstrip(" ")
