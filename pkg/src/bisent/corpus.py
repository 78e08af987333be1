"""Sentences, the shared vocabulary, and line-aligned corpus loading.

One vocabulary covers both languages (the BPE model is learned jointly).
Ids 0..3 are reserved for PAD/BOS/EOS/UNK; real tokens follow densely.
"""

import hashlib
from collections import Counter
from dataclasses import dataclass, field

from .errors import DataError

RESERVED = ("<pad>", "<bos>", "<eos>", "<unk>")
PAD_ID, BOS_ID, EOS_ID, UNK_ID = 0, 1, 2, 3


class Vocabulary:
    """Bijective token <-> id maps with fixed reserved ids 0..3."""

    def __init__(self, tokens):
        self.id_to_token = list(RESERVED) + [t for t in tokens if t not in RESERVED]
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise DataError("duplicate token in vocabulary")

    def __len__(self):
        return len(self.id_to_token)

    def __contains__(self, token):
        return token in self.token_to_id

    @classmethod
    def build(cls, token_iter):
        """Vocabulary over all seen tokens, ordered by (-count, token)."""
        counts = Counter(token_iter)
        for r in RESERVED:
            counts.pop(r, None)
        ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return cls([t for t, _ in ordered])

    def encode(self, tokens):
        get = self.token_to_id.get
        return [get(t, UNK_ID) for t in tokens]

    def decode(self, ids):
        return [self.id_to_token[i] for i in ids]

    def content_hash(self):
        text = "\n".join(self.id_to_token)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for token in self.id_to_token:
                fh.write(token + "\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh]
        while tokens and tokens[-1] == "":
            tokens.pop()
        if tuple(tokens[:4]) != RESERVED:
            raise DataError(f"{path}: reserved tokens {RESERVED} missing or reordered")
        return cls(tokens[4:])


@dataclass
class Sentence:
    """Token ids plus the original surface line."""

    tokens: list
    surface: str

    def __len__(self):
        return len(self.tokens)


@dataclass
class ParallelCorpus:
    """Index-paired bilingual corpus; orig_lines keeps 0-based source file lines."""

    source: list
    target: list
    orig_lines: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.source) != len(self.target):
            raise DataError(
                f"parallel corpus sides differ: {len(self.source)} vs {len(self.target)}"
            )
        if not self.orig_lines:
            self.orig_lines = list(range(len(self.source)))

    def __len__(self):
        return len(self.source)

    def swapped(self):
        return ParallelCorpus(self.target, self.source, list(self.orig_lines))


def read_lines(path):
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


def _to_sentence(line, vocab, lowercase):
    if lowercase:
        line = line.lower()
    words = line.split()
    return Sentence(vocab.encode(words), line), len(words)


def load_parallel_corpus(src_path, tgt_path, vocab, max_len=60, lowercase=False):
    """Load a line-aligned pair of token files.

    Pairs where either side is empty or longer than max_len tokens are
    dropped together; surviving pairs keep their original line index.
    """
    src_lines = read_lines(src_path)
    tgt_lines = read_lines(tgt_path)
    if len(src_lines) != len(tgt_lines):
        raise DataError(
            f"line counts differ: {src_path} has {len(src_lines)}, "
            f"{tgt_path} has {len(tgt_lines)}"
        )
    source, target, orig = [], [], []
    for i, (sl, tl) in enumerate(zip(src_lines, tgt_lines)):
        ssent, slen = _to_sentence(sl, vocab, lowercase)
        tsent, tlen = _to_sentence(tl, vocab, lowercase)
        if not (1 <= slen <= max_len and 1 <= tlen <= max_len):
            continue
        source.append(ssent)
        target.append(tsent)
        orig.append(i)
    return ParallelCorpus(source, target, orig)


def load_mono_corpus(path, vocab, max_len=60, lowercase=False):
    """Load a monolingual token file, dropping empty/over-long lines."""
    sentences = []
    for line in read_lines(path):
        sent, length = _to_sentence(line, vocab, lowercase)
        if 1 <= length <= max_len:
            sentences.append(sent)
    return sentences


def corpus_token_stream(paths, lowercase=False):
    """All whitespace tokens of the given files, for vocabulary building."""
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if lowercase:
                    line = line.lower()
                yield from line.split()
