"""Loader for pre-trained word embeddings in word2vec text format.

Header line "V D", then one "word v1 ... vD" row per line. Rows are aligned
to the given Vocabulary; tokens missing from the file get a seeded
uniform(-0.08, 0.08) row and covered=False.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .nn import INIT_SCALE


@dataclass
class WordEmbeddingTable:
    vectors: np.ndarray  # (|V|, dim)
    covered: np.ndarray  # bool (|V|,)

    @property
    def dim(self):
        return self.vectors.shape[1]


def load_word_embeddings(path, vocab, seed=0):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        parts = header.split()
        if len(parts) != 2:
            raise DataError(f"{path}:1: expected header 'V D', got {header!r}")
        try:
            n_rows, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise DataError(f"{path}:1: non-integer header fields in {header!r}") from None
        if n_rows < 0 or dim < 1:
            raise DataError(f"{path}:1: invalid header values {header!r}")

        rng = np.random.default_rng(seed)
        vectors = rng.uniform(-INIT_SCALE, INIT_SCALE, size=(len(vocab), dim))
        covered = np.zeros(len(vocab), dtype=bool)

        seen = 0
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split(" ")
            if len(fields) != dim + 1:
                raise DataError(
                    f"{path}:{lineno}: expected {dim + 1} fields, got {len(fields)}"
                )
            seen += 1
            word = fields[0]
            idx = vocab.token_to_id.get(word)
            if idx is None:
                continue
            try:
                vectors[idx] = [float(v) for v in fields[1:]]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric vector component") from None
            covered[idx] = True
        if seen != n_rows:
            raise DataError(f"{path}: header declares {n_rows} rows, file has {seen}")
    return WordEmbeddingTable(vectors=vectors, covered=covered)
