"""Similarity measures over sentence embeddings plus batched scoring.

Measures: cosine, reversed Euclidean distance, CSLS (cosine with k-NN
density penalties on both sides), the trained MLP classifier, character
Levenshtein, and the model's length-normalized translation posterior.

Scoring runs in two modes: pairwise (one score per aligned line pair) and
cross (full n x m matrix streamed in row blocks, optionally thread-parallel;
results are identical for any block size or thread count).
"""

import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import ConfigError
from .mlp import mlp_forward_batch

MEASURES = ("cosine", "euclidean", "csls", "mlp", "levenshtein", "posterior")
DEGENERATE_NORM = 1e-12


class EmbeddingMatrix:
    """Row-major (n, dim) embedding set with lazily cached norms/unit rows."""

    def __init__(self, vectors):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise ValueError(f"embedding matrix must be 2-D, got shape {vectors.shape}")
        self.vectors = vectors
        self._norms = None
        self._unit = None

    @property
    def n(self):
        return self.vectors.shape[0]

    @property
    def dim(self):
        return self.vectors.shape[1]

    @property
    def norms(self):
        if self._norms is None:
            self._norms = np.linalg.norm(self.vectors, axis=1)
        return self._norms

    @property
    def unit(self):
        """Unit rows; degenerate (near-zero) rows become zero rows, which
        makes their cosine against anything 0.0."""
        if self._unit is None:
            norms = self.norms.copy()
            degenerate = norms < DEGENERATE_NORM
            if degenerate.any():
                warnings.warn(
                    f"{int(degenerate.sum())} degenerate zero-norm embedding rows; "
                    "their cosine similarities are defined as 0.0"
                )
                norms[degenerate] = 1.0
            self._unit = self.vectors / norms[:, None]
        return self._unit


def as_matrix(x):
    return x if isinstance(x, EmbeddingMatrix) else EmbeddingMatrix(x)


# -----------------------------------------------------------------------------
# Scalar measures
# -----------------------------------------------------------------------------


def cosine(a, b):
    """a . b / (|a| |b|), in [-1, 1]. Degenerate inputs score 0.0 with a warning."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < DEGENERATE_NORM or nb < DEGENERATE_NORM:
        warnings.warn("degenerate zero-norm embedding; cosine defined as 0.0")
        return 0.0
    return float(a @ b / (na * nb))


def euclidean_sim(a, b):
    """Negated Euclidean distance on the raw (unnormalized) embeddings."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return -float(np.linalg.norm(a - b))


def levenshtein_sim(src_text, tgt_text):
    """Negated character-level edit distance between raw strings."""
    return -float(_levenshtein(src_text, tgt_text))


def _levenshtein(s, t):
    if not s:
        return len(t)
    if not t:
        return len(s)
    s_codes = np.frombuffer(s.encode("utf-32-le"), dtype=np.uint32)
    t_codes = np.frombuffer(t.encode("utf-32-le"), dtype=np.uint32)
    m = t_codes.size
    idx = np.arange(m + 1)
    prev = idx.copy()
    cur = np.empty(m + 1, dtype=np.int64)
    for i, c in enumerate(s_codes):
        cur[0] = i + 1
        cur[1:] = np.minimum(prev[:-1] + (t_codes != c), prev[1:] + 1)
        # left-to-right insertions: cur[j] = min over k<=j of cur[k] + (j - k)
        cur = np.minimum.accumulate(cur - idx) + idx
        prev, cur = cur, prev
    return int(prev[-1])


# -----------------------------------------------------------------------------
# CSLS
# -----------------------------------------------------------------------------


def knn_penalties(queries, keys, k):
    """Mean cosine of each query row to its k nearest key rows. (n,)."""
    queries = as_matrix(queries)
    keys = as_matrix(keys)
    if not 1 <= k <= keys.n:
        raise ValueError(f"k={k} out of range for key set of size {keys.n}")
    sims = queries.unit @ keys.unit.T
    if k == keys.n:
        return sims.mean(axis=1)
    top = np.partition(sims, keys.n - k, axis=1)[:, keys.n - k :]
    return top.mean(axis=1)


def csls(a, b, src_set, tgt_set, k=10):
    """2 cos(a,b) - mean-top-k cos(a, tgt_set) - mean-top-k cos(src_set, b)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    r_a = knn_penalties(a[None, :], tgt_set, k)[0]
    r_b = knn_penalties(b[None, :], src_set, k)[0]
    return 2.0 * cosine(a, b) - float(r_a) - float(r_b)


def csls_matrix(src_set, tgt_set, k=10, rows=None):
    """CSLS scores for (a subset of) source rows against all target rows.

    Penalties always come from the full sets; `rows` selects which source
    rows to emit, so block-streamed output matches the full matrix exactly.
    """
    src_set = as_matrix(src_set)
    tgt_set = as_matrix(tgt_set)
    r_src = knn_penalties(src_set, tgt_set, k)
    r_tgt = knn_penalties(tgt_set, src_set, k)
    su = src_set.unit if rows is None else src_set.unit[rows]
    cos = su @ tgt_set.unit.T
    r_s = r_src if rows is None else r_src[rows]
    return 2.0 * cos - r_s[:, None] - r_tgt[None, :]


# -----------------------------------------------------------------------------
# Batched scoring
# -----------------------------------------------------------------------------


class ScoreResources:
    """Bundle of loaded resources; each measure checks what it needs."""

    def __init__(self, src_emb=None, tgt_emb=None, src_text=None, tgt_text=None,
                 mlp=None, model=None, src_sents=None, tgt_sents=None, csls_k=10):
        self.src_emb = as_matrix(src_emb) if src_emb is not None else None
        self.tgt_emb = as_matrix(tgt_emb) if tgt_emb is not None else None
        self.src_text = src_text
        self.tgt_text = tgt_text
        self.mlp = mlp
        self.model = model
        self.src_sents = src_sents
        self.tgt_sents = tgt_sents
        self.csls_k = csls_k


def _require(res, measure, **attrs):
    for label, value in attrs.items():
        if value is None:
            raise ConfigError(f"measure '{measure}' needs {label}, which was not provided")


def _counts(res, measure):
    if measure in ("cosine", "euclidean", "csls", "mlp"):
        _require(res, measure, source_embeddings=res.src_emb, target_embeddings=res.tgt_emb)
        if measure == "mlp":
            _require(res, measure, mlp_params=res.mlp)
        return res.src_emb.n, res.tgt_emb.n
    if measure == "levenshtein":
        _require(res, measure, source_text=res.src_text, target_text=res.tgt_text)
        return len(res.src_text), len(res.tgt_text)
    if measure == "posterior":
        _require(res, measure, model_checkpoint=res.model,
                 source_sentences=res.src_sents, target_sentences=res.tgt_sents)
        return len(res.src_sents), len(res.tgt_sents)
    raise ConfigError(f"unknown measure '{measure}'; choose from {MEASURES}")


def score_pairs(measure, res):
    """One score per aligned (src_i, tgt_i) pair. Returns (n,) float array."""
    n_src, n_tgt = _counts(res, measure)
    if n_src != n_tgt:
        raise ConfigError(f"pairwise scoring needs equal sides, got {n_src} vs {n_tgt}")
    if measure == "cosine":
        return (res.src_emb.unit * res.tgt_emb.unit).sum(axis=1)
    if measure == "euclidean":
        return -np.linalg.norm(res.src_emb.vectors - res.tgt_emb.vectors, axis=1)
    if measure == "csls":
        r_src = knn_penalties(res.src_emb, res.tgt_emb, res.csls_k)
        r_tgt = knn_penalties(res.tgt_emb, res.src_emb, res.csls_k)
        cos = (res.src_emb.unit * res.tgt_emb.unit).sum(axis=1)
        return 2.0 * cos - r_src - r_tgt
    if measure == "mlp":
        return mlp_forward_batch(res.mlp, res.src_emb.vectors, res.tgt_emb.vectors)
    if measure == "levenshtein":
        return np.array([
            levenshtein_sim(s, t) for s, t in zip(res.src_text, res.tgt_text)
        ])
    from .model import posterior_scores

    return posterior_scores(res.model, res.src_sents, res.tgt_sents)


def _cross_block(measure, res, start, stop):
    """Score rows [start, stop) of the cross matrix against all targets."""
    if measure == "cosine":
        return res.src_emb.unit[start:stop] @ res.tgt_emb.unit.T
    if measure == "euclidean":
        src = res.src_emb.vectors[start:stop]
        tgt = res.tgt_emb.vectors
        sq = (src * src).sum(axis=1)[:, None] + (tgt * tgt).sum(axis=1)[None, :]
        sq = sq - 2.0 * (src @ tgt.T)
        return -np.sqrt(np.maximum(sq, 0.0))
    if measure == "csls":
        return csls_matrix(res.src_emb, res.tgt_emb, res.csls_k, rows=slice(start, stop))
    if measure == "mlp":
        tgt = res.tgt_emb.vectors
        m = tgt.shape[0]
        out = np.empty((stop - start, m))
        for i in range(start, stop):
            tiled = np.broadcast_to(res.src_emb.vectors[i], tgt.shape)
            out[i - start] = mlp_forward_batch(res.mlp, tiled, tgt)
        return out
    if measure == "levenshtein":
        return np.array([
            [levenshtein_sim(s, t) for t in res.tgt_text]
            for s in res.src_text[start:stop]
        ])
    from .model import posterior_scores

    m = len(res.tgt_sents)
    out = np.empty((stop - start, m))
    for i in range(start, stop):
        out[i - start] = posterior_scores(res.model, [res.src_sents[i]] * m, res.tgt_sents)
    return out


def score_cross_blocks(measure, res, block_rows=256, threads=1):
    """Yield the n x m score matrix in row blocks of block_rows.

    Blocks are independent, so output is identical for any block size and
    thread count; blocks always arrive in row order.
    """
    n_src, _ = _counts(res, measure)
    if block_rows < 1:
        raise ValueError("block_rows must be >= 1")
    spans = [(s, min(s + block_rows, n_src)) for s in range(0, n_src, block_rows)]
    if threads <= 1 or len(spans) <= 1:
        for start, stop in spans:
            yield _cross_block(measure, res, start, stop)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        yield from pool.map(lambda span: _cross_block(measure, res, *span), spans)


def score_cross(measure, res, block_rows=256, threads=1):
    """Materialized cross matrix; prefer the block stream for large sets."""
    return np.vstack(list(score_cross_blocks(measure, res, block_rows, threads)))
