"""The embedding model: two bidirectional GRU encoders feeding one shared
GRU decoder through a max-pooled sentence vector.

Translation examples (input language -> output language) train the input
encoder plus the decoder; autoencoding examples (output language -> itself)
train the output-language encoder plus the same decoder. Batches mix the two
kinds 1:1 so both encoders are pushed into one embedding space.

All math is batched numpy with hand-written backward passes; gradients live
in flat name -> array dicts matching EmbedModelParams.tensors.
"""

import time
from dataclasses import dataclass

import numpy as np

from .corpus import BOS_ID, EOS_ID, PAD_ID
from .errors import ConfigError, DataError, NumericError
from .nn import GruCellParams, gru_backward, gru_forward, softmax_xent_rows, uniform_init
from .optim import SgdSchedule, clip_global_norm, sgd_step

DIRECTIONS = ("src2tgt", "tgt2src")
SIDES = ("source", "target")
DTYPES = {"f64": np.float64, "f32": np.float32}

GRAD_CLIP_NORM = 5.0


@dataclass
class ModelConfig:
    vocab_size: int
    hidden_size: int = 64  # D; each encoder direction uses D/2
    emb_size: int = 32
    direction: str = "src2tgt"
    dtype: str = "f64"

    def __post_init__(self):
        if self.hidden_size % 2 != 0:
            raise ConfigError(f"hidden_size must be even, got {self.hidden_size}")
        if self.direction not in DIRECTIONS:
            raise ConfigError(f"direction must be one of {DIRECTIONS}")
        if self.dtype not in DTYPES:
            raise ConfigError(f"dtype must be one of {tuple(DTYPES)}")

    @property
    def np_dtype(self):
        return DTYPES[self.dtype]


_CELLS = ("enc_src_fwd", "enc_src_bwd", "enc_tgt_fwd", "enc_tgt_bwd", "dec")


class EmbedModelParams:
    """Flat name -> ndarray tensor dict plus the hyperparameters."""

    def __init__(self, config, tensors):
        self.config = config
        self.tensors = tensors

    @classmethod
    def init(cls, config, seed=0):
        rng = np.random.default_rng(seed)
        dt = config.np_dtype
        v, e, d = config.vocab_size, config.emb_size, config.hidden_size
        tensors = {}
        for name in ("src_emb", "tgt_emb", "dec_emb"):
            tensors[name] = uniform_init(rng, (v, e), dt)
        for name in _CELLS:
            hidden = d if name == "dec" else d // 2
            cell = GruCellParams.init(rng, e, hidden, dt)
            tensors[f"{name}.w_x"] = cell.w_x
            tensors[f"{name}.w_h"] = cell.w_h
            tensors[f"{name}.b"] = cell.b
        tensors["out.w"] = uniform_init(rng, (d, v), dt)
        tensors["out.b"] = np.zeros(v, dtype=dt)
        return cls(config, tensors)

    def cell(self, name):
        t = self.tensors
        return GruCellParams(t[f"{name}.w_x"], t[f"{name}.w_h"], t[f"{name}.b"])

    def zero_grads(self):
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}

    def init_word_embeddings(self, table):
        """Copy covered rows of a pre-trained table into all three embedding
        matrices; uncovered rows keep their random initialization."""
        if table.dim != self.config.emb_size:
            raise ConfigError(
                f"word embedding dim {table.dim} != model emb_size {self.config.emb_size}"
            )
        if table.vectors.shape[0] != self.config.vocab_size:
            raise ConfigError("word embedding table is not aligned to the vocabulary")
        rows = table.vectors[table.covered].astype(self.config.np_dtype)
        for name in ("src_emb", "tgt_emb", "dec_emb"):
            self.tensors[name][table.covered] = rows


def _pad_rows(rows, dtype):
    """Pad lists of token ids to (B, T) ids plus a 0/1 validity mask."""
    b = len(rows)
    t = max(len(r) for r in rows)
    ids = np.full((b, t), PAD_ID, dtype=np.int64)
    mask = np.zeros((b, t), dtype=dtype)
    for i, r in enumerate(rows):
        ids[i, : len(r)] = r
        mask[i, : len(r)] = 1.0
    return ids, mask


def _enc_names(side):
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}, got {side!r}")
    return ("src_emb", "enc_src") if side == "source" else ("tgt_emb", "enc_tgt")


# -----------------------------------------------------------------------------
# Encoder
# -----------------------------------------------------------------------------


def _encode_forward(params, side, token_rows):
    """Bidirectional encoder + masked temporal max-pool. Returns (pooled (B, D), cache)."""
    cfg = params.config
    dt = cfg.np_dtype
    emb_name, enc = _enc_names(side)
    ids, mask = _pad_rows(token_rows, dt)
    x = params.tensors[emb_name][ids]  # (B, T, E)
    b, t, _ = x.shape
    h2 = cfg.hidden_size // 2
    hs = np.zeros((b, t, cfg.hidden_size), dtype=dt)
    caches = {}
    for dname, order, off in (("fwd", range(t), 0), ("bwd", range(t - 1, -1, -1), h2)):
        cell = params.cell(f"{enc}_{dname}")
        h = np.zeros((b, h2), dtype=dt)
        steps = []
        for ti in order:
            h_new, c = gru_forward(cell, x[:, ti], h)
            m = mask[:, ti][:, None]
            h = m * h_new + (1.0 - m) * h
            steps.append((ti, c))
            hs[:, ti, off : off + h2] = h
        caches[dname] = steps
    guarded = np.where(mask[:, :, None] > 0, hs, -np.inf)
    amax = guarded.argmax(axis=1)  # (B, D); first max wins ties
    pooled = np.take_along_axis(hs, amax[:, None, :], axis=1)[:, 0, :]
    return pooled, {"ids": ids, "mask": mask, "x": x, "hs_shape": hs.shape,
                    "amax": amax, "caches": caches, "enc": enc, "emb_name": emb_name}


def _encode_backward(params, cache, d_pooled, grads):
    """Accumulate encoder gradients for d(pooled). Consumes _encode_forward cache."""
    cfg = params.config
    mask = cache["mask"]
    h2 = cfg.hidden_size // 2
    dhs = np.zeros(cache["hs_shape"], dtype=cfg.np_dtype)
    np.put_along_axis(dhs, cache["amax"][:, None, :], d_pooled[:, None, :], axis=1)
    dx = np.zeros_like(cache["x"])
    enc = cache["enc"]
    b = mask.shape[0]
    for dname, off in (("fwd", 0), ("bwd", h2)):
        cell = params.cell(f"{enc}_{dname}")
        dh_carry = np.zeros((b, h2), dtype=cfg.np_dtype)
        for ti, step_cache in reversed(cache["caches"][dname]):
            dh_total = dhs[:, ti, off : off + h2] + dh_carry
            m = mask[:, ti][:, None]
            dxt, dh_prev, g = gru_backward(cell, step_cache, m * dh_total)
            dx[:, ti] += dxt
            dh_carry = (1.0 - m) * dh_total + dh_prev
            grads[f"{enc}_{dname}.w_x"] += g["w_x"]
            grads[f"{enc}_{dname}.w_h"] += g["w_h"]
            grads[f"{enc}_{dname}.b"] += g["b"]
    np.add.at(grads[cache["emb_name"]], cache["ids"], dx)


def encode_batch(params, sentences, side):
    """Sentence embeddings for a batch; rows follow input order. (B, D)."""
    rows = []
    for i, s in enumerate(sentences):
        tokens = s.tokens if hasattr(s, "tokens") else s
        if len(tokens) == 0:
            raise DataError(f"cannot encode empty sentence at batch position {i}")
        rows.append(tokens)
    pooled, _ = _encode_forward(params, side, rows)
    return pooled


def encode(params, sentence, side):
    """Embedding of a single sentence through the chosen encoder. (D,)."""
    return encode_batch(params, [sentence], side)[0]


# -----------------------------------------------------------------------------
# Decoder
# -----------------------------------------------------------------------------


def _decode_forward(params, s0, out_rows):
    """Teacher-forced decoding from initial state s0 (B, D).

    Targets are the output tokens plus EOS; inputs are BOS plus the output
    tokens. Returns (per-row loss sums (B,), cache).
    """
    cfg = params.config
    dt = cfg.np_dtype
    in_ids, mask = _pad_rows([[BOS_ID] + list(r) for r in out_rows], dt)
    tgt_ids, _ = _pad_rows([list(r) + [EOS_ID] for r in out_rows], dt)
    tensors = params.tensors
    x = tensors["dec_emb"][in_ids]
    cell = params.cell("dec")
    out_w, out_b = tensors["out.w"], tensors["out.b"]
    b, t, _ = x.shape
    s = s0
    row_losses = np.zeros(b, dtype=np.float64)
    steps = []
    for ti in range(t):
        s_new, c = gru_forward(cell, x[:, ti], s)
        m = mask[:, ti][:, None]
        s = m * s_new + (1.0 - m) * s
        logits = s @ out_w + out_b
        losses, dlogits = softmax_xent_rows(logits, tgt_ids[:, ti])
        row_losses += losses * mask[:, ti]
        dlogits *= m
        steps.append((c, s, dlogits))
    return row_losses, {"in_ids": in_ids, "mask": mask, "x": x, "steps": steps}


def _decode_backward(params, cache, grads):
    """Accumulate decoder/output grads; returns d(s0) (B, D)."""
    cfg = params.config
    mask = cache["mask"]
    cell = params.cell("dec")
    out_w = params.tensors["out.w"]
    b, t = mask.shape
    dx = np.zeros_like(cache["x"])
    ds_carry = np.zeros((b, cfg.hidden_size), dtype=cfg.np_dtype)
    for ti in range(t - 1, -1, -1):
        step_cache, s, dlogits = cache["steps"][ti]
        grads["out.w"] += s.T @ dlogits
        grads["out.b"] += dlogits.sum(axis=0)
        ds_total = dlogits @ out_w.T + ds_carry
        m = mask[:, ti][:, None]
        dxt, ds_prev, g = gru_backward(cell, step_cache, m * ds_total)
        dx[:, ti] = dxt
        ds_carry = (1.0 - m) * ds_total + ds_prev
        grads["dec.w_x"] += g["w_x"]
        grads["dec.w_h"] += g["w_h"]
        grads["dec.b"] += g["b"]
    np.add.at(grads["dec_emb"], cache["in_ids"], dx)
    return ds_carry


def decode_loss(params, embedding, sentence):
    """Teacher-forced loss of one output sentence given a sentence embedding.

    Returns (loss, grads); grads covers the decoder/output tensors plus the
    key "embedding" holding d(loss)/d(embedding).
    """
    tokens = sentence.tokens if hasattr(sentence, "tokens") else list(sentence)
    if len(tokens) == 0:
        raise DataError("cannot decode an empty output sentence")
    s0 = np.asarray(embedding, dtype=params.config.np_dtype)[None, :]
    row_losses, cache = _decode_forward(params, s0, [tokens])
    grads = params.zero_grads()
    d_s0 = _decode_backward(params, cache, grads)
    grads = {k: v for k, v in grads.items() if k.startswith(("dec", "out"))}
    grads["embedding"] = d_s0[0]
    return float(row_losses[0]), grads


# -----------------------------------------------------------------------------
# Training
# -----------------------------------------------------------------------------


@dataclass
class TrainBatch:
    """nmt: (input sentence, output sentence) pairs; ae: output-language sentences."""

    nmt: list
    ae: list

    def __len__(self):
        return len(self.nmt) + len(self.ae)


def build_batches(parallel, mono, batch_size=120, seed=0, direction="src2tgt"):
    """Infinite stream of TrainBatch mixing translation and autoencoding 1:1.

    An epoch is one pass over the parallel pairs; both pools reshuffle per
    epoch from a single seeded generator. Autoencoding examples come from the
    output side of the parallel corpus plus the monolingual pool (which may
    be empty). Odd batch sizes alternate which kind gets the extra example.
    """
    if len(parallel) == 0:
        raise DataError("parallel corpus is empty")
    if batch_size < 2:
        raise ValueError("batch_size must be >= 2")
    if direction == "src2tgt":
        nmt_pairs = list(zip(parallel.source, parallel.target))
        ae_pool = list(parallel.target)
    elif direction == "tgt2src":
        nmt_pairs = list(zip(parallel.target, parallel.source))
        ae_pool = list(parallel.source)
    else:
        raise ConfigError(f"direction must be one of {DIRECTIONS}")
    ae_pool.extend(mono or [])

    rng = np.random.default_rng(seed)
    ae_state = {"order": np.empty(0, dtype=np.int64), "pos": 0}

    def next_ae(k):
        out = []
        while len(out) < k:
            if ae_state["pos"] >= len(ae_state["order"]):
                ae_state["order"] = rng.permutation(len(ae_pool))
                ae_state["pos"] = 0
            out.append(ae_pool[ae_state["order"][ae_state["pos"]]])
            ae_state["pos"] += 1
        return out

    batch_index = 0
    while True:
        order = rng.permutation(len(nmt_pairs))
        pos = 0
        while pos < len(order):
            n_nmt = batch_size // 2
            if batch_size % 2 and batch_index % 2 == 0:
                n_nmt += 1
            chunk = order[pos : pos + n_nmt]
            pos += n_nmt
            n_ae = batch_size - n_nmt if len(chunk) == n_nmt else len(chunk)
            yield TrainBatch(nmt=[nmt_pairs[i] for i in chunk], ae=next_ae(n_ae))
            batch_index += 1


def _path_loss(params, enc_side, in_rows, out_rows, grads):
    """One input->output path: encode, pool, decode; backprop into grads.

    Returns the summed (unnormalized) loss of the sub-batch.
    """
    pooled, enc_cache = _encode_forward(params, enc_side, in_rows)
    row_losses, dec_cache = _decode_forward(params, pooled, out_rows)
    d_s0 = _decode_backward(params, dec_cache, grads)
    _encode_backward(params, enc_cache, d_s0, grads)
    return float(row_losses.sum())


def batch_loss_and_grads(params, batch):
    """Mean per-example loss and full gradient dict for one mixed batch.

    Tensors not touched by the batch keep exact-zero gradients, so a batch
    without autoencoding examples leaves the output-language encoder alone
    (and vice versa).
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    direction = params.config.direction
    nmt_side = "source" if direction == "src2tgt" else "target"
    ae_side = "target" if direction == "src2tgt" else "source"
    grads = params.zero_grads()
    loss_sum = 0.0
    if batch.nmt:
        in_rows = [p[0].tokens for p in batch.nmt]
        out_rows = [p[1].tokens for p in batch.nmt]
        loss_sum += _path_loss(params, nmt_side, in_rows, out_rows, grads)
    if batch.ae:
        rows = [s.tokens for s in batch.ae]
        loss_sum += _path_loss(params, ae_side, rows, rows, grads)
    n = len(batch)
    for g in grads.values():
        g /= n
    return loss_sum / n, grads


def train_step(params, batch, schedule, update_index, clip_norm=GRAD_CLIP_NORM):
    """One SGD update over a mixed batch; params change in place.

    Returns the mean per-example loss. Raises NumericError on non-finite loss.
    """
    loss, grads = batch_loss_and_grads(params, batch)
    if not np.isfinite(loss):
        raise NumericError(f"non-finite loss {loss!r} at update {update_index}")
    clip_global_norm(grads, clip_norm)
    sgd_step(params.tensors, grads, schedule, update_index)
    return loss


def train(parallel, mono, run, vocab, word_emb=None, checkpoint_dir=None,
          resume_path=None, log=None):
    """Full training loop driven by a RunConfig.

    Returns the trained EmbedModelParams. With checkpoint_dir set, writes
    periodic checkpoints (run.checkpoint_every > 0) and a final
    "checkpoint.bse1". resume_path continues the update counter of a saved
    checkpoint so the learning-rate schedule picks up where it stopped.
    """
    from . import checkpoint as ckpt

    vocab_hash = vocab.content_hash()
    if resume_path is not None:
        params, start_update = ckpt.load_checkpoint(
            resume_path, expected_vocab_hash=vocab_hash, dtype=run.dtype
        )
        if params.config.direction != run.direction:
            raise ConfigError(
                f"checkpoint direction {params.config.direction} != config {run.direction}"
            )
    else:
        config = ModelConfig(
            vocab_size=len(vocab), hidden_size=run.hidden_size,
            emb_size=run.emb_size, direction=run.direction, dtype=run.dtype,
        )
        params = EmbedModelParams.init(config, seed=run.seed)
        if word_emb is not None:
            params.init_word_embeddings(word_emb)
        start_update = 0

    schedule = SgdSchedule(
        initial_lr=run.lr, decay_factor=run.lr_decay,
        warmup_updates=run.lr_warmup_updates, decay_interval=run.lr_decay_interval,
    )
    batches = build_batches(
        parallel, mono, batch_size=run.batch_size, seed=run.seed, direction=run.direction
    )
    started = time.monotonic()
    interval_losses = []
    for update in range(start_update, run.max_updates):
        batch = next(batches)
        loss = train_step(params, batch, schedule, update)
        interval_losses.append(loss)
        done = update + 1
        if log is not None and (done % run.log_every == 0 or done == run.max_updates):
            log({
                "update": done,
                "lr": schedule.lr(update),
                "loss": float(np.mean(interval_losses)),
                "wall": round(time.monotonic() - started, 3),
            })
            interval_losses = []
        if (checkpoint_dir is not None and run.checkpoint_every > 0
                and done % run.checkpoint_every == 0 and done < run.max_updates):
            ckpt.save_checkpoint(
                params, f"{checkpoint_dir}/ckpt_{done:08d}.bse1", vocab_hash, done
            )
    if checkpoint_dir is not None:
        ckpt.save_checkpoint(
            params, f"{checkpoint_dir}/checkpoint.bse1", vocab_hash, run.max_updates
        )
    return params


# -----------------------------------------------------------------------------
# Posterior scoring
# -----------------------------------------------------------------------------


def posterior_scores(params, src_sentences, tgt_sentences):
    """Length-normalized log-probability of each target given its source.

    Teacher forcing through the source-language encoder and the decoder;
    the normalizer counts the EOS position, so a zero-weight model scores
    -log(vocab_size) for any pair.
    """
    if len(src_sentences) != len(tgt_sentences):
        raise ValueError("pairwise posterior needs equally many sources and targets")
    if not src_sentences:
        return np.zeros(0)
    pooled = encode_batch(params, src_sentences, "source")
    out_rows = [s.tokens if hasattr(s, "tokens") else s for s in tgt_sentences]
    row_losses, _ = _decode_forward(params, pooled, out_rows)
    lengths = np.array([len(r) + 1 for r in out_rows], dtype=np.float64)
    return -row_losses / lengths


def posterior_score(params, src_sentence, tgt_sentence):
    return float(posterior_scores(params, [src_sentence], [tgt_sentence])[0])
