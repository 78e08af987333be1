"""Binary parameter containers.

Layout: 4-byte magic, little-endian u64 manifest length, canonical-JSON
manifest (UTF-8), then raw little-endian f32 tensor blobs row-major in
manifest order. The model checkpoint uses magic "BSE1", the MLP scorer
"MLP1". Canonical JSON plus sorted tensor order makes save -> load -> save
byte-identical.
"""

import json
import struct

import numpy as np

from .errors import DataError
from .model import EmbedModelParams, ModelConfig

MODEL_MAGIC = b"BSE1"
MLP_MAGIC = b"MLP1"
FORMAT_VERSION = 1


def write_container(path, magic, tensors, meta):
    """Write tensors (in sorted name order) plus a metadata dict."""
    names = sorted(tensors)
    manifest = {
        "version": FORMAT_VERSION,
        "dtype": "f32",
        "meta": meta,
        "tensors": [{"name": n, "shape": list(tensors[n].shape)} for n in names],
    }
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for n in names:
            fh.write(np.ascontiguousarray(tensors[n], dtype="<f4").tobytes())


def read_container(path, magic):
    """Read tensors (as f32 arrays) and the metadata dict; validates layout."""
    with open(path, "rb") as fh:
        got = fh.read(4)
        if got != magic:
            raise DataError(f"{path}: bad magic {got!r}, expected {magic!r}")
        raw_len = fh.read(8)
        if len(raw_len) != 8:
            raise DataError(f"{path}: truncated before manifest length")
        (mlen,) = struct.unpack("<Q", raw_len)
        blob = fh.read(mlen)
        if len(blob) != mlen:
            raise DataError(f"{path}: truncated manifest")
        try:
            manifest = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise DataError(f"{path}: unreadable manifest: {exc}") from None
        if manifest.get("version") != FORMAT_VERSION:
            raise DataError(f"{path}: unsupported format version {manifest.get('version')}")
        tensors = {}
        for entry in manifest["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            data = fh.read(4 * count)
            if len(data) != 4 * count:
                raise DataError(f"{path}: truncated, missing data for tensor '{entry['name']}'")
            tensors[entry["name"]] = np.frombuffer(data, dtype="<f4").reshape(shape)
    return tensors, manifest["meta"]


# -----------------------------------------------------------------------------
# Embedding model checkpoints
# -----------------------------------------------------------------------------


def save_checkpoint(params, path, vocab_hash, update_count):
    cfg = params.config
    meta = {
        "kind": "embed-model",
        "hyper": {
            "vocab_size": cfg.vocab_size,
            "hidden_size": cfg.hidden_size,
            "emb_size": cfg.emb_size,
            "direction": cfg.direction,
        },
        "vocab_hash": vocab_hash,
        "update_count": update_count,
    }
    write_container(path, MODEL_MAGIC, params.tensors, meta)


def load_checkpoint(path, expected_vocab_hash=None, dtype="f64"):
    """Returns (EmbedModelParams, update_count). Tensors are upcast to the
    requested compute dtype (f32 values are exact in f64)."""
    tensors, meta = read_container(path, MODEL_MAGIC)
    if meta.get("kind") != "embed-model":
        raise DataError(f"{path}: not an embed-model checkpoint")
    if expected_vocab_hash is not None and meta["vocab_hash"] != expected_vocab_hash:
        raise DataError(
            f"{path}: checkpoint was trained with a different vocabulary "
            f"(hash {meta['vocab_hash'][:12]}... != expected {expected_vocab_hash[:12]}...)"
        )
    hyper = meta["hyper"]
    config = ModelConfig(
        vocab_size=hyper["vocab_size"], hidden_size=hyper["hidden_size"],
        emb_size=hyper["emb_size"], direction=hyper["direction"], dtype=dtype,
    )
    reference = EmbedModelParams.init(config, seed=0)
    loaded = {}
    for name, ref in reference.tensors.items():
        if name not in tensors:
            raise DataError(f"{path}: tensor '{name}' missing from checkpoint")
        if tensors[name].shape != ref.shape:
            raise DataError(
                f"{path}: tensor '{name}' has shape {tensors[name].shape}, "
                f"expected {ref.shape}"
            )
        loaded[name] = tensors[name].astype(config.np_dtype)
    return EmbedModelParams(config, loaded), int(meta["update_count"])


# -----------------------------------------------------------------------------
# MLP scorer files
# -----------------------------------------------------------------------------


def save_mlp(mlp_params, path):
    meta = {"kind": "mlp-similarity", "layer_sizes": list(mlp_params.layer_sizes)}
    write_container(path, MLP_MAGIC, mlp_params.tensors, meta)


def load_mlp(path, dtype=np.float64):
    from .mlp import MlpParams

    tensors, meta = read_container(path, MLP_MAGIC)
    if meta.get("kind") != "mlp-similarity":
        raise DataError(f"{path}: not an MLP scorer file")
    converted = {k: v.astype(dtype) for k, v in tensors.items()}
    return MlpParams(tensors=converted, layer_sizes=tuple(meta["layer_sizes"]))
