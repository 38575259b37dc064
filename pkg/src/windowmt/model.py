"""Attention-free character-level seq2seq translator.

Encoder LSTM -> final (h, c) -> decoder LSTM with output projection.
Training is teacher-forced backprop through time with global-norm clipping
and plain SGD; decoding is greedy.  The encoder's final hidden state per
input is the "trace vector" consumed downstream.
"""
from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .numerics import (GradSet, LstmCellParams, clip_global_norm, log_softmax_rows,
                       lstm_step, lstm_step_backward, momentum_step, sgd_step)
from .text import EOS, GO, PAD, CharVocab

FORMAT_VERSION = 1


class BundleError(Exception):
    """Raised for unreadable, corrupted or incompatible bundles."""


@dataclass
class Seq2SeqConfig:
    vocab_size: int
    hidden_dim: int = 64
    embed_dim: int = 64
    n_layers: int = 1
    max_len: int = 100
    batch_size: int = 16
    reverse_source: bool = True

    def __post_init__(self):
        for name in ("vocab_size", "hidden_dim", "embed_dim", "max_len", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.n_layers != 1:
            raise ValueError("only single-layer models are supported")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Seq2SeqConfig":
        return cls(**d)


def desk_config(vocab_size: int, **overrides) -> Seq2SeqConfig:
    """Small CPU-friendly configuration for desk-scale experiments."""
    kw = dict(hidden_dim=64, embed_dim=64, max_len=100, batch_size=16)
    kw.update(overrides)
    return Seq2SeqConfig(vocab_size=vocab_size, **kw)


def paper_config(vocab_size: int, **overrides) -> Seq2SeqConfig:
    """Full-size preset: 400 hidden units, batch 16, 100-symbol bucket."""
    kw = dict(hidden_dim=400, embed_dim=400, max_len=100, batch_size=16)
    kw.update(overrides)
    return Seq2SeqConfig(vocab_size=vocab_size, **kw)


@dataclass
class Seq2SeqParams:
    """The shareable parameter groups of one translator.

    Source and target embeddings are separate tables so that multi-task
    sharing can alias each side to its language independently.
    """

    embed_src: np.ndarray
    embed_tgt: np.ndarray
    encoder: LstmCellParams
    decoder: LstmCellParams
    proj_w: np.ndarray
    proj_b: np.ndarray

    def tensors(self) -> dict:
        return {
            "embed_src": self.embed_src,
            "embed_tgt": self.embed_tgt,
            "enc.W": self.encoder.W,
            "enc.b": self.encoder.b,
            "dec.W": self.decoder.W,
            "dec.b": self.decoder.b,
            "proj.W": self.proj_w,
            "proj.b": self.proj_b,
        }

    @classmethod
    def from_tensors(cls, t: dict) -> "Seq2SeqParams":
        return cls(t["embed_src"], t["embed_tgt"],
                   LstmCellParams(t["enc.W"], t["enc.b"]),
                   LstmCellParams(t["dec.W"], t["dec.b"]),
                   t["proj.W"], t["proj.b"])

    def astype(self, dtype) -> "Seq2SeqParams":
        return Seq2SeqParams.from_tensors({k: v.astype(dtype) for k, v in self.tensors().items()})

    @classmethod
    def init(cls, config: Seq2SeqConfig, seed: int = 0, scale: float = 0.08,
             dtype=np.float32) -> "Seq2SeqParams":
        rng = np.random.default_rng(seed)
        v, e, h = config.vocab_size, config.embed_dim, config.hidden_dim
        return cls(
            embed_src=rng.uniform(-scale, scale, size=(v, e)).astype(dtype),
            embed_tgt=rng.uniform(-scale, scale, size=(v, e)).astype(dtype),
            encoder=LstmCellParams.init(e, h, rng, scale, dtype=dtype),
            decoder=LstmCellParams.init(e, h, rng, scale, dtype=dtype),
            proj_w=rng.uniform(-scale, scale, size=(h, v)).astype(dtype),
            proj_b=np.zeros(v, dtype=dtype),
        )


@dataclass
class EncodeResult:
    h: np.ndarray          # final hidden state (the trace vector)
    c: np.ndarray          # final cell state
    steps: np.ndarray      # per-step hidden states, (n_consumed, hidden)


def _validate_ids(ids, vocab_size: int):
    ids = list(ids)
    for i in ids:
        if i < 0 or i >= vocab_size:
            raise IndexError(f"symbol id {i} out of range for vocabulary of {vocab_size}")
    return ids


def encode(params: Seq2SeqParams, config: Seq2SeqConfig, ids) -> EncodeResult:
    ids = _validate_ids(ids, config.vocab_size)
    if not ids:
        raise ValueError("cannot encode an empty sequence")
    ids = ids[:config.max_len]
    if config.reverse_source:
        ids = ids[::-1]
    dtype = params.embed_src.dtype
    h = np.zeros(config.hidden_dim, dtype=dtype)
    c = np.zeros(config.hidden_dim, dtype=dtype)
    steps = []
    for i in ids:
        h, c, _ = lstm_step(params.encoder, params.embed_src[i], h, c)
        steps.append(h)
    return EncodeResult(h, c, np.stack(steps))


def decode_greedy(params: Seq2SeqParams, config: Seq2SeqConfig, enc: EncodeResult) -> list[int]:
    """Greedy argmax decoding from GO; stops at EOS or max_len emissions.

    PAD and GO logits are masked out, so the output contains neither.
    """
    h, c = enc.h, enc.c
    prev = GO
    out: list[int] = []
    for _ in range(config.max_len):
        h, c, _ = lstm_step(params.decoder, params.embed_tgt[prev], h, c)
        logits = h @ params.proj_w + params.proj_b
        logits = logits.copy()
        logits[PAD] = -np.inf
        logits[GO] = -np.inf
        sym = int(np.argmax(logits))
        if sym == EOS:
            break
        out.append(sym)
        prev = sym
    return out


def sequence_nll(params: Seq2SeqParams, config: Seq2SeqConfig, enc: EncodeResult,
                 target_ids) -> float:
    """Teacher-forced mean per-symbol negative log-likelihood of target+EOS."""
    target_ids = _validate_ids(target_ids, config.vocab_size)
    if not target_ids:
        raise ValueError("target must be non-empty")
    y = target_ids + [EOS]
    h, c = enc.h, enc.c
    prev = GO
    total = 0.0
    for sym in y:
        h, c, _ = lstm_step(params.decoder, params.embed_tgt[prev], h, c)
        logits = h @ params.proj_w + params.proj_b
        logp = log_softmax_rows(logits[None, :])[0]
        total += -float(logp[sym])
        prev = sym
    return total / len(y)


def _pad_batch(batch, config: Seq2SeqConfig, dtype):
    """Pad a batch of (src_ids, tgt_ids) into aligned int arrays plus masks.

    Sources are reversed (when configured) before right-padding with PAD;
    targets get EOS appended and are teacher-forced from GO.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    srcs, ys = [], []
    for src, tgt in batch:
        src = _validate_ids(src, config.vocab_size)[:config.max_len]
        tgt = _validate_ids(tgt, config.vocab_size)[:config.max_len]
        if not src or not tgt:
            raise ValueError("empty sequence in batch")
        if config.reverse_source:
            src = src[::-1]
        srcs.append(src)
        ys.append(tgt + [EOS])
    b = len(batch)
    s_len = max(len(s) for s in srcs)
    t_len = max(len(y) for y in ys)
    src_arr = np.full((b, s_len), PAD, dtype=np.int64)
    src_mask = np.zeros((b, s_len), dtype=dtype)
    dec_in = np.full((b, t_len), PAD, dtype=np.int64)
    dec_tgt = np.full((b, t_len), PAD, dtype=np.int64)
    tgt_mask = np.zeros((b, t_len), dtype=dtype)
    for r, (src, y) in enumerate(zip(srcs, ys)):
        src_arr[r, :len(src)] = src
        src_mask[r, :len(src)] = 1.0
        dec_in[r, 0] = GO
        dec_in[r, 1:len(y)] = y[:-1]
        dec_tgt[r, :len(y)] = y
        tgt_mask[r, :len(y)] = 1.0
    return src_arr, src_mask, dec_in, dec_tgt, tgt_mask


def loss_and_grads(params: Seq2SeqParams, config: Seq2SeqConfig, batch):
    """Teacher-forced mean per-symbol loss and exact gradients for a batch.

    Padded positions are masked out of the loss and contribute zero
    gradient everywhere.
    """
    dtype = params.embed_src.dtype
    src_arr, src_mask, dec_in, dec_tgt, tgt_mask = _pad_batch(batch, config, dtype)
    b, s_len = src_arr.shape
    t_len = dec_in.shape[1]
    hd = config.hidden_dim
    rows = np.arange(b)

    # encoder forward, masking padded steps so state carries through
    h = np.zeros((b, hd), dtype=dtype)
    c = np.zeros((b, hd), dtype=dtype)
    enc_caches = []
    for t in range(s_len):
        x = params.embed_src[src_arr[:, t]]
        hn, cn, cache = lstm_step(params.encoder, x, h, c)
        m = src_mask[:, t:t + 1]
        h = m * hn + (1.0 - m) * h
        c = m * cn + (1.0 - m) * c
        enc_caches.append((cache, m))

    # decoder forward (teacher forcing); loss masked on padding
    n_tok = float(tgt_mask.sum())
    dec_caches = []
    dec_h = []
    dlogits_list = []
    loss_total = 0.0
    for t in range(t_len):
        x = params.embed_tgt[dec_in[:, t]]
        h, c, cache = lstm_step(params.decoder, x, h, c)
        dec_caches.append(cache)
        dec_h.append(h)
        logits = h @ params.proj_w + params.proj_b
        logp = log_softmax_rows(logits)
        m = tgt_mask[:, t]
        loss_total += -float((logp[rows, dec_tgt[:, t]] * m).sum())
        dl = np.exp(logp)
        dl[rows, dec_tgt[:, t]] -= 1.0
        dl *= (m / n_tok)[:, None]
        dlogits_list.append(dl)
    loss = loss_total / n_tok

    grads: GradSet = {k: np.zeros_like(v) for k, v in params.tensors().items()}
    dh = np.zeros((b, hd), dtype=dtype)
    dc = np.zeros((b, hd), dtype=dtype)
    for t in reversed(range(t_len)):
        dl = dlogits_list[t]
        grads["proj.W"] += dec_h[t].T @ dl
        grads["proj.b"] += dl.sum(axis=0)
        dh = dh + dl @ params.proj_w.T
        dx, dh, dc, g = lstm_step_backward(params.decoder, dec_caches[t], dh, dc)
        grads["dec.W"] += g["W"]
        grads["dec.b"] += g["b"]
        np.add.at(grads["embed_tgt"], dec_in[:, t], dx)
    for t in reversed(range(s_len)):
        cache, m = enc_caches[t]
        dx, dh_prev, dc_prev, g = lstm_step_backward(params.encoder, cache, m * dh, m * dc)
        grads["enc.W"] += g["W"]
        grads["enc.b"] += g["b"]
        np.add.at(grads["embed_src"], src_arr[:, t], dx)
        dh = dh_prev + (1.0 - m) * dh
        dc = dc_prev + (1.0 - m) * dc
    return loss, grads


def train_step(params: Seq2SeqParams, config: Seq2SeqConfig, batch, lr: float,
               clip: float = 5.0, momentum: float = 0.0,
               velocity: dict | None = None) -> tuple[float, Seq2SeqParams]:
    """One SGD update: forward, BPTT, global-norm clip, in-place step.

    With ``momentum`` > 0 the caller supplies a ``velocity`` dict that is
    carried across steps (classical momentum).
    """
    loss, grads = loss_and_grads(params, config, batch)
    grads = clip_global_norm(grads, clip)
    if momentum > 0.0:
        if velocity is None:
            raise ValueError("momentum > 0 requires a velocity dict")
        momentum_step(params.tensors(), grads, velocity, lr, momentum)
    else:
        sgd_step(params.tensors(), grads, lr)
    return loss, params


# --- bundle serialization -------------------------------------------------
# A bundle is a directory: meta.json (config + tensor manifest with CRC32),
# vocab.txt, and one raw little-endian float32 file per tensor.

def write_tensor_dir(path, tensors: dict, meta: dict) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {}
    for name, arr in sorted(tensors.items()):
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        (path / f"{name}.bin").write_bytes(raw)
        manifest[name] = {"shape": list(arr.shape), "crc32": zlib.crc32(raw)}
    full = dict(meta)
    full["format_version"] = FORMAT_VERSION
    full["tensors"] = manifest
    (path / "meta.json").write_text(json.dumps(full, indent=2, sort_keys=True) + "\n",
                                    encoding="utf-8")


def read_tensor_dir(path):
    path = Path(path)
    meta_path = path / "meta.json"
    if not meta_path.is_file():
        raise BundleError(f"no meta.json in {path}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    if meta.get("format_version") != FORMAT_VERSION:
        raise BundleError(f"unsupported bundle format version {meta.get('format_version')}")
    tensors = {}
    for name, info in meta["tensors"].items():
        raw = (path / f"{name}.bin").read_bytes()
        shape = tuple(info["shape"])
        expected = int(np.prod(shape)) * 4
        if len(raw) != expected:
            raise BundleError(f"tensor {name!r} truncated: {len(raw)} bytes, expected {expected}")
        if zlib.crc32(raw) != info["crc32"]:
            raise BundleError(f"checksum mismatch for tensor {name!r}")
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    return tensors, meta


def save_bundle(params: Seq2SeqParams, config: Seq2SeqConfig, vocab: CharVocab,
                path, extra_meta: dict | None = None) -> None:
    meta = {"kind": "model", "config": config.to_dict()}
    if extra_meta:
        meta.update(extra_meta)
    write_tensor_dir(path, params.tensors(), meta)
    vocab.save(Path(path) / "vocab.txt")


def load_bundle(path):
    tensors, meta = read_tensor_dir(path)
    if meta.get("kind") != "model":
        raise BundleError(f"expected a model bundle, found kind {meta.get('kind')!r}")
    config = Seq2SeqConfig.from_dict(meta["config"])
    vocab = CharVocab.load(Path(path) / "vocab.txt")
    params = Seq2SeqParams.from_tensors(tensors)
    return params, config, vocab
