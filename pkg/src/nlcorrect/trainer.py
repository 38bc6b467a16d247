"""Training loop, perplexity-based model selection and checkpoint files.

Checkpoint layout (version 1)::

    NLCKPT\\n
    <header byte length, decimal>\\n
    <header: UTF-8 JSON, sorted keys, 2-space indent>
    <payload: float32 little-endian, parameters concatenated in manifest order>

The header records the format version, model configuration, vocabulary
fingerprint, epoch, dev perplexity and a manifest of ``name``/``shape``/``offset``
(byte offset into the payload) entries.
"""
from __future__ import annotations

import json
import logging
import math
import os
import shutil
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .numcore import NumericError, ParamStore, adam_step, derive_seed, make_rng
from .seq2seq import ModelConfig, Seq2Seq, batch_loss, param_shapes
from .textdata import VOCAB, batch_from_pairs, make_batches

log = logging.getLogger(__name__)

MAGIC = b"NLCKPT\n"
FORMAT_VERSION = 1


class CheckpointFormatError(ValueError):
    pass


class CheckpointVersionError(CheckpointFormatError):
    pass


@dataclass
class TrainConfig:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 128
    max_epochs: int = 40
    dropout: float = 0.15
    seed: int = 0
    checkpoint_dir: str | None = None
    clip_norm: float | None = None  # off by default

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float  # mean per predicted symbol
    train_accuracy: float  # teacher-forced, with dropout active
    dev_perplexity: float
    steps: int


@dataclass
class Checkpoint:
    model: Seq2Seq
    epoch: int
    dev_perplexity: float
    path: Path | None = None
    history: list[EpochStats] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Evaluation


def _eval_batches(model: Seq2Seq, corpus: Sequence[tuple[str, str]], batch_size: int):
    cfg = model.config
    for i in range(0, len(corpus), batch_size):
        chunk = corpus[i : i + batch_size]
        yield batch_loss(batch_from_pairs(chunk), model.params, cfg, training=False)


def perplexity(model: Seq2Seq, corpus: Sequence[tuple[str, str]], batch_size: int = 64) -> float:
    """Character-level perplexity, teacher forced, dropout off."""
    if not corpus:
        raise ValueError("perplexity of an empty corpus")
    total = n = 0
    for res in _eval_batches(model, corpus, batch_size):
        total += res.loss
        n += res.n_symbols
    return math.exp(total / n)


def char_accuracy(model: Seq2Seq, corpus: Sequence[tuple[str, str]], batch_size: int = 64) -> float:
    """Fraction of target symbols the teacher-forced model ranks first."""
    hit = n = 0
    for res in _eval_batches(model, corpus, batch_size):
        hit += res.n_correct
        n += res.n_symbols
    return hit / n


# ---------------------------------------------------------------------------
# Training


def train(
    model: Seq2Seq,
    train_corpus: Sequence[tuple[str, str]],
    dev_corpus: Sequence[tuple[str, str]],
    cfg: TrainConfig,
    on_epoch: Callable[[EpochStats], None] | None = None,
) -> Checkpoint:
    """Train with Adam and return the epoch with the lowest dev perplexity.

    Each batch's loss is the summed sequence loss divided by the batch size.
    With ``cfg.checkpoint_dir`` set, every epoch is saved as ``epoch-NNN.ckpt``,
    the winner is copied to ``best.ckpt`` and a ``history.tsv`` is written.
    """
    if not train_corpus or not dev_corpus:
        raise ValueError("training and dev corpora must be nonempty")
    model.config.dropout = cfg.dropout
    batch_rng = make_rng(derive_seed(cfg.seed, "trainer", "batches"))
    drop_rng = make_rng(derive_seed(cfg.seed, "trainer", "dropout"))
    ckpt_dir = Path(cfg.checkpoint_dir) if cfg.checkpoint_dir else None
    if ckpt_dir:
        ckpt_dir.mkdir(parents=True, exist_ok=True)

    history: list[EpochStats] = []
    best: Checkpoint | None = None
    for epoch in range(1, cfg.max_epochs + 1):
        total = hits = n = 0
        for bi, batch in enumerate(make_batches(train_corpus, VOCAB, cfg.batch_size, batch_rng)):
            res = batch_loss(
                batch, model.params, model.config, training=True, rng=drop_rng,
                with_grads=True, grad_scale=1.0 / len(batch),
            )
            if not math.isfinite(res.loss):
                raise NumericError(f"non-finite loss at epoch {epoch}, batch {bi}")
            if cfg.clip_norm is not None:
                _clip(res.grads, cfg.clip_norm)
            adam_step(model.params, res.grads, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
            total += res.loss
            hits += res.n_correct
            n += res.n_symbols
        ppl = perplexity(model, dev_corpus)
        if not math.isfinite(ppl):
            raise NumericError(f"non-finite dev perplexity after epoch {epoch}")
        stats = EpochStats(epoch, total / n, hits / n, ppl, model.params.t)
        history.append(stats)
        log.info("epoch %d  train loss %.4f  acc %.4f  dev ppl %.4f", epoch, stats.train_loss, stats.train_accuracy, ppl)
        if on_epoch:
            on_epoch(stats)
        path = None
        if ckpt_dir:
            path = ckpt_dir / f"epoch-{epoch:03d}.ckpt"
            save_checkpoint(model, {"epoch": epoch, "dev_perplexity": ppl}, path)
        if best is None or ppl < best.dev_perplexity:
            best = Checkpoint(Seq2Seq(model.config, model.params.copy()), epoch, ppl, path)

    best.history = history
    if ckpt_dir:
        shutil.copyfile(best.path, ckpt_dir / "best.ckpt")
        with open(ckpt_dir / "history.tsv", "w", encoding="utf-8") as f:
            f.write("epoch\ttrain_loss\ttrain_accuracy\tdev_perplexity\tsteps\tbest\n")
            for s in history:
                f.write(f"{s.epoch}\t{s.train_loss:.6f}\t{s.train_accuracy:.6f}\t{s.dev_perplexity:.6f}\t{s.steps}\t{int(s.epoch == best.epoch)}\n")
    best.model.config.dropout = cfg.dropout
    return best


def _clip(grads: dict, max_norm: float) -> None:
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm > max_norm:
        for g in grads.values():
            g *= max_norm / norm


# ---------------------------------------------------------------------------
# Checkpoint I/O


def save_checkpoint(model: Seq2Seq, meta: dict, path: str | Path) -> None:
    manifest = []
    offset = 0
    for name, p in model.params.items():
        manifest.append({"name": name, "shape": list(p.shape), "offset": offset})
        offset += p.size * 4
    header = {
        "format_version": FORMAT_VERSION,
        "model_config": model.config.to_dict(),
        "vocab_hash": VOCAB.fingerprint(),
        "epoch": meta.get("epoch"),
        "dev_perplexity": meta.get("dev_perplexity"),
        "meta": {k: v for k, v in meta.items() if k not in ("epoch", "dev_perplexity")},
        "manifest": manifest,
        "payload_bytes": offset,
    }
    text = json.dumps(header, indent=2, sort_keys=True).encode("utf-8")
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(f"{len(text)}\n".encode("ascii"))
        f.write(text)
        for p in model.params.params.values():
            f.write(np.ascontiguousarray(p, dtype="<f4").tobytes())
    os.replace(tmp, path)


def read_header(path: str | Path) -> tuple[dict, bytes]:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise CheckpointFormatError(f"{path}: not a checkpoint file")
    rest = data[len(MAGIC) :]
    nl = rest.find(b"\n")
    try:
        hlen = int(rest[:nl])
        header = json.loads(rest[nl + 1 : nl + 1 + hlen].decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise CheckpointFormatError(f"{path}: unreadable header ({exc})") from None
    return header, rest[nl + 1 + hlen :]


def load_checkpoint(path: str | Path) -> tuple[Seq2Seq, dict]:
    """Load a checkpoint; returns the model and its header."""
    header, payload = read_header(path)
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"{path}: unsupported checkpoint version {version!r}")
    cfg = ModelConfig(**header["model_config"])
    if header.get("vocab_hash") != VOCAB.fingerprint():
        raise CheckpointFormatError(f"{path}: vocabulary fingerprint mismatch")
    expected = param_shapes(cfg)
    manifest = header["manifest"]
    if [m["name"] for m in manifest] != list(expected) or any(
        tuple(m["shape"]) != expected[m["name"]] for m in manifest
    ):
        raise CheckpointFormatError(f"{path}: manifest does not match the model configuration")
    need = sum(math.prod(s) for s in expected.values()) * 4
    if len(payload) != need or header.get("payload_bytes") != need:
        raise CheckpointFormatError(f"{path}: payload is {len(payload)} bytes, expected {need}")
    store = ParamStore()
    for m in manifest:
        shape = tuple(m["shape"])
        count = math.prod(shape)
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=m["offset"])
        store.add(m["name"], arr.astype(np.float64).reshape(shape))
    return Seq2Seq(cfg, store), header
