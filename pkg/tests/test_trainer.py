from __future__ import annotations

import json

import numpy as np
import pytest

from nlcorrect.numcore import NumericError, ParamStore
from nlcorrect.seq2seq import ModelConfig, Seq2Seq, param_shapes
from nlcorrect.trainer import (
    CheckpointFormatError,
    CheckpointVersionError,
    TrainConfig,
    char_accuracy,
    load_checkpoint,
    perplexity,
    save_checkpoint,
    train,
)

TINY = ModelConfig(hidden=8, enc_layers=2, dec_layers=1, dropout=0.0)
PAIRS = [("ab cd", "ab cd"), ("hello", "hallo"), ("x y", "x z"), ("test", "text"), ("aa", "a")]


def test_checkpoint_roundtrip(tmp_path):
    model = Seq2Seq(TINY, seed=3)
    save_checkpoint(model, {"epoch": 4, "dev_perplexity": 2.5, "note": "x"}, tmp_path / "m.ckpt")
    back, header = load_checkpoint(tmp_path / "m.ckpt")
    assert header["epoch"] == 4 and header["dev_perplexity"] == 2.5 and header["meta"] == {"note": "x"}
    assert back.config == model.config
    for name, p in model.params.items():
        np.testing.assert_array_equal(back.params[name], p.astype(np.float32).astype(np.float64))
    raw = (tmp_path / "m.ckpt").read_bytes()
    assert raw.startswith(b"NLCKPT\n")


def corrupt_header(path, fn):
    raw = path.read_bytes()
    magic, rest = raw[:7], raw[7:]
    nl = rest.index(b"\n")
    n = int(rest[:nl])
    header = json.loads(rest[nl + 1 : nl + 1 + n])
    fn(header)
    text = json.dumps(header, indent=2, sort_keys=True).encode()
    path.write_bytes(magic + f"{len(text)}\n".encode() + text + rest[nl + 1 + n :])


def test_checkpoint_errors(tmp_path):
    p = tmp_path / "m.ckpt"
    save_checkpoint(Seq2Seq(TINY, seed=0), {}, p)
    good = p.read_bytes()

    p.write_bytes(b"garbage")
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(p)

    p.write_bytes(good[:-8])
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(p)

    p.write_bytes(good)
    corrupt_header(p, lambda h: h.update(format_version=99))
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(p)

    p.write_bytes(good)
    corrupt_header(p, lambda h: h["manifest"][0].update(shape=[1, 1]))
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(p)

    p.write_bytes(good)
    corrupt_header(p, lambda h: h.update(vocab_hash="0"))
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(p)


def test_training_is_deterministic(tmp_path):
    cfg = dict(lr=5e-3, batch_size=2, max_epochs=3, dropout=0.1, seed=7)
    runs = []
    for k in range(2):
        model = Seq2Seq(ModelConfig(**{**TINY.to_dict(), "dropout": 0.1}), seed=1)
        ck = train(model, PAIRS, PAIRS[:2], TrainConfig(**cfg, checkpoint_dir=str(tmp_path / f"r{k}")))
        runs.append(ck)
    a, b = (tmp_path / "r0"), (tmp_path / "r1")
    assert (a / "best.ckpt").read_bytes() == (b / "best.ckpt").read_bytes()
    assert (a / "history.tsv").read_text() == (b / "history.tsv").read_text()
    for e in range(1, 4):
        assert (a / f"epoch-{e:03d}.ckpt").read_bytes() == (b / f"epoch-{e:03d}.ckpt").read_bytes()


def test_best_epoch_is_argmin_dev_perplexity(tmp_path):
    model = Seq2Seq(TINY, seed=2)
    ck = train(model, PAIRS, PAIRS, TrainConfig(lr=1e-2, batch_size=2, max_epochs=5, dropout=0.0))
    ppls = [s.dev_perplexity for s in ck.history]
    assert ck.epoch == 1 + int(np.argmin(ppls))
    assert ck.dev_perplexity == min(ppls)
    assert perplexity(ck.model, PAIRS) == pytest.approx(ck.dev_perplexity)


def test_training_reduces_loss():
    model = Seq2Seq(TINY, seed=4)
    before = perplexity(model, PAIRS)
    ck = train(model, PAIRS, PAIRS, TrainConfig(lr=1e-2, batch_size=5, max_epochs=20, dropout=0.0))
    assert ck.dev_perplexity < before
    assert ck.history[-1].train_loss < ck.history[0].train_loss


def test_zero_model_is_uniform():
    store = ParamStore({n: np.zeros(s) for n, s in param_shapes(TINY).items()})
    model = Seq2Seq(TINY, store)
    assert perplexity(model, PAIRS) == pytest.approx(98.0)
    assert 0.0 <= char_accuracy(model, PAIRS) <= 1.0


def test_non_finite_loss_aborts_with_location():
    model = Seq2Seq(TINY, seed=0)
    model.params["out.proj.b"][:] = np.nan
    with pytest.raises(NumericError, match="epoch 1, batch 0"):
        train(model, PAIRS, PAIRS, TrainConfig(lr=1e-3, batch_size=2, max_epochs=1))


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(lr=0.0)
    with pytest.raises(ValueError):
        TrainConfig(max_epochs=0)
    with pytest.raises(ValueError):
        train(Seq2Seq(TINY), [], PAIRS, TrainConfig())
