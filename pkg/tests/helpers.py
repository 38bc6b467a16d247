"""Shared fixtures for the test suite: gradient-check instances and toy decoders."""
from __future__ import annotations

import math

import numpy as np

from nlcorrect.numcore import ParamStore, grad_check_report, make_rng
from nlcorrect.seq2seq import (
    ModelConfig,
    _decoder_backward,
    _decoder_forward,
    _encoder_backward,
    _encoder_forward,
    _gru_backward,
    _gru_forward,
    backward,
    param_shapes,
    sequence_loss,
)
from nlcorrect.textdata import VOCAB, pad_rows, source_ids, target_ids

GRAD_TOL = 1e-4
SMALL = dict(hidden=8, enc_layers=2, dec_layers=2)


def wide_params(cfg: ModelConfig, seed: int = 1, scale: float = 0.7) -> ParamStore:
    """Weights and biases uniform in [-scale, scale].

    At the training init (+-0.1, zero biases) most gradients are ~1e-7 and the
    ReLU pre-activations sit near their kink, so central differences measure
    roundoff rather than the derivative. Wider values lift the gradients; going
    much past 0.7 saturates the softmax and tanh units and pushes some terms back
    under the noise floor (~1e-10 absolute at h=1e-5).
    """
    rng = make_rng(seed)
    store = ParamStore()
    for name, shape in param_shapes(cfg).items():
        store.add(name, rng.uniform(-scale, scale, size=shape))
    return store


def end_to_end_report(cfg: ModelConfig, src="hello", tgt="hallo", seed=1, dropout_seed=None) -> dict[str, float]:
    params = wide_params(cfg, seed)
    s, t = source_ids(src), target_ids(tgt)
    training = dropout_seed is not None

    def loss(store):
        rng = make_rng(dropout_seed) if training else None
        return sequence_loss(s, t, store, cfg, training=training, rng=rng)

    grads = backward(s, t, params, cfg, rng=make_rng(dropout_seed) if training else None, training=training)
    return grad_check_report(loss, params, grads, h=1e-5, n_coords=60)


def gru_layer_report(reverse: bool, masked: bool, seed: int = 3) -> dict[str, float]:
    rng = make_rng(seed)
    B, T, D, H = 2, 5, 4, 3
    store = ParamStore()
    store.add("X", rng.uniform(-1, 1, (B, T, D)))
    store.add("W", rng.uniform(-1, 1, (3 * H, D)))
    store.add("U", rng.uniform(-1, 1, (3 * H, H)))
    store.add("b", rng.uniform(-1, 1, (3 * H,)))
    R = rng.normal(size=(B, T, H))
    mask = None
    if masked:
        mask = np.ones((B, T))
        mask[1, 3:] = 0.0

    def loss(st):
        out, _ = _gru_forward(st["X"], st["W"], st["U"], st["b"], mask, reverse)
        return float(np.sum(out * R))

    _, cache = _gru_forward(store["X"], store["W"], store["U"], store["b"], mask, reverse)
    dX, dW, dU, db = _gru_backward(R, store["X"], store["W"], store["U"], cache, mask, reverse)
    return grad_check_report(loss, store, {"X": dX, "W": dW, "U": dU, "b": db})


def encoder_report(cfg: ModelConfig, seed: int = 4) -> dict[str, float]:
    """Pyramid encoder in isolation, batch of two sources of different length."""
    params = wide_params(cfg, seed)
    src, src_len = pad_rows([source_ids("hello"), source_ids("abc")], VOCAB.EOS)
    C, _, _ = _encoder_forward(src, src_len, params, cfg, False, None)
    R = make_rng(seed + 1).normal(size=C.shape)
    enc_names = [n for n in params.keys() if n.startswith("enc.")]

    def loss(st):
        out, _, _ = _encoder_forward(src, src_len, st, cfg, False, None)
        return float(np.sum(out * R))

    _, _, cache = _encoder_forward(src, src_len, params, cfg, False, None)
    grads = {n: np.zeros_like(p) for n, p in params.items()}
    _encoder_backward(R, params, cfg, cache, grads)
    sub = ParamStore({n: params[n] for n in enc_names})
    return grad_check_report(loss_wrapper(loss, params, enc_names), sub, {n: grads[n] for n in enc_names})


def decoder_report(cfg: ModelConfig, seed: int = 5) -> dict[str, float]:
    """Decoder, attention and output layers with the encoder states as an input."""
    params = wide_params(cfg, seed)
    rng = make_rng(seed + 1)
    B, K, L = 2, 3, 4
    store = ParamStore({n: p for n, p in params.items() if not n.startswith("enc.")})
    store.add("C", rng.uniform(-1, 1, (B, K, cfg.hidden)))
    enc_mask = np.ones((B, K))
    enc_mask[1, 2] = 0.0
    tgt_in = rng.integers(0, cfg.vocab_size, size=(B, L))
    R = rng.normal(size=(B, L, cfg.vocab_size))

    def loss(st):
        logp, _ = _decoder_forward(tgt_in, st["C"], enc_mask, st, cfg, False, None)
        return float(np.sum(logp * R))

    logp, cache = _decoder_forward(tgt_in, store["C"], enc_mask, store, cfg, False, None)
    # d/dlogits of sum(R * log_softmax(logits))
    dlogits = R - np.exp(logp) * R.sum(axis=-1, keepdims=True)
    grads = {n: np.zeros_like(p) for n, p in store.items()}
    grads["C"] = _decoder_backward(dlogits, store, cfg, cache, grads) * enc_mask[:, :, None]
    return grad_check_report(loss, store, grads)


def loss_wrapper(loss, full: ParamStore, names):
    """Probe a subset of parameters while the loss still sees the whole store."""

    def f(sub):
        for n in names:
            full.params[n] = sub[n]
        return loss(full)

    return f


# ---------------------------------------------------------------------------
# Table-driven decoders for beam-search tests


class TableModel:
    """A decoder whose next-symbol log-probs depend only on the emitted prefix.

    ``table`` maps an emitted string to {char or "<eos>": prob}; any prefix not in
    the table emits <eos> with probability ``1 - eps``. Remaining mass is spread
    over the other symbols so every log-prob is finite.
    """

    def __init__(self, table: dict[str, dict[str, float]], eps: float = 1e-6):
        self.table = table
        self.eps = eps
        self.prefixes: list[str] = [""]
        self.index = {"": 0}

    def _id(self, prefix: str) -> int:
        if prefix not in self.index:
            self.index[prefix] = len(self.prefixes)
            self.prefixes.append(prefix)
        return self.index[prefix]

    def _row(self, prefix: str) -> np.ndarray:
        dist = self.table.get(prefix, {"<eos>": 1.0 - self.eps})
        p = np.zeros(VOCAB.size)
        for sym, q in dist.items():
            p[VOCAB.EOS if sym == "<eos>" else VOCAB.char_id(sym)] = q
        rest = 1.0 - p.sum()
        free = p == 0
        p[free] = rest / free.sum()
        return np.log(p)

    def start(self, source_ids):
        return None, np.array([[0.0]])

    def step(self, context, prev_ids, states):
        rows, new = [], []
        for prev, st in zip(prev_ids, states):
            prefix = self.prefixes[int(st[0, 0])]
            if int(prev) != VOCAB.SOS:
                prefix = prefix + VOCAB.decode([int(prev)])
            rows.append(self._row(prefix))
            new.append([[float(self._id(prefix))]])
        return np.array(rows), np.array(new)


class RandomModel:
    """Deterministic pseudo-random decoder: log-probs are a hash of the emitted prefix."""

    def __init__(self, seed: int, eos_bias: float = 0.0, peak: float = 3.0):
        self.seed = seed
        self.eos_bias = eos_bias
        self.peak = peak
        self.prefixes: list[tuple] = [()]
        self.index = {(): 0}

    def start(self, source_ids):
        return tuple(source_ids), np.array([[0.0]])

    def step(self, context, prev_ids, states):
        rows, new = [], []
        for prev, st in zip(prev_ids, states):
            prefix = self.prefixes[int(st[0, 0])]
            if int(prev) != VOCAB.SOS:
                prefix = prefix + (int(prev),)
            if prefix not in self.index:
                self.index[prefix] = len(self.prefixes)
                self.prefixes.append(prefix)
            h = abs(hash((self.seed, context, prefix))) % (2**32)
            logits = make_rng(h).normal(size=VOCAB.size) * self.peak
            logits[VOCAB.EOS] += self.eos_bias + 0.3 * len(prefix)
            logits -= logits.max()
            rows.append(logits - math.log(np.exp(logits).sum()))
            new.append([[float(self.index[prefix])]])
        return np.array(rows), np.array(new)
