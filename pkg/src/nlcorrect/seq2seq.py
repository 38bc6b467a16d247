"""Character-level encoder-decoder with a pyramidal bidirectional GRU encoder
and content-based attention.

Shapes use a column-vector convention for parameters (a weight mapping
``n -> m`` is stored ``m x n``) while activations are batched row-major arrays
``(batch, time, features)``. Forward passes cache what the matching backward
pass needs; gradients are exact for the masks (dropout included) drawn in the
forward pass.

Parameter layout (H hidden, E embedding, V vocabulary):

* ``enc.embed`` V x E, ``dec.embed`` V x E
* ``enc.{j}.{fwd,bwd}.{W,U,b}`` GRU weights: W is 3H x D_in, U is 3H x H, b is 3H,
  gate rows ordered update, reset, candidate
* ``enc.{j}.pyr.{W,b}`` for j >= 1: H x 2H and H, merges adjacent state pairs
* ``dec.{j}.{W,U,b}`` decoder GRU layers
* ``att.phi1``/``att.phi2`` H x H + bias, tanh; scores are their dot products
* ``out.comb`` H x 2H + bias (ReLU) over ``[a; d_top]``, ``out.proj`` V x H + bias
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .numcore import (
    DimensionError,
    ParamStore,
    Tensor,
    dropout_mask,
    log_softmax,
    make_rng,
    sigmoid,
    softmax,
)
from .textdata import VOCAB, Batch, pad_rows

LOG_FLOOR = math.log(1e-12)


@dataclass
class ModelConfig:
    enc_layers: int = 3  # N
    dec_layers: int = 3  # M
    hidden: int = 400  # H
    embed: int | None = None  # E, defaults to H
    vocab_size: int = VOCAB.size
    dropout: float = 0.15
    attention: str = "softmax"  # or "linear": raw scores divided by their sum

    def __post_init__(self):
        if self.embed is None:
            self.embed = self.hidden
        for name in ("enc_layers", "dec_layers", "hidden", "embed", "vocab_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.attention not in ("softmax", "linear"):
            raise ValueError(f"unknown attention normalization {self.attention!r}")

    @property
    def reduction(self) -> int:
        return 2 ** (self.enc_layers - 1)

    def to_dict(self) -> dict:
        return asdict(self)


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    H, E, V = cfg.hidden, cfg.embed, cfg.vocab_size
    shapes: dict[str, tuple[int, ...]] = {"enc.embed": (V, E)}
    for j in range(cfg.enc_layers):
        if j > 0:
            shapes[f"enc.{j}.pyr.W"] = (H, 2 * H)
            shapes[f"enc.{j}.pyr.b"] = (H,)
        din = E if j == 0 else H
        for d in ("fwd", "bwd"):
            shapes[f"enc.{j}.{d}.W"] = (3 * H, din)
            shapes[f"enc.{j}.{d}.U"] = (3 * H, H)
            shapes[f"enc.{j}.{d}.b"] = (3 * H,)
    shapes["dec.embed"] = (V, E)
    for j in range(cfg.dec_layers):
        din = E if j == 0 else H
        shapes[f"dec.{j}.W"] = (3 * H, din)
        shapes[f"dec.{j}.U"] = (3 * H, H)
        shapes[f"dec.{j}.b"] = (3 * H,)
    shapes["att.phi1.W"] = (H, H)
    shapes["att.phi1.b"] = (H,)
    shapes["att.phi2.W"] = (H, H)
    shapes["att.phi2.b"] = (H,)
    shapes["out.comb.W"] = (H, 2 * H)
    shapes["out.comb.b"] = (H,)
    shapes["out.proj.W"] = (V, H)
    shapes["out.proj.b"] = (V,)
    return shapes


def init_params(cfg: ModelConfig, rng: np.random.Generator, scale: float = 0.1) -> ParamStore:
    """Weights and embeddings uniform in [-scale, scale], biases zero."""
    store = ParamStore()
    for name, shape in param_shapes(cfg).items():
        if name.endswith(".b"):
            store.add(name, np.zeros(shape))
        else:
            store.add(name, rng.uniform(-scale, scale, size=shape))
    return store


def check_params(params: ParamStore, cfg: ModelConfig) -> None:
    expected = param_shapes(cfg)
    if list(params.keys()) != list(expected):
        raise DimensionError("parameter names do not match the model configuration")
    for name, shape in expected.items():
        if params[name].shape != shape:
            raise DimensionError(f"{name}: expected shape {shape}, got {params[name].shape}")


# ---------------------------------------------------------------------------
# GRU


def gru_cell(h_prev: Tensor, x: Tensor, W: Tensor, U: Tensor, b: Tensor) -> Tensor:
    """One GRU step; works on single vectors or on batches (leading axis).

    z = sigmoid(W_z x + U_z h + b_z), r = sigmoid(W_r x + U_r h + b_r),
    c = tanh(W_c x + U_c (r * h) + b_c), h' = (1 - z) * h + z * c
    """
    H = U.shape[1]
    if W.shape[0] != 3 * H or U.shape != (3 * H, H) or b.shape != (3 * H,):
        raise DimensionError(f"gru_cell: inconsistent gate shapes W{W.shape} U{U.shape} b{b.shape}")
    if x.shape[-1] != W.shape[1] or h_prev.shape[-1] != H:
        raise DimensionError(f"gru_cell: x{x.shape} / h{h_prev.shape} do not match W{W.shape}")
    xp = x @ W.T + b
    zr = sigmoid(xp[..., : 2 * H] + h_prev @ U[: 2 * H].T)
    z, r = zr[..., :H], zr[..., H:]
    c = np.tanh(xp[..., 2 * H :] + (r * h_prev) @ U[2 * H :].T)
    return h_prev + z * (c - h_prev)


def _gru_forward(X: Tensor, W: Tensor, U: Tensor, b: Tensor, mask: Tensor | None, reverse: bool):
    """Run a GRU over ``X`` (B, T, D). Masked steps carry the state through unchanged."""
    B, T, _ = X.shape
    H = U.shape[1]
    XP = X @ W.T + b
    Uzr_T = U[: 2 * H].T
    Uc_T = U[2 * H :].T
    h = np.zeros((B, H))
    out = np.empty((B, T, H))
    hprev = np.empty((T, B, H))
    Z = np.empty((T, B, H))
    R = np.empty((T, B, H))
    C = np.empty((T, B, H))
    steps = range(T - 1, -1, -1) if reverse else range(T)
    for t in steps:
        xp = XP[:, t]
        zr = sigmoid(xp[:, : 2 * H] + h @ Uzr_T)
        z, r = zr[:, :H], zr[:, H:]
        c = np.tanh(xp[:, 2 * H :] + (r * h) @ Uc_T)
        hprev[t], Z[t], R[t], C[t] = h, z, r, c
        hn = h + z * (c - h)
        if mask is not None:
            hn = h + mask[:, t, None] * (hn - h)
        h = hn
        out[:, t] = h
    return out, (hprev, Z, R, C)


def _gru_backward(dOut: Tensor, X: Tensor, W: Tensor, U: Tensor, cache, mask: Tensor | None, reverse: bool):
    hprev, Z, R, C = cache
    B, T, D = X.shape
    H = U.shape[1]
    Uzr, Uc = U[: 2 * H], U[2 * H :]
    dXP = np.empty((B, T, 3 * H))
    dUzr = np.zeros((2 * H, H))
    dUc = np.zeros((H, H))
    dh = np.zeros((B, H))
    steps = range(T) if reverse else range(T - 1, -1, -1)
    for t in steps:
        g = dh + dOut[:, t]
        hp, z, r, c = hprev[t], Z[t], R[t], C[t]
        if mask is not None:
            m = mask[:, t, None]
            dhn = m * g
            dh = g - dhn
        else:
            dhn = g
            dh = np.zeros_like(g)
        dz = dhn * (c - hp)
        dac = dhn * z * (1.0 - c * c)
        dh += dhn * (1.0 - z)
        rh = r * hp
        dUc += dac.T @ rh
        drh = dac @ Uc
        dh += drh * r
        daz = dz * z * (1.0 - z)
        dar = drh * hp * r * (1.0 - r)
        dazr = np.concatenate([daz, dar], axis=1)
        dUzr += dazr.T @ hp
        dh += dazr @ Uzr
        dXP[:, t, : 2 * H] = dazr
        dXP[:, t, 2 * H :] = dac
    flat = dXP.reshape(-1, 3 * H)
    dW = flat.T @ X.reshape(-1, D)
    db = flat.sum(axis=0)
    dX = dXP @ W
    return dX, dW, np.concatenate([dUzr, dUc], axis=0), db


# ---------------------------------------------------------------------------
# Encoder


@dataclass
class EncodedSource:
    """Top-layer encoder states for one source (``c``, K x H) plus the raw length T."""

    c: Tensor
    length: int
    proj: Tensor | None = field(default=None, repr=False)  # phi2(c), cached for decoding

    @property
    def K(self) -> int:
        return self.c.shape[0]


def padded_length(T: int, cfg: ModelConfig) -> int:
    r = cfg.reduction
    return -(-T // r) * r


def _draw(shape, rate: float, rng, training: bool) -> Tensor | None:
    if not training or rate == 0.0:
        return None
    return dropout_mask(shape, rate, rng)


def _encoder_forward(src: np.ndarray, src_len: np.ndarray, params: ParamStore, cfg: ModelConfig, training: bool, rng):
    """Encode a padded batch. Returns (C, enc_mask, cache)."""
    B = src.shape[0]
    plen = np.array([padded_length(int(t), cfg) for t in src_len])
    width = int(plen.max())
    if src.shape[1] < width:
        src = np.concatenate([src, np.full((B, width - src.shape[1]), VOCAB.EOS, dtype=src.dtype)], axis=1)
    src = src[:, :width]
    mask = (np.arange(width)[None, :] < plen[:, None]).astype(np.float64)
    layers = []
    inp = params["enc.embed"][src]
    H = cfg.hidden
    hsum = None
    for j in range(cfg.enc_layers):
        lc: dict = {}
        if j > 0:
            Bn, T, _ = hsum.shape
            pairs = hsum.reshape(Bn, T // 2, 2 * H)
            inp = np.tanh(pairs @ params[f"enc.{j}.pyr.W"].T + params[f"enc.{j}.pyr.b"])
            mask = mask[:, ::2]
            lc["pairs"], lc["pyr_out"] = pairs, inp
        dm = _draw(inp.shape, cfg.dropout, rng, training)
        x = inp if dm is None else inp * dm
        f_out, f_cache = _gru_forward(x, params[f"enc.{j}.fwd.W"], params[f"enc.{j}.fwd.U"], params[f"enc.{j}.fwd.b"], mask, False)
        b_out, b_cache = _gru_forward(x, params[f"enc.{j}.bwd.W"], params[f"enc.{j}.bwd.U"], params[f"enc.{j}.bwd.b"], mask, True)
        hsum = (f_out + b_out) * mask[:, :, None]
        lc.update(x=x, drop=dm, f_cache=f_cache, b_cache=b_cache, mask=mask)
        layers.append(lc)
    return hsum, mask, {"src": src, "layers": layers}


def _encoder_backward(dC: Tensor, params: ParamStore, cfg: ModelConfig, cache, grads: dict) -> None:
    layers = cache["layers"]
    dh = dC
    for j in range(cfg.enc_layers - 1, -1, -1):
        lc = layers[j]
        mask = lc["mask"]
        dh = dh * mask[:, :, None]
        dx_f, dW, dU, db = _gru_backward(dh, lc["x"], params[f"enc.{j}.fwd.W"], params[f"enc.{j}.fwd.U"], lc["f_cache"], mask, False)
        grads[f"enc.{j}.fwd.W"] += dW
        grads[f"enc.{j}.fwd.U"] += dU
        grads[f"enc.{j}.fwd.b"] += db
        dx_b, dW, dU, db = _gru_backward(dh, lc["x"], params[f"enc.{j}.bwd.W"], params[f"enc.{j}.bwd.U"], lc["b_cache"], mask, True)
        grads[f"enc.{j}.bwd.W"] += dW
        grads[f"enc.{j}.bwd.U"] += dU
        grads[f"enc.{j}.bwd.b"] += db
        dinp = dx_f + dx_b
        if lc["drop"] is not None:
            dinp = dinp * lc["drop"]
        if j > 0:
            out = lc["pyr_out"]
            dpre = dinp * (1.0 - out * out)
            pairs = lc["pairs"]
            grads[f"enc.{j}.pyr.W"] += dpre.reshape(-1, dpre.shape[-1]).T @ pairs.reshape(-1, pairs.shape[-1])
            grads[f"enc.{j}.pyr.b"] += dpre.sum(axis=(0, 1))
            dpairs = dpre @ params[f"enc.{j}.pyr.W"]
            Bn, K, _ = dpairs.shape
            dh = dpairs.reshape(Bn, 2 * K, cfg.hidden)
        else:
            np.add.at(grads["enc.embed"], cache["src"], dinp)


def encode(source_ids: Sequence[int], params: ParamStore, cfg: ModelConfig, training: bool = False, rng=None) -> EncodedSource:
    """Encode one id sequence, right-padding with ``<eos>`` to a multiple of 2^(N-1)."""
    T = len(source_ids)
    if T == 0:
        raise ValueError("cannot encode an empty source")
    src, src_len = pad_rows([list(source_ids)], VOCAB.EOS)
    C, _, _ = _encoder_forward(src, src_len, params, cfg, training, rng)
    c = C[0]
    proj = np.tanh(c @ params["att.phi2.W"].T + params["att.phi2.b"])
    return EncodedSource(c=c, length=T, proj=proj)


# ---------------------------------------------------------------------------
# Attention


def _normalize_scores(S: Tensor, mask: Tensor, kind: str) -> Tensor:
    if kind == "softmax":
        return softmax(np.where(mask > 0, S, -np.inf), axis=-1)
    Sm = S * mask
    return Sm / Sm.sum(axis=-1, keepdims=True)


def _normalize_backward(dA: Tensor, alpha: Tensor, S: Tensor, mask: Tensor, kind: str) -> Tensor:
    inner = np.sum(dA * alpha, axis=-1, keepdims=True)
    if kind == "softmax":
        return alpha * (dA - inner)
    total = np.sum(S * mask, axis=-1, keepdims=True)
    return (dA - inner) / total * mask


def attend(d_top: Tensor, enc: EncodedSource, params: ParamStore, cfg: ModelConfig | None = None) -> tuple[Tensor, Tensor]:
    """Context vector and attention weights for decoder state(s) ``d_top`` (H or n x H)."""
    kind = cfg.attention if cfg is not None else "softmax"
    proj = enc.proj
    if proj is None:
        proj = np.tanh(enc.c @ params["att.phi2.W"].T + params["att.phi2.b"])
    q = np.tanh(d_top @ params["att.phi1.W"].T + params["att.phi1.b"])
    scores = q @ proj.T
    alpha = _normalize_scores(scores, np.ones(enc.K), kind)
    return alpha @ enc.c, alpha


# ---------------------------------------------------------------------------
# Decoder


@dataclass
class DecoderState:
    layers: list[Tensor]  # one H-vector per decoder layer
    prev_id: int = VOCAB.SOS


def initial_state(cfg: ModelConfig) -> DecoderState:
    return DecoderState([np.zeros(cfg.hidden) for _ in range(cfg.dec_layers)], VOCAB.SOS)


def step_logprobs(
    prev_ids: np.ndarray,
    states: Tensor,
    enc: EncodedSource,
    params: ParamStore,
    cfg: ModelConfig,
    training: bool = False,
    rng=None,
) -> tuple[Tensor, Tensor]:
    """Advance ``n`` decoder states (n x M x H) by one symbol each; returns log-probs (n x V)."""
    prev_ids = np.asarray(prev_ids)
    if prev_ids.size and (prev_ids.min() < 0 or prev_ids.max() >= cfg.vocab_size):
        raise ValueError("previous symbol id outside vocabulary")
    x = params["dec.embed"][prev_ids]
    new = np.empty_like(states)
    for j in range(cfg.dec_layers):
        dm = _draw(x.shape, cfg.dropout, rng, training)
        if dm is not None:
            x = x * dm
        x = gru_cell(states[:, j], x, params[f"dec.{j}.W"], params[f"dec.{j}.U"], params[f"dec.{j}.b"])
        new[:, j] = x
    a, _ = attend(x, enc, params, cfg)
    comb_in = np.concatenate([a, x], axis=-1)
    dm = _draw(comb_in.shape, cfg.dropout, rng, training)
    if dm is not None:
        comb_in = comb_in * dm
    o = np.maximum(comb_in @ params["out.comb.W"].T + params["out.comb.b"], 0.0)
    logits = o @ params["out.proj.W"].T + params["out.proj.b"]
    return log_softmax(logits), new


def decode_step(
    prev_id: int,
    state: DecoderState,
    enc: EncodedSource,
    params: ParamStore,
    cfg: ModelConfig,
    training: bool = False,
    rng=None,
) -> tuple[Tensor, DecoderState]:
    """Output distribution over the next symbol and the advanced state."""
    if not 0 <= prev_id < cfg.vocab_size:
        raise ValueError(f"symbol id {prev_id} outside vocabulary")
    if len(state.layers) != cfg.dec_layers:
        raise ValueError("decoder state layer count does not match the model")
    states = np.stack(state.layers)[None]
    logp, new = step_logprobs(np.array([prev_id]), states, enc, params, cfg, training, rng)
    return np.exp(logp[0]), DecoderState(list(new[0]), prev_id)


def _decoder_forward(tgt_in: np.ndarray, C: Tensor, enc_mask: Tensor, params: ParamStore, cfg: ModelConfig, training: bool, rng):
    """Teacher-forced decoder over a whole padded batch. Returns log-probs (B, L, V) and a cache."""
    B, L = tgt_in.shape
    H = cfg.hidden
    x = params["dec.embed"][tgt_in]
    layers = []
    for j in range(cfg.dec_layers):
        dm = _draw(x.shape, cfg.dropout, rng, training)
        xin = x if dm is None else x * dm
        out, gcache = _gru_forward(xin, params[f"dec.{j}.W"], params[f"dec.{j}.U"], params[f"dec.{j}.b"], None, False)
        layers.append({"x": xin, "drop": dm, "cache": gcache})
        x = out
    D = x
    P1 = np.tanh(D @ params["att.phi1.W"].T + params["att.phi1.b"])
    P2 = np.tanh(C @ params["att.phi2.W"].T + params["att.phi2.b"])
    S = P1 @ P2.transpose(0, 2, 1)
    emask = enc_mask[:, None, :]
    alpha = _normalize_scores(S, emask, cfg.attention)
    A = alpha @ C
    comb = np.concatenate([A, D], axis=-1)
    dm = _draw(comb.shape, cfg.dropout, rng, training)
    comb_in = comb if dm is None else comb * dm
    pre = comb_in @ params["out.comb.W"].T + params["out.comb.b"]
    O = np.maximum(pre, 0.0)
    logits = O @ params["out.proj.W"].T + params["out.proj.b"]
    logp = log_softmax(logits)
    cache = dict(tgt_in=tgt_in, layers=layers, D=D, P1=P1, P2=P2, S=S, emask=emask, alpha=alpha,
                 C=C, comb_in=comb_in, comb_drop=dm, pre=pre, O=O, logp=logp)
    return logp, cache


def _decoder_backward(dlogits: Tensor, params: ParamStore, cfg: ModelConfig, cache, grads: dict) -> Tensor:
    """Backprop from output logits; accumulates into ``grads`` and returns dL/dC."""
    H, V = cfg.hidden, cfg.vocab_size
    O = cache["O"]
    grads["out.proj.W"] += dlogits.reshape(-1, V).T @ O.reshape(-1, H)
    grads["out.proj.b"] += dlogits.sum(axis=(0, 1))
    dO = dlogits @ params["out.proj.W"]
    dpre = dO * (cache["pre"] > 0)
    comb_in = cache["comb_in"]
    grads["out.comb.W"] += dpre.reshape(-1, H).T @ comb_in.reshape(-1, 2 * H)
    grads["out.comb.b"] += dpre.sum(axis=(0, 1))
    dcomb = dpre @ params["out.comb.W"]
    if cache["comb_drop"] is not None:
        dcomb = dcomb * cache["comb_drop"]
    dA, dD = dcomb[..., :H], dcomb[..., H:].copy()
    C, alpha = cache["C"], cache["alpha"]
    dalpha = dA @ C.transpose(0, 2, 1)
    dC = alpha.transpose(0, 2, 1) @ dA
    dS = _normalize_backward(dalpha, alpha, cache["S"], cache["emask"], cfg.attention)
    P1, P2 = cache["P1"], cache["P2"]
    dP1 = (dS @ P2) * (1.0 - P1 * P1)
    dP2 = (dS.transpose(0, 2, 1) @ P1) * (1.0 - P2 * P2)
    D = cache["D"]
    grads["att.phi1.W"] += dP1.reshape(-1, H).T @ D.reshape(-1, H)
    grads["att.phi1.b"] += dP1.sum(axis=(0, 1))
    dD += dP1 @ params["att.phi1.W"]
    grads["att.phi2.W"] += dP2.reshape(-1, H).T @ C.reshape(-1, H)
    grads["att.phi2.b"] += dP2.sum(axis=(0, 1))
    dC += dP2 @ params["att.phi2.W"]
    dx = dD
    for j in range(cfg.dec_layers - 1, -1, -1):
        lc = cache["layers"][j]
        dxin, dW, dU, db = _gru_backward(dx, lc["x"], params[f"dec.{j}.W"], params[f"dec.{j}.U"], lc["cache"], None, False)
        grads[f"dec.{j}.W"] += dW
        grads[f"dec.{j}.U"] += dU
        grads[f"dec.{j}.b"] += db
        dx = dxin if lc["drop"] is None else dxin * lc["drop"]
    np.add.at(grads["dec.embed"], cache["tgt_in"], dx)
    return dC


# ---------------------------------------------------------------------------
# Loss and gradients


@dataclass
class BatchResult:
    loss: float  # summed over every predicted symbol of every sequence
    n_symbols: int
    n_correct: int  # teacher-forced argmax hits
    token_logp: Tensor  # (B, L) log-prob of each target symbol, 0 at padding
    grads: dict[str, Tensor] | None = None


def batch_loss(
    batch: Batch,
    params: ParamStore,
    cfg: ModelConfig,
    training: bool = False,
    rng=None,
    with_grads: bool = False,
    grad_scale: float = 1.0,
) -> BatchResult:
    """Teacher-forced summed cross-entropy over a padded batch (optionally with gradients).

    Gradients are of ``grad_scale * loss``.
    """
    if np.any(batch.tgt_len < 2):
        raise ValueError("target sequences must contain <sos> and at least one symbol")
    if np.any(batch.src_len < 1):
        raise ValueError("empty source sequence")
    C, enc_mask, enc_cache = _encoder_forward(batch.src, batch.src_len, params, cfg, training, rng)
    L = int(batch.tgt_len.max()) - 1
    tgt_in = batch.tgt[:, :L]
    tgt_out = batch.tgt[:, 1 : L + 1]
    tmask = (np.arange(L)[None, :] < (batch.tgt_len[:, None] - 1)).astype(np.float64)
    logp, dec_cache = _decoder_forward(tgt_in, C, enc_mask, params, cfg, training, rng)
    tok = np.take_along_axis(logp, tgt_out[:, :, None], axis=2)[:, :, 0]
    clamped = np.maximum(tok, LOG_FLOOR)
    loss = float(-np.sum(clamped * tmask))
    n_correct = int(np.sum((logp.argmax(axis=2) == tgt_out) * tmask))
    result = BatchResult(loss, int(tmask.sum()), n_correct, tok * tmask)
    if with_grads:
        grads = {name: np.zeros_like(p) for name, p in params.items()}
        w = tmask * (tok > LOG_FLOOR) * grad_scale
        dlogits = np.exp(logp) * w[:, :, None]
        B_idx, L_idx = np.nonzero(w)
        dlogits[B_idx, L_idx, tgt_out[B_idx, L_idx]] -= w[B_idx, L_idx]
        dC = _decoder_backward(dlogits, params, cfg, dec_cache, grads)
        _encoder_backward(dC, params, cfg, enc_cache, grads)
        result.grads = grads
    return result


def _single_batch(source_ids: Sequence[int], target_ids: Sequence[int]) -> Batch:
    if len(target_ids) < 2:
        raise ValueError("target must hold <sos> and at least one more symbol")
    if len(source_ids) == 0:
        raise ValueError("empty source")
    src, sl = pad_rows([list(source_ids)], VOCAB.EOS)
    tgt, tl = pad_rows([list(target_ids)], VOCAB.EOS)
    return Batch(src, sl, tgt, tl, np.arange(1))


def sequence_loss(
    source_ids: Sequence[int],
    target_ids: Sequence[int],
    params: ParamStore,
    cfg: ModelConfig,
    training: bool = False,
    rng=None,
) -> float:
    """Summed cross-entropy of ``target_ids[1:]`` given the source, teacher forced.

    ``target_ids`` must start with ``<sos>``; the decoder starts from zero states.
    """
    return batch_loss(_single_batch(source_ids, target_ids), params, cfg, training, rng).loss


def backward(
    source_ids: Sequence[int],
    target_ids: Sequence[int],
    params: ParamStore,
    cfg: ModelConfig,
    rng=None,
    training: bool = True,
) -> dict[str, Tensor]:
    """Exact gradients of :func:`sequence_loss` for every parameter."""
    if training and cfg.dropout > 0 and rng is None:
        rng = make_rng(0)
    res = batch_loss(_single_batch(source_ids, target_ids), params, cfg, training, rng, with_grads=True)
    return res.grads


class Seq2Seq:
    """A configuration bundled with its parameters; the object decoders talk to."""

    def __init__(self, config: ModelConfig, params: ParamStore | None = None, seed: int = 0):
        self.config = config
        self.params = params if params is not None else init_params(config, make_rng(seed))
        check_params(self.params, config)

    @property
    def vocab_size(self) -> int:
        return self.config.vocab_size

    def encode(self, source_ids: Sequence[int]) -> EncodedSource:
        return encode(source_ids, self.params, self.config)

    # decoder protocol used by beam search
    def start(self, source_ids: Sequence[int]):
        enc = self.encode(source_ids)
        return enc, np.zeros((self.config.dec_layers, self.config.hidden))

    def step(self, context: EncodedSource, prev_ids: np.ndarray, states: np.ndarray):
        return step_logprobs(prev_ids, states, context, self.params, self.config)
