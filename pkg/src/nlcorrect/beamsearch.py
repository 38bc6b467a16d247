"""Character-level beam search fused with a word-level n-gram LM.

A hypothesis is ranked by ``(log P_NN + lam * log P_LM) / max(|y|, 1)`` where
``|y|`` counts the words completed so far. The LM only contributes when a
word ends, i.e. when a space or ``<eos>`` is emitted; ``<eos>`` also scores
the LM's end-of-sentence event. All log-probabilities are natural logs.

Models plug in through two methods:

* ``start(source_ids) -> (context, state)`` with ``state`` an array (one row per layer)
* ``step(context, prev_ids, states) -> (log_probs, new_states)`` batched over hypotheses
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .ngramlm import BOS, EOS as LM_EOS, NGramModel
from .textdata import VOCAB, CharVocab

log = logging.getLogger(__name__)


@dataclass
class DecodeConfig:
    lam: float = 0.0
    beam: int = 64
    max_len: int | None = None  # default: 1.5 * len(source) + 10
    nbest: int = 1
    normalize: str = "step"  # "step": prune by the normalized score; "end": prune by the raw sum, normalize only the final ranking
    lm_context: int = 4

    def __post_init__(self):
        if self.beam < 1:
            raise ValueError("beam width must be >= 1")
        if self.lam < 0:
            raise ValueError("LM weight must be >= 0")
        if self.normalize not in ("step", "end"):
            raise ValueError(f"unknown normalization mode {self.normalize!r}")

    def length_limit(self, source: str) -> int:
        if self.max_len is not None:
            return self.max_len
        return int(1.5 * len(source)) + 10


@dataclass
class Hypothesis:
    ids: tuple[int, ...]
    state: np.ndarray | None
    nn_logp: float = 0.0
    lm_logp: float = 0.0
    n_words: int = 0
    word: str = ""  # partial word since the last space
    history: tuple[str, ...] = ()  # completed words, most recent last
    finished: bool = False
    truncated: bool = False

    def text(self, vocab: CharVocab = VOCAB) -> str:
        return vocab.decode(self.ids)


def hyp_score(h: Hypothesis, lam: float) -> float:
    lm = lam * h.lm_logp if lam else 0.0
    return (h.nn_logp + lm) / max(h.n_words, 1)


def _prune_score(nn: float, lm: float, n_words: int, lam: float, normalize: str) -> float:
    raw = nn + (lam * lm if lam else 0.0)
    return raw / max(n_words, 1) if normalize == "step" else raw


class _LMScorer:
    def __init__(self, lm: NGramModel | None, lam: float, width: int):
        self.lm = lm if lam > 0 else None
        self.width = width
        self.cache: dict[tuple, float] = {}

    def __call__(self, word: str, history: tuple[str, ...]) -> float:
        if self.lm is None:
            return 0.0
        ctx = ((BOS,) * self.width + history)[-self.width :] if self.width else ()
        key = (word, ctx)
        v = self.cache.get(key)
        if v is None:
            v = self.lm.ln_prob(word, ctx)
            self.cache[key] = v
        return v


def _extend(h: Hypothesis, sym: int, logp: float, new_state, score_lm: _LMScorer, vocab: CharVocab) -> Hypothesis:
    nn = h.nn_logp + logp
    lm = h.lm_logp
    n_words, word, history = h.n_words, h.word, h.history
    if sym == vocab.EOS:
        if word:
            lm += score_lm(word, history)
            history = history + (word,)
            n_words += 1
        lm += score_lm(LM_EOS, history)
        return Hypothesis(h.ids, new_state, nn, lm, n_words, "", history, finished=True)
    if sym == vocab.SPACE:
        if word:
            lm += score_lm(word, history)
            history = history + (word,)
            n_words += 1
        word = ""
    else:
        word = word + vocab.decode([sym])
    return Hypothesis(h.ids + (sym,), new_state, nn, lm, n_words, word, history)


def _candidate_scores(h: Hypothesis, row: np.ndarray, cfg: DecodeConfig, score_lm: _LMScorer, vocab: CharVocab) -> np.ndarray:
    """Pruning score of every one-symbol extension of ``h``, without building them."""
    nn = h.nn_logp + row
    lm = np.full(len(row), h.lm_logp)
    n = np.full(len(row), h.n_words)
    if h.word:
        lm[vocab.SPACE] += score_lm(h.word, h.history)
        n[vocab.SPACE] += 1
        lm[vocab.EOS] += score_lm(h.word, h.history)
        n[vocab.EOS] += 1
        lm[vocab.EOS] += score_lm(LM_EOS, h.history + (h.word,))
    else:
        lm[vocab.EOS] += score_lm(LM_EOS, h.history)
    raw = nn + (cfg.lam * lm if cfg.lam else 0.0)
    return raw / np.maximum(n, 1) if cfg.normalize == "step" else raw


def _select(entries: list, width: int, text_of) -> list:
    """Top ``width`` of ``(score, payload)`` pairs; equal scores ordered by output text."""
    if len(entries) <= width:
        chosen = entries
    else:
        scores = np.array([e[0] for e in entries])
        cut = np.partition(-scores, width - 1)[width - 1]
        chosen = [e for e, s in zip(entries, scores) if -s <= cut]
    chosen = sorted(chosen, key=lambda e: (-e[0], text_of(e[1])))
    return chosen[:width]


def beam_decode(
    model,
    lm: NGramModel | None,
    source: str,
    cfg: DecodeConfig,
    vocab: CharVocab = VOCAB,
) -> list[Hypothesis]:
    """Return up to ``cfg.nbest`` hypotheses, best first (ties: lexicographic text)."""
    if not source:
        raise ValueError("cannot decode an empty source")
    context, state0 = model.start(vocab.encode(source, add_eos=True))
    score_lm = _LMScorer(lm, cfg.lam, cfg.lm_context)
    beam = [Hypothesis((), state0)]
    limit = cfg.length_limit(source)
    steps = 0
    while steps < limit and not all(h.finished for h in beam):
        live = [h for h in beam if not h.finished]
        # payload is either a finished Hypothesis or (live index, symbol)
        entries: list = [
            (_prune_score(h.nn_logp, h.lm_logp, h.n_words, cfg.lam, cfg.normalize), h)
            for h in beam if h.finished
        ]
        prev = np.array([h.ids[-1] if h.ids else vocab.SOS for h in live])
        logp, new_states = model.step(context, prev, np.stack([h.state for h in live]))
        for i, h in enumerate(live):
            scores = _candidate_scores(h, logp[i], cfg, score_lm, vocab)
            entries.extend((float(s), (i, sym)) for sym, s in enumerate(scores))

        def text_of(p):
            if isinstance(p, Hypothesis):
                return p.text(vocab)
            i, sym = p
            return live[i].text(vocab) + ("" if sym == vocab.EOS else vocab.decode([sym]))

        beam = [
            p if isinstance(p, Hypothesis)
            else _extend(live[p[0]], p[1], float(logp[p[0], p[1]]), new_states[p[0]], score_lm, vocab)
            for _, p in _select(entries, cfg.beam, text_of)
        ]
        steps += 1
    out = [h if h.finished else replace(h, truncated=True) for h in beam]
    out.sort(key=lambda h: (-hyp_score(h, cfg.lam), h.text(vocab)))
    return out[: cfg.nbest]


def greedy_decode(
    model,
    lm: NGramModel | None,
    source: str,
    cfg: DecodeConfig | None = None,
    vocab: CharVocab = VOCAB,
) -> Hypothesis:
    """Follow the single best-ranked extension at every step.

    Uses the same ranking as :func:`beam_decode`; with ``lam=0`` and
    ``normalize="end"`` it is the plain per-symbol argmax decoder.
    """
    cfg = cfg or DecodeConfig(beam=1)
    context, state = model.start(vocab.encode(source, add_eos=True))
    score_lm = _LMScorer(lm, cfg.lam, cfg.lm_context)
    h = Hypothesis((), state)
    for _ in range(cfg.length_limit(source)):
        prev = np.array([h.ids[-1] if h.ids else vocab.SOS])
        logp, new_state = model.step(context, prev, h.state[None])
        scores = _candidate_scores(h, logp[0], cfg, score_lm, vocab)
        best = np.flatnonzero(scores == scores.max())
        if len(best) > 1:
            # ties go to the lexicographically smallest continuation
            best = sorted(best, key=lambda s: h.text(vocab) + ("" if s == vocab.EOS else vocab.decode([s])))
        sym = int(best[0])
        h = _extend(h, sym, float(logp[0, sym]), new_state[0], score_lm, vocab)
        if h.finished:
            return h
    return replace(h, truncated=True)


@dataclass
class CorrectionResult:
    text: str
    score: float
    error: str | None = None
    hypothesis: Hypothesis | None = field(default=None, repr=False)


def correct_sentence(model, lm, source: str, cfg: DecodeConfig) -> CorrectionResult:
    try:
        if cfg.beam == 1:
            h = greedy_decode(model, lm, source, cfg)
        else:
            h = beam_decode(model, lm, source, cfg)[0]
        return CorrectionResult(h.text(), hyp_score(h, cfg.lam), hypothesis=h)
    except Exception as exc:  # one bad sentence must not sink the batch
        log.warning("decoding failed for %r: %s", source[:60], exc)
        return CorrectionResult(source, float("-inf"), error=f"{type(exc).__name__}: {exc}")


def correct_corpus(
    model,
    lm: NGramModel | None,
    sentences: Sequence[str],
    cfg: DecodeConfig,
    threads: int = 1,
) -> list[CorrectionResult]:
    """Decode every sentence independently; output order matches input order.

    Failed sentences are passed through unchanged with ``error`` set.
    """
    if threads <= 1 or len(sentences) <= 1:
        return [correct_sentence(model, lm, s, cfg) for s in sentences]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda s: correct_sentence(model, lm, s, cfg), sentences))
