"""Word-level edit extraction and the edit classifier used to filter corrections.

A decoded hypothesis is aligned to its source, non-matching runs become
proposed edits, and an MLP estimates the probability that each edit is
correct. Only edits above a probability threshold are applied.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .numcore import ParamStore, adam_step, derive_seed, make_rng, sigmoid
from .textdata import Edit, ParseError, apply_edits

log = logging.getLogger(__name__)

MATCH, SUB, DEL, INS = "M", "S", "D", "I"
VECTOR_DIM = 100
N_DISTANCE = 10
N_FEATURES = N_DISTANCE + 4 * VECTOR_DIM


# ---------------------------------------------------------------------------
# Alignment and extraction


def _levenshtein_table(src: Sequence, tgt: Sequence) -> np.ndarray:
    n, m = len(src), len(tgt)
    d = np.zeros((n + 1, m + 1), dtype=np.int64)
    d[:, 0] = np.arange(n + 1)
    d[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d[i, j] = min(
                d[i - 1, j - 1] + (src[i - 1] != tgt[j - 1]),
                d[i - 1, j] + 1,
                d[i, j - 1] + 1,
            )
    return d


def levenshtein(src: Sequence, tgt: Sequence) -> int:
    return int(_levenshtein_table(src, tgt)[len(src), len(tgt)])


def word_align(src: Sequence[str], tgt: Sequence[str]) -> list[tuple[str, int, int]]:
    """Minimum-cost alignment as ``(op, i, j)`` triples in left-to-right order.

    ``i``/``j`` index the source/target token consumed by the op (-1 if none).
    Where several alignments are optimal the backtrace prefers, at each cell,
    match over substitution over deletion over insertion.
    """
    d = _levenshtein_table(src, tgt)
    ops: list[tuple[str, int, int]] = []
    i, j = len(src), len(tgt)
    while i > 0 or j > 0:
        if i > 0 and j > 0 and src[i - 1] == tgt[j - 1] and d[i, j] == d[i - 1, j - 1]:
            ops.append((MATCH, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + 1:
            ops.append((SUB, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and d[i, j] == d[i - 1, j] + 1:
            ops.append((DEL, i - 1, -1))
            i -= 1
        else:
            ops.append((INS, -1, j - 1))
            j -= 1
    ops.reverse()
    return ops


def alignment_cost(ops: Iterable[tuple[str, int, int]]) -> int:
    return sum(op != MATCH for op, _, _ in ops)


def extract_edits(src: Sequence[str], hyp: Sequence[str]) -> list[Edit]:
    """Merge each maximal run of non-match alignment ops into one edit."""
    edits: list[Edit] = []
    i = j = 0  # source / hypothesis positions before the current op
    run: tuple[int, int] | None = None  # (src start, hyp start)
    for op, _, _ in word_align(src, hyp) + [(MATCH, -1, -1)]:
        if op == MATCH:
            if run is not None:
                s0, h0 = run
                if tuple(src[s0:i]) != tuple(hyp[h0:j]):
                    edits.append(Edit(s0, i, tuple(src[s0:i]), tuple(hyp[h0:j])))
                run = None
            i, j = i + 1, j + 1
            continue
        if run is None:
            run = (i, j)
        if op in (SUB, DEL):
            i += 1
        if op in (SUB, INS):
            j += 1
    return edits


def label_edits(proposed: Sequence[Edit], gold: Sequence[Edit]) -> list[tuple[Edit, bool]]:
    """An edit is good iff some gold edit has the same span and replacement."""
    keys = {g.key for g in gold}
    return [(e, e.key in keys) for e in proposed]


def check_non_overlapping(edits: Sequence[Edit]) -> None:
    prev_end = -1
    prev_ins = None
    for e in edits:
        if e.start > e.end:
            raise ValueError(f"edit span {e.start}:{e.end} is reversed")
        if e.start < prev_end:
            raise ValueError(f"edits overlap at token {e.start}")
        if e.start == e.end and prev_ins == e.start:
            raise ValueError(f"two insertions at token {e.start}")
        prev_ins = e.start if e.start == e.end else None
        prev_end = e.end


# ---------------------------------------------------------------------------
# Features


def read_vectors(path: str | Path, dim: int = VECTOR_DIM) -> dict[str, np.ndarray]:
    """Read ``token v1 ... v_dim`` lines. Malformed lines raise ParseError."""
    table: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.rstrip("\n").split(" ")
            if not line.strip():
                continue
            if len(parts) != dim + 1:
                raise ParseError(f"expected a token and {dim} values, got {len(parts) - 1} values", lineno)
            try:
                table[parts[0]] = np.array([float(x) for x in parts[1:]])
            except ValueError:
                raise ParseError("non-numeric vector component", lineno) from None
    return table


def _op_counts(a: Sequence, b: Sequence) -> tuple[int, int, int]:
    ins = dele = sub = 0
    for op, _, _ in word_align(a, b):
        if op == INS:
            ins += 1
        elif op == DEL:
            dele += 1
        elif op == SUB:
            sub += 1
    return ins, dele, sub


def _ratio(x: float, denom: float) -> float:
    return x / denom if denom else 0.0


def featurize(edit: Edit, sentence: Sequence[str], vectors: Mapping[str, np.ndarray], dim: int = VECTOR_DIM) -> np.ndarray:
    """The 410-dim feature vector of an edit proposed on ``sentence``.

    Layout: word and char lengths of s and t over the sentence's word and char
    lengths (4); word-level insertions, deletions, substitutions from s to t over
    max(|s|,|t|) (3); the same at character level (3); then summed word vectors
    of s, of t, of the left context word and of the right context word.
    Character strings are the tokens joined with single spaces.
    """
    s, t = list(edit.source), list(edit.target)
    s_chars, t_chars = " ".join(s), " ".join(t)
    sent_chars = len(" ".join(sentence))
    dist = [
        _ratio(len(s), len(sentence)),
        _ratio(len(t), len(sentence)),
        _ratio(len(s_chars), sent_chars),
        _ratio(len(t_chars), sent_chars),
    ]
    wmax = max(len(s), len(t))
    dist += [_ratio(c, wmax) for c in _op_counts(s, t)]
    cmax = max(len(s_chars), len(t_chars))
    dist += [_ratio(c, cmax) for c in _op_counts(s_chars, t_chars)]

    def vec(words: Iterable[str]) -> np.ndarray:
        out = np.zeros(dim)
        for w in words:
            v = vectors.get(w)
            if v is None:
                continue
            if v.shape != (dim,):
                raise ValueError(f"vector for {w!r} has shape {v.shape}, expected ({dim},)")
            out += v
        return out

    left = [sentence[edit.start - 1]] if edit.start > 0 else []
    right = [sentence[edit.end]] if edit.end < len(sentence) else []
    return np.concatenate([np.array(dist), vec(s), vec(t), vec(left), vec(right)])


# ---------------------------------------------------------------------------
# Classifier


@dataclass
class ClassifierConfig:
    hidden: int = 64
    lr: float = 1e-3
    epochs: int = 200
    batch_size: int = 64
    init_scale: float = 0.1
    seed: int = 0


@dataclass
class EditClassifier:
    params: ParamStore
    mean: np.ndarray
    std: np.ndarray
    config: ClassifierConfig = field(default_factory=ClassifierConfig)

    def _hidden(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        Z = (X - self.mean) / self.std
        pre = Z @ self.params["W1"].T + self.params["b1"]
        return Z, pre, np.maximum(pre, 0.0)

    def logits(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        _, _, h = self._hidden(X)
        return (h @ self.params["W2"].T + self.params["b2"])[:, 0]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.logits(X))

    def save(self, path: str | Path) -> None:
        arrays = {f"param_{k}": v for k, v in self.params.items()}
        np.savez(path, mean=self.mean, std=self.std, hidden=self.config.hidden, **arrays)

    @classmethod
    def load(cls, path: str | Path) -> "EditClassifier":
        with np.load(path) as z:
            store = ParamStore()
            for name in ("W1", "b1", "W2", "b2"):
                store.add(name, z[f"param_{name}"].copy())
            return cls(store, z["mean"].copy(), z["std"].copy(), ClassifierConfig(hidden=int(z["hidden"])))


def _loss_and_grads(clf: EditClassifier, X: np.ndarray, y: np.ndarray) -> tuple[float, dict]:
    Z, pre, h = clf._hidden(X)
    logit = (h @ clf.params["W2"].T + clf.params["b2"])[:, 0]
    # numerically stable logistic loss: log(1 + e^l) - y*l
    loss = float(np.sum(np.logaddexp(0.0, logit) - y * logit)) / len(y)
    dlogit = (sigmoid(logit) - y)[:, None] / len(y)
    grads = {
        "W2": dlogit.T @ h,
        "b2": dlogit.sum(axis=0),
    }
    dh = (dlogit @ clf.params["W2"]) * (pre > 0)
    grads["W1"] = dh.T @ Z
    grads["b1"] = dh.sum(axis=0)
    return loss, grads


def train_classifier(X: np.ndarray, y: np.ndarray, cfg: ClassifierConfig | None = None) -> EditClassifier:
    """Fit the MLP by minibatch Adam on the mean logistic loss."""
    cfg = cfg or ClassifierConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("features must be (n, d) with one label per row")
    if len(np.unique(y)) < 2:
        raise ValueError("classifier training needs both good and bad edits")
    rng = make_rng(derive_seed(cfg.seed, "editops", "classifier"))
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std == 0] = 1.0
    d = X.shape[1]
    store = ParamStore()
    store.add("W1", rng.uniform(-cfg.init_scale, cfg.init_scale, (cfg.hidden, d)))
    store.add("b1", np.zeros(cfg.hidden))
    store.add("W2", rng.uniform(-cfg.init_scale, cfg.init_scale, (1, cfg.hidden)))
    store.add("b2", np.zeros(1))
    clf = EditClassifier(store, mean, std, cfg)
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(y))
        for k in range(0, len(y), cfg.batch_size):
            idx = order[k : k + cfg.batch_size]
            _, grads = _loss_and_grads(clf, X[idx], y[idx])
            adam_step(store, grads, cfg.lr)
    return clf


def filter_edits(edits: Sequence[Edit], probs: Sequence[float], p_min: float) -> list[Edit]:
    return [e for e, p in zip(edits, probs) if p > p_min]


def filter_and_apply(
    src: Sequence[str],
    edits: Sequence[Edit],
    clf: EditClassifier | None,
    p_min: float,
    vectors: Mapping[str, np.ndarray] | None = None,
    probs: Sequence[float] | None = None,
) -> list[str]:
    """Apply the edits whose predicted probability exceeds ``p_min``.

    ``probs`` may be given directly; otherwise ``clf`` scores the edits.
    """
    check_non_overlapping(edits)
    if not edits:
        return list(src)
    if probs is None:
        if clf is None:
            raise ValueError("need a classifier or precomputed probabilities")
        X = np.stack([featurize(e, src, vectors or {}) for e in edits])
        probs = clf.predict_proba(X)
    return apply_edits(src, filter_edits(edits, probs, p_min))


# ---------------------------------------------------------------------------
# Labeled-edit files


LABELED_HEADER = ["sentence_id", "start", "end", "source", "target", "label"]


def write_labeled(rows: Iterable[tuple[int, Edit, bool | None]], path: str | Path) -> None:
    """TSV with a header row; an unknown label (None) is written as an empty field."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, delimiter="\t", lineterminator="\n", quoting=csv.QUOTE_NONE, escapechar="\\")
        w.writerow(LABELED_HEADER)
        for sid, e, good in rows:
            w.writerow([sid, e.start, e.end, " ".join(e.source), " ".join(e.target), "" if good is None else int(good)])


def read_labeled(path: str | Path) -> list[tuple[int, Edit, bool | None]]:
    rows: list[tuple[int, Edit, bool | None]] = []
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f, delimiter="\t", quoting=csv.QUOTE_NONE, escapechar="\\")
        header = next(reader, None)
        if header != LABELED_HEADER:
            raise ParseError(f"expected header {LABELED_HEADER}", 1)
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(LABELED_HEADER):
                raise ParseError(f"expected {len(LABELED_HEADER)} columns, got {len(rec)}", lineno)
            try:
                sid, start, end = int(rec[0]), int(rec[1]), int(rec[2])
            except ValueError:
                raise ParseError("non-integer sentence id or span", lineno) from None
            if rec[5] not in ("", "0", "1"):
                raise ParseError(f"label must be 0, 1 or empty, got {rec[5]!r}", lineno)
            label = None if rec[5] == "" else rec[5] == "1"
            if start > end:
                raise ParseError(f"span start {start} > end {end}", lineno)
            rows.append((sid, Edit(start, end, tuple(rec[3].split()), tuple(rec[4].split())), label))
    return rows
