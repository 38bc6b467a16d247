"""Word-level interpolated Kneser-Ney n-gram language model with ARPA I/O.

Counting pads every sentence with ``order - 1`` leading ``<s>`` and one
trailing ``</s>``. ``<s>`` is context only: it is never predicted, so n-grams
ending in ``<s>`` are not counted. The pure-``<s>`` n-grams are still stored
(log10 probability 0.0) so they can carry backoff weights.

Estimation: the highest order uses raw counts; lower orders use continuation
counts N1+(. g), except for n-grams that begin with ``<s>``, which keep raw
counts because they cannot be extended to the left in running text.

    P_k(w | h) = (a(hw) - D(a)) / S(h) + gamma(h) * P_{k-1}(w | h[1:])
    gamma(h)   = sum of the discounts taken from h's continuations / S(h)
    P_0(w)     = 1 / |V|

``V`` is every predicted token type plus ``<unk>``. Interpolated KN is stored
in backoff form: the entry for ``hw`` holds the full interpolated
probability and ``gamma(h)`` is the backoff weight of ``h``.
"""
from __future__ import annotations

import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

Gram = tuple[str, ...]


class ArpaFormatError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno is not None else message)


@dataclass
class CountTable:
    order: int
    counts: list[Counter] = field(default_factory=list)  # counts[k-1]: k-grams -> raw count
    continuation: list[Counter] = field(default_factory=list)  # k-grams -> N1+(. g), k < order

    def __len__(self) -> int:
        return sum(len(c) for c in self.counts)

    def adjusted(self, k: int) -> Counter:
        """Counts KN uses at order ``k``."""
        if k == self.order:
            return self.counts[k - 1]
        cont = self.continuation[k - 1]
        return Counter({g: (c if g[0] == BOS else cont[g]) for g, c in self.counts[k - 1].items()})


def pad_sentence(tokens: Sequence[str], order: int) -> list[str]:
    return [BOS] * (order - 1) + list(tokens) + [EOS]


def count_ngrams(sentences: Iterable[Sequence[str]], order: int = 5) -> CountTable:
    if order < 1:
        raise ValueError("order must be >= 1")
    counts = [Counter() for _ in range(order)]
    for sent in sentences:
        toks = pad_sentence(sent, order)
        for i in range(order - 1, len(toks)):
            for k in range(1, order + 1):
                if i - k + 1 < 0:
                    break
                counts[k - 1][tuple(toks[i - k + 1 : i + 1])] += 1
    cont = [Counter() for _ in range(order - 1)]
    for k in range(2, order + 1):
        for g in counts[k - 1]:
            cont[k - 2][g[1:]] += 1
    return CountTable(order, counts, cont)


def _discounts(adj: Counter, mode: str, D: float) -> tuple[float, float, float]:
    if mode == "fixed":
        return (D, D, D)
    # modified KN (Chen & Goodman): count-of-counts estimates
    n = Counter(min(c, 4) for c in adj.values())
    n1, n2, n3, n4 = (n[i] for i in (1, 2, 3, 4))
    if n1 == 0 or n2 == 0:
        return (D, D, D)
    Y = n1 / (n1 + 2 * n2)
    d1 = 1 - 2 * Y * n2 / n1
    d2 = 2 - 3 * Y * n3 / n2 if n2 else d1
    d3 = 3 - 4 * Y * n4 / n3 if n3 else d2
    return tuple(min(max(d, 1e-3), c) for d, c in zip((d1, d2, d3), (1.0, 2.0, 3.0)))


@dataclass
class NGramModel:
    order: int
    vocab: set[str]
    logprob10: list[dict[Gram, float]]  # per order: n-gram -> log10 P
    backoff10: list[dict[Gram, float]]  # per order: n-gram -> log10 backoff (absent = 0)

    def contains(self, gram: Gram) -> bool:
        return gram in self.logprob10[len(gram) - 1]

    def map_word(self, w: str) -> str:
        return w if w in self.vocab else UNK

    def logprob(self, word: str, context: Sequence[str] = ()) -> float:
        """log10 P(word | context); only the last ``order - 1`` context words matter."""
        ctx = tuple(self.map_word(w) if w != BOS else BOS for w in context)[-(self.order - 1) :] if self.order > 1 else ()
        w = self.map_word(word)
        total = 0.0
        while True:
            gram = ctx + (w,)
            p = self.logprob10[len(gram) - 1].get(gram)
            if p is not None:
                return total + p
            if not ctx:
                # unreachable for well-formed models: <unk> is always a unigram
                raise KeyError(f"no unigram entry for {w!r}")
            total += self.backoff10[len(ctx) - 1].get(ctx, 0.0)
            ctx = ctx[1:]

    def ln_prob(self, word: str, context: Sequence[str] = ()) -> float:
        return self.logprob(word, context) * math.log(10.0)

    def sentence_logprob(self, tokens: Sequence[str]) -> float:
        ctx = [BOS] * (self.order - 1)
        total = 0.0
        for w in list(tokens) + [EOS]:
            total += self.logprob(w, ctx)
            ctx = (ctx + [w])[1:] if self.order > 1 else ctx
        return total

    def perplexity(self, sentences: Iterable[Sequence[str]]) -> float:
        total = n = 0
        for s in sentences:
            total += self.sentence_logprob(s)
            n += len(s) + 1
        return 10 ** (-total / n)

    def predicted_vocab(self) -> list[str]:
        return sorted(self.vocab)

    def num_ngrams(self) -> list[int]:
        return [len(t) for t in self.logprob10]


def estimate_kn(counts: CountTable, D: float = 0.75, mode: str = "fixed") -> NGramModel:
    """Interpolated Kneser-Ney with one discount ``D`` (or ``mode="modified"``)."""
    if not 0.0 < D < 1.0:
        raise ValueError(f"discount must lie in (0, 1), got {D}")
    if mode not in ("fixed", "modified"):
        raise ValueError(f"unknown discount mode {mode!r}")
    n = counts.order
    vocab = {g[0] for g in counts.counts[0]} | {UNK, EOS}
    vocab.discard(BOS)
    V = len(vocab)
    logp: list[dict[Gram, float]] = [dict() for _ in range(n)]
    bow: list[dict[Gram, float]] = [dict() for _ in range(n)]
    prob: list[dict[Gram, float]] = [dict() for _ in range(n)]

    def lower(k: int, gram: Gram) -> float:
        """P_{k}(w | gram[:-1]) in linear space, computed on demand for orders below."""
        if k == 0:
            return 1.0 / V
        if gram in prob[k - 1]:
            return prob[k - 1][gram]
        ctx = gram[:-1]
        g = gammas[k - 1].get(ctx)
        if g is None:  # unseen context: pass through
            return lower(k - 1, gram[1:])
        return g * lower(k - 1, gram[1:])

    gammas: list[dict[Gram, float]] = [dict() for _ in range(n)]
    for k in range(1, n + 1):
        adj = counts.adjusted(k)
        d = _discounts(adj, mode, D)
        totals: dict[Gram, float] = defaultdict(float)
        taken: dict[Gram, float] = defaultdict(float)
        for g, c in adj.items():
            totals[g[:-1]] += c
            taken[g[:-1]] += d[min(c, 3) - 1]
        gammas[k - 1] = {h: taken[h] / totals[h] for h in totals}
        for g, c in sorted(adj.items()):
            h = g[:-1]
            p = (c - d[min(c, 3) - 1]) / totals[h] + gammas[k - 1][h] * lower(k - 1, g[1:])
            prob[k - 1][g] = p
    # <unk> and </s> always receive a unigram entry
    for w in (UNK, EOS):
        if (w,) not in prob[0]:
            prob[0][(w,)] = gammas[0].get((), 1.0) * (1.0 / V) if gammas[0] else 1.0 / V
    for k in range(n):
        for g, p in prob[k].items():
            logp[k][g] = math.log10(p)
    for k in range(1, n):
        for h, gm in gammas[k].items():
            if h not in logp[k - 1]:
                if all(t == BOS for t in h):
                    logp[k - 1][h] = 0.0
                else:  # pragma: no cover - every context is itself a counted n-gram
                    raise AssertionError(f"context {h} missing from order {k}")
            bow[k - 1][h] = math.log10(gm)
    return NGramModel(n, vocab, logp, bow)


def build_lm(sentences: Iterable[Sequence[str]], order: int = 5, D: float = 0.75, mode: str = "fixed") -> NGramModel:
    return estimate_kn(count_ngrams(sentences, order), D, mode)


# ---------------------------------------------------------------------------
# ARPA


def _fmt(x: float) -> str:
    s = f"{x:.6f}"
    return "0.000000" if s == "-0.000000" else s


def format_arpa(model: NGramModel) -> str:
    lines = ["", "\\data\\"]
    for k in range(model.order):
        lines.append(f"ngram {k + 1}={len(model.logprob10[k])}")
    for k in range(model.order):
        lines.append("")
        lines.append(f"\\{k + 1}-grams:")
        for g in sorted(model.logprob10[k]):
            row = f"{_fmt(model.logprob10[k][g])}\t{' '.join(g)}"
            b = model.backoff10[k].get(g) if k < model.order - 1 else None
            if b is not None:
                row += f"\t{_fmt(b)}"
            lines.append(row)
    lines.append("")
    lines.append("\\end\\")
    return "\n".join(lines) + "\n"


def write_arpa(model: NGramModel, path: str | Path) -> None:
    Path(path).write_text(format_arpa(model), encoding="utf-8")


_COUNT_RE = re.compile(r"^ngram (\d+)=(\d+)$")
_SECTION_RE = re.compile(r"^\\(\d+)-grams:$")


def parse_arpa(text: str) -> NGramModel:
    lines = text.splitlines()
    i = 0
    while i < len(lines) and lines[i].strip() != "\\data\\":
        i += 1
    if i == len(lines):
        raise ArpaFormatError("missing \\data\\ header")
    i += 1
    declared: dict[int, int] = {}
    while i < len(lines) and lines[i].strip():
        m = _COUNT_RE.match(lines[i].strip())
        if not m:
            raise ArpaFormatError(f"bad count line {lines[i]!r}", i + 1)
        declared[int(m.group(1))] = int(m.group(2))
        i += 1
    if not declared or sorted(declared) != list(range(1, max(declared) + 1)):
        raise ArpaFormatError("n-gram counts must cover orders 1..n")
    order = max(declared)
    logp: list[dict[Gram, float]] = [dict() for _ in range(order)]
    bow: list[dict[Gram, float]] = [dict() for _ in range(order)]
    k = None
    ended = False
    for j in range(i, len(lines)):
        line = lines[j].strip()
        if not line:
            continue
        if line == "\\end\\":
            ended = True
            break
        m = _SECTION_RE.match(line)
        if m:
            k = int(m.group(1))
            if k not in declared:
                raise ArpaFormatError(f"section for undeclared order {k}", j + 1)
            continue
        if k is None:
            raise ArpaFormatError(f"n-gram line outside a section: {line!r}", j + 1)
        parts = lines[j].rstrip("\n").split("\t") if "\t" in lines[j] else line.split()
        try:
            if "\t" in lines[j]:
                p = float(parts[0])
                gram = tuple(parts[1].split())
                b = float(parts[2]) if len(parts) > 2 else None
            else:
                p = float(parts[0])
                gram = tuple(parts[1 : 1 + k])
                b = float(parts[1 + k]) if len(parts) > 1 + k else None
        except (ValueError, IndexError):
            raise ArpaFormatError(f"malformed n-gram line {line!r}", j + 1) from None
        if len(gram) != k:
            raise ArpaFormatError(f"expected a {k}-gram, got {len(gram)} tokens", j + 1)
        logp[k - 1][gram] = p
        if b is not None:
            bow[k - 1][gram] = b
    if not ended:
        raise ArpaFormatError("missing \\end\\ marker")
    for kk, n in declared.items():
        if len(logp[kk - 1]) != n:
            raise ArpaFormatError(f"header declares {n} {kk}-grams but {len(logp[kk - 1])} were read")
    vocab = {g[0] for g in logp[0]} - {BOS}
    vocab |= {UNK}
    if (UNK,) not in logp[0]:
        raise ArpaFormatError("model has no <unk> unigram")
    return NGramModel(order, vocab, logp, bow)


def read_arpa(path: str | Path) -> NGramModel:
    return parse_arpa(Path(path).read_text(encoding="utf-8"))
