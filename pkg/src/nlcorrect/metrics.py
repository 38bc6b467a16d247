"""Evaluation: MaxMatch (M2) precision/recall/F, per-type recall, BLEU and
length-binned breakdowns.

Conventions shared by every P/R computation here: zero proposed edits gives
P = 1, zero gold edits gives R = 1, and F is 0 when both P and R are 0.
"""
from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .textdata import AnnotatedSentence, Edit


def f_beta(p: float, r: float, beta: float = 0.5) -> float:
    """(1+b^2)PR / (b^2 P + R); works for fractions or percentages alike."""
    denom = beta * beta * p + r
    if denom == 0:
        return 0.0
    return (1 + beta * beta) * p * r / denom


def prf(matched: int, proposed: int, gold: int, beta: float = 0.5) -> tuple[float, float, float]:
    p = matched / proposed if proposed else 1.0
    r = matched / gold if gold else 1.0
    return p, r, f_beta(p, r, beta)


# ---------------------------------------------------------------------------
# Edit lattice


def _tokens(x: str | Sequence[str]) -> list[str]:
    return x.split() if isinstance(x, str) else list(x)


def _distance_tables(src: Sequence[str], hyp: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    n, m = len(src), len(hyp)
    fwd = np.zeros((n + 1, m + 1), dtype=np.int64)
    fwd[:, 0] = np.arange(n + 1)
    fwd[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            fwd[i, j] = min(fwd[i - 1, j - 1] + (src[i - 1] != hyp[j - 1]), fwd[i - 1, j] + 1, fwd[i, j - 1] + 1)
    bwd = np.zeros((n + 1, m + 1), dtype=np.int64)
    bwd[:, m] = np.arange(n, -1, -1)
    bwd[n, :] = np.arange(m, -1, -1)
    for i in range(n - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            bwd[i, j] = min(bwd[i + 1, j + 1] + (src[i] != hyp[j]), bwd[i + 1, j] + 1, bwd[i, j + 1] + 1)
    return fwd, bwd


def lattice_steps(src: Sequence[str], hyp: Sequence[str]) -> dict[tuple[int, int], list[tuple[tuple[int, int], bool]]]:
    """Single-op steps lying on some minimum-cost alignment path.

    Maps node ``(i, j)`` to ``[(next_node, is_edit)]``. Equal tokens are only
    ever aligned by a match step.
    """
    fwd, bwd = _distance_tables(src, hyp)
    n, m = len(src), len(hyp)
    total = fwd[n, m]
    on = lambda i, j: fwd[i, j] + bwd[i, j] == total  # noqa: E731
    steps: dict[tuple[int, int], list] = {}
    for i in range(n + 1):
        for j in range(m + 1):
            if not on(i, j):
                continue
            out = []
            if i < n and j < m:
                same = src[i] == hyp[j]
                if on(i + 1, j + 1) and fwd[i + 1, j + 1] == fwd[i, j] + (not same):
                    out.append(((i + 1, j + 1), not same))
            if i < n and on(i + 1, j) and fwd[i + 1, j] == fwd[i, j] + 1:
                out.append(((i + 1, j), True))
            if j < m and on(i, j + 1) and fwd[i, j + 1] == fwd[i, j] + 1:
                out.append(((i, j + 1), True))
            steps[(i, j)] = out
    return steps


def composite_edges(src: Sequence[str], hyp: Sequence[str], max_unchanged: int = 2) -> dict[tuple[int, int], list]:
    """All edges of the merged lattice, keyed by start node.

    Each entry is ``(next_node, edit)`` where ``edit`` is None for a plain
    unchanged word, or the Edit covering a lattice path that contains at least
    one edit step and at most ``max_unchanged`` unchanged words.
    """
    steps = lattice_steps(src, hyp)
    edges: dict[tuple[int, int], list] = {}
    for u, out in steps.items():
        found: set[tuple[int, int]] = set()
        plain = []
        # frontier entries: (node, unchanged words used, has an edit step)
        frontier = {(u, 0, False)}
        while frontier:
            nxt = set()
            for node, used, has_edit in frontier:
                for v, is_edit in steps[node]:
                    u2 = used + (not is_edit)
                    if u2 > max_unchanged:
                        continue
                    e2 = has_edit or is_edit
                    if e2:
                        found.add(v)
                    nxt.add((v, u2, e2))
            frontier = nxt
        for v, is_edit in out:
            if not is_edit:
                plain.append((v, None))
        edits = [
            (v, Edit(u[0], v[0], tuple(src[u[0] : v[0]]), tuple(hyp[u[1] : v[1]])))
            for v in sorted(found)
        ]
        edges[u] = plain + edits
    return edges


@dataclass
class Selection:
    edits: list[Edit]
    matched: int

    @property
    def proposed(self) -> int:
        return len(self.edits)


def best_edit_set(
    src: Sequence[str], hyp: Sequence[str], gold: Sequence[Edit], max_unchanged: int = 2
) -> Selection:
    """The lattice path whose edits match the most gold edits.

    Ties go to fewer edits, then to the lexicographically smallest edit
    sequence (edits compared by ``(start, end, target)``). A gold edit is
    matched at most once.
    """
    src, hyp = _tokens(src), _tokens(hyp)
    edges = composite_edges(src, hyp, max_unchanged)
    gold_keys = {g.key for g in gold}
    end = (len(src), len(hyp))

    # state: (node, gold insertion keys already matched at this source index)
    def successors(state):
        node, used = state
        for v, e in edges[node]:
            if e is None:
                yield (v, frozenset()), None, 0
                continue
            gain = int(e.key in gold_keys and e.key not in used)
            if e.start == e.end and v[0] == node[0]:
                nxt_used = used | {e.key} if gain else used
            else:
                nxt_used = frozenset()
            yield (v, nxt_used), e, gain

    start = ((0, 0), frozenset())
    order: list = []
    seen = {start}
    stack = [start]
    while stack:
        s = stack.pop()
        order.append(s)
        for t, _, _ in successors(s):
            if t not in seen:
                seen.add(t)
                stack.append(t)
    order.sort(key=lambda s: (s[0][0] + s[0][1], s[0], sorted(s[1])))

    # value: (-matched, n_edits, edit-key sequence), minimized
    best: dict = {}
    choice: dict = {}
    for s in reversed(order):
        if s[0] == end:
            best[s] = (0, 0, ())
            continue
        cand = None
        for t, e, gain in successors(s):
            if t not in best:
                continue
            tm, tn, tseq = best[t]
            val = (tm - gain, tn + (e is not None), ((e.key,) if e else ()) + tseq)
            if cand is None or val < cand:
                cand, choice[s] = val, (t, e)
        best[s] = cand

    edits = []
    s = start
    while s[0] != end:
        s, e = choice[s]
        if e is not None:
            edits.append(e)
    return Selection(edits, -best[start][0])


# ---------------------------------------------------------------------------
# M2 evaluation


@dataclass
class SentenceScore:
    annotator: int
    edits: list[Edit]
    matched_gold: list[Edit]
    n_gold: int

    @property
    def matched(self) -> int:
        return len(self.matched_gold)

    @property
    def proposed(self) -> int:
        return len(self.edits)


@dataclass
class ScoreReport:
    """Aggregate M2 scores. ``precision``/``recall``/``f`` are percentages."""

    matched: int
    proposed: int
    gold: int
    beta: float = 0.5
    sentences: list[SentenceScore] = field(default_factory=list, repr=False)

    @property
    def precision(self) -> float:
        return 100 * prf(self.matched, self.proposed, self.gold, self.beta)[0]

    @property
    def recall(self) -> float:
        return 100 * prf(self.matched, self.proposed, self.gold, self.beta)[1]

    @property
    def f(self) -> float:
        return 100 * prf(self.matched, self.proposed, self.gold, self.beta)[2]

    def to_text(self) -> str:
        b = f"{self.beta:g}"
        return (
            f"Precision   : {self.precision:.2f}\n"
            f"Recall      : {self.recall:.2f}\n"
            f"F_{b:<9} : {self.f:.2f}\n"
            f"matched {self.matched}  proposed {self.proposed}  gold {self.gold}\n"
        )

    def to_tsv(self) -> str:
        return (
            "precision\trecall\tf_beta\tbeta\tmatched\tproposed\tgold\n"
            f"{self.precision:.2f}\t{self.recall:.2f}\t{self.f:.2f}\t{self.beta:g}\t{self.matched}\t{self.proposed}\t{self.gold}\n"
        )


def score_sentence(
    src: Sequence[str], hyp: Sequence[str], annotated: AnnotatedSentence, beta: float = 0.5, max_unchanged: int = 2
) -> SentenceScore:
    """Score one sentence against the annotator that gives it the highest F.

    Ties prefer more matched edits, then the lower annotator id.
    """
    best = None
    best_key = None
    for aid in annotated.annotators():
        gold = annotated.gold(aid)
        sel = best_edit_set(src, hyp, gold, max_unchanged)
        keys = Counter(g.key for g in gold)
        hit = Counter(e.key for e in sel.edits) & keys
        matched_gold = []
        for g in gold:
            if hit[g.key] > 0:
                matched_gold.append(g)
                hit[g.key] -= 1
        f = prf(len(matched_gold), sel.proposed, len(gold), beta)[2]
        key = (-f, -len(matched_gold), aid)
        if best_key is None or key < best_key:
            best_key = key
            best = SentenceScore(aid, sel.edits, matched_gold, len(gold))
    return best


def m2_evaluate(
    sources: Sequence[str | Sequence[str]],
    hypotheses: Sequence[str | Sequence[str]],
    gold: Sequence[AnnotatedSentence],
    beta: float = 0.5,
    max_unchanged: int = 2,
) -> ScoreReport:
    if not (len(sources) == len(hypotheses) == len(gold)):
        raise ValueError(
            f"length mismatch: {len(sources)} sources, {len(hypotheses)} hypotheses, {len(gold)} gold sentences"
        )
    per = [
        score_sentence(_tokens(s), _tokens(h), g, beta, max_unchanged)
        for s, h, g in zip(sources, hypotheses, gold)
    ]
    return ScoreReport(
        matched=sum(x.matched for x in per),
        proposed=sum(x.proposed for x in per),
        gold=sum(x.n_gold for x in per),
        beta=beta,
        sentences=per,
    )


def per_type_recall(report: ScoreReport, gold: Sequence[AnnotatedSentence]) -> dict[str, tuple[float, int]]:
    """Recall (percent) and gold count per error type, using the annotator chosen for each sentence."""
    tot: Counter = Counter()
    hit: Counter = Counter()
    for sc, g in zip(report.sentences, gold):
        for e in g.gold(sc.annotator):
            tot[e.type or "-"] += 1
        for e in sc.matched_gold:
            hit[e.type or "-"] += 1
    return {t: (100.0 * hit[t] / tot[t], tot[t]) for t in sorted(tot, key=lambda t: (-tot[t], t))}


def format_type_recall(table: dict[str, tuple[float, int]], top: int | None = None) -> str:
    lines = ["type\tgold\trecall"]
    for t, (r, n) in list(table.items())[:top]:
        lines.append(f"{t}\t{n}\t{r:.2f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# BLEU


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(hypotheses: Sequence[str], references: Sequence[str | Sequence[str]], max_n: int = 4) -> float:
    """Case-sensitive corpus BLEU on whitespace tokens, as a percentage.

    Each reference entry may be a string or a list of alternative strings.
    Any zero n-gram precision gives 0 (no smoothing). The brevity penalty uses
    the reference length closest to each hypothesis (shorter wins ties).
    """
    if len(hypotheses) == 0:
        raise ValueError("BLEU of an empty corpus")
    if len(hypotheses) != len(references):
        raise ValueError(f"{len(hypotheses)} hypotheses but {len(references)} references")
    hits = [0] * max_n
    totals = [0] * max_n
    hyp_len = ref_len = 0
    for h, refs in zip(hypotheses, references):
        refs = [refs] if isinstance(refs, str) else list(refs)
        ht = h.split()
        rts = [r.split() for r in refs]
        hyp_len += len(ht)
        ref_len += min((abs(len(r) - len(ht)), len(r)) for r in rts)[1]
        for n in range(1, max_n + 1):
            hc = _ngrams(ht, n)
            maxref: Counter = Counter()
            for r in rts:
                maxref |= _ngrams(r, n)
            hits[n - 1] += sum(min(c, maxref[g]) for g, c in hc.items())
            totals[n - 1] += max(len(ht) - n + 1, 0)
    if hyp_len == 0 or any(h == 0 for h in hits):
        return 0.0
    log_p = sum(math.log(h / t) for h, t in zip(hits, totals)) / max_n
    bp = 1.0 if hyp_len > ref_len else math.exp(1 - ref_len / hyp_len)
    return 100.0 * bp * math.exp(log_p)


# ---------------------------------------------------------------------------
# Length bins


@dataclass
class LengthBin:
    low: int
    high: int  # exclusive
    count: int
    matched: int
    proposed: int
    gold: int
    beta: float = 0.5

    @property
    def f(self) -> float:
        return 100 * prf(self.matched, self.proposed, self.gold, self.beta)[2]


def length_breakdown(
    counts: Iterable[tuple[int, int, int]],
    lengths: Iterable[int],
    width: int = 5,
    min_count: int = 10,
    beta: float = 0.5,
) -> list[LengthBin]:
    """Bin sentences by source word count; ``counts`` are per-sentence (matched, proposed, gold).

    Bins holding fewer than ``min_count`` sentences are left out.
    """
    if width < 1:
        raise ValueError("bin width must be >= 1")
    acc: dict[int, list[int]] = defaultdict(lambda: [0, 0, 0, 0])
    for (m, p, g), n in zip(counts, lengths):
        b = acc[n // width]
        b[0] += 1
        b[1] += m
        b[2] += p
        b[3] += g
    return [
        LengthBin(k * width, (k + 1) * width, c, m, p, g, beta)
        for k, (c, m, p, g) in sorted(acc.items())
        if c >= min_count
    ]


def format_length_bins(bins: Sequence[LengthBin]) -> str:
    lines = ["bin_low\tbin_high\tcount\tF"]
    lines += [f"{b.low}\t{b.high}\t{b.count}\t{b.f:.2f}" for b in bins]
    return "\n".join(lines) + "\n"


def write_text(text: str, path: str | Path) -> None:
    Path(path).write_text(text, encoding="utf-8")
