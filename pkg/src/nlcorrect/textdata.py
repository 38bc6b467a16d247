"""Character vocabulary, corpus readers (parallel TSV and M2) and batching."""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)


class ParseError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno is not None else message)


class CharVocab:
    """The fixed 98-symbol character inventory.

    Ids 0-94 are printable ASCII 0x20-0x7E in code-point order, followed by
    ``<sos>`` (95), ``<eos>`` (96) and ``<unk>`` (97).
    """

    FIRST = 0x20
    LAST = 0x7E
    SOS = 95
    EOS = 96
    UNK = 97
    SPACE = 0
    size = 98

    SPECIALS = {SOS: "<sos>", EOS: "<eos>", UNK: "<unk>"}
    UNK_CHAR = "�"

    def __len__(self) -> int:
        return self.size

    def symbols(self) -> list[str]:
        return [chr(c) for c in range(self.FIRST, self.LAST + 1)] + [
            self.SPECIALS[i] for i in (self.SOS, self.EOS, self.UNK)
        ]

    def fingerprint(self) -> str:
        return hashlib.sha256("\n".join(self.symbols()).encode("utf-8")).hexdigest()[:16]

    def char_id(self, ch: str) -> int:
        cp = ord(ch)
        return cp - self.FIRST if self.FIRST <= cp <= self.LAST else self.UNK

    def encode(self, s: str, add_eos: bool = False) -> list[int]:
        ids = [self.char_id(ch) for ch in s]
        if add_eos:
            ids.append(self.EOS)
        return ids

    def decode(self, ids: Iterable[int]) -> str:
        """Inverse of :meth:`encode`; ``<sos>``/``<eos>`` vanish and ``<unk>`` becomes U+FFFD."""
        out = []
        for i in ids:
            i = int(i)
            if 0 <= i <= self.LAST - self.FIRST:
                out.append(chr(i + self.FIRST))
            elif i == self.UNK:
                out.append(self.UNK_CHAR)
            elif i in (self.SOS, self.EOS):
                continue
            else:
                raise ValueError(f"symbol id {i} outside vocabulary")
        return "".join(out)


VOCAB = CharVocab()


def encode_chars(s: str, vocab: CharVocab = VOCAB, add_eos: bool = False) -> list[int]:
    return vocab.encode(s, add_eos=add_eos)


# ---------------------------------------------------------------------------
# M2 annotation format


@dataclass(frozen=True)
class Edit:
    """Replace ``source`` (tokens ``start:end`` of the sentence) with ``target``.

    ``start == end`` is an insertion. ``extra`` keeps unused M2 columns so a
    parsed file re-serializes without loss.
    """

    start: int
    end: int
    source: tuple[str, ...] = ()
    target: tuple[str, ...] = ()
    type: str | None = None
    extra: tuple[str, ...] = field(default=("REQUIRED", "-NONE-"), compare=False)

    @property
    def key(self) -> tuple[int, int, tuple[str, ...]]:
        return (self.start, self.end, self.target)


@dataclass
class AnnotatedSentence:
    tokens: list[str]
    edits: dict[int, list[Edit]] = field(default_factory=dict)

    def annotators(self) -> list[int]:
        return sorted(self.edits) or [0]

    def gold(self, annotator: int) -> list[Edit]:
        return self.edits.get(annotator, [])

    def corrected(self, annotator: int | None = None) -> list[str]:
        if annotator is None:
            annotator = self.annotators()[0]
        return apply_edits(self.tokens, self.gold(annotator))


def apply_edits(tokens: Sequence[str], edits: Sequence[Edit]) -> list[str]:
    """Apply non-overlapping edits right to left so earlier indices stay valid.

    Insertions sharing a source index come out in the order they are listed.
    """
    out = list(tokens)
    for e in reversed(sorted(edits, key=lambda e: (e.start, e.end))):
        out[e.start : e.end] = list(e.target)
    return out


NOOP = "noop"


def parse_m2(text: str) -> list[AnnotatedSentence]:
    """Parse M2 text.

    Recognized lines: ``S tok tok ...`` opens a sentence; ``A i j|||TYPE|||repl|||...|||aid``
    adds an edit for annotator ``aid``; blank lines separate sentences. Replacement
    ``-NONE-`` or an empty field means deletion. ``noop`` annotations register the
    annotator with an empty edit set.
    """
    sentences: list[AnnotatedSentence] = []
    current: AnnotatedSentence | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            current = None
            continue
        if line.startswith("S ") or line == "S":
            current = AnnotatedSentence(tokens=line[2:].split())
            sentences.append(current)
        elif line.startswith("A "):
            if current is None:
                raise ParseError("annotation line without a preceding sentence", lineno)
            edit, aid = _parse_annotation(line[2:], current.tokens, lineno)
            bucket = current.edits.setdefault(aid, [])
            if edit is not None:
                bucket.append(edit)
        else:
            raise ParseError(f"unrecognized line {line[:40]!r}", lineno)
    for s in sentences:
        for edits in s.edits.values():
            edits.sort(key=lambda e: (e.start, e.end))
    return sentences


def _parse_annotation(body: str, tokens: list[str], lineno: int) -> tuple[Edit | None, int]:
    fields = body.split("|||")
    if len(fields) < 3:
        raise ParseError("annotation needs at least span, type and replacement fields", lineno)
    span = fields[0].split()
    if len(span) != 2:
        raise ParseError(f"bad span {fields[0]!r}", lineno)
    try:
        start, end = int(span[0]), int(span[1])
        aid = int(fields[-1]) if len(fields) >= 4 else 0
    except ValueError:
        raise ParseError(f"non-integer span or annotator id in {body!r}", lineno) from None
    etype = fields[1]
    if etype == NOOP:
        return None, aid
    if start > end:
        raise ParseError(f"span start {start} > end {end}", lineno)
    if start < 0 or end > len(tokens):
        raise ParseError(f"span {start} {end} outside sentence of {len(tokens)} tokens", lineno)
    repl = fields[2].strip()
    target = () if repl in ("", "-NONE-") else tuple(repl.split())
    middle = tuple(fields[3:-1]) if len(fields) >= 4 else ()
    return (
        Edit(start, end, tuple(tokens[start:end]), target, etype, middle),
        aid,
    )


def format_m2(sentences: Iterable[AnnotatedSentence]) -> str:
    """Canonical M2 serialization.

    Annotators appear in ascending id order, edits sorted by span; deletions
    write an empty replacement field; annotators with no edits get a noop line.
    Every sentence block ends with a blank line.
    """
    lines: list[str] = []
    for s in sentences:
        lines.append("S " + " ".join(s.tokens))
        for aid in sorted(s.edits):
            edits = s.edits[aid]
            if not edits:
                lines.append(f"A -1 -1|||{NOOP}|||-NONE-|||REQUIRED|||-NONE-|||{aid}")
            for e in sorted(edits, key=lambda e: (e.start, e.end)):
                cols = [f"{e.start} {e.end}", e.type or "", " ".join(e.target), *e.extra, str(aid)]
                lines.append("A " + "|||".join(cols))
        lines.append("")
    return "\n".join(lines) + ("\n" if lines else "")


def read_m2(path: str | Path) -> list[AnnotatedSentence]:
    return parse_m2(Path(path).read_text(encoding="utf-8"))


def write_m2(sentences: Iterable[AnnotatedSentence], path: str | Path) -> None:
    Path(path).write_text(format_m2(sentences), encoding="utf-8")


# ---------------------------------------------------------------------------
# Parallel corpora


def read_parallel(path: str | Path) -> tuple[list[tuple[str, str]], int]:
    """Read ``source<TAB>target`` lines; returns the pairs and the number of skipped lines.

    Lines without a tab, or whose source is blank, are skipped.
    """
    pairs: list[tuple[str, str]] = []
    skipped = 0
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n").rstrip("\r")
            if "\t" not in line:
                if line:
                    skipped += 1
                continue
            src, tgt = line.split("\t", 1)
            if not src.strip():
                skipped += 1
                continue
            pairs.append((src, tgt))
    if skipped:
        log.warning("%s: skipped %d malformed lines", path, skipped)
    return pairs, skipped


def write_parallel(pairs: Iterable[tuple[str, str]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for src, tgt in pairs:
            f.write(f"{src}\t{tgt}\n")


# ---------------------------------------------------------------------------
# Batching


@dataclass
class Batch:
    """Padded id matrices. Padding uses ``<eos>``; ``*_len`` hold true lengths."""

    src: np.ndarray
    src_len: np.ndarray
    tgt: np.ndarray
    tgt_len: np.ndarray
    index: np.ndarray  # positions of the pairs in the corpus

    def __len__(self) -> int:
        return len(self.src_len)


def source_ids(text: str, vocab: CharVocab = VOCAB) -> list[int]:
    return vocab.encode(text, add_eos=True)


def target_ids(text: str, vocab: CharVocab = VOCAB) -> list[int]:
    return [vocab.SOS] + vocab.encode(text, add_eos=True)


def pad_rows(rows: Sequence[Sequence[int]], pad: int, width: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    lengths = np.array([len(r) for r in rows], dtype=np.int64)
    width = int(lengths.max()) if width is None else width
    out = np.full((len(rows), width), pad, dtype=np.int64)
    for i, r in enumerate(rows):
        out[i, : len(r)] = r
    return out, lengths


def batch_from_pairs(
    pairs: Sequence[tuple[str, str]], index: Sequence[int] | None = None, vocab: CharVocab = VOCAB
) -> Batch:
    src, src_len = pad_rows([source_ids(s, vocab) for s, _ in pairs], vocab.EOS)
    tgt, tgt_len = pad_rows([target_ids(t, vocab) for _, t in pairs], vocab.EOS)
    idx = np.arange(len(pairs)) if index is None else np.asarray(index)
    return Batch(src, src_len, tgt, tgt_len, idx)


def make_batches(
    corpus: Sequence[tuple[str, str]],
    vocab: CharVocab,
    batch_size: int,
    rng: np.random.Generator,
    pool_batches: int = 50,
) -> list[Batch]:
    """One epoch of batches.

    The corpus is shuffled, then pools of ``pool_batches * batch_size`` pairs are
    sorted by source length and cut into batches (bucketing), and finally the
    batch order is shuffled. Every pair appears exactly once.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if len(corpus) == 0:
        raise ValueError("cannot batch an empty corpus")
    order = rng.permutation(len(corpus))
    pool = max(1, pool_batches) * batch_size
    groups: list[np.ndarray] = []
    for p in range(0, len(order), pool):
        chunk = order[p : p + pool]
        lengths = np.array([len(corpus[i][0]) for i in chunk])
        chunk = chunk[np.argsort(lengths, kind="stable")]
        groups.extend(chunk[i : i + batch_size] for i in range(0, len(chunk), batch_size))
    batches = [batch_from_pairs([corpus[i] for i in g], g, vocab) for g in groups]
    return [batches[i] for i in rng.permutation(len(batches))]
