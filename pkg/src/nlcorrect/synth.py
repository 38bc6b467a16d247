"""Synthetic article/determiner and noun-number errors for data augmentation.

Error statistics are collected from annotated learner text, then clean
sentences are corrupted by sampling the same kinds of errors. Gold edits
describe corrections, so the learner's error is the inverse: a gold edit that
inserts "the" is evidence that learners drop determiners.
"""
from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .numcore import derive_seed, make_rng
from .textdata import AnnotatedSentence, ParseError

log = logging.getLogger(__name__)

ART_OR_DET = "ArtOrDet"
NOUN_NUMBER = "Nn"

DETERMINERS = frozenset(
    "a an the this that these those my your his her its our their".split()
)
DEFAULT_INSERT_CHOICE = {"a": 1 / 3, "an": 1 / 3, "the": 1 / 3}

IRREGULAR_PLURALS = {
    "child": "children",
    "man": "men",
    "woman": "women",
    "person": "people",
    "foot": "feet",
    "tooth": "teeth",
    "mouse": "mice",
}
IRREGULAR_SINGULARS = {v: k for k, v in IRREGULAR_PLURALS.items()}

# Closed classes and a few frequent verbs; anything unknown is guessed from its shape.
PRONOUNS = frozenset(
    "i you he she it we they me him us them myself yourself himself herself itself ourselves themselves "
    "who whom whose which what someone something anyone anything everyone everything nobody nothing".split()
)
AUXILIARIES = frozenset(
    "will would shall should can could may might must do does did am is are was were be been being "
    "have has had to".split()
)
PREPOSITIONS = frozenset(
    "of in on at by for with about against between into through during before after above below from up "
    "down out off over under again further than as since until without within across behind beyond near "
    "toward towards upon among".split()
)
CONJUNCTIONS = frozenset("and or but nor so yet because although though while if when where whether".split())
OTHER_CLOSED = frozenset(
    "not no there here then very too also just only more most less least much many some any each every "
    "all both either neither other another such own same few several how why".split()
)
COMMON_VERBS = frozenset(
    "go goes went gone get gets got make makes made take takes took see sees saw seen know knows knew "
    "think thinks thought come comes came give gives gave find finds found tell tells told become becomes "
    "became leave leaves left feel feels felt seem seems seemed want wants need needs use uses used "
    "like likes help helps".split()
)
ADJECTIVE_SUFFIXES = ("ive", "ous", "ful", "able", "ible", "al", "ic", "less")
ADJECTIVES = frozenset(
    "good bad new old big small large great little long short high low young important different "
    "happy sad easy hard real sure free full whole best better worse own".split()
)

FLAG_NAMES = ("DET", "SG", "PL", "NP")


# ---------------------------------------------------------------------------
# Noun number


def pluralize(word: str) -> str:
    low = word.lower()
    if low in IRREGULAR_PLURALS:
        return _match_case(word, IRREGULAR_PLURALS[low])
    if len(low) > 1 and low.endswith("y") and low[-2] not in "aeiou":
        return word[:-1] + "ies"
    if low.endswith(("s", "x", "z", "ch", "sh")):
        return word + "es"
    return word + "s"


def singularize(word: str) -> str:
    low = word.lower()
    if low in IRREGULAR_SINGULARS:
        return _match_case(word, IRREGULAR_SINGULARS[low])
    if low.endswith("ies") and len(low) > 4:
        return word[:-3] + "y"
    if low.endswith(("sses", "xes", "zes", "ches", "shes")):
        return word[:-2]
    if low.endswith("s") and not low.endswith("ss"):
        return word[:-1]
    return word


def _match_case(src: str, out: str) -> str:
    return out.capitalize() if src[:1].isupper() else out


def _looks_plural(low: str) -> bool:
    if low in IRREGULAR_SINGULARS:
        return True
    return len(low) > 3 and low.endswith("s") and not low.endswith(("ss", "us", "is"))


# ---------------------------------------------------------------------------
# Tagging


@dataclass
class TaggedSentence:
    tokens: list[str]
    det: list[bool]
    noun_sg: list[bool]
    noun_pl: list[bool]
    np_start: list[bool]

    def __post_init__(self):
        n = len(self.tokens)
        if not (len(self.det) == len(self.noun_sg) == len(self.noun_pl) == len(self.np_start) == n):
            raise ValueError("one flag per token is required")
        for i in range(n):
            if self.noun_sg[i] and self.noun_pl[i]:
                raise ValueError(f"token {i} {self.tokens[i]!r} flagged both singular and plural")
            if self.det[i] and (self.noun_sg[i] or self.noun_pl[i]):
                raise ValueError(f"token {i} {self.tokens[i]!r} flagged both determiner and noun")

    def flags(self, i: int) -> list[str]:
        vals = (self.det[i], self.noun_sg[i], self.noun_pl[i], self.np_start[i])
        return [name for name, on in zip(FLAG_NAMES, vals) if on]

    @classmethod
    def from_flags(cls, tokens: Sequence[str], flags: Sequence[Iterable[str]]) -> "TaggedSentence":
        sets = [set(f) for f in flags]
        return cls(
            list(tokens),
            ["DET" in s for s in sets],
            ["SG" in s for s in sets],
            ["PL" in s for s in sets],
            ["NP" in s for s in sets],
        )


def _word_class(low: str, prev_class: str | None, before_conj: str | None) -> str:
    if low in DETERMINERS:
        return "det"
    if not any(c.isalpha() for c in low):
        return "punct"
    if low in PRONOUNS:
        return "pron"
    if low in AUXILIARIES:
        return "aux"
    if low in PREPOSITIONS:
        return "prep"
    if low in CONJUNCTIONS:
        return "conj"
    if low in OTHER_CLOSED:
        return "other"
    if low in COMMON_VERBS:
        return "verb"
    if prev_class in ("aux", "pron"):
        return "verb"
    if prev_class == "conj" and before_conj in ("verb", "adj"):
        return before_conj
    if low in ADJECTIVES or (len(low) > 4 and low.endswith(ADJECTIVE_SUFFIXES)):
        return "adj"
    if low.endswith("ly") and len(low) > 4:
        return "other"
    if low.endswith(("ing", "ed")) and len(low) > 5:
        return "verb"
    return "noun"


def tag_heuristic(tokens: Sequence[str]) -> TaggedSentence:
    """Rule-based determiner/noun/NP-start flags.

    Closed-class lexicons and suffix shapes decide each word's class; a word
    after an auxiliary or pronoun is read as a verb, and a word after a
    conjunction inherits a verb or adjective reading from the word before it.
    An NP starts at a determiner, or at the first adjective or noun of a run
    that no determiner introduces. Capitalized words after the first position
    are treated as names, not nouns. Unknown words default to nouns, so some
    verbs are tagged as nouns.
    """
    classes: list[str] = []
    for i, tok in enumerate(tokens):
        low = tok.lower()
        prev = classes[-1] if classes else None
        before_conj = classes[-2] if len(classes) >= 2 and prev == "conj" else None
        cls = _word_class(low, prev, before_conj)
        if cls == "noun" and i > 0 and tok[:1].isupper():
            cls = "name"
        classes.append(cls)
    n = len(tokens)
    det = [c == "det" for c in classes]
    noun_pl = [c == "noun" and _looks_plural(t.lower()) for c, t in zip(classes, tokens)]
    noun_sg = [c == "noun" and not pl for c, pl in zip(classes, noun_pl)]
    np_start = [False] * n
    for i, c in enumerate(classes):
        if c == "det":
            np_start[i] = True
        elif c in ("adj", "noun"):
            prev = classes[i - 1] if i > 0 else None
            if prev not in ("det", "adj", "noun"):
                np_start[i] = True
    return TaggedSentence(list(tokens), det, noun_sg, noun_pl, np_start)


def read_tagged(path: str | Path) -> list[TaggedSentence]:
    """Pre-tagged input: ``token<TAB>flags`` per line, flags a comma list of
    DET, SG, PL, NP (or ``-``); a blank line ends a sentence."""
    out: list[TaggedSentence] = []
    toks: list[str] = []
    flags: list[list[str]] = []

    def flush():
        if toks:
            out.append(TaggedSentence.from_flags(toks, flags))
            toks.clear()
            flags.clear()

    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                flush()
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError("expected token<TAB>flags", lineno)
            fl = [] if parts[1] in ("", "-") else parts[1].split(",")
            bad = set(fl) - set(FLAG_NAMES)
            if bad:
                raise ParseError(f"unknown flags {sorted(bad)}", lineno)
            toks.append(parts[0])
            flags.append(fl)
    flush()
    return out


def write_tagged(sentences: Iterable[TaggedSentence], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for s in sentences:
            for i, tok in enumerate(s.tokens):
                f.write(f"{tok}\t{','.join(s.flags(i)) or '-'}\n")
            f.write("\n")


# ---------------------------------------------------------------------------
# Error statistics


@dataclass
class ErrorDistribution:
    p_delete: float = 0.0
    confusion: dict[str, dict[str, float]] = field(default_factory=dict)  # correct -> written
    p_insert: float = 0.0
    insert_choice: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_INSERT_CHOICE))
    p_to_singular: float = 0.0
    p_to_plural: float = 0.0

    def __post_init__(self):
        for name in ("p_delete", "p_insert", "p_to_singular", "p_to_plural"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        for det, row in self.confusion.items():
            if any(p < 0 for p in row.values()) or sum(row.values()) > 1 + 1e-9:
                raise ValueError(f"confusion row for {det!r} is not a sub-distribution")
        if self.p_insert > 0 and abs(sum(self.insert_choice.values()) - 1) > 1e-9:
            raise ValueError("insertion choices must sum to 1")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ErrorDistribution":
        data = json.loads(text)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown error-distribution keys {sorted(unknown)}")
        return cls(**data)


def _ratio(events: int, opportunities: int, what: str) -> float:
    if opportunities == 0:
        if events:
            log.warning("%s: %d events but no opportunities", what, events)
        else:
            log.warning("%s: no opportunities in the corpus, probability set to 0", what)
        return 0.0
    return min(1.0, events / opportunities)


def estimate_error_stats(corpus: Sequence[AnnotatedSentence], annotator: int | None = None) -> ErrorDistribution:
    """Estimate corruption probabilities from type-labeled gold edits.

    Opportunities are counted on the corrected sentence (first annotator unless
    given): determiner tokens for deletion and replacement, NP starts that are
    not determiners for insertion, singular/plural nouns for number flips.
    Edit directions are inverted: gold det insertion -> learner deletion, gold
    det deletion -> learner insertion, gold X->Y -> learner wrote X for Y, gold
    plural target -> learner wrote singular.
    """
    n_det = n_np = n_sg = n_pl = 0
    deletions = insertions = to_sg = to_pl = 0
    det_counts: Counter = Counter()
    swaps: Counter = Counter()
    inserted: Counter = Counter()
    for sent in corpus:
        aid = annotator if annotator is not None else sent.annotators()[0]
        tagged = tag_heuristic(sent.corrected(aid))
        for i, tok in enumerate(tagged.tokens):
            if tagged.det[i]:
                n_det += 1
                det_counts[tok.lower()] += 1
            elif tagged.np_start[i]:
                n_np += 1
            n_sg += tagged.noun_sg[i]
            n_pl += tagged.noun_pl[i]
        for e in sent.gold(aid):
            src = [t.lower() for t in e.source]
            tgt = [t.lower() for t in e.target]
            if e.type == ART_OR_DET:
                if not src and len(tgt) == 1 and tgt[0] in DETERMINERS:
                    deletions += 1
                elif len(src) == 1 and src[0] in DETERMINERS and not tgt:
                    insertions += 1
                    inserted[src[0]] += 1
                elif len(src) == 1 and len(tgt) == 1 and src[0] in DETERMINERS and tgt[0] in DETERMINERS:
                    swaps[(tgt[0], src[0])] += 1
                else:
                    log.debug("ArtOrDet edit %s not representable", e)
            elif e.type == NOUN_NUMBER and len(src) == 1 and len(tgt) == 1:
                if _looks_plural(tgt[0]) and not _looks_plural(src[0]):
                    to_sg += 1
                elif _looks_plural(src[0]) and not _looks_plural(tgt[0]):
                    to_pl += 1
    confusion: dict[str, dict[str, float]] = {}
    for (correct, written), c in sorted(swaps.items()):
        denom = det_counts[correct]
        if denom:
            confusion.setdefault(correct, {})[written] = c / denom
    for row in confusion.values():
        total = sum(row.values())
        if total > 1:
            for k in row:
                row[k] /= total
    choice = dict(DEFAULT_INSERT_CHOICE)
    if inserted:
        tot = sum(inserted.values())
        choice = {d: c / tot for d, c in sorted(inserted.items())}
    return ErrorDistribution(
        p_delete=_ratio(deletions, n_det, "determiner deletion"),
        confusion=confusion,
        p_insert=_ratio(insertions, n_np, "determiner insertion"),
        insert_choice=choice,
        p_to_singular=_ratio(to_sg, n_pl, "plural to singular"),
        p_to_plural=_ratio(to_pl, n_sg, "singular to plural"),
    )


# ---------------------------------------------------------------------------
# Corruption


def _choose(u: float, options: dict[str, float]) -> str:
    """Inverse-CDF pick over ``options`` in sorted key order."""
    keys = sorted(options)
    total = sum(options.values())
    acc = 0.0
    for k in keys:
        acc += options[k] / total
        if u < acc:
            return k
    return keys[-1]


def corrupt_pass(tagged: TaggedSentence, dist: ErrorDistribution, rng: np.random.Generator) -> tuple[list[str], int]:
    """One left-to-right corruption pass; returns the tokens and the number of changes.

    The random draws made per token depend only on its flags, so the stream
    consumed is the same whatever the outcomes are.
    """
    out: list[str] = []
    changes = 0
    for i, tok in enumerate(tagged.tokens):
        if tagged.np_start[i] and not tagged.det[i]:
            u_ins, u_pick = rng.random(), rng.random()
            if u_ins < dist.p_insert:
                out.append(_choose(u_pick, dist.insert_choice))
                changes += 1
        if tagged.det[i]:
            u_del, u_rep = rng.random(), rng.random()
            if u_del < dist.p_delete:
                changes += 1
                continue
            row = dist.confusion.get(tok.lower(), {})
            acc = 0.0
            for written in sorted(row):
                acc += row[written]
                if u_rep < acc:
                    tok = _match_case(tok, written)
                    changes += 1
                    break
        elif tagged.noun_sg[i] or tagged.noun_pl[i]:
            p = dist.p_to_plural if tagged.noun_sg[i] else dist.p_to_singular
            if rng.random() < p:
                flipped = pluralize(tok) if tagged.noun_sg[i] else singularize(tok)
                if flipped != tok:
                    tok = flipped
                    changes += 1
        out.append(tok)
    return out, changes


def corrupt(
    tagged: TaggedSentence, dist: ErrorDistribution, rng: np.random.Generator, passes: int = 2
) -> list[tuple[list[str], list[str]]]:
    """Up to ``passes`` independent corrupted versions, each paired with the clean tokens.

    Passes that change nothing are dropped.
    """
    pairs = []
    for _ in range(passes):
        toks, n = corrupt_pass(tagged, dist, rng)
        if n:
            pairs.append((toks, list(tagged.tokens)))
    return pairs


def corrupt_corpus(
    sentences: Sequence[TaggedSentence], dist: ErrorDistribution, seed: int, passes: int = 2
) -> list[tuple[str, str]]:
    """Corrupt every sentence with its own seed-derived stream; returns (corrupted, clean) strings."""
    out = []
    for k, s in enumerate(sentences):
        rng = make_rng(derive_seed(seed, "synth", str(k)))
        out.extend((" ".join(c), " ".join(g)) for c, g in corrupt(s, dist, rng, passes))
    return out
