"""A small English-like grammar for end-to-end correction experiments.

Sentences look like ``the dog sees an old cat with these boxes .`` The
determiners are chosen so that any single deleted determiner or flipped noun
has exactly one repair: the subject always takes ``the`` and its number shows
on the verb, an object takes ``a``/``an`` when singular and ``these`` when
plural, and a prepositional object takes ``this``/``these``.
"""
from __future__ import annotations

import numpy as np

from .synth import TaggedSentence, pluralize

NOUNS = (
    "dog cat bird box fox church city baby lady story horse house tree car "
    "apple egg idea owl orange teacher student friend window table key"
).split()
ADJECTIVES = "big small old new red green happy quiet early".split()
VERBS_SG = "sees likes finds moves watches follows keeps helps".split()
VERBS_PL = [v[:-2] if v.endswith(("ches", "shes")) else v[:-1] for v in VERBS_SG]
PREPOSITIONS = "with near behind under".split()


def _indefinite(word: str) -> str:
    return "an" if word[0] in "aeiou" else "a"


def _noun_phrase(rng: np.random.Generator, role: str) -> tuple[list[str], list[list[str]], bool]:
    noun = NOUNS[int(rng.integers(len(NOUNS)))]
    plural = bool(rng.random() < 0.5)
    words: list[str] = []
    flags: list[list[str]] = []
    if rng.random() < 0.4:
        words.append(ADJECTIVES[int(rng.integers(len(ADJECTIVES)))])
        flags.append([])
    words.append(pluralize(noun) if plural else noun)
    flags.append(["PL" if plural else "SG"])
    if role == "subject":
        det = "the"
    elif role == "object":
        det = "these" if plural else _indefinite(words[0])
    else:
        det = "these" if plural else "this"
    return [det] + words, [["DET", "NP"]] + flags, plural


def sentence(rng: np.random.Generator) -> TaggedSentence:
    subj, subj_flags, plural = _noun_phrase(rng, "subject")
    verbs = VERBS_PL if plural else VERBS_SG
    toks = subj + [verbs[int(rng.integers(len(verbs)))]]
    flags = subj_flags + [[]]
    obj, obj_flags, _ = _noun_phrase(rng, "object")
    toks += obj
    flags += obj_flags
    if rng.random() < 0.5:
        pp, pp_flags, _ = _noun_phrase(rng, "prep")
        toks += [PREPOSITIONS[int(rng.integers(len(PREPOSITIONS)))]] + pp
        flags += [[]] + pp_flags
    toks.append(".")
    flags.append([])
    return TaggedSentence.from_flags(toks, flags)


def corpus(n: int, rng: np.random.Generator) -> list[TaggedSentence]:
    return [sentence(rng) for _ in range(n)]
