"""Brute-force reference for the M2 edit-set selection (no shared code with the scorer)."""
from __future__ import annotations

from collections import Counter
from functools import lru_cache
from itertools import product


def lev(a: tuple, b: tuple) -> int:
    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a):
            return len(b) - j
        if j == len(b):
            return len(a) - i
        return min(go(i + 1, j + 1) + (a[i] != b[j]), go(i + 1, j) + 1, go(i, j + 1) + 1)

    return go(0, 0)


def all_min_paths(a: tuple, b: tuple) -> list[list[tuple[str, int, int]]]:
    """Every op sequence of minimum cost; equal tokens may only be matched."""
    best = lev(a, b)
    out = []

    def walk(i, j, cost, ops):
        if cost > best:
            return
        if i == len(a) and j == len(b):
            if cost == best:
                out.append(list(ops))
            return
        if i < len(a) and j < len(b):
            if a[i] == b[j]:
                walk(i + 1, j + 1, cost, ops + [("M", i, j)])
            else:
                walk(i + 1, j + 1, cost + 1, ops + [("S", i, j)])
        if i < len(a):
            walk(i + 1, j, cost + 1, ops + [("D", i, j)])
        if j < len(b):
            walk(i, j + 1, cost + 1, ops + [("I", i, j)])

    walk(0, 0, 0, [])
    return out


def segmentations(ops, max_unchanged):
    """Ways to cut a path into unchanged words and edits (>=1 edit op, <= max_unchanged matches)."""
    n = len(ops)
    for cuts in product([False, True], repeat=max(n - 1, 0)):
        segs, cur = [], [ops[0]] if ops else []
        for k in range(1, n):
            if cuts[k - 1]:
                segs.append(cur)
                cur = []
            cur.append(ops[k])
        if cur:
            segs.append(cur)
        ok = True
        for s in segs:
            n_match = sum(op == "M" for op, _, _ in s)
            if n_match < len(s) and n_match > max_unchanged:
                ok = False
        if ok:
            yield segs


def seg_edit(seg, a, b):
    i0, j0 = seg[0][1], seg[0][2]
    i1 = i0 + sum(op in "MSD" for op, _, _ in seg)
    j1 = j0 + sum(op in "MSI" for op, _, _ in seg)
    return (i0, i1, tuple(b[j0:j1]))


def oracle_best(a, b, gold_keys, max_unchanged=2):
    """(matched, edit-key sequence) of the best selection under the scorer's tie rules."""
    a, b = tuple(a), tuple(b)
    gold = Counter(set(gold_keys))
    best = None
    for path in all_min_paths(a, b):
        for segs in segmentations(path, max_unchanged):
            keys = tuple(seg_edit(s, a, b) for s in segs if any(op != "M" for op, _, _ in s))
            matched = sum((Counter(keys) & gold).values())
            val = (-matched, len(keys), keys)
            if best is None or val < best:
                best = val
    return -best[0], best[2]
