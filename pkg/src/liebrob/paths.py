"""Self-avoiding interaction paths between a source and a target support.

A path X_1, ..., X_l runs from the source (X_1 touches it) to the target
(X_l touches it). Consecutive terms overlap, non-consecutive terms are
disjoint, and the endpoints act like extra path elements: X_2..X_l avoid the
source and X_1..X_{l-1} avoid the target. Enumeration walks backward from
the target, so the partial path gamma = (X_l, X_{l-1}, ...).

Counting runs in a compiled kernel when it is available and every site fits
in a 64-bit mask; LIEBROB_PURE=1 forces the Python walk.
"""

import os
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import InvalidInputError

try:
    if os.environ.get("LIEBROB_PURE"):
        raise ImportError("pure-Python backend requested")
    from ._pathkernel import count_paths as _count_compiled
    BACKEND = "compiled"
except ImportError:
    _count_compiled = None
    BACKEND = "python"


def _mask(sites):
    m = 0
    for s in sites:
        m |= 1 << int(s)
    return m


@dataclass
class InteractionGraph:
    terms: list
    masks: list = field(init=False)
    neighbors: list = field(init=False)

    def __post_init__(self):
        self.terms = list(self.terms)
        self.masks = [_mask(t.support) for t in self.terms]
        n = len(self.terms)
        self.neighbors = [
            [j for j in range(n) if j != i and self.masks[i] & self.masks[j]] for i in range(n)
        ]
        self._index = {t.id: i for i, t in enumerate(self.terms)}

    def overlaps(self, a, b):
        i, j = self._index[a], self._index[b]
        return i != j and bool(self.masks[i] & self.masks[j])

    def n_sites(self):
        return max((max(t.support) for t in self.terms), default=-1) + 1

    def mask_of(self, term_id):
        return self.masks[self._index[term_id]]

    def term(self, term_id):
        return self.terms[self._index[term_id]]


@dataclass
class PathEnumeration:
    counts_by_length: dict
    total_weight_by_length: dict
    L_max: int
    truncated: bool
    paths: list = None  # forward-ordered tuples of term ids, when materialized
    backend: str = "python"

    def total_count(self):
        return sum(self.counts_by_length.values())


def _walk_py(graph, src, tgt, L_max, weights, materialize):
    counts = [0] * (L_max + 1)
    wsum = [0.0] * (L_max + 1)
    paths = [] if materialize else None
    truncated = False
    masks, nbrs = graph.masks, graph.neighbors
    stack = []

    def rec(last, forb, depth, wprod):
        nonlocal truncated
        stack.append(last)
        if masks[last] & src:
            counts[depth] += 1
            wsum[depth] += wprod
            if materialize:
                paths.append(tuple(graph.terms[i].id for i in reversed(stack)))
        elif depth == L_max:
            if not truncated and any(not masks[j] & forb for j in nbrs[last]):
                truncated = True
        else:
            nf = forb | masks[last]
            for j in nbrs[last]:
                if not masks[j] & forb:
                    rec(j, nf, depth + 1, wprod * weights[j])
        stack.pop()

    for t in range(len(masks)):
        if masks[t] & tgt:
            rec(t, tgt, 1, weights[t])
    return counts, wsum, truncated, paths


def _as_enumeration(counts, wsum, L_max, truncated, paths, backend):
    c = {l: int(counts[l]) for l in range(1, L_max + 1) if counts[l]}
    w = {l: float(wsum[l]) for l in range(1, L_max + 1) if counts[l]}
    return PathEnumeration(c, w, L_max, bool(truncated), paths, backend)


def enumerate_paths(graph, source_support, target_support, L_max, materialize=True, backend=None):
    """All self-avoiding paths of length <= L_max from source to target.

    Weights are prod b_X^2. `truncated` is set when some partial path could
    still be extended at length L_max. materialize=False counts only, using
    the compiled kernel when available.
    """
    if L_max < 1:
        raise InvalidInputError(f"L_max must be >= 1, got {L_max}")
    src, tgt = _mask(source_support), _mask(target_support)
    weights = [t.bound**2 for t in graph.terms]
    use = backend or ("compiled" if _count_compiled is not None else "python")
    fits = graph.n_sites() <= 64 and max(source_support, default=0) < 64 and max(target_support, default=0) < 64
    if not materialize and use == "compiled" and _count_compiled is not None and fits and graph.terms:
        masks = np.array(graph.masks, dtype=np.uint64)
        indptr = np.zeros(len(masks) + 1, dtype=np.intc)
        indptr[1:] = np.cumsum([len(nb) for nb in graph.neighbors])
        indices = np.array([j for nb in graph.neighbors for j in nb] or [0], dtype=np.intc)
        counts = np.zeros(L_max + 1, dtype=np.int64)
        wsum = np.zeros(L_max + 1)
        trunc = _count_compiled(masks, indptr, indices, np.asarray(weights, float),
                                src, tgt, int(L_max), counts, wsum)
        return _as_enumeration(counts, wsum, L_max, trunc, None, "compiled")
    counts, wsum, trunc, paths = _walk_py(graph, src, tgt, L_max, weights, materialize)
    return _as_enumeration(counts, wsum, L_max, trunc, paths, "python")


def default_L_max(r, diameter):
    return int(r) + 2 * int(diameter)


def next_steps(gamma, graph, target_support):
    """Delta(gamma): terms that overlap the last element of the backward
    partial path and avoid every earlier element and the target. For the
    empty path, the terms touching the target."""
    tgt = _mask(target_support)
    if not gamma:
        return [t.id for t, m in zip(graph.terms, graph.masks) if m & tgt]
    last = graph.mask_of(gamma[-1])
    forb = tgt
    for g in gamma[:-1]:
        forb |= graph.mask_of(g)
    return [
        t.id for t, m in zip(graph.terms, graph.masks)
        if t.id != gamma[-1] and m & last and not m & forb
    ]


def excluded_set(path, k, graph, target_support):
    """V_k for a forward path X_1..X_l: the target for k = l-1, otherwise the
    union of the supports of X_{k+2}, ..., X_l."""
    l = len(path)
    if not 0 <= k < l:
        raise InvalidInputError(f"k must be in [0, {l}), got {k}")
    if k == l - 1:
        return frozenset(int(s) for s in target_support)
    out = set()
    for m in range(k + 2, l + 1):
        out.update(graph.term(path[m - 1]).support)
    return frozenset(out)


def delta_from_excluded(path, j, graph, target_support):
    """Next-step set after j backward steps, written with excluded sets:
    terms meeting V_{l-1-j} but not V_{l-j} (V_l is empty)."""
    l = len(path)
    inner = excluded_set(path, l - 1 - j, graph, target_support)
    outer = frozenset() if j == 0 else excluded_set(path, l - j, graph, target_support)
    mi, mo = _mask(inner), _mask(outer)
    return [t.id for t, m in zip(graph.terms, graph.masks) if m & mi and not m & mo]


def compare_delta_forms(path, graph, target_support):
    """Compare the operational next-step sets along a complete path with the
    excluded-set form. Returns a list of (j, operational, excluded_form) for
    every backward position where they differ."""
    gamma_full = list(reversed(path))
    out = []
    for j in range(len(path)):
        op = sorted(next_steps(gamma_full[:j], graph, target_support))
        vf = sorted(delta_from_excluded(path, j, graph, target_support))
        if op != vf:
            out.append((j, op, vf))
    return out


def is_valid_path(path, graph, source_support, target_support):
    """Independent re-check of every path invariant."""
    if not path or len(set(path)) != len(path):
        return False
    m = [graph.mask_of(x) for x in path]
    src, tgt = _mask(source_support), _mask(target_support)
    l = len(m)
    for i in range(l):
        for j in range(i + 1, l):
            if j == i + 1 and not m[i] & m[j]:
                return False
            if j > i + 1 and m[i] & m[j]:
                return False
    if not m[0] & src or not m[-1] & tgt:
        return False
    if any(x & src for x in m[1:]) or any(x & tgt for x in m[:-1]):
        return False
    return True


def weighted_path_sum(enum, f):
    """sum_l W_l f(l). Returns (value, tail_flag); the flag is set when the
    enumeration was truncated and f still grows past L_max."""
    val = sum(w * f(l) for l, w in enum.total_weight_by_length.items())
    tail = bool(enum.truncated and f(enum.L_max + 1) > f(enum.L_max))
    return val, tail


def klocal_branching(N, k):
    """R = (k-1) C(N,k) / (N/k): the bound on |Delta| for complete k-local graphs."""
    return (k - 1) * comb(N, k) * k // N


def dump_paths(enum, fh):
    for p in enum.paths or []:
        fh.write(",".join(str(x) for x in p) + "\n")


def load_paths(fh):
    return [tuple(int(x) for x in line.strip().split(",")) for line in fh if line.strip()]
