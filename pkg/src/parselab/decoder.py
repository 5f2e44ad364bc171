"""Maximum spanning arborescence decoding.

Arc weights are compared lexicographically as tuples so that ties are broken
exactly: in single-root mode the first component penalises root arcs (so the
optimum uses exactly one), then comes the arc score, then an integer key that
makes the lexicographically smallest head array win among equal-score trees.
Tuple weights form an ordered group, so Chu-Liu/Edmonds stays exact with them.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

MAX_BRUTE_FORCE = 8


def _as_scores(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1] + 1:
        raise ValueError(f"score matrix must have shape (n+1, n), got {s.shape}")
    if s.shape[1] == 0:
        raise ValueError("cannot decode an empty sentence")
    if not np.all(np.isfinite(s)):
        raise ValueError("score matrix has non-finite entries")
    return s


def _add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def _sub(a, b):
    return tuple(x - y for x, y in zip(a, b))


def _arc_weights(s: np.ndarray, single_root: bool) -> dict:
    n = s.shape[1]
    base = n + 1
    weights = {}
    for d in range(1, n + 1):
        place = base ** (n - d)
        for h in range(n + 1):
            if h == d:
                continue
            w = (float(s[h, d - 1]), -h * place)
            if single_root:
                w = (-1 if h == 0 else 0,) + w
            weights[(h, d)] = w
    return weights


def _find_cycle(best: dict) -> list | None:
    visited = set()
    for start in best:
        path = []
        on_path = {}
        node = start
        while node in best and node not in visited and node not in on_path:
            on_path[node] = len(path)
            path.append(node)
            node = best[node]
        if node in on_path:
            return path[on_path[node]:]
        visited.update(path)
    return None


def _cle(nodes: list, arcs: dict, root) -> dict:
    """Return {dependent: head} for the maximum arborescence over ``arcs``.

    ``arcs`` maps (head, dep) -> weight tuple. Node ids are hashable; fresh
    contracted nodes are tuples tagged with "c".
    """
    incoming: dict = {}
    for (h, d), w in arcs.items():
        if d == root:
            continue
        cur = incoming.get(d)
        if cur is None or w > cur[1]:
            incoming[d] = (h, w)
    best = {d: hw[0] for d, hw in incoming.items()}
    cycle = _find_cycle(best)
    if cycle is None:
        return best

    in_cycle = set(cycle)
    c = ("c", len(nodes), tuple(cycle))
    new_arcs: dict = {}
    origin: dict = {}
    for (h, d), w in arcs.items():
        if h in in_cycle and d in in_cycle:
            continue
        if d in in_cycle:
            key = (h, c)
            w2 = _sub(w, incoming[d][1])
        elif h in in_cycle:
            key = (c, d)
            w2 = w
        else:
            key = (h, d)
            w2 = w
        if key not in new_arcs or w2 > new_arcs[key]:
            new_arcs[key] = w2
            origin[key] = (h, d)
    new_nodes = [v for v in nodes if v not in in_cycle] + [c]
    sub = _cle(new_nodes, new_arcs, root)

    result = {}
    for d, h in sub.items():
        # an arc entering c breaks the cycle at its original dependent
        oh, od = origin[(h, d)]
        result[od] = oh
    for v in cycle:
        if v not in result:
            result[v] = best[v]
    return result


def chu_liu_edmonds(scores, single_root: bool = True) -> np.ndarray:
    """Highest-scoring dependency tree for an (n+1) x n arc score matrix.

    ``scores[h, d-1]`` scores head ``h`` (0 = root) for dependent ``d``.
    Returns heads for dependents 1..n. Among equal-score trees the
    lexicographically smallest head array is returned.
    """
    s = _as_scores(scores)
    n = s.shape[1]
    if n == 1:
        return np.zeros(1, dtype=int)
    arcs = _arc_weights(s, single_root)
    tree = _cle(list(range(n + 1)), arcs, 0)
    return np.array([tree[d] for d in range(1, n + 1)], dtype=int)


def tree_score(scores, heads) -> float:
    s = np.asarray(scores, dtype=float)
    heads = np.asarray(heads, dtype=int)
    return float(s[heads, np.arange(len(heads))].sum())


@lru_cache(maxsize=None)
def all_arborescences(n: int, single_root: bool = True) -> np.ndarray:
    """Every valid head array for n tokens, in lexicographic order."""
    if n < 1:
        raise ValueError("n must be positive")
    if n > MAX_BRUTE_FORCE:
        raise ValueError(f"brute force enumeration limited to n <= {MAX_BRUTE_FORCE}")
    partial = np.zeros((1, 0), dtype=np.int8)
    for d in range(1, n + 1):
        chunks = []
        for h in range(n + 1):
            if h == d:
                continue
            cand = np.concatenate([partial, np.full((len(partial), 1), h, dtype=np.int8)], axis=1)
            # adding h -> d closes a cycle iff d is an ancestor of h among assigned arcs
            node = np.full(len(cand), h, dtype=np.int64)
            bad = np.zeros(len(cand), dtype=bool)
            for _ in range(d):
                assigned = (node >= 1) & (node <= d)
                bad |= assigned & (node == d)
                step = np.where(assigned, cand[np.arange(len(cand)), np.clip(node - 1, 0, d - 1)], 0)
                node = step.astype(np.int64)
            keep = ~bad
            if single_root:
                keep &= (cand == 0).sum(axis=1) <= 1
            chunks.append(cand[keep])
        partial = np.concatenate(chunks, axis=0)
        # restore lexicographic order across head choices
        order = np.lexsort(partial.T[::-1])
        partial = partial[order]
    if single_root:
        partial = partial[(partial == 0).sum(axis=1) == 1]
    partial.setflags(write=False)
    return partial


def brute_force_mst(scores, single_root: bool = True) -> np.ndarray:
    """Exhaustive arborescence search; testing oracle for ``chu_liu_edmonds``."""
    s = _as_scores(scores)
    n = s.shape[1]
    trees = all_arborescences(n, single_root)
    totals = s[trees.astype(np.int64), np.arange(n)].sum(axis=1)
    # argmax returns the first maximum, i.e. the lexicographically smallest tree
    return trees[int(np.argmax(totals))].astype(int)


def assign_labels(label_scores, heads=None) -> np.ndarray:
    """Per-dependent argmax label id; ties go to the lowest id.

    ``label_scores`` has shape (n, n_labels), already conditioned on ``heads``.
    """
    ls = np.asarray(label_scores, dtype=float)
    if ls.ndim != 2:
        raise ValueError("label scores must be a 2-d table")
    if heads is not None and len(heads) != ls.shape[0]:
        raise ValueError("label table and head array disagree in length")
    return np.argmax(ls, axis=1)
