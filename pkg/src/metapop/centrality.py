"""Node centrality on a flow matrix viewed as a weighted directed graph.

Self-loops are ignored throughout.  Path-based measures use the edge length
``-ln(w)``, so the length of a path is minus the log of the product of its
transition probabilities and the shortest path is the most probable one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .core import CENTRALITY_KINDS, FlowMatrix

# A certain transition (w = 1) still costs one hop.
MIN_EDGE_LENGTH = 1e-9
POWER_TOL = 1e-10
POWER_MAX_ITER = 100_000


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class CentralityRanking:
    kind: str
    scores: np.ndarray
    ranked: np.ndarray
    eigenvalue: float = float("nan")

    def top_k(self, k: int) -> list[int]:
        return top_k(self, k)


def _offdiag(weights) -> np.ndarray:
    w = np.array(weights, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("weights must be a square matrix")
    np.fill_diagonal(w, 0.0)
    return w


def edge_lengths(weights) -> np.ndarray:
    """Edge-length matrix; ``inf`` where there is no edge."""
    w = _offdiag(weights)
    with np.errstate(divide="ignore"):
        length = np.where(w > 0, -np.log(w), np.inf)
    return np.where(np.isfinite(length), np.maximum(length, MIN_EDGE_LENGTH), np.inf)


def shortest_distances(weights) -> np.ndarray:
    length = edge_lengths(weights)
    # explicit sparse input: dense input treats entries near 0 (like the
    # 1e-9 floor) as missing edges
    r, c = np.nonzero(np.isfinite(length))
    graph = csr_matrix((length[r, c], (r, c)), shape=length.shape)
    return dijkstra(graph, directed=True)


def degree_scores(weights) -> np.ndarray:
    """Weighted in- plus out-strength."""
    w = _offdiag(weights)
    return w.sum(axis=0) + w.sum(axis=1)


def closeness_scores(weights) -> np.ndarray:
    """Harmonic closeness over outgoing shortest paths: sum of 1/d(i, j)."""
    d = shortest_distances(weights)
    np.fill_diagonal(d, np.inf)
    with np.errstate(divide="ignore"):
        return np.where(np.isfinite(d), 1.0 / d, 0.0).sum(axis=1)


def _tie_tol(d):
    return 1e-10 * (1.0 + np.abs(d))


def betweenness_scores(weights) -> np.ndarray:
    """Unnormalised directed betweenness (Brandes accumulation).

    For every ordered pair (s, t) the fraction of shortest s->t paths that
    pass through v is added to v's score.
    """
    length = edge_lengths(weights)
    dist = shortest_distances(weights)
    n = length.shape[0]
    score = np.zeros(n)
    for s in range(n):
        d = dist[s]
        reach = np.isfinite(d)
        # dag[u, v]: edge u->v lies on some shortest path from s
        with np.errstate(invalid="ignore"):
            slack = d[:, None] + length - d[None, :]
        dag = reach[:, None] & reach[None, :] & np.isfinite(length)
        dag &= np.abs(np.where(dag, slack, 0.0)) <= _tie_tol(d)[None, :]
        dag[:, s] = False
        order = np.flatnonzero(reach)
        order = order[np.argsort(d[order], kind="stable")]
        sigma = np.zeros(n)
        sigma[s] = 1.0
        for v in order:
            if v != s:
                sigma[v] = sigma[dag[:, v]].sum()
        delta = np.zeros(n)
        for v in order[::-1]:
            succ = dag[v]
            if succ.any():
                delta[v] = (sigma[v] / sigma[succ] * (1.0 + delta[succ])).sum()
            if v != s:
                score[v] += delta[v]
    return score


def eigenvector_scores(weights, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER):
    """Dominant eigenvector of the transposed off-diagonal weight matrix.

    Power iteration runs on ``W.T + I``; the shift leaves the eigenvectors
    alone but removes the period-2 oscillation of bipartite graphs such as
    stars.  Returns ``(scores, eigenvalue)`` with scores summing to one.
    """
    w = _offdiag(weights)
    n = w.shape[0]
    op = w.T + np.eye(n)
    v = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = op @ v
        nxt /= nxt.sum()
        if np.abs(nxt - v).max() < tol:
            v = nxt
            break
        v = nxt
    else:
        raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")
    v = np.maximum(v, 0.0)
    v /= v.sum()
    lam = float(v @ (w.T @ v) / (v @ v))
    return v, lam


def rank_scores(scores) -> np.ndarray:
    """Indices by descending score; ties go to the lower index."""
    scores = np.asarray(scores)
    return np.lexsort((np.arange(scores.size), -scores))


def centrality_scores(weights, kind: str):
    if kind == "degree":
        return degree_scores(weights), float("nan")
    if kind == "closeness":
        return closeness_scores(weights), float("nan")
    if kind == "betweenness":
        return betweenness_scores(weights), float("nan")
    if kind == "eigenvector":
        return eigenvector_scores(weights)
    raise ValueError(f"unsupported centrality kind {kind!r}; choose from {CENTRALITY_KINDS}")


def centrality(m: FlowMatrix, kind: str) -> CentralityRanking:
    if m.n < 1:
        raise ValueError("empty matrix")
    scores, lam = centrality_scores(m.w, kind)
    scores.setflags(write=False)
    return CentralityRanking(kind, scores, rank_scores(scores), lam)


def top_k(r: CentralityRanking, k: int) -> list[int]:
    n = len(r.ranked)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    return [int(x) for x in r.ranked[:k]]
