"""Vantage-point tree with batched (vectorized) exact queries.

Queries are processed in batches: every node is visited once per batch with the
subset of queries that could still find something inside it, so the Python
overhead is per node rather than per (node, query) pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Slack on triangle-inequality pruning bounds; keeps float rounding from
# discarding a subtree that holds an exact tie.
_PRUNE_SLACK = 1e-12


def _distances(queries: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix, shape (len(queries), len(points))."""
    diff = queries[:, None, :] - points[None, :, :]
    return np.sqrt(np.einsum("qpk,qpk->qp", diff, diff))


@dataclass
class _Node:
    # leaf nodes carry ``items``; internal nodes carry the split
    items: np.ndarray | None = None
    vantage: int = -1
    inner: "_Node | None" = None
    outer: "_Node | None" = None
    # distance-to-vantage ranges of the two children
    inner_range: tuple[float, float] = (0.0, 0.0)
    outer_range: tuple[float, float] = (0.0, 0.0)
    # largest per-item radius in the subtree (0 for plain point sets)
    max_radius: float = 0.0


@dataclass
class VPTree:
    """Immutable VP-tree over ``points`` (shape (n, 3)).

    ``radii`` optionally attaches a bounding radius to every item, which turns
    radius queries into "could the ball around item j reach the query ball"
    tests. That is how triangles are indexed (keyed by centroid).
    """

    points: np.ndarray
    radii: np.ndarray | None = None
    leaf_size: int = 16
    root: _Node = field(init=False, repr=False)

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[0] == 0:
            raise ValueError("VPTree needs a non-empty (n, d) point array")
        if self.radii is not None:
            self.radii = np.asarray(self.radii, dtype=float)
            if self.radii.shape != (len(self.points),):
                raise ValueError("radii must have one entry per point")
        self.points.setflags(write=False)
        self.root = self._build(np.arange(len(self.points)))

    def __len__(self) -> int:
        return len(self.points)

    def _build(self, items: np.ndarray) -> _Node:
        max_radius = float(self.radii[items].max()) if self.radii is not None else 0.0
        if len(items) <= self.leaf_size:
            return _Node(items=items, max_radius=max_radius)
        pts = self.points[items]
        # vantage: farthest from the node centroid, lowest index on ties
        spread = np.einsum("ij,ij->i", pts - pts.mean(0), pts - pts.mean(0))
        v = int(np.argmax(spread))
        d = _distances(pts[v : v + 1], pts)[0]
        order = np.argsort(d, kind="stable")
        half = len(items) // 2
        inner, outer = order[:half], order[half:]
        return _Node(
            vantage=int(items[v]),
            inner=self._build(items[inner]),
            outer=self._build(items[outer]),
            inner_range=(float(d[inner].min()), float(d[inner].max())),
            outer_range=(float(d[outer].min()), float(d[outer].max())),
            max_radius=max_radius,
        )

    # ------------------------------------------------------------------ kNN
    def home_leaves(self, queries) -> list[tuple[np.ndarray, np.ndarray]]:
        """Greedy descent: ``(query ids, leaf items)`` for each reached leaf.

        Each query follows the child whose distance range it is closest to;
        items of its home leaf give a cheap upper bound for exact searches.
        """
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        out: list[tuple[np.ndarray, np.ndarray]] = []

        def descend(node: _Node, qs: np.ndarray):
            if len(qs) == 0:
                return
            if node.items is not None:
                out.append((qs, node.items))
                return
            dv = _distances(queries[qs], self.points[node.vantage : node.vantage + 1])[:, 0]
            lb_in = np.maximum(np.maximum(node.inner_range[0] - dv, dv - node.inner_range[1]), 0.0)
            lb_out = np.maximum(np.maximum(node.outer_range[0] - dv, dv - node.outer_range[1]), 0.0)
            go_in = lb_in <= lb_out
            descend(node.inner, qs[go_in])
            descend(node.outer, qs[~go_in])

        descend(self.root, np.arange(len(queries)))
        return out

    def query(self, queries, k: int = 1, exclude=None) -> tuple[np.ndarray, np.ndarray]:
        """Exact k nearest neighbours for every query row.

        Returns ``(distances, indices)`` of shape (q, k), sorted by increasing
        distance with ties broken by lower item index. ``exclude`` gives, per
        query, one item index to ignore (use -1 for none); this is how a point
        is kept from being its own neighbour.
        """
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        n_q = len(queries)
        if exclude is None:
            exclude = np.full(n_q, -1, dtype=np.intp)
        else:
            exclude = np.broadcast_to(np.asarray(exclude, dtype=np.intp), (n_q,))
        available = len(self) - int(np.count_nonzero(exclude >= 0) > 0)
        if k < 1 or k > available:
            raise ValueError(f"k={k} out of range for an index of {len(self)} items")

        # upper bound: k-th distance within the home leaf (inf if it is too small)
        bound = np.full(n_q, np.inf)
        for qs, items in self.home_leaves(queries):
            if len(items) < k + 1:
                continue
            d = _distances(queries[qs], self.points[items])
            d[items[None, :] == exclude[qs, None]] = np.inf
            bound[qs] = np.partition(d, k - 1, axis=1)[:, k - 1]

        qi, ii = self._radius_pairs(queries, bound)
        keep = ii != exclude[qi]
        qi, ii = qi[keep], ii[keep]
        diff = queries[qi] - self.points[ii]
        d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        order = np.lexsort((ii, d, qi))
        qi, ii, d = qi[order], ii[order], d[order]
        starts = np.searchsorted(qi, np.arange(n_q))
        rank = np.arange(len(qi)) - starts[qi]
        top = rank < k
        best_d = np.empty((n_q, k))
        best_i = np.empty((n_q, k), dtype=np.intp)
        best_d[qi[top], rank[top]] = d[top]
        best_i[qi[top], rank[top]] = ii[top]
        return best_d, best_i

    # --------------------------------------------------------------- radius
    def query_radius(self, queries, radius) -> tuple[np.ndarray, np.ndarray]:
        """All (query, item) pairs with ``|q - p_j| <= r_q + radii[j]``.

        ``radius`` is a scalar or one value per query. Returns two index arrays
        (query ids, item ids) sorted by query then item.
        """
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        qa, ia = self._radius_pairs(queries, radius)
        order = np.lexsort((ia, qa))
        return qa[order], ia[order]

    def _radius_pairs(self, queries: np.ndarray, radius) -> tuple[np.ndarray, np.ndarray]:
        r = np.broadcast_to(np.asarray(radius, dtype=float), (len(queries),))
        out_q: list[np.ndarray] = []
        out_i: list[np.ndarray] = []

        def visit(node: _Node, qs: np.ndarray):
            if len(qs) == 0:
                return
            if node.items is not None:
                items = node.items
                d = _distances(queries[qs], self.points[items])
                reach = r[qs, None] + _PRUNE_SLACK
                if self.radii is not None:
                    reach = reach + self.radii[items][None, :]
                qq, ii = np.nonzero(d <= reach)
                out_q.append(qs[qq])
                out_i.append(items[ii])
                return
            dv = _distances(queries[qs], self.points[node.vantage : node.vantage + 1])[:, 0]
            for child, (lo, hi) in ((node.inner, node.inner_range), (node.outer, node.outer_range)):
                lb = np.maximum(np.maximum(lo - dv, dv - hi), 0.0)
                visit(child, qs[lb <= r[qs] + child.max_radius + _PRUNE_SLACK])

        visit(self.root, np.arange(len(queries)))
        if not out_q:
            return np.zeros(0, dtype=np.intp), np.zeros(0, dtype=np.intp)
        return np.concatenate(out_q), np.concatenate(out_i)


def build_index(points) -> VPTree:
    """VP-tree over a point set. Raises ``ValueError`` on empty input."""
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        raise ValueError("cannot index an empty point set")
    return VPTree(np.atleast_2d(points))


def k_nearest(index: VPTree, q, k: int, exclude: int | None = None):
    """The ``k`` nearest indexed points to ``q`` as ``(indices, distances)``.

    Ordered by distance, ties by lower index. ``exclude`` drops one item (the
    query's own index when querying a point of the set against itself).
    """
    if k > len(index):
        raise ValueError(f"k={k} exceeds index size {len(index)}")
    d, i = index.query(np.asarray(q, dtype=float)[None, :], k, exclude=-1 if exclude is None else exclude)
    return i[0], d[0]
