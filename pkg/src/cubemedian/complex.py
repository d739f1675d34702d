"""Finite cube complexes modelled by their one-skeleta as median graphs.

A complex is built from opaque string vertex ids and unordered edges. Walls
(hyperplanes) are computed as the transitive closure of "opposite edges of a
diagonal-free 4-cycle" over a disjoint-set structure; each wall stores the two
vertex sets it delimits. Vertices then carry a bitmask of wall sides, and
`distance == number of separating walls` is the workhorse identity, verified
rather than assumed: `is_median_graph` is the exhaustive triple check.

All public operations take and return vertex ids; iteration order is the
sorted id order so outputs are reproducible byte-for-byte.
"""

from itertools import combinations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from . import kernels
from .errors import InputError, InvariantViolation, PreconditionError


class Hyperplane:
    """One wall: an edge class plus the two halfspaces it delimits.

    `sides` is a pair of frozensets of vertex indices (side 0 contains the
    smaller minimal vertex), or None when removing the class does not leave
    exactly two components (ill-formed host).
    """

    __slots__ = ("id", "edges", "sides")

    def __init__(self, hid, edges, sides):
        self.id = hid
        self.edges = edges
        self.sides = sides

    def __repr__(self):
        return f"Hyperplane({self.id}, {len(self.edges)} edges)"


class CubeComplex:
    def __init__(self, ids, edge_list, coords=None):
        self.ids = ids                      # tuple of sorted vertex id strings
        self.index = {v: i for i, v in enumerate(ids)}
        self.edge_list = edge_list          # tuple of (i, j), i < j, sorted
        self.edge_index = {e: k for k, e in enumerate(edge_list)}
        adj = [[] for _ in ids]
        for i, j in edge_list:
            adj[i].append(j)
            adj[j].append(i)
        self.adj = tuple(tuple(sorted(a)) for a in adj)
        self.adj_set = tuple(frozenset(a) for a in self.adj)
        self.coords = coords                # id -> coordinate tuple, for windows
        self.wall_geometry = None           # hyperplane id -> (axis, offset)
        self.hyperplanes = ()
        self.walls_ok = False
        self.masks = ()
        self._dist = None
        self._median_verdict = None
        self._mask_index = None
        self._compute_hyperplanes()

    # -- construction ------------------------------------------------------

    def _compute_hyperplanes(self):
        n_e = len(self.edge_list)
        parent = list(range(n_e))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def union(x, y):
            rx, ry = find(x), find(y)
            if rx != ry:
                parent[ry] = rx

        eidx = self.edge_index

        def e(a, b):
            return eidx[(a, b) if a < b else (b, a)]

        # squares: v-a-w-b-v with both diagonals (v,w), (a,b) non-edges
        for v in range(len(self.ids)):
            nb = self.adj[v]
            for a, b in combinations(nb, 2):
                if b in self.adj_set[a]:
                    continue
                for w in self.adj_set[a] & self.adj_set[b]:
                    if w == v or w in self.adj_set[v]:
                        continue
                    union(e(v, a), e(b, w))
                    union(e(v, b), e(a, w))

        classes = {}
        for k in range(n_e):
            classes.setdefault(find(k), []).append(k)
        ordered = sorted(classes.values(), key=lambda es: self.edge_list[es[0]])

        hyps = []
        ok = True
        n = len(self.ids)
        for hid, es in enumerate(ordered):
            removed = set(es)
            par = list(range(n))

            def cfind(x):
                while par[x] != x:
                    par[x] = par[par[x]]
                    x = par[x]
                return x

            for k, (i, j) in enumerate(self.edge_list):
                if k not in removed:
                    ri, rj = cfind(i), cfind(j)
                    if ri != rj:
                        par[rj] = ri
            comps = {}
            for v in range(n):
                comps.setdefault(cfind(v), []).append(v)
            if len(comps) == 2:
                sides = sorted(comps.values(), key=min)
                sides = (frozenset(sides[0]), frozenset(sides[1]))
            else:
                sides = None
                ok = False
            hyps.append(Hyperplane(hid, frozenset(es), sides))

        self.hyperplanes = tuple(hyps)
        self.walls_ok = ok
        if ok:
            masks = [0] * n
            for h in hyps:
                for v in h.sides[1]:
                    masks[v] |= 1 << h.id
            self.masks = tuple(masks)

    # -- cached structures ---------------------------------------------------

    def _d(self):
        if self._dist is None:
            n = len(self.ids)
            rows = [i for i, j in self.edge_list] + [j for i, j in self.edge_list]
            cols = [j for i, j in self.edge_list] + [i for i, j in self.edge_list]
            mat = csr_matrix(
                (np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n)
            )
            self._dist = dijkstra(mat, unweighted=True).astype(np.int32)
        return self._dist

    def _masks_packed(self):
        return kernels.pack_masks(self.masks, len(self.hyperplanes))

    def _mask_to_index(self):
        if self._mask_index is None:
            self._mask_index = {m: i for i, m in enumerate(self.masks)}
        return self._mask_index

    def _median_idx_fast(self, i, j, k):
        """Majority-mask median; valid on hosts that passed is_median_graph."""
        mi, mj, mk = self.masks[i], self.masks[j], self.masks[k]
        return self._mask_to_index().get((mi & mj) | (mk & (mi | mj)))

    def _interval_vec(self, i, j):
        d = self._d()
        return (d[i] + d[j]) == d[i, j]

    def __repr__(self):
        return (
            f"CubeComplex({len(self.ids)} vertices, {len(self.edge_list)} edges, "
            f"{len(self.hyperplanes)} walls)"
        )


def build_complex(vertices, edges, coords=None):
    """Build a CubeComplex from ids and unordered id pairs.

    Errors on: empty/duplicate vertices, non-string ids, dangling endpoints,
    self-loops, duplicate edges, disconnected graphs.
    """
    ids = list(vertices)
    if not ids:
        raise InputError("complex needs at least one vertex")
    for v in ids:
        if not isinstance(v, str):
            raise InputError(f"vertex ids must be strings, got {v!r}")
    if len(set(ids)) != len(ids):
        raise InputError("duplicate vertex id")
    ids = tuple(sorted(ids))
    index = {v: i for i, v in enumerate(ids)}

    edge_set = set()
    for a, b in edges:
        if a not in index or b not in index:
            raise InputError(f"edge ({a!r}, {b!r}) has a dangling endpoint")
        if a == b:
            raise InputError(f"self-loop at {a!r}")
        i, j = index[a], index[b]
        e = (i, j) if i < j else (j, i)
        if e in edge_set:
            raise InputError(f"duplicate edge ({a!r}, {b!r})")
        edge_set.add(e)
    edge_list = tuple(sorted(edge_set))

    if len(ids) > 1:
        rows = [i for i, j in edge_list] + [j for i, j in edge_list]
        cols = [j for i, j in edge_list] + [i for i, j in edge_list]
        mat = csr_matrix(
            (np.ones(len(rows), dtype=np.int8), (rows, cols)),
            shape=(len(ids), len(ids)),
        )
        n_comp, _ = connected_components(mat, directed=False)
        if n_comp != 1:
            raise InputError("graph is disconnected")

    coord_map = None
    if coords is not None:
        coord_map = {v: tuple(coords[v]) for v in ids}
    return CubeComplex(ids, edge_list, coord_map)


# -- queries ---------------------------------------------------------------


def _vidx(x, v):
    try:
        return x.index[v]
    except KeyError:
        raise InputError(f"unknown vertex id {v!r}") from None


def distance(x, a, b):
    return int(x._d()[_vidx(x, a), _vidx(x, b)])


def separating_walls(x, a, b):
    """Ids of the walls separating a and b (they lie in different sides)."""
    i, j = _vidx(x, a), _vidx(x, b)
    if x.walls_ok:
        diff = x.masks[i] ^ x.masks[j]
        out = []
        k = 0
        while diff:
            if diff & 1:
                out.append(k)
            diff >>= 1
            k += 1
        return tuple(out)
    out = []
    for h in x.hyperplanes:
        if h.sides is None:
            raise InvariantViolation(f"wall {h.id} does not delimit two halfspaces")
        if (i in h.sides[0]) != (j in h.sides[0]):
            out.append(h.id)
    return tuple(out)


def is_median_graph(x):
    """Exhaustive check that every vertex triple has exactly one median.

    Returns (True, None) or (False, witness_triple). The fast path verifies
    the partial-cube preconditions (well-formed walls, distance equal to the
    separating-wall count, distinct side masks) and then runs the compiled
    majority-mask kernel, which is equivalent to intersecting the three
    intervals under those preconditions. Ill-formed hosts fall back to the
    brute-force interval scan to extract a witness.
    """
    if x._median_verdict is not None:
        return x._median_verdict
    n = len(x.ids)
    if n <= 2:
        x._median_verdict = (True, None)
        return x._median_verdict

    verdict = None
    if x.walls_ok and len(set(x.masks)) == n:
        d = x._d()
        packed = x._masks_packed()
        if kernels.dist_wallcount_mismatch(d, packed) is None:
            bad = kernels.triple_median_violation(packed)
            if bad is None:
                verdict = (True, None)
            else:
                verdict = (False, tuple(x.ids[t] for t in bad))

    if verdict is None:
        bad = kernels.interval_triple_violation(x._d())
        if bad is None:
            raise InvariantViolation(
                "triple scan found no violation on a host failing the "
                "partial-cube preconditions"
            )
        verdict = (False, tuple(x.ids[t] for t in bad))

    x._median_verdict = verdict
    return verdict


def ensure_median(x):
    ok, witness = is_median_graph(x)
    if not ok:
        raise PreconditionError(f"host is not a median graph, witness {witness}")


def interval(x, a, b):
    i, j = _vidx(x, a), _vidx(x, b)
    vec = x._interval_vec(i, j)
    return frozenset(x.ids[t] for t in np.nonzero(vec)[0])


def median(x, a, b, c):
    """The unique vertex in I(a,b) & I(b,c) & I(a,c), computed by actually
    intersecting the intervals (this function is its own oracle)."""
    i, j, k = _vidx(x, a), _vidx(x, b), _vidx(x, c)
    vec = x._interval_vec(i, j) & x._interval_vec(j, k) & x._interval_vec(i, k)
    hits = np.nonzero(vec)[0]
    if len(hits) != 1:
        raise PreconditionError(
            f"triple ({a!r}, {b!r}, {c!r}) has {len(hits)} medians; host is "
            "not a median graph"
        )
    return x.ids[int(hits[0])]


def is_convex(x, s):
    """True iff I(a,b) is inside s for all a, b in s."""
    idxs = sorted(_vidx(x, v) for v in s)
    if not idxs:
        return True
    member = np.zeros(len(x.ids), dtype=bool)
    member[idxs] = True
    d = x._d()
    for i in idxs:
        betw = (d[i][None, :] + d[idxs]) == d[i][idxs][:, None]
        if (betw & ~member[None, :]).any():
            return False
    return True


def convex_hull(x, s):
    """Least superset of s closed under intervals."""
    member = np.zeros(len(x.ids), dtype=bool)
    for v in s:
        member[_vidx(x, v)] = True
    d = x._d()
    while True:
        idxs = np.nonzero(member)[0]
        new = member.copy()
        for i in idxs:
            betw = (d[i][None, :] + d[idxs]) == d[i][idxs][:, None]
            new |= betw.any(axis=0)
        if (new == member).all():
            break
        member = new
    return frozenset(x.ids[t] for t in np.nonzero(member)[0])


def median_hull(x, s):
    """Least superset of s closed under the median operation."""
    ensure_median(x)
    current = {_vidx(x, v) for v in s}
    frontier = set(current)
    while frontier:
        added = set()
        cur_list = sorted(current)
        for knew in sorted(frontier):
            for ipos, i in enumerate(cur_list):
                for j in cur_list[ipos:]:
                    m = x._median_idx_fast(i, j, knew)
                    if m is None:
                        raise InvariantViolation(
                            "median missing on a verified median host"
                        )
                    if m not in current:
                        added.add(m)
        current |= added
        frontier = added
    return frozenset(x.ids[t] for t in sorted(current))


def gate_project(x, c, v):
    """Nearest-point projection of v onto the convex set c."""
    idxs = sorted(_vidx(x, u) for u in c)
    if not idxs:
        raise PreconditionError("gate projection onto an empty set")
    if not is_convex(x, c):
        raise PreconditionError("gate projection onto a non-convex set")
    i = _vidx(x, v)
    d = x._d()
    dists = d[i][idxs]
    best = int(dists.min())
    winners = [u for u, dd in zip(idxs, dists) if dd == best]
    if len(winners) != 1:
        raise InvariantViolation(
            f"projection of {v!r} is not unique ({len(winners)} minimizers)"
        )
    return x.ids[winners[0]]


def _gate_idx(x, idxs, i):
    """Projection by index for internal callers that guarantee convexity."""
    d = x._d()
    dists = d[i][idxs]
    best = int(dists.min())
    winners = [u for u, dd in zip(idxs, dists) if dd == best]
    if len(winners) != 1:
        raise InvariantViolation("projection is not unique")
    return winners[0]


def hyperplanes_json(x):
    """JSON-ready wall report: per wall its edges and halfspaces."""
    out = []
    for h in x.hyperplanes:
        edges = sorted([x.ids[i], x.ids[j]] for i, j in
                       (x.edge_list[k] for k in h.edges))
        sides = None
        if h.sides is not None:
            sides = [sorted(x.ids[t] for t in side) for side in h.sides]
        out.append({"id": h.id, "edges": edges, "halfspaces": sides})
    return out
