"""Graph isomorphism for desk-scale complexes.

Canonical labeling by iterated neighbourhood refinement seeded with distance
profiles, with individualization on ties. Adequate for the median graphs this
package produces; no external dependency.
"""

from .errors import UnsupportedHost

_SIZE_CAP = 3000


def _refine(adj, colors):
    n = len(adj)
    while True:
        sigs = [
            (colors[v], tuple(sorted(colors[u] for u in adj[v]))) for v in range(n)
        ]
        rank = {s: r for r, s in enumerate(sorted(set(sigs)))}
        new = [rank[s] for s in sigs]
        if new == colors:
            return colors
        colors = new


def _first_tie(colors):
    classes = {}
    for v, c in enumerate(colors):
        classes.setdefault(c, []).append(v)
    for c in sorted(classes):
        if len(classes[c]) > 1:
            return classes[c]
    return None


def _signature(adj, order):
    pos = [0] * len(order)
    for p, v in enumerate(order):
        pos[v] = p
    edges = []
    for v in range(len(adj)):
        for u in adj[v]:
            if pos[v] < pos[u]:
                edges.append((pos[v], pos[u]))
    return tuple(sorted(edges))


def canonical_order(x):
    """Vertex index order whose edge signature is minimal over the search."""
    n = len(x.ids)
    if n > _SIZE_CAP:
        raise UnsupportedHost(f"canonical labeling capped at {_SIZE_CAP} vertices")
    adj = x.adj
    d = x._d()
    profiles = [tuple(sorted(int(t) for t in d[v])) for v in range(n)]
    rank = {p: r for r, p in enumerate(sorted(set(profiles)))}
    base = [rank[p] + 1 for p in profiles]

    best = [None]

    def rec(colors):
        colors = _refine(adj, colors)
        tie = _first_tie(colors)
        if tie is None:
            order = sorted(range(n), key=lambda v: colors[v])
            sig = _signature(adj, order)
            if best[0] is None or sig < best[0][0]:
                best[0] = (sig, order)
            return
        for v in tie:
            branch = list(colors)
            branch[v] = -1  # fresh color: no refined rank is negative
            rec(branch)

    rec(base)
    return best[0]


def canonical_signature(x):
    return canonical_order(x)[0]


def find_isomorphism(x, y):
    """Vertex-id mapping x -> y if the complexes are isomorphic, else None."""
    if len(x.ids) != len(y.ids) or len(x.edge_list) != len(y.edge_list):
        return None
    degx = sorted(len(a) for a in x.adj)
    degy = sorted(len(a) for a in y.adj)
    if degx != degy:
        return None
    sx, ox = canonical_order(x)
    sy, oy = canonical_order(y)
    if sx != sy:
        return None
    return {x.ids[ox[p]]: y.ids[oy[p]] for p in range(len(ox))}


def is_isomorphic(x, y):
    return find_isomorphism(x, y) is not None


def is_graph_map_isomorphism(x, y, mapping):
    """Check that an id mapping is a bijective adjacency-preserving map."""
    if len(mapping) != len(x.ids) or set(mapping) != set(x.ids):
        return False
    if sorted(mapping.values()) != sorted(y.ids):
        return False
    for i, j in x.edge_list:
        a, b = mapping[x.ids[i]], mapping[x.ids[j]]
        ia, ib = y.index[a], y.index[b]
        if ib not in y.adj_set[ia]:
            return False
    return True
