"""Wallspaces and their cubulations.

A wallspace is a finite point set with a family of bipartitions. Its
cubulation enumerates all consistent orientations (one side per wall, chosen
sides pairwise intersecting; in the finite case these are exactly the
orientations commensurable with principal ones), joins orientations differing
on a single wall, and returns the resulting complex together with the
point -> principal-orientation map.

Cubical quotients and the cubulation of median subalgebras are both thin
layers over `cubulate`: the former drops walls, the latter takes the distinct
nontrivial traces of the ambient walls.
"""

from .complex import build_complex, ensure_median, is_median_graph
from .errors import InputError, InvariantViolation, PreconditionError, UnsupportedHost
from . import kernels

_ORIENTATION_CAP = 200_000


class Wallspace:
    """Finite point set plus bipartition walls, in a fixed wall order.

    `walls[k]` is a pair (side0, side1) of frozensets; side0 contains the
    smallest point. Bit k of an orientation mask is 1 when side1 is chosen.
    """

    def __init__(self, points, walls):
        self.points = points
        self.walls = walls

    def __repr__(self):
        return f"Wallspace({len(self.points)} points, {len(self.walls)} walls)"


def make_wallspace(points, walls):
    """Validate and canonicalise a wallspace description.

    Each wall must be a pair of disjoint nonempty sets covering the points.
    Duplicate walls are rejected (two copies of one wall would disconnect the
    cubulation). Walls are sorted by their side containing the smallest point.
    """
    pts = sorted(points)
    if not pts:
        raise InputError("wallspace needs at least one point")
    if len(set(pts)) != len(pts):
        raise InputError("duplicate point id")
    pset = frozenset(pts)
    canon = []
    seen = set()
    for w in walls:
        if len(w) != 2:
            raise InputError(f"wall {w!r} is not a pair of sides")
        a, b = frozenset(w[0]), frozenset(w[1])
        if not a or not b:
            raise InputError("wall with an empty side")
        if a & b:
            raise InputError(f"wall sides overlap: {sorted(a & b)}")
        if a | b != pset:
            raise InputError(f"wall does not cover the point set: {w!r}")
        key = a if min(pts) in a else b
        wall = (key, b if key is a else a)
        if wall in seen:
            raise InputError("duplicate wall")
        seen.add(wall)
        canon.append(wall)
    canon.sort(key=lambda w: tuple(sorted(w[0])))
    return Wallspace(tuple(pts), tuple(canon))


def _wallspace_in_order(points, walls):
    """Internal: wallspace preserving the caller's wall order (already valid)."""
    return Wallspace(tuple(sorted(points)), tuple(walls))


def consistent_orientations(w, cap=_ORIENTATION_CAP):
    """All orientation masks, by backtracking over walls in order.

    A partial choice is extended only when the new side meets every side
    already chosen, which prunes nested families immediately.
    """
    nw = len(w.walls)
    compat = [[None] * nw for _ in range(nw)]
    for t in range(nw):
        for u in range(t):
            compat[t][u] = tuple(
                tuple(bool(w.walls[t][st] & w.walls[u][su]) for su in (0, 1))
                for st in (0, 1)
            )
    out = []
    choice = [0] * nw

    def rec(t):
        if t == nw:
            mask = 0
            for b in range(nw):
                if choice[b]:
                    mask |= 1 << b
            out.append(mask)
            if len(out) > cap:
                raise UnsupportedHost(
                    f"cubulation exceeds {cap} orientations; not desk scale"
                )
            return
        for side in (0, 1):
            ok = True
            for u in range(t):
                if not compat[t][u][side][choice[u]]:
                    ok = False
                    break
            if ok:
                choice[t] = side
                rec(t + 1)
        choice[t] = 0

    rec(0)
    return sorted(out)


def principal_orientation(w, point):
    mask = 0
    for k, (_, side1) in enumerate(w.walls):
        if point in side1:
            mask |= 1 << k
    return mask


def _mask_id(mask, nw):
    return "o" + format(mask, f"0{nw}b")[::-1] if nw else "o"


def cubulate(w, verify=False):
    """Cubulation of a wallspace.

    Returns (complex, point_map, wall_bits) where point_map sends each point
    to the vertex realising its principal orientation and wall_bits maps each
    hyperplane id of the complex to the wall index it came from.
    """
    nw = len(w.walls)
    masks = consistent_orientations(w)
    mask_set = set(masks)
    ids = {m: _mask_id(m, nw) for m in masks}
    edges = []
    for m in masks:
        for b in range(nw):
            m2 = m ^ (1 << b)
            if m2 > m and m2 in mask_set:
                edges.append((ids[m], ids[m2]))
    x = build_complex(list(ids.values()), edges)

    point_map = {}
    for p in w.points:
        pm = principal_orientation(w, p)
        if pm not in mask_set:
            raise InvariantViolation(f"principal orientation of {p!r} inconsistent")
        point_map[p] = ids[pm]

    mask_of = {ids[m]: m for m in masks}
    wall_bits = {}
    for h in x.hyperplanes:
        bits = set()
        for k in h.edges:
            i, j = x.edge_list[k]
            diff = mask_of[x.ids[i]] ^ mask_of[x.ids[j]]
            bits.add(diff.bit_length() - 1)
        if len(bits) != 1:
            raise InvariantViolation(
                "a hyperplane of the cubulation mixes several walls"
            )
        wall_bits[h.id] = bits.pop()

    if verify:
        ok, witness = is_median_graph(x)
        if not ok:
            raise InvariantViolation(f"cubulation is not median, witness {witness}")
    return x, point_map, wall_bits


class QuotientMap:
    """Certificate of a cubical quotient: source, target, the canonical
    vertex map pi, and the retained-wall correspondence."""

    def __init__(self, source, target, pi, wall_map, collapsed):
        self.source = source
        self.target = target
        self.pi = pi
        self.wall_map = wall_map      # source hyperplane id -> target hyperplane id
        self.collapsed = collapsed    # sorted tuple of collapsed hyperplane ids

    def __repr__(self):
        return (
            f"QuotientMap({len(self.source.ids)} -> {len(self.target.ids)} "
            f"vertices, {len(self.collapsed)} walls collapsed)"
        )


def cubical_quotient(x, collapse, verify=False):
    """Quotient of a complex by a set of its hyperplane ids.

    The target is the cubulation of (vertices of x, walls of x minus the
    collapsed ones); pi sends a vertex to its principal orientation, and
    d_target(pi a, pi b) == |separating walls minus collapsed| for all pairs.
    """
    if not x.walls_ok:
        raise PreconditionError("host walls are ill-formed; not a cube complex")
    known = {h.id for h in x.hyperplanes}
    collapse = set(collapse)
    unknown = collapse - known
    if unknown:
        raise InputError(f"unknown hyperplane ids {sorted(unknown)}")

    retained = [h for h in x.hyperplanes if h.id not in collapse]
    walls = []
    kept_ids = []
    seen = {}
    for h in retained:
        side0 = frozenset(x.ids[v] for v in h.sides[0])
        side1 = frozenset(x.ids[v] for v in h.sides[1])
        key = frozenset((side0, side1))
        if key in seen:
            raise InvariantViolation(
                f"hyperplanes {seen[key]} and {h.id} induce one bipartition"
            )
        seen[key] = h.id
        walls.append((side0, side1))
        kept_ids.append(h.id)

    w = _wallspace_in_order(x.ids, walls)
    target, point_map, wall_bits = cubulate(w, verify=verify)
    bit_to_target = {b: hid for hid, b in wall_bits.items()}
    wall_map = {kept_ids[b]: bit_to_target[b] for b in range(len(kept_ids))}
    pi = {v: point_map[v] for v in x.ids}
    if set(pi.values()) != set(target.ids):
        raise InvariantViolation("quotient map is not surjective")
    return QuotientMap(x, target, pi, wall_map, tuple(sorted(collapse)))


def verify_quotient_distances(q):
    """Exact check of the quotient distance law on all vertex pairs."""
    x, t = q.source, q.target
    dx = x._d()
    dt = t._d()
    coll_mask = 0
    for hid in q.collapsed:
        coll_mask |= 1 << hid
    for i in range(len(x.ids)):
        pi_i = t.index[q.pi[x.ids[i]]]
        for j in range(i + 1, len(x.ids)):
            want = bin((x.masks[i] ^ x.masks[j]) & ~coll_mask).count("1")
            got = int(dt[pi_i, t.index[q.pi[x.ids[j]]]])
            if got != want:
                return (x.ids[i], x.ids[j], got, want)
            if int(dx[i, j]) < want:
                return (x.ids[i], x.ids[j], got, want)
    return None


def median_closure_witness(x, y_ids):
    """None if y is median-closed in x, else a violating triple of ids.

    Uses the majority-mask kernel on the sub-rows, which equals the interval
    definition on a verified median host.
    """
    idxs = sorted(x.index[v] for v in y_ids)
    sub = [x.masks[i] for i in idxs]
    packed = kernels.pack_masks(sub, len(x.hyperplanes))
    bad = kernels.triple_median_violation(packed)
    if bad is None:
        return None
    return tuple(x.ids[idxs[t]] for t in bad)


def subalgebra_cubulation(x, y_ids, host_median_checked=False):
    """Cubulation of a median-closed vertex subset from its wall traces.

    The walls on y are the distinct nontrivial bipartitions induced by the
    hyperplanes of x (without multiplicity; the lowest hyperplane id is kept
    for reporting). Returns (complex, correspondence y-id -> vertex id,
    trace_walls) where trace_walls[k] lists the ambient hyperplane ids whose
    trace is wall k.
    """
    y = sorted(set(y_ids))
    if not y:
        raise PreconditionError("empty subset")
    for v in y:
        if v not in x.index:
            raise InputError(f"unknown vertex id {v!r}")
    if not host_median_checked:
        ensure_median(x)
    witness = median_closure_witness(x, y)
    if witness is not None:
        raise PreconditionError(
            f"subset is not median-closed, witness triple {witness}"
        )

    yset = frozenset(y)
    traces = {}
    for h in x.hyperplanes:
        t0 = frozenset(x.ids[v] for v in h.sides[0]) & yset
        t1 = frozenset(x.ids[v] for v in h.sides[1]) & yset
        if t0 and t1:
            key = frozenset((t0, t1))
            traces.setdefault(key, []).append(h.id)

    ordered = sorted(traces.items(), key=lambda kv: min(kv[1]))
    walls = []
    trace_walls = []
    ymin = y[0]
    for key, hids in ordered:
        a, b = tuple(key) if len(key) == 2 else (tuple(key)[0], tuple(key)[0])
        side0, side1 = (a, b) if ymin in a else (b, a)
        walls.append((side0, side1))
        trace_walls.append(tuple(sorted(hids)))

    w = _wallspace_in_order(y, walls)
    sub, point_map, wall_bits = cubulate(w)
    if len(sub.ids) != len(y):
        raise InvariantViolation(
            f"subalgebra cubulation has {len(sub.ids)} vertices for "
            f"{len(y)} subset points"
        )
    if len(set(point_map.values())) != len(y):
        raise InvariantViolation("principal map on the subalgebra is not injective")
    return sub, point_map, trace_walls
