"""Isometry classification and supporting machinery.

Isometries come in two flavours: vertex bijections of a finite complex
(always elliptic; the evidence is a stabilised cube of minimal dimension)
and affine symmetries of a periodic complex, classified by the translation
part v of g^k (k the order of the linear part): bounded orbits iff v = 0,
otherwise inverting when some power inverts a wall and loxodromic otherwise.

Walls of periodic complexes are (axis, offset) pairs and every computation
about them is closed-form in the signed-permutation data; window scans enter
only through the stabilisation protocol (compute at R and 2R, accept on
agreement, else double).
"""

from fractions import Fraction
from itertools import combinations, product as iproduct

import numpy as np

from .complex import ensure_median, is_median_graph
from .errors import InputError, InvariantViolation, PreconditionError
from .periodic import AffineIsometry, PeriodicComplex, ensure_symmetry

_STAB_DOUBLINGS = 6


class FiniteIsometry:
    """Adjacency-preserving vertex bijection of a finite CubeComplex."""

    def __init__(self, x, mapping):
        if set(mapping) != set(x.ids) or sorted(mapping.values()) != sorted(x.ids):
            raise InputError("mapping is not a vertex bijection")
        self.x = x
        self.mapping = dict(mapping)
        perm = [x.index[mapping[v]] for v in x.ids]
        for i, j in x.edge_list:
            if perm[j] not in x.adj_set[perm[i]]:
                raise InputError(
                    f"mapping does not preserve adjacency on edge "
                    f"({x.ids[i]!r}, {x.ids[j]!r})"
                )
        self.perm = tuple(perm)

    def apply(self, v):
        return self.mapping[v]

    def apply_idx(self, i):
        return self.perm[i]

    def compose(self, other):
        if other.x is not self.x:
            raise InputError("isometries live on different complexes")
        return FiniteIsometry(
            self.x, {v: self.mapping[other.mapping[v]] for v in self.x.ids}
        )

    def inverse(self):
        return FiniteIsometry(self.x, {w: v for v, w in self.mapping.items()})

    def orbits(self):
        seen = set()
        out = []
        for i in range(len(self.x.ids)):
            if i in seen:
                continue
            orb = [i]
            seen.add(i)
            j = self.perm[i]
            while j != i:
                orb.append(j)
                seen.add(j)
                j = self.perm[j]
            out.append(tuple(orb))
        return out

    def __repr__(self):
        return f"FiniteIsometry(on {len(self.x.ids)} vertices)"


class PeriodicIsometry:
    """Affine symmetry of a periodic complex, with cached power data."""

    def __init__(self, p, g):
        if not isinstance(p, PeriodicComplex) or not isinstance(g, AffineIsometry):
            raise InputError("expected a PeriodicComplex and an AffineIsometry")
        ensure_symmetry(p, g)
        self.p = p
        self.g = g
        self.order = g.linear_order()
        gk = g.power(self.order)
        self.period_translation = gk.trans  # P^k = I, so this is exact
        self._powers = {1: g, 0: AffineIsometry.identity(g.dim)}

    def power(self, n):
        if n not in self._powers:
            self._powers[n] = self.g.power(n)
        return self._powers[n]

    def apply(self, v, n=1):
        return self.power(n).apply(tuple(v))

    def bounded_orbits(self):
        return not any(self.period_translation)

    def moving_axes(self):
        return tuple(i for i, t in enumerate(self.period_translation) if t)

    def displacement(self, v, ignore_walls=frozenset()):
        """d(v, g v) minus the count of separating walls in ignore_walls.

        Exact because graph distance equals l1 distance on valid hosts.
        """
        w = self.g.apply(tuple(v))
        disp = sum(abs(a - b) for a, b in zip(v, w))
        for (ax, off) in ignore_walls:
            lo, hi = min(v[ax], w[ax]), max(v[ax], w[ax])
            if lo <= off < hi:
                disp -= 1
        return disp

    def __repr__(self):
        return f"PeriodicIsometry({self.g!r})"


class IsometryClass:
    """Classification verdict plus the evidence the class requires."""

    def __init__(self, kind, **evidence):
        self.kind = kind
        self.evidence = evidence

    def __getattr__(self, name):
        try:
            return self.evidence[name]
        except KeyError:
            raise AttributeError(name) from None

    def __repr__(self):
        return f"IsometryClass({self.kind}, {sorted(self.evidence)})"


# -- cube enumeration ---------------------------------------------------------


def finite_cubes(x):
    """All cubes of a finite median complex, as a dict dim -> frozensets of
    vertex indices. A cube is an interval of size 2^d between some antipodal
    pair; in a median graph that characterisation is exact."""
    ensure_median(x)
    n = len(x.ids)
    d = x._d()
    out = {
        0: {frozenset([v]) for v in range(n)},
        1: {frozenset(e) for e in x.edge_list},
    }
    for a in range(n):
        betw = (d[a][None, :] + d) == d[a][:, None]
        sizes = betw.sum(axis=1)
        for b in range(a + 1, n):
            dd = int(d[a, b])
            if dd < 2 or (1 << dd) > n:
                continue
            if int(sizes[b]) == (1 << dd):
                idxs = frozenset(int(t) for t in np.nonzero(betw[b])[0])
                out.setdefault(dd, set()).add(idxs)
    return out


def periodic_cubes_in_window(p, radius):
    """Unit-box cubes with all corners member and base inside the window,
    as a dict dim -> set of frozensets of coordinate tuples."""
    out = {}
    members = p.members_in_box(tuple((-radius, radius) for _ in range(p.dim)))
    axes = range(p.dim)
    for v in members:
        for r in range(p.dim + 1):
            for subset in combinations(axes, r):
                corners = []
                ok = True
                for bits in iproduct(*[(0, 1)] * r):
                    c = list(v)
                    for axpos, b in zip(subset, bits):
                        c[axpos] += b
                    c = tuple(c)
                    if not p.is_member(c):
                        ok = False
                        break
                    corners.append(c)
                if ok:
                    out.setdefault(r, set()).add(frozenset(corners))
    return out


# -- classification -----------------------------------------------------------


def _stabilised(search, start_radius):
    """Run a window quantity at R and 2R until two agree; returns value."""
    r = start_radius
    prev = search(r)
    for _ in range(_STAB_DOUBLINGS):
        cur = search(2 * r)
        if cur == prev:
            return prev, r
        prev = cur
        r *= 2
    raise InvariantViolation("window stabilisation did not converge")


def _min_cube_finite(fin, gens=None):
    """Minimal-dimension cubes stabilised by the group generated by gens."""
    x = fin.x if gens is None else gens[0].x
    perms = [fin.perm] if gens is None else [g.perm for g in gens]
    cubes = finite_cubes(x)
    for dim in sorted(cubes):
        stab = []
        for c in cubes[dim]:
            if all(frozenset(pm[t] for t in c) == c for pm in perms):
                stab.append(c)
        if stab:
            stab.sort(key=lambda c: tuple(sorted(x.ids[t] for t in c)))
            return dim, stab
    raise InvariantViolation("no stabilised cube on a finite host")


def _cube_sort_key(c):
    corners = sorted(c)
    return (max(abs(t) for v in corners for t in v), corners)


def _min_cube_periodic(pi):
    """Minimal dimension over stabilised unit boxes, plus the stabilised cube
    nearest the origin as evidence. Stabilises on that pair: the full list of
    minimal cubes may be unbounded (it is window business, handled by the
    median-set module), but the dimension and a nearest representative are
    window-stable."""
    p, g = pi.p, pi.g

    def probe(radius):
        cubes = periodic_cubes_in_window(p, radius)
        for dim in sorted(cubes):
            stab = [
                c for c in cubes[dim]
                if frozenset(g.apply(t) for t in c) == c
            ]
            if stab:
                return (dim, tuple(min(stab, key=_cube_sort_key)))
        return None

    r0 = 2 * p.base_radius() + max((abs(t) for t in g.trans), default=0) + 2
    found, _ = _stabilised(probe, r0)
    if found is None:
        raise InvariantViolation(
            "no stabilised cube found for a bounded-orbit isometry"
        )
    return found


def inverted_hyperplanes(g_iso):
    """All walls inverted by a power of g, with witnessing powers.

    A wall (axis, offset) is inverted by g^n iff the linear part of g^n fixes
    the axis with sign -1 and its translation there is the odd number
    2*offset + 1; powers n <= 2*order(P) suffice (the wall set repeats with
    period order(P) because the commuting translation vanishes on such axes).
    Verifies the collected set is pairwise transverse.
    """
    if not isinstance(g_iso, PeriodicIsometry):
        raise PreconditionError("inverted walls are defined on periodic hosts")
    if g_iso.bounded_orbits():
        raise PreconditionError("bounded orbits: classification is elliptic")
    p, k = g_iso.p, g_iso.order
    found = {}
    for n in range(1, 2 * k + 1):
        h = g_iso.power(n)
        for i, (src, sign) in enumerate(h.perm):
            if src == i and sign == -1:
                c = h.trans[i]
                if (c - 1) % 2 == 0:
                    m = (c - 1) // 2
                    if p.wall_active(i, m) and (i, m) not in found:
                        found[(i, m)] = n
    walls = sorted(found)
    for a in range(len(walls)):
        for b in range(a + 1, len(walls)):
            (i, m), (j, mm) = walls[a], walls[b]
            if i == j:
                raise InvariantViolation(
                    f"inverted walls {walls[a]} and {walls[b]} are parallel"
                )
            if not _transverse_witness(p, walls[a], walls[b]):
                raise InvariantViolation(
                    f"inverted walls {walls[a]} and {walls[b]} not transverse"
                )
    return {w: found[w] for w in walls}


def _transverse_witness(p, wall_a, wall_b):
    (i, m), (j, mm) = wall_a, wall_b
    r = 2 * p.base_radius() + abs(m) + abs(mm) + 2
    free = [ax for ax in range(p.dim) if ax not in (i, j)]
    for attempt in (1, 2):
        span = r * attempt
        for rest in iproduct(*[range(-span, span + 1)] * len(free)):
            v = [0] * p.dim
            v[i] = m
            v[j] = mm
            for ax, t in zip(free, rest):
                v[ax] = t
            base = tuple(v)
            corners = [
                tuple(
                    t + (di if ax == i else 0) + (dj if ax == j else 0)
                    for ax, t in enumerate(base)
                )
                for di in (0, 1)
                for dj in (0, 1)
            ]
            if all(p.is_member(c) for c in corners):
                return True
    return False


def min_displacement(g_iso, ignore_walls=frozenset()):
    """Exact min of d(x, gx) (minus ignored separating walls), stabilised."""
    pi = g_iso
    p = pi.p

    def probe(radius):
        members = p.members_in_box(tuple((-radius, radius) for _ in range(p.dim)))
        if not members:
            return None
        vals = [(pi.displacement(v, ignore_walls), v) for v in members]
        best = min(vals)
        return best[0]

    r0 = 2 * p.base_radius() + max((abs(t) for t in pi.g.trans), default=0) + 2
    val, radius = _stabilised(probe, r0)
    return val, radius


def min_set(g_iso, radius=None):
    """Displacement minimisers.

    Finite host: (frozenset of ids, min displacement).
    Periodic host: (window complex, frozenset of ids, min displacement); the
    window radius defaults to the stabilised one.
    """
    if isinstance(g_iso, FiniteIsometry):
        x = g_iso.x
        d = x._d()
        disp = [int(d[i, g_iso.perm[i]]) for i in range(len(x.ids))]
        best = min(disp)
        ids = frozenset(x.ids[i] for i, t in enumerate(disp) if t == best)
        return ids, best
    best, r_stab = min_displacement(g_iso)
    r = radius if radius is not None else r_stab
    win = g_iso.p.centred_window(r)
    ids = frozenset(
        v for v in win.ids
        if g_iso.displacement(win.coords[v]) == best
    )
    return win, ids, best


def classify(g_iso):
    """Elliptic / inverting / loxodromic, with verifying evidence."""
    cached = getattr(g_iso, "_cls_cache", None)
    if cached is not None:
        return cached
    cls = _classify_uncached(g_iso)
    g_iso._cls_cache = cls
    return cls


def _classify_uncached(g_iso):
    if isinstance(g_iso, FiniteIsometry):
        dim, cubes = _min_cube_finite(g_iso)
        x = g_iso.x
        return IsometryClass(
            "elliptic",
            min_cube_dim=dim,
            min_cube=tuple(sorted(x.ids[t] for t in cubes[0])),
            stabilised_count=len(cubes),
        )
    if not isinstance(g_iso, PeriodicIsometry):
        raise InputError("expected a FiniteIsometry or PeriodicIsometry")

    if g_iso.bounded_orbits():
        dim, cube = _min_cube_periodic(g_iso)
        return IsometryClass(
            "elliptic",
            min_cube_dim=dim,
            min_cube=tuple(sorted(cube)),
        )

    inv = inverted_hyperplanes(g_iso)
    k = g_iso.order
    v = g_iso.period_translation
    length = Fraction(sum(abs(t) for t in v), k)
    if inv:
        quot_min, _ = min_displacement(g_iso, ignore_walls=frozenset(inv))
        return IsometryClass(
            "inverting",
            inverted=inv,
            translation_length=length,
            quotient_min_displacement=quot_min,
        )
    best, _ = min_displacement(g_iso)
    if Fraction(best) != length:
        raise InvariantViolation(
            f"loxodromic min displacement {best} != translation length {length}"
        )
    win, ids, _ = min_set(g_iso)
    witness = min(ids, key=lambda v: win.coords[v])
    return IsometryClass(
        "loxodromic",
        translation_length=length,
        min_displacement=best,
        min_vertex=witness,
    )


def combinatorial_min(g_iso):
    """||g|| = min displacement."""
    if isinstance(g_iso, FiniteIsometry):
        return min_set(g_iso)[1]
    return min_displacement(g_iso)[0]


def translation_length(g_iso):
    """l(g) = lim d(x, g^n x)/n, exact: ||v||_1 / order(P) on periodic hosts,
    zero on finite hosts."""
    if isinstance(g_iso, FiniteIsometry):
        return Fraction(0)
    v = g_iso.period_translation
    return Fraction(sum(abs(t) for t in v), g_iso.order)


# -- axes ---------------------------------------------------------------------


def axis(g_iso, start):
    """One period [x, gx] of an axis through x, as a coordinate path.

    Deterministic: at each step the smallest admissible coordinate move is
    taken; backtracking covers membership pockets. Requires a loxodromic g
    and x in Min(g).
    """
    cls = classify(g_iso)
    if cls.kind != "loxodromic":
        raise PreconditionError(f"axis of a {cls.kind} isometry")
    x = tuple(int(t) for t in start)
    if not g_iso.p.is_member(x):
        raise PreconditionError(f"{x} is not a vertex")
    if g_iso.displacement(x) != cls.min_displacement:
        raise PreconditionError(f"{x} is not in the minimising set")
    target = g_iso.g.apply(x)

    def moves(v):
        out = []
        for ax in range(g_iso.p.dim):
            d = target[ax] - v[ax]
            if d:
                step = 1 if d > 0 else -1
                out.append(v[:ax] + (v[ax] + step,) + v[ax + 1 :])
        return out

    path = [x]

    def rec(v):
        if v == target:
            return True
        for nxt in moves(v):
            if g_iso.p.is_member(nxt):
                path.append(nxt)
                if rec(nxt):
                    return True
                path.pop()
        return False

    if not rec(x):
        raise InvariantViolation("no monotone member path to the image vertex")
    return path


def _path_crossings(path):
    out = []
    for a, b in zip(path, path[1:]):
        ax = next(i for i in range(len(a)) if a[i] != b[i])
        out.append((ax, min(a[ax], b[ax])))
    return out


def is_axis(g_iso, path):
    """Is the concatenation of g-translates of this period a geodesic axis?

    Checks: unit member steps, endpoint = g(start), and that the walls
    crossed by g^j(path) stay pairwise disjoint. Powers j up to
    order(P) * (len(path) + 2) are decisive: fixed-axis crossings repeat with
    period order(P), moving-axis offsets then drift monotonically away.
    """
    path = [tuple(int(t) for t in v) for v in path]
    if len(path) < 2:
        return False
    p = g_iso.p
    for v in path:
        if not p.is_member(v):
            return False
    for a, b in zip(path, path[1:]):
        if sum(abs(t - u) for t, u in zip(a, b)) != 1:
            return False
    if g_iso.g.apply(path[0]) != path[-1]:
        return False
    base = _path_crossings(path)
    if len(set(base)) != len(base):
        return False
    seen = set(base)
    bound = g_iso.order * (len(path) + 2)
    for j in range(1, bound + 1):
        h = g_iso.power(j)
        image = {h.wall_image(w) for w in base}
        if image & seen:
            return False
        seen |= image
    return True


# -- transfer numbers ---------------------------------------------------------


class WallRaySet:
    """Commensurated wall set: per axis a finite offset set or a ray
    {offset >= t} / {offset <= t}, plus finite add/remove corrections.

    Rays are only admitted on axes where the sampled walls near the threshold
    are active (unbounded axes of the complex); finite parts are unrestricted.
    """

    def __init__(self, p, rays=(), add=(), remove=()):
        self.p = p
        by_axis = {}
        for axis, direction, threshold in rays:
            axis = int(axis)
            direction = 1 if direction in (1, "+", "+1") else -1
            if axis in by_axis:
                raise InputError(f"two rays on axis {axis}")
            if not (0 <= axis < p.dim):
                raise InputError(f"axis {axis} out of range")
            by_axis[axis] = (direction, int(threshold))
        self.rays = by_axis
        self.add = frozenset((int(a), int(m)) for a, m in add)
        self.remove = frozenset((int(a), int(m)) for a, m in remove)
        for axis, (direction, t) in by_axis.items():
            for probe in range(3):
                off = t + direction * probe * max(1, p.base_radius())
                if not p.wall_active(axis, off):
                    raise InputError(
                        f"ray on axis {axis} hits inactive wall {off}; axis "
                        "is not unbounded in that direction"
                    )
        self.add = self.add - {w for w in self.add if self._in_base(w)}
        self.remove = frozenset(w for w in self.remove if self._in_base(w))

    def _in_base(self, wall):
        axis, off = wall
        if axis not in self.rays:
            return False
        direction, t = self.rays[axis]
        return off >= t if direction == 1 else off <= t

    def contains(self, wall):
        if wall in self.add:
            return True
        if wall in self.remove:
            return False
        return self._in_base(wall)

    def transformed(self, aff):
        """The set {aff(w) : w in self}, again as a WallRaySet."""
        rays = []
        for axis, (direction, t) in sorted(self.rays.items()):
            image_axis, sign = None, None
            for i, (src, s) in enumerate(aff.perm):
                if src == axis:
                    image_axis, sign = i, s
                    break
            c = aff.trans[image_axis]
            if sign == 1:
                rays.append((image_axis, direction, t + c))
            else:
                rays.append((image_axis, -direction, -t - 1 + c))
        add = {aff.wall_image(w) for w in self.add}
        remove = {aff.wall_image(w) for w in self.remove}
        return WallRaySet(self.p, rays, add, remove)

    def difference_size(self, other):
        """|self minus other|, or None when infinite."""
        if set(self.rays) != set(other.rays):
            return None
        count = 0
        candidates = set(self.add) | set(other.remove)
        for axis, (dir_a, t_a) in self.rays.items():
            dir_b, t_b = other.rays[axis]
            if dir_a != dir_b:
                return None
            lo = min(t_a, t_b) - 1
            hi = max(t_a, t_b) + 1
            candidates.update((axis, m) for m in range(lo, hi))
        for w in (
            self.add | self.remove | other.add | other.remove | candidates
        ):
            if self.contains(w) and not other.contains(w):
                count += 1
        return count


def transfer_number(g_iso, wall_set):
    """tr_M(g) = |M \\ g^{-1}M| - |g^{-1}M \\ M| for a commensurated M.

    Finite hosts: M is a set of hyperplane ids and the result is always 0
    (the wall action is a bijection of a finite set). Periodic hosts: M is a
    WallRaySet and the computation is exact and symbolic.
    """
    if isinstance(g_iso, FiniteIsometry):
        x = g_iso.x
        known = {h.id for h in x.hyperplanes}
        if not set(wall_set) <= known:
            raise InputError("unknown hyperplane ids in the wall set")
        return 0
    if not isinstance(wall_set, WallRaySet):
        raise InputError("periodic transfer numbers need a WallRaySet")
    # g^{-1}M in the pullback convention: supp(1_M o g^{-1}) = g M. This is
    # the reading under which {walls right of 0} on Z gives tr(+k) = k.
    pre = wall_set.transformed(g_iso.g)
    a = wall_set.difference_size(pre)
    b = pre.difference_size(wall_set)
    if a is None or b is None:
        raise PreconditionError(
            "wall set is not commensurated by the isometry"
        )
    return a - b
