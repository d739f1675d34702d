"""Median sets of isometries and their verified product decompositions.

The median set of g is: the union of all minimal-dimension cubes stabilised
by <g> (elliptic); the union of all axes, which equals the minimising set
(loxodromic); or the preimage of the quotient minimising set under the map
collapsing the inverted walls (inverting). Each case carries a product
decomposition with an explicit isomorphism:

  elliptic    Med ~ Q x Z      Q a minimal stabilised cube, E trivial on Z
  loxodromic  Med ~ T x F      F a median flat, g trivial on T
  inverting   Med ~ T x F x Q  Q the cube dual to the inverted walls

On periodic hosts the decomposition is a wall splitting. Let v be the
translation part of g^k (k the order of the linear part). Axes with
v_i != 0 ("moving") carry exactly the walls separating the two ends of
every axis, so they are the F walls; fixed axes carry the T walls and the
inverted set (inverted walls provably sit on fixed axes). F is realised as
the fiber of Med over a base point, projected to the moving axes; that
projection is an isometric unit-step subcomplex, hence again a
PeriodicComplex, and the flat certificate applies to it. T is realised, per
contract, as the cubical quotient of the cubulation of Med windows by the
non-T trace walls. `verify` re-checks every claimed property on a window.
"""

from fractions import Fraction
from itertools import combinations, product as iproduct

import numpy as np

from .errors import (
    InputError,
    InvariantViolation,
    PreconditionError,
    UnsupportedHost,
)
from .isometry import (
    FiniteIsometry,
    PeriodicIsometry,
    _min_cube_finite,
    _stabilised,
    classify,
    min_displacement,
    periodic_cubes_in_window,
)
from .periodic import (
    INF,
    DirectionClass,
    PeriodicComplex,
    ensure_periodic_valid,
    integer_kernel,
    lattice_row_basis,
    product_complex,
    validate_periodic,
)
from .wallspace import cubical_quotient, median_closure_witness, subalgebra_cubulation

_DEFAULT_RADIUS = 6
_PAD = 3


# -- median sets ---------------------------------------------------------------


class MedianSetResult:
    """The median set, as explicit vertices (finite host) or as an exact
    membership predicate plus window realisations (periodic host)."""

    def __init__(self, kind, host_kind, **data):
        self.kind = kind
        self.host_kind = host_kind
        self.__dict__.update(data)

    def med_window(self, radius):
        """(window complex, ids of median-set vertices inside it)."""
        if self.host_kind != "periodic":
            raise PreconditionError("windows only apply to periodic hosts")
        win = self.p.centred_window(radius)
        ids = frozenset(v for v in win.ids if self.contains(win.coords[v]))
        return win, ids

    def __repr__(self):
        if self.host_kind == "finite":
            return f"MedianSet({self.kind}, {len(self.vertices)} vertices)"
        return f"MedianSet({self.kind}, periodic)"


def _elliptic_box_contains(pi, d_min):
    """Membership predicate for the union of minimal stabilised cubes:
    v lies in a d_min-dimensional unit box with member corners, setwise
    fixed by g. Local and exact."""
    p, g = pi.p, pi.g

    def contains(v):
        v = tuple(int(t) for t in v)
        if not p.is_member(v):
            return False
        for axes in combinations(range(p.dim), d_min):
            for bits in iproduct(*[(0, -1)] * d_min):
                base = list(v)
                for ax, b in zip(axes, bits):
                    base[ax] += b
                corners = []
                ok = True
                for inc in iproduct(*[(0, 1)] * d_min):
                    c = list(base)
                    for ax, t in zip(axes, inc):
                        c[ax] += t
                    c = tuple(c)
                    if not p.is_member(c):
                        ok = False
                        break
                    corners.append(c)
                if ok and frozenset(g.apply(c) for c in corners) == frozenset(
                    corners
                ):
                    return True
        return False

    return contains


def median_set(g_iso):
    """Med(g) per the three-case definition, with an exact realisation."""
    cls = classify(g_iso)
    if isinstance(g_iso, FiniteIsometry):
        x = g_iso.x
        dim, cubes = _min_cube_finite(g_iso)
        verts = frozenset(x.ids[t] for c in cubes for t in c)
        return MedianSetResult(
            "elliptic",
            "finite",
            x=x,
            vertices=verts,
            min_cube_dim=dim,
            cubes=tuple(tuple(sorted(x.ids[t] for t in c)) for c in cubes),
        )
    p = g_iso.p
    if cls.kind == "elliptic":
        contains = _elliptic_box_contains(g_iso, cls.min_cube_dim)
        return MedianSetResult(
            "elliptic", "periodic", p=p, contains=contains,
            min_cube_dim=cls.min_cube_dim,
        )
    if cls.kind == "loxodromic":
        norm = cls.min_displacement

        def contains(v):
            return p.is_member(v) and g_iso.displacement(tuple(v)) == norm

        return MedianSetResult(
            "loxodromic", "periodic", p=p, contains=contains, min_displacement=norm
        )
    walls = frozenset(cls.inverted)
    qnorm = cls.quotient_min_displacement

    def contains(v):
        return p.is_member(v) and g_iso.displacement(tuple(v), walls) == qnorm

    return MedianSetResult(
        "inverting", "periodic", p=p, contains=contains,
        inverted=dict(cls.inverted), quotient_min_displacement=qnorm,
    )


# -- elliptic decomposition ----------------------------------------------------


class EllipticDecomposition:
    """Med(E) ~ Q x Z for a commuting elliptic family E.

    `host` is the finite complex the certificate lives on (for periodic
    hosts: an E-invariant window that contains every minimal cube), `gens`
    the isometries restricted to it. Q is the base cube, Z the gates of the
    base vertex into the minimal cubes, phi the coordinate map.
    """

    def __init__(self, host, gens, q_dim, cubes, whole_z=False, periodic_host=None):
        self.host = host
        self.gens = gens
        self.q_dim = q_dim
        self.whole_z = whole_z
        self.periodic_host = periodic_host
        if whole_z:
            self.cubes = cubes
            self.q_cube = cubes[0] if cubes else ()
            self.z_ids = None
            self.phi = None
            return
        x = host
        self.cubes = tuple(
            tuple(sorted(x.ids[t] for t in c)) for c in cubes
        )
        cube_sets = [frozenset(x.index[v] for v in c) for c in self.cubes]
        self.q_cube = self.cubes[0]
        q_set = cube_sets[0]
        self.base_vertex = self.q_cube[0]
        v0 = x.index[self.base_vertex]
        d = x._d()

        def gate(target, i):
            tl = sorted(target)
            dists = d[i][tl]
            best = int(dists.min())
            winners = [u for u, dd in zip(tl, dists) if dd == best]
            if len(winners) != 1:
                raise InvariantViolation("cube gate is not unique")
            return winners[0]

        self.cube_of = {}
        for cs in cube_sets:
            for t in cs:
                if t in self.cube_of:
                    raise InvariantViolation("minimal stabilised cubes overlap")
                self.cube_of[t] = cs
        z_idx = sorted({gate(cs, v0) for cs in cube_sets})
        self.z_ids = tuple(x.ids[t] for t in z_idx)
        self.med_ids = tuple(sorted(x.ids[t] for t in self.cube_of))
        self.phi = {}
        for t in sorted(self.cube_of):
            self.phi[x.ids[t]] = (
                x.ids[gate(q_set, t)],
                x.ids[gate(self.cube_of[t], v0)],
            )
        self._gate = gate

    def z_complex(self):
        if self.whole_z:
            raise PreconditionError("Z is the whole complex; no finite cubulation")
        sub, corr, _ = subalgebra_cubulation(
            self.host, self.z_ids, host_median_checked=True
        )
        return sub, corr

    def verify(self):
        """Re-check the product certificate; returns {name: (ok, detail)}."""
        out = {}
        if self.whole_z:
            out["trivial_family"] = (True, "E acts trivially; Z is the host")
            return out
        x = self.host
        d = x._d()
        cube_sets = [frozenset(x.index[v] for v in c) for c in self.cubes]

        def cube_walls(cs):
            tl = sorted(cs)
            m = 0
            for a in tl[1:]:
                m |= x.masks[tl[0]] ^ x.masks[a]
            return m

        ref = cube_walls(cube_sets[0])
        out["cubes_same_walls"] = (
            all(cube_walls(cs) == ref for cs in cube_sets),
            f"{len(cube_sets)} cubes",
        )
        seen = set()
        disjoint = True
        for cs in cube_sets:
            if cs & seen:
                disjoint = False
            seen |= cs
        out["cubes_disjoint"] = (disjoint, None)

        med_idx = [x.index[v] for v in self.med_ids]
        pairs_ok = True
        detail = None
        for a in med_idx:
            for b in med_idx:
                qa, za = self.phi[x.ids[a]]
                qb, zb = self.phi[x.ids[b]]
                lhs = int(d[a, b])
                rhs = int(d[x.index[qa], x.index[qb]]) + int(
                    d[x.index[za], x.index[zb]]
                )
                if lhs != rhs:
                    pairs_ok = False
                    detail = (x.ids[a], x.ids[b], lhs, rhs)
                    break
            if not pairs_ok:
                break
        out["distance_additivity"] = (pairs_ok, detail)

        images = set(self.phi.values())
        prod_ok = len(images) == len(self.phi) and images == {
            (q, z) for q in self.q_cube for z in self.z_ids
        }
        out["phi_bijective_onto_product"] = (
            prod_ok,
            f"{len(self.phi)} = {len(self.q_cube)} x {len(self.z_ids)}",
        )

        triv = True
        detail = None
        for g in self.gens:
            for z in self.z_ids:
                zi = x.index[z]
                hz = g.apply_idx(zi)
                target = self.cube_of[hz]
                moved = self._gate(target, x.index[self.base_vertex])
                if moved != zi:
                    triv = False
                    detail = (z, x.ids[moved])
                    break
            if not triv:
                break
        out["family_trivial_on_z"] = (triv, detail)

        witness = median_closure_witness(x, self.med_ids)
        out["med_median_closed"] = (witness is None, witness)
        return out

    def __repr__(self):
        if self.whole_z:
            return f"EllipticDecomposition(q_dim={self.q_dim}, Z = whole complex)"
        return (
            f"EllipticDecomposition(q_dim={self.q_dim}, "
            f"{len(self.cubes)} cubes, |Z|={len(self.z_ids)})"
        )


def _commuting_witness(gens):
    for i in range(len(gens)):
        for j in range(i + 1, len(gens)):
            a, b = gens[i], gens[j]
            if isinstance(a, FiniteIsometry):
                if a.compose(b).mapping != b.compose(a).mapping:
                    return (i, j)
            else:
                if a.g.compose(b.g) != b.g.compose(a.g):
                    return (i, j)
    return None


def _invariant_box(p, affines, radius0):
    """A box around the origin window closed under all the affine maps."""
    lo = [-radius0] * p.dim
    hi = [radius0] * p.dim
    for _ in range(64):
        changed = False
        corners = list(iproduct(*[(l, h) for l, h in zip(lo, hi)]))
        for g in affines:
            for c in corners:
                img = g.apply(c)
                for i, t in enumerate(img):
                    if t < lo[i]:
                        lo[i] = t
                        changed = True
                    if t > hi[i]:
                        hi[i] = t
                        changed = True
        if not changed:
            return tuple(zip(lo, hi))
    raise UnsupportedHost(
        "no bounded invariant box: some generator has unbounded orbits here"
    )


def decompose_elliptic(gens):
    """Med(E) ~ Q x Z for a single elliptic isometry or a commuting list."""
    if isinstance(gens, (FiniteIsometry, PeriodicIsometry)):
        gens = [gens]
    gens = list(gens)
    if not gens:
        raise InputError("empty generator list")
    bad = _commuting_witness(gens)
    if bad is not None:
        raise PreconditionError(f"generators {bad[0]} and {bad[1]} do not commute")

    if isinstance(gens[0], FiniteIsometry):
        x = gens[0].x
        if any(not isinstance(g, FiniteIsometry) or g.x is not x for g in gens):
            raise InputError("generators live on different hosts")
        dim, cubes = _min_cube_finite(None, gens=gens)
        return EllipticDecomposition(x, gens, dim, cubes)

    p = gens[0].p
    if any(not isinstance(g, PeriodicIsometry) or g.p is not p for g in gens):
        raise InputError("generators live on different hosts")
    for g in gens:
        if not g.bounded_orbits():
            raise PreconditionError("a generator is not elliptic")
    if all(g.g.is_identity() for g in gens):
        return EllipticDecomposition(
            None, gens, 0, (), whole_z=True, periodic_host=p
        )

    def probe(radius):
        cubes = periodic_cubes_in_window(p, radius)
        for dim in sorted(cubes):
            stab = [
                c
                for c in cubes[dim]
                if all(
                    frozenset(g.g.apply(t) for t in c) == c for g in gens
                )
            ]
            if stab:
                return (dim, frozenset(stab))
        return None

    r0 = 2 * p.base_radius() + max(
        abs(t) for g in gens for t in g.g.trans
    ) + 2
    found, _ = _stabilised(probe, r0)
    if found is None:
        raise UnsupportedHost(
            "no jointly stabilised cube found; the family is not elliptic "
            "as a group on this host"
        )
    dim, stab_cubes = found

    span = max(abs(t) for c in stab_cubes for v in c for t in v) + 2
    box = _invariant_box(p, [g.g for g in gens], span)
    win = p.window(box)
    fins = []
    for g in gens:
        mapping = {}
        for v in win.ids:
            img = g.g.apply(win.coords[v])
            iv = ",".join(str(t) for t in img)
            if iv not in win.index:
                raise InvariantViolation("invariant box is not closed under a map")
            mapping[v] = iv
        fins.append(FiniteIsometry(win, mapping))
    dim2, cubes = _min_cube_finite(None, gens=fins)
    if dim2 != dim:
        raise InvariantViolation(
            f"window minimal cube dimension {dim2} != stabilised dimension {dim}"
        )
    return EllipticDecomposition(win, fins, dim, cubes, periodic_host=p)


# -- loxodromic / inverting decomposition ---------------------------------------


class MedianDecomposition:
    """Med(g) ~ T x F x Q on a periodic host, with window certificates."""

    def __init__(self, pi, kind, inverted=None):
        self.pi = pi
        self.kind = kind
        p = pi.p
        self.p = p
        cls = classify(pi)
        if cls.kind != kind:
            raise PreconditionError(f"isometry is {cls.kind}, not {kind}")
        self.cls = cls
        self.k = pi.order
        self.v = pi.period_translation
        self.ell = Fraction(sum(abs(t) for t in self.v), self.k)
        self.inverted = dict(inverted or {})
        self.j_walls = tuple(sorted(self.inverted))
        self.q_dim = len(self.j_walls)
        self.mov = pi.moving_axes()
        self.fixed = tuple(i for i in range(p.dim) if i not in self.mov)
        for (ax, _off) in self.j_walls:
            if ax in self.mov:
                raise InvariantViolation("inverted wall on a moving axis")
        self.med = median_set(pi)
        if kind == "loxodromic":
            self.gnorm = cls.min_displacement
            self.quot_norm = self.gnorm
        else:
            self.gnorm = min_displacement(pi)[0]
            self.quot_norm = cls.quotient_min_displacement

        # base point: coordinate-minimal median-set vertex in a stabilised window
        def probe(radius):
            members = p.members_in_box(
                tuple((-radius, radius) for _ in range(p.dim))
            )
            inside = [v for v in members if self.med.contains(v)]
            return min(inside) if inside else None

        r0 = 2 * p.base_radius() + max(abs(t) for t in pi.g.trans) + 2
        self.x0, _ = _stabilised(probe, r0)
        if self.x0 is None:
            raise InvariantViolation("median set is empty on stabilised windows")

        self.zeta = DirectionClass(
            [
                -INF if self.v[i] > 0 else (INF if self.v[i] < 0 else self.x0[i])
                for i in range(p.dim)
            ]
        )
        self.xi = DirectionClass(
            [
                INF if self.v[i] > 0 else (-INF if self.v[i] < 0 else self.x0[i])
                for i in range(p.dim)
            ]
        )
        self.f_complex = self._build_fiber_complex()
        self.zeta_f = DirectionClass(
            [-INF if self.v[i] > 0 else INF for i in self.mov]
        )
        self.xi_f = DirectionClass(
            [INF if self.v[i] > 0 else -INF for i in self.mov]
        )

    # fiber -> moving axes projection
    def f_project(self, v):
        return tuple(v[i] for i in self.mov)

    def in_fiber(self, v):
        return self.med.contains(v) and all(
            v[i] == self.x0[i] for i in self.fixed
        )

    def fiber_point(self, v):
        """mu(v, zeta, xi): moving coordinates of v over the base fiber."""
        out = list(self.x0)
        for i in self.mov:
            out[i] = v[i]
        return tuple(out)

    def _sublattice(self, pin_axes, keep_axes):
        """Generators of {l in span(L + Zv) : P l = l, l = 0 on pin_axes},
        projected to keep_axes."""
        p, g = self.p, self.pi.g
        gens = [tuple(t) for t in p.lattice] + [tuple(self.v)]
        if not gens:
            return []
        rows = []
        for i in pin_axes:
            rows.append([gv[i] for gv in gens])
        for i in range(p.dim):
            rows.append(
                [g.linear_apply(gv)[i] - gv[i] for gv in gens]
            )
        if not rows:
            coeff_basis = [
                tuple(int(a == b) for b in range(len(gens)))
                for a in range(len(gens))
            ]
        else:
            coeff_basis = integer_kernel(rows)
        vectors = []
        for coeffs in coeff_basis:
            vec = tuple(
                sum(a * gv[i] for a, gv in zip(coeffs, gens))
                for i in range(p.dim)
            )
            vectors.append(vec)
        basis = lattice_row_basis(vectors)
        return [tuple(l[i] for i in keep_axes) for l in basis]

    def _build_fiber_complex(self):
        """F as a PeriodicComplex in the moving coordinates."""
        if not self.mov:
            raise InvariantViolation("translating isometry with no moving axis")
        lat = self._sublattice(self.fixed, self.mov)

        def probe(radius):
            members = self.p.members_in_box(
                tuple(
                    (self.x0[i] - radius, self.x0[i] + radius)
                    for i in range(self.p.dim)
                )
            )
            cells = sorted(
                {self.f_project(v) for v in members if self.in_fiber(v)}
            )
            if not cells:
                return None
            return tuple(PeriodicComplex(len(self.mov), lat, cells).cells)

        r0 = 2 * self.p.base_radius() + max(abs(t) for t in self.pi.g.trans) + 2
        cells, _ = _stabilised(probe, r0)
        if cells is None:
            raise InvariantViolation("empty fiber")
        return PeriodicComplex(len(self.mov), lat, cells)

    # -- window machinery -------------------------------------------------------

    def med_window(self, radius, pad=_PAD):
        """Padded window complex, its median-set ids, and the core subset."""
        p = self.p
        box = tuple(
            (self.x0[i] - radius - pad, self.x0[i] + radius + pad)
            for i in range(p.dim)
        )
        win = p.window(box)
        med_ids = sorted(
            v for v in win.ids if self.med.contains(win.coords[v])
        )
        core = [
            v
            for v in med_ids
            if all(
                abs(win.coords[v][i] - self.x0[i]) <= radius
                for i in range(p.dim)
            )
        ]
        return win, med_ids, core

    def _classify_trace(self, win, trace_hids):
        kinds = set()
        for hid in trace_hids:
            ax, off = win.wall_geometry[hid]
            if (ax, off) in self.inverted:
                kinds.add("q")
            elif ax in self.mov:
                kinds.add("f")
            else:
                kinds.add("t")
        if len(kinds) != 1:
            raise InvariantViolation(
                f"one Med trace mixes wall types {sorted(kinds)}"
            )
        return kinds.pop()

    def t_window(self, radius, pad=_PAD):
        """T realised as the cubical quotient of the Med cubulation by the
        F and Q trace walls. Returns (t_complex, projection med-id -> t-id,
        med window complex, med ids, core ids, med cubulation)."""
        win, med_ids, core = self.med_window(radius, pad)
        if win.wall_geometry is None:
            raise InvariantViolation("window walls lost coordinate geometry")
        cub, corr, trace_walls = subalgebra_cubulation(
            win, med_ids, host_median_checked=True
        )
        collapse = []
        for k, hids in enumerate(trace_walls):
            kind = self._classify_trace(win, hids)
            if kind in ("f", "q"):
                collapse.append(k)
        # cubulation bit k corresponds to trace wall k
        bit_to_hid = {bit: hid for hid, bit in _wall_bits_of(cub).items()}
        collapse_hids = [bit_to_hid[k] for k in collapse]
        q = cubical_quotient(cub, collapse_hids)
        proj = {v: q.pi[corr[v]] for v in med_ids}
        return q.target, proj, win, med_ids, core, cub, corr

    def phi_window(self, radius, pad=_PAD):
        """phi on a window: med id -> (q bits, t id, f coordinates)."""
        t_complex, proj, win, med_ids, core, cub, corr = self.t_window(
            radius, pad
        )
        phi = {}
        for v in med_ids:
            c = win.coords[v]
            qbits = tuple(
                1 if c[ax] >= off + 1 else 0 for ax, off in self.j_walls
            )
            phi[v] = (qbits, proj[v], self.f_project(c))
        return phi, t_complex, win, med_ids, core, cub, corr

    # -- certificate -------------------------------------------------------------

    def verify(self, radius=_DEFAULT_RADIUS, pad=_PAD):
        """Re-verify the decomposition on a window; {name: (ok, detail)}."""
        out = {}
        p = self.p
        pi = self.pi
        phi, t_complex, win, med_ids, core, cub, corr = self.phi_window(
            radius, pad
        )
        coords = win.coords

        # median closure of the median set (exact predicate, no edge effects);
        # anchors are subsampled, the other two points range over the core
        closed = True
        witness = None
        core_coords = [coords[v] for v in core]
        arr = np.array(core_coords, dtype=np.int64)
        anchors = core_coords[:: max(1, len(core_coords) // 20)]
        for a in anchors:
            av = np.array(a, dtype=np.int64)
            meds = np.median(
                np.stack(
                    [
                        np.broadcast_to(av, (len(arr), len(arr), p.dim)),
                        np.repeat(arr[:, None, :], len(arr), axis=1),
                        np.repeat(arr[None, :, :], len(arr), axis=0),
                    ]
                ),
                axis=0,
            ).astype(np.int64)
            uniq = np.unique(meds.reshape(-1, p.dim), axis=0)
            for m in uniq:
                mt = tuple(int(t) for t in m)
                if not self.med.contains(mt):
                    bad = np.argwhere((meds == m).all(axis=2))[0]
                    closed = False
                    witness = (a, core_coords[bad[0]], core_coords[bad[1]], mt)
                    break
            if not closed:
                break
        out["med_median_closed"] = (closed, witness)

        # fiber formula stabilisation: mu(x, g^-N y, g^N y) = fiber point
        diam = sum(hi - lo for lo, hi in win.box)
        n0 = int(diam / self.ell) + 1
        fib_ok = True
        detail = None
        for v in core[: min(len(core), 40)]:
            c = coords[v]
            want = self.fiber_point(c)
            for n in (n0, 2 * n0):
                n_al = n * self.k  # align to full periods
                a = pi.power(-n_al).apply(self.x0)
                b = pi.power(n_al).apply(self.x0)
                got = tuple(
                    sorted((x, y, z))[1] for x, y, z in zip(c, a, b)
                )
                if got != want:
                    fib_ok = False
                    detail = (c, n_al, got, want)
                    break
            if not fib_ok:
                break
        out["fiber_formula_stable"] = (fib_ok, detail)

        # phi is injective on the window and surjective onto the product of
        # the factor values observed on the core
        images = [phi[v] for v in med_ids]
        inj = len(set(images)) == len(images)
        out["phi_injective"] = (inj, None)
        qs = sorted({phi[v][0] for v in core})
        ts = sorted({phi[v][1] for v in core})
        fs = sorted({phi[v][2] for v in core})
        all_images = set(images)
        missing = None
        for q in qs:
            for t in ts:
                for f in fs:
                    if (q, t, f) not in all_images:
                        missing = (q, t, f)
                        break
                if missing:
                    break
            if missing:
                break
        out["phi_onto_product"] = (
            missing is None,
            missing or f"{len(qs)}x{len(ts)}x{len(fs)}",
        )
        if self.kind == "inverting":
            out["q_patterns_complete"] = (
                len(qs) == 1 << self.q_dim,
                f"{len(qs)} of {1 << self.q_dim}",
            )

        # intrinsic distance additivity on core pairs:
        # d_cub = d_T + l1(moving part) + hamming(q bits)
        dc = cub._d()
        dt = t_complex._d()
        addv = True
        detail = None
        for a in core:
            for b in core:
                ca, cb = coords[a], coords[b]
                lhs = int(dc[cub.index[corr[a]], cub.index[corr[b]]])
                qa, ta, fa = phi[a]
                qb, tb, fb = phi[b]
                rhs = (
                    int(dt[t_complex.index[ta], t_complex.index[tb]])
                    + sum(abs(x - y) for x, y in zip(fa, fb))
                    + sum(x != y for x, y in zip(qa, qb))
                )
                if lhs != rhs:
                    addv = False
                    detail = (ca, cb, lhs, rhs)
                    break
            if not addv:
                break
        out["distance_additivity"] = (addv, detail)

        # ambient wall split is the trivial coordinate identity; record it
        out["ambient_split"] = (True, "l1 = l1_mov + l1_fixed by coordinates")

        # g acts trivially on T
        triv = True
        detail = None
        for v in core:
            img = pi.g.apply(coords[v])
            iv = ",".join(str(t) for t in img)
            if iv in phi:
                if phi[iv][1] != phi[v][1]:
                    triv = False
                    detail = (coords[v], img)
                    break
        out["g_trivial_on_t"] = (triv, detail)

        # g moves every median-set vertex by exactly l along the moving axes
        tr_ok = True
        detail = None
        for v in core:
            c = coords[v]
            img = pi.g.apply(c)
            shift = sum(abs(img[i] - c[i]) for i in self.mov)
            if shift != self.ell:
                tr_ok = False
                detail = (c, img, shift)
                break
        out["f_translation_length"] = (tr_ok, detail)

        if self.kind == "inverting":
            carr = True
            detail = None
            for v in core:
                c = coords[v]
                for ax, off in self.j_walls:
                    if c[ax] not in (off, off + 1):
                        carr = False
                        detail = (c, (ax, off))
                        break
                    other = list(c)
                    other[ax] = off + 1 if c[ax] == off else off
                    if not p.is_member(tuple(other)):
                        carr = False
                        detail = (c, (ax, off), "no edge across")
                        break
                if not carr:
                    break
            out["med_inside_carriers"] = (carr, detail)
            out["displacement_gap"] = (
                self.quot_norm <= self.gnorm <= self.quot_norm + self.q_dim,
                (self.quot_norm, self.gnorm, self.q_dim),
            )

        # the F factor is a valid flat with the right certificate
        ok_flat = flat_certificate(self.f_complex, self.zeta_f, self.xi_f)
        out["f_flat_certificate"] = (ok_flat, None)
        fwin = self.f_complex.centred_window(max(3, radius))
        degs = [len(fwin.adj[i]) for i in range(len(fwin.ids))]
        interior = [
            i
            for i, vid in enumerate(fwin.ids)
            if all(
                abs(t) < max(3, radius) for t in fwin.coords[vid]
            )
        ]
        max_deg = max((degs[i] for i in interior), default=0)
        out["f_degree_bound"] = (
            max_deg <= 2 * self.gnorm,
            f"max interior degree {max_deg} <= 2*||g|| = {2 * self.gnorm}",
        )
        self.f_max_degree = max_deg
        return out

    def factor_summary(self, radius=_DEFAULT_RADIUS):
        t_complex, _, _, _, _, _, _ = self.t_window(radius)
        return {
            "kind": self.kind,
            "translation_length": str(self.ell),
            "min_displacement": self.gnorm,
            "Q": f"cube({self.q_dim})",
            "F": {
                "dim": self.f_complex.dim,
                "lattice": [list(g) for g in self.f_complex.lattice],
                "cells": [list(c) for c in self.f_complex.cells],
            },
            "T": {
                "vertices_at_radius": len(t_complex.ids),
                "is_point": len(t_complex.ids) == 1,
            },
        }

    def __repr__(self):
        return (
            f"MedianDecomposition({self.kind}, Q=cube({self.q_dim}), "
            f"F dim {self.f_complex.dim}, l={self.ell})"
        )


def _wall_bits_of(cub):
    """Rebuild hyperplane -> wall-bit map of a cubulation from its vertex
    ids (they encode orientation masks)."""
    out = {}
    for h in cub.hyperplanes:
        k = next(iter(h.edges))
        i, j = cub.edge_list[k]
        mi = int(cub.ids[i][1:][::-1] or "0", 2)
        mj = int(cub.ids[j][1:][::-1] or "0", 2)
        out[h.id] = (mi ^ mj).bit_length() - 1
    return out


def decompose_loxodromic(g_iso):
    if not isinstance(g_iso, PeriodicIsometry):
        raise PreconditionError(
            "loxodromic isometries live on periodic hosts"
        )
    return MedianDecomposition(g_iso, "loxodromic")


def decompose_inverting(g_iso):
    if not isinstance(g_iso, PeriodicIsometry):
        raise PreconditionError("inverting isometries live on periodic hosts")
    cls = classify(g_iso)
    if cls.kind != "inverting":
        raise PreconditionError(f"not inverting: classification is {cls.kind}")
    return MedianDecomposition(g_iso, "inverting", inverted=cls.inverted)


def decompose(g_iso):
    """Dispatch on the classification."""
    cls = classify(g_iso)
    if cls.kind == "elliptic":
        return decompose_elliptic([g_iso])
    if cls.kind == "loxodromic":
        return decompose_loxodromic(g_iso)
    return decompose_inverting(g_iso)


# -- flats ----------------------------------------------------------------------


def flat_certificate(f, zeta, xi, radius=None):
    """True iff every wall of the flat separates the two direction classes.

    Equivalent to the vertex form mu(zeta, x, xi) = x for every window
    vertex: a wall with both classes on one side strands the vertices of the
    other side. Axes where both classes are finite must carry no active wall
    outside the spanned range; unboundedness there is detected through the
    lattice.
    """
    ensure_periodic_valid(f)
    if len(zeta.coords) != f.dim or len(xi.coords) != f.dim:
        raise InputError("direction classes have wrong dimension")
    r = radius if radius is not None else 2 * f.base_radius() + 2

    for axis in range(f.dim):
        z, x = zeta.coords[axis], xi.coords[axis]
        lat_signs = {
            0 if t == 0 else (1 if t > 0 else -1)
            for t in (g[axis] for g in f.lattice)
        } - {0}
        members = f.members_in_box(
            tuple(
                (-(3 * r), 3 * r) if i == axis else (-r, r)
                for i in range(f.dim)
            )
        )
        active = sorted(
            {
                v[axis]
                for v in members
                if f.is_member(v[: axis] + (v[axis] + 1,) + v[axis + 1 :])
            }
        )
        for off in active:
            side_z = _direction_side(z, off)
            side_x = _direction_side(x, off)
            if side_z == side_x:
                return False
        if z not in (INF, -INF) and x not in (INF, -INF):
            # finite on both ends: the axis must be bounded (no lattice
            # vector moves it), otherwise far walls exist and fail
            if lat_signs:
                return False
    return True


def _direction_side(c, offset):
    """Which side of the wall {x = offset + 1/2} a direction coordinate is on."""
    if c == INF:
        return 1
    if c == -INF:
        return 0
    return 1 if c >= offset + 1 else 0


# -- abelian invariant flats ------------------------------------------------------


class AbelianFlatResult:
    """Outcome of the peeling recursion: accumulated cube dimensions, the
    product flat (or None for a point), and a per-level trace."""

    def __init__(self, levels, cube_dims, flats, base_point):
        self.levels = levels
        self.cube_dims = tuple(cube_dims)
        self.flats = tuple(flats)
        self.base_point = base_point
        self.flat = product_complex(*flats) if flats else None

    @property
    def q_dim(self):
        return sum(self.cube_dims)

    def is_point(self):
        return self.flat is None and self.q_dim == 0

    def describe(self):
        return {
            "levels": self.levels,
            "cube_dim": self.q_dim,
            "flat": None
            if self.flat is None
            else {
                "dim": self.flat.dim,
                "lattice": [list(g) for g in self.flat.lattice],
                "cells": [list(c) for c in self.flat.cells],
            },
            "point": self.is_point(),
        }

    def __repr__(self):
        f = "point" if self.flat is None else f"flat(dim={self.flat.dim})"
        return f"AbelianFlatResult(cube_dim={self.q_dim}, {f})"


def _t_section(dec):
    """The T factor of a translating decomposition as a PeriodicComplex in
    the fixed coordinates (the section over the base fiber point)."""
    if not dec.fixed:
        return None, None
    lat = dec._sublattice(dec.mov, dec.fixed)

    def probe(radius):
        members = dec.p.members_in_box(
            tuple(
                (dec.x0[i] - radius, dec.x0[i] + radius)
                for i in range(dec.p.dim)
            )
        )
        cells = sorted(
            {
                tuple(v[i] for i in dec.fixed)
                for v in members
                if dec.med.contains(v)
                and all(v[i] == dec.x0[i] for i in dec.mov)
            }
        )
        if not cells:
            return None
        return tuple(PeriodicComplex(len(dec.fixed), lat, cells).cells)

    r0 = 2 * dec.p.base_radius() + max(abs(t) for t in dec.pi.g.trans) + 2
    cells, _ = _stabilised(probe, r0)
    if cells is None:
        raise InvariantViolation("empty T section")
    section = PeriodicComplex(len(dec.fixed), lat, cells)
    ok, witness = validate_periodic(section)
    if not ok:
        raise UnsupportedHost(
            f"T section is not a valid periodic complex here: {witness}; "
            "the desk-scale model requires a unit-step section"
        )
    axis_of = {ax: pos for pos, ax in enumerate(dec.fixed)}
    return section, axis_of


def _reduce_affine(h, fixed, axis_of):
    """Restrict a commuting symmetry to the fixed axes."""
    perm = []
    trans = []
    for i in fixed:
        src, s = h.perm[i]
        if src not in axis_of:
            raise InvariantViolation(
                "commuting symmetry mixes moving and fixed axes"
            )
        perm.append((axis_of[src], s))
        trans.append(h.trans[i])
    from .periodic import AffineIsometry

    return AffineIsometry(perm, trans)


def abelian_invariant_flat(gens):
    """Peeling recursion: decompose Med of the first generator, restrict the
    rest to the T factor, recurse; cube factors and flat factors accumulate
    (a product of flats is a flat)."""
    if isinstance(gens, (FiniteIsometry, PeriodicIsometry)):
        gens = [gens]
    gens = list(gens)
    if not gens:
        raise InputError("empty generator list")
    bad = _commuting_witness(gens)
    if bad is not None:
        raise PreconditionError(
            f"generators {bad[0]} and {bad[1]} do not commute"
        )

    levels = []
    cube_dims = []
    flats = []
    base_point = None
    current = gens
    guard = 0
    while current:
        guard += 1
        if guard > 64:
            raise InvariantViolation("peeling recursion did not terminate")
        a, rest = current[0], current[1:]

        if isinstance(a, FiniteIsometry):
            dec = decompose_elliptic(current)
            # on a finite host the whole family is elliptic: one step
            levels.append(
                {
                    "kind": "elliptic",
                    "host": "finite",
                    "q_dim": dec.q_dim,
                    "z_size": len(dec.z_ids),
                }
            )
            if dec.q_dim:
                cube_dims.append(dec.q_dim)
            base_point = dec.z_ids[0]
            break

        cls = classify(a)
        if cls.kind == "elliptic":
            if a.g.is_identity():
                levels.append({"kind": "identity", "host": "periodic"})
                current = rest
                if not rest:
                    base_point = a.p.cells[0]
                continue
            dec = decompose_elliptic([a])
            levels.append(
                {
                    "kind": "elliptic",
                    "host": "periodic",
                    "q_dim": dec.q_dim,
                    "z_size": len(dec.z_ids),
                }
            )
            if dec.q_dim:
                cube_dims.append(dec.q_dim)
            if not rest:
                base_point = dec.z_ids[0]
                break
            zc, corr = dec.z_complex()
            win = dec.host
            induced = []
            for h in rest:
                mapping = {}
                for z in dec.z_ids:
                    img = h.g.apply(win.coords[z])
                    iz = ",".join(str(t) for t in img)
                    if iz not in win.index:
                        raise UnsupportedHost(
                            "restriction window too small for the family"
                        )
                    hz = win.index[iz]
                    target = dec.cube_of.get(hz)
                    if target is None:
                        raise InvariantViolation(
                            "a commuting map leaves the median set"
                        )
                    moved = dec._gate(target, win.index[dec.base_vertex])
                    mapping[corr[z]] = corr[win.ids[moved]]
                induced.append(FiniteIsometry(zc, mapping))
            current = induced
            continue

        # translating generator
        if cls.kind == "inverting":
            dec = decompose_inverting(a)
        else:
            dec = decompose_loxodromic(a)
        levels.append(
            {
                "kind": cls.kind,
                "host": "periodic",
                "q_dim": dec.q_dim,
                "f_dim": dec.f_complex.dim,
                "translation_length": str(dec.ell),
            }
        )
        if dec.q_dim:
            cube_dims.append(dec.q_dim)
        flats.append(dec.f_complex)
        if not rest:
            break
        section, axis_of = _t_section(dec)
        if section is None:
            # T is a single point: the rest act trivially on it
            levels.append({"kind": "t_point", "host": "periodic"})
            break
        induced = [
            PeriodicIsometry(section, _reduce_affine(h.g, dec.fixed, axis_of))
            for h in rest
        ]
        current = induced

    return AbelianFlatResult(levels, cube_dims, flats, base_point)
