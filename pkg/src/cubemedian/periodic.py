"""Lattice-periodic subcomplexes of Z^d and their affine symmetries.

A PeriodicComplex is a finite description of an unbounded complex: a period
lattice L (integer generator vectors) and a finite cell list; a vertex is a
member iff it is congruent to a cell mod L, and edges are unit coordinate
steps between members. The intended invariants, checked by
`validate_periodic` on windows, are: connectivity, closure under the
coordinatewise median, and graph distance equal to l1 distance. Under those,
finite windows are median graphs whose walls are the coordinate walls
(axis, offset), which is what every downstream computation leans on.

AffineIsometry is a signed permutation plus an integer translation; it acts
on vertices, on walls (in closed form) and composes exactly.
"""

import math
from fractions import Fraction
from itertools import product as iproduct

import numpy as np

from .complex import build_complex
from .errors import InputError, InvariantViolation, PreconditionError

# -- exact linear algebra over the integers ---------------------------------


def _rational_solver(gens, dim):
    """Precompute exact solve data for `sum a_i gens_i = w`.

    Returns (rows, den): integer matrix and denominator with
    a = rows @ w / den, valid because the generators are independent.
    """
    k = len(gens)
    if k == 0:
        return None
    a = [[Fraction(gens[j][i]) for j in range(k)] for i in range(dim)]
    # (A^T A)^{-1} A^T via Gaussian elimination on the k x k normal matrix
    ata = [[sum(a[i][r] * a[i][c] for i in range(dim)) for c in range(k)] for r in range(k)]
    aug = [row[:] + [Fraction(int(r == c)) for c in range(k)] for r, row in enumerate(ata)]
    for col in range(k):
        piv = next((r for r in range(col, k) if aug[r][col] != 0), None)
        if piv is None:
            raise InputError("lattice generators are linearly dependent")
        aug[col], aug[piv] = aug[piv], aug[col]
        pv = aug[col][col]
        aug[col] = [x / pv for x in aug[col]]
        for r in range(k):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    inv = [row[k:] for row in aug]
    # rows = inv @ A^T, as Fractions; clear to a common denominator
    rows_f = [
        [sum(inv[r][t] * a[i][t] for t in range(k)) for i in range(dim)]
        for r in range(k)
    ]
    den = 1
    for row in rows_f:
        for x in row:
            den = den * x.denominator // math.gcd(den, x.denominator)
    rows = [[int(x * den) for x in row] for row in rows_f]
    return rows, den


def lattice_row_basis(vectors):
    """Independent generators of the lattice spanned by integer vectors,
    via unimodular row reduction (the row lattice is preserved)."""
    rows = [list(v) for v in vectors if any(v)]
    if not rows:
        return []
    cols = len(rows[0])
    r = 0
    for c in range(cols):
        while True:
            nz = [i for i in range(r, len(rows)) if rows[i][c] != 0]
            if len(nz) <= 1:
                break
            nz.sort(key=lambda i: abs(rows[i][c]))
            i0 = nz[0]
            for i in nz[1:]:
                f = rows[i][c] // rows[i0][c]
                if f:
                    rows[i] = [a - f * b for a, b in zip(rows[i], rows[i0])]
        nz = [i for i in range(r, len(rows)) if rows[i][c] != 0]
        if nz:
            rows[r], rows[nz[0]] = rows[nz[0]], rows[r]
            r += 1
    return [tuple(row) for row in rows[:r]]


def integer_kernel(mat):
    """Basis of {a integer vector : mat @ a == 0}, via unimodular column ops.

    `mat` is a list of integer rows. The returned basis spans the full
    integer kernel (saturated), which matters when slicing sublattices.
    """
    if not mat:
        raise ValueError("no columns")
    rows = len(mat)
    cols = len(mat[0])
    m = [list(r) for r in mat]
    u = [[int(i == j) for j in range(cols)] for i in range(cols)]

    def col_addmul(dst, src, f):
        for r in range(rows):
            m[r][dst] += f * m[r][src]
        for r in range(cols):
            u[r][dst] += f * u[r][src]

    def col_swap(a, b):
        for r in range(rows):
            m[r][a], m[r][b] = m[r][b], m[r][a]
        for r in range(cols):
            u[r][a], u[r][b] = u[r][b], u[r][a]

    pivot_col = 0
    for r in range(rows):
        if pivot_col >= cols:
            break
        while True:
            nz = [c for c in range(pivot_col, cols) if m[r][c] != 0]
            if not nz:
                break
            best = min(nz, key=lambda c: abs(m[r][c]))
            col_swap(pivot_col, best)
            done = True
            for c in range(pivot_col + 1, cols):
                if m[r][c] != 0:
                    col_addmul(c, pivot_col, -(m[r][c] // m[r][pivot_col]))
                    if m[r][c] != 0:
                        done = False
            if done:
                pivot_col += 1
                break
    basis = []
    for c in range(cols):
        if all(m[r][c] == 0 for r in range(rows)):
            vec = tuple(u[r][c] for r in range(cols))
            if any(vec):
                basis.append(vec)
    return basis


# -- the periodic complex ----------------------------------------------------


class PeriodicComplex:
    def __init__(self, dim, lattice, cells):
        if dim < 1:
            raise InputError("dimension must be positive")
        self.dim = dim
        lat = []
        for g in lattice:
            g = tuple(int(t) for t in g)
            if len(g) != dim:
                raise InputError(f"lattice generator {g} has wrong dimension")
            if not any(g):
                raise InputError("zero lattice generator")
            lat.append(g)
        self.lattice = tuple(lat)
        self._solver = _rational_solver(self.lattice, dim)

        cs = []
        for c in cells:
            c = tuple(int(t) for t in c)
            if len(c) != dim:
                raise InputError(f"cell {c} has wrong dimension")
            cs.append(c)
        if not cs:
            raise InputError("at least one cell is required")
        # dedup cells equivalent mod the lattice
        uniq = []
        for c in cs:
            if not any(self.lattice_point(tuple(a - b for a, b in zip(c, d))) for d in uniq):
                uniq.append(c)
        self.cells = tuple(sorted(uniq))
        self._member_cache = {}
        self._validated = None

    # exact membership -------------------------------------------------------

    def lattice_point(self, w):
        """True iff w is an integer combination of the lattice generators."""
        if not self.lattice:
            return not any(w)
        rows, den = self._solver
        coeffs = []
        for row in rows:
            num = sum(r * t for r, t in zip(row, w))
            if num % den:
                return False
            coeffs.append(num // den)
        # generators are independent but need not span: verify reconstruction
        for i in range(self.dim):
            if sum(a * g[i] for a, g in zip(coeffs, self.lattice)) != w[i]:
                return False
        return True

    def lattice_coeffs(self, w):
        """Integer coefficients of w in the lattice, or None."""
        if not self.lattice:
            return () if not any(w) else None
        rows, den = self._solver
        coeffs = []
        for row in rows:
            num = sum(r * t for r, t in zip(row, w))
            if num % den:
                return None
            coeffs.append(num // den)
        for i in range(self.dim):
            if sum(a * g[i] for a, g in zip(coeffs, self.lattice)) != w[i]:
                return None
        return tuple(coeffs)

    def is_member(self, v):
        v = tuple(int(t) for t in v)
        hit = self._member_cache.get(v)
        if hit is None:
            hit = any(
                self.lattice_point(tuple(a - b for a, b in zip(v, c)))
                for c in self.cells
            )
            if len(self._member_cache) < 2_000_000:
                self._member_cache[v] = hit
        return hit

    # geometry ----------------------------------------------------------------

    def base_radius(self):
        entries = [abs(t) for g in self.lattice for t in g]
        entries += [abs(t) for c in self.cells for t in c]
        return max(entries) if entries else 1

    def members_in_box(self, box):
        """Member vertices inside the box, enumerated through the lattice.

        For each cell, integer coefficient ranges are bounded by evaluating
        the exact rational solver on the box corners, so thin complexes
        (bounded in most axes) cost proportional to their actual member
        count, not the box volume.
        """
        if len(box) != self.dim:
            raise InputError("box has wrong dimension")
        box = [(int(lo), int(hi)) for lo, hi in box]
        for lo, hi in box:
            if lo > hi:
                raise InputError("empty box range")
        if not self.lattice:
            return sorted(c for c in self.cells
                          if all(lo <= t <= hi for t, (lo, hi) in zip(c, box)))
        rows, den = self._solver
        k = len(self.lattice)
        out = set()
        corners = list(iproduct(*[(lo, hi) for lo, hi in box]))
        for c in self.cells:
            bounds = []
            for r in range(k):
                vals = [
                    sum(rw * (w - cc) for rw, w, cc in zip(rows[r], corner, c))
                    for corner in corners
                ]
                lo = -(-min(vals) // den) - 1  # floor/ceil with slack 1
                hi = max(vals) // den + 1
                bounds.append(range(lo, hi + 1))
            for coeffs in iproduct(*bounds):
                v = tuple(
                    cc + sum(a * g[i] for a, g in zip(coeffs, self.lattice))
                    for i, cc in enumerate(c)
                )
                if all(lo <= t <= hi for t, (lo, hi) in zip(v, box)):
                    out.add(v)
        return sorted(out)

    def window(self, box):
        """Finite complex induced on the members inside the box.

        Vertex ids are coordinate strings; the complex carries `coords` and
        a wall -> (axis, offset) geometry table.
        """
        members = self.members_in_box(box)
        if not members:
            raise PreconditionError("box contains no member vertices")
        mset = set(members)
        ids = {v: ",".join(str(t) for t in v) for v in members}
        edges = []
        for v in members:
            for ax in range(self.dim):
                u = v[:ax] + (v[ax] + 1,) + v[ax + 1 :]
                if u in mset:
                    edges.append((ids[v], ids[u]))
        coords = {ids[v]: v for v in members}
        x = build_complex(list(ids.values()), edges, coords=coords)
        geometry = {}
        consistent = True
        for h in x.hyperplanes:
            seen = set()
            for k in h.edges:
                i, j = x.edge_list[k]
                a, b = x.coords[x.ids[i]], x.coords[x.ids[j]]
                ax = next(t for t in range(self.dim) if a[t] != b[t])
                seen.add((ax, min(a[ax], b[ax])))
            if len(seen) == 1:
                geometry[h.id] = seen.pop()
            else:
                consistent = False
        x.wall_geometry = geometry if consistent else None
        x.box = tuple((int(lo), int(hi)) for lo, hi in box)
        return x

    def centred_window(self, radius):
        return self.window(tuple((-radius, radius) for _ in range(self.dim)))

    def wall_active(self, axis, offset, radius=None):
        """True iff some edge crosses the wall {x_axis = offset + 1/2}.

        Scans a stabilised window: a window scan at R and at 2R must agree
        before the wall is declared inactive.
        """
        r = radius if radius is not None else 2 * self.base_radius() + 2
        for attempt in range(2):
            span = r * (attempt + 1) + abs(offset)
            for v in iproduct(*[range(-span, span + 1) for _ in range(self.dim - 1)]):
                w = v[:axis] + (offset,) + v[axis:]
                if self.is_member(w):
                    u = w[:axis] + (offset + 1,) + w[axis + 1 :]
                    if self.is_member(u):
                        return True
        return False

    def translate_invariant(self, vec):
        """True iff membership is invariant under translation by vec."""
        return all(
            self.is_member(tuple(a + b for a, b in zip(c, vec))) for c in self.cells
        ) and all(
            self.is_member(tuple(a - b for a, b in zip(c, vec))) for c in self.cells
        )

    def __repr__(self):
        return (
            f"PeriodicComplex(dim={self.dim}, rank={len(self.lattice)}, "
            f"{len(self.cells)} cells)"
        )


def product_complex(*factors):
    """Coordinate-concatenation product of periodic complexes."""
    if not factors:
        raise InputError("empty product")
    dim = sum(f.dim for f in factors)
    lattice = []
    offset = 0
    for f in factors:
        for g in f.lattice:
            vec = [0] * dim
            vec[offset : offset + f.dim] = list(g)
            lattice.append(tuple(vec))
        offset += f.dim
    cells = []
    for combo in iproduct(*[f.cells for f in factors]):
        cells.append(tuple(t for c in combo for t in c))
    return PeriodicComplex(dim, lattice, cells)


# -- stock shapes ------------------------------------------------------------


def integer_lattice(d):
    """Z^d."""
    gens = [tuple(int(i == j) for j in range(d)) for i in range(d)]
    return PeriodicComplex(d, gens, [tuple([0] * d)])


def square_chain():
    """Bi-infinite chain of unit squares meeting at corners: |x - y| <= 1."""
    return PeriodicComplex(2, [(1, 1)], [(0, 0), (1, 0), (0, 1)])


def bounded_square_times_line():
    """[0,1]^2 x Z."""
    return PeriodicComplex(
        3, [(0, 0, 1)], [(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0)]
    )


# -- validation ---------------------------------------------------------------


def validate_periodic(p, radius=None):
    """Window check of the three periodic-complex invariants.

    Connectivity, closure under the coordinatewise median, and graph distance
    equal to l1 distance, all checked on a window of twice the fundamental
    scale plus padding (the l1 check compares core pairs inside a padded
    window so boundary detours cannot fake a failure). Returns (ok, witness).
    """
    if p._validated is not None and radius is None:
        return p._validated
    r = radius if radius is not None else 2 * p.base_radius() + 2

    core = p.members_in_box(tuple((-r, r) for _ in range(p.dim)))
    if not core:
        result = (False, ("empty", r))
        p._validated = result
        return result

    pad = 2 * r
    padded = p.members_in_box(tuple((-pad, pad) for _ in range(p.dim)))
    idx = {v: i for i, v in enumerate(padded)}
    n = len(padded)
    rows, cols = [], []
    for v in padded:
        for ax in range(p.dim):
            u = v[:ax] + (v[ax] + 1,) + v[ax + 1 :]
            if u in idx:
                rows.append(idx[v])
                cols.append(idx[u])
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import dijkstra

    mat = csr_matrix(
        (np.ones(2 * len(rows), dtype=np.int8), (rows + cols, cols + rows)),
        shape=(n, n),
    )
    core_idx = [idx[v] for v in core]
    dmat = dijkstra(mat, unweighted=True, indices=core_idx)

    carr = np.array(core, dtype=np.int64)
    l1 = np.abs(carr[:, None, :] - carr[None, :, :]).sum(axis=2)
    dcore = dmat[:, core_idx]
    if np.isinf(dcore).any():
        i, j = np.argwhere(np.isinf(dcore))[0]
        result = (False, ("disconnected", core[i], core[j]))
        p._validated = result
        return result
    if (dcore.astype(np.int64) != l1).any():
        i, j = np.argwhere(dcore.astype(np.int64) != l1)[0]
        result = (
            False,
            ("not isometric", core[i], core[j], int(dcore[i, j]), int(l1[i, j])),
        )
        p._validated = result
        return result

    # median closure: anchor one point at a cell, translate the others
    pad_arr = np.array(padded, dtype=np.int64)
    member_set = set(padded)
    for c in p.cells:
        cv = np.array(c, dtype=np.int64)
        meds = np.median(
            np.stack(
                [
                    np.broadcast_to(cv, (len(core), len(core), p.dim)),
                    carr[:, None, :].repeat(len(core), axis=1),
                    carr[None, :, :].repeat(len(core), axis=0),
                ]
            ),
            axis=0,
        ).astype(np.int64)
        flat = meds.reshape(-1, p.dim)
        uniq = np.unique(flat, axis=0)
        for m in uniq:
            mt = tuple(int(t) for t in m)
            if not p.is_member(mt):
                bad = np.argwhere((meds == m).all(axis=2))[0]
                result = (
                    False,
                    ("median escapes", c, core[bad[0]], core[bad[1]], mt),
                )
                p._validated = result
                return result
    _ = pad_arr
    result = (True, None)
    if radius is None:
        p._validated = result
    return result


def ensure_periodic_valid(p):
    ok, witness = validate_periodic(p)
    if not ok:
        raise PreconditionError(f"periodic complex fails validation: {witness}")


# -- direction classes --------------------------------------------------------

INF = math.inf


class DirectionClass:
    """A point of the direction model: one coordinate per axis, each an
    integer or +-infinity; classes group by their infinite-coordinate
    pattern."""

    __slots__ = ("coords",)

    def __init__(self, coords):
        self.coords = tuple(
            c if c in (INF, -INF) else int(c) for c in coords
        )

    @property
    def pattern(self):
        return tuple(
            1 if c == INF else (-1 if c == -INF else 0) for c in self.coords
        )

    @property
    def is_bounded_class(self):
        return all(c not in (INF, -INF) for c in self.coords)

    def __eq__(self, other):
        return isinstance(other, DirectionClass) and self.coords == other.coords

    def __hash__(self):
        return hash(self.coords)

    def __repr__(self):
        parts = [
            "+inf" if c == INF else ("-inf" if c == -INF else str(c))
            for c in self.coords
        ]
        return "Direction(" + ",".join(parts) + ")"


def roller_directions(p, coeff_bound=12):
    """Direction classes realised by geodesic rays, one per sign pattern.

    A pattern is realised iff some integer combination of the lattice
    generators is strictly signed on its infinite axes and zero elsewhere
    (periodicity makes this exact; coefficients are searched up to
    coeff_bound, ample at desk scale). Exactly one returned class is bounded:
    the all-finite pattern of the complex itself.
    """
    ensure_periodic_valid(p)
    k = len(p.lattice)
    patterns = {tuple([0] * p.dim)}
    if k:
        for coeffs in iproduct(*[range(-coeff_bound, coeff_bound + 1)] * k):
            if not any(coeffs):
                continue
            t = tuple(
                sum(a * g[i] for a, g in zip(coeffs, p.lattice))
                for i in range(p.dim)
            )
            patterns.add(tuple(0 if x == 0 else (1 if x > 0 else -1) for x in t))
    base = p.cells[0]
    out = []
    for pat in sorted(patterns):
        coords = [
            INF if s > 0 else (-INF if s < 0 else base[i])
            for i, s in enumerate(pat)
        ]
        out.append(DirectionClass(coords))
    bounded = [d for d in out if d.is_bounded_class]
    if len(bounded) != 1:
        raise InvariantViolation("expected exactly one bounded direction class")
    return out


# -- affine isometries --------------------------------------------------------


class AffineIsometry:
    """v -> P v + b with P a signed permutation: target axis i reads
    (source_axis, sign) from perm[i]."""

    __slots__ = ("perm", "trans")

    def __init__(self, perm, trans):
        perm = tuple((int(a), int(s)) for a, s in perm)
        trans = tuple(int(t) for t in trans)
        d = len(perm)
        if len(trans) != d:
            raise InputError("translation has wrong dimension")
        if sorted(a for a, _ in perm) != list(range(d)):
            raise InputError("linear part is not a permutation of the axes")
        if any(s not in (-1, 1) for _, s in perm):
            raise InputError("signs must be +-1")
        self.perm = perm
        self.trans = trans

    @property
    def dim(self):
        return len(self.perm)

    @classmethod
    def identity(cls, d):
        return cls([(i, 1) for i in range(d)], [0] * d)

    @classmethod
    def translation(cls, vec):
        return cls([(i, 1) for i in range(len(vec))], vec)

    def apply(self, v):
        return tuple(
            s * v[a] + t for (a, s), t in zip(self.perm, self.trans)
        )

    def linear_apply(self, v):
        return tuple(s * v[a] for a, s in self.perm)

    def compose(self, other):
        """self after other: (self ∘ other)(v) = self(other(v))."""
        perm = []
        trans = []
        for (j, sg), bg in zip(self.perm, self.trans):
            a, sh = other.perm[j]
            perm.append((a, sg * sh))
            trans.append(sg * other.trans[j] + bg)
        return AffineIsometry(perm, trans)

    def inverse(self):
        d = self.dim
        perm = [None] * d
        trans = [0] * d
        for i, (a, s) in enumerate(self.perm):
            perm[a] = (i, s)
            trans[a] = -s * self.trans[i]
        return AffineIsometry(perm, trans)

    def power(self, n):
        if n == 0:
            return AffineIsometry.identity(self.dim)
        base = self if n > 0 else self.inverse()
        out = base
        for _ in range(abs(n) - 1):
            out = out.compose(base)
        return out

    def linear_order(self):
        """Order of the signed permutation part."""
        k = 1
        cur = AffineIsometry(self.perm, [0] * self.dim)
        step = AffineIsometry(self.perm, [0] * self.dim)
        ident = [(i, 1) for i in range(self.dim)]
        while cur.perm != tuple(ident):
            cur = cur.compose(step)
            k += 1
            if k > 4096:
                raise InvariantViolation("linear part order overflow")
        return k

    def is_identity(self):
        return self.perm == tuple((i, 1) for i in range(self.dim)) and not any(
            self.trans
        )

    def wall_image(self, wall):
        """Image of the wall {x_axis = offset + 1/2} as an (axis, offset)."""
        axis, offset = wall
        for i, (a, s) in enumerate(self.perm):
            if a == axis:
                if s == 1:
                    return (i, offset + self.trans[i])
                return (i, -offset - 1 + self.trans[i])
        raise InvariantViolation("axis not found")

    def __eq__(self, other):
        return (
            isinstance(other, AffineIsometry)
            and self.perm == other.perm
            and self.trans == other.trans
        )

    def __hash__(self):
        return hash((self.perm, self.trans))

    def __repr__(self):
        return f"AffineIsometry(perm={self.perm}, trans={self.trans})"

    def to_json(self):
        return {"perm": [[a, s] for a, s in self.perm], "trans": list(self.trans)}

    @classmethod
    def from_json(cls, data):
        try:
            return cls(
                [(int(a), int(s)) for a, s in data["perm"]],
                [int(t) for t in data["trans"]],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad isometry description: {exc}") from None


def check_symmetry(p, g, verbose=False):
    """Does g map the periodic complex onto itself? Returns (ok, witness).

    Sufficient and necessary given periodicity: the lattice is preserved in
    both directions and every cell maps (both ways) to a member.
    """
    if g.dim != p.dim:
        return (False, ("dimension", g.dim, p.dim))
    ginv = g.inverse()
    for gen in p.lattice:
        if not p.lattice_point(g.linear_apply(gen)):
            return (False, ("lattice", gen, g.linear_apply(gen)))
        if not p.lattice_point(ginv.linear_apply(gen)):
            return (False, ("lattice-inverse", gen, ginv.linear_apply(gen)))
    for c in p.cells:
        if not p.is_member(g.apply(c)):
            return (False, ("cell", c, g.apply(c)))
        if not p.is_member(ginv.apply(c)):
            return (False, ("cell-inverse", c, ginv.apply(c)))
    return (True, None)


def ensure_symmetry(p, g):
    ok, witness = check_symmetry(p, g)
    if not ok:
        raise PreconditionError(f"not a symmetry of the complex: {witness}")
