"""Horoboundary cocycles: exact tree-end and L1 models, shadows, projections.

A point of the horocompactification is a 1-Lipschitz cocycle
c(x,z) = c(x,y) + c(y,z).  Every cocycle here is represented by a potential
h with c(x,y) = h(x) - h(y), which makes the cocycle identity hold exactly
by construction; the content of each variant is its exact potential:

* ``InteriorCocycle(z)``      h(x) = d(x,z)       (the classical b_z)
* ``TreeEnd``                 h(x) = |x| - 2 * (common prefix with the end)
* ``L1Horofunction``          per-coordinate linear or tent potentials
* ``WindowCocycle``           an explicit finite table, window-relative

Sign convention (matching b_z(x,y) = d(x,z) - d(y,z) in the limit): along a
geodesic toward the boundary point, c(gamma(s), gamma(t)) = t - s, and the
potential h decreases at unit speed.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field

from .errors import HorizonExhaustedError, WindowError, WindowRimError
from .groups import FreeAbelianL1, FreeGroup, MarkedGroup, format_word
from .contraction import SubsetWindow, find_contracting_tail


class Cocycle:
    variant = "ABSTRACT"
    exact = False

    def __init__(self, group: MarkedGroup):
        self.group = group

    def potential(self, x):
        raise NotImplementedError

    def evaluate(self, x, y):
        return self.potential(x) - self.potential(y)

    def to_jsonable(self):
        raise NotImplementedError


class InteriorCocycle(Cocycle):
    """b_z(x, y) = d(x, z) - d(y, z) for an interior point z."""

    variant = "INTERIOR"
    exact = True

    def __init__(self, group, z):
        super().__init__(group)
        self.point = z

    def potential(self, x):
        return self.group.distance(x, self.point)

    def __repr__(self):
        return f"Interior({self.group.show(self.point)})"

    def to_jsonable(self):
        return {"variant": self.variant, "point": self.group.show(self.point)}


def _common_prefix_len(u, w):
    n = 0
    for a, b in zip(u, w):
        if a != b:
            break
        n += 1
    return n


class TreeEnd(Cocycle):
    """An end of a free group's Cayley tree, as a lazily extended reduced word.

    ``prefix(n)`` returns the first n letters; extension is memoized behind a
    lock (single writer, safe concurrent reads).  Ends built from a power
    h^infinity carry an exact eventually-periodic descriptor (head, cycle)
    which makes equality decidable.
    """

    variant = "TREE_END"
    exact = True

    def __init__(self, group: FreeGroup, prefix_fn, periodic=None):
        if not isinstance(group, FreeGroup):
            raise ValueError("tree ends only exist for free groups")
        super().__init__(group)
        self._fn = prefix_fn
        self._letters = ()
        self._lock = threading.Lock()
        self.periodic = periodic  # (head letters, cycle letters) or None

    @classmethod
    def from_letters_fn(cls, group, fn):
        return cls(group, fn)

    @classmethod
    def from_power(cls, group, h):
        """The end lim h^n . o (h nontrivial); exact periodic description."""
        if h == group.identity:
            raise ValueError("the identity has no axis end")
        head = list(h)
        cycle = list(h)
        # cyclic reduction: h = p q p^-1 with q cyclically reduced
        p = []
        while len(cycle) >= 2 and cycle[0] == -cycle[-1]:
            p.append(cycle[0])
            cycle = cycle[1:-1]
        if not cycle:
            raise ValueError("torsion element has no end")
        head = tuple(p)
        cycle = tuple(cycle)

        def fn(n, head=head, cycle=cycle):
            out = list(head)
            while len(out) < n:
                out.extend(cycle)
            return tuple(out[:n])

        return cls(group, fn, periodic=(head, cycle))

    def translated(self, u):
        """The end u . xi (left translation)."""
        group = self.group

        def fn(n, u=u, xi=self):
            raw = group.multiply(u, xi.prefix(n + len(u)))
            return raw[:n]

        periodic = None
        if self.periodic is not None:
            head, cycle = self.periodic
            w = list(u)
            w = group.from_letters(tuple(w) + head + cycle * (len(u) // max(1, len(cycle)) + 2))
            # peel whole trailing cycles so the head stays short
            w = list(w)
            while len(w) >= len(cycle) and tuple(w[-len(cycle):]) == tuple(cycle):
                w = w[: -len(cycle)]
            periodic = (tuple(w), cycle)
        return TreeEnd(group, fn, periodic)

    def prefix(self, n):
        if len(self._letters) >= n:
            return self._letters[:n]
        with self._lock:
            if len(self._letters) < n:
                letters = tuple(self._fn(n))
                if len(letters) < n:
                    raise HorizonExhaustedError("end description exhausted")
                if letters[: len(self._letters)] != self._letters:
                    raise ValueError("inconsistent end prefix extension")
                self._letters = letters
        return self._letters[:n]

    def common_with(self, word):
        return _common_prefix_len(word, self.prefix(len(word)))

    def potential(self, x):
        return len(x) - 2 * self.common_with(x)

    def __repr__(self):
        shown = format_word(self.prefix(min(8, len(self._letters) or 8)), self.group.labels)
        return f"TreeEnd({shown}...)"

    def to_jsonable(self):
        out = {"variant": self.variant}
        if self.periodic is not None:
            head, cycle = self.periodic
            out["head"] = format_word(head, self.group.labels)
            out["cycle"] = format_word(cycle, self.group.labels)
        else:
            depth = max(len(self._letters), 16)
            out["prefix"] = format_word(self.prefix(depth), self.group.labels)
            out["prefix_depth"] = depth
            out["truncated"] = True
        return out


def ends_equal(e1: TreeEnd, e2: TreeEnd, horizon: int = 128):
    """Decide equality of two ends; exact when both are eventually periodic.

    Returns (equal, exact): with periodic descriptors a Fine-Wilf depth bound
    makes the answer exact; otherwise agreement is only checked to
    ``horizon`` and exact=False on agreement.
    """
    if e1.periodic is not None and e2.periodic is not None:
        h1, c1 = e1.periodic
        h2, c2 = e2.periodic
        depth = max(len(h1), len(h2)) + len(c1) + len(c2) + 2
        return e1.prefix(depth) == e2.prefix(depth), True
    if e1.prefix(horizon) == e2.prefix(horizon):
        return True, False
    return False, True


class L1Horofunction(Cocycle):
    """Horofunction of an L1 lattice: one mode per coordinate.

    Modes: ("inf+",) potential -x_i, ("inf-",) potential +x_i, or
    ("tent", a) potential |x_i - a|.  A point with all-tent modes is an
    interior point and is rejected here.
    """

    variant = "L1_HORO"
    exact = True

    def __init__(self, group: FreeAbelianL1, modes):
        if not isinstance(group, FreeAbelianL1):
            raise ValueError("L1 horofunctions need an L1 lattice group")
        super().__init__(group)
        modes = tuple(tuple(m) for m in modes)
        if len(modes) != group.dim:
            raise ValueError("one mode per coordinate required")
        for m in modes:
            if m[0] not in ("inf+", "inf-", "tent"):
                raise ValueError(f"unknown coordinate mode {m!r}")
        if all(m[0] == "tent" for m in modes):
            raise ValueError("all-tent modes describe an interior point")
        self.modes = modes

    def potential(self, x):
        total = 0
        for xi, mode in zip(x, self.modes):
            if mode[0] == "inf+":
                total -= xi
            elif mode[0] == "inf-":
                total += xi
            else:
                total += abs(xi - mode[1])
        return total

    def __repr__(self):
        return f"L1Horofunction({self.modes})"

    def to_jsonable(self):
        return {"variant": self.variant, "modes": [list(m) for m in self.modes]}


class WindowCocycle(Cocycle):
    """A cocycle known only on a finite window, given by its potential table."""

    variant = "WINDOW"
    exact = False

    def __init__(self, group, potentials: dict, radius: int, flags=()):
        super().__init__(group)
        self.potentials = dict(potentials)
        self.radius = radius
        self.flags = tuple(flags)

    def potential(self, x):
        try:
            return self.potentials[x]
        except KeyError:
            raise WindowError(f"{self.group.show(x)} outside the window (radius {self.radius})")

    def to_jsonable(self):
        return {
            "variant": self.variant,
            "radius": self.radius,
            "flags": list(self.flags),
            "table": {self.group.show(x): v for x, v in sorted(
                self.potentials.items(), key=lambda kv: (self.group.length(kv[0]), repr(kv[0]))
            )},
        }


def evaluate(c: Cocycle, x, y):
    """c(x, y); exact integers on the exact models."""
    return c.evaluate(x, y)


# ---------------------------------------------------------------------------
# limits of interior points
# ---------------------------------------------------------------------------


def boundary_limit(
    group: MarkedGroup,
    sequence,
    horizon: int = 64,
    stability: int = 3,
    window_radius: int = 3,
):
    """Classify the limit of a point sequence in the horocompactification.

    ``sequence`` is indexable (n -> element).  Exact outcomes: a constant
    sequence is INTERIOR; in the tree model stabilizing prefixes give a
    TREE_END; in the L1 model a per-coordinate divergence pattern gives an
    L1_HORO.  Otherwise a WINDOW cocycle built from the last probed term is
    returned, flagged ``no_limit_certified``.  A bounded non-constant
    sequence exhausts the horizon instead.
    """
    seq = sequence if callable(sequence) else (lambda n, s=sequence: s[n])
    probe = [group.normal_form(seq(n)) for n in range(min(horizon, 12))]
    if all(z == probe[0] for z in probe):
        return InteriorCocycle(group, probe[0])

    if isinstance(group, FreeGroup):
        return _tree_limit(group, seq, horizon, stability, window_radius)
    if isinstance(group, FreeAbelianL1):
        return _lattice_limit(group, seq, horizon, stability, window_radius)

    last = group.normal_form(seq(horizon - 1))
    return _window_fallback(group, last, window_radius, ("no_limit_certified",))


def _window_fallback(group, z, radius, flags):
    from .spaces import enumerate_ball

    ball = enumerate_ball(group, radius)
    base = group.distance(group.identity, z)
    pots = {v: group.distance(v, z) - base for v in ball.elements}
    return WindowCocycle(group, pots, radius, flags)


def _tree_limit(group, seq, horizon, stability, window_radius):
    terms = []

    def term(n):
        while len(terms) <= n:
            if len(terms) >= horizon:
                raise HorizonExhaustedError(f"no classification within horizon {horizon}")
            terms.append(group.normal_form(seq(len(terms))))
        return terms[n]

    def stable_prefix_at(depth):
        # first run of `stability` consecutive terms sharing the depth prefix
        m = 0
        while True:
            run = [term(m + i) for i in range(stability)]
            if all(len(w) >= depth + 1 for w in run) and len(
                {w[:depth] for w in run}
            ) == 1:
                return run[0][:depth]
            m += 1
            if m + stability > horizon:
                raise HorizonExhaustedError(
                    f"prefixes at depth {depth} do not stabilize within horizon {horizon}"
                )

    try:
        stable_prefix_at(1)
    except HorizonExhaustedError:
        lengths = [len(term(i)) for i in range(min(horizon, 16))]
        if max(lengths) <= window_radius:
            raise
        return _window_fallback(group, term(min(horizon, 16) - 1), window_radius,
                                ("no_limit_certified",))

    def fn(n):
        return stable_prefix_at(n)

    return TreeEnd(group, fn)


def _lattice_limit(group, seq, horizon, stability, window_radius):
    n_probe = min(horizon, 24)
    terms = [group.normal_form(seq(n)) for n in range(n_probe)]
    tail = terms[-stability:]
    modes = []
    certified = True
    for i in range(group.dim):
        coords = [t[i] for t in tail]
        full = [t[i] for t in terms]
        if all(c == coords[0] for c in coords) and len(set(full[-2 * stability:])) <= stability:
            modes.append(("tent", coords[0]))
        elif all(b > a for a, b in zip(coords, coords[1:])):
            modes.append(("inf+",))
        elif all(b < a for a, b in zip(coords, coords[1:])):
            modes.append(("inf-",))
        else:
            certified = False
            break
    if certified and any(m[0] != "tent" for m in modes):
        return L1Horofunction(group, modes)
    if certified:
        # all coordinates stabilized: interior limit
        return InteriorCocycle(group, tail[-1])
    if max(group.length(t) for t in terms) <= window_radius:
        raise HorizonExhaustedError("sequence stays bounded but is not constant")
    return _window_fallback(group, terms[-1], window_radius, ("no_limit_certified",))


# ---------------------------------------------------------------------------
# gradient rays
# ---------------------------------------------------------------------------


@dataclass
class GradientRay:
    cocycle: Cocycle
    vertices: list
    eps: float

    def __len__(self):
        return len(self.vertices)


def gradient_ray(c: Cocycle, x, length: int, tol: float = 1e-9) -> GradientRay:
    """Greedy unit-speed descent of the cocycle from x, generator-order ties.

    At each vertex the neighbor maximizing c(current, next) is chosen; the
    realized quality eps = max (t - s) - c(gamma(s), gamma(t)) is reported
    (0 on the exact tree/L1 models).
    """
    group = c.group
    if isinstance(c, InteriorCocycle) and group.distance(x, c.point) < length:
        raise ValueError("interior cocycle: requested ray outruns the target point")
    vertices = [x]
    current = x
    for _ in range(length):
        best = None
        best_val = None
        for _, s in group.alphabet():
            nxt = group.multiply(current, s)
            try:
                val = c.evaluate(current, nxt)
            except WindowError:
                continue
            if best_val is None or val > best_val + tol:
                best, best_val = nxt, val
        if best is None or best_val < 1 - tol and isinstance(c, WindowCocycle):
            raise WindowRimError(
                "no descending neighbor within the window", partial=vertices
            )
        vertices.append(best)
        current = best
    eps = 0.0
    pots = [c.potential(v) for v in vertices]
    for s in range(len(vertices)):
        for t in range(s + 1, len(vertices)):
            val = pots[s] - pots[t]
            eps = max(eps, (t - s) - val)
    return GradientRay(c, vertices, eps)


# ---------------------------------------------------------------------------
# Gromov products and shadows
# ---------------------------------------------------------------------------


def gromov_product(group: MarkedGroup, x, c: Cocycle, y):
    """<x, c>_y = (d(x,y) + c(y,x)) / 2; lies in [0, d(x,y)]."""
    return 0.5 * (group.distance(x, y) + c.evaluate(y, x))


@dataclass(frozen=True)
class Shadow:
    """O_x(y, r): cocycles whose Gromov product <x, .>_y is at most r."""

    viewpoint: object
    target: object
    radius: float


def shadow_contains(group: MarkedGroup, shadow: Shadow, c: Cocycle, tol: float = 1e-9):
    """(membership, exact Gromov product value)."""
    prod = gromov_product(group, shadow.viewpoint, c, shadow.target)
    return prod <= shadow.radius + tol, prod


# ---------------------------------------------------------------------------
# cocycle projections onto windows
# ---------------------------------------------------------------------------


@dataclass
class ProjectionResult:
    status: str  # "points" | "at-infinity" | "undetermined"
    points: tuple
    side: str | None = None
    values: tuple = ()
    window_relative: bool = True

    @property
    def at_infinity(self):
        return self.status == "at-infinity"


def project_cocycle(c: Cocycle, window: SubsetWindow, tol: float = 1e-9) -> ProjectionResult:
    """Points q of the window with c(q, y) <= 0 for all window points y.

    Since c(q, y) = h(q) - h(y), q is admissible exactly when its potential
    attains the window minimum; ``values`` reports the per-point score
    max_y c(q, y).  When no admissible point exists and the score decreases
    strictly monotonically toward a window rim (over the trailing ceil(W/3)
    entries, W the window radius), the projection is declared AT-INFINITY on
    that side -- a window-relative proxy for the boundary-at-infinity
    condition.
    """
    pts = window.points
    n = len(pts)
    pots = [c.potential(q) for q in pts]
    low = min(pots)
    scores = tuple(p - low for p in pots)
    adm_idx = [i for i, s in enumerate(scores) if s <= tol]
    admissible = tuple(pts[i] for i in adm_idx)
    if any(0 < i < n - 1 for i in adm_idx):
        return ProjectionResult("points", admissible, None, scores)
    # minimum only at a rim: a strictly monotone score trend toward that rim
    # means the true projection sits at or beyond the window edge
    W = window.window_radius if window.window_radius else max(1, n // 2)
    k = max(2, -(-W // 3))  # ceil(W/3), at least 2
    if n >= k:
        if (n - 1) in adm_idx:
            right = scores[-k:]
            if all(b < a - tol for a, b in zip(right, right[1:])):
                return ProjectionResult("at-infinity", (), "positive", scores)
        if 0 in adm_idx:
            left = scores[:k]
            if all(a < b - tol for a, b in zip(left, left[1:])):
                return ProjectionResult("at-infinity", (), "negative", scores)
    if admissible:
        return ProjectionResult("points", admissible, None, scores)
    return ProjectionResult("undetermined", (), None, scores)


# ---------------------------------------------------------------------------
# reduced equivalence
# ---------------------------------------------------------------------------

EQUIVALENT = "EQUIVALENT"
DISTINCT = "DISTINCT"
UNDECIDED = "UNDECIDED"


@dataclass
class EquivalenceResult:
    status: str
    sup_bound: float | None = None
    witness: tuple | None = None
    note: str = ""
    exact: bool = True


def reduced_equiv(c1: Cocycle, c2: Cocycle, horizon: int = 128) -> EquivalenceResult:
    """Bounded-difference equivalence of two cocycles (the reduced relation).

    Exact decisions for pairs of tree ends (equality) and pairs of L1
    horofunctions (per-coordinate mode comparison with an exact sup bound).
    WINDOW variants yield UNDECIDED with the sup over the shared window.
    """
    if c1 is c2:
        return EquivalenceResult(EQUIVALENT, 0.0, note="identical cocycle object")
    if isinstance(c1, WindowCocycle) or isinstance(c2, WindowCocycle):
        shared = None
        if isinstance(c1, WindowCocycle):
            shared = set(c1.potentials)
        if isinstance(c2, WindowCocycle):
            dom2 = set(c2.potentials)
            shared = dom2 if shared is None else (shared & dom2)
        diffs = [c1.potential(x) - c2.potential(x) for x in shared]
        sup = max(diffs) - min(diffs) if diffs else 0.0
        return EquivalenceResult(UNDECIDED, sup, note="window-restricted data only", exact=False)
    if isinstance(c1, InteriorCocycle) and isinstance(c2, InteriorCocycle):
        if c1.point == c2.point:
            return EquivalenceResult(EQUIVALENT, 0.0)
        d = c1.group.distance(c1.point, c2.point)
        return EquivalenceResult(
            DISTINCT, None, (c1.point, c2.point),
            note=f"interior points are equivalent only when equal (difference bounded by {2*d})",
        )
    if isinstance(c1, InteriorCocycle) != isinstance(c2, InteriorCocycle):
        return EquivalenceResult(DISTINCT, None, None,
                                 note="interior and boundary cocycles are never equivalent")
    if isinstance(c1, TreeEnd) and isinstance(c2, TreeEnd):
        eq, exact = ends_equal(c1, c2, horizon)
        if eq:
            note = "" if exact else f"prefixes agree to depth {horizon} (no periodic descriptors)"
            return EquivalenceResult(EQUIVALENT, 0.0, note=note, exact=exact)
        depth = _common_prefix_len(c1.prefix(horizon), c2.prefix(horizon))
        wdeep = c1.group.from_letters(c1.prefix(depth + 3))
        gap = abs(c1.evaluate(c1.group.identity, wdeep) - c2.evaluate(c1.group.identity, wdeep))
        return EquivalenceResult(
            DISTINCT, None, (c1.group.identity, wdeep),
            note=f"difference {gap} at the witness, unbounded along the first end",
        )
    if isinstance(c1, L1Horofunction) and isinstance(c2, L1Horofunction):
        sup = 0
        for i, (m1, m2) in enumerate(zip(c1.modes, c2.modes)):
            if m1[0] != m2[0]:
                e = tuple(10 if j == i else 0 for j in range(c1.group.dim))
                sign = 1
                if "inf-" in (m1[0], m2[0]):
                    sign = -1
                witness = tuple(sign * v for v in e)
                return EquivalenceResult(
                    DISTINCT, None, (c1.group.identity, witness),
                    note=f"coordinate {i} modes differ ({m1[0]} vs {m2[0]})",
                )
            if m1[0] == "tent":
                sup += abs(m1[1] - m2[1])
        return EquivalenceResult(EQUIVALENT, float(sup))
    raise ValueError(f"cannot compare variants {c1.variant} and {c2.variant}")


# ---------------------------------------------------------------------------
# limit set membership
# ---------------------------------------------------------------------------

RADIAL = "radial"
CONTRACTING = "contracting"


@dataclass
class MembershipRow:
    threshold: int
    witness: object | None
    distance: int | None
    product: float | None
    tail_ok: bool | None


@dataclass
class MembershipReport:
    kind: str
    r: float
    horizon: int
    rows: list
    alpha: int | None = None
    L: int | None = None

    @property
    def certified(self):
        return all(row.witness is not None for row in self.rows)

    def failures(self):
        return [row.threshold for row in self.rows if row.witness is None]


def limit_set_membership(
    c: Cocycle,
    kind: str,
    r: float,
    horizon: int,
    alpha: int | None = None,
    L: int | None = None,
    check_window: int = 2,
) -> MembershipReport:
    """Witness shadows O_o(g.o, r) hitting c at every threshold up to the horizon.

    For each t <= horizon a witness g must satisfy d(o, g.o) >= t and
    c in O_o(g.o, r); the contracting kind additionally demands a certified
    (alpha, L) tail for (o, g.o).  Witness candidates: end prefixes (tree
    model) or steps along the divergent coordinates (L1 model); interior
    cocycles fail beyond their distance.  Certification is horizon-relative.
    """
    if kind not in (RADIAL, CONTRACTING):
        raise ValueError("kind must be 'radial' or 'contracting'")
    if kind == CONTRACTING and (alpha is None or L is None):
        raise ValueError("contracting membership needs alpha and L")
    group = c.group
    o = group.identity
    rows = []
    memo = {}
    for t in range(horizon + 1):
        witness = None
        dist = prod = None
        tail_ok = None
        for g in _witness_candidates(c, t, horizon):
            d = group.length(g)
            if d < t:
                continue
            p = gromov_product(group, o, c, g)
            if p > r + 1e-9:
                continue
            if kind == CONTRACTING:
                wit = find_contracting_tail(group, g, alpha, L, check_window, _memo=memo)
                if wit is None:
                    continue
                tail_ok = True
            witness, dist, prod = g, d, p
            break
        rows.append(MembershipRow(t, witness, dist, prod, tail_ok))
    return MembershipReport(kind, r, horizon, rows, alpha, L)


def _witness_candidates(c: Cocycle, t: int, horizon: int):
    group = c.group
    if isinstance(c, InteriorCocycle):
        yield c.point
        return
    if isinstance(c, TreeEnd):
        for k in range(t, t + max(4, horizon) + 1):
            yield group.from_letters(c.prefix(k))
        return
    if isinstance(c, L1Horofunction):
        direction = []
        for mode in c.modes:
            if mode[0] == "inf+":
                direction.append(1)
            elif mode[0] == "inf-":
                direction.append(-1)
            else:
                direction.append(0)
        step = sum(abs(v) for v in direction)
        if step == 0:
            return
        m0 = -(-t // step)
        for m in range(m0, m0 + 4):
            yield tuple(m * v for v in direction)
        return
    raise ValueError("witness search needs an exact-model cocycle")


# ---------------------------------------------------------------------------
# transverse axes
# ---------------------------------------------------------------------------


def transverse_pair_check(group: MarkedGroup, h, u, horizon: int = 128) -> bool:
    """True when the axis of h and its u-translate share no boundary-at-infinity point.

    Tree model: the boundary at infinity of the <h>-axis is its two ends
    h^{+inf}, h^{-inf}; the translate's are u.h^{+-inf}; transversality is
    emptiness of the intersection (exact via periodic descriptors).  L1
    model: an axis determines its boundary pattern by direction only, which
    translation preserves, so the check is always False there.
    """
    if isinstance(group, FreeGroup):
        plus = TreeEnd.from_power(group, h)
        minus = TreeEnd.from_power(group, group.inverse(h))
        ends_a = [plus, minus]
        ends_ua = [e.translated(u) for e in ends_a]
        for e1 in ends_a:
            for e2 in ends_ua:
                eq, _ = ends_equal(e1, e2, horizon)
                if eq:
                    return False
        return True
    if isinstance(group, FreeAbelianL1):
        return False  # parallel axes share their boundary pattern
    raise ValueError("transverse check implemented for the exact models only")
