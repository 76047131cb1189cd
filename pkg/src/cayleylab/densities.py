"""Conformal density machinery: weighted/twisted approximants and exact tree model.

Two representations carry everything:

* ``AtomicDensity`` -- the finitely supported approximant with atom weights
  theta(d(x, g.o)) e^{chi(g)} e^{-s d(x, g.o)} / Q(s, R), kept in the log
  domain (underflow-safe) and normalized so the basepoint-o member of the
  family has total mass one;
* ``TreeEndDensity`` -- the exact limit density on the end boundary of a
  free group, with cylinder masses as exact rationals (conformality and the
  Shadow Lemma ratio are then identities, not approximations).

The checkers (conformality, Harnack, Shadow Lemma, annulus bounds, Vitali
selection, Kochen-Stone) report measured constants and assert only what the
theory guarantees unconditionally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .boundary import InteriorCocycle, Shadow, gromov_product
from .errors import CayleyLabError, OutOfRangeError
from .groups import FreeGroup, MarkedGroup
from .spaces import Ball, enumerate_ball

# ---------------------------------------------------------------------------
# weights and quasi-morphisms
# ---------------------------------------------------------------------------


class PattersonWeight:
    """Slowly growing weight theta, as a piecewise-log-linear table.

    ``knots`` are (t, ln theta(t)) pairs with increasing t; between knots the
    log-value is interpolated linearly, before the first knot it is constant,
    after the last it extrapolates with the final slope.  The slow-growth
    property (for each eps a threshold t0 with
    theta(t+u) <= e^{eps u} theta(t) for t >= t0) holds iff the slopes beyond
    t0 are <= eps; ``slow_growth_threshold`` finds the smallest such knot.
    """

    def __init__(self, knots=None):
        if not knots:
            knots = [(0.0, 0.0)]
        ts = [float(t) for t, _ in knots]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("knot abscissae must be strictly increasing")
        self.knots = [(float(t), float(v)) for t, v in knots]

    @classmethod
    def one(cls):
        return cls([(0.0, 0.0)])

    @classmethod
    def from_function(cls, fn, ts):
        return cls([(t, math.log(fn(t))) for t in ts])

    def log_value(self, t: float) -> float:
        ks = self.knots
        if t <= ks[0][0]:
            return ks[0][1]
        for (t0, v0), (t1, v1) in zip(ks, ks[1:]):
            if t <= t1:
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        if len(ks) == 1:
            return ks[0][1]
        (t0, v0), (t1, v1) = ks[-2], ks[-1]
        slope = (v1 - v0) / (t1 - t0)
        return v1 + slope * (t - ks[-1][0])

    def __call__(self, t: float) -> float:
        return math.exp(self.log_value(t))

    def slopes(self):
        out = []
        for (t0, v0), (t1, v1) in zip(self.knots, self.knots[1:]):
            out.append((t0, t1, (v1 - v0) / (t1 - t0)))
        return out

    def slow_growth_threshold(self, eps: float):
        """Smallest knot t0 with all slopes <= eps beyond it, or None."""
        if len(self.knots) == 1:
            return self.knots[0][0]
        segs = self.slopes()
        if segs[-1][2] > eps:
            return None
        t0 = self.knots[0][0]
        for a, b, slope in reversed(segs):
            if slope > eps:
                return b
        return t0

    def check_slow_growth(self, eps_grid=(0.5, 0.1, 0.02)) -> bool:
        return all(self.slow_growth_threshold(e) is not None for e in eps_grid)


class QuasiMorphism:
    """A function on group elements with uniformly bounded defect.

    ``defect`` is the claimed bound for |chi(g) + chi(h) - chi(gh)|;
    ``measured_defect`` evaluates it on sample pairs.
    """

    def __init__(self, fn, defect: float, label: str = "chi"):
        self.fn = fn
        self.defect = float(defect)
        self.label = label

    def __call__(self, g):
        return self.fn(g)

    @classmethod
    def zero(cls):
        return cls(lambda g: 0.0, 0.0, "0")

    @classmethod
    def exponent_sum(cls, group: MarkedGroup, coefficients):
        """Homomorphism sum_i c_i * (exponent sum of generator i); defect 0."""
        coeffs = list(coefficients)

        def fn(g):
            total = 0.0
            for l in g:
                total += coeffs[abs(l) - 1] * (1 if l > 0 else -1)
            return total

        label = "+".join(f"{c}*e_{i}" for i, c in enumerate(coeffs) if c)
        return cls(fn, 0.0, label or "0")

    @classmethod
    def brooks_counting(cls, group: FreeGroup, word, defect=None):
        """Occurrences of ``word`` minus occurrences of its inverse (Brooks)."""
        w = tuple(word)
        wi = group.inverse(w)
        k = len(w)

        def count(g, pattern):
            return sum(1 for i in range(len(g) - k + 1) if g[i : i + k] == pattern)

        def fn(g):
            return float(count(g, w) - count(g, wi))

        if defect is None:
            defect = 6.0 * k  # coarse a priori bound; measure for sharp values
        return cls(fn, defect, "brooks(" + group.show(w) + ")")

    def measured_defect(self, group: MarkedGroup, elements) -> float:
        worst = 0.0
        vals = {g: self.fn(g) for g in elements}
        for g in elements:
            for h in elements:
                gh = group.multiply(g, h)
                v = vals.get(gh)
                if v is None:
                    v = self.fn(gh)
                worst = max(worst, abs(vals[g] + vals[h] - v))
        return worst


# ---------------------------------------------------------------------------
# atomic approximants
# ---------------------------------------------------------------------------


def _logsumexp(arr):
    if len(arr) == 0:
        return -math.inf
    a = np.asarray(arr, dtype=float)
    m = a.max()
    if m == -math.inf:
        return -math.inf
    return float(m + np.log(np.exp(a - m).sum()))


class AtomicDensity:
    """Finitely supported member of a conformal-density family.

    The family is determined by (s, R, theta, chi) plus a left shift gamma
    accumulated by pushforwards; the member with basepoint x puts log-weight

        ln theta(d(x, u.o)) + chi(gamma u) - s d(x, u.o) - ln Q - ln F

    on each support atom u.  F is the product of norms collected by
    pushforwards (1 for a fresh approximant), Q normalizes the basepoint-o
    approximant to mass one.
    """

    def __init__(self, group, s, radius, theta, chi, basepoint, support,
                 log_q, shift=None, log_norm_factor=0.0):
        self.group = group
        self.s = float(s)
        self.radius = radius
        self.theta = theta
        self.chi = chi
        self.basepoint = basepoint
        self.support = tuple(support)
        self.log_q = log_q
        self.shift = shift if shift is not None else group.identity
        self.log_norm_factor = log_norm_factor
        self._log_masses = None

    def _atom_log_weight(self, x, u):
        d = self.group.distance(x, u)
        tw = self.chi(self.group.multiply(self.shift, u))
        return (
            self.theta.log_value(d) + tw - self.s * d - self.log_q - self.log_norm_factor
        )

    def log_masses(self):
        if self._log_masses is None:
            x = self.basepoint
            self._log_masses = {u: self._atom_log_weight(x, u) for u in self.support}
        return self._log_masses

    def atom_mass(self, u) -> float:
        return math.exp(self.log_masses()[u])

    def total_mass(self) -> float:
        return math.exp(_logsumexp(list(self.log_masses().values())))

    def norm_at(self, y) -> float:
        """Total mass of the family member based at y (same normalizer)."""
        vals = [self._atom_log_weight(y, u) for u in self.support]
        return math.exp(_logsumexp(vals))

    def mass_of(self, atoms) -> float:
        lm = self.log_masses()
        vals = [lm[u] for u in atoms if u in lm]
        return math.exp(_logsumexp(vals)) if vals else 0.0

    @property
    def escaped(self):
        """Support atoms outside the enumerated radius (pushforward leakage)."""
        return tuple(u for u in self.support if self.group.length(u) > self.radius)

    def with_basepoint(self, x):
        return AtomicDensity(
            self.group, self.s, self.radius, self.theta, self.chi, x,
            self.support, self.log_q, self.shift, self.log_norm_factor,
        )

    def to_jsonable(self):
        lm = self.log_masses()
        return {
            "s": self.s,
            "radius": self.radius,
            "basepoint": self.group.show(self.basepoint),
            "shift": self.group.show(self.shift),
            "log_normalizer": self.log_q + self.log_norm_factor,
            "atoms": [
                [self.group.show(u), lm[u]]
                for u in sorted(self.support, key=lambda u: (self.group.length(u), repr(u)))
            ],
            "escaped": [self.group.show(u) for u in self.escaped],
        }


def patterson_approximant(
    group: MarkedGroup,
    s: float,
    radius: int,
    theta: PattersonWeight | None = None,
    chi: QuasiMorphism | None = None,
    basepoint=None,
    ball: Ball | None = None,
) -> AtomicDensity:
    """The truncated orbital approximant at exponent s over the radius-R ball."""
    if s <= 0:
        raise ValueError("exponent s must be positive")
    theta = theta or PattersonWeight.one()
    chi = chi or QuasiMorphism.zero()
    if ball is None:
        ball = enumerate_ball(group, radius)
    elif ball.radius < radius:
        raise OutOfRangeError("ball smaller than the requested truncation radius")
    support = [g for g, d in zip(ball.elements, ball.dist) if d <= radius]
    logs = [
        theta.log_value(d) + chi(g) - s * d
        for g, d in zip(ball.elements, ball.dist)
        if d <= radius
    ]
    log_q = _logsumexp(logs)
    if basepoint is None:
        basepoint = group.identity
    return AtomicDensity(group, s, radius, theta, chi, basepoint, support, log_q)


def density_pushforward(nu: AtomicDensity, g) -> AtomicDensity:
    """The right action nu^g: relocate by g^{-1}, renormalize by |nu_{g.o}|.

    Escaping atoms (outside the truncation radius) stay in the support and
    are listed on ``escaped`` rather than dropped.
    """
    group = nu.group
    norm = nu.norm_at(g)
    ginv = group.inverse(g)
    new_support = tuple(group.multiply(ginv, u) for u in nu.support)
    return AtomicDensity(
        group, nu.s, nu.radius, nu.theta, nu.chi, nu.basepoint, new_support,
        nu.log_q, shift=group.multiply(nu.shift, g),
        log_norm_factor=nu.log_norm_factor + math.log(norm),
    )


# ---------------------------------------------------------------------------
# exact tree-end density
# ---------------------------------------------------------------------------


class TreeEndDensity:
    """The exact conformal density on the end boundary of a rank-r free group.

    From the identity basepoint the cylinder through a vertex at distance
    l >= 1 has mass 1 / (2r (2r-1)^{l-1}); other basepoints are obtained by
    the exact conformal rule d nu_x / d nu_o = (2r-1)^{-b(x, o)} on cylinders
    where the Busemann value b is constant (recursing into children until it
    is).  All masses are exact fractions.
    """

    def __init__(self, group: FreeGroup):
        if not isinstance(group, FreeGroup):
            raise ValueError("tree-end densities need a free group")
        self.group = group
        self.rank = group.rank
        self.q = 2 * group.rank - 1
        self._norm_cache = {}

    @property
    def omega(self) -> float:
        return math.log(self.q)

    def base_cylinder_mass(self, w) -> Fraction:
        ell = len(w)
        if ell == 0:
            return Fraction(1)
        return Fraction(1, 2 * self.rank * self.q ** (ell - 1))

    def children(self, w):
        letters = [l for i in range(self.rank) for l in (i + 1, -(i + 1))]
        for l in letters:
            if w and l == -w[-1]:
                continue
            yield w + (l,)

    def _busemann_constant(self, x, w):
        c = 0
        for a, b in zip(x, w):
            if a != b:
                break
            c += 1
        # constant on Cyl(w) unless w is a proper prefix of x
        if c == len(w) and len(x) > len(w):
            return None
        return len(x) - 2 * c

    def cylinder_mass(self, w, basepoint=None) -> Fraction:
        """nu_x(Cyl(w)) exactly; recursion refines shallow cylinders."""
        w = tuple(w)
        if basepoint is None or basepoint == self.group.identity:
            return self.base_cylinder_mass(w)
        b = self._busemann_constant(basepoint, w)
        if b is None:
            return sum((self.cylinder_mass(c, basepoint) for c in self.children(w)),
                       Fraction(0))
        # d nu_x / d nu_o = q^{-b_xi(x, o)} with b constant on this cylinder
        return Fraction(self.q) ** (-b) * self.base_cylinder_mass(w)

    def norm_at(self, basepoint) -> Fraction:
        # the o-stabilizer of the tree acts transitively on spheres, so the
        # total mass seen from x depends only on |x|; cache by length
        ell = len(basepoint)
        cached = self._norm_cache.get(ell)
        if cached is None:
            cached = self.cylinder_mass((), basepoint)
            self._norm_cache[ell] = cached
        return cached

    def shadow_cylinder(self, g, r):
        """O_o(g.o, r) as a single cylinder word (viewpoint o only)."""
        ell = len(g)
        k = max(0, math.ceil(ell - r - 1e-12))
        return tuple(g[:k])

    def shadow_mass(self, shadow: Shadow) -> Fraction:
        x, y, r = shadow.viewpoint, shadow.target, shadow.radius
        if x == self.group.identity:
            return self.cylinder_mass(self.shadow_cylinder(y, r))
        return self._shadow_mass_general(x, y, r)

    def _shadow_mass_general(self, x, y, r):
        depth = len(x) + len(y) + math.ceil(r) + 2
        total = Fraction(0)
        stack = [()]
        while stack:
            w = stack.pop()
            if len(w) < depth:
                stack.extend(self.children(w))
                continue
            # Gromov product is constant on cylinders deeper than |x|,|y|
            cx = self._busemann_constant(x, w)
            cy = self._busemann_constant(y, w)
            prod = Fraction(self.group.distance(x, y) + (cy - cx), 2)
            if prod <= Fraction(r):
                total += self.cylinder_mass(w, x)
        return total

    def max_atom_proxy(self, depth: int) -> Fraction:
        """Largest cylinder mass at the given depth (atom-mass decay proxy)."""
        return self.base_cylinder_mass((1,) * depth) if depth >= 1 else Fraction(1)


def shadow_mass(density, shadow: Shadow):
    """Mass of a shadow: exact Fraction for the tree model, float for atoms.

    Atomic densities evaluate membership on atom locations viewed as
    interior cocycles b_{u.o}.
    """
    if isinstance(density, TreeEndDensity):
        return density.shadow_mass(shadow)
    group = density.group
    members = []
    for u in density.support:
        c = InteriorCocycle(group, u)
        if gromov_product(group, shadow.viewpoint, c, shadow.target) <= shadow.radius + 1e-9:
            members.append(u)
    return density.mass_of(members)


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


@dataclass
class ConformalityReport:
    pairs: int
    cylinders: int
    max_relative_error: Fraction
    shallow_flagged: int

    @property
    def exact(self):
        return self.max_relative_error == 0


def conformality_check(model: TreeEndDensity, x, y, cylinders) -> ConformalityReport:
    """Compare cylinder-mass ratios with the conformal factor q^{-b(x,y)}.

    Cylinders where the Busemann value of x or y is not constant are flagged
    (shallow) and skipped rather than mis-scored.
    """
    worst = Fraction(0)
    shallow = 0
    used = 0
    for w in cylinders:
        w = tuple(w)
        bx = model._busemann_constant(x, w)
        by = model._busemann_constant(y, w)
        if bx is None or by is None:
            shallow += 1
            continue
        used += 1
        ratio = model.cylinder_mass(w, x) / model.cylinder_mass(w, y)
        expected = Fraction(model.q) ** (-(bx - by))
        worst = max(worst, abs(ratio / expected - 1))
    return ConformalityReport(1, used, worst, shallow)


@dataclass
class HarnackReport:
    checks: list
    all_ok: bool


def harnack_check(density, x, y, omega: float, sets) -> HarnackReport:
    """Verify mass_x(A) <= e^{omega d(x,y)} mass_y(A) on each supplied set.

    ``sets`` holds (label, data) pairs: cylinder words for the tree model,
    atom collections for atomic densities.
    """
    checks = []
    if isinstance(density, TreeEndDensity):
        d = density.group.distance(x, y)
        bound = Fraction(density.q) ** d
        for label, w in sets:
            mx = density.cylinder_mass(tuple(w), x)
            my = density.cylinder_mass(tuple(w), y)
            ok = mx <= bound * my
            checks.append({"set": label, "lhs": float(mx), "rhs": float(bound * my), "ok": ok})
    else:
        group = density.group
        d = group.distance(x, y)
        bound = math.exp(omega * d)
        nx = density.with_basepoint(x)
        ny = density.with_basepoint(y)
        for label, atoms in sets:
            mx = nx.mass_of(atoms)
            my = ny.mass_of(atoms)
            ok = mx <= bound * my * (1 + 1e-9) + 1e-300
            checks.append({"set": label, "lhs": mx, "rhs": bound * my, "ok": ok})
    return HarnackReport(checks, all(c["ok"] for c in checks))


@dataclass
class ShadowLemmaRecord:
    element: object
    r: float
    ratio: float
    upper: float
    upper_ok: bool
    exact_ratio: Fraction | None = None


def shadow_lemma_check(density, g, r, omega: float | None = None) -> ShadowLemmaRecord:
    """nu_o(O_o(g.o, r)) e^{omega d} / |nu_{g.o}| against the upper bound e^{2 omega r}.

    The lower constant is *reported* (via the ratio), never asserted; the
    upper bound holds without any invariance assumption and is checked.
    """
    group = density.group
    o = group.identity
    d = group.length(g)
    sh = Shadow(o, g, r)
    if isinstance(density, TreeEndDensity):
        mass = density.shadow_mass(sh)
        norm = density.norm_at(g)
        exact = mass * Fraction(density.q) ** d / norm
        upper = float(density.q) ** (2 * r)
        if float(r).is_integer():
            upper_exact = Fraction(density.q) ** (2 * int(r))
            ok = exact <= upper_exact
        else:
            ok = float(exact) <= upper * (1 + 1e-9)
        return ShadowLemmaRecord(g, r, float(exact), upper, ok, exact)
    if omega is None:
        raise ValueError("omega required for atomic densities")
    mass = shadow_mass(density, sh)
    norm = density.norm_at(g)
    ratio = mass * math.exp(omega * d) / norm
    upper = math.exp(2 * omega * r)
    return ShadowLemmaRecord(g, r, ratio, upper, ratio <= upper * (1 + 1e-9))


@dataclass
class AnnulusRecord:
    ell: float
    half_width: float
    weighted_sum: float
    outside_mass: float
    ratio: float


def annulus_bound_check(density, omega: float, ell: float, a: float,
                        ball: Ball | None = None) -> AnnulusRecord:
    """(sum over S(ell, a) of |nu_{g.o}| e^{-omega d}, mass outside B(o, ell), ratio)."""
    group = density.group
    if isinstance(density, TreeEndDensity):
        # |nu_{g.o}| = 1; the density is boundary-supported so outside mass is 1
        from .spaces import sphere_counts

        radius = math.ceil(ell + a)
        counts = sphere_counts(group, radius)
        total = Fraction(0)
        for d, c in enumerate(counts):
            if ell - a <= d < ell + a:
                total += c * Fraction(density.q) ** (-d)
        outside = Fraction(1)
        return AnnulusRecord(ell, a, float(total), float(outside), float(total / outside))
    if ball is None:
        ball = enumerate_ball(group, math.ceil(ell + a))
    total = 0.0
    for g, d in zip(ball.elements, ball.dist):
        if ell - a <= d < ell + a:
            total += density.norm_at(g) * math.exp(-omega * d)
    lm = density.log_masses()
    outside = sum(math.exp(v) for u, v in lm.items() if group.length(u) > ell)
    ratio = total / outside if outside > 0 else math.inf
    return AnnulusRecord(ell, a, total, outside, ratio)


# ---------------------------------------------------------------------------
# Vitali selection
# ---------------------------------------------------------------------------


@dataclass
class VitaliResult:
    selected: list
    enlargement: float
    disjoint_verified: bool
    cover_verified: bool
    rows: list = field(default_factory=list)


def _cyl_intersect(w1, w2):
    k = min(len(w1), len(w2))
    return w1[:k] == w2[:k]


def _cyl_contains(big, small):
    # Cyl(small-word) subset of Cyl(big-word) iff big is a prefix of small
    return len(big) <= len(small) and small[: len(big)] == big


def vitali_select(model: TreeEndDensity, shadows, alpha: int) -> VitaliResult:
    """Greedy disjoint subfamily whose (r + 42 alpha)-enlargements cover the input.

    ``shadows`` is a list of (g, r) pairs; processing order is nondecreasing
    d(o, g.o) with the canonical word as the stable tie-break.  Disjointness
    and the enlarged cover are re-verified exhaustively on the exact model;
    a verification failure raises (self-checking operation).
    """
    items = sorted(shadows, key=lambda gr: (len(gr[0]), gr[0]))
    selected = []
    sel_cyls = []
    for g, r in items:
        cyl = model.shadow_cylinder(g, r)
        if all(not _cyl_intersect(cyl, c) for c in sel_cyls):
            selected.append((g, r))
            sel_cyls.append(cyl)
    # self-check: pairwise disjoint
    for i in range(len(sel_cyls)):
        for j in range(i + 1, len(sel_cyls)):
            if _cyl_intersect(sel_cyls[i], sel_cyls[j]):
                raise CayleyLabError("vitali self-check failed: selected shadows intersect")
    # self-check: every input inside an enlarged selected shadow
    rows = []
    for g, r in items:
        cyl = model.shadow_cylinder(g, r)
        covered = False
        for (h, rh) in selected:
            big = model.shadow_cylinder(h, rh + 42 * alpha)
            if _cyl_contains(big, cyl):
                covered = True
                break
        rows.append({"element": g, "r": r, "covered": covered})
        if not covered:
            raise CayleyLabError("vitali self-check failed: enlarged shadows do not cover input")
    return VitaliResult(selected, 42 * alpha, True, True, rows)


# ---------------------------------------------------------------------------
# Kochen-Stone
# ---------------------------------------------------------------------------


@dataclass
class KochenStoneResult:
    C: Fraction
    lower_bound: Fraction
    limsup_mass: Fraction
    verdict: bool
    mode: str
    flags: list
    sum_mu: Fraction


def kochen_stone_check(mu, sets, mode: str = "periodic") -> KochenStoneResult:
    """Quantitative second Borel-Cantelli check, exact over rationals.

    ``mu`` is a probability vector over finitely many atoms, ``sets`` a list
    of atom-index collections B_0..B_{p-1}.  mode="periodic" extends the
    family periodically (sum mu(B_n) genuinely diverges when one period has
    positive mass; the limsup set is the union over one period); mode="once"
    keeps the sets as given (divergence fails, flagged, limsup empty).  C is
    the smallest constant dominating the double-sum ratio over *all*
    prefixes N, computed exactly via the rational-function tail analysis.
    """
    mu = [Fraction(m) for m in mu]
    if sum(mu) != 1 or any(m < 0 for m in mu):
        raise ValueError("mu must be a probability vector")
    p = len(sets)
    if p == 0:
        raise ValueError("need at least one set")
    masks = [frozenset(b) for b in sets]
    m_single = [sum(mu[i] for i in b) for b in masks]
    if sum(m_single) == 0:
        raise ValueError("sum of mu(B_n) over the family is zero")
    pairm = [[sum(mu[i] for i in (masks[a] & masks[b])) for b in range(p)] for a in range(p)]
    flags = []

    def ratio_at(N):
        ks, js = divmod(N, p)
        S = ks * sum(m_single) + sum(m_single[:js])
        if S == 0:
            return None
        D = Fraction(0)
        for i1 in range(p):
            c1 = ks + (1 if i1 < js else 0)
            if c1 == 0:
                continue
            for i2 in range(p):
                c2 = ks + (1 if i2 < js else 0)
                if c2:
                    D += c1 * c2 * pairm[i1][i2]
        return D / (S * S)

    if mode == "once":
        candidates = [ratio_at(N) for N in range(1, p + 1)]
        C = max(c for c in candidates if c is not None)
        limsup = Fraction(0)
        flags.append("divergence hypothesis fails (sets occur once); limsup empty")
        verdict = limsup >= 1 / C
        return KochenStoneResult(C, 1 / C, limsup, verdict, mode, flags, sum(m_single))
    if mode != "periodic":
        raise ValueError("mode must be 'periodic' or 'once'")

    Sp = sum(m_single)
    Dp = sum(pairm[i][j] for i in range(p) for j in range(p))
    limit = Dp / (Sp * Sp)
    # exact sup over N: for each residue j the ratio is a rational function of
    # the period count k whose deviation from the limit has a linear numerator,
    # so scanning k up to the analytic turning point is exhaustive
    k_max = 4
    for j in range(p):
        S_j = sum(m_single[:j])
        T_j = sum(pairm[i1][i2] for i1 in range(p) for i2 in range(j))
        D_j = sum(pairm[i1][i2] for i1 in range(j) for i2 in range(j))
        alpha = 2 * Sp * (T_j * Sp - Dp * S_j)
        beta = D_j * Sp * Sp - Dp * S_j * S_j
        if alpha > 0:
            kstar = (alpha * S_j - 2 * Sp * beta) / (alpha * Sp)
            k_max = max(k_max, math.ceil(abs(kstar)) + 2)
        elif alpha < 0 and beta > 0:
            k_max = max(k_max, math.ceil(beta / -alpha) + 2)
    candidates = [limit]
    for N in range(1, (k_max + 1) * p + 1):
        rN = ratio_at(N)
        if rN is not None:
            candidates.append(rN)
    C = max(candidates)
    union = frozenset().union(*masks)
    limsup = sum(mu[i] for i in union)
    if Sp == 0:
        flags.append("period has zero mass; hypothesis vacuous")
    verdict = limsup >= 1 / C
    return KochenStoneResult(C, 1 / C, limsup, verdict, mode, flags, Sp)


# ---------------------------------------------------------------------------
# twisted growth exponents
# ---------------------------------------------------------------------------


@dataclass
class TwistedExponentRecord:
    radius: int
    log_sphere_sums: list
    ratio_estimates: list
    final: float
    final_negated: float

    def as_rows(self):
        return [
            {"radius": ell, "log_sphere_sum": self.log_sphere_sums[ell],
             "ratio_estimate": self.ratio_estimates[ell]}
            for ell in range(len(self.log_sphere_sums))
        ]


def twisted_exponent(group: MarkedGroup, chi: QuasiMorphism, radius: int,
                     budget: int | None = None) -> TwistedExponentRecord:
    """Ratio-estimator exponent of the twisted sphere sums sum_{|g|=l} e^{chi(g)}.

    Also reports the estimate for -chi (equal up to the defect, exactly equal
    for antisymmetric chi by the g <-> g^{-1} bijection).
    """
    from .spaces import DEFAULT_BALL_BUDGET, _iter_elements_with_length

    budget = budget or DEFAULT_BALL_BUDGET
    acc = [[] for _ in range(radius + 1)]
    acc_neg = [[] for _ in range(radius + 1)]
    for g, ell in _iter_elements_with_length(group, radius, budget):
        v = chi(g)
        acc[ell].append(v)
        acc_neg[ell].append(-v)
    sums = [_logsumexp(vals) for vals in acc]
    sums_neg = [_logsumexp(vals) for vals in acc_neg]

    def ratios(ls):
        out = [math.nan]
        for ell in range(1, len(ls)):
            if ls[ell] == -math.inf or ls[ell - 1] == -math.inf:
                out.append(math.nan)
            else:
                out.append(ls[ell] - ls[ell - 1])
        return out

    r = ratios(sums)
    rn = ratios(sums_neg)
    final = next((v for v in reversed(r) if not math.isnan(v)), math.nan)
    final_neg = next((v for v in reversed(rn) if not math.isnan(v)), math.nan)
    return TwistedExponentRecord(radius, sums, r, final, final_neg)
