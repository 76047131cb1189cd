"""Nearest-point projections and window-certified contraction geometry.

A subset Y is alpha-contracting when every geodesic staying at distance
>= alpha from Y projects onto Y with diameter <= alpha.  Global contraction
is not finitely decidable, so every verdict here is a *window certificate*:
all geodesics between points of the radius-``window`` ball were checked, and
a PASS claims nothing beyond that scope.  FAIL verdicts carry a concrete
violating geodesic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import WindowError
from .groups import FreeGroup, MarkedGroup
from .spaces import (
    DEFAULT_GEODESIC_BUDGET,
    Ball,
    enumerate_ball,
    geodesic,
    iter_geodesics,
)


@dataclass(frozen=True)
class SubsetWindow:
    """Finite ordered window of a (conceptually infinite) closed subset.

    ``points`` keeps the stated indexing order (e.g. orbit powers -W..W);
    deterministic outputs preserve it.  ``window_radius`` records the
    indexing radius when there is one.
    """

    points: tuple
    label: str = ""
    window_radius: int | None = None

    def __len__(self):
        return len(self.points)


def orbit_window(group: MarkedGroup, g, window: int, label: str = "") -> SubsetWindow:
    """The orbit segment {g^n . o : |n| <= window} in power order."""
    points = tuple(group.power(g, n) for n in range(-window, window + 1))
    return SubsetWindow(points, label or f"<{group.show(g)}>-orbit", window)


def orbit_axis_window(group: MarkedGroup, g, window: int, label: str = "") -> SubsetWindow:
    """The filled orbit segment: canonical geodesics through consecutive powers.

    The discrete orbit {g^n . o} of a long element is only |g|-coarsely
    contracting (midpoints between consecutive powers project onto both);
    the connected axis path is the set whose contraction the tree intuition
    refers to, so element certificates are run against this window.
    """
    vertices = []
    for n in range(-window, window):
        seg = geodesic(group, group.power(g, n), group.power(g, n + 1))
        if vertices:
            seg = seg[1:]
        vertices.extend(seg)
    if not vertices:
        vertices = [group.identity]
    return SubsetWindow(tuple(vertices), label or f"<{group.show(g)}>-axis", window)


def project(group: MarkedGroup, x, window: SubsetWindow):
    """All nearest points of the window to x, in window order."""
    if not window.points:
        raise ValueError("projection onto an empty window")
    dists = [group.distance(x, y) for y in window.points]
    best = min(dists)
    return tuple(y for y, d in zip(window.points, dists) if d == best)


def distance_to_window(group: MarkedGroup, x, window: SubsetWindow) -> int:
    return min(group.distance(x, y) for y in window.points)


def entry_exit(group: MarkedGroup, gamma, window: SubsetWindow, alpha: int):
    """First and last vertices of the path inside the alpha-neighborhood, or None."""
    inside = [v for v in gamma if distance_to_window(group, v, window) <= alpha]
    if not inside:
        return None
    return inside[0], inside[-1]


@dataclass
class Violation:
    """A geodesic contradicting alpha-contraction: far from Y, wide projection."""

    start: object
    end: object
    path: list
    min_distance: int
    projections: tuple
    diameter: int


@dataclass
class ContractionCertificate:
    alpha: int
    verified_window: int
    outcome: str  # "PASS" | "FAIL"
    pairs_checked: int
    geodesics_checked: int
    violation: Violation | None = None
    scope: str = "all geodesics between points of the enumerated ball"

    @property
    def passed(self) -> bool:
        return self.outcome == "PASS"

    def to_jsonable(self, show=str):
        out = {
            "alpha": self.alpha,
            "verified_window": self.verified_window,
            "outcome": self.outcome,
            "pairs_checked": self.pairs_checked,
            "geodesics_checked": self.geodesics_checked,
            "scope": self.scope,
        }
        if self.violation is not None:
            v = self.violation
            out["violation"] = {
                "path": [show(p) for p in v.path],
                "min_distance": v.min_distance,
                "projections": [show(p) for p in v.projections],
                "diameter": v.diameter,
            }
        return out


def _free_geodesic_words(u, w):
    # unique tree geodesic between reduced words: down to the common prefix, up
    p = 0
    while p < len(u) and p < len(w) and u[p] == w[p]:
        p += 1
    path = [u[:k] for k in range(len(u), p - 1, -1)]
    path.extend(w[: k + 1] for k in range(p, len(w)))
    return path


def check_contracting(
    group: MarkedGroup,
    window_set: SubsetWindow,
    alpha: int,
    window: int,
    ball: Ball | None = None,
    geodesic_budget: int = DEFAULT_GEODESIC_BUDGET,
) -> ContractionCertificate:
    """Certify alpha-contraction of the set over all ball-of-``window`` geodesics.

    A geodesic qualifies when every vertex is at distance >= alpha from the
    set (trivial one-point geodesics included); a qualifying geodesic whose
    projection has diameter > alpha is a violation and is returned.  For
    spaces with non-unique geodesics all of them are enumerated (budgeted).
    """
    if ball is None:
        ball = enumerate_ball(group, window)
    pts = window_set.points
    npts = len(pts)
    # pairwise distances within the set, for projection diameters
    dmat = [[group.distance(a, b) for b in pts] for a in pts]
    # per ball vertex: distance to the set and the projection index set
    dY = {}
    proj = {}
    for v in ball.elements:
        dists = [group.distance(v, y) for y in pts]
        best = min(dists)
        dY[v] = best
        proj[v] = tuple(i for i, d in enumerate(dists) if d == best)

    unique_geodesics = isinstance(group, FreeGroup)
    pairs_checked = 0
    geos_checked = 0

    def projection_diameter(path):
        # incremental union with early exit once diameter exceeds alpha
        idxs = set()
        diam = 0
        for v in path:
            for i in proj[v]:
                if i in idxs:
                    continue
                for j in idxs:
                    if dmat[i][j] > diam:
                        diam = dmat[i][j]
                idxs.add(i)
            if diam > alpha:
                break
        return diam, idxs

    elements = ball.elements
    n = len(elements)
    for i in range(n):
        x = elements[i]
        if dY[x] < alpha:
            continue
        # the trivial geodesic [x]
        pairs_checked += 1
        geos_checked += 1
        diam, idxs = projection_diameter([x])
        if diam > alpha:
            viol = Violation(x, x, [x], dY[x], tuple(pts[k] for k in sorted(idxs)), diam)
            return ContractionCertificate(alpha, window, "FAIL", pairs_checked, geos_checked, viol)
        for j in range(i + 1, n):
            z = elements[j]
            if dY[z] < alpha:
                continue
            pairs_checked += 1
            if unique_geodesics:
                paths = [_free_geodesic_words(x, z)]
            else:
                paths = iter_geodesics(group, x, z, geodesic_budget)
            for path in paths:
                geos_checked += 1
                if min(dY[v] for v in path) < alpha:
                    continue
                diam, idxs = projection_diameter(path)
                if diam > alpha:
                    viol = Violation(
                        x, z, list(path), min(dY[v] for v in path),
                        tuple(pts[k] for k in sorted(idxs)), diam,
                    )
                    return ContractionCertificate(
                        alpha, window, "FAIL", pairs_checked, geos_checked, viol
                    )
    return ContractionCertificate(alpha, window, "PASS", pairs_checked, geos_checked)


def minimal_passing_alpha(
    group, window_set, window, cap, ball=None, geodesic_budget=DEFAULT_GEODESIC_BUDGET
):
    """Smallest integer alpha <= cap whose certificate passes, with that certificate."""
    if ball is None:
        ball = enumerate_ball(group, window)
    for alpha in range(1, cap + 1):
        cert = check_contracting(group, window_set, alpha, window, ball, geodesic_budget)
        if cert.passed:
            return alpha, cert
    raise WindowError(f"no alpha <= {cap} certifies the set over window {window}")


# ---------------------------------------------------------------------------
# contracting elements
# ---------------------------------------------------------------------------


@dataclass
class ContractingElementWitness:
    element: object
    alpha: int
    lam: float
    eps: float
    window: int
    certificate: ContractionCertificate

    @property
    def contracting(self):
        return True


@dataclass
class NotContracting:
    element: object
    reason: str
    certificate: ContractionCertificate | None = None

    @property
    def contracting(self):
        return False


def detect_contracting(
    group: MarkedGroup,
    g,
    window: int,
    alpha: int,
    check_window: int | None = None,
    ball: Ball | None = None,
    geodesic_budget: int = DEFAULT_GEODESIC_BUDGET,
):
    """Window-certified test that g is a contracting element.

    Fits quasi-isometry constants for n -> g^n . o on |n| <= window, then
    runs the contraction certificate for the orbit segment over the ball of
    radius ``check_window`` (defaults to ``window``).
    """
    if g == group.identity:
        return NotContracting(g, "identity: bounded orbit")
    powers = [group.power(g, n) for n in range(-window, window + 1)]
    if len(set(powers)) < len(powers):
        return NotContracting(g, "bounded orbit (torsion within window)")
    # d(g^n o, g^m o) depends only on |n - m|
    seg_len = [group.length(group.power(g, k)) for k in range(0, 2 * window + 1)]
    lam = 1.0
    for k in range(1, 2 * window + 1):
        if seg_len[k] == 0:
            return NotContracting(g, "bounded orbit (torsion within window)")
        lam = max(lam, seg_len[k] / k, k / seg_len[k])
    eps = 0.0  # both QI bounds hold exactly with this lambda
    axis = orbit_axis_window(group, g, window)
    cert = check_contracting(
        group, axis, alpha, check_window if check_window is not None else window,
        ball, geodesic_budget,
    )
    if cert.passed:
        return ContractingElementWitness(g, alpha, lam, eps, window, cert)
    return NotContracting(g, "violating geodesic in window", cert)


def combine_contracting(group: MarkedGroup, g, h, n: int):
    """The combination g^n (h g^{-2n} h^{-1}) g^n in normal form."""
    gn = group.power(g, n)
    middle = group.multiply(group.multiply(h, group.power(g, -2 * n)), group.inverse(h))
    return group.multiply(group.multiply(gn, middle), gn)


# ---------------------------------------------------------------------------
# contracting tails
# ---------------------------------------------------------------------------


@dataclass
class TailWitness:
    """A certified (alpha, L)-contracting tail for the pair (o, g.o)."""

    element: object
    tail: list
    alpha: int
    length_requirement: int
    projection_point: object
    projection_distance: int
    certificate: ContractionCertificate
    scope: str = "canonical geodesic suffixes"


def _tail_projection(group, tail, x):
    dists = [group.distance(x, v) for v in tail]
    best = min(dists)
    for v, d in zip(tail, dists):
        if d == best:
            return v, best
    raise AssertionError


def find_contracting_tail(
    group: MarkedGroup,
    g,
    alpha: int,
    L: int,
    check_window: int = 2,
    extra_tails=(),
    _memo=None,
    geodesic_budget: int = DEFAULT_GEODESIC_BUDGET,
):
    """Search the documented tail scope for an (alpha, L)-contracting tail of (o, g.o).

    Scope: suffixes (length >= max(L, 1)) of the canonical geodesic from o to
    g.o, plus any caller-supplied candidate tails (vertex paths ending at
    g.o).  Certificates are windowed at ``check_window`` and memoized on the
    left-translated canonical shape of the tail.
    """
    d = group.length(g)
    if d < max(L, 1):
        return None
    if _memo is None:
        _memo = {}
    base = geodesic(group, group.identity, g)
    candidates = []
    for k in range(max(L, 1), d + 1):
        candidates.append(base[d - k :])
    for tail in extra_tails:
        if tail and tail[-1] == g:
            candidates.append(list(tail))
    ball = None
    for tail in candidates:
        p, _ = _tail_projection(group, tail, group.identity)
        pd = group.distance(p, g)
        if pd < L:
            continue
        start_inv = group.inverse(tail[0])
        canon = tuple(group.multiply(start_inv, v) for v in tail)
        key = (canon, alpha, check_window)
        cert = _memo.get(key)
        if cert is None:
            if ball is None:
                ball = enumerate_ball(group, check_window)
            cert = check_contracting(
                group, SubsetWindow(canon, "tail"), alpha, check_window, ball,
                geodesic_budget,
            )
            _memo[key] = cert
        if cert.passed:
            return TailWitness(g, tail, alpha, L, p, pd, cert)
    return None


def contracting_tail_members(
    ball: Ball,
    alpha: int,
    L: int,
    check_window: int = 2,
    geodesic_budget: int = DEFAULT_GEODESIC_BUDGET,
):
    """Members of the ball whose pair (o, g.o) has a certified (alpha, L) tail.

    Returns (element, TailWitness) pairs in ball order.  The search scope is
    the one documented on find_contracting_tail and recorded per witness.
    """
    group = ball.group
    memo = {}
    out = []
    for g in ball.elements:
        wit = find_contracting_tail(
            group, g, alpha, L, check_window, _memo=memo, geodesic_budget=geodesic_budget
        )
        if wit is not None:
            out.append((g, wit))
    return out


# ---------------------------------------------------------------------------
# contracting extension
# ---------------------------------------------------------------------------


@dataclass
class ExtensionResult:
    u: object
    power: int
    extended: object  # g u
    tail: TailWitness
    alpha_observed: int
    basepoint_gap: int  # d(g.o, tail start)
    projection_power: int


def _project_power_on_axis(group, x, h, lam, eps):
    """Power k minimizing d(x, h^k o); scan with a QI lower-bound cutoff."""
    best_k = 0
    best_d = group.length(x)
    k = 1
    while True:
        stop = True
        for kk in (k, -k):
            hk = group.power(h, kk)
            d = group.distance(x, hk)
            if d < best_d or (d == best_d and kk > best_k):
                if d < best_d:
                    best_k, best_d = kk, d
            # distance lower bound |h^k| - |x| still below the best => keep going
            if abs(kk) / lam - eps - group.length(x) <= best_d:
                stop = False
        if stop or k > 64 + 4 * (group.length(x) + best_d):
            break
        k += 1
    return best_k


def contracting_extension(
    group: MarkedGroup,
    g,
    L: int,
    h_witness: ContractingElementWitness,
    check_window: int = 3,
    alpha_cap: int | None = None,
) -> ExtensionResult:
    """Extend g by a power of a contracting element to force a contracting tail.

    Picks u = h^{+N} or h^{-N} (N minimal with |h^N| >= L) with the sign
    opposing the projection of g^{-1}.o on the <h>-axis (ties positive), then
    certifies the length-L tail of the geodesic o -> g u . o and measures how
    close g.o is to the tail start.
    """
    h = h_witness.element
    N = 1
    while group.length(group.power(h, N)) < L:
        N += 1
        if N > 4 * L + 8:
            raise WindowError("h powers grow too slowly to reach length L")
    k = _project_power_on_axis(group, group.inverse(g), h, h_witness.lam, h_witness.eps)
    power = N if k <= 0 else -N
    u = group.power(h, power)
    gu = group.multiply(g, u)
    tau = geodesic(group, group.identity, gu)
    T = len(tau) - 1
    if T < L:
        raise WindowError("extended geodesic shorter than the requested tail")
    tail = tau[T - L :]
    cap = alpha_cap if alpha_cap is not None else max(4, 3 * h_witness.alpha + 2)
    start_inv = group.inverse(tail[0])
    canon = tuple(group.multiply(start_inv, v) for v in tail)
    alpha_obs, cert = minimal_passing_alpha(
        group, SubsetWindow(canon, "tail"), check_window, cap
    )
    gap = group.distance(g, tail[0])
    alpha_obs = max(alpha_obs, gap)
    p, _ = _tail_projection(group, tail, group.identity)
    pd = group.distance(p, gu)
    wit = TailWitness(gu, tail, alpha_obs, L, p, pd, cert)
    return ExtensionResult(u, power, gu, wit, alpha_obs, gap, k)
