"""Balls, spheres, geodesics, growth estimators and Poincaré partial sums.

Everything here is exact: distances are integers from the Cayley-graph word
metric, enumerations are deterministic (breadth-first with generator-order
tie-break), and only series values live in floating point (log-domain).
"""

from __future__ import annotations

import itertools
import math
import pickle
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BudgetExceededError, OutOfRangeError
from .groups import FreeAbelianL1, FreeGroup, FreeProductQuotient, Homomorphism, MarkedGroup

DEFAULT_BALL_BUDGET = 20_000_000
DEFAULT_GEODESIC_BUDGET = 100_000


class Ball:
    """Closed ball around the identity: elements, exact distances, BFS tree.

    ``elements[i]`` is the i-th element in breadth-first order (alphabet order
    breaking ties), ``dist[i]`` its distance from the identity and ``pred[i]``
    the BFS predecessor index (-1 at the root), enough to rebuild one geodesic
    per element.  Instances are immutable once built.
    """

    def __init__(self, group, radius, elements, dist, pred):
        self.group = group
        self.radius = radius
        self.elements = elements
        self.dist = dist
        self.pred = pred
        self.index = {g: i for i, g in enumerate(elements)}

    def __len__(self):
        return len(self.elements)

    def __contains__(self, g):
        return g in self.index

    def distance_to_o(self, g):
        return self.dist[self.index[g]]

    def sphere_elements(self, ell):
        return [g for g, d in zip(self.elements, self.dist) if d == ell]

    def sphere_counts(self):
        counts = [0] * (self.radius + 1)
        for d in self.dist:
            counts[d] += 1
        return counts

    def path_to_o(self, g):
        """Vertex path from g down to the identity along BFS predecessors."""
        i = self.index[g]
        out = [self.elements[i]]
        while self.pred[i] >= 0:
            i = self.pred[i]
            out.append(self.elements[i])
        return out


def enumerate_ball(group: MarkedGroup, radius: int, budget: int = DEFAULT_BALL_BUDGET) -> Ball:
    """All elements with d(o, g.o) <= radius, breadth-first, generator-order ties."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    alphabet = [el for _, el in group.alphabet()]
    elements = [group.identity]
    dist = [0]
    pred = [-1]
    seen = {group.identity: 0}
    head = 0
    while head < len(elements):
        g = elements[head]
        d = dist[head]
        if d == radius:
            head += 1
            continue
        for s in alphabet:
            h = group.multiply(g, s)
            if h not in seen:
                seen[h] = len(elements)
                elements.append(h)
                dist.append(d + 1)
                pred.append(head)
                if len(elements) > budget:
                    raise BudgetExceededError(
                        f"ball of radius {radius} exceeds budget {budget}",
                        budget=budget,
                        reached=len(elements),
                    )
        head += 1
    return Ball(group, radius, elements, dist, pred)


def save_ball(ball: Ball, cache_dir) -> Path:
    """Persist a ball keyed by (group hash, radius); returns the file path."""
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"ball_{ball.group.group_hash}_{ball.radius}.pkl"
    with open(path, "wb") as fh:
        pickle.dump(
            {
                "descriptor": ball.group.descriptor(),
                "radius": ball.radius,
                "elements": ball.elements,
                "dist": ball.dist,
                "pred": ball.pred,
            },
            fh,
        )
    return path


def load_ball(group: MarkedGroup, radius: int, cache_dir) -> Ball | None:
    path = Path(cache_dir) / f"ball_{group.group_hash}_{radius}.pkl"
    if not path.exists():
        return None
    with open(path, "rb") as fh:
        blob = pickle.load(fh)
    if blob["descriptor"] != group.descriptor():
        return None
    return Ball(group, blob["radius"], blob["elements"], blob["dist"], blob["pred"])


def distance(group: MarkedGroup, g, h) -> int:
    """Word-metric distance d(g.o, h.o) = |g^-1 h|."""
    return group.distance(g, h)


def geodesic(group: MarkedGroup, g, h):
    """One geodesic vertex path from g to h (first distance-decreasing letter wins)."""
    path = [g]
    current = g
    remaining = group.distance(g, h)
    while remaining > 0:
        for _, s in group.alphabet():
            nxt = group.multiply(current, s)
            if group.distance(nxt, h) == remaining - 1:
                current = nxt
                break
        else:  # pragma: no cover - impossible in a geodesic metric space
            raise RuntimeError("no distance-decreasing neighbor found")
        path.append(current)
        remaining -= 1
    return path


def all_geodesics(group: MarkedGroup, g, h, budget: int = DEFAULT_GEODESIC_BUDGET):
    """Every geodesic vertex path from g to h, in generator-order DFS order.

    Exact for free groups (a single path) and for L1 lattices (all monotone
    staircases).  Raises BudgetExceededError when the count would exceed
    ``budget``.
    """
    out = []
    alphabet = group.alphabet()
    total = group.distance(g, h)

    def extend(path, current, remaining):
        if remaining == 0:
            out.append(list(path))
            if len(out) > budget:
                raise BudgetExceededError(
                    f"more than {budget} geodesics", budget=budget, reached=len(out)
                )
            return
        for _, s in alphabet:
            nxt = group.multiply(current, s)
            if group.distance(nxt, h) == remaining - 1:
                path.append(nxt)
                extend(path, nxt, remaining - 1)
                path.pop()

    extend([g], g, total)
    return out


def iter_geodesics(group: MarkedGroup, g, h, budget: int = DEFAULT_GEODESIC_BUDGET):
    """Lazy version of all_geodesics (generator of vertex paths)."""
    alphabet = group.alphabet()
    total = group.distance(g, h)
    produced = 0

    def extend(path, current, remaining):
        nonlocal produced
        if remaining == 0:
            produced += 1
            if produced > budget:
                raise BudgetExceededError(
                    f"more than {budget} geodesics", budget=budget, reached=produced
                )
            yield list(path)
            return
        for _, s in alphabet:
            nxt = group.multiply(current, s)
            if group.distance(nxt, h) == remaining - 1:
                path.append(nxt)
                yield from extend(path, nxt, remaining - 1)
                path.pop()

    yield from extend([g], g, total)


@dataclass(frozen=True)
class Sphere:
    """Elements g of a ball with ell - a <= d(o, g.o) < ell + a (half-open)."""

    ell: float
    half_width: float
    elements: tuple

    def __len__(self):
        return len(self.elements)


def sphere(ball: Ball, ell: float, a: float) -> Sphere:
    if ell + a > ball.radius + 1:
        raise OutOfRangeError(
            f"sphere S({ell},{a}) needs distances up to {ell + a}, ball radius is {ball.radius}"
        )
    members = tuple(
        g for g, d in zip(ball.elements, ball.dist) if ell - a <= d < ell + a
    )
    return Sphere(ell, a, members)


# ---------------------------------------------------------------------------
# streaming sphere counts (no ball materialization)
# ---------------------------------------------------------------------------


def sphere_counts(
    group: MarkedGroup,
    radius: int,
    budget: int = DEFAULT_BALL_BUDGET,
    method: str = "auto",
):
    """Exact sphere cardinalities [|S(0)|, ..., |S(radius)|].

    ``method="enumerate"`` visits every element (depth-first canonical-word
    scan for word kinds, BFS otherwise) and is budget-capped.  For free
    groups and L1 lattices an exact closed recurrence is also available
    (``method="closed"``: the free Cayley graph is a (2r)-regular tree, the
    lattice counts are a coordinate convolution); ``"auto"`` enumerates when
    the ball fits the budget and otherwise uses the closed route where one
    exists.  Tests cross-check the two routes.
    """
    if method not in ("auto", "enumerate", "closed"):
        raise ValueError("method must be auto, enumerate or closed")
    if isinstance(group, FreeGroup):
        if method == "closed" or (
            method == "auto" and _free_ball_size(group.rank, radius) > budget
        ):
            return _closed_free_spheres(group.rank, radius)
        return _count_free_spheres(group.rank, radius, budget)
    if isinstance(group, FreeAbelianL1):
        if method == "enumerate":
            return enumerate_ball(group, radius, budget).sphere_counts()
        return _count_lattice_spheres(group.dim, radius)
    if method == "closed":
        raise ValueError(f"no closed sphere-count formula for kind {group.kind!r}")
    if isinstance(group, FreeProductQuotient):
        counts = [0] * (radius + 1)
        for _, depth in _iter_fpq_words(group, radius, budget):
            counts[depth] += 1
        return counts
    ball = enumerate_ball(group, radius, budget)
    return ball.sphere_counts()


def _free_ball_size(rank, radius):
    if radius == 0:
        return 1
    return 1 + 2 * rank * ((2 * rank - 1) ** radius - 1) // (2 * rank - 2) if rank > 1 else 2 * radius + 1


def _closed_free_spheres(rank, radius):
    counts = [1]
    if radius >= 1:
        counts.append(2 * rank)
    for _ in range(2, radius + 1):
        counts.append(counts[-1] * (2 * rank - 1))
    return counts


def _count_free_spheres(rank, radius, budget):
    # iterative DFS over reduced words; only (last letter, depth) matter
    counts = [0] * (radius + 1)
    counts[0] = 1
    letters = [l for i in range(rank) for l in (i + 1, -(i + 1))]
    visited = 0
    stack = [(l, 1) for l in reversed(letters)]
    while stack:
        last, depth = stack.pop()
        counts[depth] += 1
        visited += 1
        if visited > budget:
            raise BudgetExceededError("sphere count exceeds budget", budget=budget)
        if depth < radius:
            nd = depth + 1
            for l in letters:
                if l != -last:
                    stack.append((l, nd))
    return counts


def _count_lattice_spheres(dim, radius):
    # counts of lattice points with L1 norm = l, by convolution of 1D counts
    counts = np.zeros(radius + 1, dtype=np.int64)
    counts[0] = 1
    for _ in range(dim):
        new = counts.copy()
        # adding one coordinate with |x| = k contributes 2 for k >= 1
        for k in range(1, radius + 1):
            new[k:] += 2 * counts[: radius + 1 - k]
        counts = new
    return counts.tolist()


def _fpq_exponent_canonical(k, e):
    # balanced exponents: |e| <= k//2, and for even k only +k/2 is canonical
    if k is None:
        return True
    return abs(e) <= k // 2 and not (k % 2 == 0 and e == -(k // 2))


def _iter_fpq_words(group: FreeProductQuotient, radius, budget):
    """Yield (canonical word, length) for every element of length <= radius."""
    orders = group.orders
    rank = group.rank
    yield (), 0
    visited = 0
    # stack entries: (run list, gen of last run, signed exponent of last run, length)
    stack = []
    for gen in reversed(range(rank)):
        for sgn in (-1, 1):
            if _fpq_exponent_canonical(orders[gen], sgn):
                stack.append(([(gen, sgn)], gen, sgn, 1))
    while stack:
        runs, last_gen, last_exp, length = stack.pop()
        word = tuple(
            (g + 1 if e > 0 else -(g + 1)) for g, e in runs for _ in range(abs(e))
        )
        yield word, length
        visited += 1
        if visited > budget:
            raise BudgetExceededError("word enumeration exceeds budget", budget=budget)
        if length == radius:
            continue
        for gen in range(rank):
            k = orders[gen]
            if gen == last_gen:
                e = last_exp + (1 if last_exp > 0 else -1)
                if not _fpq_exponent_canonical(k, e):
                    continue
                stack.append((runs[:-1] + [(gen, e)], gen, e, length + 1))
            else:
                for sgn in (1, -1):
                    if _fpq_exponent_canonical(k, sgn):
                        stack.append((runs + [(gen, sgn)], gen, sgn, length + 1))


# ---------------------------------------------------------------------------
# growth estimators
# ---------------------------------------------------------------------------


@dataclass
class GrowthEstimate:
    """Direct and ratio growth estimators from exact sphere counts.

    ``direct[l] = ln(cumulative count up to l) / l`` and
    ``ratio[l] = ln(count[l] / count[l-1])``; entries are NaN where undefined
    (l = 0, or a zero sphere).  No extrapolation is applied.
    """

    counts: list
    cumulative: list
    direct: list
    ratio: list
    undefined_ratios: list
    final_direct: float
    final_ratio: float

    def as_rows(self):
        rows = []
        for ell, c in enumerate(self.counts):
            rows.append(
                {
                    "radius": ell,
                    "sphere_count": c,
                    "cumulative": self.cumulative[ell],
                    "direct_estimate": self.direct[ell],
                    "ratio_estimate": self.ratio[ell],
                }
            )
        return rows


def growth_exponent(counts) -> GrowthEstimate:
    counts = [int(c) for c in counts]
    cumulative = list(itertools.accumulate(counts))
    direct = [math.nan]
    ratio = [math.nan]
    undefined = []
    for ell in range(1, len(counts)):
        direct.append(math.log(cumulative[ell]) / ell if cumulative[ell] > 0 else math.nan)
        if counts[ell - 1] > 0 and counts[ell] > 0:
            ratio.append(math.log(counts[ell] / counts[ell - 1]))
        else:
            ratio.append(math.nan)
            undefined.append(ell)
    final_ratio = next((r for r in reversed(ratio) if not math.isnan(r)), math.nan)
    final_direct = next((d for d in reversed(direct) if not math.isnan(d)), math.nan)
    return GrowthEstimate(counts, [int(c) for c in cumulative], direct, ratio, undefined, final_direct, final_ratio)


# ---------------------------------------------------------------------------
# Poincare partial sums
# ---------------------------------------------------------------------------

DIVERGENT = "DIVERGENT-AT-s"
CONVERGENT = "CONVERGENT-AT-s"
INCONCLUSIVE = "INCONCLUSIVE"


@dataclass
class PoincareRecord:
    """Per-radius partial sums of sum theta(d) e^{chi} e^{-s d} plus a tail verdict.

    The divergence verdict is a finite-scale heuristic: over the trailing
    ``window`` radii, increments decaying by factor <= ``decay_threshold``
    per step read CONVERGENT-AT-s, increments never dipping below it read
    DIVERGENT-AT-s, anything mixed is INCONCLUSIVE.
    """

    s: float
    radius: int
    log_increments: list
    partial_sums: list
    classification: str
    window: int
    decay_threshold: float
    flags: list = field(default_factory=list)

    @property
    def total(self):
        return self.partial_sums[-1]

    def as_rows(self):
        return [
            {
                "radius": ell,
                "log_increment": self.log_increments[ell],
                "partial_sum": self.partial_sums[ell],
            }
            for ell in range(len(self.log_increments))
        ]


def _logsumexp(values):
    m = max(values)
    if m == -math.inf:
        return -math.inf
    return m + math.log(sum(math.exp(v - m) for v in values))


def poincare_partial(
    group: MarkedGroup,
    s: float,
    radius: int,
    weight=None,
    twist=None,
    window: int = 5,
    decay_threshold: float = 0.95,
    budget: int = DEFAULT_BALL_BUDGET,
) -> PoincareRecord:
    """Partial sums of the (weighted, twisted) orbital series up to ``radius``.

    ``weight`` maps a distance to a positive factor (default 1); ``twist``
    maps an element to a real exponent (default 0).  All accumulation is in
    the log domain.
    """
    log_theta = (lambda d: 0.0) if weight is None else (lambda d: math.log(weight(d)))
    shell_logs = [-math.inf] * (radius + 1)
    if twist is None:
        counts = sphere_counts(group, radius, budget)
        for ell, c in enumerate(counts):
            if c > 0:
                shell_logs[ell] = math.log(c) + log_theta(ell) - s * ell
    else:
        acc = [[] for _ in range(radius + 1)]
        for g, ell in _iter_elements_with_length(group, radius, budget):
            acc[ell].append(twist(g))
        for ell, vals in enumerate(acc):
            if vals:
                shell_logs[ell] = _logsumexp(vals) + log_theta(ell) - s * ell
    flags = []
    partial = []
    running = -math.inf
    for ell in range(radius + 1):
        running = _logsumexp([running, shell_logs[ell]])
        partial.append(math.exp(running))
    increments = shell_logs
    tail = [ell for ell in range(max(1, radius - window + 1), radius + 1)]
    ratios = []
    for ell in tail:
        if increments[ell] == -math.inf or increments[ell - 1] == -math.inf:
            flags.append(f"empty shell near radius {ell}")
            continue
        ratios.append(math.exp(increments[ell] - increments[ell - 1]))
    if not ratios:
        verdict = INCONCLUSIVE
    elif all(r <= decay_threshold for r in ratios):
        verdict = CONVERGENT
    elif all(r >= decay_threshold for r in ratios):
        verdict = DIVERGENT
    else:
        verdict = INCONCLUSIVE
    return PoincareRecord(
        s, radius, increments, partial, verdict, window, decay_threshold, flags
    )


def _iter_elements_with_length(group, radius, budget):
    if isinstance(group, FreeGroup):
        yield from _iter_free_words(group.rank, radius, budget)
    elif isinstance(group, FreeProductQuotient):
        yield from _iter_fpq_words(group, radius, budget)
    else:
        ball = enumerate_ball(group, radius, budget)
        yield from zip(ball.elements, ball.dist)


def _iter_free_words(rank, radius, budget):
    yield (), 0
    letters = [l for i in range(rank) for l in (i + 1, -(i + 1))]
    visited = 0
    stack = [((l,), 1) for l in reversed(letters)]
    while stack:
        word, depth = stack.pop()
        yield word, depth
        visited += 1
        if visited > budget:
            raise BudgetExceededError("word enumeration exceeds budget", budget=budget)
        if depth < radius:
            last = word[-1]
            for l in letters:
                if l != -last:
                    stack.append((word + (l,), depth + 1))


# ---------------------------------------------------------------------------
# quotient spaces
# ---------------------------------------------------------------------------


class QuotientSpace:
    """Metric quotient X -> X/N: BFS metric on the image of the parent generators.

    The quotient Cayley graph has vertex set the target group and edges given
    by the images of the parent generators, so the canonical projection is
    1-Lipschitz by construction.
    """

    def __init__(self, hom: Homomorphism, budget: int = DEFAULT_BALL_BUDGET):
        self.hom = hom
        self.parent = hom.source
        self.target = hom.target
        self.budget = budget
        self._steps = []
        for im, inv in zip(hom.images, hom._inv_images):
            self._steps.append(im)
            self._steps.append(inv)
        self._dist = {self.target.identity: 0}
        self._frontier = deque([self.target.identity])
        self._explored_radius = 0

    def _expand_to(self, radius):
        while self._explored_radius < radius and self._frontier:
            next_frontier = deque()
            while self._frontier:
                v = self._frontier.popleft()
                d = self._dist[v]
                for s in self._steps:
                    w = self.target.multiply(v, s)
                    if w not in self._dist:
                        self._dist[w] = d + 1
                        next_frontier.append(w)
                        if len(self._dist) > self.budget:
                            raise BudgetExceededError(
                                "quotient BFS exceeds budget", budget=self.budget
                            )
            self._frontier = next_frontier
            self._explored_radius += 1

    def distance_from_identity(self, q, max_radius: int = 512) -> int:
        if q in self._dist:
            return self._dist[q]
        while q not in self._dist:
            if self._explored_radius >= max_radius or not self._frontier:
                raise BudgetExceededError(
                    f"quotient element not reached within radius {self._explored_radius}"
                )
            self._expand_to(self._explored_radius + 1)
        return self._dist[q]

    def distance(self, g, h) -> int:
        """d_Q(hom(g), hom(h)) in the quotient Cayley graph."""
        qg = self.hom.apply(g)
        qh = self.hom.apply(h)
        delta = self.target.multiply(self.target.inverse(qg), qh)
        return self.distance_from_identity(delta)

    def sphere_counts(self, radius: int):
        """Exact sphere counts of the quotient under the image word metric."""
        self._expand_to(radius)
        counts = [0] * (radius + 1)
        for d in self._dist.values():
            if d <= radius:
                counts[d] += 1
        return counts


def quotient_distance(space: QuotientSpace, g, h) -> int:
    return space.distance(g, h)


# ---------------------------------------------------------------------------
# kernel sphere counts (dual route: Schreier DP and filtered enumeration)
# ---------------------------------------------------------------------------


def kernel_counts_dp(hom: Homomorphism, radius: int, budget: int = DEFAULT_BALL_BUDGET):
    """Sphere counts of ker(hom) inside a free source group, by exact DP.

    Counts reduced source words of each length whose image is trivial, via
    non-backtracking walk counts on the quotient Cayley ball (for an
    abelianization target this is the bounded exponent-sum-vector DP).
    Exact int64 arithmetic; raises on overflow risk.
    """
    source = hom.source
    if not isinstance(source, FreeGroup):
        raise ValueError("kernel DP needs a free source group")
    target = hom.target
    steps = []
    for im, inv in zip(hom.images, hom._inv_images):
        steps.append(im)
        steps.append(inv)
    nletters = len(steps)
    # BFS the quotient ball once, recording neighbor indices as we go
    # (reduced words of length <= radius have images inside this ball)
    vindex = {target.identity: 0}
    verts = [target.identity]
    vdist = [0]
    nbr_rows = []  # per vertex: list of neighbor indices (or -1), one per letter
    head = 0
    while head < len(verts):
        v = verts[head]
        d = vdist[head]
        row = []
        for s in steps:
            w = target.multiply(v, s)
            j = vindex.get(w)
            if j is None:
                if d < radius:
                    j = len(verts)
                    vindex[w] = j
                    verts.append(w)
                    vdist.append(d + 1)
                    if len(verts) > budget:
                        raise BudgetExceededError("quotient ball exceeds budget", budget=budget)
                else:
                    j = -1
            row.append(j)
        nbr_rows.append(row)
        head += 1
    n = len(verts)
    nbr = np.array(nbr_rows, dtype=np.int64).T  # shape (nletters, n)
    # W[i, l] = number of reduced words of the current length with image
    # verts[i] and last letter l; letters flatten as 2*gen + (0 pos, 1 neg)
    counts = [1] + [0] * radius
    if radius == 0:
        return counts
    e = vindex[target.identity]
    W = np.zeros((n, nletters), dtype=np.int64)
    for li in range(nletters):
        j = nbr[li, e]
        if j >= 0:
            W[j, li] += 1
    counts[1] = int(W[e].sum())
    inv_letter = [li ^ 1 for li in range(nletters)]
    for ell in range(2, radius + 1):
        new = np.zeros_like(W)
        for li in range(nletters):
            allowed = W.sum(axis=1) - W[:, inv_letter[li]]
            dest = nbr[li]
            valid = dest >= 0
            np.add.at(new[:, li], dest[valid], allowed[valid])
        W = new
        if W.max() > 2**61:
            raise OverflowError("kernel DP counts exceed int64 range")
        counts[ell] = int(W[e].sum())
    return counts


def kernel_counts_filtered(hom: Homomorphism, radius: int, budget: int = DEFAULT_BALL_BUDGET):
    """Sphere counts of ker(hom) by exhaustive filtered enumeration (oracle route).

    For free sources the depth-first scan carries the image incrementally
    (one multiplication per tree edge); other sources fold each word.
    """
    source = hom.source
    target = hom.target
    identity = target.identity
    counts = [0] * (radius + 1)
    if isinstance(source, FreeGroup):
        mult = target.multiply
        letter_imgs = {}
        for i, (im, inv) in enumerate(zip(hom.images, hom._inv_images)):
            letter_imgs[i + 1] = im
            letter_imgs[-(i + 1)] = inv
        letters = [l for i in range(source.rank) for l in (i + 1, -(i + 1))]
        counts[0] = 1
        visited = 0
        stack = [(l, 1, letter_imgs[l]) for l in reversed(letters)]
        while stack:
            last, depth, img = stack.pop()
            visited += 1
            if visited > budget:
                raise BudgetExceededError("kernel enumeration exceeds budget", budget=budget)
            if img == identity:
                counts[depth] += 1
            if depth < radius:
                nd = depth + 1
                for l in letters:
                    if l != -last:
                        stack.append((l, nd, mult(img, letter_imgs[l])))
        return counts
    if isinstance(source, FreeProductQuotient):
        words = _iter_fpq_words(source, radius, budget)
    else:
        ball = enumerate_ball(source, radius, budget)
        words = zip(ball.elements, ball.dist)
    images = hom.images
    inv_images = hom._inv_images
    mult = target.multiply
    for word, ell in words:
        img = identity
        for l in word:
            img = mult(img, images[l - 1] if l > 0 else inv_images[-l - 1])
        if img == identity:
            counts[ell] += 1
    return counts
