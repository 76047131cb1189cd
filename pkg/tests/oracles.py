"""Independent oracles the tests trust: closed forms and brute-force routes.

Everything here is deliberately separate from the library's own code paths:
closed-form counts, direct summations, exhaustive set arithmetic, and a
spectral transfer-matrix computation.
"""

import itertools
import math
from fractions import Fraction

import numpy as np


def free_sphere_closed(rank, ell):
    """|S(ell)| = 2r (2r-1)^(ell-1) in a free group (regular-tree count)."""
    if ell == 0:
        return 1
    return 2 * rank * (2 * rank - 1) ** (ell - 1)


def free_ball_closed(rank, radius):
    return sum(free_sphere_closed(rank, l) for l in range(radius + 1))


def lattice_sphere_closed(ell):
    """|S(ell)| in the L1 plane: 4*ell for ell >= 1."""
    return 1 if ell == 0 else 4 * ell


def enumerate_reduced_words(rank, radius):
    """All reduced words up to the radius, by brute-force extension."""
    letters = [l for i in range(rank) for l in (i + 1, -(i + 1))]
    words = [()]
    frontier = [()]
    for _ in range(radius):
        nxt = []
        for w in frontier:
            for l in letters:
                if not w or l != -w[-1]:
                    nxt.append(w + (l,))
        words.extend(nxt)
        frontier = nxt
    return words


def lattice_path_count(vector):
    """Number of L1 geodesics from the origin to an integer vector."""
    steps = [abs(v) for v in vector]
    total = sum(steps)
    count = 1
    remaining = total
    for s in steps:
        count *= math.comb(remaining, s)
        remaining -= s
    return count


def twisted_transfer_exponent(rank, coefficients):
    """log spectral radius of the weighted reduced-word transfer matrix."""
    n = 2 * rank
    weights = []
    for i in range(rank):
        weights.append(math.exp(coefficients[i]))
        weights.append(math.exp(-coefficients[i]))
    forbidden = {2 * i: 2 * i + 1 for i in range(rank)}
    forbidden.update({2 * i + 1: 2 * i for i in range(rank)})
    T = np.zeros((n, n))
    for prev in range(n):
        for nxt in range(n):
            if forbidden[prev] != nxt:
                T[prev, nxt] = weights[nxt]
    return math.log(max(abs(np.linalg.eigvals(T))))


def kochen_stone_brute(mu, sets, periods=8):
    """Direct evaluation of the Kochen-Stone quantities on a periodic family.

    Expands the family over ``periods`` copies, computes the double-sum ratio
    at every prefix by raw set arithmetic, and the limsup set as the atoms
    lying in infinitely many B_n (= any B_n of the period).
    """
    mu = [Fraction(m) for m in mu]
    p = len(sets)
    expanded = [frozenset(sets[n % p]) for n in range(periods * p)]

    def mass(s):
        return sum((mu[i] for i in s), Fraction(0))

    ratios = []
    for N in range(1, len(expanded) + 1):
        S = sum((mass(b) for b in expanded[:N]), Fraction(0))
        if S == 0:
            continue
        Dsum = Fraction(0)
        for b1 in expanded[:N]:
            for b2 in expanded[:N]:
                Dsum += mass(b1 & b2)
        ratios.append(Dsum / (S * S))
    limsup = frozenset().union(*[frozenset(b) for b in sets])
    return max(ratios), mass(limsup)


def all_set_families(n_atoms, max_len):
    """Every family of subsets of {0..n_atoms-1} with 1 <= length <= max_len."""
    subsets = []
    for mask in range(2 ** n_atoms):
        subsets.append(frozenset(i for i in range(n_atoms) if mask >> i & 1))
    for length in range(1, max_len + 1):
        yield from itertools.product(subsets, repeat=length)


def direct_orbital_sum(distances, s, theta=None, chi_values=None):
    """Plain-float summation oracle for the weighted twisted orbital series."""
    total = 0.0
    for i, d in enumerate(distances):
        w = theta(d) if theta else 1.0
        t = chi_values[i] if chi_values else 0.0
        total += w * math.exp(t) * math.exp(-s * d)
    return total
