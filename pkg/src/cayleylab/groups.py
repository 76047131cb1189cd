"""Marked groups with decidable word problems and exact integer word metrics.

A marked group fixes an ordered generating alphabet; its Cayley graph is the
ambient geodesic space, the basepoint is the identity, and the group acts on
itself by left translation.  Four kinds are provided:

* ``FreeGroup(r)`` -- free group on r letters, elements are reduced words;
* ``FreeAbelianL1(d)`` -- Z^d with the L1 (taxicab) word metric, elements are
  integer vectors;
* ``FreeProductQuotient(r, orders)`` -- quotient of the free group where some
  generators get a finite order k (free products such as Z/k * Z), elements
  are canonical alternating words with balanced exponents;
* ``FiniteQuotient(table, generators)`` -- a finite group given by its
  multiplication table, elements are indices.

Elements are plain hashable Python values (tuples or ints); all structure
lives on the group object.  Every kind has an exact ``length`` oracle equal
to the breadth-first distance from the identity in its Cayley graph.
"""

from __future__ import annotations

import hashlib
import json
import string
from collections import deque

from .errors import BudgetExceededError, InvalidConfigError

_LABELS = string.ascii_lowercase


def _letter_label(letter: int, labels) -> str:
    name = labels[abs(letter) - 1]
    return name if letter > 0 else name.upper()


def format_word(letters, labels) -> str:
    """Compact string form of a letter tuple; inverses are uppercase."""
    if not letters:
        return "1"
    return "".join(_letter_label(l, labels) for l in letters)


def parse_word(text: str, labels) -> tuple:
    """Parse ``"abA"`` or ``"a b^-1 a^2"`` into a letter tuple (unreduced)."""
    out = []
    i = 0
    text = text.strip()
    if text in ("", "1", "e"):
        return ()
    while i < len(text):
        ch = text[i]
        if ch.isspace() or ch in ".*":
            i += 1
            continue
        low = ch.lower()
        if low not in labels:
            raise InvalidConfigError(f"unknown generator letter {ch!r}")
        letter = labels.index(low) + 1
        if ch.isupper():
            letter = -letter
        i += 1
        exp = 1
        if i < len(text) and text[i] == "^":
            j = i + 1
            if j < len(text) and text[j] in "+-":
                j += 1
            k = j
            while k < len(text) and text[k].isdigit():
                k += 1
            exp = int(text[i + 1 : k])
            i = k
        if exp < 0:
            letter, exp = -letter, -exp
        out.extend([letter] * exp)
    return tuple(out)


class MarkedGroup:
    """Base class: ordered alphabet, multiplication, normal form, exact length."""

    kind = "abstract"

    def __init__(self, labels):
        self.labels = tuple(labels)

    # -- mandatory interface -------------------------------------------------

    @property
    def identity(self):
        raise NotImplementedError

    def multiply(self, g, h):
        raise NotImplementedError

    def inverse(self, g):
        raise NotImplementedError

    def normal_form(self, raw):
        """Canonicalize a raw representation of an element (idempotent)."""
        raise NotImplementedError

    def length(self, g) -> int:
        """d(o, g.o) in the Cayley graph; exact integer."""
        raise NotImplementedError

    def from_letters(self, letters):
        """Element represented by a (possibly unreduced) word over the alphabet."""
        raise NotImplementedError

    def descriptor(self) -> dict:
        """Canonical JSON-able description (used for hashing and configs)."""
        raise NotImplementedError

    # -- derived helpers -----------------------------------------------------

    def alphabet(self):
        """Ordered generator alphabet as (label, element) pairs: g1, g1^-1, g2, ...

        The fixed order is the tie-break used by every deterministic
        enumeration and geodesic choice in the library.
        """
        out = []
        for i, name in enumerate(self.labels):
            gen = self.from_letters((i + 1,))
            inv = self.from_letters((-(i + 1),))
            out.append((name, gen))
            out.append((name.upper(), inv))
        return tuple(out)

    def power(self, g, n: int):
        if n == 0:
            return self.identity
        base = g if n > 0 else self.inverse(g)
        n = abs(n)
        acc = self.identity
        while n:
            if n & 1:
                acc = self.multiply(acc, base)
            base = self.multiply(base, base)
            n >>= 1
        return acc

    def distance(self, g, h) -> int:
        return self.length(self.multiply(self.inverse(g), h))

    def word(self, text: str):
        return self.from_letters(parse_word(text, self.labels))

    def show(self, g) -> str:
        return str(g)

    @property
    def group_hash(self) -> str:
        blob = json.dumps(self.descriptor(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def __repr__(self):
        return f"<{self.kind} on {','.join(self.labels)}>"

    def __eq__(self, other):
        return isinstance(other, MarkedGroup) and self.descriptor() == other.descriptor()

    def __hash__(self):
        return hash(self.group_hash)


def _free_reduce(letters):
    stack = []
    for l in letters:
        if stack and stack[-1] == -l:
            stack.pop()
        else:
            stack.append(l)
    return tuple(stack)


class FreeGroup(MarkedGroup):
    """Free group of rank r; elements are reduced words (tuples of +-letters)."""

    kind = "free"

    def __init__(self, rank: int):
        if not 1 <= rank <= 26:
            raise InvalidConfigError("free group rank must be in 1..26")
        super().__init__(_LABELS[:rank])
        self.rank = rank

    @property
    def identity(self):
        return ()

    def multiply(self, g, h):
        # splice at the seam only; g and h are already reduced
        i = len(g)
        j = 0
        while i > 0 and j < len(h) and g[i - 1] == -h[j]:
            i -= 1
            j += 1
        return g[:i] + h[j:]

    def inverse(self, g):
        return tuple(-l for l in reversed(g))

    def normal_form(self, raw):
        return _free_reduce(raw)

    def from_letters(self, letters):
        return _free_reduce(letters)

    def length(self, g):
        return len(g)

    def show(self, g):
        return format_word(g, self.labels)

    def descriptor(self):
        return {"kind": self.kind, "rank": self.rank}


class FreeAbelianL1(MarkedGroup):
    """Z^d with the taxicab word metric; elements are integer vectors."""

    kind = "free_abelian_L1"

    def __init__(self, dim: int):
        if not 1 <= dim <= 26:
            raise InvalidConfigError("dimension must be in 1..26")
        super().__init__(_LABELS[:dim])
        self.dim = dim

    @property
    def identity(self):
        return (0,) * self.dim

    def multiply(self, g, h):
        return tuple(a + b for a, b in zip(g, h))

    def inverse(self, g):
        return tuple(-a for a in g)

    def normal_form(self, raw):
        v = tuple(int(a) for a in raw)
        if len(v) != self.dim:
            raise InvalidConfigError(f"expected a vector of dimension {self.dim}")
        return v

    def from_letters(self, letters):
        v = [0] * self.dim
        for l in letters:
            v[abs(l) - 1] += 1 if l > 0 else -1
        return tuple(v)

    def length(self, g):
        return sum(abs(a) for a in g)

    def show(self, g):
        return "(" + ",".join(str(a) for a in g) + ")"

    def descriptor(self):
        return {"kind": self.kind, "dim": self.dim}


class FreeProductQuotient(MarkedGroup):
    """Free product of cyclic groups: generator i has order ``orders[i]`` (None = infinite).

    The quotient of the free group by the relators g_i^{k_i}.  Elements are
    canonical words: maximal runs of one generator carry a balanced exponent
    (for order k the exponent lies in (-k/2, k/2], ties going to +k/2), and
    the word metric is the sum of |exponent| over runs.
    """

    kind = "free_product_quotient"

    def __init__(self, rank: int, orders):
        if not 1 <= rank <= 26:
            raise InvalidConfigError("rank must be in 1..26")
        super().__init__(_LABELS[:rank])
        self.rank = rank
        if isinstance(orders, dict):
            orders = [orders.get(i) for i in range(rank)]
        orders = list(orders) + [None] * (rank - len(orders))
        for k in orders:
            if k is not None and k < 1:
                raise InvalidConfigError("finite generator order must be >= 1")
        self.orders = tuple(orders)  # order 1 kills the generator outright

    @property
    def identity(self):
        return ()

    def _canonical_runs(self, letters):
        runs = []  # [gen0based, exponent]; finite-order exponents kept in [0, k)
        for l in letters:
            gen = abs(l) - 1
            e = 1 if l > 0 else -1
            if runs and runs[-1][0] == gen:
                runs[-1][1] += e
            else:
                runs.append([gen, e])
            k = self.orders[gen]
            if k is not None:
                runs[-1][1] %= k
            if runs[-1][1] == 0:
                runs.pop()
        return runs

    def _expand(self, runs):
        out = []
        for gen, e in runs:
            k = self.orders[gen]
            if k is not None and e > k - e:
                e -= k  # balanced representative; tie e == k - e stays positive
            letter = gen + 1 if e > 0 else -(gen + 1)
            out.extend([letter] * abs(e))
        return tuple(out)

    def normal_form(self, raw):
        return self._expand(self._canonical_runs(raw))

    def from_letters(self, letters):
        return self.normal_form(letters)

    def multiply(self, g, h):
        if len(h) == 1:
            # canonical words have alternating single-sign runs, so appending
            # one letter only touches the trailing run
            l = h[0]
            gen = abs(l) - 1
            i = len(g)
            while i > 0 and abs(g[i - 1]) - 1 == gen:
                i -= 1
            e = sum(1 if x > 0 else -1 for x in g[i:]) + (1 if l > 0 else -1)
            k = self.orders[gen]
            if k is not None:
                e %= k
                if e > k - e:
                    e -= k
            if e == 0:
                return g[:i]
            letter = gen + 1 if e > 0 else -(gen + 1)
            return g[:i] + (letter,) * abs(e)
        return self.normal_form(g + h)

    def inverse(self, g):
        return self.normal_form(tuple(-l for l in reversed(g)))

    def length(self, g):
        return len(g)

    def show(self, g):
        return format_word(g, self.labels)

    def descriptor(self):
        return {"kind": self.kind, "rank": self.rank, "orders": list(self.orders)}


class FiniteQuotient(MarkedGroup):
    """Finite group given by a multiplication table; elements are indices.

    ``generators`` lists the indices marking the group; the alphabet is each
    generator followed by its table inverse.  Lengths come from one BFS.
    """

    kind = "finite_quotient"

    def __init__(self, table, generators, labels=None):
        n = len(table)
        self.table = tuple(tuple(int(x) for x in row) for row in table)
        for row in self.table:
            if len(row) != n or any(not 0 <= x < n for x in row):
                raise InvalidConfigError("multiplication table is not square over 0..n-1")
        self._identity = self._find_identity()
        self.generators = tuple(int(g) for g in generators)
        if labels is None:
            labels = _LABELS[: len(self.generators)]
        super().__init__(labels)
        self._inv = self._invert_table()
        self._dist = self._bfs_lengths()

    def _find_identity(self):
        n = len(self.table)
        for e in range(n):
            if all(self.table[e][x] == x and self.table[x][e] == x for x in range(n)):
                return e
        raise InvalidConfigError("table has no identity element")

    def _invert_table(self):
        n = len(self.table)
        inv = [None] * n
        for g in range(n):
            for h in range(n):
                if self.table[g][h] == self._identity:
                    inv[g] = h
                    break
            if inv[g] is None:
                raise InvalidConfigError(f"element {g} has no inverse")
        return tuple(inv)

    def _bfs_lengths(self):
        n = len(self.table)
        dist = [None] * n
        dist[self._identity] = 0
        queue = deque([self._identity])
        steps = []
        for g in self.generators:
            steps.append(g)
            steps.append(self._inv[g])
        while queue:
            v = queue.popleft()
            for s in steps:
                w = self.table[v][s]
                if dist[w] is None:
                    dist[w] = dist[v] + 1
                    queue.append(w)
        if any(d is None for d in dist):
            raise InvalidConfigError("the listed generators do not generate the group")
        return tuple(dist)

    @property
    def identity(self):
        return self._identity

    def multiply(self, g, h):
        return self.table[g][h]

    def inverse(self, g):
        return self._inv[g]

    def normal_form(self, raw):
        g = int(raw)
        if not 0 <= g < len(self.table):
            raise InvalidConfigError("element index out of range")
        return g

    def from_letters(self, letters):
        g = self._identity
        for l in letters:
            s = self.generators[abs(l) - 1]
            if l < 0:
                s = self._inv[s]
            g = self.table[g][s]
        return g

    def length(self, g):
        return self._dist[g]

    def show(self, g):
        return f"[{g}]"

    def descriptor(self):
        return {
            "kind": self.kind,
            "table": [list(r) for r in self.table],
            "generators": list(self.generators),
        }


class Homomorphism:
    """Homomorphism from a word-based marked group, given by generator images."""

    def __init__(self, source: MarkedGroup, target: MarkedGroup, images):
        self.source = source
        self.target = target
        if len(images) != len(source.labels):
            raise InvalidConfigError("need one image per source generator")
        self.images = tuple(target.normal_form(im) for im in images)
        self._inv_images = tuple(target.inverse(im) for im in self.images)

    def apply(self, g):
        if isinstance(self.source, FreeAbelianL1):
            out = self.target.identity
            for i, e in enumerate(g):
                out = self.target.multiply(out, self.target.power(self.images[i], e))
            return out
        out = self.target.identity
        for l in g:
            im = self.images[l - 1] if l > 0 else self._inv_images[-l - 1]
            out = self.target.multiply(out, im)
        return out

    def in_kernel(self, g) -> bool:
        return self.apply(g) == self.target.identity

    def descriptor(self):
        return {
            "source": self.source.descriptor(),
            "target": self.target.descriptor(),
            "images": [_jsonable_element(im) for im in self.images],
        }


def _jsonable_element(el):
    if isinstance(el, tuple):
        return list(el)
    return el


def group_from_config(spec: dict) -> MarkedGroup:
    """Build a marked group from its JSON descriptor."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise InvalidConfigError("group spec must be a dict with a 'kind'")
    kind = spec["kind"]
    if kind == "free":
        return FreeGroup(int(spec["rank"]))
    if kind == "free_abelian_L1":
        return FreeAbelianL1(int(spec.get("dim", spec.get("rank", 0))))
    if kind == "free_product_quotient":
        orders = spec.get("orders")
        if orders is None:
            orders = {}
            for rel in spec.get("relators", []):
                orders[int(rel["generator"])] = int(rel["order"])
        if isinstance(orders, dict):
            orders = {int(k): v for k, v in orders.items()}
        return FreeProductQuotient(int(spec["rank"]), orders)
    if kind == "finite_quotient":
        return FiniteQuotient(spec["table"], spec["generators"], spec.get("labels"))
    raise InvalidConfigError(f"unknown group kind {kind!r}")


def element_from_config(group: MarkedGroup, data):
    """Read an element from config form: word string, letter list, vector, or index."""
    if isinstance(data, str):
        return group.word(data)
    if isinstance(group, FreeAbelianL1):
        return group.normal_form(data)
    if isinstance(group, FiniteQuotient):
        return group.normal_form(data)
    return group.from_letters(tuple(int(x) for x in data))


def hom_from_config(spec: dict) -> Homomorphism:
    source = group_from_config(spec["source"])
    target = group_from_config(spec["target"])
    raw_images = spec["images"]
    if isinstance(raw_images, dict):
        raw_images = [raw_images[name] for name in source.labels]
    images = [element_from_config(target, im) for im in raw_images]
    return Homomorphism(source, target, images)
