"""Finite groups as explicit Cayley tables.

Every group is a table ``cayley[a, b] = a ⊙ b`` over canonical element
indices.  Products are read left to right: in a prefix product
``x1 ⊙ x2 ⊙ ... ⊙ xt`` the token ``x1`` acts first.  For permutation groups
this means ``a ⊙ b`` is the permutation ``i -> a[b[i]]`` in one-line
notation, i.e. ``a`` rearranges positions first and ``b`` then rearranges the
result.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    InvalidTable,
    NotASubgroup,
    NotAbelian,
    NotNormal,
    NotSolvable,
    SizeLimit,
)

MAX_ORDER = 10080
EXHAUSTIVE_AXIOM_LIMIT = 256
SPOT_CHECK_TRIPLES = 10_000

# Paper-compatible S3 order: e, (12), (13), (23), (123), (132).
_S3_ONE_LINE = [(0, 1, 2), (1, 0, 2), (2, 1, 0), (0, 2, 1), (1, 2, 0), (2, 0, 1)]


@dataclass(frozen=True, eq=False)
class FiniteGroup:
    order: int
    cayley: np.ndarray
    identity_index: int
    element_labels: tuple[str, ...]
    spec: str
    inverses: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        table = np.asarray(self.cayley, dtype=np.int64)
        table.setflags(write=False)
        object.__setattr__(self, "cayley", table)
        _check_axioms(table, self.identity_index)
        inv = np.argmax(table == self.identity_index, axis=1)
        inv.setflags(write=False)
        object.__setattr__(self, "inverses", inv)

    def __len__(self):
        return self.order

    def __repr__(self):
        return f"FiniteGroup({self.spec!r}, order={self.order})"

    @property
    def identity(self) -> int:
        return self.identity_index

    def label(self, g: int) -> str:
        return self.element_labels[g]

    def index_of(self, label: str) -> int:
        try:
            return self.element_labels.index(label)
        except ValueError:
            raise KeyError(f"no element labelled {label!r} in {self.spec}") from None

    def full_mask(self) -> "SubgroupMask":
        return SubgroupMask(np.ones(self.order, dtype=bool))

    def trivial_mask(self) -> "SubgroupMask":
        m = np.zeros(self.order, dtype=bool)
        m[self.identity_index] = True
        return SubgroupMask(m)


@dataclass(frozen=True, eq=False)
class SubgroupMask:
    members: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.members, dtype=bool).copy()
        m.setflags(write=False)
        object.__setattr__(self, "members", m)

    @property
    def order(self) -> int:
        return int(self.members.sum())

    def elements(self) -> np.ndarray:
        return np.flatnonzero(self.members)

    def __contains__(self, g) -> bool:
        return bool(self.members[g])

    def __eq__(self, other):
        if not isinstance(other, SubgroupMask):
            return NotImplemented
        return np.array_equal(self.members, other.members)

    def __hash__(self):
        return hash(self.members.tobytes())


@dataclass(frozen=True)
class SubnormalSeries:
    """Chain from the whole group down to the trivial subgroup."""

    chain: tuple[SubgroupMask, ...]

    @property
    def length(self) -> int:
        return len(self.chain) - 1

    def orders(self) -> list[int]:
        return [m.order for m in self.chain]


@dataclass(frozen=True, eq=False)
class AbelianDecomposition:
    cyclic_orders: tuple[int, ...]
    generators: tuple[int, ...]
    iso: np.ndarray  # (order, n) exponent vectors

    def coords(self, g: int) -> tuple[int, ...]:
        return tuple(int(v) for v in self.iso[g])


@dataclass(frozen=True, eq=False)
class QuotientMap:
    quotient: FiniteGroup
    projection: np.ndarray
    section: np.ndarray


def _check_axioms(table: np.ndarray, identity: int) -> None:
    if table.ndim != 2 or table.shape[0] != table.shape[1]:
        raise InvalidTable("Cayley table must be square")
    n = table.shape[0]
    if n < 1:
        raise InvalidTable("group must be nonempty")
    if n > MAX_ORDER:
        raise SizeLimit(f"order {n} exceeds cap {MAX_ORDER}")
    if table.min() < 0 or table.max() >= n:
        raise InvalidTable("table entries out of range")
    if not 0 <= identity < n:
        raise InvalidTable("identity index out of range")
    ar = np.arange(n)
    if not (np.array_equal(table[identity], ar) and np.array_equal(table[:, identity], ar)):
        raise InvalidTable("identity row/column is not the identity map")
    srt = np.sort(table, axis=1)
    if not (srt == ar).all():
        raise InvalidTable("a row is not a permutation")
    srt = np.sort(table, axis=0)
    if not (srt == ar[:, None]).all():
        raise InvalidTable("a column is not a permutation")
    if n <= EXHAUSTIVE_AXIOM_LIMIT:
        # (ab)c == a(bc) for every triple, one left operand at a time
        for a in range(n):
            if not np.array_equal(table[table[a]], table[a][table]):
                raise InvalidTable(f"associativity fails with left operand {a}")
    else:
        rng = np.random.default_rng(0)
        a, b, c = rng.integers(0, n, size=(3, SPOT_CHECK_TRIPLES))
        if not np.array_equal(table[table[a, b], c], table[a, table[b, c]]):
            raise InvalidTable("associativity fails on a sampled triple")


# -- construction ------------------------------------------------------------


def cycle_notation(perm: Sequence[int]) -> str:
    """One-line permutation (0-based) to cycle notation with 1-based points."""
    seen = [False] * len(perm)
    cycles = []
    for start in range(len(perm)):
        if seen[start]:
            continue
        cyc = [start]
        seen[start] = True
        j = perm[start]
        while j != start:
            cyc.append(j)
            seen[j] = True
            j = perm[j]
        if len(cyc) > 1:
            cycles.append(cyc)
    if not cycles:
        return "e"
    sep = "," if len(perm) > 9 else ""
    return "".join("(" + sep.join(str(p + 1) for p in c) + ")" for c in cycles)


def _perm_parity(p: Sequence[int]) -> int:
    inv = 0
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                inv += 1
    return inv % 2


def _permutation_group(perms: list[tuple[int, ...]], spec: str) -> FiniteGroup:
    if len(perms) > MAX_ORDER:
        raise SizeLimit(f"{spec} has order {len(perms)} > {MAX_ORDER}")
    arr = np.array(perms, dtype=np.int64).reshape(len(perms), -1)
    n = arr.shape[1]
    weights = n ** np.arange(n - 1, -1, -1, dtype=np.int64)
    codes = arr @ weights
    order = np.argsort(codes)
    sorted_codes = codes[order]
    table = np.empty((len(perms), len(perms)), dtype=np.int64)
    for a in range(len(perms)):
        prod = arr[a][arr]  # prod[b, i] = a[b[i]]
        pos = np.searchsorted(sorted_codes, prod @ weights)
        table[a] = order[pos]
    identity = perms.index(tuple(range(n)))
    labels = tuple(cycle_notation(p) for p in perms)
    return FiniteGroup(len(perms), table, identity, labels, spec)


def cyclic(n: int) -> FiniteGroup:
    if n < 1:
        raise InvalidTable("cyclic group needs n >= 1")
    if n > MAX_ORDER:
        raise SizeLimit(f"cyclic:{n} exceeds cap {MAX_ORDER}")
    ar = np.arange(n)
    table = (ar[:, None] + ar[None, :]) % n
    return FiniteGroup(n, table, 0, tuple(str(i) for i in range(n)), f"cyclic:{n}")


def symmetric(n: int) -> FiniteGroup:
    if n < 1:
        raise InvalidTable("symmetric group needs n >= 1")
    if math.factorial(n) > MAX_ORDER:
        raise SizeLimit(f"symmetric:{n} has order {math.factorial(n)} > {MAX_ORDER}")
    if n == 3:
        perms = list(_S3_ONE_LINE)
    else:
        perms = list(itertools.permutations(range(n)))
    return _permutation_group(perms, f"symmetric:{n}")


def alternating(n: int) -> FiniteGroup:
    if n < 1:
        raise InvalidTable("alternating group needs n >= 1")
    if math.factorial(n) // 2 > MAX_ORDER:
        raise SizeLimit(f"alternating:{n} exceeds cap {MAX_ORDER}")
    perms = [p for p in itertools.permutations(range(n)) if _perm_parity(p) == 0]
    return _permutation_group(perms, f"alternating:{n}")


def direct_product(a: FiniteGroup, b: FiniteGroup) -> FiniteGroup:
    n = a.order * b.order
    if n > MAX_ORDER:
        raise SizeLimit(f"product order {n} > {MAX_ORDER}")
    # index of (i, j) is i * |B| + j
    ta = a.cayley[:, None, :, None]
    tb = b.cayley[None, :, None, :]
    table = (ta * b.order + tb).reshape(n, n)
    labels = tuple(f"({la},{lb})" for la in a.element_labels for lb in b.element_labels)
    identity = a.identity_index * b.order + b.identity_index
    return FiniteGroup(n, table, identity, labels, f"product:{a.spec},{b.spec}")


def from_table(raw, labels: Sequence[str] | None = None, spec: str = "table") -> FiniteGroup:
    table = np.asarray(raw, dtype=np.int64)
    if table.ndim != 2 or table.shape[0] != table.shape[1] or table.shape[0] == 0:
        raise InvalidTable("Cayley table must be a nonempty square array")
    n = table.shape[0]
    if n > MAX_ORDER:
        raise SizeLimit(f"order {n} > {MAX_ORDER}")
    ar = np.arange(n)
    candidates = [e for e in range(n) if np.array_equal(table[e], ar)]
    if not candidates:
        raise InvalidTable("no identity element")
    if labels is None:
        labels = [str(i) for i in range(n)]
    if len(labels) != n:
        raise InvalidTable("label count does not match order")
    return FiniteGroup(n, table, candidates[0], tuple(labels), spec)


def parse_spec(text: str):
    """Parse ``cyclic:60`` / ``product:cyclic:2,cyclic:4`` style descriptors.

    Returns a nested tuple such as ``("product", [("cyclic", 2), ("cyclic", 4)])``.
    """
    text = text.strip()
    kind, _, rest = text.partition(":")
    if kind == "product":
        parts = [p for p in rest.split(",") if p]
        if len(parts) < 2:
            raise ValueError(f"product needs at least two factors: {text!r}")
        return ("product", [parse_spec(p) for p in parts])
    if kind in ("cyclic", "symmetric", "alternating"):
        try:
            n = int(rest)
        except ValueError:
            raise ValueError(f"bad group size in {text!r}") from None
        return (kind, n)
    raise ValueError(f"unknown group descriptor {text!r}")


def construct_group(spec) -> FiniteGroup:
    """Build a group from a descriptor string or parsed tuple."""
    if isinstance(spec, str):
        spec = parse_spec(spec)
    kind, arg = spec
    if kind == "cyclic":
        return cyclic(arg)
    if kind == "symmetric":
        return symmetric(arg)
    if kind == "alternating":
        return alternating(arg)
    if kind == "product":
        groups = [construct_group(s) for s in arg]
        out = groups[0]
        for g in groups[1:]:
            out = direct_product(out, g)
        return out
    if kind == "table":
        return from_table(arg)
    raise ValueError(f"unknown group kind {kind!r}")


# -- element operations ------------------------------------------------------


def multiply(G: FiniteGroup, a: int, b: int) -> int:
    return int(G.cayley[a, b])


def inverse(G: FiniteGroup, a: int) -> int:
    return int(G.inverses[a])


def power(G: FiniteGroup, a: int, k: int) -> int:
    if k < 0:
        a, k = inverse(G, a), -k
    out = G.identity_index
    for _ in range(k):
        out = int(G.cayley[out, a])
    return out


def element_orders(G: FiniteGroup) -> np.ndarray:
    orders = np.zeros(G.order, dtype=np.int64)
    cur = np.arange(G.order)
    ar = np.arange(G.order)
    for k in range(1, G.order + 1):
        done = (cur == G.identity_index) & (orders == 0)
        orders[done] = k
        if (orders > 0).all():
            break
        cur = G.cayley[cur, ar]
    return orders


def is_abelian(G: FiniteGroup) -> bool:
    return bool(np.array_equal(G.cayley, G.cayley.T))


def prefix_products(G: FiniteGroup, seq: Sequence[int]) -> list[int]:
    out = []
    acc = G.identity_index
    for x in seq:
        acc = int(G.cayley[acc, x])
        out.append(acc)
    return out


def prefix_products_batch(G: FiniteGroup, seqs: np.ndarray) -> np.ndarray:
    """Row-wise prefix products of a (count, length) token array."""
    seqs = np.asarray(seqs, dtype=np.int64)
    out = np.empty_like(seqs)
    acc = np.full(seqs.shape[0], G.identity_index, dtype=np.int64)
    for t in range(seqs.shape[1]):
        acc = G.cayley[acc, seqs[:, t]]
        out[:, t] = acc
    return out


# -- subgroups ---------------------------------------------------------------


def closure(G: FiniteGroup, generators) -> SubgroupMask:
    """Subgroup generated by ``generators``."""
    members = np.zeros(G.order, dtype=bool)
    members[G.identity_index] = True
    members[np.asarray(list(generators), dtype=np.int64)] = True
    while True:
        elems = np.flatnonzero(members)
        new = members.copy()
        new[G.cayley[np.ix_(elems, elems)].ravel()] = True
        if new.sum() == members.sum():
            return SubgroupMask(members)
        members = new


def is_subgroup(G: FiniteGroup, H: SubgroupMask) -> bool:
    m = H.members
    if m.shape != (G.order,) or not m[G.identity_index]:
        return False
    elems = np.flatnonzero(m)
    return bool(m[G.cayley[np.ix_(elems, elems)]].all() and m[G.inverses[elems]].all())


def is_normal(G: FiniteGroup, H: SubgroupMask) -> bool:
    if not is_subgroup(G, H):
        raise NotASubgroup("mask is not a subgroup")
    elems = H.elements()
    # g^-1 h g for every g (rows) and h in H (columns)
    conj = G.cayley[G.cayley[G.inverses[:, None], elems[None, :]], np.arange(G.order)[:, None]]
    return bool(H.members[conj].all())


def commutator_subgroup(G: FiniteGroup) -> SubgroupMask:
    ar = np.arange(G.order)
    ab = G.cayley[ar[:, None], ar[None, :]]
    comm = G.cayley[G.cayley[ab, G.inverses[:, None]], G.inverses[None, :]]
    return closure(G, np.unique(comm))


def subgroup_as_group(G: FiniteGroup, H: SubgroupMask, spec: str | None = None):
    """Re-index ``H`` as a standalone group.

    Returns ``(group, embed)`` where ``embed[i]`` is the index in ``G`` of the
    subgroup's ``i``-th element (ascending ``G`` order).
    """
    embed = H.elements()
    lookup = np.full(G.order, -1, dtype=np.int64)
    lookup[embed] = np.arange(len(embed))
    table = lookup[G.cayley[np.ix_(embed, embed)]]
    if (table < 0).any():
        raise NotASubgroup("mask is not closed under the group operation")
    labels = [G.element_labels[g] for g in embed]
    sub = from_table(table, labels, spec or f"sub({G.spec};{len(embed)})")
    return sub, embed


def _restrict(G: FiniteGroup, H: SubgroupMask, K: SubgroupMask) -> SubgroupMask:
    # K as a mask over the re-indexed subgroup H
    return SubgroupMask(K.members[H.elements()])


def derived_series(G: FiniteGroup) -> SubnormalSeries:
    """G ⊵ [G,G] ⊵ ... ⊵ {e}; raises NotSolvable if the chain stalls."""
    chain = [G.full_mask()]
    sub, embed = G, np.arange(G.order)
    while chain[-1].order > 1:
        comm = commutator_subgroup(sub)
        if comm.order == sub.order:
            raise NotSolvable(G.spec, chain[-1])
        members = np.zeros(G.order, dtype=bool)
        members[embed[comm.elements()]] = True
        chain.append(SubgroupMask(members))
        sub, inner = subgroup_as_group(sub, comm)
        embed = embed[inner]
    return SubnormalSeries(tuple(chain))


def derived_length(G: FiniteGroup) -> int:
    return derived_series(G).length


def is_solvable(G: FiniteGroup) -> bool:
    try:
        derived_series(G)
    except NotSolvable:
        return False
    return True


def quotient(G: FiniteGroup, N: SubgroupMask) -> QuotientMap:
    if not is_normal(G, N):
        raise NotNormal("subgroup is not normal")
    n_elems = N.elements()
    projection = np.full(G.order, -1, dtype=np.int64)
    reps = []
    for g in range(G.order):
        if projection[g] >= 0:
            continue
        coset = G.cayley[g, n_elems]
        projection[coset] = len(reps)
        reps.append(g)
    section = np.array(reps, dtype=np.int64)
    section[projection[G.identity_index]] = G.identity_index
    table = projection[G.cayley[np.ix_(section, section)]]
    labels = [f"{G.element_labels[r]}N" for r in section]
    Q = FiniteGroup(len(reps), table, int(projection[G.identity_index]), tuple(labels),
                    f"quotient({G.spec};{N.order})")
    return QuotientMap(Q, projection, section)


def validate_series(G: FiniteGroup, series: SubnormalSeries) -> None:
    from .errors import InvalidSeries

    chain = series.chain
    if not chain or chain[0] != G.full_mask():
        raise InvalidSeries("series must start at the whole group")
    if chain[-1] != G.trivial_mask():
        raise InvalidSeries("series must end at the trivial subgroup")
    for upper, lower in zip(chain, chain[1:]):
        if not is_subgroup(G, lower) or (lower.members & ~upper.members).any():
            raise InvalidSeries("each member must be a subgroup of its predecessor")
        sub, _ = subgroup_as_group(G, upper)
        inner = _restrict(G, upper, lower)
        if not is_normal(sub, inner):
            raise InvalidSeries("each member must be normal in its predecessor")
        if not is_abelian(quotient(sub, inner).quotient):
            raise InvalidSeries("factor group is not Abelian")


# -- Abelian structure -------------------------------------------------------


def _prime_factors(n: int) -> list[int]:
    out, p = [], 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def invariant_factors(G: FiniteGroup) -> list[int]:
    """Invariant factors k_1 | k_2 | ... of an Abelian group (ascending)."""
    if not is_abelian(G):
        raise NotAbelian(f"{G.spec} is not Abelian")
    orders = element_orders(G)
    per_prime: list[list[int]] = []
    for p in _prime_factors(G.order):
        # elements whose order divides p^k, for growing k
        pk_max = 1
        while G.order % (pk_max * p) == 0:
            pk_max *= p
        counts = [1]
        pk = 1
        while pk < pk_max:
            pk *= p
            counts.append(int(((orders <= pk) & (pk % orders == 0)).sum()))
        # number of cyclic factors with exponent >= k
        at_least = [round(math.log(counts[k] / counts[k - 1], p)) for k in range(1, len(counts))]
        exps = []
        for k, cnt in enumerate(at_least, start=1):
            nxt = at_least[k] if k < len(at_least) else 0
            exps.extend([k] * (cnt - nxt))
        per_prime.append(sorted((p ** e for e in exps), reverse=True))
    width = max((len(x) for x in per_prime), default=0)
    factors = []
    for j in range(width):
        k = 1
        for x in per_prime:
            if j < len(x):
                k *= x[j]
        factors.append(k)
    return sorted(factors)


def abelian_decomposition(G: FiniteGroup) -> AbelianDecomposition:
    """Explicit isomorphism G ≅ C_{k_1} × ... × C_{k_n} in invariant-factor form.

    Generators are chosen greedily by ascending index, largest factor first,
    with backtracking; for ``cyclic:n`` this picks the generator 1 so the
    isomorphism is the identity on residues.
    """
    factors = invariant_factors(G)
    orders = element_orders(G)
    want = sorted(factors, reverse=True)

    def powers_of(g):
        out = [G.identity_index]
        for _ in range(orders[g] - 1):
            out.append(int(G.cayley[out[-1], g]))
        return out

    def search(chosen, members):
        if len(chosen) == len(want):
            return chosen
        k = want[len(chosen)]
        for g in np.flatnonzero(orders == k):
            pw = powers_of(int(g))
            if members[pw[1:]].any():
                continue
            elems = np.flatnonzero(members)
            grown = members.copy()
            grown[G.cayley[np.ix_(elems, pw)].ravel()] = True
            found = search(chosen + [int(g)], grown)
            if found is not None:
                return found
        return None

    start = np.zeros(G.order, dtype=bool)
    start[G.identity_index] = True
    gens_desc = search([], start)
    if gens_desc is None:  # pragma: no cover - invariant factors guarantee a basis
        raise NotAbelian("failed to find a cyclic basis")
    gens = list(reversed(gens_desc))
    cyclic_orders = tuple(int(k) for k in reversed(want))

    iso = np.zeros((G.order, len(gens)), dtype=np.int64)
    seen = np.zeros(G.order, dtype=bool)
    pows = [powers_of(g) for g in gens]
    for coords in itertools.product(*(range(k) for k in cyclic_orders)):
        g = G.identity_index
        for j, m in enumerate(coords):
            g = int(G.cayley[g, pows[j][m]])
        if seen[g]:  # pragma: no cover
            raise NotAbelian("generators are not independent")
        seen[g] = True
        iso[g] = coords
    iso.setflags(write=False)
    dec = AbelianDecomposition(cyclic_orders, tuple(gens), iso)
    _check_decomposition(G, dec)
    return dec


def _check_decomposition(G: FiniteGroup, dec: AbelianDecomposition) -> None:
    if not dec.cyclic_orders:
        return
    k = np.array(dec.cyclic_orders)
    lhs = dec.iso[G.cayley]  # (n, n, m)
    rhs = (dec.iso[:, None, :] + dec.iso[None, :, :]) % k
    if not np.array_equal(lhs, rhs):  # pragma: no cover
        raise NotAbelian("decomposition is not a homomorphism")
