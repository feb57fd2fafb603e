"""Compile finite solvable groups into exact diagonal SSMs.

Abelian groups become a single layer of roots of unity, one coordinate per
invariant factor.  A solvable group ``G`` with normal subgroup ``N`` (the
next entry of a subnormal series) becomes one Abelian layer tracking the
quotient ``H = G/N`` stacked on a recursively compiled model for ``N``.  The
joint state ``(h', n')`` stands for the element ``n' s(h')`` where ``s`` is a
section of the quotient map; on input ``g = s(h) n`` the deeper layers are
driven by the effective token ``kappa(h', g) ∈ N`` so that

    n' s(h') g = n' kappa(h', g) s(h' h).

Deeper layers see ``h'`` through their context key, which is how the token
``kappa(h', g)`` is realized without any extra channel.
"""

from __future__ import annotations

from dataclasses import dataclass

import mpmath
import numpy as np

from . import group_core as gc
from .errors import InvalidSeries, NotAbelian, NotNormal
from .group_core import FiniteGroup, QuotientMap, SubgroupMask, SubnormalSeries
from .ssm import DcdSsm, FinitePrecisionConfig, LayerTable

DEFAULT_VERIFY_DEPTH = 5


def root_of_unity(m: int, k: int, digits: int) -> complex:
    """``exp(2πi m/k)`` from the exact fraction, rounded once to ``digits`` decimals."""
    m %= k
    with mpmath.workdps(40):
        turns = mpmath.mpf(2 * m) / k
        re, im = mpmath.cospi(turns), mpmath.sinpi(turns)
    return complex(round(float(re), digits), round(float(im), digits))


@dataclass(frozen=True, eq=False)
class SectionCocycle:
    quotient_map: QuotientMap
    d_table: np.ndarray  # (|H|, |H|) -> element of N, as G index
    kappa_table: np.ndarray  # (|H|, |G|) -> element of N, as G index

    def section(self, h: int) -> int:
        return int(self.quotient_map.section[h])

    def d(self, h1: int, h2: int) -> int:
        return int(self.d_table[h1, h2])

    def kappa(self, h1: int, g: int) -> int:
        return int(self.kappa_table[h1, g])


def build_section_cocycle(G: FiniteGroup, N: SubgroupMask) -> SectionCocycle:
    qm = gc.quotient(G, N)  # raises NotNormal
    H = qm.quotient
    s, proj = qm.section, qm.projection
    mul, inv = G.cayley, G.inverses
    hh = H.cayley  # h' h in the quotient
    # d(h', h) = s(h') s(h) s(h'h)^-1
    d = mul[mul[s[:, None], s[None, :]], inv[s[hh]]]
    # g = s(h) n with h = proj(g)
    h_of = proj
    n_of = mul[inv[s[h_of]], np.arange(G.order)]
    target = s[hh[:, h_of]]  # s(h' h) per (h', g)
    conj = mul[mul[target, n_of[None, :]], inv[target]]
    kappa = mul[d[:, h_of], conj]
    if not N.members[d].all() or not N.members[kappa].all():  # pragma: no cover
        raise NotNormal("cocycle left the normal subgroup")
    e = G.identity_index
    eh = H.identity_index
    assert (d[eh] == e).all() and (d[:, eh] == e).all()
    assert (kappa[:, e] == e).all()
    return SectionCocycle(qm, d, kappa)


def compile_abelian(G: FiniteGroup, precision: FinitePrecisionConfig | None = None,
                    verify_depth: int = 0) -> DcdSsm:
    """One layer; coordinate ``j`` multiplies by ``exp(2πi m_j/k_j)`` for token ``g``."""
    precision = precision or FinitePrecisionConfig()
    if not gc.is_abelian(G):
        raise NotAbelian(f"{G.spec} is not Abelian")
    dec = gc.abelian_decomposition(G)
    orders = list(dec.cyclic_orders) or [1]
    iso = dec.iso if dec.cyclic_orders else np.zeros((G.order, 1), dtype=np.int64)
    digits = precision.round_digits
    roots = [[root_of_unity(m, k, digits) for m in range(k)] for k in orders]
    lam = np.array([[roots[j][iso[g, j]] for j in range(len(orders))] for g in range(G.order)],
                   dtype=np.complex128)
    layer = LayerTable(
        dim=len(orders),
        context_arity=0,
        context_anchors=np.zeros((1, 0), dtype=np.complex128),
        lam=lam[None, :, :],
        b=np.zeros((1, G.order, len(orders)), dtype=np.complex128),
    )
    # starting from all-ones, the state after prefix product g is lam(g)
    model = DcdSsm(
        layers=(layer,),
        h0=(np.ones(len(orders), dtype=np.complex128),),
        decoder_anchors=lam.copy(),
        decoder_elements=np.arange(G.order),
        group_spec=G.spec,
        precision=precision,
    )
    _gate(model, G, verify_depth)
    return model


def _compile_chain(G: FiniteGroup, chain: list[SubgroupMask], precision) -> DcdSsm:
    if len(chain) <= 2:
        return compile_abelian(G, precision)
    N = chain[1]
    cocycle = build_section_cocycle(G, N)
    qm = cocycle.quotient_map
    top = compile_abelian(qm.quotient, precision)
    sub, embed = gc.subgroup_as_group(G, N)
    to_sub = np.full(G.order, -1, dtype=np.int64)
    to_sub[embed] = np.arange(len(embed))
    inner = _compile_chain(sub, [SubgroupMask(m.members[embed]) for m in chain[1:]], precision)

    top_layer = top.layers[0]
    # top decoder anchors are ordered by quotient element
    top_anchor_of = np.empty(qm.quotient.order, dtype=np.int64)
    top_anchor_of[top.decoder_elements] = np.arange(len(top.decoder_elements))
    top_anchors = top.decoder_anchors
    top_elements = top.decoder_elements

    layers = [LayerTable(
        dim=top_layer.dim,
        context_arity=0,
        context_anchors=np.zeros((1, 0), dtype=np.complex128),
        lam=top_layer.lam[:, qm.projection, :],
        b=top_layer.b[:, qm.projection, :],
    )]
    # effective inner token for (top anchor a, G token g)
    kappa_sub = to_sub[cocycle.kappa_table[top_elements]]
    for j, il in enumerate(inner.layers):
        if il.context_arity != j:
            raise InvalidSeries("inner layers must read all earlier inner layers")
        na, nc = len(top_anchors), il.n_contexts
        anchors = np.concatenate([
            np.repeat(top_anchors, nc, axis=0),
            np.tile(il.context_anchors, (na, 1)),
        ], axis=1)
        # row a * nc + c  ->  inner entry (c, kappa(h'_a, g))
        rows_c = np.tile(np.arange(nc), na)
        rows_a = np.repeat(np.arange(na), nc)
        toks = kappa_sub[rows_a]  # (na*nc, |G|)
        layers.append(LayerTable(
            dim=il.dim,
            context_arity=j + 1,
            context_anchors=anchors,
            lam=il.lam[rows_c[:, None], toks],
            b=il.b[rows_c[:, None], toks],
        ))

    # joint anchor (h', n') decodes to n' s(h')
    na, ni = len(top_anchors), len(inner.decoder_anchors)
    dec_anchors = np.concatenate([
        np.repeat(top_anchors, ni, axis=0),
        np.tile(inner.decoder_anchors, (na, 1)),
    ], axis=1)
    n_part = embed[np.tile(inner.decoder_elements, na)]
    h_part = qm.section[np.repeat(top_elements, ni)]
    elements = G.cayley[n_part, h_part]
    return DcdSsm(
        layers=tuple(layers),
        h0=top.h0 + inner.h0,
        decoder_anchors=dec_anchors,
        decoder_elements=elements,
        group_spec=G.spec,
        precision=precision,
    )


def compile_with_series(G: FiniteGroup, series: SubnormalSeries,
                        precision: FinitePrecisionConfig | None = None,
                        verify_depth: int = DEFAULT_VERIFY_DEPTH) -> DcdSsm:
    """One layer per factor of ``series``, top factor first."""
    gc.validate_series(G, series)
    precision = precision or FinitePrecisionConfig()
    if series.length == 0:
        model = compile_abelian(G, precision)
    else:
        model = _compile_chain(G, list(series.chain), precision)
    _gate(model, G, verify_depth)
    return model


def compile_group(G: FiniteGroup, precision: FinitePrecisionConfig | None = None,
                  verify_depth: int = DEFAULT_VERIFY_DEPTH) -> DcdSsm:
    """Compile along the derived series; raises NotSolvable for e.g. A5."""
    series = gc.derived_series(G)
    return compile_with_series(G, series, precision, verify_depth)


def _gate(model: DcdSsm, G: FiniteGroup, depth: int) -> None:
    if depth <= 0:
        return
    from .verifier import verify_exhaustive

    report = verify_exhaustive(model, G, depth)
    if not report.passed:  # pragma: no cover - construction bug
        raise AssertionError(f"compiled model for {G.spec} failed self-check: "
                             f"{report.first_counterexample}")
