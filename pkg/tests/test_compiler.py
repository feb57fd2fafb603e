import cmath
import math

import numpy as np
import pytest

from gtssm import group_core as gc
from gtssm.compiler import (
    build_section_cocycle,
    compile_abelian,
    compile_group,
    compile_with_series,
    root_of_unity,
)
from gtssm.errors import InvalidSeries, NotAbelian, NotNormal, NotSolvable
from gtssm.sampling import token_batch
from gtssm.ssm import FinitePrecisionConfig, forward, run_sequential
from gtssm.verifier import verify_exhaustive

from conftest import TASK_SPECS, group, model

ABELIAN = [s for s in TASK_SPECS if gc.is_abelian(group(s))]


def mask(G, elems):
    m = np.zeros(G.order, dtype=bool)
    m[list(elems)] = True
    return gc.SubgroupMask(m)


def c4_series():
    G = gc.construct_group("cyclic:4")
    return G, gc.SubnormalSeries((G.full_mask(), mask(G, [0, 2]), G.trivial_mask()))


class TestRoots:
    def test_exact_quarter(self):
        assert root_of_unity(1, 4, 12) == 1j
        assert root_of_unity(3, 4, 12) == -1j
        assert root_of_unity(1, 2, 12) == -1

    def test_matches_cmath(self):
        for k in (3, 7, 60):
            for m in range(k):
                z = root_of_unity(m, k, 12)
                assert abs(z - cmath.exp(2j * math.pi * m / k)) <= 1e-12


class TestCompileAbelian:
    def test_parity(self):
        m = compile_abelian(group("cyclic:2"))
        assert m.n_layers == 1 and m.dims == [1]
        assert m.layers[0].lam[0, :, 0].tolist() == [1, -1]
        assert sorted(m.decoder_anchors[:, 0].real.tolist()) == [-1, 1]

    def test_c60_token_51(self):
        m = model("cyclic:60")
        assert abs(m.layers[0].lam[0, 51, 0] - cmath.exp(2j * math.pi * 51 / 60)) <= 1e-12

    def test_c2_c4(self):
        G = group("product:cyclic:2,cyclic:4")
        m = model("product:cyclic:2,cyclic:4")
        lam = m.layers[0].lam[0, 1 * 4 + 3]
        assert m.dims == [2]
        assert np.allclose(lam, [-1, cmath.exp(3j * math.pi / 2)], atol=1e-12)

    @pytest.mark.parametrize("spec", ABELIAN)
    def test_representation_property(self, spec):
        G, lam = group(spec), model(spec).layers[0].lam[0]
        lhs = lam[:, None, :] * lam[None, :, :]
        rhs = lam[G.cayley]
        # three independently rounded roots at 12 digits
        assert np.max(np.abs(lhs - rhs)) <= 3 * math.sqrt(2) / 2 * 1e-12
        fine = compile_abelian(G, FinitePrecisionConfig(round_digits=13)).layers[0].lam[0]
        assert np.max(np.abs(fine[:, None, :] * fine[None, :, :] - fine[G.cayley])) <= 1e-12

    @pytest.mark.parametrize("spec", ABELIAN)
    def test_unit_modulus(self, spec):
        lam = model(spec).layers[0].lam
        # one decimal rounding of each component
        assert np.max(np.abs(np.abs(lam) - 1)) <= math.sqrt(2) / 2 * 1e-12
        assert not model(spec).layers[0].b.any()

    def test_not_abelian(self, S3):
        with pytest.raises(NotAbelian):
            compile_abelian(S3)

    def test_trivial_series_matches(self):
        G = group("cyclic:6")
        a = compile_abelian(G)
        b = compile_with_series(G, gc.SubnormalSeries((G.full_mask(), G.trivial_mask())))
        assert np.array_equal(a.layers[0].lam, b.layers[0].lam)
        assert np.array_equal(a.decoder_anchors, b.decoder_anchors)


class TestSectionCocycle:
    @pytest.mark.parametrize("spec", ["symmetric:3", "alternating:4", "symmetric:4"])
    def test_identities(self, spec):
        G = gc.construct_group(spec)
        for N in gc.derived_series(G).chain[1:-1]:
            sc = build_section_cocycle(G, N)
            qm = sc.quotient_map
            H = qm.quotient
            for h1 in range(H.order):
                for h2 in range(H.order):
                    lhs = G.cayley[sc.section(h1), sc.section(h2)]
                    rhs = G.cayley[sc.d(h1, h2), sc.section(int(H.cayley[h1, h2]))]
                    assert lhs == rhs
                    assert N.members[sc.d(h1, h2)]
            assert N.members[sc.kappa_table].all()
            assert (sc.kappa_table[:, G.identity] == G.identity).all()
            assert (sc.d_table[H.identity] == G.identity).all()
            assert (sc.d_table[:, H.identity] == G.identity).all()

    @pytest.mark.parametrize("spec", ["symmetric:3", "alternating:4", "symmetric:4"])
    def test_state_update_equation(self, spec):
        # n' s(h') g = n' kappa(h', g) s(h' h) for every state and token
        G = gc.construct_group(spec)
        N = gc.derived_series(G).chain[1]
        sc = build_section_cocycle(G, N)
        qm = sc.quotient_map
        for h1 in range(qm.quotient.order):
            for g in range(G.order):
                h = int(qm.projection[g])
                lhs = G.cayley[sc.section(h1), g]
                rhs = G.cayley[sc.kappa(h1, g), sc.section(int(qm.quotient.cayley[h1, h]))]
                assert lhs == rhs

    def test_s3_kappa_examples(self, S3):
        sc = build_section_cocycle(S3, mask(S3, [0, 4, 5]))
        qm = sc.quotient_map
        r, s = S3.index_of("(123)"), S3.index_of("(12)")
        eN, sN = int(qm.projection[0]), int(qm.projection[s])
        assert sc.kappa(eN, r) == r
        assert sc.kappa(sN, r) == gc.multiply(S3, r, r)
        assert S3.label(sc.kappa(sN, r)) == "(132)"

    def test_not_normal(self, S3):
        with pytest.raises(NotNormal):
            build_section_cocycle(S3, mask(S3, [0, 1]))


class TestCompileGroup:
    @pytest.mark.parametrize("spec", TASK_SPECS + ["symmetric:4"])
    def test_layer_count_is_derived_length(self, spec):
        G = group(spec)
        m = model(spec) if spec in TASK_SPECS else compile_group(G)
        assert m.n_layers == gc.derived_length(G)

    def test_s3_layers(self, S3):
        m = model("symmetric:3")
        assert m.dims == [1, 1]
        assert np.allclose(sorted(m.layers[0].lam[0, :, 0].real), [-1, -1, -1, 1, 1, 1])
        l2 = m.layers[1]
        r = S3.index_of("(123)")
        w = cmath.exp(2j * math.pi / 3)
        rots = {complex(np.round(l2.lam[c, r, 0], 9)) for c in range(l2.n_contexts)}
        # the rotation reverses with the first layer's anchor
        assert rots == {complex(np.round(w, 9)), complex(np.round(w.conjugate(), 9))}

    def test_a5_not_solvable(self):
        G = gc.construct_group("alternating:5")
        with pytest.raises(NotSolvable) as info:
            compile_group(G)
        assert info.value.residual == G.full_mask()

    def test_a4_two_layers_exhaustive(self, A4):
        m = model("alternating:4")
        assert m.n_layers == 2
        assert verify_exhaustive(m, A4, 4).passed

    def test_s3_series_matches_compile(self, S3):
        series = gc.SubnormalSeries((S3.full_mask(), mask(S3, [0, 4, 5]), S3.trivial_mask()))
        a = compile_with_series(S3, series)
        tokens = token_batch(9, 100, 50, 6)
        assert np.array_equal(run_sequential(a, tokens), run_sequential(model("symmetric:3"), tokens))

    def test_s4_three_layers(self):
        G = gc.construct_group("symmetric:4")
        m = compile_group(G)
        assert m.n_layers == 3
        assert verify_exhaustive(m, G, 4).passed

    def test_precision_is_carried(self):
        p = FinitePrecisionConfig(round_digits=8)
        m = compile_group(group("symmetric:3"), p)
        assert m.precision == p
        assert forward(m, [1, 4, 2]) == gc.prefix_products(group("symmetric:3"), [1, 4, 2])


class TestParityStack:
    def test_c4_via_c2(self):
        G, series = c4_series()
        m = compile_with_series(G, series)
        assert m.n_layers == 2
        for layer in m.layers:
            lam = layer.lam[~np.isnan(layer.lam)]
            assert np.all(lam.imag == 0) and set(lam.real.tolist()) <= {1.0, -1.0}
        assert verify_exhaustive(m, G, 8).passed

    def test_bad_series(self):
        G = group("symmetric:3")
        bad = gc.SubnormalSeries((G.full_mask(), mask(G, [0, 1]), G.trivial_mask()))
        with pytest.raises(InvalidSeries):
            compile_with_series(G, bad)

    def test_non_abelian_factor(self):
        G = gc.construct_group("symmetric:4")
        bad = gc.SubnormalSeries((G.full_mask(), G.trivial_mask()))
        with pytest.raises(InvalidSeries):
            compile_with_series(G, bad)
