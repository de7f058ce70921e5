import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commbound.cbox import (
    CBox,
    Coupling,
    Prior,
    all_svectors,
    canonical_box_json,
    check_membership_V,
    coupling_marginal,
    decode,
    encode,
    loads_box,
    dumps_box,
    product_coupling,
    validate_cbox,
)
from commbound.errors import (
    IndexOutOfRange,
    NegativeProbability,
    RowNotNormalized,
    ShapeMismatch,
    SizeOverflow,
)

from conftest import random_box


class TestValidate:
    def test_identity_box(self, identity_box):
        assert (identity_box.a_count, identity_box.m_count, identity_box.s_count) == (2, 1, 2)

    def test_negative_entry(self):
        t = np.array([[[1.1, -0.1]], [[0.5, 0.5]]])
        with pytest.raises(NegativeProbability) as ei:
            validate_cbox(t)
        assert (ei.value.a, ei.value.b, ei.value.s) == (0, 0, 1)

    def test_row_deficit(self):
        t = np.array([[[0.49, 0.49]], [[0.5, 0.5]]])
        with pytest.raises(RowNotNormalized) as ei:
            validate_cbox(t)
        assert ei.value.deficit == pytest.approx(0.02, abs=1e-12)
        assert (ei.value.a, ei.value.b) == (0, 0)

    def test_wrong_rank(self):
        with pytest.raises(ShapeMismatch):
            validate_cbox(np.ones((2, 2)))

    def test_immutable(self, identity_box):
        with pytest.raises(ValueError):
            identity_box.probs[0, 0, 0] = 0.3


class TestSVector:
    def test_least_significant_first(self):
        assert encode((1, 0, 0), 2) == 1
        assert encode((0, 0, 1), 2) == 4
        assert decode(5, 3, 2) == (2, 1)

    @pytest.mark.parametrize("s_count,m_count", [(2, 12), (4, 6), (3, 7), (16, 3)])
    def test_exhaustive_bijection(self, s_count, m_count):
        n = s_count**m_count
        assert n <= 4096
        rows = all_svectors(s_count, m_count)
        for i in range(n):
            t = decode(i, s_count, m_count)
            assert encode(t, s_count) == i
            assert tuple(rows[i]) == t

    def test_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            decode(8, 2, 3)
        with pytest.raises(IndexOutOfRange):
            encode((0, 2), 2)


def brute_marginal(c: Coupling, b: int) -> np.ndarray:
    out = np.zeros((c.a_count, c.s_count))
    for i, t in enumerate(itertools.product(range(c.s_count), repeat=c.m_count)):
        # itertools.product varies the last position fastest; map to our index
        idx = encode(t, c.s_count)
        for a in range(c.a_count):
            out[a, t[b]] += c.table[a, idx]
    return out


class TestMarginals:
    def test_product_reproduces_box(self):
        rng = np.random.default_rng(0)
        box = random_box(rng, 3, 4, 3)
        c = product_coupling(box)
        for b in range(box.m_count):
            np.testing.assert_allclose(coupling_marginal(c, b), box.probs[:, b, :], atol=1e-15)

    def test_single_setting_identity(self):
        rng = np.random.default_rng(1)
        box = random_box(rng, 3, 1, 4)
        c = product_coupling(box)
        np.testing.assert_array_equal(c.table, box.probs[:, 0, :])
        np.testing.assert_array_equal(coupling_marginal(c, 0), c.table)

    def test_random_coupling_vs_brute_force(self):
        rng = np.random.default_rng(2)
        table = rng.random((3, 3**3))
        table /= table.sum(axis=1, keepdims=True)
        c = Coupling(table, 3, 3)
        for b in range(3):
            m = coupling_marginal(c, b)
            np.testing.assert_allclose(m, brute_marginal(c, b), atol=1e-12)
            np.testing.assert_allclose(m.sum(axis=1), 1.0, atol=1e-12)

    def test_bad_index(self, identity_box):
        with pytest.raises(IndexOutOfRange):
            coupling_marginal(product_coupling(identity_box), 1)

    def test_product_entry(self):
        box = validate_cbox([[[0.3, 0.7], [0.6, 0.4]]])
        c = product_coupling(box)
        assert c.table[0, encode((0, 1), 2)] == pytest.approx(0.3 * 0.4, abs=1e-15)

    def test_independent_box_gives_independent_coupling(self):
        row = np.array([[0.2, 0.8], [0.9, 0.1]])
        box = validate_cbox(np.broadcast_to(row, (3, 2, 2)))
        c = product_coupling(box)
        np.testing.assert_array_equal(c.table[0], c.table[2])

    def test_cap(self):
        box = validate_cbox(np.full((1, 11, 2), 0.5))
        with pytest.raises(SizeOverflow) as ei:
            product_coupling(box, cap=1000)
        assert ei.value.required == 2048


class TestMembership:
    def test_product_is_member(self):
        rng = np.random.default_rng(3)
        box = random_box(rng, 2, 3)
        rep = check_membership_V(product_coupling(box), box, 1e-12)
        assert rep.member and rep.max_deviation <= 1e-15

    def test_other_box_not_member(self):
        rng = np.random.default_rng(4)
        b1, b2 = random_box(rng, 2, 2), random_box(rng, 2, 2)
        rep = check_membership_V(product_coupling(b1), b2)
        assert not rep.member and rep.max_deviation > 0

    def test_shape_mismatch(self, identity_box):
        rng = np.random.default_rng(5)
        with pytest.raises(ShapeMismatch):
            check_membership_V(product_coupling(random_box(rng, 2, 2)), identity_box)


@settings(max_examples=50, deadline=None)
@given(
    a=st.integers(1, 4),
    m=st.integers(1, 4),
    s=st.integers(2, 3),
    seed=st.integers(0, 2**32 - 1),
)
def test_product_coupling_member_property(a, m, s, seed):
    box = random_box(np.random.default_rng(seed), a, m, s)
    assert check_membership_V(product_coupling(box), box, 1e-12).member


class TestPrior:
    def test_uniform(self):
        assert Prior.uniform(4).weights.tolist() == [0.25] * 4

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            Prior(np.array([0.5, 0.6]))

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            Prior(np.array([1.5, -0.5]))


class TestJson:
    def test_round_trip(self):
        rng = np.random.default_rng(6)
        box = random_box(rng, 2, 3)
        again = loads_box(dumps_box(box))
        np.testing.assert_array_equal(again.probs, box.probs)

    def test_scientific_notation(self):
        doc = '{"a_count":1,"m_count":1,"s_count":2,"probs":[[[1e0, 0.0E+00]]]}'
        assert loads_box(doc).probs[0, 0, 0] == 1.0

    def test_declared_counts_checked(self):
        doc = {"a_count": 3, "m_count": 1, "s_count": 2, "probs": [[[1, 0]], [[0, 1]]]}
        with pytest.raises(ShapeMismatch):
            CBox.from_dict(doc)

    def test_canonical_is_order_independent(self, identity_box):
        text = canonical_box_json(identity_box)
        assert json.loads(text)["probs"] == [[[1.0, 0.0]], [[0.0, 1.0]]]
        assert " " not in text
        assert text.index('"a_count"') < text.index('"probs"')
