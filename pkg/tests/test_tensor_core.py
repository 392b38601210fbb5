import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_kt, random_tt, rel
from tt2cp.tensor_core import (
    KruskalTensor,
    ShapeError,
    TTTensor,
    fold,
    inner,
    khatri_rao,
    kruskal_full,
    reshape,
    train_contract,
    tt_full,
    tt_full_rtl,
    unfold,
    vec,
)

shapes = st.lists(st.integers(1, 4), min_size=2, max_size=5).map(tuple)


@settings(max_examples=40, deadline=None)
@given(shape=shapes, data=st.data())
def test_fold_inverts_unfold(shape, data):
    t = np.arange(np.prod(shape), dtype=float).reshape(shape)
    mode = data.draw(st.integers(0, len(shape) - 1))
    assert np.array_equal(fold(unfold(t, mode), mode, shape), t)


def test_unfold_is_first_index_fastest():
    t = reshape(np.arange(24.0), (2, 3, 4))
    # mode-0 unfolding is the buffer reinterpreted
    assert np.array_equal(unfold(t, 0).ravel(order="F"), np.arange(24.0))
    # columns of the mode-1 unfolding run over mode 0 first, then mode 2
    assert np.array_equal(unfold(t, 1)[:, 1], t[1, :, 0])
    assert np.array_equal(unfold(t, 1)[:, 2], t[0, :, 1])


def test_reshape_infers_one_extent():
    t = np.arange(12.0)
    assert reshape(t, (3, -1)).shape == (3, 4)
    with pytest.raises(ShapeError):
        reshape(t, (5, -1))
    assert np.array_equal(vec(reshape(t, (2, 6))), t)


def test_khatri_rao_column_is_kron(rng):
    a, b, c = rng.standard_normal((3, 2)), rng.standard_normal((4, 2)), rng.standard_normal((2, 2))
    kr = khatri_rao(a, b, c)
    for r in range(2):
        assert np.allclose(kr[:, r], np.kron(np.kron(a[:, r], b[:, r]), c[:, r]))
    with pytest.raises(ShapeError):
        khatri_rao(a, rng.standard_normal((4, 3)))


@pytest.mark.parametrize("complex_valued", [False, True])
def test_unfolding_identity(rng, complex_valued):
    k = random_kt(rng, (3, 4, 2, 5), 3, complex_valued)
    t = kruskal_full(k)
    for n in range(4):
        others = [k.factors[m] for m in reversed(range(4)) if m != n]
        expect = (k.factors[n] * k.weights) @ khatri_rao(*others).T
        assert rel(unfold(t, n), expect) < 1e-13


def test_kruskal_full_matches_einsum(rng):
    k = random_kt(rng, (2, 3, 4), 2)
    a, b, c = k.factors
    assert rel(kruskal_full(k), np.einsum("ir,jr,kr->ijk", a, b, c)) < 1e-14


def test_normalize_keeps_tensor_and_units_columns(rng):
    k = random_kt(rng, (3, 4, 5), 3, complex_valued=True)
    kn = k.normalize()
    assert rel(kn.full(), k.full()) < 1e-13
    for f in kn.factors:
        assert np.allclose(np.linalg.norm(f, axis=0), 1)
    assert np.all(kn.weights > 0) and not np.iscomplexobj(kn.weights)


def test_kruskal_rejects_ragged_factors():
    with pytest.raises(ShapeError):
        KruskalTensor([np.ones((2, 2)), np.ones((3, 3))])
    with pytest.raises(ShapeError):
        KruskalTensor([np.ones((2, 2))], weights=[1.0, 2.0, 3.0])


def test_tt_validation():
    with pytest.raises(ShapeError):
        TTTensor([np.ones((2, 3, 1))])
    with pytest.raises(ShapeError):
        TTTensor([np.ones((1, 3, 2)), np.ones((3, 3, 1))])


@pytest.mark.parametrize("complex_valued", [False, True])
def test_tt_full_both_directions(rng, complex_valued):
    x = random_tt(rng, (3, 2, 4, 2), (1, 2, 3, 2, 1), complex_valued)
    a, b, c, d = x.cores
    ref = np.einsum("aib,bjc,ckd,dle->ijkl", a, b, c, d)
    assert rel(tt_full(x), ref) < 1e-13
    assert rel(tt_full_rtl(x), ref) < 1e-13
    assert x.ranks == (1, 2, 3, 2, 1)


def test_train_contract_bond_check():
    with pytest.raises(ShapeError):
        train_contract(np.ones((2, 3)), np.ones((2, 3)))
    assert train_contract(np.ones((2, 3)), np.ones((3, 4))).shape == (2, 4)


def test_inner_is_conjugate_linear_in_second_argument():
    a = np.array([1j, 2.0])
    b = np.array([1.0, 1j])
    assert inner(a, b) == np.sum(a * np.conj(b))
    assert inner(2j * a, b) == 2j * inner(a, b)
