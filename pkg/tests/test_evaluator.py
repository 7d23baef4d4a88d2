from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nilzeta.conegen import ConeCondition, good_basis_conditions, relative_conditions
from nilzeta.evaluator import (
    ConsistencyError,
    DepthError,
    ValuationSlice,
    condition_depth,
    flat_slice_measure,
    local_counts,
    slice_measure,
    slices,
    spot_check_depth,
)
from nilzeta.extension import extension_make, fin_subgroups
from nilzeta.malcev import abelian, catalog_make, heisenberg
from nilzeta.oracle import hnf_counts
from nilzeta.polyring import Polynomial

HEIS_SUB = good_basis_conditions(heisenberg())
HEIS_NORM = good_basis_conditions(heisenberg(), "normal")


def test_condition_depth_examples():
    T11, T22 = Polynomial.var("T1_1"), Polynomial.var("T2_2")
    c1 = ConeCondition(Polynomial.var("V1_1"), T11)
    assert condition_depth(c1, ValuationSlice((2,), 3)) == 2
    c2 = ConeCondition(Polynomial.var("V1_1"), T11 * T22)
    assert condition_depth(c2, ValuationSlice((1, 1), 2)) == 2
    c3 = ConeCondition(Polynomial.var("V1_1"), 2 * T11)
    assert condition_depth(c3, ValuationSlice((1,), 2)) == 2
    assert condition_depth(c3, ValuationSlice((1,), 3)) == 1


@pytest.mark.parametrize("p", [2, 3, 5])
def test_empty_system_slice_measure(p):
    s = good_basis_conditions(abelian(1))
    for k in range(4):
        assert slice_measure(s, p, (k,)) == Fraction(p - 1, p) / p ** k


def test_slices_order():
    assert list(slices(2, 2)) == [(0, 2), (1, 1), (2, 0)]
    assert len(list(slices(3, 3))) == 10


@pytest.mark.parametrize("system", [HEIS_SUB, HEIS_NORM], ids=["sub", "normal"])
@pytest.mark.parametrize("p", [2, 3])
def test_lifting_matches_flat_enumeration(system, p):
    for k in range(3):
        for m in slices(3, k):
            assert slice_measure(system, p, m) == flat_slice_measure(system, p, m)


def test_flat_depth_must_exceed_valuations():
    with pytest.raises(DepthError):
        flat_slice_measure(HEIS_SUB, 2, (2, 0, 0), depth=2)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([2, 3]), st.tuples(*[st.integers(0, 2)] * 3))
def test_flat_measure_stable_one_level_deeper(p, m):
    M = max(max(m) + 1, 3)
    try:
        a = flat_slice_measure(HEIS_NORM, p, m, M)
        b = flat_slice_measure(HEIS_NORM, p, m, M + 1, budget=5_000_000)
    except DepthError:
        return
    assert a == b == slice_measure(HEIS_NORM, p, m)


@pytest.mark.parametrize(
    "desc,variant,p,kmax,expected",
    [
        ("abelian:2", "subgroup", 2, 3, [1, 3, 7, 15]),
        ("abelian:2", "subgroup", 3, 3, [1, 4, 13, 40]),
        ("abelian:2", "subgroup", 5, 3, [1, 6, 31, 156]),
        ("abelian:3", "subgroup", 2, 3, [1, 7, 35, 155]),
        ("heisenberg", "subgroup", 2, 3, [1, 3, 19, 43]),
        ("heisenberg", "subgroup", 3, 3, [1, 4, 49, 157]),
        ("heisenberg", "normal", 2, 3, [1, 3, 7, 19]),
        ("heisenberg", "normal", 3, 3, [1, 4, 13, 49]),
    ],
)
def test_frozen_local_counts(desc, variant, p, kmax, expected):
    assert local_counts(catalog_make(desc), p, kmax, variant).counts() == expected


@pytest.mark.parametrize("h", [1, 2, 3])
@pytest.mark.parametrize("p", [2, 3])
def test_abelian_matches_hnf(h, p):
    got = local_counts(abelian(h), p, 3).counts()
    assert got == [hnf_counts(h, p ** k) for k in range(4)]


@pytest.mark.parametrize(
    "name,Kidx,variant,p,expected",
    [
        ("dinfty", 0, "subgroup", 3, [1, 1, 1]),
        ("dinfty", 1, "subgroup", 3, [1, 3, 9]),
        ("dinfty", 1, "normal", 2, [1, 2, 0]),
        ("dinfty", 1, "normal", 3, [1, 0, 0]),
        ("z-over-2z", 1, "subgroup", 2, [1, 0, 0]),
        ("z-over-2z", 1, "subgroup", 3, [1, 1, 1]),
        ("heisenberg-c2", 1, "subgroup", 2, [1, 6, 52]),
        ("heisenberg-c2", 1, "normal", 2, [1, 6, 4]),
        ("heisenberg-c2", 1, "normal", 3, [1, 0, 0]),
    ],
)
def test_frozen_relative_counts(name, Kidx, variant, p, expected):
    V = extension_make(name)
    K = fin_subgroups(V.F)[Kidx]
    assert local_counts(V, p, 2, variant, K).counts() == expected


def test_wrong_shift_is_detected():
    with pytest.raises(ConsistencyError):
        local_counts(heisenberg(), 2, 2, shift=2)


def test_relative_wrong_shift_is_detected():
    V = extension_make("heisenberg-c2")
    K = fin_subgroups(V.F)[1]
    s = relative_conditions(V, K)
    with pytest.raises(ConsistencyError):
        local_counts(s, 3, 2, shift=s.shift - 1)


def test_workers_deterministic():
    a = local_counts(heisenberg(), 3, 3, "normal", workers=1)
    b = local_counts(heisenberg(), 3, 3, "normal", workers=2)
    assert a.counts() == b.counts() and a.a_raw == b.a_raw


def test_depth_check():
    assert spot_check_depth(HEIS_NORM, 2, 2) is not None
    assert local_counts(heisenberg(), 2, 2, "normal", depth_check=True).counts() == [1, 3, 7]


def test_bad_prime():
    with pytest.raises(ValueError):
        local_counts(heisenberg(), 4, 2)
