import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nilzeta.malcev import (
    MalcevPresentation,
    PresentationError,
    abelian,
    catalog_make,
    commutator_by_products,
    direct_product,
    heisenberg,
    mal_commutator,
    mal_inverse,
    mal_multiply,
    mal_power,
    presentation_from_json,
    presentation_to_json,
    scaled,
    verify_presentation,
    xvars,
)
from nilzeta.polyring import Polynomial

small = st.integers(-20, 20)
vec3 = st.tuples(small, small, small)


def matrix(a):
    """Heisenberg coordinates -> upper unitriangular (A, B, C) entries."""
    return (a[0], a[1], a[2] + a[0] * a[1])


def matmul(x, y):
    return (x[0] + y[0], x[1] + y[1], x[2] + y[2] + x[0] * y[1])


@pytest.mark.parametrize("desc", ["abelian:1", "abelian:3", "heisenberg",
                                  "product(abelian:1,heisenberg)", "scaled(heisenberg;2,1,1)"])
def test_catalog_verifies(desc):
    assert verify_presentation(catalog_make(desc)).ok


def test_heisenberg_convention():
    H = heisenberg()
    assert mal_multiply(H, (0, 1, 0), (1, 0, 0)) == (1, 1, -1)
    assert mal_commutator(H, (1, 0, 0), (0, 1, 0)) == (0, 0, 1)
    assert mal_power(H, (1, 1, 0), 2) == (2, 2, -1)


@settings(max_examples=100, deadline=None)
@given(vec3, vec3)
def test_heisenberg_matches_matrix_model(a, b):
    H = heisenberg()
    assert matrix(mal_multiply(H, a, b)) == matmul(matrix(a), matrix(b))


@settings(max_examples=100, deadline=None)
@given(vec3, vec3, vec3)
def test_heisenberg_associative(a, b, c):
    H = heisenberg()
    assert mal_multiply(H, mal_multiply(H, a, b), c) == mal_multiply(H, a, mal_multiply(H, b, c))


@settings(max_examples=100, deadline=None)
@given(vec3, vec3)
def test_commutator_polynomials_agree_with_products(a, b):
    H = heisenberg()
    assert mal_commutator(H, a, b) == commutator_by_products(H, a, b)


@settings(max_examples=60, deadline=None)
@given(vec3, st.integers(-6, 6), st.integers(-6, 6))
def test_power_additivity(a, m, n):
    H = heisenberg()
    assert mal_multiply(H, mal_power(H, a, m), mal_power(H, a, n)) == mal_power(H, a, m + n)


def test_inverse():
    H = heisenberg()
    a = (3, -2, 5)
    assert mal_multiply(H, a, mal_inverse(H, a)) == (0, 0, 0)


def test_mutated_presentation_fails():
    H = heisenberg()
    X = [Polynomial.var(x) for x in xvars(3)]
    f = list(H.f)
    f[2] = f[2] + X[0]
    bad = MalcevPresentation(3, tuple(f), H.g, H.c, 2, name="mutated")
    rep = verify_presentation(bad)
    assert not rep.ok
    assert rep.failed()


def test_suffix_of_heisenberg_is_abelian():
    S = heisenberg().suffix(2)
    assert S.h == 2
    assert mal_multiply(S, (1, 2), (3, 4)) == (4, 6)


def test_direct_product():
    P = direct_product(abelian(1), heisenberg())
    assert P.h == 4
    assert mal_commutator(P, (0, 1, 0, 0), (0, 0, 1, 0)) == (0, 0, 0, 1)


def test_scaled_heisenberg_polynomial():
    S = scaled(heisenberg(), (2, 1, 1))
    X1, X2, X3, Y1, Y2, Y3 = (Polynomial.var(v) for v in ("X1", "X2", "X3", "Y1", "Y2", "Y3"))
    assert S.f[2] == X3 + Y3 - 2 * X2 * Y1


def test_json_round_trip(tmp_path):
    H = heisenberg()
    data = presentation_to_json(H)
    assert data["schema"] == 1
    again = presentation_from_json(json.loads(json.dumps(data)))
    assert again.f == H.f and again.g == H.g and again.c == H.c


def test_bad_catalog_name():
    with pytest.raises(PresentationError):
        catalog_make("nonsense")
