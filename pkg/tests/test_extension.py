import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nilzeta.extension import (
    CocycleError,
    UsageError,
    VirtuallyTauGroup,
    cyclic_group,
    ext_identity,
    ext_inverse,
    ext_multiply,
    extension_from_json,
    extension_make,
    extension_to_json,
    fin_subgroups,
    load_group,
    structure_words,
    symmetric_group,
    verify_cocycle,
)
from nilzeta.malcev import abelian, xvars
from nilzeta.polyring import Polynomial, poly_eval

X1 = Polynomial.var("X1", xvars(1))
DINFTY = extension_make("dinfty")
HC2 = extension_make("heisenberg-c2")
HC2_WORDS = structure_words(HC2)


def z_times_s3():
    return VirtuallyTauGroup(abelian(1), symmetric_group(3), {f: (X1,) for f in range(6)}, {}, "zxs3")


@pytest.mark.parametrize("name", ["dinfty", "z-over-2z", "heisenberg-c2"])
def test_catalog_cocycles_verify(name):
    assert verify_cocycle(extension_make(name)).ok


def test_z_times_s3_verifies():
    assert verify_cocycle(z_times_s3()).ok


def test_inconsistent_psi_rejected():
    # psi(t,t) must be fixed by sigma_t; with sigma_t = -X1 the value 1 is not
    V = VirtuallyTauGroup(abelian(1), cyclic_group(2), {1: (-X1,)}, {(1, 1): (1,)}, "bad")
    rep = verify_cocycle(V)
    assert not rep.ok


def test_unnormalized_psi_rejected():
    with pytest.raises(CocycleError):
        VirtuallyTauGroup(abelian(1), cyclic_group(2), {1: (X1,)}, {(0, 1): (1,)})


def test_missing_sigma_rejected():
    with pytest.raises(UsageError):
        VirtuallyTauGroup(abelian(1), cyclic_group(2), {}, {})


@settings(max_examples=80, deadline=None)
@given(st.integers(-30, 30), st.integers(0, 1), st.integers(-30, 30), st.integers(0, 1))
def test_dinfty_matches_affine_model(a, f, b, g):
    V = DINFTY
    c, fg = ext_multiply(V, ((a,), f), ((b,), g))
    sign = -1 if f else 1
    assert c == (a + sign * b,) and fg == (f + g) % 2


@settings(max_examples=60, deadline=None)
@given(st.tuples(*[st.integers(-9, 9)] * 3), st.integers(0, 1))
def test_heisenberg_c2_inverse(a, f):
    V = HC2
    x = (a, f)
    assert ext_multiply(V, x, ext_inverse(V, x)) == ext_identity(V)


def test_structure_words_dinfty():
    sw = structure_words(extension_make("dinfty"))
    U1 = Polynomial.var("U1")
    assert sw.p[1] == (-U1,)
    assert sw.l[(1, 1)] == (-1,)
    assert sw.convention_failures == []


def test_structure_words_non_split():
    sw = structure_words(extension_make("z-over-2z"))
    assert sw.n[(1, 1)] == (1,)
    assert sw.convention_failures == [1]


def test_structure_words_heisenberg_c2():
    sw = structure_words(extension_make("heisenberg-c2"))
    U = [Polynomial.var(f"U{i}") for i in (1, 2, 3)]
    assert sw.p[1] == (-U[0], -U[1], U[2])
    assert all(not any(v) for v in sw.n.values())


@settings(max_examples=40, deadline=None)
@given(st.tuples(*[st.integers(-9, 9)] * 3))
def test_conjugation_polynomial_matches_group(u):
    V, sw = HC2, HC2_WORDS
    g = ((0, 0, 0), 1)
    conj, f = ext_multiply(V, ext_multiply(V, ext_inverse(V, g), (u, 0)), g)
    assert f == 0
    assert tuple(poly_eval(P, u) for P in sw.p[1]) == conj


def test_fin_subgroups_s3():
    S3 = symmetric_group(3)
    subs = fin_subgroups(S3)
    assert len(subs) == 6
    assert sorted(len(K.members) for K in subs) == [1, 2, 2, 2, 3, 6]
    normal = fin_subgroups(S3, "normal")
    assert sorted(len(K.members) for K in normal) == [1, 3, 6]


def test_fin_subgroups_c2_index():
    subs = fin_subgroups(cyclic_group(2))
    assert [(sorted(K.members), K.index_in_F) for K in subs] == [([0], 2), ([0, 1], 1)]


def test_json_round_trip():
    V = extension_make("heisenberg-c2")
    again = extension_from_json(json.loads(json.dumps(extension_to_json(V))))
    assert again.sigma == V.sigma and again.psi == V.psi


def test_bundled_files_load():
    assert load_group("dinfty.json").F.order == 2
    assert load_group("heisenberg.json").h == 3


def test_missing_file():
    with pytest.raises(UsageError):
        load_group("does-not-exist.json")


def test_dinfty_normal_subgroups_by_listing():
    # subgroups <x^m, x^j y> (0 <= j < m) have index m; count the normal ones directly
    V = DINFTY

    def member(g, m, j):
        (a,), f = g
        return a % m == (j if f else 0) % m

    def normal(m, j):
        gens = [((m,), 0), ((j,), 1)]
        conj = [((1,), 0), ((0,), 1)]
        for s in conj:
            for g in gens:
                c = ext_multiply(V, ext_multiply(V, ext_inverse(V, s), g), s)
                if not member(c, m, j):
                    return False
        return True

    counts = {m: sum(normal(m, j) for j in range(m)) for m in (1, 2, 3, 4, 5, 8, 9)}
    assert counts == {1: 1, 2: 2, 3: 0, 4: 0, 5: 0, 8: 0, 9: 0}
