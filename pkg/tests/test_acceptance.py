"""End-to-end acceptance checks A1-A8, exact integer equality throughout.

Each check records a PASS/FAIL line that is printed in the pytest terminal summary.
"""

import random
import time
from fractions import Fraction

import pytest

from nilzeta.conegen import ConeConditionSystem, conditions_hold, good_basis_conditions, membership_conditions, membership_values
from nilzeta.evaluator import ConsistencyError, local_counts
from nilzeta.extension import extension_make, fin_subgroups
from nilzeta.malcev import MalcevPresentation, abelian, catalog_make, heisenberg, mal_multiply, mal_power, verify_presentation, xvars
from nilzeta.oracle import (
    coset_measure,
    counted_basis_measure,
    counted_index,
    hnf_counts,
    membership_oracle,
    random_good_basis,
)
from nilzeta.polyring import Polynomial
from nilzeta.zeta import assemble_global, multiplicativity_failures, oracle_compare


def _abs_p(x: int, p: int) -> Fraction:
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return Fraction(1, p ** v)


def test_A1_abelian_baseline(record):
    t0 = time.perf_counter()
    for p in (2, 3, 5):
        cone = local_counts(abelian(2), p, 3).counts()
        hnf = [hnf_counts(2, p ** k) for k in range(4)]
        assert record("A1", cone == hnf, f"Z^2 p={p} cone {cone} hnf {hnf}")
    elapsed = time.perf_counter() - t0
    assert record("A1", elapsed < 5, f"runtime {elapsed:.2f}s < 5s")


def test_A2_rank3_multiplicativity(record):
    t0 = time.perf_counter()
    series = assemble_global(abelian(3), "subgroup", 20)
    hnf = [hnf_counts(3, n) for n in range(1, 21)]
    assert record("A2", series.coeffs == hnf, "Z^3 a_n = HNF count for n <= 20")
    bad = multiplicativity_failures(series)
    assert record("A2", bad == [], f"coprime multiplicativity failures {bad}")
    elapsed = time.perf_counter() - t0
    assert record("A2", elapsed < 60, f"runtime {elapsed:.2f}s < 60s")


@pytest.mark.parametrize("variant", ["subgroup", "normal"])
def test_A3_heisenberg_vs_oracle(record, variant):
    t0 = time.perf_counter()
    report = oracle_compare(heisenberg(), variant, [2, 3], 2)
    for row in report.rows:
        ok = row.agree and row.stable
        assert record("A3", ok, f"{variant} p={row.p} cone {row.cone} oracle {row.oracle} stable {row.stable}")
    elapsed = time.perf_counter() - t0
    assert record("A3", elapsed < 600, f"{variant} runtime {elapsed:.2f}s < 600s")


DINFTY = extension_make("dinfty")
K_TRIVIAL, K_C2 = fin_subgroups(DINFTY.F)


@pytest.mark.parametrize("p", [2, 3, 5])
def test_A4_trivial_K(record, p):
    for variant in ("subgroup", "normal"):
        got = local_counts(DINFTY, p, 2, variant, K_TRIVIAL).counts()
        assert record("A4", got == [1, 1, 1], f"K={{1}} {variant} p={p} counts {got}")


@pytest.mark.parametrize("p", [2, 3, 5])
def test_A4_c2_subgroup(record, p):
    got = local_counts(DINFTY, p, 2, "subgroup", K_C2).counts()
    assert record("A4", got == [1, p, p * p], f"K=C2 <= p={p} counts {got} expected {[1, p, p * p]}")


@pytest.mark.parametrize("p", [2, 3, 5])
def test_A4_c2_normal(record, p):
    # stated target values; cone pipeline and oracle both disagree with them (see README)
    expected = [1, 2, 2] if p == 2 else [1, 1, 1]
    got = local_counts(DINFTY, p, 2, "normal", K_C2).counts()
    assert record("A4", got == expected, f"K=C2 normal p={p} counts {got} expected {expected}")


def test_A4_oracle_and_global(record):
    t0 = time.perf_counter()
    for variant in ("subgroup", "normal"):
        report = oracle_compare(DINFTY, variant, [2, 3, 5], 2)
        assert record("A4", report.verdict == "agree", f"{variant} cone vs oracle {report.verdict}")
    series = assemble_global(DINFTY, "subgroup", 10)
    expected = [n + (1 if n % 2 == 0 else 0) for n in range(1, 11)]
    assert record("A4", series.coeffs == expected, f"global <= a_n {series.coeffs}")
    elapsed = time.perf_counter() - t0
    assert record("A4", elapsed < 60, f"runtime {elapsed:.2f}s < 60s")


def test_A5_commensurability(record):
    t0 = time.perf_counter()
    pairs = [("abelian:2", "scaled(abelian:2;2,1)"), ("heisenberg", "scaled(heisenberg;2,1,1)")]
    for base, sub in pairs:
        for p in (3, 5):
            a = local_counts(catalog_make(base), p, 2).counts()
            b = local_counts(catalog_make(sub), p, 2).counts()
            assert record("A5", a == b, f"{base} vs {sub} p={p}: {a} / {b}")
        a = local_counts(catalog_make(base), 2, 2).counts()
        b = local_counts(catalog_make(sub), 2, 2).counts()
        # p = 2 divides the index; either outcome is acceptable and only recorded
        record("A5", True, f"{base} vs {sub} p=2 {'agree' if a == b else 'differ'}: {a} / {b}")
    elapsed = time.perf_counter() - t0
    assert record("A5", elapsed < 10, f"runtime {elapsed:.2f}s < 10s")


CATALOG_GROUPS = ["abelian:1", "abelian:2", "abelian:3", "heisenberg",
                  "product(abelian:1,heisenberg)", "scaled(heisenberg;2,1,1)"]


@pytest.mark.parametrize("desc", CATALOG_GROUPS)
def test_A6_membership_equivalence(record, desc):
    t0 = time.perf_counter()
    N = catalog_make(desc)
    conds = membership_conditions(N)
    rng = random.Random(2024)
    disagreements = 0
    inside = 0
    for _ in range(200):
        p = rng.choice([2, 3, 5])
        t = random_good_basis(N, p, rng, max_val=2)
        if rng.random() < 0.5:
            z = tuple(rng.randint(-50, 50) for _ in range(N.h))
        else:
            z = N.identity()
            for row in t:
                z = mal_multiply(N, z, mal_power(N, tuple(row), rng.randint(-4, 4)))
        truth = membership_oracle(N, t, z, p)
        inside += truth
        if conditions_hold(conds, membership_values(t, z), p) != truth:
            disagreements += 1
    elapsed = time.perf_counter() - t0
    ok = disagreements == 0 and elapsed < 60
    assert record("A6", ok, f"{desc}: {disagreements} disagreements in 200 ({inside} members), {elapsed:.2f}s")


@pytest.mark.parametrize("desc", ["abelian:2", "heisenberg"])
@pytest.mark.parametrize("p", [2, 3])
def test_A7_measure_and_index(record, desc, p):
    t0 = time.perf_counter()
    N = catalog_make(desc)
    h = N.h
    rng = random.Random(7 + p)
    failures = 0
    for _ in range(20):
        t = random_good_basis(N, p, rng)
        index = 1
        measure = Fraction(p - 1, p) ** h
        for i in range(h):
            index *= 1 / _abs_p(t[i][i], p)
            measure *= _abs_p(t[i][i], p) ** (i + 1)
        x = tuple(rng.randint(0, p * p) for _ in range(h))
        if counted_index(N, t, p) != index:
            failures += 1
        elif counted_basis_measure(N, t, p) != measure:
            failures += 1
        elif coset_measure(N, t, x, p) != 1 / Fraction(index):
            failures += 1
    elapsed = time.perf_counter() - t0
    ok = failures == 0 and elapsed < 60
    assert record("A7", ok, f"{desc} p={p}: {failures} failures in 20, {elapsed:.2f}s")


def test_A8_mutated_presentation(record):
    H = heisenberg()
    X = [Polynomial.var(v) for v in xvars(3)]
    f = list(H.f)
    f[2] = f[2] + X[0]
    bad = MalcevPresentation(3, tuple(f), H.g, H.c, 2, name="mutated")
    assert record("A8", not verify_presentation(bad).ok, "mutated Heisenberg fails verification")


def test_A8_corrupted_conditions(record):
    def corrupted(K):
        s = good_basis_conditions(heisenberg())
        return ConeConditionSystem(s.h, s.variables, [], s.ksize, s.variant, "corrupted", s.K)

    report = oracle_compare(heisenberg(), "subgroup", [2], 2, system_override=corrupted)
    assert record("A8", report.verdict == "mismatch", f"dropped condition gives {report.verdict}")


def test_A8_non_integral_count(record):
    try:
        local_counts(heisenberg(), 2, 2, shift=2)
        raised = False
    except ConsistencyError:
        raised = True
    assert record("A8", raised, "wrong shift raises the consistency failure")
