"""Exact evaluation of cone integrals at a single prime.

The integral is sliced by the valuations m_i = v_p(t_ii).  On a slice we
write t_ii = p^{m_i} u_i with u_i a unit, which scales coefficients and
turns every condition into a congruence Q(x) = 0 mod p^r on a few
variables.  Residues are then refined one p-adic digit at a time, closing a
branch as soon as every congruence is decided.
"""

from __future__ import annotations

import itertools
import os
import random
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .conegen import (
    ConeCondition,
    ConeConditionSystem,
    ConeIntegralData,
    emit_cone_data,
    good_basis_conditions,
    relative_conditions,
    tname,
)
from .extension import SubgroupOfF, VirtuallyTauGroup, normalize_variant
from .malcev import MalcevPresentation
from .polyring import clear_denominators, is_prime


class ConsistencyError(ArithmeticError):
    """A count came out non-integral or negative: the pipeline is inconsistent."""


class DepthError(RuntimeError):
    pass


def default_workers() -> int:
    env = os.environ.get("NILZETA_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _vint(n: int, p: int) -> int:
    if n == 0:
        raise ValueError("valuation of zero")
    k = 0
    while n % p == 0:
        n //= p
        k += 1
    return k


def _vfrac(x: Fraction, p: int) -> int:
    return _vint(x.numerator, p) - _vint(x.denominator, p)


# -- prepared conditions ---------------------------------------------------------


@dataclass(frozen=True)
class PreparedCondition:
    """Plain-data form of a condition: picklable and cheap to scale per slice."""

    variables: tuple  # names used by the numerator
    terms: tuple  # ((int coeff, exponent tuple), ...) of the cleared numerator
    dclear: int  # numerator = Pint / dclear
    den_const: Fraction
    den_exps: tuple  # ((diag index 0-based, exponent), ...)
    diag_pos: tuple  # ((position in variables, diag index 0-based), ...)


def prepare(cond: ConeCondition, h: int) -> PreparedCondition:
    num = cond.num.trimmed()
    pint, d = clear_denominators(num)
    pint = pint.with_vars(num.vars)
    terms = tuple((int(c), tuple(e)) for e, c in sorted(pint.terms.items()))
    c, mono = cond.den_parts()
    diag = {tname(i, i): i - 1 for i in range(1, h + 1)}
    den_exps = tuple(sorted((diag[v], e) for v, e in mono.items()))
    diag_pos = tuple((k, diag[v]) for k, v in enumerate(num.vars) if v in diag)
    return PreparedCondition(num.vars, terms, d, c, den_exps, diag_pos)


@dataclass
class ValuationSlice:
    m: tuple
    p: int
    depth: int = 0


def condition_depth(cond, slice_: ValuationSlice, h: int | None = None) -> int:
    """c = v_p(constant) + sum exp_i * m_i: the condition reads v_p(num) >= c."""
    if isinstance(cond, ConeCondition):
        cond = prepare(cond, h if h is not None else len(slice_.m))
    p, m = slice_.p, slice_.m
    return _vfrac(cond.den_const, p) + sum(e * m[i] for i, e in cond.den_exps)


def required_depth(cond: PreparedCondition, p: int, m: Sequence[int]) -> int:
    """Exponent r with the condition equivalent to Pint(x) = 0 mod p^r (before unit scaling)."""
    c = _vfrac(cond.den_const, p) + sum(e * m[i] for i, e in cond.den_exps)
    return c + _vint(cond.dclear, p)


@dataclass
class _Congruence:
    """Q(x) = 0 mod p^r over global variable indices."""

    r: int
    terms: list  # (coeff mod p^r, v_p(coeff), ((var index, exp), ...))


def _slice_congruences(prepared, p: int, m: Sequence[int]):
    """Scale each condition to the slice; drop vacuous ones."""
    out = []
    for pc in prepared:
        req = required_depth(pc, p, m)
        scaled = []
        for coeff, exps in pc.terms:
            k = sum(exps[pos] * m[i] for pos, i in pc.diag_pos)
            scaled.append((coeff * p ** k, exps))
        e0 = min(_vint(c, p) for c, _ in scaled)
        r = req - e0
        if r <= 0:
            continue
        mod = p ** r
        terms = []
        for c, exps in scaled:
            c //= p ** e0
            c %= mod
            if c == 0:
                continue
            terms.append((c, _vint(c, p), exps))
        out.append((pc.variables, r, terms))
    return out


def _globalize(congs):
    names = []
    index = {}
    result = []
    for variables, r, terms in congs:
        gterms = []
        for c, v, exps in terms:
            mono = []
            for name, e in zip(variables, exps):
                if e:
                    if name not in index:
                        index[name] = len(names)
                        names.append(name)
                    mono.append((index[name], e))
            gterms.append((c, v, tuple(mono)))
        result.append(_Congruence(r, gterms))
    return names, result


def _status(cg: _Congruence, p: int, res, prec) -> int:
    """1 decided true, 0 decided false, -1 undecided."""
    r = cg.r
    known = r
    total = 0
    for c, v, mono in cg.terms:
        if mono:
            known = min(known, v + min(prec[i] for i, _ in mono))
        val = c
        for i, e in mono:
            val *= res[i] ** e
        total += val
    if known <= 0:
        return -1
    if total % p ** known:
        return 0
    return 1 if known >= r else -1


def _lift_count(p: int, congs: list, nvars: int, units: Sequence[bool]) -> Counter:
    """Leaf tally keyed by (total digits fixed, unbranched units)."""
    tally: Counter = Counter()
    res = [0] * nvars
    prec = [0] * nvars
    var_sets = [sorted({i for _, _, mono in cg.terms for i, _ in mono}) for cg in congs]

    def visit(open_idx):
        still = []
        for k in open_idx:
            st = _status(congs[k], p, res, prec)
            if st == 0:
                return
            if st == -1:
                still.append(k)
        if not still:
            unbranched = sum(1 for i in range(nvars) if units[i] and prec[i] == 0)
            tally[(sum(prec), unbranched)] += 1
            return
        best = None
        for k in still:
            for i in var_sets[k]:
                if best is None or prec[i] < prec[best] or (prec[i] == prec[best] and i < best):
                    best = i
        i = best
        j = prec[i]
        base = res[i]
        step = p ** j
        digits = range(1, p) if (units[i] and j == 0) else range(p)
        prec[i] = j + 1
        for d in digits:
            res[i] = base + d * step
            visit(still)
        res[i] = base
        prec[i] = j

    visit(list(range(len(congs))))
    return tally


def _measure_from_tally(p: int, tally: Counter) -> Fraction:
    total = Fraction(0)
    unit = Fraction(p - 1, p)
    for (digits, unbranched), count in tally.items():
        total += count * unit ** unbranched / Fraction(p) ** digits
    return total


def _slice_measure_prepared(prepared, h: int, p: int, m: Sequence[int]) -> Fraction:
    congs = _slice_congruences(prepared, p, m)
    names, gcongs = _globalize(congs)
    diag_names = {tname(i, i) for i in range(1, h + 1)}
    units = [n in diag_names for n in names]
    inactive_units = h - sum(units)
    tally = _lift_count(p, gcongs, len(names), units)
    jac = Fraction(1, p ** sum(m))
    return jac * Fraction(p - 1, p) ** inactive_units * _measure_from_tally(p, tally)


def _prepared_of(system) -> tuple:
    if isinstance(system, ConeIntegralData):
        conds = system.conditions()
    else:
        conds = system.conditions
    return tuple(prepare(c, system.h) for c in conds)


def slice_measure(system, p: int, m: Sequence[int]) -> Fraction:
    """Haar measure of {x : v_p(t_ii) = m_i, all conditions hold} (full space has measure 1)."""
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    m = tuple(int(x) for x in m)
    if len(m) != system.h or min(m, default=0) < 0:
        raise ValueError(f"bad slice {m} for h={system.h}")
    return _slice_measure_prepared(_prepared_of(system), system.h, p, m)


def slice_depth(system, p: int, m: Sequence[int]) -> int:
    """Working modulus exponent M for the slice in unscaled coordinates."""
    M = max(m) + 1 if m else 1
    for pc in _prepared_of(system):
        M = max(M, required_depth(pc, p, m))
    return M


def flat_slice_measure(system, p: int, m: Sequence[int], depth: int | None = None,
                       budget: int = 2_000_000) -> Fraction:
    """Reference measure by flat enumeration of all active variables mod p^M.

    Works in the original coordinates: t_ii ranges over residues of exact
    valuation m_i mod p^M, so M must exceed every m_i.
    """
    prepared = _prepared_of(system)
    h = system.h
    m = tuple(m)
    M = depth if depth is not None else slice_depth(system, p, m)
    if M <= max(m, default=0):
        raise DepthError(f"depth {M} does not exceed slice valuations {m}")
    active = []
    for pc in prepared:
        if required_depth(pc, p, m) > 0:
            active.append(pc)
    names = sorted({v for pc in active for v in pc.variables})
    diag_index = {tname(i, i): i - 1 for i in range(1, h + 1)}
    q = p ** M
    ranges = []
    for n in names:
        if n in diag_index:
            mi = m[diag_index[n]]
            ranges.append([x for x in range(p ** mi, q, p ** mi) if (x // p ** mi) % p])
        else:
            ranges.append(range(q))
    size = 1
    for r in ranges:
        size *= len(r)
    if size > budget:
        raise DepthError(f"flat enumeration of {size} points exceeds budget {budget}")
    checks = []
    for pc in active:
        pos = [names.index(v) for v in pc.variables]
        checks.append((pc, pos, p ** required_depth(pc, p, m)))
    good = 0
    for point in itertools.product(*ranges):
        ok = True
        for pc, pos, mod in checks:
            val = 0
            for c, exps in pc.terms:
                t = c
                for k, e in enumerate(exps):
                    if e:
                        t *= point[pos[k]] ** e
                val += t
            if val % mod:
                ok = False
                break
        if ok:
            good += 1
    # active variables counted mod p^M; inactive diagonals have exact valuation m_i
    meas = Fraction(good, q ** len(names))
    for i in range(h):
        if tname(i + 1, i + 1) not in names:
            meas *= Fraction(p - 1, p) / p ** m[i]
    return meas


# -- series ---------------------------------------------------------------------


@dataclass
class LocalSeries:
    p: int
    kmax: int
    coeffs: list
    provenance: str = "cone"
    label: str = ""
    variant: str = "subgroup"
    K: tuple = (0,)
    a_raw: list = field(default_factory=list)
    stable: bool | None = None

    def counts(self) -> list:
        return [int(c) for c in self.coeffs]

    def to_json(self) -> dict:
        out = {
            "schema": 1,
            "p": self.p,
            "kmax": self.kmax,
            "variant": self.variant,
            "K": list(self.K),
            "counts": [int(c) if Fraction(c).denominator == 1 else str(c) for c in self.coeffs],
            "a_raw": [str(Fraction(a)) for a in self.a_raw],
            "provenance": self.provenance,
            "label": self.label,
        }
        if self.stable is not None:
            out["stable"] = self.stable
        return out


def slices(h: int, k: int):
    """All m in N^h with sum k, in lexicographic order."""
    if h == 1:
        yield (k,)
        return
    for first in range(k + 1):
        for rest in slices(h - 1, k - first):
            yield (first,) + rest


def _slice_task(args):
    prepared, h, p, m = args
    return m, _slice_measure_prepared(prepared, h, p, m)


def _all_slice_measures(prepared, h, p, kmax, workers):
    jobs = [(prepared, h, p, m) for k in range(kmax + 1) for m in slices(h, k)]
    if workers and workers > 1 and len(jobs) >= 16:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_slice_task, jobs, chunksize=4))
    else:
        results = [_slice_task(j) for j in jobs]
    return dict(results)


def cone_coeffs(D, p: int, kmax: int, workers: int | None = None) -> LocalSeries:
    """Coefficients a_{p,k}, k <= kmax, of Z_D(s, p) = sum_k a_{p,k} p^{-ks}."""
    if isinstance(D, ConeConditionSystem):
        D = emit_cone_data(D)
    h = D.h
    prepared = _prepared_of(D)
    measures = _all_slice_measures(prepared, h, p, kmax, workers or 1)
    coeffs = []
    for k in range(kmax + 1):
        a = Fraction(0)
        for m in slices(h, k):
            weight = sum((h - i - 1) * mi for i, mi in enumerate(m))
            a += measures[m] / Fraction(p) ** weight
        coeffs.append(a)
    return LocalSeries(p, kmax, coeffs, "cone-raw", D.label, D.meta.get("variant", ""),
                       tuple(D.meta.get("K", (0,))), list(coeffs))


def counts_from_coeffs(raw: LocalSeries, h: int, shift: int) -> list:
    p = raw.p
    norm = Fraction(p, p - 1) ** h
    counts = []
    for k, a in enumerate(raw.coeffs):
        c = norm * a * Fraction(p) ** (k * shift)
        if c.denominator != 1 or c < 0:
            raise ConsistencyError(
                f"count at p={p}, k={k} is {c}, not a non-negative integer (a_raw={a})"
            )
        counts.append(int(c))
    if counts and counts[0] != 1:
        raise ConsistencyError(f"count at p={p}, k=0 is {counts[0]}, expected 1")
    return counts


def build_system(source, variant: str = "subgroup", K: SubgroupOfF | None = None):
    variant = normalize_variant(variant)
    if isinstance(source, ConeConditionSystem):
        return source
    if isinstance(source, MalcevPresentation):
        return good_basis_conditions(source, variant)
    if isinstance(source, VirtuallyTauGroup):
        if K is None:
            K = SubgroupOfF(frozenset([0]), source.F.order, True)
        return relative_conditions(source, K, variant)
    raise TypeError(f"cannot build a condition system from {type(source).__name__}")


def local_counts(
    source,
    p: int,
    kmax: int,
    variant: str = "subgroup",
    K: SubgroupOfF | None = None,
    workers: int | None = None,
    shift: int | None = None,
    depth_check: bool = False,
) -> LocalSeries:
    """Integer counts count_k = (1-1/p)^-h a_{p,k} p^{k*shift} for k = 0..kmax."""
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    if kmax < 0:
        raise ValueError("kmax must be non-negative")
    system = build_system(source, variant, K)
    D = emit_cone_data(system)
    if shift is not None:
        D.shift = shift
    raw = cone_coeffs(D, p, kmax, workers if workers is not None else default_workers())
    if depth_check:
        spot_check_depth(system, p, kmax)
    counts = counts_from_coeffs(raw, D.h, D.shift)
    return LocalSeries(p, kmax, counts, "cone", system.label, system.variant,
                       tuple(system.K), raw.coeffs)


def spot_check_depth(system, p: int, kmax: int, seed: int = 0, budget: int = 200_000):
    """Recompute one feasible slice by flat enumeration at depth M and M+1."""
    rng = random.Random(seed)
    candidates = [m for k in range(kmax + 1) for m in slices(system.h, k)]
    rng.shuffle(candidates)
    for m in candidates:
        M = slice_depth(system, p, m)
        try:
            a = flat_slice_measure(system, p, m, M, budget)
            b = flat_slice_measure(system, p, m, M + 1, budget)
        except DepthError:
            continue
        lifted = slice_measure(system, p, m)
        if not (a == b == lifted):
            raise ConsistencyError(
                f"depth check failed at p={p}, m={m}: lifted {lifted}, flat {a}, flat+1 {b}"
            )
        return m
    return None
