"""Symbolic generation of cone conditions and cone integral data.

Membership of x^z in the closure of <x^{t_1}, ..., x^{t_h}> (t a good basis)
is turned into h divisibility conditions q_i | p_i by back-substitution
through the Mal'cev polynomials; good-basis, normality and relative
(virtually-tau) conditions are all reduced to such membership tests.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .extension import (
    StructureWords,
    SubgroupOfF,
    UsageError,
    VirtuallyTauGroup,
    structure_words,
)
from .malcev import MalcevPresentation, symbolic_c, symbolic_f, symbolic_g
from .polyring import (
    Polynomial,
    poly_compose,
    poly_eval,
    poly_from_records,
    poly_to_records,
    vp,
)


class ConeGenerationError(RuntimeError):
    """Internal failure of the symbolic construction (indicates a bug)."""


def tname(i: int, j: int) -> str:
    return f"T{i}_{j}"


def vname(f: int, i: int) -> str:
    return f"V{f}_{i}"


def t_vars(h: int) -> tuple:
    return tuple(tname(i, j) for i in range(1, h + 1) for j in range(i, h + 1))


def diag_vars(h: int) -> tuple:
    return tuple(tname(i, i) for i in range(1, h + 1))


def t_row(h: int, i: int) -> list:
    """Row i of the symbolic upper triangular matrix, as an h-vector."""
    return [Polynomial.var(tname(i, j)) if j >= i else Polynomial.zero() for j in range(1, h + 1)]


# -- conditions -------------------------------------------------------------


@dataclass(frozen=True)
class ConeCondition:
    """v_p(num(x)) >= v_p(den(x)); den is a constant times a diagonal monomial."""

    num: Polynomial
    den: Polynomial

    def key(self) -> tuple:
        return (self.num.canonical_key(), self.den.canonical_key())

    def den_parts(self) -> tuple[Fraction, dict]:
        """(constant, {diagonal variable: exponent}) of the denominator."""
        if not self.den.is_monomial():
            raise ConeGenerationError(f"denominator {self.den} is not a monomial")
        (exps, c), = self.den.terms.items()
        mono = {v: e for v, e in zip(self.den.vars, exps) if e}
        return c, mono

    def is_vacuous(self) -> bool:
        return self.num.is_zero()

    def __str__(self):
        return f"({self.den}) | ({self.num})"


def _check_diag_monomial(den: Polynomial, h: int):
    if not den.is_monomial():
        raise ConeGenerationError(f"denominator {den} is not a monomial")
    diag = set(diag_vars(h))
    for v in den.used_vars():
        if v not in diag:
            raise ConeGenerationError(f"denominator {den} involves non-diagonal {v}")


def normalize_condition(num: Polynomial, den: Polynomial) -> ConeCondition:
    """Cancel the common monomial factor and fix the sign of the numerator."""
    if num.is_zero():
        return ConeCondition(Polynomial.zero(), den.trimmed())
    common = num.monomial_content()
    dmono = den.monomial_content()
    cancel = {v: min(e, dmono.get(v, 0)) for v, e in common.items() if dmono.get(v, 0)}
    if cancel:
        def divide(P):
            idx = {v: k for k, v in enumerate(P.vars)}
            out = {}
            for exps, c in P.terms.items():
                e = list(exps)
                for v, m in cancel.items():
                    e[idx[v]] -= m
                out[tuple(e)] = c
            return Polynomial(P.vars, out)

        num, den = divide(num), divide(den)
    num, den = num.trimmed(), den.trimmed()
    lead = max(num.canonical_key())  # deterministic reference term
    if lead[1] < 0:
        num = -num
    (_, c), = den.terms.items()
    if c < 0:
        den = -den
    return ConeCondition(num, den)


def _substitute_fraction(P: Polynomial, var: str, num: Polynomial, den: Polynomial):
    """P(var := num/den) * den^D with D = deg_var P; returns (poly, D)."""
    D = P.degree_in(var)
    if D == 0:
        return P.subs({var: Polynomial.zero()}) if var in P.vars else P, 0
    k = P.vars.index(var)
    rest = tuple(v for v in P.vars if v != var)
    parts: dict = {}
    for exps, c in P.terms.items():
        e = exps[k]
        mono = exps[:k] + exps[k + 1:]
        parts.setdefault(e, {})[mono] = c
    out = Polynomial.zero()
    for e, terms in parts.items():
        coeff = Polynomial(rest, terms)
        out = out + coeff * (num ** e) * (den ** (D - e))
    return out, D


def _zero_prefix(vec: Sequence[Polynomial], i: int) -> list:
    """v^i: zero the coordinates before i (1-based)."""
    return [Polynomial.zero() if k < i - 1 else vec[k] for k in range(len(vec))]


@functools.lru_cache(maxsize=None)
def _membership_cached(N: MalcevPresentation) -> tuple:
    h = N.h
    Z = [Polynomial.var(f"Z{i}") for i in range(1, h + 1)]
    W = [Polynomial.var(f"W{i}") for i in range(1, h + 1)]
    k = [Z]
    for i in range(2, h + 1):
        gi = symbolic_g(N, t_row(h, i - 1), W[i - 2])
        inv = symbolic_g(N, _zero_prefix(gi, i), -1)
        ki = symbolic_f(N, inv, _zero_prefix(k[-1], i))
        for r in range(i - 1):
            if not ki[r].is_zero():
                raise ConeGenerationError(f"k_{i} has nonzero coordinate {r + 1}")
        k.append(list(ki))
    fracs = []
    for i in range(1, h + 1):
        P = k[i - 1][i - 1]
        den = Polynomial.const(1)
        for j in range(1, i):
            nj, dj = fracs[j - 1]
            P, D = _substitute_fraction(P, f"W{j}", nj, dj)
            den = den * dj ** D
        den = den * Polynomial.var(tname(i, i))
        for v in P.used_vars():
            if v.startswith("W"):
                raise ConeGenerationError(f"unsubstituted {v} in v_{i}")
        _check_diag_monomial(den, h)
        fracs.append((P, den))
    return tuple(normalize_condition(P, d) for P, d in fracs)


def membership_conditions(N: MalcevPresentation) -> list[ConeCondition]:
    """The h conditions q_i | p_i over variables T (upper triangular) and Z."""
    return list(_membership_cached(N))


def apply_membership(
    conds: Sequence[ConeCondition], z: Sequence[Polynomial], t_offset: int = 0
) -> list[ConeCondition]:
    """Instantiate membership conditions at Z := z, shifting T indices by t_offset."""
    mapping = {f"Z{i + 1}": (zi if isinstance(zi, Polynomial) else Polynomial.const(zi))
               for i, zi in enumerate(z)}
    if t_offset:
        for c in conds:
            for v in c.num.vars + c.den.vars:
                if v.startswith("T"):
                    i, j = (int(s) for s in v[1:].split("_"))
                    mapping[v] = Polynomial.var(tname(i + t_offset, j + t_offset))
    out = []
    for c in conds:
        num = c.num.subs(mapping)
        den = c.den.subs({k: v for k, v in mapping.items() if k.startswith("T")})
        out.append(normalize_condition(num, den))
    return out


def conditions_hold(conds: Sequence[ConeCondition], values: dict, p: int) -> bool:
    """Do all conditions hold at the point `values` (name -> rational)?"""
    for c in conds:
        num = poly_eval(c.num, [values[v] for v in c.num.vars])
        if num == 0:
            continue
        den = poly_eval(c.den, [values[v] for v in c.den.vars])
        if den == 0:
            raise ValueError("denominator vanishes: diagonal entries must be nonzero")
        if vp(num, p) < vp(den, p):
            return False
    return True


def membership_values(t, z) -> dict:
    """Variable assignment T_ij := t[i-1][j-1], Z_i := z[i-1]."""
    h = len(z)
    values = {tname(i, j): t[i - 1][j - 1] for i in range(1, h + 1) for j in range(i, h + 1)}
    values.update({f"Z{i}": z[i - 1] for i in range(1, h + 1)})
    return values


# -- systems ------------------------------------------------------------------


@dataclass
class ConeConditionSystem:
    h: int
    variables: tuple
    conditions: list
    ksize: int = 1
    variant: str = "subgroup"
    label: str = ""
    K: tuple = (0,)

    @property
    def shift(self) -> int:
        return self.h + self.ksize - 1

    @property
    def normalization(self) -> int:
        return self.h

    @property
    def weight_exponents(self) -> tuple:
        """Constant part c_i of the exponent s + c_i of |t_ii| in the integrand."""
        return tuple(-i - self.ksize + 1 for i in range(1, self.h + 1))

    def check_variables(self):
        declared = set(self.variables)
        for c in self.conditions:
            for v in c.num.used_vars() + c.den.used_vars():
                if v not in declared:
                    raise ConeGenerationError(f"condition uses undeclared variable {v}")


def is_trivially_true(c: ConeCondition) -> bool:
    """Zero numerator, or a constant denominator dividing every coefficient in Z."""
    if c.is_vacuous():
        return True
    if not c.den.is_constant():
        return False
    d = c.den.constant_value()
    return all((coef / d).denominator == 1 for coef in c.num.terms.values())


def prune(conds: Sequence[ConeCondition]) -> list[ConeCondition]:
    """Drop conditions true at every point and syntactic duplicates (order kept)."""
    seen = set()
    out = []
    for c in conds:
        if is_trivially_true(c):
            continue
        k = c.key()
        if k in seen:
            continue
        seen.add(k)
        out.append(c)
    return out


def _good_basis_raw(N: MalcevPresentation) -> list[ConeCondition]:
    h = N.h
    rows = [t_row(h, i) for i in range(1, h + 1)]
    out = []
    # suffix recursion: N_h is the base (no conditions), then N_{h-1}, ..., N_1
    for i in range(h, 0, -1):
        for j in range(i + 1, h + 1):
            comm = symbolic_c(N, rows[i - 1], rows[j - 1])
            for r in range(j):
                if not comm[r].is_zero():
                    raise ConeGenerationError(f"c(t_{i}, t_{j}) nonzero in coordinate {r + 1}")
            if j == h:
                continue
            suffix = N.suffix(j + 1)
            conds = membership_conditions(suffix)
            out.extend(apply_membership(conds, comm[j:], t_offset=j))
    return out


def _normal_extra_raw(N: MalcevPresentation) -> list[ConeCondition]:
    h = N.h
    conds = membership_conditions(N)
    out = []
    for i in range(1, h + 1):
        e = [1 if k == i - 1 else 0 for k in range(h)]
        for j in range(1, h + 1):
            z = symbolic_c(N, e, t_row(h, j))
            out.extend(apply_membership(conds, z))
    return out


def good_basis_conditions(N: MalcevPresentation, variant: str = "subgroup") -> ConeConditionSystem:
    from .extension import normalize_variant

    variant = normalize_variant(variant)
    raw = _good_basis_raw(N)
    if variant == "normal":
        raw += _normal_extra_raw(N)
    system = ConeConditionSystem(N.h, t_vars(N.h), prune(raw), 1, variant, N.name)
    system.check_variables()
    return system


def _vrow(h: int, f: int) -> list:
    if f == 0:
        return [Polynomial.zero()] * h
    return [Polynomial.var(vname(f, i)) for i in range(1, h + 1)]


def relative_words(
    V: VirtuallyTauGroup, K: SubgroupOfF, variant: str, words: StructureWords | None = None
) -> list[tuple[str, tuple]]:
    """The (label, h-tuple) words whose membership in B_t encodes A being a (normal) subgroup."""
    from .extension import normalize_variant

    variant = normalize_variant(variant)
    N, F, h = V.N, V.F, V.h
    sw = words or structure_words(V, K)
    Kn = sorted(x for x in K.members if x != 0)
    rows = [t_row(h, i) for i in range(1, h + 1)]

    def p_apply(f, vec):
        return tuple(poly_compose(P, list(vec)) for P in sw.p[f])

    def inv(vec):
        return symbolic_g(N, vec, -1)

    def mul(*vecs):
        out = vecs[0]
        for v in vecs[1:]:
            out = symbolic_f(N, out, v)
        return tuple(out)

    words_out = []
    for f in Kn:
        vf = _vrow(h, f)
        for i in range(1, h + 1):
            words_out.append((f"(1) f={f} i={i}", mul(inv(vf), p_apply(f, rows[i - 1]), vf)))
    for f in Kn:
        for f2 in Kn:
            ff = F.mul(f, f2)
            z = mul(inv(_vrow(h, ff)), sw.n[(f, f2)], p_apply(f2, _vrow(h, f)), _vrow(h, f2))
            words_out.append((f"(2) f={f} f'={f2}", z))
    if variant == "normal":
        for i in range(1, h + 1):
            e = [1 if k == i - 1 else 0 for k in range(h)]
            for j in range(1, h + 1):
                words_out.append((f"(4) i={i} j={j}", symbolic_c(N, e, rows[j - 1])))
        for f in F.elements():
            if f == 0:
                continue
            for i in range(1, h + 1):
                words_out.append((f"(5) f={f} i={i}", p_apply(f, rows[i - 1])))
        for f in Kn:
            vf = _vrow(h, f)
            for i in range(1, h + 1):
                neg_e = [-1 if k == i - 1 else 0 for k in range(h)]
                z = mul(inv(vf), sw.l[(i, f)], vf, neg_e)
                words_out.append((f"(6) f={f} i={i}", z))
        for f in F.elements():
            if f == 0:
                continue
            finv = F.inv(f)
            for f2 in Kn:
                fc = F.mul(F.mul(f, f2), finv)
                z = mul(
                    inv(_vrow(h, fc)),
                    sw.n[(f, F.mul(f2, finv))],
                    sw.n[(f2, finv)],
                    p_apply(finv, _vrow(h, f2)),
                    inv(list(sw.n[(f, finv)])),
                )
                words_out.append((f"(7) f={f} f'={f2}", z))
    return words_out


def relative_conditions(
    V: VirtuallyTauGroup, K: SubgroupOfF, variant: str = "subgroup"
) -> ConeConditionSystem:
    from .extension import normalize_variant

    variant = normalize_variant(variant)
    if variant == "normal" and not K.normal:
        raise UsageError(f"K = {sorted(K.members)} is not normal in F")
    N, h = V.N, V.h
    raw = _good_basis_raw(N)
    conds = membership_conditions(N)
    for _label, z in relative_words(V, K, variant):
        raw.extend(apply_membership(conds, z))
    Kn = sorted(x for x in K.members if x != 0)
    variables = t_vars(h) + tuple(vname(f, i) for f in Kn for i in range(1, h + 1))
    system = ConeConditionSystem(
        h, variables, prune(raw), len(K.members), variant, V.name, tuple(sorted(K.members))
    )
    system.check_variables()
    return system


# -- cone integral data ----------------------------------------------------------


@dataclass
class ConeIntegralData:
    h: int
    variables: tuple
    f0: Polynomial
    g0: Polynomial
    pairs: list  # (f_j, g_j) = (den, num): the condition is v(f_j) <= v(g_j)
    shift: int
    ksize: int = 1
    label: str = ""
    meta: dict = field(default_factory=dict)

    def conditions(self) -> list[ConeCondition]:
        return [ConeCondition(num, den) for den, num in self.pairs]

    def exponent_identity_holds(self) -> bool:
        # |f0|^{s-shift} |g0| = prod |t_ii|^{s - i - |K| + 1}: compare the constant parts
        ok = True
        for i in range(1, self.h + 1):
            g0_exp = self.g0.degree_in(tname(i, i))
            f0_exp = self.f0.degree_in(tname(i, i))
            ok &= f0_exp == 1 and -self.shift + g0_exp == -i - self.ksize + 1
        return ok


def emit_cone_data(system: ConeConditionSystem) -> ConeIntegralData:
    h = system.h
    f0 = Polynomial.const(1)
    g0 = Polynomial.const(1)
    for i in range(1, h + 1):
        t = Polynomial.var(tname(i, i))
        f0 = f0 * t
        g0 = g0 * t ** (h - i)
    pairs = [(c.den, c.num) for c in prune(system.conditions)]
    data = ConeIntegralData(
        h, system.variables, f0.trimmed(), g0.trimmed(), pairs, system.shift, system.ksize,
        system.label, {"variant": system.variant, "K": list(system.K)},
    )
    if not data.exponent_identity_holds():
        raise ConeGenerationError("exponent identity violated")
    return data


# -- JSON ---------------------------------------------------------------------


def system_to_json(system: ConeConditionSystem) -> dict:
    vs = system.variables
    return {
        "schema": 1,
        "kind": "cone-conditions",
        "label": system.label,
        "variant": system.variant,
        "K": list(system.K),
        "h": system.h,
        "variables": list(vs),
        "conditions": [
            {"num": poly_to_records(c.num, vs), "den": poly_to_records(c.den, vs)}
            for c in system.conditions
        ],
        "weights": list(system.weight_exponents),
        "shift": system.shift,
        "normalization": system.normalization,
    }


def system_from_json(data: dict) -> ConeConditionSystem:
    vs = tuple(data["variables"])
    conds = [
        ConeCondition(
            poly_from_records(c["num"], vs).trimmed(), poly_from_records(c["den"], vs).trimmed()
        )
        for c in data["conditions"]
    ]
    K = tuple(data.get("K", [0]))
    system = ConeConditionSystem(
        int(data["h"]), vs, conds, len(K), data.get("variant", "subgroup"), data.get("label", ""), K
    )
    system.check_variables()
    return system
