"""Brute-force ground truth independent of the cone machinery.

* finite quotients of N (or of G = N.F) by a congruence kernel, with
  subgroups of the p-part enumerated layer by layer through Frattini
  quotients;
* literal Hermite normal form enumeration for Z^h;
* a direct p-adic greedy solve for membership in the closed subgroup spanned
  by a good basis.
"""

from __future__ import annotations

import functools
import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .evaluator import LocalSeries
from .extension import (
    SubgroupOfF,
    VirtuallyTauGroup,
    normalize_variant,
    trivial_extension,
)
from .malcev import (
    MalcevPresentation,
    mal_commutator,
    mal_inverse,
    mal_multiply,
    symbolic_g,
    xvars,
    yvars,
)
from .polyring import Polynomial, clear_denominators, compile_int, is_prime, poly_compose


class BudgetError(RuntimeError):
    """The requested brute-force computation exceeds the configured budget."""


class QuotientInvalidError(ValueError):
    """The congruence kernel of level e is not normal / operations not well defined."""


class IndeterminateError(ArithmeticError):
    """The exact membership solve ran out of precision."""


DEFAULT_BUDGET = 200_000


# -- finite quotients --------------------------------------------------------------


def _compiled(P: Polynomial, variables):
    pint, d = clear_denominators(P.with_vars(variables))
    return compile_int(pint, variables), d


def _congruence_ok(P: Polynomial, args: Sequence[str], q: int) -> bool:
    """Pint(X + q D) - Pint(X) vanishes coefficient-wise mod d*q (D fresh per arg)."""
    pint, d = clear_denominators(P)
    shifted_vars = tuple(P.vars) + tuple(f"D_{a}" for a in args)
    subst = []
    for v in P.vars:
        x = Polynomial.var(v, shifted_vars)
        if v in args:
            x = x + Polynomial.var(f"D_{v}", shifted_vars) * q
        subst.append(x)
    diff = poly_compose(pint, subst) - pint.with_vars(shifted_vars)
    return all(c.denominator == 1 and c.numerator % (d * q) == 0 for c in diff.terms.values())


class FiniteQuotient:
    """G / K_e where K_e = {x^a : a = 0 mod p^e}; elements are (a_1..a_h, f)."""

    def __init__(self, source, p: int, e: int):
        if e < 1:
            raise ValueError("level e must be at least 1")
        if not is_prime(p):
            raise ValueError(f"{p} is not prime")
        V = source if isinstance(source, VirtuallyTauGroup) else trivial_extension(source)
        self.source = source
        self.V = V
        self.N = V.N
        self.F = V.F
        self.p = p
        self.e = e
        self.q = p ** e
        h = self.h = V.h
        X, Y = xvars(h), yvars(h)
        q = self.q
        for P in self.N.f:
            if not _congruence_ok(P, X + Y, q):
                raise QuotientInvalidError(f"multiplication not defined mod p^e (p={p}, e={e})")
        inv_polys = tuple(P.with_vars(X) for P in symbolic_g(self.N, [Polynomial.var(x) for x in X], -1))
        for P in inv_polys:
            if not _congruence_ok(P, X, q):
                raise QuotientInvalidError(f"inversion not defined mod p^e (p={p}, e={e})")
        for f in self.F.elements():
            for P in V.sigma[f]:
                if not _congruence_ok(P, X, q):
                    raise QuotientInvalidError(f"sigma_{f} not defined mod p^e (p={p}, e={e})")
        self._f = [_compiled(P, X + Y) for P in self.N.f]
        self._inv = [_compiled(P, X) for P in inv_polys]
        self._sigma = {f: [_compiled(P, X) for P in V.sigma[f]] for f in self.F.elements()}
        self._psi = {k: tuple(x % q for x in v) for k, v in V.psi.items()}
        self.identity = (0,) * h + (0,)
        self._check_homomorphism()

    # arithmetic on reduced coordinates
    def _nmul(self, a, b):
        args = tuple(a) + tuple(b)
        return tuple((fn(*args) // d) % self.q for fn, d in self._f)

    def _ninv(self, a):
        return tuple((fn(*a) // d) % self.q for fn, d in self._inv)

    def _sig(self, f, a):
        if f == 0:
            return tuple(a)
        return tuple((fn(*a) // d) % self.q for fn, d in self._sigma[f])

    def mul(self, x, y):
        a, f = x[:-1], x[-1]
        b, f2 = y[:-1], y[-1]
        c = self._nmul(self._nmul(a, self._sig(f, b)), self._psi[(f, f2)])
        return c + (self.F.mul(f, f2),)

    def inv(self, x):
        a, f = x[:-1], x[-1]
        fi = self.F.inv(f)
        t = self._nmul(self._sig(fi, a), self._psi[(fi, f)])
        return self._ninv(t) + (fi,)

    def power(self, x, n: int):
        out = self.identity
        for _ in range(n):
            out = self.mul(out, x)
        return out

    def conj(self, x, y):
        """y^-1 x y."""
        return self.mul(self.mul(self.inv(y), x), y)

    def comm(self, x, y):
        return self.mul(self.mul(self.inv(x), self.inv(y)), self.mul(x, y))

    def reduce(self, a, f: int = 0):
        return tuple(int(x) % self.q for x in a) + (f,)

    @property
    def order(self) -> int:
        return self.q ** self.h * self.F.order

    def n_elements(self):
        for a in itertools.product(range(self.q), repeat=self.h):
            yield a + (0,)

    def n_generators(self) -> list:
        return [tuple(1 if k == i else 0 for k in range(self.h)) + (0,) for i in range(self.h)]

    def g_generators(self) -> list:
        return self.n_generators() + [(0,) * self.h + (f,) for f in self.F.elements() if f]

    def _check_homomorphism(self, samples: int = 100, seed: int = 0):
        rng = random.Random(seed)
        h, V = self.h, self.V
        from .extension import ext_multiply

        for _ in range(samples):
            a = tuple(rng.randint(-5, 5) for _ in range(h))
            b = tuple(rng.randint(-5, 5) for _ in range(h))
            f = rng.randrange(self.F.order)
            f2 = rng.randrange(self.F.order)
            full, fp = ext_multiply(V, (a, f), (b, f2))
            if self.reduce(full, fp) != self.mul(self.reduce(a, f), self.reduce(b, f2)):
                raise QuotientInvalidError(
                    f"reduction is not a homomorphism (p={self.p}, e={self.e}) at {a}, {b}"
                )


def finite_quotient(source, p: int, e: int) -> FiniteQuotient:
    return FiniteQuotient(source, p, e)


# -- subgroups of the p-part ----------------------------------------------------------


@dataclass(frozen=True)
class Sub:
    elements: frozenset
    gens: tuple


def _extend(Q: FiniteQuotient, elements: set, gens: list) -> set:
    """Subgroup generated by a subgroup `elements` together with `gens`."""
    out = set(elements)
    frontier = list(out)
    while frontier:
        nxt = []
        for x in frontier:
            for g in gens:
                y = Q.mul(x, g)
                if y not in out:
                    out.add(y)
                    nxt.append(y)
        frontier = nxt
    return out


def generated(Q: FiniteQuotient, gens: Sequence) -> Sub:
    kept: list = []
    S = {Q.identity}
    for g in gens:
        if g not in S:
            kept.append(g)
            S = _extend(Q, S, kept)
    return Sub(frozenset(S), tuple(kept))


def frattini(Q: FiniteQuotient, M: Sub) -> Sub:
    """Phi(M) = M^p [M, M], as the normal closure in M of p-th powers and generator commutators."""
    cands = {Q.power(m, Q.p) for m in M.elements}
    for a, b in itertools.combinations(M.gens, 2):
        cands.add(Q.comm(a, b))
    S = {Q.identity}
    kept: list = []
    for c in sorted(cands):
        if c not in S:
            kept.append(c)
            S = _extend(Q, S, kept)
    changed = True
    while changed:
        changed = False
        for g in M.gens:
            for y in list(kept):
                z = Q.conj(y, g)
                if z not in S:
                    kept.append(z)
                    S = _extend(Q, S, kept)
                    changed = True
    return Sub(frozenset(S), tuple(kept))


def _functionals(p: int, d: int):
    """Nonzero vectors of F_p^d with first nonzero entry 1."""
    for lam in itertools.product(range(p), repeat=d):
        nz = [x for x in lam if x]
        if nz and nz[0] == 1:
            yield lam


def maximal_subgroups(Q: FiniteQuotient, M: Sub) -> list:
    if len(M.elements) == 1:
        return []
    p = Q.p
    Phi = frattini(Q, M)
    basis: list = []
    S = set(Phi.elements)
    for g in M.gens:
        if g not in S:
            basis.append(g)
            S = _extend(Q, S, list(Phi.gens) + basis)
    d = len(basis)

    def rep(c):
        out = Q.identity
        for b, k in zip(basis, c):
            out = Q.mul(out, Q.power(b, k))
        return out

    label = {}
    for c in itertools.product(range(p), repeat=d):
        r = rep(c)
        for phi in Phi.elements:
            label[Q.mul(r, phi)] = c
    if len(label) != len(M.elements):
        raise AssertionError("Frattini labelling is not a bijection")
    out = []
    for lam in _functionals(p, d):
        j = next(k for k, x in enumerate(lam) if x)
        kernel = []
        for i in range(d):
            if i == j:
                continue
            v = [0] * d
            v[i] = 1
            v[j] = (-lam[i]) % p
            kernel.append(tuple(v))
        elems = frozenset(m for m, c in label.items() if sum(a * b for a, b in zip(lam, c)) % p == 0)
        out.append(Sub(elems, tuple(Phi.gens) + tuple(rep(v) for v in kernel)))
    return out


def subgroup_layers(Q: FiniteQuotient, kmax: int) -> list:
    """layers[k] = subgroups of the p-part N_q of index p^k, deduplicated."""
    top = generated(Q, Q.n_generators())
    layers = [[top]]
    for _ in range(kmax):
        seen = {}
        for M in layers[-1]:
            for H in maximal_subgroups(Q, M):
                seen.setdefault(H.elements, H)
        layers.append([seen[k] for k in sorted(seen, key=lambda s: sorted(s))])
    return layers


def _left_coset_reps(Q: FiniteQuotient, B: Sub) -> list:
    covered = set()
    reps = []
    for x in Q.n_elements():
        if x in covered:
            continue
        reps.append(x)
        for b in B.elements:
            covered.add(Q.mul(x, b))
    return reps


def _normalized_by(Q, gens_inner, member, gens_outer) -> bool:
    return all(member(Q.conj(a, y)) for y in gens_outer for a in gens_inner)


def count_extensions_of(Q: FiniteQuotient, B: Sub, K: SubgroupOfF, variant: str) -> int:
    """Number of subgroups A with A cap N_q = B and image K (normal in G_q if variant is normal)."""
    Kn = sorted(f for f in K.members if f != 0)
    G_gens = Q.g_generators()
    h = Q.h
    if not Kn:
        if variant == "normal":
            return int(_normalized_by(Q, B.gens, B.elements.__contains__, G_gens))
        return 1
    reps = _left_coset_reps(Q, B)
    cands = {}
    for f in Kn:
        gf = (0,) * h + (f,)
        ok = []
        for r in reps:
            rf = Q.mul(r, gf)
            if _normalized_by(Q, B.gens, B.elements.__contains__, [rf]):
                ok.append(rf)
        cands[f] = ok
    count = 0
    for choice in itertools.product(*(cands[f] for f in Kn)):
        r = dict(zip(Kn, choice))
        r[0] = Q.identity
        good = True
        for f, f2 in itertools.product(Kn, repeat=2):
            ff = Q.F.mul(f, f2)
            if Q.mul(Q.inv(r[ff]), Q.mul(r[f], r[f2])) not in B.elements:
                good = False
                break
        if not good:
            continue
        if variant == "normal":
            def member(x, r=r):
                f = x[-1]
                return f in K.members and Q.mul(Q.inv(r[f]), x) in B.elements

            gens_A = list(B.gens) + [r[f] for f in Kn]
            if not _normalized_by(Q, gens_A, member, G_gens):
                continue
        count += 1
    return count


def quotient_counts(Q: FiniteQuotient, K: SubgroupOfF, variant: str, kmax: int) -> list:
    variant = normalize_variant(variant)
    layers = subgroup_layers(Q, kmax)
    return [sum(count_extensions_of(Q, B, K, variant) for B in layer) for layer in layers]


def _as_extension(source):
    return source if isinstance(source, VirtuallyTauGroup) else trivial_extension(source)


def oracle_counts(
    source,
    K: SubgroupOfF | None = None,
    variant: str = "subgroup",
    p: int = 2,
    kmax: int = 2,
    e: int | None = None,
    budget: int = DEFAULT_BUDGET,
    max_raise: int = 3,
) -> LocalSeries:
    """Counts at level e and e+1; `stable` records whether they agree.

    Every subgroup of index p^k in the pro-p completion contains all p^k-th
    powers, hence the level-k congruence kernel, so the default e = kmax is
    already exact whenever the quotient is well defined.
    """
    variant = normalize_variant(variant)
    V = _as_extension(source)
    if K is None:
        K = SubgroupOfF(frozenset([0]), V.F.order, True)
    if variant == "normal" and not K.normal:
        from .extension import UsageError

        raise UsageError(f"K = {sorted(K.members)} is not normal in F")
    level = max(1, kmax) if e is None else e
    for _ in range(max_raise + 1):
        size = p ** ((level + 1) * V.h) * V.F.order
        if size > budget:
            raise BudgetError(
                f"quotient of order {size} at level e+1={level + 1}, p={p} exceeds budget {budget}"
            )
        try:
            Q1 = FiniteQuotient(V, p, level)
            Q2 = FiniteQuotient(V, p, level + 1)
        except QuotientInvalidError:
            if e is not None:
                raise
            level += 1
            continue
        c1 = quotient_counts(Q1, K, variant, kmax)
        c2 = quotient_counts(Q2, K, variant, kmax)
        return LocalSeries(p, kmax, c1, "oracle", V.name, variant, tuple(sorted(K.members)),
                           [], c1 == c2)
    raise QuotientInvalidError(f"no valid level found up to e={level} at p={p}")


# -- lattices -------------------------------------------------------------------------


def hnf_counts(h: int, n: int) -> int:
    """Sublattices of Z^h of index n, by listing upper triangular Hermite normal forms."""
    if h < 1 or n < 1:
        raise ValueError("h and n must be positive")

    def diagonals(k, m):
        if k == 1:
            yield (m,)
            return
        for d in range(1, m + 1):
            if m % d == 0:
                for rest in diagonals(k - 1, m // d):
                    yield (d,) + rest

    total = 0
    for diag in diagonals(h, n):
        # entry (i, j), i < j, reduced mod the diagonal entry of column j
        ranges = [range(diag[j]) for j in range(h) for _ in range(j)]
        for _ in itertools.product(*ranges):
            total += 1
    return total


# -- p-adic membership -------------------------------------------------------------------


def _vp_frac(x: Fraction, p: int) -> int | None:
    if x == 0:
        return None
    v = 0
    n, d = x.numerator, x.denominator
    while n % p == 0:
        n //= p
        v += 1
    while d % p == 0:
        d //= p
        v -= 1
    return v


@functools.lru_cache(maxsize=64)
def _exact_ops(N: MalcevPresentation):
    """Compiled f and g for exact rational arguments."""
    X, Y = xvars(N.h), yvars(N.h)
    fs = [_compiled(P, X + Y) for P in N.f]
    gs = [_compiled(P, X + ("W",)) for P in N.g]

    def mul(a, b):
        args = tuple(a) + tuple(b)
        return [Fraction(fn(*args), d) if d != 1 else Fraction(fn(*args)) for fn, d in fs]

    def power(a, w):
        args = tuple(a) + (w,)
        return [Fraction(fn(*args)) / d for fn, d in gs]

    return mul, power


def membership_oracle(N: MalcevPresentation, t, z, p: int, precision: int = 4096) -> bool:
    """Is x^z in the closed subgroup of N_p topologically generated by the rows of t?

    Greedy solve: w_i = z_i / t_ii must be p-integral, then strip (x^{t_i})^{w_i}
    off the left.  Arithmetic is exact over Q; `precision` bounds the bit length
    of the numbers involved.
    """
    h = N.h
    mul, power = _exact_ops(N)
    cur = [Fraction(x) for x in z]
    for i in range(h):
        if t[i][i] == 0:
            raise ValueError("t must have nonzero diagonal")
        w = cur[i] / t[i][i]
        v = _vp_frac(w, p)
        if v is not None and v < 0:
            return False
        if w == 0:
            continue
        row = tuple(0 if k < i else Fraction(t[i][k]) for k in range(h))
        step = power(power(row, w), -1)
        cur = mul(step, cur)
        if any(cur[k] for k in range(i + 1)):
            raise IndeterminateError(f"greedy step {i + 1} failed to clear coordinate")
        for x in cur:
            if max(x.numerator.bit_length(), x.denominator.bit_length()) > precision:
                raise IndeterminateError("precision exhausted")
            vx = _vp_frac(x, p)
            if vx is not None and vx < 0:
                raise IndeterminateError(f"non-integral coordinate {x} at p={p}")
    return True


def is_good_basis(N: MalcevPresentation, t, p: int) -> bool:
    """Commutator criterion: c(t_i, t_j) in closure<t_{j+1}, ..., t_h> for all i < j."""
    h = N.h
    if any(t[i][i] == 0 for i in range(h)):
        return False
    if any(t[i][k] for i in range(h) for k in range(i)):
        return False
    for j in range(h - 1, -1, -1):
        for i in range(j):
            c = mal_commutator(N, tuple(t[i]), tuple(t[j]))
            if any(c[k] for k in range(j + 1)):
                raise ValueError("commutator has nonzero leading coordinates")
            if j == h - 1:
                if any(c):
                    return False
                continue
            sub = N.suffix(j + 2)
            tt = [row[j + 1:] for row in t[j + 1:]]
            if not membership_oracle(sub, tt, c[j + 1:], p):
                return False
    return True


def random_good_basis(N: MalcevPresentation, p: int, rng: random.Random, max_val: int = 1,
                      tries: int = 1000):
    """A random good basis with diagonal valuations in [0, max_val]."""
    h = N.h
    for _ in range(tries):
        m = [rng.randint(0, max_val) for _ in range(h)]
        t = [[0] * h for _ in range(h)]
        for i in range(h):
            unit = rng.choice([u for u in range(1, 2 * p) if u % p])
            t[i][i] = unit * p ** m[i]
            for k in range(i + 1, h):
                t[i][k] = rng.randint(-p ** (max_val + 1), p ** (max_val + 1))
        if is_good_basis(N, t, p):
            return t
    raise RuntimeError("no good basis found")


def _valuation_int(x: int, p: int) -> int:
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v


def _count_depth(ms) -> int:
    """B has index p^sum(ms), so it contains the level-sum(ms) kernel."""
    return max(sum(ms), max(ms) + 1, 1)


def counted_index(N: MalcevPresentation, t, p: int) -> int:
    """[N_p : B] by counting residues mod p^M lying in B."""
    h = N.h
    M = _count_depth([_valuation_int(t[i][i], p) for i in range(h)])
    q = p ** M
    inside = sum(1 for z in itertools.product(range(q), repeat=h) if membership_oracle(N, t, z, p))
    return q ** h // inside


def counted_basis_measure(N: MalcevPresentation, t, p: int) -> Fraction:
    """Haar measure of the set of good bases of B = closure<t>, counted row by row.

    Row i ranges over x^{(0,..,0,y)} in B with v_p(y_1) = v_p(t_ii).
    """
    h = N.h
    ms = [_valuation_int(t[i][i], p) for i in range(h)]
    M = _count_depth(ms)
    q = p ** M
    total = Fraction(1)
    for i in range(h):
        width = h - i
        count = 0
        for y in itertools.product(range(q), repeat=width):
            if y[0] == 0 or _valuation_int(y[0], p) != ms[i]:
                continue
            z = (0,) * i + y
            if membership_oracle(N, t, z, p):
                count += 1
        total *= Fraction(count, q ** width)
    return total


def coset_measure(N: MalcevPresentation, t, x, p: int) -> Fraction:
    """Measure of {a : x^a in x^x B}, counted mod p^M."""
    h = N.h
    M = _count_depth([_valuation_int(t[i][i], p) for i in range(h)])
    q = p ** M
    xi = mal_inverse(N, tuple(x))
    count = sum(
        1
        for a in itertools.product(range(q), repeat=h)
        if membership_oracle(N, t, mal_multiply(N, xi, a), p)
    )
    return Fraction(count, q ** h)
