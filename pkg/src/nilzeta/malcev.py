"""Arithmetic in tau-groups through Mal'cev coordinates.

An element of a tau-group with Mal'cev basis x_1..x_h is stored as its
coordinate vector a, standing for x_1^{a_1} ... x_h^{a_h}.  Multiplication,
powers and commutators are the polynomial maps f, g and c.

Heisenberg convention: x3 = [x1, x2] = x1^-1 x2^-1 x1 x2, which matches the
upper unitriangular model x1 -> I+E12, x2 -> I+E23, x3 -> I+E13.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .polyring import (
    Polynomial,
    StructureError,
    denominator_primes,
    poly_compose,
    poly_eval,
    poly_from_records,
    poly_to_records,
)


class IntegralityError(ArithmeticError):
    """A group operation on integer coordinates produced a non-integer."""


class PresentationError(ValueError):
    """A presentation failed verification or could not be parsed."""


def xvars(h: int) -> tuple:
    return tuple(f"X{i}" for i in range(1, h + 1))


def yvars(h: int) -> tuple:
    return tuple(f"Y{i}" for i in range(1, h + 1))


@dataclass(frozen=True, eq=False)
class MalcevPresentation:
    h: int
    f: tuple
    g: tuple
    c: tuple
    nclass: int = 1
    bad_primes: frozenset = frozenset()
    name: str = "anonymous"

    def __post_init__(self):
        h = self.h
        if h < 1:
            raise PresentationError("Hirsch length must be positive")
        if not (len(self.f) == len(self.g) == len(self.c) == h):
            raise PresentationError("f, g, c must each have h entries")
        fx = xvars(h) + yvars(h)
        gx = xvars(h) + ("W",)
        object.__setattr__(self, "f", tuple(P.with_vars(fx) for P in self.f))
        object.__setattr__(self, "g", tuple(P.with_vars(gx) for P in self.g))
        object.__setattr__(self, "c", tuple(P.with_vars(fx) for P in self.c))
        object.__setattr__(self, "bad_primes", frozenset(self.bad_primes))

    @property
    def denominator_primes(self) -> frozenset:
        return denominator_primes(self.f + self.g + self.c)

    def identity(self) -> tuple:
        return (0,) * self.h

    def suffix(self, j: int) -> "MalcevPresentation":
        """Presentation of N_j = <x_j, ..., x_h> on coordinates j..h (1-based)."""
        if not 1 <= j <= self.h:
            raise ValueError(f"suffix index {j} out of range")
        if j == 1:
            return self
        h2 = self.h - j + 1
        X, Y = xvars(self.h), yvars(self.h)
        X2, Y2 = xvars(h2), yvars(h2)
        zero = Polynomial.zero()
        fsub = {}
        for i in range(self.h):
            if i < j - 1:
                fsub[X[i]] = zero
                fsub[Y[i]] = zero
            else:
                fsub[X[i]] = Polynomial.var(X2[i - j + 1])
                fsub[Y[i]] = Polynomial.var(Y2[i - j + 1])
        fx2 = X2 + Y2
        gx2 = X2 + ("W",)
        f = tuple(P.subs(fsub).with_vars(fx2) for P in self.f[j - 1:])
        g = tuple(P.subs(fsub).with_vars(gx2) for P in self.g[j - 1:])
        c = tuple(P.subs(fsub).with_vars(fx2) for P in self.c[j - 1:])
        return MalcevPresentation(
            h2, f, g, c, self.nclass, self.bad_primes, f"{self.name}[{j}:]"
        )


# -- numeric operations ----------------------------------------------------


def _check_arity(N: MalcevPresentation, *vecs):
    for v in vecs:
        if len(v) != N.h:
            raise StructureError(f"element of arity {len(v)} in group of Hirsch length {N.h}")


def _finish(values: Sequence[Fraction], inputs_integral: bool):
    if not inputs_integral:
        return tuple(values)
    out = []
    for v in values:
        if v.denominator != 1:
            raise IntegralityError(f"non-integral coordinate {v}")
        out.append(v.numerator)
    return tuple(out)


def _integral(*vecs) -> bool:
    return all(isinstance(x, int) or (isinstance(x, Fraction) and x.denominator == 1)
               for v in vecs for x in v)


def mal_multiply(N: MalcevPresentation, a, b) -> tuple:
    """Coordinates of x^a x^b.

    Integer inputs must give integer outputs (IntegralityError otherwise);
    rational inputs are evaluated exactly and returned as Fractions.
    """
    _check_arity(N, a, b)
    point = tuple(a) + tuple(b)
    return _finish([poly_eval(P, point) for P in N.f], _integral(a, b))


def mal_power(N: MalcevPresentation, a, w):
    """Coordinates of (x^a)^w.

    For a symbolic exponent (a Polynomial) the h-tuple g(a, w) of polynomials
    is returned; `a` may then also contain polynomials.
    """
    _check_arity(N, a)
    if isinstance(w, Polynomial) or any(isinstance(x, Polynomial) for x in a):
        return symbolic_g(N, a, w)
    point = tuple(a) + (w,)
    integral = _integral(a) and (isinstance(w, int) or Fraction(w).denominator == 1)
    return _finish([poly_eval(P, point) for P in N.g], integral)


def mal_inverse(N: MalcevPresentation, a) -> tuple:
    return mal_power(N, a, -1)


def mal_commutator(N: MalcevPresentation, a, b) -> tuple:
    """Coordinates of [x^a, x^b] = (x^a)^-1 (x^b)^-1 x^a x^b via the c polynomials."""
    _check_arity(N, a, b)
    point = tuple(a) + tuple(b)
    return _finish([poly_eval(P, point) for P in N.c], _integral(a, b))


def commutator_by_products(N: MalcevPresentation, a, b) -> tuple:
    ai, bi = mal_inverse(N, a), mal_inverse(N, b)
    return mal_multiply(N, mal_multiply(N, mal_multiply(N, ai, bi), a), b)


def mal_product(N: MalcevPresentation, *elements) -> tuple:
    out = N.identity()
    for e in elements:
        out = mal_multiply(N, out, e)
    return out


# -- symbolic operations ---------------------------------------------------


def _as_poly(x) -> Polynomial:
    return x if isinstance(x, Polynomial) else Polynomial.const(x)


def symbolic_f(N: MalcevPresentation, A, B) -> tuple:
    subst = [_as_poly(x) for x in tuple(A) + tuple(B)]
    return tuple(poly_compose(P, subst) for P in N.f)


def symbolic_g(N: MalcevPresentation, A, w) -> tuple:
    subst = [_as_poly(x) for x in tuple(A)] + [_as_poly(w)]
    return tuple(poly_compose(P, subst) for P in N.g)


def symbolic_c(N: MalcevPresentation, A, B) -> tuple:
    subst = [_as_poly(x) for x in tuple(A) + tuple(B)]
    return tuple(poly_compose(P, subst) for P in N.c)


def symbolic_product(N: MalcevPresentation, *elements) -> tuple:
    """Left-folded product x^{e1} x^{e2} ... as an h-tuple of polynomials."""
    out = tuple(_as_poly(x) for x in elements[0])
    for e in elements[1:]:
        out = symbolic_f(N, out, e)
    return out


def derive_commutator(f: Sequence[Polynomial], g: Sequence[Polynomial], h: int) -> tuple:
    """c(X, Y) = f(f(f(g(X,-1), g(Y,-1)), X), Y) computed symbolically."""
    X = [Polynomial.var(v) for v in xvars(h)]
    Y = [Polynomial.var(v) for v in yvars(h)]
    tmp = MalcevPresentation(h, tuple(f), tuple(g), tuple(f), 1)
    xi = symbolic_g(tmp, X, -1)
    yi = symbolic_g(tmp, Y, -1)
    out = symbolic_product(tmp, xi, yi, X, Y)
    return tuple(P.with_vars(xvars(h) + yvars(h)) for P in out)


# -- verification --------------------------------------------------------------


@dataclass
class VerificationReport:
    subject: str
    checks: dict = field(default_factory=dict)
    counterexamples: dict = field(default_factory=dict)

    def record(self, law: str, ok: bool, witness=None):
        prev = self.checks.get(law, True)
        self.checks[law] = prev and ok
        if not ok and law not in self.counterexamples:
            self.counterexamples[law] = witness

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def failed(self) -> list:
        return [k for k, v in self.checks.items() if not v]

    def lines(self) -> list[str]:
        out = []
        for law, ok in self.checks.items():
            line = f"{'PASS' if ok else 'FAIL'}  {law}"
            if not ok:
                line += f"  (witness: {self.counterexamples.get(law)})"
            out.append(line)
        return out


def _rand_vec(rng: random.Random, h: int, bound: int) -> tuple:
    return tuple(rng.randint(-bound, bound) for _ in range(h))


def verify_presentation(
    N: MalcevPresentation, sample_bound: int = 10, samples: int = 200, seed: int = 0
) -> VerificationReport:
    """Check the group laws and Mal'cev-polynomial identities on random samples."""
    rng = random.Random(seed)
    rep = VerificationReport(N.name)
    h = N.h
    X, Y = xvars(h), yvars(h)
    rep.record("f1 = X1 + Y1", N.f[0] == Polynomial.var(X[0]) + Polynomial.var(Y[0]))
    zero = N.identity()

    def attempt(law, fn, witness):
        try:
            rep.record(law, bool(fn()), witness)
        except IntegralityError:
            rep.record("integrality", False, witness)
            rep.record(law, False, witness)

    for _ in range(samples):
        a = _rand_vec(rng, h, sample_bound)
        b = _rand_vec(rng, h, sample_bound)
        c = _rand_vec(rng, h, sample_bound)
        w1 = rng.randint(-sample_bound, sample_bound)
        w2 = rng.randint(-sample_bound, sample_bound)
        rep.record("integrality", True)
        attempt(
            "associativity",
            lambda: mal_multiply(N, mal_multiply(N, a, b), c)
            == mal_multiply(N, a, mal_multiply(N, b, c)),
            (a, b, c),
        )
        attempt(
            "identity",
            lambda: mal_multiply(N, a, zero) == a and mal_multiply(N, zero, a) == a,
            a,
        )
        attempt("inverse", lambda: mal_multiply(N, a, mal_power(N, a, -1)) == zero, a)
        attempt(
            "power additivity",
            lambda: mal_power(N, a, w1 + w2)
            == mal_multiply(N, mal_power(N, a, w1), mal_power(N, a, w2)),
            (a, w1, w2),
        )
        attempt(
            "commutator consistency",
            lambda: mal_commutator(N, a, b) == commutator_by_products(N, a, b),
            (a, b),
        )
        i = rng.randint(1, h)
        j = rng.randint(1, h)
        ai = tuple(0 if k < i - 1 else a[k] for k in range(h))
        bj = tuple(0 if k < j - 1 else b[k] for k in range(h))
        bi = tuple(0 if k < i - 1 else b[k] for k in range(h))
        attempt(
            "c_k vanishes for k <= max(i,j)",
            lambda: all(x == 0 for x in mal_commutator(N, ai, bj)[: max(i, j)]),
            (ai, bj),
        )
        attempt(
            "f_i(a^i, b^i) = a_i + b_i",
            lambda: mal_multiply(N, ai, bi)[i - 1] == ai[i - 1] + bi[i - 1],
            (ai, bi),
        )
        attempt(
            "g_i(a^i, w) = a_i * w",
            lambda: mal_power(N, ai, w1)[i - 1] == ai[i - 1] * w1,
            (ai, w1),
        )
    return rep


# -- catalog ---------------------------------------------------------------------


def abelian(h: int) -> MalcevPresentation:
    X = [Polynomial.var(v) for v in xvars(h)]
    Y = [Polynomial.var(v) for v in yvars(h)]
    W = Polynomial.var("W")
    f = tuple(x + y for x, y in zip(X, Y))
    g = tuple(W * x for x in X)
    c = tuple(Polynomial.zero() for _ in range(h))
    return MalcevPresentation(h, f, g, c, 1, name=f"abelian:{h}")


def heisenberg() -> MalcevPresentation:
    X1, X2, X3 = (Polynomial.var(v) for v in xvars(3))
    Y1, Y2, Y3 = (Polynomial.var(v) for v in yvars(3))
    W = Polynomial.var("W")
    f = (X1 + Y1, X2 + Y2, X3 + Y3 - X2 * Y1)
    g = (W * X1, W * X2, W * X3 - (W * W - W) / 2 * X1 * X2)
    c = (Polynomial.zero(), Polynomial.zero(), X1 * Y2 - X2 * Y1)
    return MalcevPresentation(3, f, g, c, 2, name="heisenberg")


def _shift_vars(P: Polynomial, h_old: int, offset: int, h_new: int, with_w: bool) -> Polynomial:
    mapping = {}
    for i in range(1, h_old + 1):
        mapping[f"X{i}"] = Polynomial.var(f"X{i + offset}")
        mapping[f"Y{i}"] = Polynomial.var(f"Y{i + offset}")
    out = P.subs(mapping)
    target = xvars(h_new) + (("W",) if with_w else yvars(h_new))
    return out.with_vars(target)


def direct_product(N1: MalcevPresentation, N2: MalcevPresentation) -> MalcevPresentation:
    h = N1.h + N2.h
    f = tuple(_shift_vars(P, N1.h, 0, h, False) for P in N1.f) + tuple(
        _shift_vars(P, N2.h, N1.h, h, False) for P in N2.f
    )
    g = tuple(_shift_vars(P, N1.h, 0, h, True) for P in N1.g) + tuple(
        _shift_vars(P, N2.h, N1.h, h, True) for P in N2.g
    )
    c = tuple(_shift_vars(P, N1.h, 0, h, False) for P in N1.c) + tuple(
        _shift_vars(P, N2.h, N1.h, h, False) for P in N2.c
    )
    return MalcevPresentation(
        h, f, g, c, max(N1.nclass, N2.nclass), N1.bad_primes | N2.bad_primes,
        f"product({N1.name},{N2.name})",
    )


def scaled(N: MalcevPresentation, scales: Sequence[int]) -> MalcevPresentation:
    """Presentation of the subgroup with Mal'cev basis x_i^{s_i} (when it is one)."""
    if len(scales) != N.h or any(s == 0 for s in scales):
        raise PresentationError("need one nonzero scale per basis element")
    h = N.h
    sub = {}
    for i, s in enumerate(scales):
        sub[f"X{i + 1}"] = Polynomial.var(f"X{i + 1}") * s
        sub[f"Y{i + 1}"] = Polynomial.var(f"Y{i + 1}") * s
    fx = xvars(h) + yvars(h)
    gx = xvars(h) + ("W",)
    f = tuple((P.subs(sub) / s).with_vars(fx) for P, s in zip(N.f, scales))
    g = tuple((P.subs(sub) / s).with_vars(gx) for P, s in zip(N.g, scales))
    c = tuple((P.subs(sub) / s).with_vars(fx) for P, s in zip(N.c, scales))
    label = ",".join(str(s) for s in scales)
    return MalcevPresentation(h, f, g, c, N.nclass, N.bad_primes, f"scaled({N.name};{label})")


def _split_top(s: str, sep: str) -> list[str]:
    parts, depth, cur = [], 0, ""
    for ch in s:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append(cur)
            cur = ""
        else:
            cur += ch
    parts.append(cur)
    return [p.strip() for p in parts]


CATALOG_HELP = {
    "abelian:H": "free abelian group Z^H",
    "heisenberg": "integral Heisenberg group, x3 = [x1, x2]",
    "product(A,B)": "direct product of two catalog groups",
    "scaled(A;s1,...,sh)": "subgroup with Mal'cev basis x_i^{s_i}",
}


def catalog_make(desc: str, verify: bool = True) -> MalcevPresentation:
    """Build a catalog presentation from its name, e.g. ``abelian:3``."""
    desc = desc.strip()
    m = re.fullmatch(r"abelian:(\d+)", desc)
    if m:
        N = abelian(int(m.group(1)))
    elif desc == "heisenberg":
        N = heisenberg()
    elif desc.startswith("product(") and desc.endswith(")"):
        args = _split_top(desc[len("product("):-1], ",")
        if len(args) < 2:
            raise PresentationError(f"product needs two factors: {desc}")
        N = catalog_make(args[0], verify=False)
        for a in args[1:]:
            N = direct_product(N, catalog_make(a, verify=False))
    elif desc.startswith("scaled(") and desc.endswith(")"):
        args = _split_top(desc[len("scaled("):-1], ";")
        if len(args) != 2:
            raise PresentationError(f"scaled needs group;scales: {desc}")
        base = catalog_make(args[0], verify=False)
        N = scaled(base, [int(s) for s in args[1].split(",")])
    else:
        raise PresentationError(f"unknown catalog group {desc!r}")
    if verify:
        rep = verify_presentation(N, sample_bound=6, samples=60)
        if not rep.ok:
            raise PresentationError(f"{desc} fails: {', '.join(rep.failed())}")
    return N


# -- JSON ------------------------------------------------------------------------


def presentation_to_json(N: MalcevPresentation) -> dict:
    h = N.h
    fx = xvars(h) + yvars(h)
    gx = xvars(h) + ("W",)
    return {
        "schema": 1,
        "kind": "malcev",
        "name": N.name,
        "h": h,
        "class": N.nclass,
        "bad_primes": sorted(N.bad_primes),
        "f": [poly_to_records(P, fx) for P in N.f],
        "g": [poly_to_records(P, gx) for P in N.g],
        "c": [poly_to_records(P, fx) for P in N.c],
    }


def presentation_from_json(data: dict, verify: bool = True) -> MalcevPresentation:
    try:
        h = int(data["h"])
        fx = xvars(h) + yvars(h)
        gx = xvars(h) + ("W",)
        f = tuple(poly_from_records(r, fx) for r in data["f"])
        g = tuple(poly_from_records(r, gx) for r in data["g"])
        if "c" in data:
            c = tuple(poly_from_records(r, fx) for r in data["c"])
        else:
            c = derive_commutator(f, g, h)
        N = MalcevPresentation(
            h, f, g, c, int(data.get("class", 1)),
            frozenset(data.get("bad_primes", ())), data.get("name", "json"),
        )
    except (KeyError, TypeError, StructureError) as exc:
        raise PresentationError(f"malformed presentation: {exc}") from exc
    if verify:
        rep = verify_presentation(N, sample_bound=6, samples=60)
        if not rep.ok:
            raise PresentationError(f"presentation fails: {', '.join(rep.failed())}")
    return N


def load_presentation(path: str | Path, verify: bool = True) -> MalcevPresentation:
    return presentation_from_json(json.loads(Path(path).read_text(encoding="utf-8")), verify)
