"""Exact sparse multivariate polynomials over Q.

A :class:`Polynomial` is an immutable map from exponent vectors to nonzero
:class:`fractions.Fraction` coefficients over a named, ordered variable list.
Binary operations between polynomials on different variable lists embed both
operands into the union of the lists (left operand's order first).
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

Scalar = Union[int, Fraction]


class StructureError(ValueError):
    """Arity or variable mismatch between polynomial data."""


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"not an exact scalar: {x!r}")


class Polynomial:
    __slots__ = ("vars", "terms", "_hash")

    def __init__(self, variables: Sequence[str], terms: Mapping[tuple, Scalar] = ()):
        variables = tuple(variables)
        if len(set(variables)) != len(variables):
            raise StructureError(f"repeated variable in {variables}")
        n = len(variables)
        clean = {}
        for exps, c in dict(terms).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != n:
                raise StructureError(f"exponent vector {exps} has arity != {n}")
            if any(e < 0 for e in exps):
                raise StructureError(f"negative exponent in {exps}")
            c = _frac(c)
            if c:
                clean[exps] = clean.get(exps, 0) + c
                if not clean[exps]:
                    del clean[exps]
        object.__setattr__(self, "vars", variables)
        object.__setattr__(self, "terms", clean)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    # -- constructors -----------------------------------------------------

    @classmethod
    def const(cls, c: Scalar, variables: Sequence[str] = ()) -> "Polynomial":
        return cls(variables, {(0,) * len(variables): c})

    @classmethod
    def var(cls, name: str, variables: Sequence[str] | None = None) -> "Polynomial":
        variables = tuple(variables) if variables is not None else (name,)
        if name not in variables:
            raise StructureError(f"{name} not among {variables}")
        exps = tuple(1 if v == name else 0 for v in variables)
        return cls(variables, {exps: 1})

    @classmethod
    def zero(cls, variables: Sequence[str] = ()) -> "Polynomial":
        return cls(variables, {})

    # -- basic queries ----------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(not any(e) for e in self.terms)

    def constant_value(self) -> Fraction:
        return self.terms.get((0,) * len(self.vars), Fraction(0))

    def used_vars(self) -> tuple:
        used = set()
        for exps in self.terms:
            for v, e in zip(self.vars, exps):
                if e:
                    used.add(v)
        return tuple(v for v in self.vars if v in used)

    def degree_in(self, name: str) -> int:
        if name not in self.vars:
            return 0
        k = self.vars.index(name)
        return max((e[k] for e in self.terms), default=0)

    def is_monomial(self) -> bool:
        return len(self.terms) == 1

    def monomial_content(self) -> dict:
        """Largest monomial dividing every term, as {var: exponent}."""
        if not self.terms:
            return {}
        mins = [min(e[k] for e in self.terms) for k in range(len(self.vars))]
        return {v: m for v, m in zip(self.vars, mins) if m}

    # -- variable management ----------------------------------------------

    def with_vars(self, variables: Sequence[str]) -> "Polynomial":
        """Re-express over `variables`, which must contain every used variable."""
        variables = tuple(variables)
        if variables == self.vars:
            return self
        pos = {v: i for i, v in enumerate(variables)}
        for v in self.used_vars():
            if v not in pos:
                raise StructureError(f"variable {v} missing from {variables}")
        n = len(variables)
        out = {}
        for exps, c in self.terms.items():
            new = [0] * n
            for v, e in zip(self.vars, exps):
                if e:
                    new[pos[v]] = e
            out[tuple(new)] = c
        return Polynomial(variables, out)

    def trimmed(self) -> "Polynomial":
        return self.with_vars(self.used_vars())

    def _unify(self, other: "Polynomial"):
        if self.vars == other.vars:
            return self, other
        merged = self.vars + tuple(v for v in other.vars if v not in self.vars)
        return self.with_vars(merged), other.with_vars(merged)

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            return other
        return Polynomial.const(_frac(other), self.vars)

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        a, b = self._unify(self._coerce(other))
        out = dict(a.terms)
        for e, c in b.terms.items():
            out[e] = out.get(e, 0) + c
        return Polynomial(a.vars, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.vars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            c = _frac(other)
            return Polynomial(self.vars, {e: c * v for e, v in self.terms.items()})
        a, b = self._unify(other)
        out: dict = {}
        for e1, c1 in a.terms.items():
            for e2, c2 in b.terms.items():
                e = tuple(x + y for x, y in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return Polynomial(a.vars, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        c = _frac(other)
        if not c:
            raise ZeroDivisionError("polynomial division by zero")
        return self * (1 / c)

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("only non-negative integer powers")
        result = Polynomial.const(1, self.vars)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    # -- comparison / hashing ---------------------------------------------

    def canonical_key(self) -> tuple:
        """Variable-order independent identity of the polynomial."""
        items = []
        for exps, c in self.terms.items():
            mono = tuple(sorted((v, e) for v, e in zip(self.vars, exps) if e))
            items.append((mono, c.numerator, c.denominator))
        return tuple(sorted(items))

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Polynomial.const(other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.canonical_key() == other.canonical_key()

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash(self.canonical_key())
            object.__setattr__(self, "_hash", h)
        return h

    def __repr__(self):
        return f"Polynomial({self})"

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for exps in sorted(self.terms, reverse=True):
            c = self.terms[exps]
            mono = "*".join(
                v if e == 1 else f"{v}^{e}" for v, e in zip(self.vars, exps) if e
            )
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append("-" + mono)
            else:
                parts.append(f"{c}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")

    # -- evaluation / substitution ----------------------------------------

    def __call__(self, *point):
        return poly_eval(self, point)

    def subs(self, mapping: Mapping[str, Union["Polynomial", Scalar]]) -> "Polynomial":
        """Substitute polynomials (or scalars) for some variables by name."""
        mapping = {k: v for k, v in mapping.items() if k in self.vars}
        if not mapping:
            return self
        keep = tuple(v for v in self.vars if v not in mapping)
        subst = []
        for v in self.vars:
            if v in mapping:
                s = mapping[v]
                subst.append(s if isinstance(s, Polynomial) else Polynomial.const(s))
            else:
                subst.append(Polynomial.var(v, keep))
        return _compose(self, subst)


def poly_eval(P: Polynomial, point: Sequence) -> Fraction:
    """Exact value of `P` at `point` (one coordinate per variable of `P`)."""
    if len(point) != len(P.vars):
        raise StructureError(f"point arity {len(point)} != {len(P.vars)} variables")
    total = Fraction(0)
    for exps, c in P.terms.items():
        term = c
        for x, e in zip(point, exps):
            if e:
                term *= x**e
        total += term
    return total


def poly_eval_int(P: Polynomial, point: Sequence[int]) -> int:
    """Value at an integer point; the result must be an integer."""
    v = poly_eval(P, point)
    if v.denominator != 1:
        raise ValueError(f"non-integral value {v} of {P} at {tuple(point)}")
    return v.numerator


def _compose(P: Polynomial, subst: Sequence[Polynomial]) -> Polynomial:
    if not subst:
        return Polynomial.const(P.constant_value())
    ambient: tuple = ()
    for s in subst:
        ambient = ambient + tuple(v for v in s.vars if v not in ambient)
    subst = [s.with_vars(ambient) for s in subst]
    cache: dict = {}

    def power(k: int, e: int) -> Polynomial:
        key = (k, e)
        if key not in cache:
            cache[key] = subst[k] if e == 1 else power(k, e - 1) * subst[k]
        return cache[key]

    result = Polynomial.zero(ambient)
    for exps, c in P.terms.items():
        term = Polynomial.const(c, ambient)
        for k, e in enumerate(exps):
            if e:
                term = term * power(k, e)
        result = result + term
    return result


def poly_compose(P: Polynomial, subst: Sequence[Polynomial]) -> Polynomial:
    """Replace the i-th variable of `P` by `subst[i]`.

    The substituted polynomials are embedded in a common ambient variable list
    (the ordered union of their variable lists).
    """
    if len(subst) != len(P.vars):
        raise StructureError(f"{len(subst)} substitutes for {len(P.vars)} variables")
    subst = [s if isinstance(s, Polynomial) else Polynomial.const(s) for s in subst]
    return _compose(P, subst)


def clear_denominators(P: Polynomial) -> tuple[Polynomial, int]:
    """Return ``(d*P, d)`` with d the lcm of the coefficient denominators."""
    d = 1
    for c in P.terms.values():
        d = d * c.denominator // math.gcd(d, c.denominator)
    return P * d, d


def denominator_primes(polys: Iterable[Polynomial]) -> frozenset:
    primes = set()
    for P in polys:
        for c in P.terms.values():
            primes.update(prime_factors(c.denominator))
    return frozenset(primes)


def prime_factors(n: int) -> list[int]:
    n = abs(n)
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


def is_prime(n: int) -> bool:
    return n >= 2 and prime_factors(n) == [n]


def vp(x, p: int) -> float:
    """p-adic valuation of an integer or Fraction (inf for zero)."""
    x = _frac(x)
    if x == 0:
        return math.inf
    v = 0
    n, d = x.numerator, x.denominator
    while n % p == 0:
        n //= p
        v += 1
    while d % p == 0:
        d //= p
        v -= 1
    return v


# -- JSON serialization ---------------------------------------------------


def format_fraction(c: Fraction) -> str:
    return f"{c.numerator}/{c.denominator}"


def poly_to_records(P: Polynomial, variables: Sequence[str]) -> list[dict]:
    Q = P.with_vars(variables)
    return [
        {"exponents": list(e), "coeff": format_fraction(Q.terms[e])}
        for e in sorted(Q.terms)
    ]


def poly_from_records(records: Iterable[Mapping], variables: Sequence[str]) -> Polynomial:
    terms: dict = {}
    for rec in records:
        e = tuple(rec["exponents"])
        terms[e] = terms.get(e, 0) + Fraction(str(rec["coeff"]))
    return Polynomial(variables, terms)


# -- compiled evaluation ----------------------------------------------------


def compile_int(P: Polynomial, variables: Sequence[str] | None = None):
    """Compile an integer-coefficient polynomial to a fast integer function.

    The returned callable takes one positional argument per variable.  Rational
    coefficients are rejected; use :func:`clear_denominators` first.
    """
    variables = tuple(variables) if variables is not None else P.vars
    Q = P.with_vars(variables)
    args = [f"a{i}" for i in range(len(variables))]
    parts = []
    for exps, c in Q.terms.items():
        if c.denominator != 1:
            raise ValueError("compile_int needs integer coefficients")
        factors = [str(c.numerator)]
        for a, e in zip(args, exps):
            if e == 1:
                factors.append(a)
            elif e > 1:
                factors.append(f"{a}**{e}")
        parts.append("*".join(factors))
    body = " + ".join(parts) if parts else "0"
    src = f"lambda {', '.join(args)}: {body}"
    return eval(src, {"__builtins__": {}})  # noqa: S307 - generated from integer terms only
