"""Finite groups, cocycle data for virtually-tau groups, and structure words.

A virtually-tau group 1 -> N -> G -> F -> 1 is stored as (N, F, sigma, psi):
elements of G are pairs (a, f) with a a Mal'cev coordinate vector of N, and

    (a, f) * (b, f') = (a . sigma_f(b) . psi(f, f'), f f').

The transversal used throughout is g_f = (0, f), so g_1 = 1.  We do not ask
for g_{f^-1} = g_f^-1; `StructureWords.convention_failures` lists the f
where that would have failed.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .malcev import (
    MalcevPresentation,
    PresentationError,
    VerificationReport,
    abelian,
    catalog_make,
    heisenberg,
    mal_multiply,
    mal_inverse,
    presentation_from_json,
    presentation_to_json,
    symbolic_f,
    symbolic_g,
    xvars,
)
from .polyring import Polynomial, poly_eval, poly_from_records, poly_to_records


class UsageError(ValueError):
    """Bad user input (unknown names, wrong variants, malformed files)."""


class CocycleError(ValueError):
    """Cocycle data failed verification."""


# -- finite groups ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FiniteGroup:
    order: int
    table: tuple
    name: str = "F"

    def __post_init__(self):
        n = self.order
        table = tuple(tuple(int(x) for x in row) for row in self.table)
        object.__setattr__(self, "table", table)
        if len(table) != n or any(len(r) != n for r in table):
            raise UsageError("multiplication table must be order x order")
        if any(not 0 <= x < n for r in table for x in r):
            raise UsageError("table entries out of range")
        if any(table[0][x] != x or table[x][0] != x for x in range(n)):
            raise UsageError("element 0 must be the identity")
        for a, b, c in itertools.product(range(n), repeat=3):
            if table[table[a][b]][c] != table[a][table[b][c]]:
                raise UsageError(f"table not associative at {(a, b, c)}")
        inv = []
        for a in range(n):
            row = [b for b in range(n) if table[a][b] == 0]
            if len(row) != 1:
                raise UsageError(f"element {a} has no unique inverse")
            inv.append(row[0])
        object.__setattr__(self, "_inverse", tuple(inv))

    @property
    def inverse(self) -> tuple:
        return self._inverse

    def mul(self, a: int, b: int) -> int:
        return self.table[a][b]

    def inv(self, a: int) -> int:
        return self._inverse[a]

    def elements(self) -> range:
        return range(self.order)


def cyclic_group(n: int) -> FiniteGroup:
    return FiniteGroup(n, tuple(tuple((a + b) % n for b in range(n)) for a in range(n)), f"C{n}")


def symmetric_group(n: int) -> FiniteGroup:
    perms = sorted(itertools.permutations(range(n)))
    index = {p: i for i, p in enumerate(perms)}
    # composition (a*b)(x) = a(b(x)); identity sorts first
    table = tuple(
        tuple(index[tuple(a[b[x]] for x in range(n))] for b in perms) for a in perms
    )
    return FiniteGroup(len(perms), table, f"S{n}")


@dataclass(frozen=True)
class SubgroupOfF:
    members: frozenset
    index_in_F: int
    normal: bool

    def __len__(self):
        return len(self.members)

    def sorted_members(self) -> list:
        return sorted(self.members)


def _closure(F: FiniteGroup, gens) -> frozenset:
    elems = {0}
    frontier = [0]
    gens = list(gens)
    while frontier:
        nxt = []
        for x in frontier:
            for g in gens:
                y = F.mul(x, g)
                if y not in elems:
                    elems.add(y)
                    nxt.append(y)
        frontier = nxt
    return frozenset(elems)


def _is_normal(F: FiniteGroup, H: frozenset) -> bool:
    return all(F.mul(F.mul(F.inv(g), h), g) in H for g in F.elements() for h in H)


def fin_subgroups(F: FiniteGroup, variant: str = "subgroup") -> list[SubgroupOfF]:
    """All subgroups (or normal subgroups) of F, by brute-force join closure."""
    if F.order > 1000:
        raise UsageError("finite group too large for brute-force subgroup listing")
    variant = normalize_variant(variant)
    found = {_closure(F, [x]) for x in F.elements()}
    frontier = set(found)
    cyclic = list(found)
    while frontier:
        new = set()
        for H in frontier:
            for C in cyclic:
                J = _closure(F, H | C)
                if J not in found:
                    new.add(J)
        found |= new
        frontier = new
    out = []
    for H in sorted(found, key=lambda s: (len(s), sorted(s))):
        normal = _is_normal(F, H)
        if variant == "normal" and not normal:
            continue
        out.append(SubgroupOfF(H, F.order // len(H), normal))
    return out


def normalize_variant(variant: str) -> str:
    v = variant.strip().lower()
    if v in ("subgroup", "<=", "≤", "le", "sub", "all"):
        return "subgroup"
    if v in ("normal", "⊲", "<|", "lhd", "nrm"):
        return "normal"
    raise UsageError(f"unknown variant {variant!r} (use subgroup or normal)")


# -- cocycle data --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class VirtuallyTauGroup:
    N: MalcevPresentation
    F: FiniteGroup
    sigma: dict
    psi: dict
    name: str = "extension"

    def __post_init__(self):
        h = self.N.h
        X = xvars(h)
        sigma = {}
        for f in self.F.elements():
            if f in self.sigma:
                polys = tuple(self.sigma[f])
                if len(polys) != h:
                    raise UsageError(f"sigma_{f} must have {h} coordinates")
                sigma[f] = tuple(P.with_vars(X) for P in polys)
            elif f == 0:
                sigma[f] = tuple(Polynomial.var(x, X) for x in X)
            else:
                raise UsageError(f"missing sigma for element {f}")
        psi = {}
        for f, f2 in itertools.product(self.F.elements(), repeat=2):
            v = tuple(int(x) for x in self.psi.get((f, f2), (0,) * h))
            if len(v) != h:
                raise UsageError(f"psi({f},{f2}) must have {h} coordinates")
            if (f == 0 or f2 == 0) and any(v):
                raise CocycleError("psi must be normalized: psi(1,f) = psi(f,1) = 0")
            psi[(f, f2)] = v
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "psi", psi)

    @property
    def h(self) -> int:
        return self.N.h

    def sigma_apply(self, f: int, a) -> tuple:
        vals = [poly_eval(P, tuple(a)) for P in self.sigma[f]]
        if all(isinstance(x, int) for x in a):
            if any(v.denominator != 1 for v in vals):
                raise CocycleError(f"sigma_{f} not integral at {a}")
            return tuple(v.numerator for v in vals)
        return tuple(vals)


def ext_multiply(V: VirtuallyTauGroup, x, y) -> tuple:
    """Twisted product (a, f) * (b, f') = (a sigma_f(b) psi(f, f'), f f')."""
    (a, f), (b, f2) = x, y
    N = V.N
    c = mal_multiply(N, mal_multiply(N, a, V.sigma_apply(f, b)), V.psi[(f, f2)])
    return (c, V.F.mul(f, f2))


def ext_inverse(V: VirtuallyTauGroup, x) -> tuple:
    a, f = x
    fi = V.F.inv(f)
    # (b, f^-1)(a, f) = (b sigma_{f^-1}(a) psi(f^-1, f), 1) = 1
    t = mal_multiply(V.N, V.sigma_apply(fi, a), V.psi[(fi, f)])
    return (mal_inverse(V.N, t), fi)


def ext_identity(V: VirtuallyTauGroup) -> tuple:
    return (V.N.identity(), 0)


def verify_cocycle(
    V: VirtuallyTauGroup, sample_bound: int = 6, samples: int = 100, seed: int = 0
) -> VerificationReport:
    rng = random.Random(seed)
    rep = VerificationReport(V.name)
    N, F, h = V.N, V.F, V.h
    ident = ext_identity(V)
    X = xvars(h)
    rep.record(
        "sigma_1 = identity",
        V.sigma[0] == tuple(Polynomial.var(x, X) for x in X),
    )
    # exhaustive cocycle identity over F
    for f, f2, f3 in itertools.product(F.elements(), repeat=3):
        lhs = mal_multiply(N, V.sigma_apply(f, V.psi[(f2, f3)]), V.psi[(f, F.mul(f2, f3))])
        rhs = mal_multiply(N, V.psi[(f, f2)], V.psi[(F.mul(f, f2), f3)])
        rep.record("psi cocycle identity", lhs == rhs, (f, f2, f3))

    def rvec():
        return tuple(rng.randint(-sample_bound, sample_bound) for _ in range(h))

    for _ in range(samples):
        a, b, c = rvec(), rvec(), rvec()
        f, f2, f3 = (rng.randrange(F.order) for _ in range(3))
        x, y, z = (a, f), (b, f2), (c, f3)
        try:
            rep.record(
                "associativity",
                ext_multiply(V, ext_multiply(V, x, y), z)
                == ext_multiply(V, x, ext_multiply(V, y, z)),
                (x, y, z),
            )
            rep.record(
                "identity",
                ext_multiply(V, x, ident) == x and ext_multiply(V, ident, x) == x,
                x,
            )
            xi = ext_inverse(V, x)
            rep.record(
                "inverses",
                ext_multiply(V, x, xi) == ident and ext_multiply(V, xi, x) == ident,
                x,
            )
            rep.record(
                "sigma homomorphism",
                V.sigma_apply(f, mal_multiply(N, a, b))
                == mal_multiply(N, V.sigma_apply(f, a), V.sigma_apply(f, b)),
                (f, a, b),
            )
            # sigma_f sigma_f' = inn(psi(f, f')) sigma_{ff'}; makes each sigma_f bijective
            n = V.psi[(f, f2)]
            lhs = V.sigma_apply(f, V.sigma_apply(f2, a))
            rhs = mal_multiply(
                N, mal_multiply(N, n, V.sigma_apply(F.mul(f, f2), a)), mal_inverse(N, n)
            )
            rep.record("sigma composition law", lhs == rhs, (f, f2, a))
        except (CocycleError, ArithmeticError) as exc:
            rep.record("integrality", False, str(exc))
    return rep


# -- structure words -------------------------------------------------------------


def uvars(h: int) -> tuple:
    return tuple(f"U{i}" for i in range(1, h + 1))


@dataclass
class StructureWords:
    l: dict  # (i, f) -> coords of g_f^-1 x_i g_f   (i is 1-based)
    n: dict  # (f, f') -> coords with g_f g_f' = g_ff' x^n
    p: dict  # f -> h-tuple of polynomials in U1..Uh
    convention_failures: list = field(default_factory=list)


def conjugate_by_transversal(V: VirtuallyTauGroup, f: int, u) -> tuple:
    """Coordinates of g_f^-1 x^u g_f, computed in G."""
    gf = (V.N.identity(), f)
    out, f_out = ext_multiply(V, ext_multiply(V, ext_inverse(V, gf), (tuple(u), 0)), gf)
    assert f_out == 0
    return out


def fold_conjugation(N: MalcevPresentation, lrows: Sequence[tuple], U: Sequence) -> tuple:
    """x^{g(l_1, u_1)} ... x^{g(l_h, u_h)} as an h-tuple of polynomials."""
    parts = [symbolic_g(N, lrows[i], U[i]) for i in range(N.h)]
    out = parts[0]
    for part in parts[1:]:
        out = symbolic_f(N, out, part)
    return out


def structure_words(
    V: VirtuallyTauGroup, K: SubgroupOfF | None = None, samples: int = 40, seed: int = 0
) -> StructureWords:
    """Structure words for the transversal g_f = (0, f); K is accepted for symmetry."""
    N, F, h = V.N, V.F, V.h
    U = [Polynomial.var(u, uvars(h)) for u in uvars(h)]
    l, n, p = {}, {}, {}
    for f in F.elements():
        for i in range(1, h + 1):
            e = tuple(1 if k == i - 1 else 0 for k in range(h))
            l[(i, f)] = conjugate_by_transversal(V, f, e)
        if f == 0:
            p[f] = tuple(U)
        else:
            p[f] = tuple(
                P.with_vars(uvars(h)) for P in fold_conjugation(N, [l[(i, f)] for i in range(1, h + 1)], U)
            )
    for f, f2 in itertools.product(F.elements(), repeat=2):
        gff = (N.identity(), F.mul(f, f2))
        prod = ext_multiply(V, (N.identity(), f), (N.identity(), f2))
        m, one = ext_multiply(V, ext_inverse(V, gff), prod)
        assert one == 0
        n[(f, f2)] = m
    for f in F.elements():
        if any(n[(0, f)]) or any(n[(f, 0)]):
            raise CocycleError("n_{1,f} and n_{f,1} must vanish")
    rng = random.Random(seed)
    for f in F.elements():
        for _ in range(samples):
            u = tuple(rng.randint(-6, 6) for _ in range(h))
            direct = conjugate_by_transversal(V, f, u)
            folded = tuple(poly_eval(P, u) for P in p[f])
            if direct != folded:
                raise CocycleError(
                    f"conjugation polynomial p_{f} disagrees with G at u={u}: {folded} != {direct}"
                )
    failures = [f for f in F.elements() if f and any(n[(f, F.inv(f))])]
    return StructureWords(l, n, p, failures)


# -- catalog & JSON -----------------------------------------------------------------


def _X(h):
    return [Polynomial.var(x, xvars(h)) for x in xvars(h)]


def trivial_extension(N: MalcevPresentation) -> VirtuallyTauGroup:
    return VirtuallyTauGroup(N, cyclic_group(1), {}, {}, f"trivial({N.name})")


def dinfty() -> VirtuallyTauGroup:
    """Infinite dihedral group Z x| C2 with the generator of C2 acting by -1."""
    X1 = _X(1)[0]
    return VirtuallyTauGroup(abelian(1), cyclic_group(2), {1: (-X1,)}, {}, "dinfty")


def z_over_2z() -> VirtuallyTauGroup:
    """Z viewed as an extension of N = 2Z (rescaled to Z) by C2: psi(t,t) = 1."""
    X1 = _X(1)[0]
    return VirtuallyTauGroup(abelian(1), cyclic_group(2), {1: (X1,)}, {(1, 1): (1,)}, "z-over-2z")


def heisenberg_c2() -> VirtuallyTauGroup:
    """Heisenberg group extended by the involution x1 -> x1^-1, x2 -> x2^-1."""
    X1, X2, X3 = _X(3)
    return VirtuallyTauGroup(heisenberg(), cyclic_group(2), {1: (-X1, -X2, X3)}, {}, "heisenberg-c2")


EXTENSION_CATALOG = {
    "dinfty": dinfty,
    "z-over-2z": z_over_2z,
    "heisenberg-c2": heisenberg_c2,
}


def extension_make(desc: str, verify: bool = True) -> VirtuallyTauGroup:
    desc = desc.strip()
    if desc in EXTENSION_CATALOG:
        V = EXTENSION_CATALOG[desc]()
    else:
        try:
            V = trivial_extension(catalog_make(desc, verify=False))
        except PresentationError as exc:
            raise UsageError(str(exc)) from exc
    if verify:
        rep = verify_cocycle(V)
        if not rep.ok:
            raise CocycleError(f"{desc} fails: {', '.join(rep.failed())}")
    return V


def extension_to_json(V: VirtuallyTauGroup) -> dict:
    X = xvars(V.h)
    return {
        "schema": 1,
        "kind": "extension",
        "name": V.name,
        "group": presentation_to_json(V.N),
        "F": {"order": V.F.order, "table": [list(r) for r in V.F.table]},
        "sigma": {str(f): [poly_to_records(P, X) for P in V.sigma[f]] for f in V.F.elements()},
        "psi": {f"{a},{b}": list(v) for (a, b), v in V.psi.items() if any(v)},
    }


def extension_from_json(data: dict, verify: bool = True) -> VirtuallyTauGroup:
    try:
        grp = data["group"]
        if isinstance(grp, str):
            N = catalog_make(grp, verify=verify)
        else:
            N = presentation_from_json(grp, verify=verify)
        Fd = data.get("F", {"order": 1, "table": [[0]]})
        F = FiniteGroup(int(Fd["order"]), tuple(tuple(r) for r in Fd["table"]), Fd.get("name", "F"))
        X = xvars(N.h)
        sigma = {
            int(k): tuple(poly_from_records(r, X) for r in recs)
            for k, recs in data.get("sigma", {}).items()
        }
        psi = {}
        for k, v in data.get("psi", {}).items():
            a, b = (int(s) for s in k.split(","))
            psi[(a, b)] = tuple(int(x) for x in v)
        V = VirtuallyTauGroup(N, F, sigma, psi, data.get("name", "extension"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (UsageError, CocycleError, PresentationError)):
            raise
        raise UsageError(f"malformed extension file: {exc}") from exc
    if verify:
        rep = verify_cocycle(V)
        if not rep.ok:
            raise CocycleError(f"cocycle data fails: {', '.join(rep.failed())}")
    return V


DATA_DIR = Path(__file__).resolve().parent / "data"


def load_group(source: str, verify: bool = True) -> VirtuallyTauGroup:
    """Catalog name or JSON path -> extension (tau-groups get trivial F)."""
    path = Path(source)
    if source.endswith(".json") and not path.is_file():
        bundled = DATA_DIR / path.name
        if bundled.is_file():
            path = bundled
    if source.endswith(".json") or path.is_file():
        if not path.is_file():
            raise UsageError(f"no such group file: {source}")
        data = json.loads(path.read_text(encoding="utf-8"))
        if data.get("kind") == "malcev" or "f" in data:
            return trivial_extension(presentation_from_json(data, verify=verify))
        return extension_from_json(data, verify=verify)
    return extension_make(source, verify=verify)
