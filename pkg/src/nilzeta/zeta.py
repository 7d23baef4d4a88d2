"""Assembly of local count series into Dirichlet coefficients, and reports."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .evaluator import local_counts
from .extension import SubgroupOfF, VirtuallyTauGroup, fin_subgroups, normalize_variant, trivial_extension
from .malcev import MalcevPresentation
from .polyring import is_prime


class GapError(LookupError):
    """Local data needed for a global coefficient is missing."""

    def __init__(self, missing):
        self.missing = sorted(set(missing))
        super().__init__("missing local data for (K, p, k): " + ", ".join(map(str, self.missing)))


def primes_up_to(n: int) -> list:
    return [p for p in range(2, n + 1) if is_prime(p)]


def factorize(n: int) -> dict:
    out = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def _as_extension(source) -> VirtuallyTauGroup:
    if isinstance(source, MalcevPresentation):
        return trivial_extension(source)
    return source


def k_label(K: SubgroupOfF) -> str:
    return "{" + ",".join(str(x) for x in sorted(K.members)) + "}"


@dataclass
class DirichletSeries:
    nmax: int
    coeffs: list  # a_1 .. a_nmax
    label: str = ""

    def __getitem__(self, n: int) -> int:
        return self.coeffs[n - 1]

    def to_json(self) -> dict:
        return {"schema": 1, "label": self.label, "nmax": self.nmax, "coeffs": list(self.coeffs)}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "a_n"])
        for n, a in enumerate(self.coeffs, start=1):
            w.writerow([n, a])
        return buf.getvalue()


def assemble_relative(
    V, K: SubgroupOfF, variant: str, primes: Iterable[int], kmax: int, workers: int | None = None
) -> dict:
    """Local count series of zeta_{S,K} at each requested prime, from the cone pipeline."""
    V = _as_extension(V)
    return {p: local_counts(V, p, kmax, variant, K, workers) for p in primes}


def multiplicative_coeff(local: dict, m: int, missing: list, tag) -> int:
    """a_m = prod over p^k || m of the local coefficient a_{p^k}."""
    out = 1
    for p, k in factorize(m).items():
        series = local.get(p)
        if series is None or series.kmax < k:
            missing.append((tag, p, k))
            continue
        out *= int(series.coeffs[k])
    return out


def assemble_global(
    V,
    variant: str = "subgroup",
    nmax: int = 10,
    local: dict | None = None,
    workers: int | None = None,
) -> DirichletSeries:
    """a_n(G) = sum over K of sum over [F:K] m = n of a_m^{S,K}.

    `local` maps k_label(K) -> {p: LocalSeries}; when absent the series are
    computed for every prime p <= nmax to depth floor(log_p nmax).
    """
    variant = normalize_variant(variant)
    V = _as_extension(V)
    Ks = fin_subgroups(V.F, variant)
    if local is None:
        local = {}
        for K in Ks:
            local[k_label(K)] = {
                p: local_counts(V, p, int(math.floor(math.log(nmax, p) + 1e-9)), variant, K, workers)
                for p in primes_up_to(nmax)
            }
    coeffs = [0] * nmax
    missing: list = []
    for K in Ks:
        tag = k_label(K)
        index = V.F.order // len(K.members)
        table = local.get(tag, {})
        for m in range(1, nmax // index + 1):
            coeffs[index * m - 1] += multiplicative_coeff(table, m, missing, tag)
    if missing:
        raise GapError(missing)
    return DirichletSeries(nmax, coeffs, f"{V.name}/{variant}")


def multiplicativity_failures(series: DirichletSeries) -> list:
    """Coprime pairs (m, n) with mn <= nmax and a_mn != a_m a_n."""
    bad = []
    for m in range(2, series.nmax + 1):
        for n in range(m + 1, series.nmax // m + 1):
            if math.gcd(m, n) == 1 and series[m * n] != series[m] * series[n]:
                bad.append((m, n))
    return bad


# -- reports ------------------------------------------------------------------


@dataclass
class ReportRow:
    K: str
    p: int
    cone: list
    oracle: list
    stable: bool
    cone_seconds: float = 0.0
    oracle_seconds: float = 0.0

    @property
    def agree(self) -> bool:
        return self.cone == self.oracle


@dataclass
class CountReport:
    label: str = ""
    variant: str = "subgroup"
    rows: list = field(default_factory=list)

    @property
    def verdict(self) -> str:
        if any(not r.agree for r in self.rows):
            return "mismatch"
        if any(not r.stable for r in self.rows):
            return "inconclusive"
        return "agree"

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "label": self.label,
            "variant": self.variant,
            "verdict": self.verdict,
            "rows": [
                {
                    "K": r.K,
                    "p": r.p,
                    "cone": r.cone,
                    "oracle": r.oracle,
                    "stable": r.stable,
                    "agree": r.agree,
                    "cone_seconds": round(r.cone_seconds, 4),
                    "oracle_seconds": round(r.oracle_seconds, 4),
                }
                for r in self.rows
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["K", "p", "k", "cone", "oracle", "stable", "agree"])
        for r in self.rows:
            for k, (a, b) in enumerate(zip(r.cone, r.oracle)):
                w.writerow([r.K, r.p, k, a, b, r.stable, a == b])
        return buf.getvalue()

    def table(self) -> str:
        lines = [f"{'K':<10} {'p':>3}  {'cone':<28} {'oracle':<28} stable  agree"]
        for r in self.rows:
            lines.append(
                f"{r.K:<10} {r.p:>3}  {str(r.cone):<28} {str(r.oracle):<28} "
                f"{str(r.stable):<7} {r.agree}"
            )
        lines.append(f"verdict: {self.verdict}")
        return "\n".join(lines)


def compare_reports(cone: dict, oracle: dict, label: str = "", variant: str = "subgroup") -> CountReport:
    """Pair up series keyed by (K label, p); missing partners count as a mismatch."""
    report = CountReport(label, variant)
    for key in sorted(set(cone) | set(oracle)):
        c = cone.get(key)
        o = oracle.get(key)
        Klab, p = key
        report.rows.append(
            ReportRow(
                Klab,
                p,
                c.counts() if c else [],
                o.counts() if o else [],
                bool(o.stable) if o and o.stable is not None else o is not None,
            )
        )
    return report


def oracle_compare(
    V,
    variant: str,
    primes: Sequence[int],
    kmax: int,
    Ks: Sequence[SubgroupOfF] | None = None,
    e: int | None = None,
    budget: int | None = None,
    workers: int | None = None,
    system_override=None,
) -> CountReport:
    """Run the cone pipeline and the finite-quotient oracle side by side."""
    from .oracle import DEFAULT_BUDGET, oracle_counts

    variant = normalize_variant(variant)
    V = _as_extension(V)
    Ks = list(Ks) if Ks is not None else fin_subgroups(V.F, variant)
    report = CountReport(V.name, variant)
    for K in Ks:
        for p in primes:
            t0 = time.perf_counter()
            source = system_override(K) if system_override else V
            cone = local_counts(source, p, kmax, variant, K, workers)
            t1 = time.perf_counter()
            orc = oracle_counts(V, K, variant, p, kmax, e, budget or DEFAULT_BUDGET)
            t2 = time.perf_counter()
            report.rows.append(
                ReportRow(k_label(K), p, cone.counts(), orc.counts(), bool(orc.stable), t1 - t0, t2 - t1)
            )
    return report


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)
