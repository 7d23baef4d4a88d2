"""Subgroup and normal subgroup zeta functions of virtually nilpotent groups.

Groups are given by Mal'cev polynomials (tau-groups) plus finite extension
data; local factors are computed exactly by evaluating cone integrals and
cross-checked against brute-force enumeration in finite quotients.
"""

from .conegen import (
    ConeCondition,
    ConeConditionSystem,
    ConeIntegralData,
    emit_cone_data,
    good_basis_conditions,
    membership_conditions,
    relative_conditions,
)
from .evaluator import ConsistencyError, LocalSeries, cone_coeffs, local_counts, slice_measure
from .extension import (
    FiniteGroup,
    SubgroupOfF,
    VirtuallyTauGroup,
    cyclic_group,
    extension_make,
    fin_subgroups,
    load_group,
    structure_words,
    verify_cocycle,
)
from .malcev import MalcevPresentation, abelian, catalog_make, heisenberg, verify_presentation
from .oracle import hnf_counts, membership_oracle, oracle_counts
from .polyring import Polynomial
from .zeta import DirichletSeries, assemble_global, assemble_relative, compare_reports

__version__ = "0.1.0"
