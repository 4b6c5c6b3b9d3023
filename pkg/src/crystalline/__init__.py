"""Exact crystalline cohomology of finitely presented affine algebras over
divided power base rings (Z, Q, Z/N, Z/p^e with standard pd on (p)).

The computation route: present the truncated divided power envelope of a
polynomial chart along an ideal in exact normal-form coordinates, build
the pd de Rham complex and the Cech-Alexander complex of the chart's fiber
powers, slice everything by weight, and compute homology with exact linear
algebra (Smith normal form over Z, Howell forms over Z/N).  The two sides
of the comparison theorem can be computed independently and checked
against each other at desk scale.
"""

from .exactalg import (
    BaseDpRing,
    IntMatrix,
    ModuleShape,
    howell_form,
    integers,
    integers_mod,
    module_from_relations,
    prime_power_with_pd,
    rationals,
    smith_normal_form,
    solve_linear,
)
from .pdpoly import (
    PdElement,
    TruncationParams,
    format_pd_element,
    ideal_power_membership,
    parse_pd_element,
    pd_gamma,
    pd_mul,
    substitute,
    truncate,
)
from .envelope import (
    AlgebraPresentation,
    Carrier,
    CarrierMap,
    CosimplicialLevel,
    Element,
    EnvelopeError,
    EnvelopePresentation,
    Poly,
    build_envelope,
    codegeneracy_maps,
    coface_maps,
    fiber_power_envelope,
)
from .homcx import (
    ComplexMap,
    FiniteComplex,
    PresentedModule,
    check_complex,
    homology,
    homology_map_bijective,
    is_quasi_iso,
    mapping_cone,
)
from .derham import derham_complex, poincare_homotopy, twisted_derham
from .crystal import (
    ConnectionData,
    NotWithinBound,
    PdThickening,
    RefusalError,
    Verified,
    check_integrable,
    check_pd_quasinilpotent,
    cocycle_check,
    crystal_evaluate,
    pd_map,
    pd_nilpotence_bound,
    transition_iso,
)
from .cechcomp import (
    CohomologyRequest,
    build_double_complex,
    cech_alexander,
    compare_edges,
    crys_cohomology,
)

__version__ = "0.1.0"
