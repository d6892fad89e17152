"""Effective Lindblad master equations for weakly anharmonic oscillators.

The package derives, symbolically and with exact coefficients where the
model permits, the frame transformation that removes number-non-conserving
anharmonic terms; assembles the resulting effective master equations (with
excitation-dependent collapse operators) alongside the Kerr and linear
baselines; and integrates all of them in a truncated Fock space.
"""

__version__ = "0.1.0"

from .algebra import (
    Context,
    ExactComplex,
    Monomial,
    OperatorPolynomial,
    commutator,
)
from .generator import (
    EffectiveHamiltonian,
    Generator,
    QuadraticSpectrum,
    ResonantDenominator,
    solve_generator4,
    solve_generator6,
    transform_first_order,
    transform_state_first_order,
)
from .hybridize import BareModel, HybridizationResult, hybridize, sign_table
from .models import (
    CollapseTerm,
    EffectiveModel,
    FlatBath,
    Flavor,
    Representation,
    TabulatedBath,
    TransitionCollapse,
    build_case1,
    build_case1_number_basis,
    build_case2,
    correction_signs,
    transition_spectrum,
)
from .simulate import (
    FockSuperposition,
    FockTruncation,
    Occupation,
    PhaseSpace,
    ProductState,
    QuadratureX,
    QuadratureY,
    SimulationConfig,
    Vacuum,
    compare_flavors,
    evolve,
    quadrature_eom_check,
)

__all__ = [
    "BareModel",
    "CollapseTerm",
    "Context",
    "EffectiveHamiltonian",
    "EffectiveModel",
    "ExactComplex",
    "FlatBath",
    "Flavor",
    "FockSuperposition",
    "FockTruncation",
    "Generator",
    "HybridizationResult",
    "Monomial",
    "Occupation",
    "OperatorPolynomial",
    "PhaseSpace",
    "ProductState",
    "QuadraticSpectrum",
    "QuadratureX",
    "QuadratureY",
    "Representation",
    "ResonantDenominator",
    "SimulationConfig",
    "TabulatedBath",
    "TransitionCollapse",
    "Vacuum",
    "build_case1",
    "build_case1_number_basis",
    "build_case2",
    "commutator",
    "compare_flavors",
    "correction_signs",
    "evolve",
    "hybridize",
    "quadrature_eom_check",
    "sign_table",
    "solve_generator4",
    "solve_generator6",
    "transform_first_order",
    "transform_state_first_order",
    "transition_spectrum",
]
