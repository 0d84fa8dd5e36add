"""Dissipative quantum maps, two-point-measurement energy statistics, and
the nontrivial scale factor of the exchange fluctuation relation."""

from .core import (
    DensityOperator,
    EnergyLevel,
    HermitianObservable,
    ValidationError,
    evolution_unitary,
    maximally_mixed,
    spectral_decompose,
    spin1_operators,
    thermal_probabilities,
    thermal_state,
    validate_density,
    validate_probability_vector,
)
from .channels import (
    AsymptoticReport,
    NonConvergenceError,
    QuantumChannel,
    SeedDependenceError,
    apply,
    asymptotic_state,
    compose,
    dephasing_channel,
    identity_channel,
    make_channel,
    probabilistic_channel,
    pump_channel,
    unitary_channel,
)
from .tpm import (
    EnergyChangeDistribution,
    TPMRecord,
    characteristic_function,
    characteristic_trace,
    conditional_probabilities,
    energy_change_distribution,
    initial_probabilities,
    mean_energy_change,
    stationary_distribution,
)
from .scale_factor import (
    CubicCertificate,
    EtaSolution,
    asymptotic_characteristic,
    energy_extraction_indicator,
    nv_field_sweep,
    nv_spin_energies,
    routh_hurwitz_variations,
    solve_eta_star,
    symmetric_qutrit_cubic,
)
from .hypotheses import (
    DbcFit,
    HypothesisVerdict,
    check_dbc,
    check_hypothesis_I,
    check_hypothesis_I_star,
    extract_F,
    fit_exponential_dbc_model,
    record_from_dbc_model,
    record_from_memory_profile,
)
from .protocols import ProtocolSpec, build_nv_demon, build_stern_gerlach, run_protocol

__version__ = "0.1.0"
