"""Zero-temperature Ohmic spin-boson influence functional as a bosonic matrix-product state."""

from .dynamics import SpinModel, density_matrix, evolve, observables, propagate, spin_step_unitary
from .errors import (
    ConfigError,
    ContractError,
    NumericalError,
    OhmicIFError,
    ParameterError,
    ResourceError,
)
from .expsum import ExpSum, build, build_range, certify_l1, kernel_table, nu_values
from .fock import (
    FockBasis,
    IfTensor,
    TruncationPlan,
    assemble_if_tensor,
    build_basis,
    contract_amplitude,
    lambda_shift,
    plan_truncation,
)
from .kernel import BathSpec, Discretization, KernelTable, build_kernel_table, eta_continuum, eta_discrete

__version__ = "0.1.0"
