"""Simulator for dissipatively stabilized cat qubits.

Two-photon dissipation confines a microwave cavity to the manifold spanned
by Schrodinger cat states; a weak linear drive then rotates the encoded
qubit while the dissipation holds it on the manifold (quantum Zeno
dynamics).  The package provides the truncated Fock algebra, reduced and
full two-mode Lindblad models, an adaptive master-equation integrator with
a compiled core, Wigner tomography, and declarative experiment runners for
parity oscillations, gate tomography, thermal phase flips, and calibration
sweeps.
"""

__version__ = "0.1.0"

from ._backend import HAVE_EXTENSION, backend_name
from .engine import (
    EvolutionResult,
    SolverConfig,
    SuperoperatorMatrix,
    evolve,
    evolve_expm,
    liouvillian,
    steady_state,
)
from .envelopes import PiecewisePoly, piecewise_linear
from .errors import ZenocatError
from .experiments import (
    ExperimentConfig,
    FitResult,
    InitialState,
    fit_decaying_cosine,
    run_cardinal_gate,
    run_frequency_matching_sweep,
    run_parity_oscillation,
    run_phase_flip,
    run_rabi_sweep,
    run_wigner_tomography,
)
from .fock import (
    DensityMatrix,
    HilbertSpace,
    Operator,
    StateVector,
    annihilation,
    cat_state,
    coherent_state,
    creation,
    displacement,
    expect,
    fock_state,
    identity,
    number,
    pad_fock,
    parity,
    partial_trace,
    tensor,
    thermal_state,
)
from .model import (
    DissipatorTerm,
    FullParams,
    HamiltonianTerm,
    LindbladModel,
    Protocol,
    ReducedParams,
    alpha_inf,
    apply_protocol,
    build_full,
    build_reduced,
    calibrate_full_to_reduced,
    effective_params,
    stark_chi,
)
from .tomography import (
    BlochVector,
    LogicalBasis,
    WignerGrid,
    bloch_vector,
    cardinal_state,
    displaced_parity,
    logical_basis,
    phase_flip_leakage,
    wigner_grid,
    wigner_point,
)

__all__ = [name for name in dir() if not name.startswith("_")]
