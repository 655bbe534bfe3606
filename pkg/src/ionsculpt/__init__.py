"""Trapped-ion motional state sculpting toolkit.

Simulates carrier / red-sideband pulse cycles with projection synthesis,
solves for cycle parameters reaching a target motional state, models laser
intensity-fluctuation noise, and optimizes the fidelity-probability rate.
"""

from .fock import (
    DensityMatrix,
    DimensionMismatch,
    JointState,
    MotionalAmplitudes,
    TruncationError,
    basis_state,
    coherent_amplitudes,
    default_n_max,
    fidelity_mixed,
    fidelity_pure,
    inner,
    phase_state,
)
from .dynamics import (
    CycleParams,
    DegenerateProjection,
    PulseKind,
    PulseSpec,
    beta_to_pulse,
    carrier_evolve,
    epsilon_to_pulse,
    jc_evolve,
    sculpt_cycle_ideal,
    sculpt_run_ideal,
)
from .solver import (
    ConvergenceFailure,
    NoFiniteRoot,
    SculptPlan,
    min_cycles,
    rate,
    solve_multi_cycle,
    solve_single_cycle,
)
from .noise import (
    NoiseParams,
    Spin,
    SpinFockDensity,
    carrier_noise_element,
    evolve_master,
    jc_noise_element,
    pulse_fidelity_c,
    pulse_fidelity_jc,
    sculpt_noisy_oracle,
    sculpt_noisy_single_cycle,
    trace_distance,
)
from .phasespace import (
    BlochVector,
    GridTooCoarse,
    OutOfCone,
    WignerGrid,
    bloch_vector,
    cone_sweep,
    cone_weights,
    default_axes,
    iso_fidelity_mixture,
    iso_fidelity_state,
    wigner,
    wigner_kernel,
)
from .optimize import (
    DEFAULT_SCAN_EXCITATIONS,
    OptimResult,
    ScanRow,
    SearchSpace,
    batched_cycle_figures,
    optimize_noisy,
    scan_initial_excitation,
    scan_to_csv,
)

__version__ = "0.1.0"
