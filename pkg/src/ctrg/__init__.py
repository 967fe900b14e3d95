"""Corner transfer matrix renormalization group (CTRG) for the 2D Ising model,
with a Levin-Nave TRG baseline, strip free energies and a benchmark harness."""

from .core import (
    CoreState,
    IsometrySet,
    ThermoLimitResult,
    TruncationPolicy,
    TruncationReport,
    ctrg_iteration,
    ctrg_logZ,
    ctrg_step,
    init_core,
    logZ_sequence,
    logZ_torus,
    observables,
    thermo_limit_free_energy,
)
from .errors import CapacityError, NumericError, ShapeError, StateError
from .ising import (
    T_CRITICAL,
    LatticeSpec,
    ModelSpec,
    boltzmann_plaquette_tensor,
    brute_force_logZ,
    onsager_free_energy_density,
    onsager_internal_energy_density,
    strip_free_energy_exact,
    transfer_matrix_logZ,
)
from .strip import StripResult, StripSpec, ctrg_strip, strip_free_energy, trg_strip
from .trg import TrgState, init_trg, logZ_torus_trg, trg_step

__version__ = "0.1.0"
