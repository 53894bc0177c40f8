"""Floquet prethermalization of the 2D XY model on noisy simulated hardware."""

__version__ = "0.1.0"

from .exceptions import ConfigError, ResourceLimitError
from .lattice import (Lattice, PauliObservable, ProductStateSpec, SpinHamiltonian, build_lattice,
                      mean_squared_inplane_magnetization, product_state, product_state_energy,
                      xy_hamiltonian)
from .statevector import (TrotterSchedule, apply_trotter_step, evolve, survival_probability,
                          trotter_schedule)
from .noise import NoiseModel, TrajectoryEnsemble, noisy_survival_probability
from .spectral import all_sector_spectra, diagonal_ensemble, diagonalize_sector, microcanonical
from .magnus import PiecewiseDrive, floquet_vs_magnus_deviation, magnus_term
from .analysis import (TimeAverageSeries, detect_plateau, floquet_time_average,
                       heating_model_energy, solve_pevp)
from .mitigation import (MitigationRecord, bound_check, max_depth, mitigation_error_s, rescale,
                         sample_budget, track_sign)
