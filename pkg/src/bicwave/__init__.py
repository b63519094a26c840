"""Constant-modulus spatio-spectral MIMO radar beampattern design."""

__version__ = "0.1.0"

from .signal_model import ArrayScenario, SteeringSet, beampattern, dft_spectrum, steering_set, steering_vector
from .spectral_mask import BandSpec, SpectralMask, build_mask, spectral_error
from .qp_engine import DesiredBeampattern, LiftedQP, assemble_full, assemble_nullform
from .solver import SolveReport, SolverParams, solve_beampattern, solve_nullform
from .config import ConfigError, ScenarioConfig, load_config
from .runner import ExportBundle, run
