"""Max-min rate simulator and optimizer for a transmit-and-reflect surface
assisted hybrid NOMA downlink."""

from .baselines import ABLATIONS, FIG3_FRAMEWORKS, Framework, solve
from .channel import (ChannelRealization, array_response, build_channels,
                      dump_channels, sample_direct, zero_cascade)
from .harness import (ExperimentSpec, ResultRow, ResultTable, apply_sweep, emit_csv,
                      emit_trace, make_scenario, oracle_check, read_csv, run_experiment)
from .inner_ao import (GainCoefficients, Solution, amplitude_surrogate_bound,
                       gain_coefficients, inner_solve, optimize_amplitudes,
                       optimize_powers, optimize_time, power_surrogate_bound,
                       validate_solution)
from .matching import Matching, enumerate_matchings, initial_matching, outer_solve, swap, utility
from .scenario import (SolverOptions, SystemConfig, UserSet, config_from_dict,
                       dbm_to_watts, distance, generate_users, load_config,
                       rng_streams, watts_to_dbm)
from .star_noma import (AllocationState, RateReport, StarProfile, combined_gain,
                        decoding_order, evaluate, optimal_phase, rate, sinr)

__version__ = "0.1.0"

__all__ = [
    "ABLATIONS", "AllocationState", "ChannelRealization", "ExperimentSpec",
    "FIG3_FRAMEWORKS", "Framework", "GainCoefficients", "Matching", "RateReport",
    "ResultRow", "ResultTable", "Solution", "SolverOptions", "StarProfile",
    "SystemConfig", "UserSet", "amplitude_surrogate_bound", "apply_sweep",
    "array_response", "build_channels", "combined_gain", "config_from_dict",
    "dbm_to_watts", "decoding_order", "distance", "dump_channels", "emit_csv",
    "emit_trace",
    "enumerate_matchings", "evaluate", "gain_coefficients", "generate_users",
    "initial_matching", "inner_solve", "load_config", "make_scenario",
    "optimal_phase", "optimize_amplitudes", "optimize_powers", "optimize_time",
    "oracle_check", "outer_solve", "power_surrogate_bound", "rate", "read_csv",
    "rng_streams", "run_experiment", "sample_direct", "sinr", "solve", "swap",
    "utility", "validate_solution", "watts_to_dbm", "zero_cascade",
]
