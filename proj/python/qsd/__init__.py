"""Monitored relaxation of a qubit under heterodyne detection.

Thin Python layer over the C++ core: record synthesis, Kraus/Euler filtering,
closed-form invariants and maximum-likelihood efficiency estimation.
Initial states are given as "plus_x", "excited", "ground" or "x,y,z".
"""

from ._qsd import (
    ConfigError,
    InvalidState,
    NumericalBlowup,
    ParseError,
    Record,
    SimParams,
    Trajectory,
    __version__,
    alpha_flow,
    alpha_of,
    estimate_eta,
    filter,
    kraus_step,
    lindblad_solve,
    read_record,
    record_log_likelihood,
    spheroid_residual,
    state_from_spheroid,
    synthesize,
    write_record_csv,
    xi_from_record,
    xi_of,
)

__all__ = [
    "ConfigError",
    "InvalidState",
    "NumericalBlowup",
    "ParseError",
    "Record",
    "SimParams",
    "Trajectory",
    "__version__",
    "alpha_flow",
    "alpha_of",
    "estimate_eta",
    "filter",
    "kraus_step",
    "lindblad_solve",
    "read_record",
    "record_log_likelihood",
    "spheroid_residual",
    "state_from_spheroid",
    "synthesize",
    "write_record_csv",
    "xi_from_record",
    "xi_of",
]
