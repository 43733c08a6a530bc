"""PAM-4 SSB link simulator with a photonic ELM/TDRC readout."""

from ._elmlink import (
    HD_FEC_LOG10_BER,
    RESULTS_SCHEMA,
    ParameterError,
    SimulationError,
    config_keys,
    kk_reconstruct,
    memory_capacity,
    pam4_symbols,
    propagate,
    read_dump,
    run,
    run_rows,
    summarize,
    train_ridge,
    validate_config,
    write_dump,
)

__all__ = [
    "HD_FEC_LOG10_BER",
    "RESULTS_SCHEMA",
    "ParameterError",
    "SimulationError",
    "config_keys",
    "kk_reconstruct",
    "memory_capacity",
    "pam4_symbols",
    "propagate",
    "read_dump",
    "run",
    "run_rows",
    "summarize",
    "train_ridge",
    "validate_config",
    "write_dump",
]
