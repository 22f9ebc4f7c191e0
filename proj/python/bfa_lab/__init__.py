from ._core import (
    AttackResult,
    BoundaryConfig,
    ContractError,
    Dataset,
    EmptyStudy,
    Error,
    InvalidConfig,
    InvalidInput,
    Model,
    ParseError,
    averaged_boundary_gradient,
    boundary_distance,
    clip_ball,
    gen_blobs,
    gen_moons,
    gen_rings,
    load_config,
    run_attack,
    run_command,
    version,
)

__version__ = version()

__all__ = [
    "AttackResult",
    "BoundaryConfig",
    "ContractError",
    "Dataset",
    "EmptyStudy",
    "Error",
    "InvalidConfig",
    "InvalidInput",
    "Model",
    "ParseError",
    "averaged_boundary_gradient",
    "boundary_distance",
    "clip_ball",
    "gen_blobs",
    "gen_moons",
    "gen_rings",
    "load_config",
    "run_attack",
    "run_command",
    "version",
]
