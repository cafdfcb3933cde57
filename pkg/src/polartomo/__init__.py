"""Pure-state tomography from two-term polarization identities."""

from .errors import (
    DisconnectedGraphError,
    DomainError,
    NoChainError,
    SchemaError,
    SizeCapError,
    TomographyError,
)
from .kernels import BACKEND
from .state import StateVector, fidelity, ghz_state, prepare_graph_state, random_state, rotate_index

__all__ = [
    "BACKEND",
    "DisconnectedGraphError",
    "DomainError",
    "NoChainError",
    "SchemaError",
    "SizeCapError",
    "StateVector",
    "TomographyError",
    "fidelity",
    "ghz_state",
    "prepare_graph_state",
    "random_state",
    "rotate_index",
]
__version__ = "0.1.0"
