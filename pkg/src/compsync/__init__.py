"""Free synchronization of networked companion-form agents.

Spectral synthesis of coupling-matrix collections, Lyapunov certificates
for the resulting closed loop, PD / PID controller assembly and a
fixed-step network simulator.
"""
from .collection import (
    SpectralCollection,
    coefficient_table,
    collection_from_matrices,
    synthesize_free,
    synthesize_graph,
    verify_collection,
)
from .control import (
    ControllerSpec,
    StateTransform,
    assemble_pd,
    assemble_pid,
    evaluate_control,
    linear_canonical_transform,
    wrap_nonlinear,
)
from .lyapunov import build_block_H, build_block_M, build_tilde, certify_identity, certify_positivity, gain_lower_bound
from .simkit import NetworkScenario, simulate

__version__ = "0.1.0"
