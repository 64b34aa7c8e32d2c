"""Revenue-maximizing public signaling for VCG ad auctions."""

from .core import (AuctionInstance, SignalingScheme, SolveReport, consistency_residual, export_signals,
                   expected_valuations, revenue, scheme_revenue, vcg_outcome)
from .errors import AdSignalError, NumericalError, SizeGuardError, ValidationError
from .kv_exact import enumerate_region_vertices, solve_fixed_d, solve_fixed_m
from .rv import Regime, enumerate_q_uniform, required_samples, solve_rv
from .single_minded import RelaxationConfig, SingleMindedStructure, dp_separation, solve_single_minded

__version__ = "0.1.0"

__all__ = [
    "AuctionInstance", "SignalingScheme", "SolveReport", "consistency_residual", "export_signals",
    "expected_valuations", "revenue", "scheme_revenue", "vcg_outcome",
    "AdSignalError", "NumericalError", "SizeGuardError", "ValidationError",
    "enumerate_region_vertices", "solve_fixed_d", "solve_fixed_m",
    "Regime", "enumerate_q_uniform", "required_samples", "solve_rv",
    "RelaxationConfig", "SingleMindedStructure", "dp_separation", "solve_single_minded",
]
