"""Shared lateral steering control: T-S modelling, LMI synthesis and simulation."""

from .vehicle import DomainError, DriverGains, VehicleParams
from .ts import SchedulingBounds, TsModel, build_ts_model, memberships, reconstruct
from .synthesis import DesignSpec, SynthesisResult, assemble_problem, bisect_tau1, verify_certificate
from .sdp import SdpProblem, SdpSolution, solve

__all__ = [
    "DomainError", "DriverGains", "VehicleParams", "SchedulingBounds", "TsModel", "build_ts_model",
    "memberships", "reconstruct", "DesignSpec", "SynthesisResult", "assemble_problem", "bisect_tau1",
    "verify_certificate", "SdpProblem", "SdpSolution", "solve",
]
__version__ = "0.1.0"
