"""Dynamic output-feedback synthesis for impulsive systems under range dwell-time."""
from .elim import PointwiseInfeasible, reconstruct_from_xy, synth_elim_ltv
from .plant import (ClockController, ClosedLoop, ControllerForm, ImpulsivePlant, LtiController,
                    NearSingularCompletion, SingularReconstruction, close_loop, kernel_basis)
from .result import SynthResult
from .transform import (TransformVars, complete_certificate, ltv_certificate,
                        reconstruct_ltv_controller, synth_transform_ltv)
from .verify import Certificate, VerificationReport, verify_certificate

__all__ = ["Certificate", "ClockController", "ClosedLoop", "ControllerForm", "ImpulsivePlant",
           "LtiController", "NearSingularCompletion", "PointwiseInfeasible",
           "SingularReconstruction", "SynthResult", "TransformVars", "VerificationReport",
           "close_loop", "complete_certificate", "kernel_basis", "ltv_certificate",
           "reconstruct_from_xy", "reconstruct_ltv_controller", "synth_elim_ltv",
           "synth_transform_ltv", "verify_certificate"]
