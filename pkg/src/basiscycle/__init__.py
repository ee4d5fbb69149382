"""Qudit basis-cycling simulator: refocused qutrit gates, cyclic cross resonance and tomography."""
from .core import (DiagonalBlockOperator, Operator, SystemShape, cyclic_shift, distance_up_to_global_phase, embed,
                   level_phase, phase_gradation, pi_pulse, subspace_rx, tensor)
from .frames import DetuningModel, FrameTracker
from .circuit import Gate, TimedCircuit, circuit_unitary, restrict_to_qubits
from .cycling import (CycleSpec, RefocusPlan, build_refocused_sequence, build_unprotected_sequence,
                      closed_form_cycle, compose_cycle, refocus_intervals, verify_refocusing)
from .cr import CrParams, CrRateModel, backward_gencx, backward_gencz, calibrate_cr, cycr, forward_gencx
from .pulse import DriveSpec, TwoToneSpec, evolve, gaussian_drag_envelope, rwa_hamiltonian, validate_effective_hcr
from .noise import DetuningWalk, NoiseModel, simulate_channel
from .tomography import (ConfusionMatrix, ExpectationTable, MeasurementPlan, PhaseFitInput, Superoperator,
                         mitigate_readout, phi_least_squares, process_fidelity, qpt_reconstruct, ramsey_phase_fit,
                         sample_expectations, truth_table)
from .experiments import (ErrorAnalysisConfig, ExperimentRecord, StabilityConfig, build_ccz, build_identity_probes,
                          build_qubit_toffoli_reference, build_toffoli, run_error_analysis, run_stability_experiment)

__version__ = "0.1.0"
