"""Frequency-bin qubit gates built from EOM / pulse-shaper cascades.

Modules:
    multiport     Fourier-domain transfer matrices of EOM and shaper cascades
    gates         target unitaries, success probability, fidelity, reconfiguration
    synthesis     PSO + local refinement search for high-fidelity gates
    beamsplitter  closed-form tunable beamsplitter
    tomography    analyzer model, simulated counts, Bayesian state estimation
    cli           command-line front end
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from .gates import GateReport, QubitState, gate_fidelity, reconfigure, success_probability, target_unitary
from .multiport import (
    FrequencyGrid,
    ModeWindow,
    QfpConfig,
    RfWaveform,
    ShaperPhases,
    cascade,
    configure,
    eom_coefficients,
    extract_computational,
    gate_of,
)

__all__ = [
    "FrequencyGrid",
    "GateReport",
    "ModeWindow",
    "QfpConfig",
    "QubitState",
    "RfWaveform",
    "ShaperPhases",
    "cascade",
    "configure",
    "eom_coefficients",
    "extract_computational",
    "gate_fidelity",
    "gate_of",
    "reconfigure",
    "success_probability",
    "target_unitary",
]
