"""Kinetic-inductance traveling-wave parametric amplifier toolkit.

Models lumped-element (artificial) nonlinear transmission lines, their
Floquet-Bloch dispersion and stopbands, and degenerate-pump four-wave-mixing
gain, for the two phase-matching architectures: periodic impedance loading
and embedded resonator phase shifters.
"""

__version__ = "0.1.0"

from .circuit import (
    FishboneSpec,
    LadderNetwork,
    LeafSpec,
    NonlinearInductorSpec,
    ResonatorSpec,
    UnitCellSpec,
    characteristic_impedance,
    cutoff_frequency,
    expand_fishbone,
    expand_leaf,
    pump_current,
    pump_power,
    read_netlist,
    uniform_line,
    write_netlist,
)
from .twoport import (
    FrequencyGrid,
    SParameterSet,
    TwoPortMatrix,
    cascade,
    element_matrix,
    network_matrix,
    read_touchstone,
    to_s_parameters,
    write_touchstone,
)
from .dispersion import (
    DispersionCurve,
    Stopband,
    StopbandReport,
    bloch_dispersion,
    device_dispersion,
    find_stopbands,
    resonator_phase_shift,
)
from .fwm import (
    GainProfile,
    IntegrationOptions,
    KerrCoefficient,
    ModeState,
    PhaseMismatch,
    analytic_gain_undepleted,
    coupled_mode_rhs,
    integrate_gain,
    kerr_coefficient,
    phase_mismatch,
    propagate_modes,
    third_harmonic_scan,
)
from .analysis import (
    CalibrationResult,
    GainMetrics,
    OperatingPoint,
    SweepAxis,
    calibrate_istar,
    compare_designs,
    gain_metrics,
    simulate_gain,
    sweep,
)
from .config import RunConfig, load_config
from .errors import ConfigError, KitwpaError, NumericError
