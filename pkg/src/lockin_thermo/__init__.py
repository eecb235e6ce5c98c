"""Heartbeat-referenced lock-in thermography.

Detect ECG R-peaks, rescale the cardiac timeline so the peaks are periodic,
and synchronously average thermal video per pixel to pull millikelvin
cardiac-locked temperature oscillations out of sensor noise.
"""

from .core import (
    CycleProfile,
    EcgTrace,
    LockInMap,
    PixelSeries,
    RPeakSeries,
    ThermalSequence,
    ValidationReport,
    spatial_average_3x3,
    validate_sequence,
)
from .ecg import DetectorConfig, detect_rpeaks, mean_rr, rr_intervals
from .lockin import (
    LockInConfig,
    bin_cycles,
    lockin_map,
    sliding_lockin,
    sliding_lockin_map,
    standard_error,
    synchronous_average,
)
from .motion import motion_score, select_low_motion_segment
from .spectral import SpectralMap, artery_map, cardiac_frequency, pixel_amplitude_at
from .synth import GroundTruth, SynthConfig, synth_dataset, synth_ecg, synth_thermal
from .timewarp import TimeWarp, build_warp, phase_of, warp_time

__version__ = "0.1.0"
