"""Toolkit for evaluating video-based spoofing of PPG biometric
authentication: CHROM rPPG extraction, conv-GAN signal restoration, beat
segmentation with fiducial features, and attack metrics."""

from .beats import BeatCycle, FiducialFeatures, extract_features, first_derivative, segment_beats
from .errors import (
    CalibrationError,
    DataValidityError,
    DegenerateInputError,
    DependencyError,
    FeatureExtractionError,
    ParameterError,
    PpgSpoofError,
    TrainingError,
    UsageError,
)
from .metrics import far_frr_eer, ks_statistic, pearson
from .rppg import ChromSpec, RgbTrace, chrom_extract, decimate_trace
from .signal_core import (
    SavGolSpec,
    SignalLabel,
    WaveSignal,
    bandpass,
    normalize_cycle,
    resample,
    savgol_smooth,
)
from .sigr import SigrModel, TrainSpec, gradient_penalty, restore, train_sigr

__version__ = "0.1.0"
