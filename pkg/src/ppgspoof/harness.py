"""Synthetic cohort generation, attack protocols, and report emission.

The synthetic cohort replaces the (non-redistributable) real dataset: each
subject gets a two-Gaussian pulse shape and a heart rate, a clean PPG
pulse train at 65 Hz, and an rPPG counterpart at 35 Hz distorted by a
phase shift, an amplitude-warp exponent, and additive Gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np

from .auth import AuthModel, authenticate
from .beats import BeatCycle, FiducialFeatures, feature_matrix
from .errors import ParameterError
from .rppg import RgbTrace
from .signal_core import SignalLabel, WaveSignal, normalize_cycle

PPG_RATE_HZ = 65.0
RPPG_RATE_HZ = 35.0

ATTACK_KINDS = ("random", "rppg", "sigr", "mean_rppg", "mean_sigr")


@dataclass(frozen=True)
class SyntheticSubjectSpec:
    """Template for drawing per-subject pulse shapes and rPPG distortion."""

    duration_s: float = 60.0
    heart_rate_range_bpm: tuple = (62.0, 92.0)
    # pulse shape: systolic and diastolic Gaussian components, as
    # (amplitude, center, width) ranges in cycle-phase units
    amp1_range: tuple = (0.95, 1.05)
    center1_range: tuple = (0.26, 0.38)
    width1_range: tuple = (0.06, 0.11)
    amp2_range: tuple = (0.30, 0.60)
    center2_range: tuple = (0.60, 0.76)
    width2_range: tuple = (0.08, 0.14)
    # rPPG distortion
    phase_shift_s: float = 0.1
    smear_cycle_fraction: float = 0.05
    amp_warp_gamma: float = 2.0
    noise_sigma: float = 0.05
    rng_seed: int = 0

    def __post_init__(self):
        if self.width1_range[0] <= 0 or self.width2_range[0] <= 0:
            raise ParameterError("Gaussian widths must be positive")
        if self.duration_s <= 0:
            raise ParameterError("duration must be positive")


@dataclass(frozen=True)
class PulseParams:
    amp1: float
    center1: float
    width1: float
    amp2: float
    center2: float
    width2: float
    heart_rate_bpm: float


@dataclass(frozen=True)
class SyntheticSubject:
    subject_id: str
    params: PulseParams
    ppg: WaveSignal
    rppg: WaveSignal


def pulse_value(params: PulseParams, phase: np.ndarray) -> np.ndarray:
    """Two-Gaussian pulse shape evaluated at cycle phase in [0, 1)."""
    out = np.zeros_like(phase, dtype=np.float64)
    for amp, center, width in (
        (params.amp1, params.center1, params.width1),
        (params.amp2, params.center2, params.width2),
    ):
        d = np.abs(phase - center)
        d = np.minimum(d, 1.0 - d)  # periodic wrap
        out += amp * np.exp(-(d**2) / (2.0 * width**2))
    return out


def _draw(rng: np.random.Generator, lo_hi) -> float:
    return float(rng.uniform(*lo_hi))


def make_synthetic_cohort(n_subjects: int, spec: SyntheticSubjectSpec) -> list[SyntheticSubject]:
    """Draw subject-distinct pulse parameters and synthesize paired signals."""
    if n_subjects < 2:
        raise ParameterError("need at least 2 subjects")
    rng = np.random.default_rng(spec.rng_seed)
    subjects = []
    for k in range(n_subjects):
        params = PulseParams(
            amp1=_draw(rng, spec.amp1_range),
            center1=_draw(rng, spec.center1_range),
            width1=_draw(rng, spec.width1_range),
            amp2=_draw(rng, spec.amp2_range),
            center2=_draw(rng, spec.center2_range),
            width2=_draw(rng, spec.width2_range),
            heart_rate_bpm=_draw(rng, spec.heart_rate_range_bpm),
        )
        noise_rng = np.random.default_rng(rng.integers(2**63))
        ppg = synthesize_ppg(params, spec.duration_s, PPG_RATE_HZ)
        rppg = synthesize_rppg(params, spec, noise_rng)
        subjects.append(SyntheticSubject(f"s{k:02d}", params, ppg, rppg))
    return subjects


def synthesize_ppg(params: PulseParams, duration_s: float,
                   rate_hz: float = PPG_RATE_HZ) -> WaveSignal:
    t = np.arange(int(round(duration_s * rate_hz))) / rate_hz
    phase = np.mod(t * params.heart_rate_bpm / 60.0, 1.0)
    return WaveSignal(pulse_value(params, phase), rate_hz, SignalLabel.PPG)


def synthesize_rppg(params: PulseParams, spec: SyntheticSubjectSpec,
                    rng: np.random.Generator, rate_hz: float = RPPG_RATE_HZ) -> WaveSignal:
    t = np.arange(int(round(spec.duration_s * rate_hz))) / rate_hz
    phase = np.mod((t - spec.phase_shift_s) * params.heart_rate_bpm / 60.0, 1.0)
    clean = pulse_value(params, phase)
    if spec.smear_cycle_fraction > 0:
        # temporal smear: remote measurement blurs the pulse waveform; the
        # width scales with the cardiac period so the blur is a fixed
        # fraction of every cycle
        from scipy.ndimage import gaussian_filter1d

        period_samples = rate_hz * 60.0 / params.heart_rate_bpm
        clean = gaussian_filter1d(
            clean, spec.smear_cycle_fraction * period_samples, mode="wrap")
    lo, hi = clean.min(), clean.max()
    span = max(hi - lo, 1e-12)
    warped = lo + span * ((clean - lo) / span) ** spec.amp_warp_gamma
    noisy = warped + spec.noise_sigma * span * rng.standard_normal(t.size)
    return WaveSignal(noisy, rate_hz, SignalLabel.RPPG)


def trace_from_rppg(rppg: WaveSignal, base_rgb=(120.0, 95.0, 80.0),
                    modulation_depth: float = 0.02,
                    sensor_noise_counts: float = 0.0,
                    noise_rng: Optional[np.random.Generator] = None) -> RgbTrace:
    """Embed an rPPG waveform as a green-channel modulation of an RGB trace.

    Blood-volume polarity: higher signal -> lower green reflectance, so
    CHROM recovers the waveform with positive sign. `sensor_noise_counts`
    adds white per-frame Gaussian noise on every channel (camera shot /
    read noise, in count units).
    """
    x = np.asarray(rppg.samples)
    span = max(x.max() - x.min(), 1e-12)
    unit = 2.0 * (x - x.min()) / span - 1.0  # [-1, 1]
    n = x.size
    frames = np.empty((n, 3))
    frames[:, 0] = base_rgb[0]
    frames[:, 1] = base_rgb[1] * (1.0 - modulation_depth * unit)
    frames[:, 2] = base_rgb[2]
    if sensor_noise_counts > 0:
        if noise_rng is None:
            raise ParameterError("sensor noise requires a noise_rng")
        frames = np.maximum(
            frames + noise_rng.normal(0.0, sensor_noise_counts, frames.shape), 0.0)
    counts = np.full(n, 10_000, dtype=np.int64)
    return RgbTrace(frames, rppg.sample_rate_hz, counts)


# --- attack protocols ---


def run_attack(auth: AuthModel, cycles: Sequence[BeatCycle], kind: str) -> float:
    """FAR of an attack cycle set against a calibrated authenticator.

    ``single``: every cycle is a probe; FAR is the accepted fraction.
    ``mean``: cycles are pointwise averaged into one probe; FAR is 0 or 1.
    """
    if not cycles:
        raise ParameterError("empty attack set")
    if kind == "single":
        accepts = [authenticate(auth, c)[1] for c in cycles]
        return float(np.mean(accepts))
    if kind == "mean":
        averaged = np.mean([c.samples for c in cycles], axis=0)
        probe = BeatCycle(normalize_cycle(averaged), cycles[0].source_label,
                          cycles[0].subject_id, 0)
        return float(authenticate(auth, probe)[1])
    raise ParameterError(f"unknown attack kind {kind!r}")


@dataclass
class AttackReport:
    victims: list
    far: dict  # kind -> list of per-victim FARs, aligned with `victims`
    ks_rppg: dict  # feature name -> cohort-mean KS (raw rPPG vs reference PPG)
    ks_sigr: dict  # feature name -> cohort-mean KS (restored vs reference PPG)
    pearson_raw: list  # per-victim mean Pearson(rppg cycle, paired ppg cycle)
    pearson_restored: list
    eers: list  # per-victim calibrated EER
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.victims:
            raise ParameterError("report needs at least one victim")
        for kind, vals in self.far.items():
            if len(vals) != len(self.victims):
                raise ParameterError(f"FAR list for {kind!r} misaligned with victims")
            if any(not (0 <= v <= 1) for v in vals):
                raise ParameterError(f"FAR out of [0,1] for {kind!r}")

    def mean_far(self, kind: str) -> float:
        return float(np.mean(self.far[kind]))


def emit_report(report: AttackReport, out_dir) -> None:
    """Write report.csv, report.txt, and manifest.txt deterministically."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    kinds = [k for k in ATTACK_KINDS if k in report.far]

    csv_path = os.path.join(out_dir, "report.csv")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("victim," + ",".join(f"far_{k}" for k in kinds)
                 + ",pearson_raw,pearson_restored,eer\n")
        for i, victim in enumerate(report.victims):
            fars = ",".join(f"{report.far[k][i]:.12g}" for k in kinds)
            fh.write(f"{victim},{fars},{report.pearson_raw[i]:.12g},"
                     f"{report.pearson_restored[i]:.12g},{report.eers[i]:.12g}\n")
        mean_fars = ",".join(f"{report.mean_far(k):.12g}" for k in kinds)
        fh.write(f"MEAN,{mean_fars},{np.mean(report.pearson_raw):.12g},"
                 f"{np.mean(report.pearson_restored):.12g},{np.mean(report.eers):.12g}\n")

    txt_path = os.path.join(out_dir, "report.txt")
    with open(txt_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("Spoofing attack report (synthetic cohort)\n")
        fh.write("=" * 42 + "\n\n")
        fh.write(f"victims: {len(report.victims)}\n")
        fh.write(f"mean calibrated EER: {np.mean(report.eers):.4f}\n\n")
        fh.write("mean FAR by attack kind (single-cycle probes score each cycle;\n"
                 "mean-signal probes average all cycles into one attempt):\n")
        for k in kinds:
            fh.write(f"  {k:10s} {report.mean_far(k):.4f}\n")
        fh.write("\nmean Pearson vs reference PPG cycles:\n")
        fh.write(f"  raw rPPG   {np.mean(report.pearson_raw):.4f}\n")
        fh.write(f"  restored   {np.mean(report.pearson_restored):.4f}\n")
        fh.write("\ncohort-mean KS per feature (lower = closer to reference):\n")
        fh.write("  feature        rPPG     restored\n")
        for name in FiducialFeatures.FIELDS:
            if name in report.ks_rppg:
                fh.write(f"  {name:12s} {report.ks_rppg[name]:.4f}   "
                         f"{report.ks_sigr[name]:.4f}\n")
        fh.write("\nnote: single-cycle vs mean-signal row semantics follow the\n"
                 "averaged-probe interpretation recorded in the project docs.\n")

    manifest_path = os.path.join(out_dir, "manifest.txt")
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
        for key in sorted(report.metadata):
            fh.write(f"{key}={report.metadata[key]}\n")


def ks_feature_table(reference: Sequence[BeatCycle],
                     candidate: Sequence[BeatCycle]) -> dict:
    """Per-feature KS statistic between two cycle populations."""
    from .metrics import ks_statistic

    ref_mat, _ = feature_matrix(reference)
    cand_mat, _ = feature_matrix(candidate)
    out = {}
    for j, name in enumerate(FiducialFeatures.FIELDS):
        if ref_mat.shape[0] == 0 or cand_mat.shape[0] == 0:
            out[name] = float("nan")
        else:
            out[name] = ks_statistic(ref_mat[:, j], cand_mat[:, j])
    return out
