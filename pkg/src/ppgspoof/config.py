"""Pipeline configuration: one key=value file with section headers drives
every stage, and each run logs the hash of the resolved config."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields

from .errors import ParameterError
from .harness import SyntheticSubjectSpec
from .rppg import ChromSpec
from .signal_core import SavGolSpec
from .sigr import TrainSpec


@dataclass
class PipelineConfig:
    # paths
    traces_dir: str = "traces"
    waveforms_dir: str = "waveforms"
    cycles_dir: str = "cycles"
    models_dir: str = "models"
    reports_dir: str = "reports"
    # cohort
    n_subjects: int = 12
    duration_s: float = 60.0
    phase_shift_s: float = 0.1
    smear_cycle_fraction: float = 0.08
    # gamma < 1 broadens/flattens the pulse, mimicking the washed-out
    # waveform a camera recovers; frame-rate decimation then compounds the
    # distortion instead of partially undoing it
    amp_warp_gamma: float = 0.5
    noise_sigma: float = 0.05
    trace_modulation_depth: float = 0.02
    # white per-frame camera noise in count units; unlike the waveform
    # noise it lives at the frame rate, so lowering the frame rate folds
    # more of its power into the pulse band
    trace_noise_counts: float = 0.4
    # chrom
    chrom_window_seconds: float = 1.6
    chrom_overlap_fraction: float = 0.5
    band_low_hz: float = 0.7
    band_high_hz: float = 4.0
    # savgol
    savgol_window: int = 9
    savgol_order: int = 3
    # sigr
    sigr_gp_lambda: float = 10.0
    sigr_rec_lambda: float = 50.0
    sigr_critic_steps: int = 5
    sigr_learning_rate: float = 1e-4
    sigr_batch_size: int = 32
    sigr_epochs: int = 8
    sigr_input_noise: float = 0.1
    # auth
    auth_epochs: int = 40
    auth_learning_rate: float = 3e-3
    auth_augment_sigma: float = 0.05
    auth_augment_blur_max: float = 0.0
    auth_hard_negative_sigma: float = 0.2
    auth_test_fraction: float = 0.3
    other_train_fraction: float = 0.1
    target_eer: float = 0.14
    eer_tolerance: float = 0.03
    # attack / degradation study
    decimate_fps: float = 20.0
    # global
    rng_seed: int = 0

    def cohort_spec(self) -> SyntheticSubjectSpec:
        return SyntheticSubjectSpec(
            duration_s=self.duration_s,
            phase_shift_s=self.phase_shift_s,
            smear_cycle_fraction=self.smear_cycle_fraction,
            amp_warp_gamma=self.amp_warp_gamma,
            noise_sigma=self.noise_sigma,
            rng_seed=self.rng_seed,
        )

    def chrom_spec(self) -> ChromSpec:
        return ChromSpec(self.chrom_window_seconds, self.chrom_overlap_fraction)

    def savgol_spec(self) -> SavGolSpec:
        return SavGolSpec(self.savgol_window, self.savgol_order)

    def sigr_spec(self, seed: int | None = None) -> TrainSpec:
        return TrainSpec(
            gp_lambda=self.sigr_gp_lambda,
            rec_lambda=self.sigr_rec_lambda,
            critic_steps_per_gen_step=self.sigr_critic_steps,
            learning_rate=self.sigr_learning_rate,
            batch_size=self.sigr_batch_size,
            epochs=self.sigr_epochs,
            input_noise_sigma=self.sigr_input_noise,
            rng_seed=self.rng_seed if seed is None else seed,
        )


_SECTIONS = {
    "paths": ("traces_dir", "waveforms_dir", "cycles_dir", "models_dir", "reports_dir"),
    "cohort": ("n_subjects", "duration_s", "phase_shift_s", "smear_cycle_fraction",
               "amp_warp_gamma", "noise_sigma", "trace_modulation_depth",
               "trace_noise_counts"),
    "chrom": ("chrom_window_seconds", "chrom_overlap_fraction",
              "band_low_hz", "band_high_hz"),
    "savgol": ("savgol_window", "savgol_order"),
    "sigr": ("sigr_gp_lambda", "sigr_rec_lambda", "sigr_critic_steps",
             "sigr_learning_rate", "sigr_batch_size", "sigr_epochs",
             "sigr_input_noise"),
    "auth": ("auth_epochs", "auth_learning_rate", "auth_augment_sigma",
             "auth_augment_blur_max", "auth_hard_negative_sigma",
             "auth_test_fraction",
             "other_train_fraction", "target_eer", "eer_tolerance"),
    "attack": ("decimate_fps",),
    "global": ("rng_seed",),
}

_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _coerce(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def load_config(path) -> PipelineConfig:
    """Parse a sectioned key=value config file; unknown keys are rejected."""
    values = {}
    section = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1].strip()
                if section not in _SECTIONS:
                    raise ParameterError(f"{path}:{lineno}: unknown section [{section}]")
                continue
            key, sep, raw = line.partition("=")
            key = key.strip()
            if not sep:
                raise ParameterError(f"{path}:{lineno}: expected key=value")
            if section is None or key not in _SECTIONS[section]:
                raise ParameterError(f"{path}:{lineno}: unknown key '{key}'")
            values[key] = _coerce(key, raw.strip())
    return PipelineConfig(**values)


def save_config(path, cfg: PipelineConfig) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_config(cfg))


def serialize_config(cfg: PipelineConfig) -> str:
    lines = []
    for section, names in _SECTIONS.items():
        lines.append(f"[{section}]")
        for name in names:
            lines.append(f"{name}={getattr(cfg, name)}")
        lines.append("")
    return "\n".join(lines)


def config_hash(cfg: PipelineConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode("utf-8")).hexdigest()[:16]
