"""SigR: conv-GAN restoration of rPPG cycles toward reference PPG cycles.

The generator is a four-layer Conv1D translator; the critic is a small
conv/maxpool network trained with the Wasserstein objective plus a
gradient penalty on interpolated samples. Because an adversarial-only
translator cannot target a specific waveform, the generator loss also
carries a paired L1 reconstruction term.

Inference composes the trained generator, Savitzky-Golay smoothing, and
pointwise averaging across the available cycles.

Cycles are phase-canonicalized around the generator: valley-to-valley
segmentation places the systolic peak at a slightly different index in
every cycle, and that cut jitter would otherwise dominate the pairing
error during training and blur any averaged probe. Training rolls both
sides of each pair so the peak sits at a fixed index; inference rolls the
input to the same canonical phase, restores, and rolls the output to the
ensemble's typical peak position.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np

from . import nn
from .beats import CYCLE_LEN, BeatCycle
from .containers import SIGR_MAGIC, load_container, save_container
from .errors import ParameterError, TrainingError
from .signal_core import SavGolSpec, SignalLabel, normalize_cycle, savgol_smooth

GEN_CHANNELS = (1, 32, 64, 32, 1)
KERNEL_LEN = 7

CANONICAL_PEAK = CYCLE_LEN // 2
_PEAK_SMOOTH_SIGMA = 1.5


def _peak_index(samples: np.ndarray) -> int:
    """Systolic-peak sample index, robust to high-frequency noise."""
    from scipy.ndimage import gaussian_filter1d

    smoothed = gaussian_filter1d(np.asarray(samples, dtype=np.float64),
                                 _PEAK_SMOOTH_SIGMA, mode="wrap")
    return int(np.argmax(smoothed))


def _circ_align_shift(x: np.ndarray, ref: np.ndarray) -> int:
    """Circular shift s maximizing correlation of np.roll(x, s) with ref.

    Whole-waveform correlation is robust where a bare argmax would flip
    between the systolic and dicrotic peaks on noisy cycles.
    """
    corr = np.fft.irfft(np.fft.rfft(ref) * np.conj(np.fft.rfft(x)), n=len(x))
    return int(np.argmax(corr))


def canonical_shifts(arrays: Sequence[np.ndarray], passes: int = 3) -> list[int]:
    """Per-cycle circular shifts into the canonical frame.

    Cycles are mutually aligned against their iteratively re-estimated
    ensemble mean, then the whole set is rolled so the mean's systolic
    peak lands on CANONICAL_PEAK.
    """
    arrs = [np.asarray(a, dtype=np.float64) for a in arrays]
    shifts = [0] * len(arrs)
    ref = np.mean(arrs, axis=0)
    for _ in range(passes):
        shifts = [_circ_align_shift(a, ref) for a in arrs]
        ref = np.mean([np.roll(a, s) for a, s in zip(arrs, shifts)], axis=0)
    d = CANONICAL_PEAK - _peak_index(ref)
    return [s + d for s in shifts]


def canonicalize(samples: np.ndarray) -> tuple[np.ndarray, int]:
    """Circularly roll a cycle so its systolic peak sits at CANONICAL_PEAK.

    Returns the rolled samples and the applied shift.
    """
    shift = CANONICAL_PEAK - _peak_index(samples)
    return np.roll(samples, shift), shift


@dataclass
class TrainSpec:
    gp_lambda: float = 10.0
    rec_lambda: float = 50.0
    critic_steps_per_gen_step: int = 5
    learning_rate: float = 1e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.9
    batch_size: int = 32
    epochs: int = 30
    # train-time corruption of the distorted inputs (smooth band-limited
    # noise), so restoration quality is insensitive to the measurement
    # noise level of the capture
    input_noise_sigma: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.gp_lambda < 0 or self.rec_lambda < 0:
            raise ParameterError("loss weights must be nonnegative")
        if self.critic_steps_per_gen_step < 1 or self.batch_size < 1 or self.epochs < 1:
            raise ParameterError("counts must be positive")
        if not (self.learning_rate > 0):
            raise ParameterError("learning_rate must be positive")
        if self.input_noise_sigma < 0:
            raise ParameterError("input_noise_sigma must be nonnegative")
        for beta in (self.adam_beta1, self.adam_beta2):
            if not (0 <= beta < 1):
                raise ParameterError("Adam betas must lie in [0, 1)")


def build_generator(rng: np.random.Generator) -> nn.Sequential:
    layers = []
    for k in range(4):
        act = "leaky_relu" if k < 3 else "linear"
        layers.append(nn.Conv1d(GEN_CHANNELS[k], GEN_CHANNELS[k + 1], KERNEL_LEN, act, rng))
    return nn.Sequential(layers)


def build_critic(rng: np.random.Generator) -> nn.Sequential:
    return nn.Sequential([
        nn.Conv1d(1, 32, KERNEL_LEN, "leaky_relu", rng),
        nn.MaxPool1d(2),
        nn.Conv1d(32, 64, KERNEL_LEN, "leaky_relu", rng),
        nn.MaxPool1d(2),
        nn.Flatten(),
        nn.Affine(64 * (CYCLE_LEN // 4), 1, rng),
    ])


def identity_generator() -> nn.Sequential:
    """Generator whose composition is the identity map (center-spike kernels)."""
    gen = build_generator(np.random.default_rng(0))
    center = KERNEL_LEN // 2
    for layer in gen.layers:
        layer.w.fill(0.0)
        layer.b.fill(0.0)
        layer.w[0, 0, center] = 1.0
    return gen


@dataclass
class SigrModel:
    generator: nn.Sequential
    critic: nn.Sequential
    spec: TrainSpec
    history: list = field(default_factory=list)  # (step, critic_loss, gen_loss, gp, rec_l1)

    def parameter_arrays(self):
        arrays = [p for p, _ in self.generator.params()]
        arrays += [p for p, _ in self.critic.params()]
        return arrays


def gradient_penalty(critic, real: np.ndarray, fake: np.ndarray,
                     rng: np.random.Generator) -> float:
    """Mean squared deviation of the critic's input-gradient norm from 1
    at per-sample random interpolates of real and fake batches."""
    if real.shape != fake.shape:
        raise ParameterError("real and fake batches must share a shape")
    eps = rng.uniform(size=(real.shape[0],) + (1,) * (real.ndim - 1))
    mixed = eps * real + (1.0 - eps) * fake
    grads = _critic_input_grads(critic, mixed)
    norms = np.sqrt((grads**2).sum(axis=tuple(range(1, grads.ndim))))
    return float(np.mean((norms - 1.0) ** 2))


def _critic_input_grads(critic, batch: np.ndarray) -> np.ndarray:
    scores = critic.forward(batch)
    return critic.backward(np.ones_like(scores), accumulate=False)


def _accumulate_gp_grads(critic, mixed: np.ndarray, gp_lambda: float) -> float:
    """Accumulate d(gp_lambda * penalty)/d(params) into the critic's grad
    buffers via the linearized (JVP) passes; returns the penalty value."""
    grads = _critic_input_grads(critic, mixed)
    norms = np.sqrt((grads**2).sum(axis=tuple(range(1, grads.ndim))))
    batch = mixed.shape[0]
    penalty = float(np.mean((norms - 1.0) ** 2))
    safe = np.maximum(norms, 1e-12)
    coef = gp_lambda * 2.0 * (norms - 1.0) / safe / batch  # d penalty / d (g.g)^(1/2) chain
    critic.forward_lin(grads)
    critic.backward_lin(coef[:, None])
    return penalty


def train_sigr(pairs: Sequence[tuple[BeatCycle, BeatCycle]], spec: TrainSpec) -> SigrModel:
    """Train the restoration model on aligned (rppg, ppg) cycle pairs.

    Deterministic for a fixed ``spec.rng_seed``; returns the model with a
    per-step loss history.
    """
    if len(pairs) < spec.batch_size:
        raise ParameterError("need at least batch_size cycle pairs")
    y_shifts = canonical_shifts([p[1].samples for p in pairs])
    y_canon = [np.roll(p[1].samples, s) for p, s in zip(pairs, y_shifts)]
    # inputs are aligned to their own clean target, not independently:
    # the distorted waveform's peak is unreliable, the pairing is not
    x_canon = [np.roll(p[0].samples, _circ_align_shift(p[0].samples, yc))
               for p, yc in zip(pairs, y_canon)]
    x = np.stack(x_canon)[:, None, :]
    y = np.stack(y_canon)[:, None, :]
    rng = np.random.default_rng(spec.rng_seed)

    def _corrupt(xb: np.ndarray) -> np.ndarray:
        if spec.input_noise_sigma <= 0:
            return xb
        from scipy.ndimage import gaussian_filter1d

        out = np.empty_like(xb)
        full = np.arange(xb.shape[2], dtype=np.float64)
        for k in range(xb.shape[0]):
            v = xb[k, 0]
            # resolution loss: the cycle as sampled by a slower capture
            m = int(rng.integers(13, xb.shape[2] + 1))
            if m < xb.shape[2]:
                coarse = np.linspace(0.0, full[-1], m)
                v = np.interp(full, coarse, np.interp(coarse, full, v))
            level = spec.input_noise_sigma * rng.uniform(0.0, 1.5)
            wiggle = gaussian_filter1d(rng.standard_normal(v.size), 2.0, mode="wrap")
            wiggle /= max(np.std(wiggle), 1e-12)
            v = v + level * wiggle
            lo, hi = v.min(), v.max()
            out[k, 0] = (v - lo) / max(hi - lo, 1e-12)
        return out

    gen = build_generator(rng)
    critic = build_critic(rng)
    opt_g = nn.Adam(gen.params(), spec.learning_rate, spec.adam_beta1, spec.adam_beta2)
    opt_c = nn.Adam(critic.params(), spec.learning_rate, spec.adam_beta1, spec.adam_beta2)

    n = x.shape[0]
    steps_per_epoch = max(1, n // spec.batch_size)
    history = []
    step = 0
    for _epoch in range(spec.epochs):
        for _ in range(steps_per_epoch):
            critic_loss = gp_val = 0.0
            for _ in range(spec.critic_steps_per_gen_step):
                idx = rng.choice(n, size=spec.batch_size, replace=False)
                real = y[idx]
                fake = gen.forward(_corrupt(x[idx]))
                critic.zero_grads()
                s_real = critic.forward(real)
                critic.backward(np.full_like(s_real, -1.0 / spec.batch_size))
                s_fake = critic.forward(fake)
                critic.backward(np.full_like(s_fake, 1.0 / spec.batch_size))
                eps = rng.uniform(size=(spec.batch_size, 1, 1))
                mixed = eps * real + (1.0 - eps) * fake
                gp_val = _accumulate_gp_grads(critic, mixed, spec.gp_lambda)
                opt_c.step()
                critic_loss = float(s_fake.mean() - s_real.mean() + spec.gp_lambda * gp_val)

            idx = rng.choice(n, size=spec.batch_size, replace=False)
            xb, yb = _corrupt(x[idx]), y[idx]
            fake = gen.forward(xb)
            s_fake = critic.forward(fake)
            g_adv = critic.backward(np.full_like(s_fake, -1.0 / spec.batch_size),
                                    accumulate=False)
            diff = fake - yb
            rec_l1 = float(np.abs(diff).mean())
            g_rec = spec.rec_lambda * np.sign(diff) / diff.size
            gen.zero_grads()
            gen.backward(g_adv + g_rec)
            opt_g.step()
            gen_loss = float(-s_fake.mean() + spec.rec_lambda * rec_l1)

            if not (np.isfinite(critic_loss) and np.isfinite(gen_loss)):
                raise TrainingError(
                    f"non-finite loss at step {step}: critic={critic_loss}, gen={gen_loss}")
            history.append((step, critic_loss, gen_loss, gp_val, rec_l1))
            step += 1

    return SigrModel(gen, critic, spec, history)


def generate(model_or_gen, cycle_samples: np.ndarray) -> np.ndarray:
    """Run one normalized cycle through the generator."""
    gen = model_or_gen.generator if isinstance(model_or_gen, SigrModel) else model_or_gen
    return gen.forward(np.asarray(cycle_samples, dtype=np.float64)[None, None, :])[0, 0]


def _valley_roll(samples: np.ndarray) -> np.ndarray:
    """Rotate a clean cycle so its valley sits at sample 0, the same cut
    convention beat segmentation produces. Placing restored cycles by
    their own valley keeps the presentation phase independent of the
    capture's segmentation jitter."""
    from scipy.ndimage import gaussian_filter1d

    smooth = gaussian_filter1d(samples, _PEAK_SMOOTH_SIGMA, mode="wrap")
    return np.roll(samples, -int(np.argmin(smooth)))


def restore(model: SigrModel, cycles: Sequence[BeatCycle],
            savgol: SavGolSpec = SavGolSpec(9, 3)) -> BeatCycle:
    """Generator -> Savitzky-Golay -> cycle averaging -> renormalization."""
    if not cycles:
        raise ParameterError("need at least one cycle to restore")
    shifts = canonical_shifts([c.samples for c in cycles])
    outputs = [generate(model, np.roll(cyc.samples, s))
               for cyc, s in zip(cycles, shifts)]
    averaged = _valley_roll(np.mean(outputs, axis=0))
    return BeatCycle(
        normalize_cycle(savgol_smooth(averaged, savgol)),
        SignalLabel.RESTORED,
        cycles[0].subject_id,
        0,
    )


def restore_each(model: SigrModel, cycles: Sequence[BeatCycle],
                 savgol: SavGolSpec = SavGolSpec(9, 3)) -> list[BeatCycle]:
    """Single-cycle restoration (no averaging), preserving cycle indices."""
    if not cycles:
        return []
    shifts = canonical_shifts([c.samples for c in cycles])
    out = []
    for cyc, s in zip(cycles, shifts):
        raw = _valley_roll(generate(model, np.roll(cyc.samples, s)))
        raw = savgol_smooth(raw, savgol)
        out.append(BeatCycle(normalize_cycle(raw), SignalLabel.RESTORED,
                             cyc.subject_id, cyc.cycle_index))
    return out


# --- persistence ---


def save_sigr(path, model: SigrModel) -> None:
    meta = {f"spec.{k}": v for k, v in asdict(model.spec).items()}
    save_container(path, SIGR_MAGIC, model.parameter_arrays(), meta)


def load_sigr(path) -> SigrModel:
    arrays, meta = load_container(path, SIGR_MAGIC)
    raw = {k[len("spec."):]: v for k, v in meta.items() if k.startswith("spec.")}
    spec = TrainSpec(
        gp_lambda=float(raw["gp_lambda"]),
        rec_lambda=float(raw["rec_lambda"]),
        critic_steps_per_gen_step=int(raw["critic_steps_per_gen_step"]),
        learning_rate=float(raw["learning_rate"]),
        adam_beta1=float(raw["adam_beta1"]),
        adam_beta2=float(raw["adam_beta2"]),
        batch_size=int(raw["batch_size"]),
        epochs=int(raw["epochs"]),
        input_noise_sigma=float(raw.get("input_noise_sigma", 0.0)),
        rng_seed=int(raw["rng_seed"]),
    )
    rng = np.random.default_rng(spec.rng_seed)
    gen = build_generator(rng)
    critic = build_critic(rng)
    model = SigrModel(gen, critic, spec)
    targets = model.parameter_arrays()
    if len(arrays) != len(targets):
        raise ParameterError(f"{path}: parameter count mismatch")
    for dst, src in zip(targets, arrays):
        if dst.shape != src.shape:
            raise ParameterError(f"{path}: parameter shape mismatch")
        dst[...] = src
    return model


def write_loss_history_csv(path, history) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,critic_loss,gen_loss,gp,rec_l1\n")
        for step, cl, gl, gp, rec in history:
            fh.write(f"{step},{cl:.12g},{gl:.12g},{gp:.12g},{rec:.12g}\n")
