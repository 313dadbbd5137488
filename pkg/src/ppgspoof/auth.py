"""Per-victim binary authenticator over single cycles (conv stack + LSTM +
sigmoid head) with EER-targeted threshold calibration.

Calibration can deliberately detune a too-strong model to a desired
operating point by mixing deterministic Gaussian noise into the score
logits; the noise realization for a cycle is derived from the cycle's
bytes, keeping ``authenticate`` a pure function.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import nn
from .beats import CYCLE_LEN, BeatCycle
from .containers import AUTH_MAGIC, load_container, save_container
from .errors import CalibrationError, ParameterError, TrainingError, UsageError
from .metrics import far_frr_eer

AUTH_KERNEL = 5
LSTM_HIDDEN = 32


@dataclass
class AuthModel:
    conv_stack: nn.Sequential  # two conv+pool blocks, (B,1,64) -> (B,32,16)
    recurrent: nn.Lstm
    head: nn.Affine
    threshold: Optional[float] = None
    noise_sigma: float = 0.0
    noise_seed: int = 0
    achieved_eer: Optional[float] = None

    def params(self):
        return self.conv_stack.params() + self.recurrent.params() + self.head.params()

    def parameter_arrays(self):
        return [p for p, _ in self.params()]

    def logits(self, batch: np.ndarray) -> np.ndarray:
        feat = self.conv_stack.forward(batch)  # (B, C, T)
        h = self.recurrent.forward(np.transpose(feat, (0, 2, 1)))
        return self.head.forward(h)[:, 0]

    def score_cycles(self, cycles: Sequence[BeatCycle]) -> np.ndarray:
        """Sigmoid scores with the calibrated detuning noise applied."""
        batch = np.stack([c.samples for c in cycles])[:, None, :]
        z = self.logits(batch)
        if self.noise_sigma > 0:
            z = z + self.noise_sigma * np.array(
                [_cycle_noise_unit(self.noise_seed, c) for c in cycles])
        return nn.sigmoid(z)


def build_auth_net(rng: np.random.Generator):
    conv = nn.Sequential([
        nn.Conv1d(1, 16, AUTH_KERNEL, "leaky_relu", rng),
        nn.MaxPool1d(2),
        nn.Conv1d(16, 32, AUTH_KERNEL, "leaky_relu", rng),
        nn.MaxPool1d(2),
    ])
    recurrent = nn.Lstm(32, LSTM_HIDDEN, rng)
    head = nn.Affine(LSTM_HIDDEN, 1, rng)
    return conv, recurrent, head


def _cycle_noise_unit(seed: int, cycle: BeatCycle) -> float:
    """Deterministic standard-normal draw keyed by (seed, cycle content)."""
    digest = hashlib.sha256()
    digest.update(str(seed).encode())
    digest.update(cycle.samples.tobytes())
    sub_seed = int.from_bytes(digest.digest()[:8], "little")
    return float(np.random.default_rng(sub_seed).standard_normal())


@dataclass(frozen=True)
class AuthDataset:
    """Victim (label 1) vs. other-user (label 0) cycles with a seeded split."""

    victim_train: tuple
    victim_test: tuple
    other_train: tuple
    other_test: tuple

    @staticmethod
    def split(victim_cycles: Sequence[BeatCycle], other_cycles: Sequence[BeatCycle],
              test_fraction: float = 0.3, seed: int = 0) -> "AuthDataset":
        if not victim_cycles or not other_cycles:
            raise ParameterError("both classes must be nonempty")
        rng = np.random.default_rng(seed)

        def _split(items):
            idx = rng.permutation(len(items))
            n_test = max(1, int(round(test_fraction * len(items))))
            test = tuple(items[i] for i in idx[:n_test])
            train = tuple(items[i] for i in idx[n_test:])
            return train, test

        v_train, v_test = _split(list(victim_cycles))
        o_train, o_test = _split(list(other_cycles))
        if not v_train or not o_train:
            raise ParameterError("split left a training class empty")
        return AuthDataset(v_train, v_test, o_train, o_test)


def _augment_batch(xb: np.ndarray, sigma: float, blur_max: float,
                   rng: np.random.Generator) -> np.ndarray:
    """Distortion-family augmentation: per-example Gaussian blur, amplitude
    gamma-warp, and additive noise, re-normalized to [0, 1].

    Training under the same smooth distortion family that degrades remote
    measurements makes the decision invariant to it, so scores track the
    underlying cycle shape rather than arbitrary off-manifold directions.
    """
    from scipy.ndimage import gaussian_filter1d

    out = np.empty_like(xb)
    for k in range(xb.shape[0]):
        x = xb[k, 0]
        width = rng.uniform(0.0, blur_max)
        if width > 1e-3:
            x = gaussian_filter1d(x, width, mode="nearest")
        gamma = float(np.exp(rng.uniform(-np.log(1.3), np.log(1.3))))
        lo, hi = x.min(), x.max()
        span = max(hi - lo, 1e-12)
        x = ((x - lo) / span) ** gamma
        x = x + sigma * rng.standard_normal(x.size)
        lo, hi = x.min(), x.max()
        out[k, 0] = (x - lo) / max(hi - lo, 1e-12)
    return out


def _degraded_negatives(victim_x: np.ndarray, sigma: float,
                        rng: np.random.Generator) -> np.ndarray:
    """Noise-corrupted copies of the victim's own cycles, used as reject
    examples so the score decreases as a probe gets noisier instead of
    responding arbitrarily to off-manifold perturbations.

    The corruption is smooth (band-limited) noise, matching the character
    of in-band measurement noise after cycle resampling."""
    from scipy.ndimage import gaussian_filter1d

    out = np.empty_like(victim_x)
    for k in range(victim_x.shape[0]):
        x = victim_x[k, 0]
        level = sigma * rng.uniform(0.5, 1.5)
        wiggle = gaussian_filter1d(rng.standard_normal(x.size), 2.0, mode="wrap")
        wiggle /= max(np.std(wiggle), 1e-12)
        x = x + level * wiggle
        lo, hi = x.min(), x.max()
        out[k, 0] = (x - lo) / max(hi - lo, 1e-12)
    return out


def train_auth(data: AuthDataset, epochs: int = 40, lr: float = 3e-3,
               seed: int = 0, batch_size: int = 32,
               augment_sigma: float = 0.0, augment_blur_max: float = 0.0,
               hard_negative_sigma: float = 0.0) -> AuthModel:
    """Fit the CNN-LSTM scorer with class-weighted binary cross-entropy.

    Nonzero ``augment_sigma``/``augment_blur_max`` enable per-batch
    distortion augmentation (see ``_augment_batch``). Nonzero
    ``hard_negative_sigma`` adds degraded copies of the victim's cycles
    as reject examples (see ``_degraded_negatives``)."""
    cycles = list(data.victim_train) + list(data.other_train)
    labels = np.array([1.0] * len(data.victim_train) + [0.0] * len(data.other_train))
    if labels.min() == labels.max():
        raise ParameterError("training data must contain both classes")
    x = np.stack([c.samples for c in cycles])[:, None, :]
    if hard_negative_sigma > 0:
        neg_rng = np.random.default_rng(seed + 1)
        victim_x = x[: len(data.victim_train)]
        x = np.concatenate([x, _degraded_negatives(victim_x, hard_negative_sigma, neg_rng)])
        labels = np.concatenate([labels, np.zeros(victim_x.shape[0])])

    rng = np.random.default_rng(seed)
    conv, recurrent, head = build_auth_net(rng)
    model = AuthModel(conv, recurrent, head)
    opt = nn.Adam(model.params(), lr=lr, beta1=0.9, beta2=0.999)

    n = x.shape[0]
    n_victim = labels.sum()
    weights = np.where(labels == 1.0, (n - n_victim) / n_victim, 1.0)
    batch_size = min(batch_size, n)
    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            xb, yb, wb = x[idx], labels[idx], weights[idx]
            if augment_sigma > 0 or augment_blur_max > 0:
                xb = _augment_batch(xb, augment_sigma, augment_blur_max, rng)
            feat = conv.forward(xb)
            h = recurrent.forward(np.transpose(feat, (0, 2, 1)))
            z = head.forward(h)[:, 0]
            p = nn.sigmoid(z)
            if not np.all(np.isfinite(p)):
                raise TrainingError("non-finite scores during training")
            # weighted BCE on logits: dL/dz = w * (p - y) / sum(w)
            gz = (wb * (p - yb) / wb.sum())[:, None]
            conv.zero_grads()
            recurrent.zero_grads()
            head.zero_grads()
            gh = head.backward(gz)
            gfeat = recurrent.backward(gh)
            conv.backward(np.transpose(gfeat, (0, 2, 1)))
            opt.step()
    return model


def calibrate(model: AuthModel, genuine_scores, impostor_scores,
              target_eer: float = 0.14, tolerance: float = 0.03,
              noise_seed: int = 0, max_iterations: int = 20) -> AuthModel:
    """Set the accept threshold at the FAR/FRR crossing, detuning with
    logit noise of increasing sigma until the EER is within tolerance of
    the target."""
    genuine = np.asarray(genuine_scores, dtype=np.float64)
    impostor = np.asarray(impostor_scores, dtype=np.float64)
    if genuine.size == 0 or impostor.size == 0:
        raise ParameterError("both score sets must be nonempty")

    g_logit = _logit(genuine)
    i_logit = _logit(impostor)
    rng = np.random.default_rng(noise_seed)
    # fixed unit-noise realizations so EER(sigma) is a deterministic,
    # near-monotone function we can bracket and bisect
    e_g = rng.standard_normal(g_logit.size)
    e_i = rng.standard_normal(i_logit.size)

    def evaluate(sigma):
        eer, thr, _ = far_frr_eer(nn.sigmoid(g_logit + sigma * e_g),
                                  nn.sigmoid(i_logit + sigma * e_i))
        return eer, thr

    def finish(sigma, eer, thr):
        model.threshold = float(thr)
        model.noise_sigma = float(sigma)
        model.noise_seed = noise_seed
        model.achieved_eer = float(eer)
        return model

    eer, thr = evaluate(0.0)
    achieved = eer
    if abs(eer - target_eer) <= tolerance:
        return finish(0.0, eer, thr)
    if eer > target_eer:
        # noise only pushes the EER toward 0.5; a too-weak model cannot
        # be detuned down to the target
        raise CalibrationError(
            f"model EER {eer:.4f} already above target {target_eer} +/- {tolerance}",
            achieved_eer=eer,
        )

    spread = max(float(np.std(np.concatenate([g_logit, i_logit]))), 0.1)
    lo, lo_eer = 0.0, eer
    sigma = spread * 0.25
    iterations = 1
    hi = hi_eer = None
    while iterations < max_iterations:
        eer, thr = evaluate(sigma)
        achieved = eer
        iterations += 1
        if abs(eer - target_eer) <= tolerance:
            return finish(sigma, eer, thr)
        if eer < target_eer:
            if hi is None:
                lo, lo_eer = sigma, eer
                sigma *= 2.0
                continue
            lo, lo_eer = sigma, eer
        else:
            hi, hi_eer = sigma, eer
        sigma = (lo + hi) / 2.0
    raise CalibrationError(
        f"could not reach EER {target_eer} +/- {tolerance}; achieved {achieved:.4f}",
        achieved_eer=achieved,
    )


def authenticate(model: AuthModel, cycle: BeatCycle) -> tuple[float, bool]:
    """Score one cycle; accept iff score >= threshold (inclusive boundary)."""
    if model.threshold is None:
        raise UsageError("model is not calibrated")
    score = float(model.score_cycles([cycle])[0])
    return score, score >= model.threshold


def _logit(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 1e-12, 1 - 1e-12)
    return np.log(p / (1.0 - p))


# --- persistence (same container as SigR, magic AUTH1) ---


def save_auth(path, model: AuthModel) -> None:
    meta = {
        "threshold": "" if model.threshold is None else repr(model.threshold),
        "noise_sigma": repr(model.noise_sigma),
        "noise_seed": model.noise_seed,
        "achieved_eer": "" if model.achieved_eer is None else repr(model.achieved_eer),
    }
    save_container(path, AUTH_MAGIC, model.parameter_arrays(), meta)


def load_auth(path) -> AuthModel:
    arrays, meta = load_container(path, AUTH_MAGIC)
    conv, recurrent, head = build_auth_net(np.random.default_rng(0))
    model = AuthModel(conv, recurrent, head)
    targets = model.parameter_arrays()
    if len(arrays) != len(targets):
        raise ParameterError(f"{path}: parameter count mismatch")
    for dst, src in zip(targets, arrays):
        dst[...] = src.reshape(dst.shape)
    model.threshold = float(meta["threshold"]) if meta.get("threshold") else None
    model.noise_sigma = float(meta.get("noise_sigma", "0") or 0.0)
    model.noise_seed = int(meta.get("noise_seed", "0") or 0)
    model.achieved_eer = float(meta["achieved_eer"]) if meta.get("achieved_eer") else None
    return model


def write_decision_log(path, model: AuthModel, cycles: Sequence[BeatCycle]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("subject_id,cycle_index,source_label,score,accept\n")
        for c in cycles:
            score, accept = authenticate(model, c)
            fh.write(f"{c.subject_id},{c.cycle_index},{c.source_label.value},"
                     f"{score:.12g},{int(accept)}\n")
