"""Synthetic cohort, attack protocols, and report emission."""

import numpy as np
import pytest

from ppgspoof.auth import AuthDataset, train_auth, authenticate
from ppgspoof.beats import BeatCycle, segment_beats
from ppgspoof.errors import ParameterError
from ppgspoof.harness import (
    ATTACK_KINDS,
    AttackReport,
    PulseParams,
    SyntheticSubjectSpec,
    emit_report,
    ks_feature_table,
    make_synthetic_cohort,
    pulse_value,
    run_attack,
    synthesize_ppg,
    synthesize_rppg,
    trace_from_rppg,
)
from ppgspoof.metrics import pearson
from ppgspoof.signal_core import SignalLabel, bandpass, normalize_cycle


def _segmented_pair(spec):
    """Per-subject (ppg cycles, rppg cycles) after band-pass segmentation."""
    out = []
    for subject in make_synthetic_cohort(4, spec):
        ppg = segment_beats(bandpass(subject.ppg, 0.7, 4.0), subject.subject_id)
        rppg = segment_beats(bandpass(subject.rppg, 0.7, 4.0), subject.subject_id)
        out.append((ppg, rppg))
    return out


def _mean_cycle(cycles):
    return np.mean([c.samples for c in cycles], axis=0)


class TestPulseValue:
    def test_periodic_wrap(self):
        p = PulseParams(1.0, 0.0, 0.08, 0.0, 0.65, 0.1, 75.0)
        lo = pulse_value(p, np.array([0.001]))
        hi = pulse_value(p, np.array([0.999]))
        assert lo[0] == pytest.approx(hi[0], rel=1e-6)

    def test_peak_at_center(self):
        p = PulseParams(1.0, 0.30, 0.08, 0.0, 0.65, 0.1, 75.0)
        phase = np.linspace(0, 1, 1000, endpoint=False)
        vals = pulse_value(p, phase)
        assert abs(phase[np.argmax(vals)] - 0.30) < 0.01
        assert vals.max() == pytest.approx(1.0, abs=1e-9)


class TestCohort:
    def test_deterministic(self):
        spec = SyntheticSubjectSpec(duration_s=10.0, rng_seed=4)
        a = make_synthetic_cohort(3, spec)
        b = make_synthetic_cohort(3, spec)
        for sa, sb in zip(a, b):
            assert sa.params == sb.params
            assert np.array_equal(sa.ppg.samples, sb.ppg.samples)
            assert np.array_equal(sa.rppg.samples, sb.rppg.samples)

    def test_subjects_distinct(self):
        spec = SyntheticSubjectSpec(duration_s=10.0)
        cohort = make_synthetic_cohort(4, spec)
        params = {s.params for s in cohort}
        assert len(params) == 4

    def test_too_few_subjects_rejected(self):
        with pytest.raises(ParameterError):
            make_synthetic_cohort(1, SyntheticSubjectSpec(duration_s=10.0))

    def test_labels_and_rates(self):
        spec = SyntheticSubjectSpec(duration_s=10.0)
        s = make_synthetic_cohort(2, spec)[0]
        assert s.ppg.label is SignalLabel.PPG
        assert s.rppg.label is SignalLabel.RPPG
        assert s.ppg.sample_rate_hz == 65.0
        assert s.rppg.sample_rate_hz == 35.0


class TestDistortion:
    def test_neutral_distortion_preserves_shape(self):
        spec = SyntheticSubjectSpec(duration_s=30.0, phase_shift_s=0.0,
                                    smear_cycle_fraction=0.0,
                                    amp_warp_gamma=1.0, noise_sigma=0.0)
        for ppg, rppg in _segmented_pair(spec):
            assert pearson(_mean_cycle(ppg), _mean_cycle(rppg)) > 0.995

    def test_default_distortion_degrades_but_correlates(self):
        spec = SyntheticSubjectSpec(duration_s=30.0)
        subject_means = []
        for ppg, rppg in _segmented_pair(spec):
            n = min(len(ppg), len(rppg))
            rs = [pearson(rppg[i].samples, ppg[i].samples) for i in range(n)]
            subject_means.append(float(np.mean(rs)))
        assert all(0.6 <= r <= 0.99 for r in subject_means)
        assert 0.7 <= float(np.mean(subject_means)) <= 0.97

    def test_noise_only_adds_noise(self):
        p = PulseParams(1.0, 0.30, 0.08, 0.4, 0.65, 0.1, 75.0)
        spec_clean = SyntheticSubjectSpec(duration_s=10.0, phase_shift_s=0.0,
                                          smear_cycle_fraction=0.0,
                                          amp_warp_gamma=1.0, noise_sigma=0.0)
        spec_noisy = SyntheticSubjectSpec(duration_s=10.0, phase_shift_s=0.0,
                                          smear_cycle_fraction=0.0,
                                          amp_warp_gamma=1.0, noise_sigma=0.05)
        clean = synthesize_rppg(p, spec_clean, np.random.default_rng(0))
        noisy = synthesize_rppg(p, spec_noisy, np.random.default_rng(0))
        resid = noisy.samples - clean.samples
        span = clean.samples.max() - clean.samples.min()
        assert 0.03 < np.std(resid) / span < 0.07
        assert abs(np.mean(resid)) / span < 0.01


class TestTraceEmbedding:
    def test_green_carries_signal_other_channels_flat(self):
        p = PulseParams(1.0, 0.30, 0.08, 0.4, 0.65, 0.1, 75.0)
        sig = synthesize_ppg(p, 10.0, 35.0)
        trace = trace_from_rppg(sig)
        assert np.ptp(trace.frames[:, 0]) == 0.0
        assert np.ptp(trace.frames[:, 2]) == 0.0
        assert np.ptp(trace.frames[:, 1]) > 0.0
        # blood-volume polarity: green reflectance anti-correlates with PPG
        assert pearson(trace.frames[:, 1], sig.samples) < -0.999


class TestRunAttack:
    @staticmethod
    def _model_and_cycles():
        rng = np.random.default_rng(0)
        phase = np.linspace(0, 1, 64, endpoint=False)

        def mk(peak, sid, idx):
            shape = np.exp(-((phase - peak) ** 2) / (2 * 0.08**2))
            return BeatCycle(normalize_cycle(shape + 0.03 * rng.normal(size=64)),
                             SignalLabel.PPG, sid, idx)

        victim = [mk(0.25, "v", i) for i in range(40)]
        other = [mk(0.45, "o", i) for i in range(40)]
        model = train_auth(AuthDataset.split(victim, other, seed=0),
                           epochs=30, seed=0)
        model.threshold = 0.5
        probes = [mk(0.25, "a", i) for i in range(15)] + [mk(0.45, "a", i)
                                                          for i in range(15, 25)]
        return model, probes

    def test_single_matches_per_cycle_count(self):
        model, probes = self._model_and_cycles()
        got = run_attack(model, probes, "single")
        want = sum(authenticate(model, c)[1] for c in probes) / len(probes)
        assert got == pytest.approx(want, abs=1e-12)

    def test_mean_matches_averaged_probe(self):
        model, probes = self._model_and_cycles()
        averaged = normalize_cycle(np.mean([c.samples for c in probes], axis=0))
        probe = BeatCycle(averaged, probes[0].source_label, "a", 0)
        want = float(authenticate(model, probe)[1])
        assert run_attack(model, probes, "mean") == want

    def test_empty_set_rejected(self):
        model, _ = self._model_and_cycles()
        with pytest.raises(ParameterError):
            run_attack(model, [], "single")

    def test_unknown_kind_rejected(self):
        model, probes = self._model_and_cycles()
        with pytest.raises(ParameterError):
            run_attack(model, probes, "median")


class TestKsFeatureTable:
    def test_identical_populations_zero(self):
        spec = SyntheticSubjectSpec(duration_s=30.0)
        subject = make_synthetic_cohort(2, spec)[0]
        cycles = segment_beats(bandpass(subject.ppg, 0.7, 4.0), "s")
        table = ks_feature_table(cycles, cycles)
        assert set(table) and all(v == 0.0 for v in table.values())


def _report(n=2):
    victims = [f"s{i:02d}" for i in range(n)]
    return AttackReport(
        victims=victims,
        far={k: [0.1 * (i + j)
                 for i in range(n)] for j, k in enumerate(ATTACK_KINDS)},
        ks_rppg={"sp_idx": 0.4},
        ks_sigr={"sp_idx": 0.2},
        pearson_raw=[0.8] * n,
        pearson_restored=[0.9] * n,
        eers=[0.14] * n,
        metadata={"rng_seed": 0},
    )


class TestAttackReport:
    def test_misaligned_far_rejected(self):
        with pytest.raises(ParameterError):
            AttackReport(victims=["a", "b"], far={"rppg": [0.5]},
                         ks_rppg={}, ks_sigr={}, pearson_raw=[0.8, 0.8],
                         pearson_restored=[0.9, 0.9], eers=[0.1, 0.1])

    def test_far_out_of_range_rejected(self):
        with pytest.raises(ParameterError):
            AttackReport(victims=["a"], far={"rppg": [1.5]},
                         ks_rppg={}, ks_sigr={}, pearson_raw=[0.8],
                         pearson_restored=[0.9], eers=[0.1])

    def test_no_victims_rejected(self):
        with pytest.raises(ParameterError):
            AttackReport(victims=[], far={}, ks_rppg={}, ks_sigr={},
                         pearson_raw=[], pearson_restored=[], eers=[])

    def test_mean_far(self):
        rep = _report(2)
        for k in ATTACK_KINDS:
            assert rep.mean_far(k) == pytest.approx(np.mean(rep.far[k]))


class TestEmitReport:
    def test_files_written_and_mean_row(self, tmp_path):
        rep = _report(2)
        emit_report(rep, tmp_path)
        csv_lines = (tmp_path / "report.csv").read_text().strip().split("\n")
        assert len(csv_lines) == 4  # header + 2 victims + MEAN
        mean_cells = csv_lines[-1].split(",")
        assert mean_cells[0] == "MEAN"
        for j, k in enumerate(ATTACK_KINDS):
            assert float(mean_cells[1 + j]) == pytest.approx(rep.mean_far(k))
        assert (tmp_path / "report.txt").exists()
        assert (tmp_path / "manifest.txt").read_text() == "rng_seed=0\n"

    def test_byte_identical_rewrite(self, tmp_path):
        rep = _report(3)
        d1, d2 = tmp_path / "a", tmp_path / "b"
        emit_report(rep, d1)
        emit_report(rep, d2)
        for name in ("report.csv", "report.txt", "manifest.txt"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()

    def test_single_victim_mean_row_equals_victim(self, tmp_path):
        rep = _report(1)
        emit_report(rep, tmp_path)
        lines = (tmp_path / "report.csv").read_text().strip().split("\n")
        assert lines[1].split(",")[1:] == lines[2].split(",")[1:]
