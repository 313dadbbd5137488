"""Command-line surface: one config file drives every stage, seeds are
explicit, and each command logs the resolved config hash before running.

Stages communicate exclusively through on-disk artifacts (trace CSVs,
waveform CSVs, cycle archives, model containers, report bundles), so any
stage can be rerun in isolation and reruns are byte-identical.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import click
import numpy as np

from .auth import calibrate, load_auth, save_auth, train_auth, write_decision_log
from .beats import read_cycle_archive, segment_beats, write_cycle_archive
from .config import PipelineConfig, config_hash, load_config
from .errors import DependencyError, ParameterError, PpgSpoofError
from .harness import run_attack
from .pipeline import (
    attack_victim,
    frame_rate_study,
    group_cycles,
    prepare_subjects,
    run_benchmark,
    train_victim_auth,
    train_victim_sigr,
    victim_seed,
)
from .rppg import read_trace_csv, write_trace_csv
from .signal_core import SignalLabel, bandpass, read_waveform_csv, write_waveform_csv
from .sigr import load_sigr, restore_each, save_sigr, train_sigr, write_loss_history_csv
from .harness import emit_report


def _load_cfg(config_path, seed) -> PipelineConfig:
    if config_path:
        if not os.path.exists(config_path):
            raise DependencyError(f"missing config file: {config_path}")
        cfg = load_config(config_path)
    else:
        cfg = PipelineConfig()
    if seed is not None:
        cfg.rng_seed = int(seed)
    return cfg


def _banner(cfg: PipelineConfig) -> None:
    click.echo(f"config_hash={config_hash(cfg)} seed={cfg.rng_seed}")


def _require(path, what: str) -> None:
    if not os.path.exists(path):
        raise DependencyError(f"missing {what}: {path}")


def _subject_from_stem(path) -> str:
    return Path(path).stem


def _check_stem_collisions(paths) -> None:
    seen = {}
    for p in paths:
        stem = _subject_from_stem(p)
        if stem in seen:
            raise ParameterError(
                f"subject id collision: {seen[stem]} and {p} share stem '{stem}'")
        seen[stem] = p


_CONFIG_OPT = click.option("--config", "config_path", type=str, default=None,
                           help="Sectioned key=value config file.")
_SEED_OPT = click.option("--seed", type=int, default=None,
                         help="Override the config's rng_seed.")


@click.group()
def main():
    """PPG spoofing-attack research pipeline (synthetic-cohort edition)."""


def _run(fn) -> None:
    """Execute a command body; map domain errors to one-line failures."""
    try:
        fn()
    except PpgSpoofError as exc:
        click.echo(f"error: kind={type(exc).__name__} msg={exc}", err=True)
        sys.exit(1)


@main.command()
@_CONFIG_OPT
@_SEED_OPT
@click.option("--out", "out_dir", type=str, default=".", help="Output directory.")
def synth(config_path, seed, out_dir):
    """Generate the synthetic cohort: RGB traces and reference PPG waveforms."""
    def body():
        cfg = _load_cfg(config_path, seed)
        _banner(cfg)
        traces = os.path.join(out_dir, cfg.traces_dir)
        waves = os.path.join(out_dir, cfg.waveforms_dir)
        os.makedirs(traces, exist_ok=True)
        os.makedirs(waves, exist_ok=True)
        for data in prepare_subjects(cfg):
            write_trace_csv(os.path.join(traces, f"{data.subject_id}.csv"), data.trace)
        from .harness import make_synthetic_cohort
        for subject in make_synthetic_cohort(cfg.n_subjects, cfg.cohort_spec()):
            write_waveform_csv(os.path.join(waves, f"{subject.subject_id}.csv"),
                               subject.ppg)
        click.echo(f"wrote {cfg.n_subjects} subjects to {traces} and {waves}")
    _run(body)


@main.command()
@_CONFIG_OPT
@_SEED_OPT
@click.option("--out", "out_dir", type=str, default="waveforms",
              help="Directory for extracted waveform CSVs.")
@click.argument("trace_files", nargs=-1, required=True)
def extract(config_path, seed, out_dir, trace_files):
    """Extract rPPG waveforms from RGB trace CSVs (CHROM + band-pass)."""
    def body():
        cfg = _load_cfg(config_path, seed)
        _banner(cfg)
        _check_stem_collisions(trace_files)
        os.makedirs(out_dir, exist_ok=True)
        failures = 0
        for path in trace_files:
            _require(path, "trace file")
            try:
                trace = read_trace_csv(path)
                from .pipeline import extract_rppg
                sig = extract_rppg(trace, cfg)
            except PpgSpoofError as exc:
                click.echo(f"error: file={path} kind={type(exc).__name__} msg={exc}",
                           err=True)
                failures += 1
                continue
            out_path = os.path.join(out_dir, f"{_subject_from_stem(path)}.csv")
            write_waveform_csv(out_path, sig)
            click.echo(f"extracted {path} -> {out_path}")
        if failures:
            sys.exit(1)
    _run(body)


@main.command()
@_CONFIG_OPT
@_SEED_OPT
@click.option("--out", "out_path", type=str, default="cycles.csv",
              help="Cycle archive CSV path.")
@click.option("--label", type=click.Choice([l.value for l in SignalLabel]),
              default=SignalLabel.RPPG.value, help="Label recorded on the cycles.")
@click.argument("waveform_files", nargs=-1, required=True)
def segment(config_path, seed, out_path, label, waveform_files):
    """Cut waveform CSVs into fixed-length cycles; subject id = file stem."""
    def body():
        cfg = _load_cfg(config_path, seed)
        _banner(cfg)
        _check_stem_collisions(waveform_files)
        cycles = []
        for path in waveform_files:
            _require(path, "waveform file")
            sig = read_waveform_csv(path, SignalLabel(label))
            if sig.duration_s < 3.0:
                click.echo(f"warning: {path}: shorter than 3 s, skipped", err=True)
                continue
            got = segment_beats(sig, _subject_from_stem(path))
            if not got:
                click.echo(f"warning: {path}: no cycles detected", err=True)
            cycles.extend(got)
        parent = os.path.dirname(out_path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        write_cycle_archive(out_path, cycles)
        click.echo(f"wrote {len(cycles)} cycles to {out_path}")
    _run(body)


@main.command("train-restore")
@_CONFIG_OPT
@_SEED_OPT
@click.option("--out", "out_dir", type=str, default="models", help="Model directory.")
@click.option("--archive", "archive_path", type=str, required=True,
              help="Cycle archive containing paired PPG and RPPG cycles.")
@click.option("--exclude", "exclude_id", type=str, default=None,
              help="Subject left out of restoration training (the victim).")
def train_restore(config_path, seed, out_dir, archive_path, exclude_id):
    """Train the restoration model on paired (rPPG, PPG) cycles."""
    def body():
        cfg = _load_cfg(config_path, seed)
        _banner(cfg)
        _require(archive_path, "cycle archive")
        groups = group_cycles(read_cycle_archive(archive_path))
        pairs = []
        for sid in sorted(groups):
            if sid == exclude_id:
                continue
            rppg = groups[sid].get(SignalLabel.RPPG.value, [])
            ppg = groups[sid].get(SignalLabel.PPG.value, [])
            pairs.extend(zip(rppg, ppg))
        if not pairs:
            raise DependencyError(
                f"no paired PPG/RPPG cycles in archive: {archive_path}")
        model = train_sigr(pairs, cfg.sigr_spec())
        os.makedirs(out_dir, exist_ok=True)
        suffix = f"_{exclude_id}" if exclude_id else ""
        model_path = os.path.join(out_dir, f"sigr{suffix}.bin")
        save_sigr(model_path, model)
        write_loss_history_csv(os.path.join(out_dir, f"sigr{suffix}_loss.csv"),
                               model.history)
        click.echo(f"trained on {len(pairs)} pairs -> {model_path}")
    _run(body)


@main.command()
@_CONFIG_OPT
@_SEED_OPT
@click.option("--out", "out_path", type=str, default="restored.csv",
              help="Restored cycle archive path.")
@click.option("--model", "model_path", type=str, required=True,
              help="Trained restoration model container.")
@click.option("--archive", "archive_path", type=str, required=True,
              help="Cycle archive with the rPPG cycles to restore.")
def restore(config_path, seed, out_path, model_path, archive_path):
    """Run every rPPG cycle in the archive through the restoration model."""
    def body():
        cfg = _load_cfg(config_path, seed)
        _banner(cfg)
        _require(model_path, "restoration model")
        _require(archive_path, "cycle archive")
        model = load_sigr(model_path)
        cycles = [c for c in read_cycle_archive(archive_path)
                  if c.source_label is SignalLabel.RPPG]
        if not cycles:
            raise DependencyError(f"no RPPG cycles in archive: {archive_path}")
        restored = restore_each(model, cycles, cfg.savgol_spec())
        parent = os.path.dirname(out_path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        write_cycle_archive(out_path, restored)
        click.echo(f"restored {len(restored)} cycles -> {out_path}")
    _run(body)


@main.command("train-auth")
@_CONFIG_OPT
@_SEED_OPT
@click.option("--out", "out_dir", type=str, default="models", help="Model directory.")
@click.option("--archive", "archive_path", type=str, required=True,
              help="Cycle archive containing PPG cycles for all subjects.")
@click.option("--victim", "victim_id", type=str, required=True,
              help="Subject the authenticator is trained to accept.")
def train_auth_cmd(config_path, seed, out_dir, archive_path, victim_id):
    """Train and EER-calibrate the per-victim authenticator."""
    def body():
        cfg = _load_cfg(config_path, seed)
        _banner(cfg)
        _require(archive_path, "cycle archive")
        groups = group_cycles(read_cycle_archive(archive_path))
        if victim_id not in groups:
            raise DependencyError(
                f"victim '{victim_id}' not present in archive: {archive_path}")
        index = sorted(groups).index(victim_id)
        model, _dataset, _control = train_victim_auth(
            groups, victim_id, cfg, victim_seed(cfg, index))
        os.makedirs(out_dir, exist_ok=True)
        model_path = os.path.join(out_dir, f"auth_{victim_id}.bin")
        save_auth(model_path, model)
        click.echo(f"calibrated EER {model.achieved_eer:.4f} -> {model_path}")
    _run(body)


@main.command()
@_CONFIG_OPT
@_SEED_OPT
@click.option("--out", "out_dir", type=str, default="reports", help="Output directory.")
@click.option("--auth", "auth_path", type=str, required=True,
              help="Calibrated authenticator container.")
@click.option("--archive", "archive_path", type=str, required=True,
              help="Cycle archive holding the attack probes.")
def attack(config_path, seed, out_dir, auth_path, archive_path):
    """Score attack probe cycles against a calibrated authenticator."""
    def body():
        cfg = _load_cfg(config_path, seed)
        _banner(cfg)
        _require(auth_path, "trained auth model")
        _require(archive_path, "cycle archive")
        model = load_auth(auth_path)
        cycles = read_cycle_archive(archive_path)
        if not cycles:
            raise DependencyError(f"no cycles in archive: {archive_path}")
        os.makedirs(out_dir, exist_ok=True)
        log_path = os.path.join(out_dir, "decisions.csv")
        write_decision_log(log_path, model, cycles)
        far_single = run_attack(model, cycles, "single")
        far_mean = run_attack(model, cycles, "mean")
        click.echo(f"far_single={far_single:.6g} far_mean={far_mean:.6g}")
        click.echo(f"decision log -> {log_path}")
    _run(body)


@main.command()
@_CONFIG_OPT
@_SEED_OPT
@click.option("--out", "out_dir", type=str, default="reports", help="Output directory.")
@click.option("--victims", type=int, default=None,
              help="Evaluate only the first N cohort subjects as victims.")
@click.option("--frame-rate-study/--no-frame-rate-study", "do_frs", default=False,
              help="Also run the trace-decimation degradation study.")
def report(config_path, seed, out_dir, victims, do_frs):
    """Full synthetic benchmark: cohort, per-victim models, attack report."""
    def body():
        cfg = _load_cfg(config_path, seed)
        _banner(cfg)
        indices = None if victims is None else range(min(victims, cfg.n_subjects))
        result = run_benchmark(cfg, indices)
        emit_report(result.report, out_dir)
        rep = result.report
        for kind in rep.far:
            click.echo(f"mean_far {kind}={rep.mean_far(kind):.4f}")
        if do_frs:
            study = frame_rate_study(result, cfg)
            study_path = os.path.join(out_dir, "frame_rate_study.csv")
            with open(study_path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write("victim,far_rppg_full,far_sigr_full,far_rppg_low,far_sigr_low\n")
                for row in study["per_victim"]:
                    fh.write(f"{row['victim']},{row['far_rppg_full']:.12g},"
                             f"{row['far_sigr_full']:.12g},{row['far_rppg_low']:.12g},"
                             f"{row['far_sigr_low']:.12g}\n")
            click.echo(f"frame-rate study -> {study_path}")
        click.echo(f"report bundle -> {out_dir}")
    _run(body)


if __name__ == "__main__":
    main()
