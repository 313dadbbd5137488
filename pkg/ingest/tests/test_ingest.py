"""Video ingestion: skin rule, detectors, gap handling, CSV contract."""

import numpy as np
import pytest

cv2 = pytest.importorskip("cv2")

from ppgingest import (
    CoverageError,
    IngestError,
    IngestSpec,
    VideoError,
    ingest,
    skin_mask,
)

SKIN = (180, 120, 90)  # RGB passing every rule term
NOT_SKIN = (40, 40, 40)

FPS = 35.0
W, H = 64, 48


def _write_video(path, frames_rgb, fps=FPS):
    writer = cv2.VideoWriter(str(path), cv2.VideoWriter_fourcc(*"MJPG"),
                             fps, (W, H))
    assert writer.isOpened()
    for frame in frames_rgb:
        writer.write(cv2.cvtColor(frame, cv2.COLOR_RGB2BGR))
    writer.release()


def _skin_frame(rgb=SKIN, background=NOT_SKIN):
    """Background frame with a centered skin-colored rectangle."""
    frame = np.full((H, W, 3), background, np.uint8)
    frame[12:36, 16:48] = rgb
    return frame


def _read_rows(path):
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "frame_index,t_seconds,r_mean,g_mean,b_mean,skin_pixel_count"
    return [line.split(",") for line in lines[1:]]


class TestSkinMask:
    def test_rule_terms(self):
        img = np.array([[SKIN,            # passes all terms
                         (90, 50, 30),    # R <= 95
                         (200, 190, 100), # |R-G| <= 15
                         (100, 120, 90),  # R <= G
                         (120, 115, 110), # max-min <= 15
                         ]], dtype=np.uint8)
        mask = skin_mask(img)
        assert mask.tolist() == [[True, False, False, False, False]]

    def test_relaxation_admits_more(self):
        img = np.full((4, 4, 3), (90, 50, 30), np.uint8)  # R just under 95
        assert not skin_mask(img).any()
        assert skin_mask(img, relax=0.8).all()


class TestIngest:
    def test_row_count_and_monotone_time(self, tmp_path):
        video = tmp_path / "v.avi"
        _write_video(video, [_skin_frame() for _ in range(30)])
        out = tmp_path / "trace.csv"
        summary = ingest(video, out)
        rows = _read_rows(out)
        assert len(rows) == 30
        assert summary.n_frames == 30 and summary.n_gap_frames == 0
        times = [float(r[1]) for r in rows]
        assert all(b > a for a, b in zip(times, times[1:]))
        assert times[1] - times[0] == pytest.approx(1.0 / FPS, rel=1e-6)

    def test_means_track_skin_patch(self, tmp_path):
        video = tmp_path / "v.avi"
        _write_video(video, [_skin_frame() for _ in range(10)])
        out = tmp_path / "trace.csv"
        ingest(video, out)
        row = _read_rows(out)[5]
        r, g, b = float(row[2]), float(row[3]), float(row[4])
        # MJPG is lossy; means must still sit near the patch color
        assert abs(r - SKIN[0]) < 12 and abs(g - SKIN[1]) < 12 and abs(b - SKIN[2]) < 12
        assert int(row[5]) > 0

    def test_deterministic_rerun(self, tmp_path):
        video = tmp_path / "v.avi"
        rng = np.random.default_rng(0)
        frames = []
        for _ in range(20):
            frame = _skin_frame()
            frame = np.clip(frame.astype(int) + rng.integers(-3, 4, frame.shape),
                            0, 255).astype(np.uint8)
            frames.append(frame)
        _write_video(video, frames)
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        ingest(video, out1)
        ingest(video, out2)
        assert out1.read_bytes() == out2.read_bytes()

    def test_ten_frame_dropout_gap_rows(self, tmp_path):
        video = tmp_path / "v.avi"
        frames = [_skin_frame() for _ in range(60)]
        for k in range(20, 30):  # face disappears for exactly 10 frames
            frames[k] = np.full((H, W, 3), NOT_SKIN, np.uint8)
        _write_video(video, frames)
        out = tmp_path / "trace.csv"
        summary = ingest(video, out)
        assert summary.n_gap_frames == 10
        assert summary.gap_frame_indices == list(range(20, 30))
        rows = _read_rows(out)
        assert len(rows) == 60
        for k in range(20, 30):
            assert rows[k][2:6] == ["", "", "", "0"]
        for k in list(range(20)) + list(range(30, 60)):
            assert rows[k][5] != "0"

    def test_all_black_video_fails_with_report(self, tmp_path):
        video = tmp_path / "v.avi"
        _write_video(video, [np.zeros((H, W, 3), np.uint8) for _ in range(20)])
        out = tmp_path / "trace.csv"
        with pytest.raises(CoverageError) as err:
            ingest(video, out)
        assert not out.exists()
        report = err.value.report
        assert report.n_frames == 20 and report.n_gap_frames == 20
        assert report.coverage == 0.0
        assert "coverage=0.0000" in report.text()

    def test_missing_video_rejected(self, tmp_path):
        with pytest.raises(VideoError):
            ingest(tmp_path / "ghost.avi", tmp_path / "out.csv")

    def test_unknown_detector_rejected(self):
        with pytest.raises(IngestError):
            IngestSpec(detector="mtcnn")

    def test_fullframe_detector(self, tmp_path):
        video = tmp_path / "v.avi"
        _write_video(video, [_skin_frame() for _ in range(10)])
        out = tmp_path / "trace.csv"
        summary = ingest(video, out, IngestSpec(detector="fullframe"))
        assert summary.n_gap_frames == 0

    def test_adaptive_relaxation_recovers_borderline_skin(self, tmp_path):
        # R channel just below the strict rule; relaxation should admit it
        video = tmp_path / "v.avi"
        _write_video(video, [_skin_frame(rgb=(94, 50, 28)) for _ in range(20)])
        out = tmp_path / "trace.csv"
        summary = ingest(video, out, IngestSpec(detector="fullframe"))
        assert summary.relax_level < 1.0
        assert summary.n_gap_frames == 0


class TestCli:
    def test_cli_roundtrip(self, tmp_path):
        from click.testing import CliRunner
        from ppgingest.cli import main

        video = tmp_path / "v.avi"
        _write_video(video, [_skin_frame() for _ in range(20)])
        out = tmp_path / "trace.csv"
        result = CliRunner().invoke(main, [str(video), "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert out.exists()
        assert "coverage 100.00%" in result.output

    def test_cli_coverage_failure(self, tmp_path):
        from click.testing import CliRunner
        from ppgingest.cli import main

        video = tmp_path / "v.avi"
        _write_video(video, [np.zeros((H, W, 3), np.uint8) for _ in range(10)])
        result = CliRunner().invoke(main, [str(video), "--out",
                                           str(tmp_path / "t.csv")])
        assert result.exit_code == 1
        assert "CoverageError" in result.output
        assert "coverage=" in result.output
