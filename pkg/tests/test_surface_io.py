"""Stage ingestion, cleaning policy, and report persistence."""

import json

import numpy as np
import pytest

from bacdetect.decision import DecisionConfig, decide
from bacdetect.permutation import PermutationConfig
from bacdetect.roughness import build_stage_sample, default_grid
from bacdetect.surface_io import (
    DEFAULT_DX_UM,
    DEFAULT_DY_UM,
    HeightMatrix,
    StageRecord,
    SurfaceDataError,
    load_report,
    load_stage,
    save_report,
)
from conftest import rough_stage, write_stage_dir


class TestHeightMatrix:
    def test_defaults_and_geometry(self):
        m = HeightMatrix(z=np.zeros((2, 3)))
        assert (m.dx, m.dy) == (DEFAULT_DX_UM, DEFAULT_DY_UM)
        xx, yy = m.coordinates()
        assert xx.shape == (2, 3)
        assert xx[0, 1] == pytest.approx(DEFAULT_DX_UM)
        assert yy[1, 0] == pytest.approx(DEFAULT_DY_UM)
        assert m.point_cloud().shape == (6, 3)

    def test_invalid_shapes(self):
        with pytest.raises(SurfaceDataError):
            HeightMatrix(z=np.zeros(5))
        with pytest.raises(SurfaceDataError):
            HeightMatrix(z=np.zeros((2, 2)), dx=0.0)


class TestLoadStage:
    def test_single_location_rejected(self, tmp_path):
        d = tmp_path / "stage"
        d.mkdir()
        np.savetxt(d / "only.csv", np.ones((4, 4)), delimiter=",")
        with pytest.raises(SurfaceDataError, match="insufficient locations"):
            load_stage(d)

    def test_nan_cells_kept_and_counted(self, tmp_path, rng):
        z = rng.standard_normal((480, 640))
        z[7, 11] = z[100, 2] = z[0, 0] = z[250, 639] = z[479, 400] = np.nan
        d = tmp_path / "stage"
        d.mkdir()
        np.savetxt(d / "a.csv", z, delimiter=",")
        np.savetxt(d / "b.csv", rng.standard_normal((480, 640)), delimiter=",")
        rec = load_stage(d)
        a = rec.locations[0]
        assert a.location_id == "a"
        assert a.finite_heights().size == 307_195
        assert a.dropped_count == 5

    def test_excessive_nans_rejected(self, tmp_path, rng):
        z = rng.standard_normal((20, 20))
        z[:5, :] = np.nan  # 25% missing
        d = tmp_path / "stage"
        d.mkdir()
        np.savetxt(d / "a.csv", z, delimiter=",")
        np.savetxt(d / "b.csv", rng.standard_normal((20, 20)), delimiter=",")
        with pytest.raises(SurfaceDataError, match="corrupt"):
            load_stage(d)

    def test_locations_sorted_by_stem(self, tmp_path, rng):
        d = tmp_path / "stage"
        d.mkdir()
        for name in ("zz.csv", "aa.csv", "mm.csv", "bb.csv"):
            np.savetxt(d / name, rng.standard_normal((4, 4)), delimiter=",")
        rec = load_stage(d)
        assert [m.location_id for m in rec.locations] == ["aa", "bb", "mm", "zz"]

    def test_manifest_overrides_pitch(self, tmp_path, rng):
        d = tmp_path / "stage"
        d.mkdir()
        for name in ("a.csv", "b.csv"):
            np.savetxt(d / name, rng.standard_normal((4, 4)), delimiter=",")
        (d / "manifest.json").write_text(json.dumps(
            {"stage_label": "tool3", "files": ["a.csv", "b.csv"],
             "dx_um": 0.5, "dy_um": 0.25}))
        rec = load_stage(d)
        assert rec.stage_label == "tool3"
        assert all(m.dx == 0.5 and m.dy == 0.25 for m in rec.locations)

    def test_manifest_missing_file(self, tmp_path):
        d = tmp_path / "stage"
        d.mkdir()
        (d / "manifest.json").write_text(json.dumps(
            {"stage_label": "x", "files": ["gone.csv", "also_gone.csv"]}))
        with pytest.raises(SurfaceDataError, match="missing file"):
            load_stage(d)

    def test_whitespace_delimited(self, tmp_path, rng):
        d = tmp_path / "stage"
        d.mkdir()
        for name in ("a.txt", "b.txt"):
            np.savetxt(d / name, rng.standard_normal((4, 4)))
        rec = load_stage(d)
        assert rec.locations[0].z.shape == (4, 4)

    def test_nonexistent_path(self, tmp_path):
        with pytest.raises(SurfaceDataError):
            load_stage(tmp_path / "nope")


def _small_record(rng):
    grid = default_grid(m=60)
    prev = build_stage_sample(rough_stage(rng, "stage1", scale=1.0), grid)
    curr = build_stage_sample(rough_stage(rng, "stage2", scale=0.3), grid)
    cfg = DecisionConfig(grid=grid,
                         perm=PermutationConfig(n_permutations=200, seed=42))
    return decide(prev, curr, cfg)


class TestReportPersistence:
    def test_round_trip_identity(self, tmp_path, rng):
        record = _small_record(rng)
        path = tmp_path / "report.json"
        save_report(record, path)
        loaded = load_report(path)
        assert loaded.to_dict() == record.to_dict()

    def test_provenance_echo(self, tmp_path, rng):
        record = _small_record(rng)
        path = tmp_path / "report.json"
        save_report(record, path)
        payload = json.loads(path.read_text())
        assert payload["provenance"]["seed"] == 42
        assert payload["provenance"]["n_permutations"] == 200
        assert payload["schema"] == "bacdetect-report-v1"

    def test_write_failure(self, tmp_path, rng):
        record = _small_record(rng)
        with pytest.raises(SurfaceDataError):
            save_report(record, tmp_path / "no_such_dir" / "r.json")

    def test_missing_report(self, tmp_path):
        with pytest.raises(SurfaceDataError):
            load_report(tmp_path / "absent.json")


class TestStageRecord:
    def test_minimum_two_locations(self):
        with pytest.raises(SurfaceDataError, match="insufficient"):
            StageRecord(stage_id="s", stage_label="s",
                        locations=[HeightMatrix(z=np.zeros((2, 2)))])
