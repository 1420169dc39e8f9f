import json

import numpy as np
import pytest

import morphreduce.campaign as camp
from morphreduce.campaign import (AnalysisSettings, CampaignConfig, DMDSettings,
                                  SampleRecord, analyze_campaign, extract_steady_state,
                                  load_campaign_config, load_run_records, run_campaign,
                                  trim_proxy)
from morphreduce.dmd import SnapshotSet, fit
from morphreduce.errors import ConfigError, DomainError
from morphreduce.ffd import BindingEntry, FFDLattice, ParameterBinding, save_ffd_json
from morphreduce.geometry import icosphere, save_mesh
from morphreduce.surrogate import ObjectiveSpec, TimeSeriesMode, TimeSeriesSpec, generate_timeseries


@pytest.fixture
def workspace(tmp_path):
    """Small FFD document + base mesh for fast campaigns."""
    mesh = icosphere(1)
    mesh_path = tmp_path / "base.obj"
    save_mesh(mesh, mesh_path)
    lattice = FFDLattice([0.0, -1.2, -1.2], np.diag([1.4, 2.4, 2.4]), (4, 4, 4))
    entries = [BindingEntry(p, (1 + (p % 2), 1 + ((p // 2) % 2), 1 + ((p // 4) % 2)),
                            p % 3, 1.0) for p in range(8)]
    binding = ParameterBinding(entries, bounds=np.tile([-0.3, 0.3], (8, 1)))
    ffd_path = tmp_path / "ffd.json"
    save_ffd_json(ffd_path, lattice, binding)
    return tmp_path, str(ffd_path), str(mesh_path)


def ridge_objective(m=8, seed=0):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(m)
    c /= np.linalg.norm(c)
    return ObjectiveSpec("ridge", direction=c)


class TestConfig:
    def test_json_round_trip_and_relative_paths(self, workspace):
        tmp_path, ffd_path, mesh_path = workspace
        doc = {
            "ffd": "ffd.json",
            "mesh": "base.obj",
            "samples": 4,
            "seed": 3,
            "objective": {"kind": "volume-drag-proxy"},
            "time_resolved": False,
        }
        cfg_path = tmp_path / "campaign.json"
        cfg_path.write_text(json.dumps(doc))
        config = load_campaign_config(cfg_path)
        assert config.ffd_path == str(tmp_path / "ffd.json")
        assert config.mesh_path == str(tmp_path / "base.obj")
        assert config.n_samples == 4

    def test_invalid_fraction_rejected(self):
        with pytest.raises(ConfigError):
            AnalysisSettings(split_fraction=1.5)

    def test_horizon_before_window_rejected(self):
        with pytest.raises(ConfigError):
            DMDSettings(window_end=15.0, horizon=10.0)

    def test_sample_count_rejected(self, workspace):
        _, ffd_path, mesh_path = workspace
        with pytest.raises(ConfigError):
            CampaignConfig(ffd_path=ffd_path, mesh_path=mesh_path, n_samples=0,
                           objective=ridge_objective())


class TestSteadyState:
    def test_constant_model(self):
        data = np.tile(np.array([[4.0], [1.0]]), (1, 12))
        model = fit(SnapshotSet(data, t0=7.0, dt=0.1))
        steady = extract_steady_state(model, 30.0, 5.0)
        np.testing.assert_allclose(steady, [4.0, 1.0], atol=1e-10)

    def test_unit_eigenvalue_exact_projection(self):
        spec = TimeSeriesSpec(modes=[], dimension=3, offset=np.array([2.0, -1.0, 0.5]))
        model = fit(generate_timeseries(spec, 7.0, 0.1, 20))
        steady = extract_steady_state(model, 30.0, 5.0)
        np.testing.assert_allclose(steady, [2.0, -1.0, 0.5], atol=1e-10)

    def test_decaying_mode_within_tail_bound(self):
        amp, sigma = 0.8, -0.3
        offset = np.full(10, 3.0)
        spec = TimeSeriesSpec(modes=[TimeSeriesMode(sigma, 1.5, amp, 9)],
                              dimension=10, offset=offset)
        model = fit(generate_timeseries(spec, 7.0, 0.1, 81))
        steady = extract_steady_state(model, 30.0, 5.0)
        bound = amp * np.exp(sigma * (30.0 - 5.0))
        assert np.abs(steady - offset).max() < bound

    def test_empty_window_rejected(self):
        spec = TimeSeriesSpec(modes=[], dimension=2, offset=1.0)
        model = fit(generate_timeseries(spec, 7.0, 0.1, 20))
        with pytest.raises(DomainError):
            extract_steady_state(model, 5.0, 1.0)


class TestRunCampaign:
    def config(self, workspace, **kwargs):
        tmp_path, ffd_path, mesh_path = workspace
        defaults = dict(ffd_path=ffd_path, mesh_path=mesh_path, n_samples=3,
                        objective=ridge_objective(), output_dir=str(tmp_path / "run"),
                        seed=5, time_resolved=False,
                        dmd=DMDSettings(window_end=9.0, horizon=12.0,
                                        steady_window=2.0))
        defaults.update(kwargs)
        return CampaignConfig(**defaults)

    def test_single_zero_sample_evaluates_profile_at_zero(self, workspace):
        tmp_path, ffd_path, mesh_path = workspace
        lattice = FFDLattice([0.0, -1.2, -1.2], np.diag([1.4, 2.4, 2.4]), (4, 4, 4))
        binding = ParameterBinding([BindingEntry(0, (1, 1, 1), 0, 1.0)],
                                   bounds=np.zeros((8, 2)))
        ffd0 = tmp_path / "ffd0.json"
        save_ffd_json(ffd0, lattice, binding)
        config = self.config(workspace, ffd_path=str(ffd0), n_samples=1,
                             outputs=("resistance",))
        records = run_campaign(config, threads=1)
        assert records[0].status == "ok"
        # h(0) = 0 for the default ridge profile
        assert records[0].scalars["resistance"] == pytest.approx(0.0, abs=1e-14)

    def test_run_directory_layout(self, workspace):
        tmp_path, _, _ = workspace
        config = self.config(workspace, n_samples=3, time_resolved=True,
                             n_channels=8)
        records = run_campaign(config, threads=2)
        assert all(r.status == "ok" for r in records)
        run = tmp_path / "run"
        assert (run / "manifest.json").exists()
        for i in range(3):
            d = run / "samples" / f"{i:03d}"
            assert (d / "record.json").exists()
            assert (d / "mesh.obj").exists()
            assert (d / "mu.csv").exists()
            assert (d / "series.csv").exists()

    def test_fault_isolation(self, workspace, monkeypatch):
        config = self.config(workspace, n_samples=4, outputs=("resistance",))
        original = camp.evaluate_objective
        mus = {}

        def flaky(spec, mu, mesh=None, mesh_path=None):
            key = round(float(np.abs(mu).sum()), 12)
            mus.setdefault(key, len(mus))
            if mus[key] == 2:
                raise RuntimeError("synthetic evaluator crash")
            return original(spec, mu, mesh=mesh, mesh_path=mesh_path)

        monkeypatch.setattr(camp, "evaluate_objective", flaky)
        records = run_campaign(config, threads=1, resume=False)
        statuses = [r.status for r in records]
        assert statuses.count("failed") == 1
        assert statuses.count("ok") == 3
        failed = [r for r in records if r.status == "failed"][0]
        assert "synthetic evaluator crash" in failed.reason

    def test_reproducible_manifests(self, workspace):
        tmp_path, _, _ = workspace
        cfg_a = self.config(workspace, output_dir=str(tmp_path / "a"),
                            time_resolved=True, n_channels=6)
        cfg_b = self.config(workspace, output_dir=str(tmp_path / "b"),
                            time_resolved=True, n_channels=6)
        run_campaign(cfg_a, threads=2)
        run_campaign(cfg_b, threads=1)
        assert (tmp_path / "a" / "manifest.json").read_bytes() == \
            (tmp_path / "b" / "manifest.json").read_bytes()

    def test_resume_skips_completed(self, workspace, monkeypatch):
        config = self.config(workspace, n_samples=3)
        run_campaign(config, threads=1)
        calls = []
        original = camp._run_sample

        def counting(index, *args, **kwargs):
            calls.append(index)
            return original(index, *args, **kwargs)

        monkeypatch.setattr(camp, "_run_sample", counting)
        run_dir = camp.Path(config.output_dir)
        (run_dir / "samples" / "001" / "record.json").unlink()
        records = run_campaign(config, threads=1)
        assert calls == [1]
        assert all(r.status == "ok" for r in records)

    def test_pipeline_consistency_without_transient(self, workspace):
        # constant series: steady-state scalar equals the instantaneous value
        config_flat = self.config(workspace, n_samples=2, time_resolved=False,
                                  outputs=("resistance", "trim"))
        config_series = self.config(
            workspace, n_samples=2, time_resolved=True, n_channels=6,
            transient_modes=[],
            output_dir=str(camp.Path(config_flat.output_dir).parent / "run_ts"))
        flat = run_campaign(config_flat, threads=1)
        series = run_campaign(config_series, threads=1)
        for a, b in zip(flat, series):
            for name in ("resistance", "trim"):
                assert abs(a.scalars[name] - b.scalars[name]) < 1e-10

    def test_missing_binding_rejected(self, workspace):
        tmp_path, _, mesh_path = workspace
        lattice = FFDLattice([0, 0, 0], np.eye(3), (2, 2, 2))
        bare = tmp_path / "bare.json"
        save_ffd_json(bare, lattice)
        config = self.config(workspace, ffd_path=str(bare))
        with pytest.raises(ConfigError, match="binding"):
            run_campaign(config)


class TestTrimProxy:
    def test_symmetric_body_is_balanced(self):
        assert abs(trim_proxy(icosphere(2))) < 1e-12

    def test_shifted_mass_registers(self):
        mesh = icosphere(2)
        stretched = mesh.with_vertices(mesh.vertices * np.array([1.0, 1.0, 1.0])
                                       + np.array([0.2, 0.0, 0.0]))
        # translation alone does not change trim: centroid moves with the box
        assert abs(trim_proxy(stretched)) < 1e-12
        bulb = mesh.vertices.copy()
        bulb[:, 0] = np.where(bulb[:, 0] > 0, bulb[:, 0] * 1.5, bulb[:, 0])
        assert abs(trim_proxy(mesh.with_vertices(bulb))) > 1e-3


class TestAnalyzeCampaign:
    def records_from(self, mus, values, extra=None):
        records = []
        for i, (mu, v) in enumerate(zip(mus, values)):
            scalars = {"resistance": float(v)}
            if extra is not None:
                scalars["trim"] = float(extra[i])
            records.append(SampleRecord(index=i, mu=mu, status="ok", scalars=scalars))
        return records

    def test_ridge_structured_results(self, tmp_path):
        rng = np.random.default_rng(1)
        m = 6
        bounds = np.tile([-0.3, 0.3], (m, 1))
        c = rng.standard_normal(m)
        c /= np.linalg.norm(c)
        mus = rng.uniform(-0.3, 0.3, (150, m))
        values = 3.0 * (mus @ c) + 0.3 * (mus @ c) ** 2
        records = self.records_from(mus, values)
        report = analyze_campaign(records, bounds, AnalysisSettings(n_boot=20),
                                  outputs=("resistance",), out_dir=tmp_path / "an")
        entry = report["outputs"]["resistance"]
        assert entry["active_dim"] == 1
        assert entry["gap_ratio"] > 1e3
        assert (tmp_path / "an" / "eigenvalues.csv").exists()
        assert (tmp_path / "an" / "summary_2d.csv").exists()
        assert (tmp_path / "an" / "report.json").exists()

    def test_constant_outputs_flag_no_structure(self):
        rng = np.random.default_rng(2)
        bounds = np.tile([-1.0, 1.0], (4, 1))
        mus = rng.uniform(-1, 1, (40, 4))
        report = analyze_campaign(self.records_from(mus, np.full(40, 7.0)), bounds,
                                  AnalysisSettings(n_boot=5), outputs=("resistance",))
        assert report["outputs"]["resistance"]["structure"] == "none"

    def test_isotropic_quadratic_flags_weak_gap(self):
        rng = np.random.default_rng(3)
        bounds = np.tile([-1.0, 1.0], (4, 1))
        mus = rng.uniform(-1, 1, (400, 4))
        values = np.sum(mus ** 2, axis=1)
        report = analyze_campaign(self.records_from(mus, values), bounds,
                                  AnalysisSettings(n_boot=5), outputs=("resistance",))
        entry = report["outputs"]["resistance"]
        assert entry["structure"] == "weak"
        assert entry["gap_ratio"] < 10.0
        assert 1 <= entry["active_dim"] < 4

    def test_insufficient_ok_records(self):
        bounds = np.tile([-1.0, 1.0], (4, 1))
        records = self.records_from(np.zeros((3, 4)), np.zeros(3))
        with pytest.raises(DomainError, match="at least"):
            analyze_campaign(records, bounds, AnalysisSettings())

    def test_failed_records_excluded(self):
        rng = np.random.default_rng(4)
        bounds = np.tile([-1.0, 1.0], (3, 1))
        mus = rng.uniform(-1, 1, (60, 3))
        values = mus @ np.array([1.0, 0.0, 0.0])
        records = self.records_from(mus, values)
        records.append(SampleRecord(index=60, mu=np.zeros(3), status="failed",
                                    reason="boom"))
        report = analyze_campaign(records, bounds, AnalysisSettings(n_boot=5),
                                  outputs=("resistance",))
        assert report["n_ok"] == 60
        assert report["n_failed"] == 1


class TestLoadRunRecords:
    def test_round_trip(self, workspace):
        tmp_path, _, _ = workspace
        config = TestRunCampaign().config(workspace, n_samples=3)
        records = run_campaign(config, threads=1)
        back, bounds, config_doc = load_run_records(config.output_dir)
        assert len(back) == 3
        assert bounds.shape == (8, 2)
        assert [r.index for r in back] == [r.index for r in records]
        assert config_doc["samples"] == 3
