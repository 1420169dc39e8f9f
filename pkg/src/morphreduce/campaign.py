"""End-to-end design-study pipeline: sample, morph, evaluate, reduce.

A campaign draws parameter vectors from the FFD binding box, deforms the
base mesh for each one, evaluates the objective (optionally through a
time-resolved path: synthesize transient snapshots, fit a DMD model,
forecast to the horizon and average a trailing window for the steady
value), persists one record per sample, and finally runs the
active-subspace analysis per tracked output.

Samples are independent units of work; every record is written atomically
and an interrupted run resumes by skipping indices that already have a
record.  All randomness is derived from (campaign seed, sample index), so
results are byte-identical across reruns and thread counts.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import activesubspace as asub
from . import dmd
from .errors import ConfigError, DomainError
from .ffd import apply_parameters, deform_mesh, load_ffd_json, sample_parameters
from .geometry import TriMesh, load_mesh, save_mesh, volume_centroid
from .surrogate import (ObjectiveSpec, TimeSeriesMode, TimeSeriesSpec,
                        evaluate_objective, generate_timeseries)

__all__ = [
    "DMDSettings", "AnalysisSettings", "CampaignConfig", "SampleRecord",
    "load_campaign_config", "run_campaign", "extract_steady_state",
    "analyze_campaign", "load_run_records", "trim_proxy",
]

logger = logging.getLogger("morphreduce.campaign")


@dataclass
class DMDSettings:
    window_start: float = 7.0
    window_end: float = 15.0
    dt: float = 0.1
    rank: object = None
    horizon: float = 30.0
    steady_window: float = 5.0

    def __post_init__(self):
        if self.window_end <= self.window_start:
            raise ConfigError("DMD window end must exceed its start")
        if self.dt <= 0:
            raise ConfigError("DMD sampling interval must be positive")
        if self.horizon < self.window_end:
            raise ConfigError("forecast horizon must be >= the window end")
        if self.steady_window <= 0:
            raise ConfigError("steady-state window must be positive")

    @property
    def n_snapshots(self) -> int:
        return int(round((self.window_end - self.window_start) / self.dt)) + 1


@dataclass
class AnalysisSettings:
    degree: int = 4
    split_fraction: float = 0.75
    n_boot: int = 100
    seed: int = 0
    split_seed: int = 0
    rule: str = "largest-gap"
    explicit_dim: int | None = None
    n_replicates: int = 10

    def __post_init__(self):
        if not 0.0 < self.split_fraction < 1.0:
            raise ConfigError("train split fraction must lie in (0, 1)")


@dataclass
class CampaignConfig:
    ffd_path: str
    mesh_path: str
    n_samples: int
    objective: ObjectiveSpec
    output_dir: str = "campaign_run"
    scheme: str = "latin-hypercube"
    seed: int = 0
    outputs: tuple = ("resistance", "trim")
    time_resolved: bool = True
    n_channels: int = 24
    transient_modes: list | None = None
    dmd: DMDSettings = field(default_factory=DMDSettings)
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)

    DEFAULT_TRANSIENTS = (
        {"growth": -0.35, "frequency": 2.1, "amplitude": 0.25},
        {"growth": -0.6, "frequency": 0.7, "amplitude": 0.1},
    )

    def __post_init__(self):
        if self.n_samples < 1:
            raise ConfigError("campaign needs at least one sample")
        self.outputs = tuple(self.outputs)
        if not self.outputs:
            raise ConfigError("campaign needs at least one tracked output")
        if self.transient_modes is None:
            self.transient_modes = [dict(m) for m in self.DEFAULT_TRANSIENTS]
        if self.time_resolved and self.n_channels < len(self.outputs) + 1:
            raise ConfigError("need more snapshot channels than tracked outputs")

    def to_doc(self) -> dict:
        obj = {k: (v.tolist() if isinstance(v, np.ndarray) else v)
               for k, v in vars(self.objective).items() if v is not None}
        return {
            "ffd": self.ffd_path,
            "mesh": self.mesh_path,
            "samples": self.n_samples,
            "scheme": self.scheme,
            "seed": self.seed,
            "objective": obj,
            "outputs": list(self.outputs),
            "time_resolved": self.time_resolved,
            "channels": self.n_channels,
            "transient_modes": self.transient_modes,
            "dmd": vars(self.dmd).copy(),
            "analysis": vars(self.analysis).copy(),
        }


def load_campaign_config(path) -> CampaignConfig:
    """Read a campaign JSON document.

    The ffd and mesh paths are resolved relative to the config file;
    output_dir is resolved relative to the working directory.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})")
    base = path.parent

    def resolve(p):
        p = Path(p)
        return str(p if p.is_absolute() else base / p)

    try:
        objective = ObjectiveSpec(**doc["objective"])
        config = CampaignConfig(
            ffd_path=resolve(doc["ffd"]),
            mesh_path=resolve(doc["mesh"]),
            n_samples=int(doc["samples"]),
            objective=objective,
            output_dir=doc.get("output_dir", "campaign_run"),
            scheme=doc.get("scheme", "latin-hypercube"),
            seed=int(doc.get("seed", 0)),
            outputs=tuple(doc.get("outputs", ("resistance", "trim"))),
            time_resolved=bool(doc.get("time_resolved", True)),
            n_channels=int(doc.get("channels", 24)),
            transient_modes=doc.get("transient_modes"),
            dmd=DMDSettings(**doc.get("dmd", {})),
            analysis=AnalysisSettings(**doc.get("analysis", {})),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: bad campaign document ({exc})")
    return config


@dataclass
class SampleRecord:
    index: int
    mu: np.ndarray
    status: str
    scalars: dict = field(default_factory=dict)
    mesh_path: str | None = None
    series_path: str | None = None
    reason: str | None = None

    def to_doc(self) -> dict:
        doc = {
            "index": self.index,
            "mu": [float(v) for v in self.mu],
            "status": self.status,
            "scalars": {k: float(v) for k, v in self.scalars.items()},
        }
        if self.mesh_path is not None:
            doc["mesh"] = self.mesh_path
        if self.series_path is not None:
            doc["series"] = self.series_path
        if self.reason is not None:
            doc["reason"] = self.reason
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "SampleRecord":
        return cls(index=int(doc["index"]), mu=np.asarray(doc["mu"], dtype=float),
                   status=doc["status"], scalars=dict(doc.get("scalars", {})),
                   mesh_path=doc.get("mesh"), series_path=doc.get("series"),
                   reason=doc.get("reason"))


def trim_proxy(mesh: TriMesh) -> float:
    """Longitudinal volume-centroid offset, a stand-in for the trim output.

    Normalized shift of the enclosed-volume centroid from the mid-length of
    the bounding box; responds to bow-heavy or stern-heavy deformations.
    """
    x = mesh.vertices[:, 0]
    extent = float(x.max() - x.min())
    if extent == 0.0:
        raise DomainError("degenerate mesh: zero longitudinal extent")
    mid = 0.5 * float(x.max() + x.min())
    return (float(volume_centroid(mesh)[0]) - mid) / extent


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _json_dumps(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _tracked_scalars(config: CampaignConfig, mu, mesh, mesh_path) -> dict:
    scalars = {}
    for name in config.outputs:
        if name == "trim":
            scalars[name] = trim_proxy(mesh)
        else:
            scalars[name] = evaluate_objective(config.objective, mu, mesh=mesh,
                                               mesh_path=mesh_path)
    return scalars


def _transient_spec(config: CampaignConfig, index: int, offset: np.ndarray) -> TimeSeriesSpec:
    """Per-sample snapshot generator: tracked channels plus probe channels,
    each relaxing onto its steady value through the configured modes."""
    modes = []
    for j, mode in enumerate(config.transient_modes):
        seed_entropy = np.random.SeedSequence(
            [config.seed, index, j]).generate_state(1)[0]
        rng = np.random.default_rng(int(seed_entropy))
        relative = rng.uniform(0.6, 1.4, config.n_channels)
        modes.append(TimeSeriesMode(
            growth=float(mode["growth"]),
            frequency=float(mode["frequency"]),
            amplitude=float(mode.get("amplitude", 0.2)),
            profile_seed=int(seed_entropy),
            profile=offset * relative,
        ))
    return TimeSeriesSpec(modes=modes, dimension=config.n_channels, offset=offset)


def _channel_offsets(config: CampaignConfig, scalars: dict) -> np.ndarray:
    tracked = np.array([scalars[name] for name in config.outputs])
    n_probe = config.n_channels - len(tracked)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x70726F62]))
    base = rng.uniform(-1.0, 1.0, n_probe)
    mix = rng.uniform(-1.0, 1.0, (n_probe, len(tracked)))
    return np.concatenate([tracked, base + mix @ tracked])


def extract_steady_state(model: dmd.DMDModel, horizon_t: float, window_t: float,
                         channels=None) -> np.ndarray:
    """Mean of the reconstructed states over [horizon - window, horizon]."""
    if window_t <= 0:
        raise DomainError("steady-state window must be positive")
    k_lo = int(np.ceil((horizon_t - window_t - model.t0) / model.dt - 1e-9))
    k_hi = int(np.floor((horizon_t - model.t0) / model.dt + 1e-9))
    k_lo = max(k_lo, 0)
    if k_hi < k_lo:
        raise DomainError("steady-state window contains no forecast samples")
    series = dmd.reconstruct_series(model, k_hi)[:, k_lo:]
    mean = series.mean(axis=1)
    return mean if channels is None else mean[np.asarray(channels, dtype=int)]


def _run_sample(index: int, mu: np.ndarray, lattice, binding, base_mesh,
                config: CampaignConfig, run_dir: Path) -> SampleRecord:
    sample_dir = run_dir / "samples" / f"{index:03d}"
    sample_dir.mkdir(parents=True, exist_ok=True)
    rel = f"samples/{index:03d}"
    try:
        morphed = apply_parameters(lattice, binding, mu)
        mesh = deform_mesh(morphed, base_mesh)
        mesh_file = sample_dir / "mesh.obj"
        save_mesh(mesh, mesh_file)
        with open(sample_dir / "mu.csv", "w") as fh:
            fh.write(",".join("%.17g" % v for v in mu) + "\n")

        scalars = _tracked_scalars(config, mu, mesh, mesh_file)
        series_rel = None
        if config.time_resolved:
            offset = _channel_offsets(config, scalars)
            spec = _transient_spec(config, index, offset)
            series = generate_timeseries(spec, config.dmd.window_start,
                                         config.dmd.dt, config.dmd.n_snapshots)
            dmd.save_snapshots_csv(series, sample_dir / "series.csv")
            series_rel = f"{rel}/series.csv"
            model = dmd.fit(series, rank=config.dmd.rank)
            steady = extract_steady_state(model, config.dmd.horizon,
                                          config.dmd.steady_window)
            scalars = {name: float(steady[j]) for j, name in enumerate(config.outputs)}
        record = SampleRecord(index=index, mu=mu, status="ok", scalars=scalars,
                              mesh_path=f"{rel}/mesh.obj", series_path=series_rel)
    except Exception as exc:  # fault isolation: one bad sample never aborts the run
        logger.warning("sample %d failed: %s", index, exc)
        record = SampleRecord(index=index, mu=mu, status="failed", reason=str(exc))
    _atomic_write(sample_dir / "record.json", _json_dumps(record.to_doc()))
    return record


def run_campaign(config: CampaignConfig, threads: int | None = None,
                 resume: bool = True) -> list:
    """Execute the full sampling campaign; returns the list of SampleRecord.

    Writes run_dir/manifest.json plus one samples/NNN/ directory per sample.
    Per-sample failures are recorded and isolated; config-level problems
    (bad mesh, bad lattice) abort before any evaluation.
    """
    lattice, binding = load_ffd_json(config.ffd_path)
    if binding is None:
        raise ConfigError(f"{config.ffd_path}: campaign needs a parameter binding")
    base_mesh = load_mesh(config.mesh_path)
    mus = sample_parameters(binding, config.n_samples, scheme=config.scheme,
                            seed=config.seed)
    run_dir = Path(config.output_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    def work(i):
        sample_dir = run_dir / "samples" / f"{i:03d}"
        record_file = sample_dir / "record.json"
        if resume and record_file.exists():
            try:
                return SampleRecord.from_doc(json.loads(record_file.read_text()))
            except (json.JSONDecodeError, KeyError):
                logger.warning("sample %d: unreadable record, recomputing", i)
        return _run_sample(i, mus[i], lattice, binding, base_mesh, config, run_dir)

    n_workers = threads if threads else (os.cpu_count() or 1)
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            records = list(pool.map(work, range(config.n_samples)))
    else:
        records = [work(i) for i in range(config.n_samples)]

    manifest = {
        "config": config.to_doc(),
        "bounds": binding.bounds.tolist(),
        "n_samples": config.n_samples,
        "n_ok": sum(1 for r in records if r.status == "ok"),
        "records": [r.to_doc() for r in records],
    }
    _atomic_write(run_dir / "manifest.json", _json_dumps(manifest))
    n_failed = config.n_samples - manifest["n_ok"]
    logger.info("campaign finished: %d ok, %d failed", manifest["n_ok"], n_failed)
    return records


def load_run_records(run_dir):
    """Read back (records, bounds, config-doc) from a finished run directory."""
    manifest_path = Path(run_dir) / "manifest.json"
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{manifest_path}: invalid manifest ({exc})")
    records = [SampleRecord.from_doc(doc) for doc in manifest["records"]]
    bounds = np.asarray(manifest["bounds"], dtype=float)
    return records, bounds, manifest.get("config", {})


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(["%.17g" % v if isinstance(v, float) else v for v in row])


def analyze_campaign(records, bounds, settings: AnalysisSettings,
                     outputs=("resistance", "trim"), out_dir=None) -> dict:
    """Active-subspace analysis of the campaign outputs.

    Per tracked output: local-linear gradients, bootstrap eigendecomposition,
    active-dimension choice, response surface with test error, summary plot
    data against one and two active variables, and the mean normalized error
    over split replicates.  Writes the analysis/ files when out_dir is given
    and returns the report dictionary.
    """
    ok = [r for r in records if r.status == "ok"]
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    m = len(bounds)
    if len(ok) < m + 2:
        raise DomainError(
            f"analysis needs at least {m + 2} successful samples, got {len(ok)}")
    inputs = np.array([r.mu for r in ok])

    report = {"n_ok": len(ok), "n_failed": len(records) - len(ok), "outputs": {}}
    eig_rows, boot_rows, s1_rows, s2_rows = [], [], [], []
    surfaces = {}
    for name in outputs:
        try:
            values = np.array([r.scalars[name] for r in ok])
        except KeyError:
            raise DomainError(f"records carry no scalar named {name!r}")
        table = asub.SampleTable(inputs, values, bounds=bounds)
        entry, decomp, surface = asub.analyze_table(
            table, degree=settings.degree, n_boot=settings.n_boot,
            seed=settings.seed, split_seed=settings.split_seed,
            train_fraction=settings.split_fraction, rule=settings.rule,
            explicit_dim=settings.explicit_dim,
            n_replicates=settings.n_replicates)
        if surface is not None:
            surfaces[name] = asub.surface_to_doc(surface)
        report["outputs"][name] = entry

        normalized = table.normalized_inputs()
        active1 = normalized @ decomp.eigenvectors[:, 0]
        eig_rows += [(name, i, float(v)) for i, v in enumerate(decomp.eigenvalues)]
        if decomp.bootstrap_lo is not None:
            boot_rows += [(name, i, float(lo), float(hi)) for i, (lo, hi) in
                          enumerate(zip(decomp.bootstrap_lo, decomp.bootstrap_hi))]
        s1_rows += [(name, float(a), float(v)) for a, v in zip(active1, values)]
        if m >= 2:
            active2 = normalized @ decomp.eigenvectors[:, 1]
            s2_rows += [(name, float(a1), float(a2), float(v))
                        for a1, a2, v in zip(active1, active2, values)]

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_csv(out_dir / "eigenvalues.csv", ["output", "index", "eigenvalue"],
                   eig_rows)
        _write_csv(out_dir / "bootstrap.csv", ["output", "index", "lo", "hi"],
                   boot_rows)
        _write_csv(out_dir / "summary_1d.csv", ["output", "active_1", "f"], s1_rows)
        _write_csv(out_dir / "summary_2d.csv",
                   ["output", "active_1", "active_2", "f"], s2_rows)
        _atomic_write(out_dir / "surface.json", _json_dumps(surfaces))
        _atomic_write(out_dir / "report.json", _json_dumps(report))
    return report
