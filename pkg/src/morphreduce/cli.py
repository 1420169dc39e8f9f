"""Command-line entry point: ``morphreduce <group> <command> ...``.

Every subcommand is a thin adapter over the library modules; no numerical
logic lives here.  Exit status 0 on success, 1 on a domain error (reported
as ``error: <code>: <message>`` on stderr), 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import secrets
import sys
from pathlib import Path

import numpy as np

from . import activesubspace as asub
from . import campaign as camp
from . import dmd, ffd, rigidbody
from .errors import ConfigError, ToolkitError

logger = logging.getLogger("morphreduce.cli")


def _common_flags(parser):
    parser.add_argument("--seed", type=int, default=None,
                        help="seed for any randomness (a generated seed is printed if omitted)")
    parser.add_argument("--threads", type=int, default=None,
                        help="bound on internal worker pools (default: available parallelism)")
    parser.add_argument("--log-level", default="warning",
                        choices=["debug", "info", "warning", "error"])


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = secrets.randbelow(2 ** 31)
    logger.info("no --seed given, using generated seed %d", seed)
    print(f"seed: {seed}", file=sys.stderr)
    return seed


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",") if v.strip() != ""])
    except ValueError:
        raise ConfigError(f"cannot parse {text!r} as a comma-separated vector")


def _parse_rank(text):
    if text is None or text == "auto":
        return None
    if text == "full":
        return "full"
    try:
        return int(text)
    except ValueError:
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"rank must be an integer, a fraction, 'full' or 'auto', got {text!r}")


def _parse_bounds(text, m):
    if text is None:
        return None
    vals = _parse_vector(text)
    if len(vals) == 2:
        return np.tile(vals, (m, 1))
    if len(vals) == 2 * m:
        return vals.reshape(m, 2)
    raise ConfigError(f"--bounds needs 2 or {2 * m} comma-separated values")


# --- ffd ------------------------------------------------------------------

def cmd_ffd_deform(args) -> int:
    from .geometry import load_mesh, save_mesh

    lattice, binding = ffd.load_ffd_json(args.lattice)
    if args.mu is not None:
        if binding is None:
            raise ConfigError(f"{args.lattice} has no parameter binding; cannot apply --mu")
        lattice = ffd.apply_parameters(lattice, binding, _parse_vector(args.mu))
    mesh = load_mesh(args.infile)
    save_mesh(ffd.deform_mesh(lattice, mesh), args.outfile)
    print(f"wrote {args.outfile}")
    return 0


def cmd_ffd_sample(args) -> int:
    _, binding = ffd.load_ffd_json(args.lattice)
    if binding is None:
        raise ConfigError(f"{args.lattice} has no parameter binding")
    seed = _resolve_seed(args)
    mus = ffd.sample_parameters(binding, args.n, scheme=args.scheme, seed=seed)
    with open(args.outfile, "w") as fh:
        fh.write(",".join(f"mu_{j + 1}" for j in range(binding.dimension)) + "\n")
        for row in mus:
            fh.write(",".join("%.17g" % v for v in row) + "\n")
    print(f"wrote {args.outfile} ({args.n} x {binding.dimension})")
    return 0


# --- dmd ------------------------------------------------------------------

def _load_snapshots(path):
    if str(path).endswith(".bin"):
        return dmd.load_snapshots_bin(path)
    return dmd.load_snapshots_csv(path)


def cmd_dmd_fit(args) -> int:
    snapshots = _load_snapshots(args.infile)
    model = dmd.fit(snapshots, rank=_parse_rank(args.rank), mode_kind=args.modes)
    dmd.save_model_json(model, args.outfile)
    err = dmd.training_error(model, snapshots)
    print(f"rank {model.rank}, training error {err:.3e}, wrote {args.outfile}")
    return 0


def cmd_dmd_predict(args) -> int:
    model = dmd.load_model_json(args.model)
    state = dmd.predict_at_time(model, args.t)
    print(",".join("%.17g" % v for v in state))
    return 0


# --- as -------------------------------------------------------------------

def cmd_as_analyze(args) -> int:
    table = asub.load_sample_table(args.infile)
    if table.bounds is None and args.bounds is not None:
        table = asub.SampleTable(table.inputs, table.outputs, table.gradients,
                                 _parse_bounds(args.bounds, table.m))
    seed = _resolve_seed(args)
    report, decomp, surface = asub.analyze_table(
        table, degree=args.degree, n_boot=args.boot, seed=seed,
        split_seed=args.split_seed, train_fraction=args.split,
        rule=args.rule, explicit_dim=args.dim)
    doc = dict(report)
    if surface is not None:
        doc["surface_model"] = asub.surface_to_doc(surface)
    Path(args.outfile).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    print(f"active dimension {report['active_dim']}, structure {report['structure']}, "
          f"wrote {args.outfile}")

    if args.plot_data:
        out = Path(args.plot_data)
        out.mkdir(parents=True, exist_ok=True)
        lam = decomp.eigenvalues
        camp._write_csv(out / "eigenvalues.csv", ["index", "eigenvalue"],
                        [(i, float(v)) for i, v in enumerate(lam)])
        if decomp.bootstrap_lo is not None:
            camp._write_csv(out / "bootstrap.csv", ["index", "lo", "hi"],
                            [(i, float(lo), float(hi)) for i, (lo, hi) in
                             enumerate(zip(decomp.bootstrap_lo, decomp.bootstrap_hi))])
        normalized = table.normalized_inputs()
        a1 = normalized @ decomp.eigenvectors[:, 0]
        camp._write_csv(out / "summary_1d.csv", ["active_1", "f"],
                        [(float(a), float(v)) for a, v in zip(a1, table.outputs)])
        if table.m >= 2:
            a2 = normalized @ decomp.eigenvectors[:, 1]
            camp._write_csv(out / "summary_2d.csv", ["active_1", "active_2", "f"],
                            [(float(x), float(y), float(v))
                             for x, y, v in zip(a1, a2, table.outputs)])
        print(f"wrote plot data under {out}")
    return 0


# --- rigidbody --------------------------------------------------------------

def cmd_rigidbody_simulate(args) -> int:
    try:
        doc = json.loads(Path(args.config).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.config}: invalid JSON ({exc})")
    try:
        props = rigidbody.BodyProperties(
            mass=float(doc["mass"]), inertia=doc["inertia"],
            gravity=doc.get("gravity"))
        init = doc.get("initial", {})
        state = rigidbody.RigidBodyState(
            position=init.get("position", [0, 0, 0]),
            velocity=init.get("velocity", [0, 0, 0]),
            angular_velocity=init.get("angular_velocity", [0, 0, 0]),
            quaternion=init.get("quaternion", [1, 0, 0, 0]))
        force_doc = doc.get("forces", {"kind": "none"})
        if force_doc.get("kind", "none") == "none":
            forces = rigidbody.no_forces
        elif force_doc["kind"] == "constant":
            forces = rigidbody.constant_forces(force_doc.get("force", [0, 0, 0]),
                                               force_doc.get("moment", [0, 0, 0]))
        else:
            raise ConfigError(f"unknown force model kind {force_doc.get('kind')!r}")
        t0 = float(doc.get("t0", 0.0))
    except KeyError as exc:
        raise ConfigError(f"{args.config}: missing field {exc}")
    times, states = rigidbody.simulate(state, props, forces, t0, args.t_end, args.dt)
    rigidbody.save_trajectory_csv(args.outfile, times, states)
    print(f"wrote {args.outfile} ({len(times)} states)")
    return 0


# --- campaign ---------------------------------------------------------------

def cmd_campaign_run(args) -> int:
    config_path = args.config
    if config_path == "demo":
        from importlib.resources import files
        config_path = str(files("morphreduce") / "data" / "demo_campaign.json")
    config = camp.load_campaign_config(config_path)
    if args.out is not None:
        config.output_dir = args.out
    if args.seed is not None:
        config.seed = args.seed
    records = camp.run_campaign(config, threads=args.threads,
                                resume=not args.no_resume)
    n_ok = sum(1 for r in records if r.status == "ok")
    print(f"{n_ok}/{len(records)} samples ok, run directory {config.output_dir}")
    if args.analyze:
        _, bounds, _ = camp.load_run_records(config.output_dir)
        report = camp.analyze_campaign(
            records, bounds, config.analysis, outputs=config.outputs,
            out_dir=Path(config.output_dir) / "analysis")
        for name, entry in report["outputs"].items():
            print(f"{name}: M={entry['active_dim']} structure={entry['structure']}")
    return 0


def cmd_campaign_analyze(args) -> int:
    records, bounds, config_doc = camp.load_run_records(args.run_dir)
    settings = camp.AnalysisSettings(**config_doc.get("analysis", {}))
    outputs = tuple(config_doc.get("outputs", ("resistance", "trim")))
    report = camp.analyze_campaign(records, bounds, settings, outputs=outputs,
                                   out_dir=Path(args.run_dir) / "analysis")
    for name, entry in report["outputs"].items():
        line = f"{name}: M={entry['active_dim']} structure={entry['structure']}"
        if "mean_normalized_error" in entry:
            line += f" mean normalized error {entry['mean_normalized_error']:.3f}"
        print(line)
    return 0


# --- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="morphreduce",
        description="FFD mesh morphing, DMD forecasting and active-subspace "
                    "reduction for shape-parametrized design studies.")
    groups = parser.add_subparsers(dest="group", required=True)

    g_ffd = groups.add_parser("ffd", help="free-form deformation").add_subparsers(
        dest="command", required=True)
    p = g_ffd.add_parser("deform", help="deform a mesh through a lattice")
    p.add_argument("--lattice", required=True, help="lattice+binding JSON document")
    p.add_argument("--mu", default=None, help="comma-separated parameter vector")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    _common_flags(p)
    p.set_defaults(func=cmd_ffd_deform)
    p = g_ffd.add_parser("sample", help="draw parameter vectors from the binding box")
    p.add_argument("--lattice", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--scheme", default="latin-hypercube",
                   choices=["latin-hypercube", "uniform-random"])
    p.add_argument("--out", dest="outfile", required=True)
    _common_flags(p)
    p.set_defaults(func=cmd_ffd_sample)

    g_dmd = groups.add_parser("dmd", help="dynamic mode decomposition").add_subparsers(
        dest="command", required=True)
    p = g_dmd.add_parser("fit", help="fit a model to a snapshot series")
    p.add_argument("--in", dest="infile", required=True,
                   help="snapshot CSV (t0,dt header) or .bin file")
    p.add_argument("--rank", default=None,
                   help="integer rank, energy fraction in (0,1], 'full' or 'auto'")
    p.add_argument("--modes", default="exact", choices=["exact", "projected"])
    p.add_argument("--out", dest="outfile", required=True)
    _common_flags(p)
    p.set_defaults(func=cmd_dmd_fit)
    p = g_dmd.add_parser("predict", help="evaluate a fitted model at a time")
    p.add_argument("--model", required=True)
    p.add_argument("--t", type=float, required=True)
    _common_flags(p)
    p.set_defaults(func=cmd_dmd_predict)

    g_as = groups.add_parser("as", help="active-subspace analysis").add_subparsers(
        dest="command", required=True)
    p = g_as.add_parser("analyze", help="analyze a sample table CSV")
    p.add_argument("--in", dest="infile", required=True,
                   help="CSV with columns mu_1..mu_m,f[,g_1..g_m]")
    p.add_argument("--boot", type=int, default=100)
    p.add_argument("--degree", type=int, default=4)
    p.add_argument("--split", type=float, default=0.75)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--rule", default="largest-gap",
                   choices=["largest-gap", "explicit", "threshold"])
    p.add_argument("--dim", type=int, default=None,
                   help="active dimension for the explicit rule")
    p.add_argument("--bounds", default=None,
                   help="parameter bounds 'lo,hi' (all) or per-parameter list")
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--plot-data", default=None,
                   help="directory for eigenvalue/bootstrap/summary CSVs")
    _common_flags(p)
    p.set_defaults(func=cmd_as_analyze)

    g_rb = groups.add_parser("rigidbody", help="rigid-body dynamics").add_subparsers(
        dest="command", required=True)
    p = g_rb.add_parser("simulate", help="integrate a trajectory")
    p.add_argument("--config", required=True, help="body JSON document")
    p.add_argument("--t-end", dest="t_end", type=float, required=True)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--out", dest="outfile", required=True)
    _common_flags(p)
    p.set_defaults(func=cmd_rigidbody_simulate)

    g_camp = groups.add_parser("campaign", help="design-study campaigns").add_subparsers(
        dest="command", required=True)
    p = g_camp.add_parser("run", help="run a sampling campaign")
    p.add_argument("--config", required=True,
                   help="campaign JSON document, or 'demo' for the shipped demo")
    p.add_argument("--out", default=None, help="override the run directory")
    p.add_argument("--no-resume", action="store_true",
                   help="recompute samples even when records exist")
    p.add_argument("--analyze", action="store_true",
                   help="run the analysis stage after sampling")
    _common_flags(p)
    p.set_defaults(func=cmd_campaign_run)
    p = g_camp.add_parser("analyze", help="analyze a finished run directory")
    p.add_argument("--run-dir", dest="run_dir", required=True)
    _common_flags(p)
    p.set_defaults(func=cmd_campaign_analyze)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ToolkitError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: io_not_found: {exc}", file=sys.stderr)
        return 1
    except IsADirectoryError as exc:
        print(f"error: io_error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
