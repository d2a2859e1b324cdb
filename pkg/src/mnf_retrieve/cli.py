"""Batch command-line interface.

Subcommands: synth, fit, retrieve, sweep, export-components, report.
Exit codes: 0 success, 2 usage/config, 3 I/O, 4 numerical failure,
5 partial sweep failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .cubes import ProfileCube, SpectralCube, load_cube, profiles_to_matrix, save_cube
from .decompose import (
    eigenvalue_curve,
    export_component_images,
    fit_mnf,
    fit_pca,
    load_basis,
    project,
    save_basis,
    signal_fraction,
)
from .errors import ConfigError, DataFormatError, NumericalError, PipelineError
from .evaluate import SweepResult, SweepRow, mean_rmse, rmse_profile, run_sweep
from .features import extract_neighborhood
from .noise import pooled_noise_covariance, pooled_signal_covariance
from .regression import fit_linear, load_model, predict, save_model
from .report import render_eigenvalue_figure, render_sweep_figures
from .synth import SceneConfig, generate_orbit_set

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4
EXIT_PARTIAL = 5

JOBS_ENV_VAR = "MNF_RETRIEVE_JOBS"


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: Path, subcommand: str, config: dict, inputs, outputs, seed=None):
    manifest = {
        "subcommand": subcommand,
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "seed": seed,
        "config": config,
        "inputs": {str(p): _sha256(Path(p)) for p in inputs},
        "outputs": {str(p): _sha256(Path(p)) for p in outputs},
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _default_jobs() -> int:
    env = os.environ.get(JOBS_ENV_VAR)
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"{JOBS_ENV_VAR} must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1


def _load_spectral(path) -> SpectralCube:
    cube = load_cube(path)
    if not isinstance(cube, SpectralCube):
        raise ConfigError(f"{path} is not a spectral cube")
    return cube


def _load_profile(path) -> ProfileCube:
    cube = load_cube(path)
    if not isinstance(cube, ProfileCube):
        raise ConfigError(f"{path} is not a profile cube")
    return cube


def _cube_files(out_dir: Path, stem: str):
    return [out_dir / f"{stem}.json", out_dir / f"{stem}.bin"]


def cmd_synth(args) -> int:
    config = SceneConfig.load(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs = generate_orbit_set(config, n_orbits=args.orbits)
    outputs = []
    for i, (spectral, profile) in enumerate(pairs):
        save_cube(spectral, out_dir / f"orbit{i}_spectral")
        save_cube(profile, out_dir / f"orbit{i}_profile")
        outputs += _cube_files(out_dir, f"orbit{i}_spectral")
        outputs += _cube_files(out_dir, f"orbit{i}_profile")
    cfg = asdict(config)
    _write_manifest(out_dir, "synth", cfg, [args.config], outputs, seed=config.seed)
    return EXIT_OK


def _eigenvalue_csv(basis, path: Path) -> None:
    curve, partial = eigenvalue_curve(basis)
    fractions = signal_fraction(basis) if basis.method == "mnf" else None
    with path.open("w", newline="", encoding="utf-8") as fh:
        names = ["index", "eigenvalue", "cumulative"]
        if fractions is not None:
            names.append("signal_fraction")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for i, (ev, cum) in enumerate(zip(basis.eigenvalues, curve)):
            row = [i, repr(float(ev)), repr(float(cum))]
            if fractions is not None:
                row.append(repr(float(fractions[i])))
            writer.writerow(row)
    if partial:
        path.with_suffix(".partial").write_text(
            "curve covers only the retained top-k part of the spectrum\n"
        )


def cmd_fit(args) -> int:
    cubes = [_load_spectral(p) for p in args.train]
    d = cubes[0].bands
    if args.k > d:
        raise ConfigError(f"k={args.k} exceeds band count {d}")
    signal_cov = pooled_signal_covariance(cubes)
    if args.method == "pca":
        basis = fit_pca(signal_cov, args.k)
    else:
        noise_cov = pooled_noise_covariance(cubes)
        basis = fit_mnf(signal_cov, noise_cov, args.k, ridge=args.ridge)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_basis(basis, out)
    base = out.with_suffix("") if out.suffix in (".json", ".bin") else out
    csv_path = base.parent / f"{base.name}_eigenvalues.csv"
    _eigenvalue_csv(basis, csv_path)
    outputs = [base.with_suffix(".json"), base.with_suffix(".bin"), csv_path]
    _write_manifest(
        base.parent,
        "fit",
        {"method": args.method, "k": args.k, "ridge": args.ridge, "train": args.train},
        args.train_files(),
        outputs,
    )
    return EXIT_OK


def cmd_retrieve(args) -> int:
    basis = load_basis(args.basis)
    cubes = [_load_spectral(p) for p in args.cubes]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []

    def design(cube):
        return extract_neighborhood(project(cube, basis), args.window).matrix

    if args.targets:
        if len(args.targets) != len(args.cubes):
            raise ConfigError("need one target profile cube per spectral cube")
        profiles = [_load_profile(p) for p in args.targets]
        x = np.vstack([design(c) for c in cubes])
        y = np.vstack([profiles_to_matrix(p) for p in profiles])
        model = fit_linear(
            x,
            y,
            ridge=args.ridge,
            metadata={
                "method": basis.method,
                "k": basis.k,
                "w": args.window,
                "pressure_axis": [float(p) for p in profiles[0].pressure_axis],
            },
        )
        model_path = Path(args.model) if args.model else out_dir / "model"
        save_model(model, model_path)
        base = model_path.with_suffix("") if model_path.suffix in (".json", ".bin") else model_path
        outputs += [base.with_suffix(".json"), base.with_suffix(".bin")]
    else:
        if not args.model:
            raise ConfigError("prediction mode requires --model")
        model = load_model(args.model)
        axis = model.metadata.get("pressure_axis")
        if axis is None:
            raise DataFormatError("model metadata lacks a pressure_axis")
        truth = [_load_profile(p) for p in args.truth] if args.truth else None
        if truth is not None and len(truth) != len(cubes):
            raise ConfigError("need one truth profile cube per spectral cube")
        all_true, all_pred = [], []
        for i, cube in enumerate(cubes):
            pred = predict(model, design(cube))
            if pred.shape[1] != len(axis):
                raise ConfigError("model output count disagrees with its pressure axis")
            out_cube = ProfileCube(
                values=pred.reshape(cube.rows, cube.cols, pred.shape[1]),
                pressure_axis=np.asarray(axis),
            )
            save_cube(out_cube, out_dir / f"prediction{i}")
            outputs += _cube_files(out_dir, f"prediction{i}")
            if truth is not None:
                all_true.append(profiles_to_matrix(truth[i]))
                all_pred.append(pred)
        if truth is not None:
            per_level = rmse_profile(np.vstack(all_true), np.vstack(all_pred))
            rmse_path = out_dir / "rmse.csv"
            with rmse_path.open("w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["level", "pressure", "rmse"])
                for level, (p, v) in enumerate(zip(axis, per_level)):
                    writer.writerow([level, repr(float(p)), repr(float(v))])
            outputs.append(rmse_path)

    inputs = list(args.input_files())
    _write_manifest(
        out_dir,
        "retrieve",
        {"basis": args.basis, "w": args.window, "ridge": args.ridge,
         "mode": "fit" if args.targets else "predict"},
        inputs,
        outputs,
    )
    return EXIT_OK


def _sweep_config(path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"sweep config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("sweep config must be a JSON object")
    known = {
        "scene", "seeds", "train", "test", "seed", "methods", "k", "w",
        "ridge", "mnf_ridge", "n_train_orbits", "n_test_orbits", "timing",
    }
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown sweep config field(s): {sorted(unknown)}")
    for req in ("methods", "k", "w"):
        if req not in data:
            raise ConfigError(f"sweep config missing field {req!r}")
    if ("scene" in data) == ("train" in data):
        raise ConfigError("sweep config needs exactly one of 'scene' or 'train'/'test'")
    return data


def _read_existing_sweep(out_dir: Path):
    """Parse a previous sweep output for --resume: done cells plus their rows."""
    results = out_dir / "sweep_results.csv"
    if not results.exists():
        return set(), []
    per_level_path = out_dir / "per_level.csv"
    levels = {}
    if per_level_path.exists():
        with per_level_path.open(newline="", encoding="utf-8") as fh:
            for r in csv.DictReader(fh):
                key = (r["method"], int(r["k"]), int(r["w"]), int(r["seed"]))
                levels.setdefault(key, []).append((float(r["pressure"]), float(r["rmse"])))
    done = set()
    rows = []
    with results.open(newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            key = (r["method"], int(r["k"]), int(r["w"]), int(r["seed"]))
            done.add(key)
            per = np.array([v for _, v in levels.get(key, [])]) if r["split"] == "test" else np.array([])
            rows.append(
                SweepRow(
                    method=r["method"], k=int(r["k"]), w=int(r["w"]), seed=int(r["seed"]),
                    split=r["split"], mean_rmse=float(r["mean_rmse"]),
                    per_level=per, wall_ms=float(r["wall_ms"]),
                )
            )
    return done, rows


def cmd_sweep(args) -> int:
    data = _sweep_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = args.jobs if args.jobs else _default_jobs()
    timing = bool(data.get("timing", True))
    ridge = float(data.get("ridge", 0.0))
    mnf_ridge = float(data.get("mnf_ridge", 1e-10))

    done, old_rows = (set(), [])
    if args.resume:
        done, old_rows = _read_existing_sweep(out_dir)

    overall = SweepResult()
    overall.rows.extend(old_rows)

    def run_one(train_pairs, test_pairs, seed):
        skip = {(m, k, w) for (m, k, w, s) in done if s == seed}
        result = run_sweep(
            train_pairs,
            test_pairs,
            methods=data["methods"],
            k_list=data["k"],
            w_list=data["w"],
            ridge=ridge,
            mnf_ridge=mnf_ridge,
            seed=seed,
            jobs=jobs,
            timing=timing,
            skip_cells=skip,
        )
        overall.extend(result)

    if "scene" in data:
        seeds = data.get("seeds", [0])
        n_train = int(data.get("n_train_orbits", 3))
        n_test = int(data.get("n_test_orbits", 1))
        for seed in seeds:
            scene = SceneConfig.from_dict({**data["scene"], "seed": int(seed)})
            pairs = generate_orbit_set(scene, n_orbits=n_train + n_test)
            run_one(pairs[:n_train], pairs[n_train:], int(seed))
    else:
        train_pairs = [
            (_load_spectral(s), _load_profile(p)) for s, p in (pair for pair in data["train"])
        ]
        test_pairs = [
            (_load_spectral(s), _load_profile(p)) for s, p in (pair for pair in data["test"])
        ]
        run_one(train_pairs, test_pairs, int(data.get("seed", 0)))

    results_path = out_dir / "sweep_results.csv"
    per_level_path = out_dir / "per_level.csv"
    results_path.write_text(overall.results_csv(), encoding="utf-8")
    per_level_path.write_text(overall.per_level_csv(), encoding="utf-8")
    outputs = [results_path, per_level_path]
    if overall.failures:
        failures_path = out_dir / "failures.csv"
        with failures_path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["method", "k", "w", "seed", "error"])
            writer.writerows(overall.failures)
        outputs.append(failures_path)
    _write_manifest(out_dir, "sweep", data, [args.config], outputs)
    if overall.failures:
        print(f"{len(overall.failures)} sweep cell(s) failed; see failures.csv", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _parse_indices(spec: str) -> list:
    indices = []
    for part in filter(None, (s.strip() for s in spec.split(","))):
        if "-" in part:
            lo, hi = part.split("-", 1)
            indices.extend(range(int(lo), int(hi) + 1))
        else:
            indices.append(int(part))
    return indices


def cmd_export_components(args) -> int:
    try:
        indices = _parse_indices(args.indices)
    except ValueError as exc:
        raise ConfigError(f"bad index spec {args.indices!r}: {exc}") from exc
    if not indices:
        raise ConfigError("empty component index list")
    basis = load_basis(args.basis)
    cube = _load_spectral(args.cube)
    scores = project(cube, basis)
    out_dir = Path(args.out)
    written = export_component_images(scores, indices, out_dir)
    _write_manifest(
        out_dir,
        "export-components",
        {"basis": args.basis, "cube": args.cube, "indices": indices},
        args.input_files(),
        list(written) + [out_dir / "scaling.json"],
    )
    return EXIT_OK


def cmd_report(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    inputs = []
    if args.sweep_dir:
        sweep_dir = Path(args.sweep_dir)
        results = sweep_dir / "sweep_results.csv"
        per_level = sweep_dir / "per_level.csv"
        written += render_sweep_figures(results, per_level, out_dir)
        inputs += [results, per_level]
    if args.eigenvalues:
        written.append(
            render_eigenvalue_figure(args.eigenvalues, out_dir / "eigenvalue_curve.png")
        )
        inputs.append(Path(args.eigenvalues))
    if not written:
        raise ConfigError("nothing to report: pass --sweep-dir and/or --eigenvalues")
    _write_manifest(
        out_dir,
        "report",
        {"sweep_dir": args.sweep_dir, "eigenvalues": args.eigenvalues},
        inputs,
        written,
    )
    return EXIT_OK


def _cube_inputs(paths):
    files = []
    for p in paths:
        base = Path(p)
        if base.suffix in (".json", ".bin"):
            base = base.with_suffix("")
        files += [base.with_suffix(".json"), base.with_suffix(".bin")]
    return files


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mnf-retrieve",
        description="PCA/MNF dimensionality reduction and linear retrieval of "
        "atmospheric profiles from gridded hyperspectral cubes.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate deterministic synthetic orbit cubes")
    p.add_argument("--config", required=True, help="SceneConfig JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--orbits", type=int, default=4,
                   help="orbit count (default 4: three train, one test)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit a PCA or MNF basis on training cubes")
    p.add_argument("--method", required=True, choices=["pca", "mnf"])
    p.add_argument("--train", required=True, nargs="+", help="training spectral cube paths")
    p.add_argument("-k", type=int, required=True, help="components to keep")
    p.add_argument("--ridge", type=float, default=1e-10,
                   help="relative noise-covariance ridge (MNF only)")
    p.add_argument("--out", required=True, help="basis output base path")
    p.set_defaults(func=cmd_fit, train_files=None)

    p = sub.add_parser("retrieve", help="fit a retrieval model or predict profiles")
    p.add_argument("--basis", required=True)
    p.add_argument("--cubes", required=True, nargs="+", help="spectral cube paths")
    p.add_argument("--targets", nargs="*", default=None,
                   help="profile cubes; when given, a model is fitted and saved")
    p.add_argument("--model", default=None,
                   help="model path (output in fit mode, input in predict mode)")
    p.add_argument("--truth", nargs="*", default=None,
                   help="truth profiles for an RMSE report in predict mode")
    p.add_argument("-w", "--window", type=int, default=1, help="odd neighborhood size")
    p.add_argument("--ridge", type=float, default=0.0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("sweep", help="run a method x k x window evaluation sweep")
    p.add_argument("--config", required=True, help="sweep config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=None,
                   help=f"parallel cells (default: ${JOBS_ENV_VAR} or CPU count)")
    p.add_argument("--resume", action="store_true",
                   help="rerun only cells missing from an earlier output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export-components", help="write per-component PGM strips")
    p.add_argument("--basis", required=True)
    p.add_argument("--cube", required=True)
    p.add_argument("--indices", required=True,
                   help="comma-separated indices, ranges allowed (e.g. 0-49)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_export_components)

    p = sub.add_parser("report", help="render figures from sweep / eigenvalue CSVs")
    p.add_argument("--sweep-dir", default=None, help="directory holding sweep CSVs")
    p.add_argument("--eigenvalues", default=None, help="eigenvalue curve CSV from `fit`")
    p.add_argument("--out", required=True, help="figure output directory")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    # input hash helpers used by manifests
    if args.command == "fit":
        args.train_files = lambda: _cube_inputs(args.train)
    elif args.command == "retrieve":
        args.input_files = lambda: _cube_inputs(
            [args.basis] + args.cubes + (args.targets or []) + (args.truth or [])
            + ([args.model] if args.model and not args.targets else [])
        )
    elif args.command == "export-components":
        args.input_files = lambda: _cube_inputs([args.basis, args.cube])

    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PipelineError as exc:  # pragma: no cover - catch-all
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
