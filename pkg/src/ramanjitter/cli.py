"""Experiment driver: config files, run orchestration, CSV/manifest output.

Subcommands::

    ramanjitter simulate --config run.json [--out DIR] [--seed N]
                         [--trajectories N] [--noise vacuum,gain,raman]
                         [--response instantaneous|delayed] [--workers N]
                         [--no-certify]
    ramanjitter predict  --config run.json [--out DIR]
    ramanjitter spectrum --config run.json [--out DIR]
    ramanjitter compare  --simulate DIR_OR_CSV --predict DIR_OR_CSV
                         [--component NAME] [--sigma K] [--out DIR]

The config file is JSON with sections mirroring the run description (see
``configs/`` for shipped profiles).  Command-line flags override file
values.  All outputs are deterministic functions of (config, seed): no
timestamps, fixed float formatting, fixed trajectory chunking.

The jitter CSV has one row per snapshot with columns ``zeta, x_meters,
var_dimensionless, var_seconds2, std_err, n_traj``; ``predict`` appends one
column per analytic component (vacuum, gordon_haus, raman).  The spectrum
CSV has columns ``omega, fluorescence, raman_gain, soliton_spectrum``.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .analysis import (
    DEFAULT_CHUNK_SIZE,
    run_jitter_ensemble,
    step_doubling_certificate,
)
from .grid import ComplexField, TimeGrid, forward_transform
from .integrator import PropagationConfig
from .noise import NoiseSettings
from .physics import (
    FiberConfig,
    LorentzianComponent,
    RamanModel,
    derive_scales,
    fluorescence,
    raman_gain,
)
from .solitons import (
    BrightSolitonParams,
    DarkSolitonParams,
    bright_field,
    overlap_integral,
    predict_bright_jitter,
    predict_dark_jitter,
)

OUTPUT_DIR_ENV = "RAMANJITTER_OUT"


class ConfigError(ValueError):
    """Raised with a field-level message for invalid configuration input."""


@dataclass
class ExperimentConfig:
    """Fully resolved experiment description."""

    fiber: FiberConfig
    raman: RamanModel
    grid: TimeGrid
    propagation: PropagationConfig
    soliton_kind: str
    soliton: object
    n_trajectories: int
    master_seed: int
    workers: int
    chunk_size: int
    certify: bool
    output_dir: str
    raw: dict


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing required field '{where}.{key}'")
    return section[key]


def load_config(path: str, overrides: dict | None = None) -> ExperimentConfig:
    """Parse and validate a JSON experiment config, applying CLI overrides."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return build_config(raw, overrides)


def build_config(raw: dict, overrides: dict | None = None) -> ExperimentConfig:
    raw = copy.deepcopy(raw)
    overrides = overrides or {}

    fib = raw.get("fiber")
    if fib is None:
        raise ConfigError("missing required section 'fiber'")
    try:
        fiber = FiberConfig(
            t0=float(_require(fib, "t0", "fiber")),
            k2=float(_require(fib, "k2", "fiber")),
            mode_area=float(_require(fib, "mode_area", "fiber")),
            n2_kerr=float(_require(fib, "n2_kerr", "fiber")),
            carrier_wavelength=float(_require(fib, "carrier_wavelength", "fiber")),
            gain_per_meter=float(_require(fib, "gain_per_meter", "fiber")),
            temperature=float(fib.get("temperature", 300.0)),
            dispersion_sign=int(_require(fib, "dispersion_sign", "fiber")),
        )
    except ValueError as exc:
        raise ConfigError(f"fiber: {exc}") from exc

    ram = raw.get("raman", {})
    components = []
    for i, comp in enumerate(ram.get("components", [])):
        try:
            components.append(
                LorentzianComponent(
                    strength=float(_require(comp, "F", f"raman.components[{i}]")),
                    delta_rad_per_s=float(
                        _require(comp, "delta_rad_per_s", f"raman.components[{i}]")
                    ),
                    omega_rad_per_s=float(
                        _require(comp, "omega_rad_per_s", f"raman.components[{i}]")
                    ),
                )
            )
        except ValueError as exc:
            raise ConfigError(f"raman.components[{i}]: {exc}") from exc
    if not components:
        raise ConfigError("raman.components must list at least one Lorentzian")
    raman = RamanModel(
        components=tuple(components),
        temperature=float(ram.get("temperature", fiber.temperature)),
        t0=fiber.t0,
    )

    grd = raw.get("grid", {})
    grid = TimeGrid(
        n_points=int(grd.get("n_points", 1024)),
        tau_max=float(grd.get("tau_max", 20.0)),
    )

    sol = raw.get("soliton", {})
    kind = sol.get("kind", "bright")
    if kind == "bright":
        soliton = BrightSolitonParams(
            A=float(sol.get("A", 1.0)), V=float(sol.get("V", 0.0))
        )
    elif kind == "dark":
        soliton = DarkSolitonParams(
            phi0=float(sol.get("phi0", 1.0)), A=float(sol.get("A", 1.0))
        )
    else:
        raise ConfigError(f"soliton.kind must be 'bright' or 'dark', got {kind!r}")

    scales = derive_scales(fiber)
    noi = raw.get("noise", {})
    toggles = {
        "vacuum": bool(noi.get("vacuum", True)),
        "gain": bool(noi.get("gain", False)),
        "raman": bool(noi.get("raman", False)),
    }
    if "noise" in overrides and overrides["noise"] is not None:
        enabled = [s for s in overrides["noise"].split(",") if s]
        for name in enabled:
            if name not in toggles:
                raise ConfigError(f"unknown noise source {name!r} in --noise")
        toggles = {k: (k in enabled) for k in toggles}

    ens = raw.get("ensemble", {})
    master_seed = int(overrides.get("seed") or ens.get("master_seed", 0))
    n_traj = int(overrides.get("trajectories") or ens.get("n_trajectories", 1))
    if n_traj < 1:
        raise ConfigError("ensemble.n_trajectories must be >= 1")

    noise = NoiseSettings(
        n_bar=float(noi.get("n_bar", scales.n_bar)),
        alpha_g=scales.alpha_g,
        alpha_a=scales.alpha_g,
        enable_vacuum=toggles["vacuum"],
        enable_gain=toggles["gain"],
        enable_raman=toggles["raman"],
        raman=raman,
        master_seed=master_seed,
    )

    prop = raw.get("propagation", {})
    response = overrides.get("response") or prop.get("response_mode", "instantaneous")
    try:
        propagation = PropagationConfig(
            dzeta=float(prop.get("d_zeta", 0.005)),
            total_zeta=float(_require(prop, "total_zeta", "propagation")),
            snapshot_every=float(prop.get("snapshot_every", prop.get("total_zeta", 1.0))),
            dispersion_sign=fiber.dispersion_sign,
            noise=noise,
            response_mode=response,
        )
    except ValueError as exc:
        raise ConfigError(f"propagation: {exc}") from exc

    out_dir = (
        overrides.get("out")
        or raw.get("output_dir")
        or os.environ.get(OUTPUT_DIR_ENV)
        or "."
    )
    return ExperimentConfig(
        fiber=fiber,
        raman=raman,
        grid=grid,
        propagation=propagation,
        soliton_kind=kind,
        soliton=soliton,
        n_trajectories=n_traj,
        master_seed=master_seed,
        workers=int(overrides.get("workers") or ens.get("workers", 1)),
        chunk_size=int(ens.get("chunk_size", DEFAULT_CHUNK_SIZE)),
        certify=bool(overrides.get("certify", True)),
        output_dir=out_dir,
        raw=raw,
    )


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def write_csv(path: str, header: list[str], columns: list[np.ndarray]) -> None:
    rows = len(columns[0])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(rows):
            fh.write(",".join(_fmt(col[i]) for col in columns) + "\n")


def read_csv(path: str) -> dict[str, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[1] != len(header):
        raise ConfigError(f"{path}: column count does not match header")
    return {name: data[:, i] for i, name in enumerate(header)}


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        digest.update(fh.read())
    return digest.hexdigest()


def _write_manifest(cfg: ExperimentConfig, out_dir: str, entries: dict) -> str:
    scales = derive_scales(cfg.fiber)
    manifest = {
        "code_version": __version__,
        "config": cfg.raw,
        "master_seed": cfg.master_seed,
        "n_trajectories": cfg.n_trajectories,
        "chunk_size": cfg.chunk_size,
        "derived_scales": {
            "x0_meters": scales.x0,
            "n_bar": scales.n_bar,
            "alpha_g": scales.alpha_g,
            "n_bar_used": cfg.propagation.noise.n_bar,
        },
        **entries,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def run_simulate(cfg: ExperimentConfig) -> dict:
    """Monte Carlo run; writes jitter.csv and manifest.json."""
    os.makedirs(cfg.output_dir, exist_ok=True)
    result = run_jitter_ensemble(
        cfg.soliton_kind,
        cfg.soliton,
        cfg.grid,
        cfg.propagation,
        cfg.n_trajectories,
        master_seed=cfg.master_seed,
        workers=cfg.workers,
        chunk_size=cfg.chunk_size,
    )
    scales = derive_scales(cfg.fiber)
    t0 = cfg.fiber.t0
    csv_path = os.path.join(cfg.output_dir, "jitter.csv")
    write_csv(
        csv_path,
        ["zeta", "x_meters", "var_dimensionless", "var_seconds2", "std_err", "n_traj"],
        [
            result.zeta_values,
            result.zeta_values * scales.x0,
            result.variance,
            result.variance * t0**2,
            result.std_error,
            np.full(len(result.zeta_values), float(cfg.n_trajectories)),
        ],
    )
    certificate = None
    if cfg.certify:
        certificate = step_doubling_certificate(
            cfg.soliton_kind,
            cfg.soliton,
            cfg.grid,
            cfg.propagation,
            n_trajectories=min(64, cfg.n_trajectories) if cfg.n_trajectories > 1 else 1,
            master_seed=cfg.master_seed,
        )
    noise = cfg.propagation.noise
    manifest_path = _write_manifest(
        cfg,
        cfg.output_dir,
        {
            "command": "simulate",
            "noise_toggles": {
                "vacuum": noise.enable_vacuum,
                "gain": noise.enable_gain,
                "raman": noise.enable_raman,
            },
            "outputs": {"jitter_csv": "jitter.csv", "jitter_csv_sha256": _sha256(csv_path)},
            "step_doubling_certificate": certificate,
        },
    )
    return {"jitter_csv": csv_path, "manifest": manifest_path, "result": result}


def run_predict(cfg: ExperimentConfig) -> dict:
    """Analytic jitter decomposition on the same snapshot grid."""
    os.makedirs(cfg.output_dir, exist_ok=True)
    scales = derive_scales(cfg.fiber)
    noise = cfg.propagation.noise
    zetas = cfg.propagation.snapshot_zetas()
    overlap = overlap_integral(cfg.raman, 1.0)
    if cfg.soliton_kind == "bright":
        pred = predict_bright_jitter(
            zetas, cfg.soliton.A, scales.alpha_g, overlap, noise.n_bar
        )
    else:
        pred = predict_dark_jitter(
            zetas, cfg.soliton.phi0, scales.alpha_g, overlap, noise.n_bar
        )
    t0 = cfg.fiber.t0
    csv_path = os.path.join(cfg.output_dir, "predict.csv")
    write_csv(
        csv_path,
        [
            "zeta",
            "x_meters",
            "var_dimensionless",
            "var_seconds2",
            "std_err",
            "n_traj",
            "vacuum",
            "gordon_haus",
            "raman",
        ],
        [
            zetas,
            zetas * scales.x0,
            pred.total,
            pred.total * t0**2,
            np.zeros(len(zetas)),
            np.zeros(len(zetas)),
            pred.vacuum,
            pred.gordon_haus,
            pred.raman,
        ],
    )
    manifest_path = _write_manifest(
        cfg,
        cfg.output_dir,
        {
            "command": "predict",
            "overlap_integral": overlap,
            "outputs": {"predict_csv": "predict.csv", "predict_csv_sha256": _sha256(csv_path)},
        },
    )
    return {"predict_csv": csv_path, "manifest": manifest_path, "prediction": pred}


def run_spectrum(cfg: ExperimentConfig) -> dict:
    """Fluorescence, gain profile and reference soliton spectrum as CSV."""
    os.makedirs(cfg.output_dir, exist_ok=True)
    grid = cfg.grid
    order = np.argsort(grid.frequencies)
    omega = grid.frequencies[order]
    fluor = fluorescence(omega, cfg.raman)
    gain = raman_gain(omega, cfg.raman)
    if cfg.soliton_kind == "bright":
        ref = bright_field(BrightSolitonParams(A=getattr(cfg.soliton, "A", 1.0)), grid)
    else:
        ref = bright_field(BrightSolitonParams(A=1.0), grid)
    soliton_spec = np.abs(forward_transform(ref).values[order]) ** 2
    csv_path = os.path.join(cfg.output_dir, "spectrum.csv")
    write_csv(
        csv_path,
        ["omega", "fluorescence", "raman_gain", "soliton_spectrum"],
        [omega, fluor, gain, soliton_spec],
    )
    manifest_path = _write_manifest(
        cfg,
        cfg.output_dir,
        {
            "command": "spectrum",
            "outputs": {"spectrum_csv": "spectrum.csv", "spectrum_csv_sha256": _sha256(csv_path)},
        },
    )
    return {"spectrum_csv": csv_path, "manifest": manifest_path}


_COMPONENT_FOR_TOGGLES = {
    (True, False, False): "vacuum",
    (False, True, False): "gordon_haus",
    (False, False, True): "raman",
    (True, True, True): "total",
}


def _resolve_csv(path: str, default_name: str) -> str:
    if os.path.isdir(path):
        return os.path.join(path, default_name)
    return path


def run_compare(
    simulate_path: str,
    predict_path: str,
    component: str | None = None,
    sigma: float = 3.0,
    out_dir: str | None = None,
) -> dict:
    """Ratio table numeric/analytic with standard errors and a pass verdict.

    The analytic column is chosen from the simulate run's noise toggles
    (recorded in its manifest) unless ``component`` is given.  Rows with a
    zero analytic value are reported but excluded from the verdict.
    """
    sim_csv = _resolve_csv(simulate_path, "jitter.csv")
    pre_csv = _resolve_csv(predict_path, "predict.csv")
    sim = read_csv(sim_csv)
    pre = read_csv(pre_csv)
    if len(sim["zeta"]) != len(pre["zeta"]) or not np.allclose(
        sim["zeta"], pre["zeta"], rtol=0, atol=1e-12
    ):
        raise ConfigError("simulate and predict outputs have mismatched zeta grids")
    if component is None:
        manifest_path = os.path.join(os.path.dirname(sim_csv), "manifest.json")
        component = "total"
        if os.path.exists(manifest_path):
            with open(manifest_path, "r", encoding="utf-8") as fh:
                toggles = json.load(fh).get("noise_toggles")
            if toggles:
                key = (toggles["vacuum"], toggles["gain"], toggles["raman"])
                component = _COMPONENT_FOR_TOGGLES.get(key, "total")
    if component == "total":
        analytic = pre["var_dimensionless"]
    elif component in pre:
        analytic = pre[component]
    else:
        raise ConfigError(f"predict output has no component column {component!r}")
    numeric = sim["var_dimensionless"]
    err = sim["std_err"]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(analytic > 0, numeric / analytic, np.nan)
        ratio_err = np.where(analytic > 0, err / analytic, np.nan)
    usable = analytic > 0
    deviations = np.abs(numeric[usable] - analytic[usable])
    allowed = sigma * err[usable]
    passed = bool(np.all(deviations <= allowed)) if usable.any() else True
    lines = [f"component: {component}", f"sigma: {sigma:g}"]
    lines.append("zeta,numeric,analytic,ratio,ratio_std_err,within")
    for i, z in enumerate(sim["zeta"]):
        if analytic[i] > 0:
            ok = abs(numeric[i] - analytic[i]) <= sigma * err[i]
            lines.append(
                f"{_fmt(z)},{_fmt(numeric[i])},{_fmt(analytic[i])},"
                f"{_fmt(ratio[i])},{_fmt(ratio_err[i])},{'yes' if ok else 'no'}"
            )
        else:
            lines.append(f"{_fmt(z)},{_fmt(numeric[i])},{_fmt(analytic[i])},nan,nan,skipped")
    lines.append(f"verdict: {'PASS' if passed else 'FAIL'}")
    report = "\n".join(lines) + "\n"
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "compare.txt"), "w", encoding="utf-8") as fh:
            fh.write(report)
    return {"component": component, "ratio": ratio, "passed": passed, "report": report}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ramanjitter",
        description="Soliton timing-jitter simulation and analytics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default=None, help="output directory")

    sim = sub.add_parser("simulate", help="run a Monte Carlo jitter ensemble")
    add_common(sim)
    sim.add_argument("--seed", type=int, default=None, help="master seed override")
    sim.add_argument("--trajectories", type=int, default=None)
    sim.add_argument("--noise", default=None, help="comma list of vacuum,gain,raman")
    sim.add_argument("--response", choices=["instantaneous", "delayed"], default=None)
    sim.add_argument("--workers", type=int, default=None)
    sim.add_argument("--no-certify", action="store_true")

    pre = sub.add_parser("predict", help="write the analytic jitter decomposition")
    add_common(pre)

    spec = sub.add_parser("spectrum", help="write fluorescence/gain/soliton spectra")
    add_common(spec)

    cmp_ = sub.add_parser("compare", help="compare simulate and predict outputs")
    cmp_.add_argument("--simulate", required=True, help="simulate output dir or CSV")
    cmp_.add_argument("--predict", required=True, help="predict output dir or CSV")
    cmp_.add_argument("--component", default=None)
    cmp_.add_argument("--sigma", type=float, default=3.0)
    cmp_.add_argument("--out", default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "compare":
            result = run_compare(
                args.simulate, args.predict, component=args.component,
                sigma=args.sigma, out_dir=args.out,
            )
            sys.stdout.write(result["report"])
            return 0 if result["passed"] else 1
        overrides = {"out": args.out}
        if args.command == "simulate":
            overrides.update(
                seed=args.seed,
                trajectories=args.trajectories,
                noise=args.noise,
                response=args.response,
                workers=args.workers,
                certify=not args.no_certify,
            )
        cfg = load_config(args.config, overrides)
        if args.command == "simulate":
            out = run_simulate(cfg)
            sys.stdout.write(f"wrote {out['jitter_csv']}\n")
        elif args.command == "predict":
            out = run_predict(cfg)
            sys.stdout.write(f"wrote {out['predict_csv']}\n")
        elif args.command == "spectrum":
            out = run_spectrum(cfg)
            sys.stdout.write(f"wrote {out['spectrum_csv']}\n")
        return 0
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
