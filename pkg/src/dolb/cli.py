"""Command-line runner: ``dolb run|show-models|replay|perf``.

Configuration files are INI-style::

    [case]
    case = tgv
    L = 64
    Re = 1600
    tmax = 12tc

    [dispatch]
    chains = COLL_BGK

Command-line flags override file keys.
"""
import argparse
import configparser
import csv
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from .accelerated import DispatchSet, MissingModelError, write_field_dump
from .bridge import mirror_to_accelerated, required_models, skip_inert_cells
from .cases import (
    CaseConfig, CaseError, gap_permeability, init_cavity, init_porous, init_tgv,
    load_voxels, measure_permeability, plates_geometry,
)
from .descriptor import moments
from .diagnostics import (
    DiagnosticsError, DiagnosticsSeries, averaged_profiles, enstrophy,
    kinetic_energy, vorticity_fd8,
)
from .multiblock import ExchangeError
from .perfmodel import PerfReport, load_catalog, measure_mlups, mlups, peak_glups

DEFAULTS = {
    "tgv": {"tmax": "12tc", "cadence": "0.25tc", "Re": 1600.0, "Ma": 0.2},
    "cavity": {"tmax": "100tc", "cadence": "1tc", "Re": 1000.0, "Ma": 0.1},
    "porous": {"tmax": "200000", "cadence": "250", "Re": 1.0, "Ma": 0.0},
}

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(CaseConfig)}


class ConfigError(ValueError):
    pass


def parse_time(text, t_c):
    """``"12tc"`` -> steps via t_c; a bare number is a step count."""
    text = str(text).strip().lower()
    if text.endswith("tc"):
        return int(round(float(text[:-2]) * t_c))
    return int(round(float(text)))


def _triple(text, cast=int):
    parts = [cast(p) for p in str(text).replace("x", ",").split(",") if p.strip()]
    if len(parts) != 3:
        raise ConfigError(f"expected three comma-separated values, got {text!r}")
    return tuple(parts)


def _coerce(key, value):
    kind = _FIELD_TYPES.get(key)
    if kind in ("int", int):
        return int(value)
    if kind in ("float", float):
        return float(value)
    if kind in ("tuple", tuple):
        return _triple(value, float if key == "dims" and "." in str(value) else int)
    return str(value)


def build_parser():
    p = argparse.ArgumentParser(prog="dolb", description="D3Q19 lattice Boltzmann runner")
    sub = p.add_subparsers(dest="command", required=True)

    def case_flags(q):
        q.add_argument("config", nargs="?", help="INI configuration file")
        q.add_argument("--case", choices=("tgv", "cavity", "porous"))
        q.add_argument("--L", type=int)
        q.add_argument("--Re", type=float)
        q.add_argument("--Ma", type=float)
        q.add_argument("--collision", choices=("bgk", "trt", "rr"))
        q.add_argument("--smagorinsky", type=float)
        q.add_argument("--precision", choices=("f32", "f64"))
        q.add_argument("--blocks")
        q.add_argument("--workers", type=int)
        q.add_argument("--drive", choices=("velocity", "pressure"))
        q.add_argument("--geometry", help="voxel file path or 'plates'")
        q.add_argument("--dims", help="voxel file extents X,Y,Z")
        q.add_argument("--dx", type=float, help="voxel size in metres")
        q.add_argument("--H", type=int, help="plate gap in fluid cells")
        q.add_argument("--omega", type=float, help="porous relaxation rate")
        q.add_argument("--tmax", help="run length: steps, or NtC for convective times")
        q.add_argument("--cadence", help="diagnostics interval: steps or NtC")

    run = sub.add_parser("run", help="run a case and write CSV/manifest artifacts")
    case_flags(run)
    run.add_argument("--out", default="out")
    run.add_argument("--dump-every", help="field dump interval: steps or NtC")
    run.add_argument("--perf-device", help="device for fraction-of-peak (a100, host)")
    run.add_argument("--host-bandwidth", type=float, help="measured host bytes/s")
    run.add_argument("--reference-check", action="store_true",
                     help="step the reference lattice alongside and report divergence")

    show = sub.add_parser("show-models", help="print the dispatch set a config needs")
    case_flags(show)
    show.add_argument("--write", action="store_true",
                      help="insert the list into the config file's [dispatch] section")

    rep = sub.add_parser("replay", help="rerun from a manifest")
    rep.add_argument("manifest")
    rep.add_argument("--out", required=True)

    perf = sub.add_parser("perf", help="time a case (mean of three repetitions)")
    case_flags(perf)
    perf.add_argument("--steps", type=int, default=20)
    perf.add_argument("--perf-device")
    perf.add_argument("--host-bandwidth", type=float)
    return p


def resolve(args):
    """Merge config file and flags into ``(CaseConfig, dispatch chains or None)``."""
    ini = configparser.ConfigParser()
    ini.optionxform = str
    if getattr(args, "config", None):
        if not ini.read(args.config):
            raise ConfigError(f"cannot read config {args.config}")
    values = dict(ini["case"]) if ini.has_section("case") else {}
    if "case" in values:
        values["kind"] = values.pop("case")
    flag_map = {"case": "kind", "blocks": "block_grid"}
    if getattr(args, "dump_every", None) is not None:
        values["dump_every"] = args.dump_every
    for name in ("case", "L", "Re", "Ma", "collision", "smagorinsky", "precision",
                 "blocks", "workers", "drive", "geometry", "dims", "dx", "H", "omega",
                 "tmax", "cadence"):
        v = getattr(args, name, None)
        if v is not None:
            values[flag_map.get(name, name)] = v
    if "blocks" in values:
        values["block_grid"] = values.pop("blocks")
    kind = values.get("kind", "tgv")
    if kind not in DEFAULTS:
        raise ConfigError(f"unknown case {kind!r}; valid: tgv, cavity, porous")
    for key in ("tmax", "cadence"):
        values.setdefault(key, DEFAULTS[kind][key])
    for key in ("Re", "Ma"):
        values.setdefault(key, DEFAULTS[kind][key])
    kwargs = {}
    for key, v in values.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown configuration key {key!r}")
        kwargs[key] = _coerce(key, v)
    if kind == "porous":
        kwargs.setdefault("collision", "trt")
        kwargs.setdefault("Ma", 0.0)
    try:
        config = CaseConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    dispatch = None
    if ini.has_section("dispatch") and ini["dispatch"].get("chains", "").strip():
        dispatch = [c.strip() for c in ini["dispatch"]["chains"].split(",") if c.strip()]
    return config, dispatch


def build_case(config):
    """Reference lattice plus case-specific context."""
    if config.kind == "tgv":
        return init_tgv(config.L, config.Ma, config), None
    if config.kind == "cavity":
        return init_cavity(config.L, config.Re, config.Ma, config), None
    if config.geometry == "plates":
        geom = plates_geometry(config.H, config.plate_length)
        up = 0 if config.upstream < 0 else config.upstream
        down = 0 if config.downstream < 0 else config.downstream
    else:
        if not config.dims:
            raise ConfigError("voxel geometry needs --dims X,Y,Z")
        geom = load_voxels(config.geometry, config.dims, config.threshold, config.dx)
        up = 40 if config.upstream < 0 else config.upstream
        down = 40 if config.downstream < 0 else config.downstream
    setup = init_porous(geom, up, down, config.drive, config.porous_omega, config.lam,
                        config.delta_rho, config.u_in, config)
    return setup.lattice, setup


def _fluid_region(config, setup):
    """Where the diagnostics look: wall cells hold no physical state."""
    if config.kind == "cavity":
        return (slice(1, -1),) * 3, None
    if config.kind == "porous":
        return (slice(None),) * 3, setup.fluid
    return (slice(None),) * 3, None


def _diagnostics(pops, periodic, region=(slice(None),) * 3, fluid=None):
    rho, u, _ = moments(pops.astype(np.float64), check=False)
    if fluid is not None:
        u = np.where(fluid, u, 0.0)
    v = u[(slice(None),) + region]
    k = kinetic_energy(v)
    try:
        eps = enstrophy(vorticity_fd8(v, periodic))
    except DiagnosticsError:
        eps = 0.0
    return rho, u, k, eps


def run_case(config, out, dispatch_names=None, perf_device=None,
             host_bandwidth=None, reference_check=False, log=print):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    ref, setup = build_case(config)
    acc = mirror_to_accelerated(ref, config.block_grid, config.workers, config.dtype)
    if config.kind == "porous":
        skip_inert_cells(acc)
    needed = required_models(acc)
    dispatch = DispatchSet(dispatch_names) if dispatch_names else None
    t_c = config.t_c
    tmax = parse_time(config.tmax, t_c)
    cadence = max(1, parse_time(config.cadence, t_c))
    dump_every = parse_time(config.dump_every or "0", t_c)

    extra = {"tgv": ("k_norm", "eps_norm"), "cavity": ("change",),
             "porous": ("permeability",)}[config.kind]
    series = DiagnosticsSeries(columns=("step", "t", "k", "eps") + extra)
    files = []
    max_div = 0.0
    region, fluid = _fluid_region(config, setup)
    _, u0, k0, eps0 = _diagnostics(acc.populations(), acc.periodic, region, fluid)
    prev_u = u0
    prev_k = None
    status = "completed"
    if config.kind == "tgv":
        series.append(0, 0.0, k0, eps0, 1.0, 1.0)
    elif config.kind == "cavity":
        series.append(0, 0.0, k0, eps0, 0.0)
    snapshots = []
    wall = 0.0
    step = 0
    while step < tmax:
        stop = min((step // cadence + 1) * cadence, tmax)
        if dump_every:
            stop = min(stop, (step // dump_every + 1) * dump_every)
        n = stop - step
        t0 = time.perf_counter()
        acc.run(n, dispatch)
        wall += time.perf_counter() - t0
        if reference_check:
            ref.run(n)
            diff = np.max(np.abs(np.moveaxis(ref.populations, -1, 0) - acc.populations()))
            max_div = max(max_div, float(diff))
        step += n
        pops = acc.populations()
        if dump_every and step % dump_every == 0:
            name = f"field_{step:08d}.dlb"
            write_field_dump(out / name, pops)
            files.append(name)
        if step % cadence and step != tmax:
            continue
        rho, u, k, eps = _diagnostics(pops, acc.periodic, region, fluid)
        t = step / t_c
        if config.kind == "tgv":
            series.append(step, t, k, eps, k / k0, eps / eps0 if eps0 else 0.0)
        elif config.kind == "cavity":
            inner = (slice(None),) + region
            norm = np.linalg.norm(u[inner])
            change = float(np.linalg.norm((u - prev_u)[inner]) / norm) if norm else 0.0
            series.append(step, t, k, eps, change)
            snapshots.append(u[0])
            snapshots.append(u[2])
            snapshots = snapshots[-2:]
            prev_u = u
        else:
            if config.geometry == "plates":
                perm = gap_permeability(setup, rho, u)
            else:
                perm = measure_permeability(setup, rho, u)
            series.append(step, t, k, eps, perm)
            if prev_k is not None and abs(perm - prev_k) <= config.steady_tol * abs(perm):
                status = "steady"
                break
            prev_k = perm

    series.write_csv(out / "series.csv")
    files.append("series.csv")

    cells = acc.n_cells
    rate = mlups(cells, step, wall) if wall > 0 else 0.0
    devices = load_catalog(host_bandwidth=host_bandwidth)
    frac = None
    if perf_device:
        if perf_device not in devices:
            raise ConfigError(f"unknown device {perf_device!r}; valid: {', '.join(devices)}")
        frac = rate / (peak_glups(devices[perf_device], config.precision) * 1e3)
    report = PerfReport(cells, step, wall, rate, frac, (rate,))
    with open(out / "perf.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PerfReport.CSV_FIELDS)
        w.writerow(report.csv_row())
    files.append("perf.csv")

    if config.kind == "cavity" and snapshots:
        c = config.L // 2 + 1
        ux, uz = snapshots
        # fluid occupies indices 1..L; sample the centre lines of y = L/2
        prof = averaged_profiles([ux[1:-1, 1:-1, 1:-1]],
                                 {"ux_vs_z": (2, (c - 1, c - 1))})
        prof.update(averaged_profiles([uz[1:-1, 1:-1, 1:-1]],
                                      {"uz_vs_x": (0, (c - 1, c - 1))}))
        with open(out / "profiles.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("coord", "ux_vs_z", "uz_vs_x"))
            for a, b, cc in zip(prof["ux_vs_z"][0], prof["ux_vs_z"][1], prof["uz_vs_x"][1]):
                w.writerow(["%.17g" % a, "%.17g" % (b / config.u_lattice),
                            "%.17g" % (cc / config.u_lattice)])
        files.append("profiles.csv")

    manifest = {
        "config": dataclasses.asdict(config),
        "registry": {name: acc.registry.tag_of(name) for name in acc.registry.chains},
        "dispatch": sorted(dispatch) if dispatch else needed,
        "status": status,
        "steps": step,
        "files": files,
    }
    if reference_check:
        manifest["reference_max_divergence"] = max_div
        log(f"reference check: max |f_acc - f_ref| = {max_div:.3e}")
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    if config.kind == "porous":
        log(f"permeability (lattice units): {series.rows[-1][-1]:.10g} ({status})")
    log(f"{step} steps, {rate:.2f} MLUPS, artifacts in {out}")
    return manifest


def show_models(config):
    ref, _ = build_case(config)
    return sorted({dyn.chain().name for dyn in ref.chains})


def _write_dispatch(path, chains):
    ini = configparser.ConfigParser()
    ini.optionxform = str
    ini.read(path)
    if not ini.has_section("dispatch"):
        ini.add_section("dispatch")
    ini["dispatch"]["chains"] = ", ".join(chains)
    with open(path, "w") as fh:
        ini.write(fh)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            m = json.loads(Path(args.manifest).read_text())
            cfg = dict(m["config"])
            for key in ("block_grid", "dims"):
                cfg[key] = tuple(cfg[key])
            config = CaseConfig(**cfg)
            run_case(config, args.out, m.get("dispatch"))
            return 0
        config, dispatch = resolve(args)
        if args.command == "show-models":
            chains = show_models(config)
            print("\n".join(chains))
            if args.write:
                if not args.config:
                    raise ConfigError("--write needs a config file")
                _write_dispatch(args.config, chains)
            return 0
        if args.command == "perf":
            ref, _ = build_case(config)
            acc = mirror_to_accelerated(ref, config.block_grid, config.workers, config.dtype)
            devices = load_catalog(host_bandwidth=args.host_bandwidth)
            dev = devices.get(args.perf_device) if args.perf_device else None
            rep = measure_mlups(acc.run, acc.n_cells, 1, args.steps, 3, dev,
                                config.precision)
            print(",".join(PerfReport.CSV_FIELDS))
            print(",".join(rep.csv_row()))
            return 0
        run_case(config, args.out, dispatch, args.perf_device,
                 args.host_bandwidth, args.reference_check)
        return 0
    except (ConfigError, CaseError, MissingModelError, ExchangeError, KeyError,
            ValueError, OSError) as exc:
        print(f"dolb: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
