"""Run orchestration and result serialization.

Every product is delimited text with a self-describing ``#`` header block
(units, grid, version); N(z,t) maps can alternatively be written as a flat
little-endian binary documented in the README.  Writes are atomic
(temp-then-rename) and partial outputs are removed if a run fails, leaving
only a machine-readable error record.
"""

from __future__ import annotations

import json
import math
import os
import struct
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, apply_sweep_parameter, serialize_config
from .core import (
    Branch,
    Grid,
    PhysicalParams,
    SimulationError,
    build_grid,
    default_grid,
)
from .dynamics import (
    CalibrationResult,
    IntegratorConfig,
    calibrate_coupling,
    evolve,
    evolve_single,
)
from .observables import (
    ScatterReport,
    ZGrid,
    build_scatter_report,
    photon_density,
    real_space_wavepacket,
    single_density,
)
from .oracles import lorentzian_transmission
from .wavepackets import (
    PulseSpec,
    TwoPhotonInputSpec,
    build_excited_emitter_state,
    build_single_photon_state,
    build_two_photon_state,
)

_DENSITY_MAGIC = b"WGSCDENS"
_DENSITY_VERSION = 1


def _r(x: float) -> str:
    """Shortest exact decimal form; keeps tables byte-reproducible."""
    return repr(float(x))


# ---------------------------------------------------------------------------
# config resolution

def pulse_from_section(section) -> PulseSpec:
    try:
        return PulseSpec(sigma=section.sigma, z0=section.z0, delta=section.delta,
                         direction=section.branch,
                         allow_outgoing=section.allow_outgoing)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def resolve_grid(cfg: RunConfig) -> Grid:
    sigmas = [p.sigma for p in (cfg.pulse1, cfg.pulse2) if p is not None]
    if cfg.grid.n_per_branch is not None and cfg.grid.kappa_max is not None:
        return build_grid(cfg.grid.n_per_branch, cfg.grid.kappa_max)
    auto = default_grid(min(sigmas), max(sigmas)) if sigmas else default_grid(1.0)
    n = cfg.grid.n_per_branch if cfg.grid.n_per_branch is not None else auto.n_per_branch
    kmax = cfg.grid.kappa_max if cfg.grid.kappa_max is not None else auto.kappa_max
    return build_grid(n, kmax)


def resolve_params(cfg: RunConfig, grid: Grid) -> tuple[PhysicalParams, CalibrationResult | None]:
    phys = cfg.physical
    if phys.coupling is not None:
        return PhysicalParams(gamma=phys.gamma, v_g=phys.v_g,
                              g=phys.coupling, k0=phys.k0), None
    calib = calibrate_coupling(phys.gamma, grid, v_g=phys.v_g)
    return PhysicalParams(gamma=phys.gamma, v_g=phys.v_g,
                          g=calib.g, k0=phys.k0), calib


def resolve_integrator(cfg: RunConfig) -> IntegratorConfig:
    times = sorted(set(cfg.integrator.checkpoint_times)
                   | set(cfg.output.snapshot_times))
    return IntegratorConfig(
        t_end=cfg.integrator.t_end,
        dt=cfg.integrator.dt,
        checkpoint_times=tuple(times),
        observable_stride=cfg.integrator.observable_stride,
    )


def _density_zgrid(cfg: RunConfig, grid: Grid, n_z: int) -> ZGrid:
    out = cfg.output
    if out.density_z_min is not None:
        z_min, z_max = out.density_z_min, out.density_z_max
    else:
        box = 2.0 * math.pi / grid.dk
        z_min, z_max = -box / 2.0, box / 2.0
    k0 = cfg.physical.k0 if cfg.physical.k0 is not None else 0.0
    return ZGrid(z_min, z_max, n_z,
                 include_cross_branch=out.include_cross_branch, k0=k0)


# ---------------------------------------------------------------------------
# writers

def _write_text(path: Path, text: str, written: list[Path]) -> None:
    tmp = path.with_name("." + path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)
    written.append(path)


def _write_bytes(path: Path, blob: bytes, written: list[Path]) -> None:
    tmp = path.with_name("." + path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)
    written.append(path)


def _header(cfg: RunConfig, grid: Grid, params: PhysicalParams, what: str) -> str:
    return (f"# wgscatter {what} v{__version__}\n"
            f"# units: time 1/gamma, length v_g/gamma (gamma={_r(params.gamma)}, "
            f"v_g={_r(params.v_g)})\n"
            f"# grid: n_per_branch={grid.n_per_branch} "
            f"kappa_max={_r(grid.kappa_max)} dk={_r(grid.dk)}\n"
            f"# coupling g={_r(params.g)}\n")


def _series_text(cfg, grid, params, times, columns: dict[str, np.ndarray]) -> str:
    head = _header(cfg, grid, params, "scalar series")
    names = "\t".join(["t"] + list(columns))
    lines = [head + f"{names}"]
    arrays = list(columns.values())
    for i, t in enumerate(times):
        lines.append("\t".join([_r(t)] + [_r(a[i]) for a in arrays]))
    return "\n".join(lines) + "\n"


def _density_text(cfg, grid, params, zs, rows) -> str:
    head = _header(cfg, grid, params, "photon density map")
    head += "# rows: one per sampled time; first column t, then N(z,t) per z\n"
    head += "# z: " + "\t".join(_r(z) for z in zs) + "\n"
    lines = [head.rstrip("\n")]
    for t, dens in rows:
        lines.append("\t".join([_r(t)] + [_r(v) for v in dens]))
    return "\n".join(lines) + "\n"


def _density_binary(zs: np.ndarray, rows) -> bytes:
    n_t, n_z = len(rows), len(zs)
    header = struct.pack("<8sIII", _DENSITY_MAGIC, _DENSITY_VERSION, n_t, n_z)
    header = header.ljust(64, b"\0")
    ts = np.array([t for t, _ in rows], dtype="<f8")
    data = np.vstack([d for _, d in rows]).astype("<f8")
    return header + zs.astype("<f8").tobytes() + ts.tobytes() + data.tobytes()


def read_density_binary(path: Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of the binary density writer: returns (z, t, N[t, z])."""
    blob = Path(path).read_bytes()
    magic, version, n_t, n_z = struct.unpack_from("<8sIII", blob, 0)
    if magic != _DENSITY_MAGIC or version != _DENSITY_VERSION:
        raise ValueError("not a wgscatter binary density file")
    off = 64
    zs = np.frombuffer(blob, dtype="<f8", count=n_z, offset=off)
    off += 8 * n_z
    ts = np.frombuffer(blob, dtype="<f8", count=n_t, offset=off)
    off += 8 * n_t
    data = np.frombuffer(blob, dtype="<f8", count=n_t * n_z, offset=off)
    return zs.copy(), ts.copy(), data.reshape(n_t, n_z).copy()


def _matrix_text(cfg, grid, params, what, axis_name, axis, matrix) -> str:
    head = _header(cfg, grid, params, what)
    head += f"# {axis_name}: " + "\t".join(_r(v) for v in axis) + "\n"
    lines = [head.rstrip("\n")]
    for row in matrix:
        lines.append("\t".join(_r(v) for v in row))
    return "\n".join(lines) + "\n"


def _report_text(fields: dict[str, float]) -> str:
    return "".join(f"{k} = {_r(v)}\n" for k, v in fields.items())


def _metadata(cfg, grid, params, calib, extra) -> str:
    meta = {
        "tool": "wgscatter",
        "version": __version__,
        "config": serialize_config(cfg),
        "grid": {"n_per_branch": grid.n_per_branch,
                 "kappa_max": grid.kappa_max, "dk": grid.dk,
                 "n_modes": grid.n_modes},
        "coupling": {
            "g": params.g,
            "source": "config" if calib is None else "calibrated",
        },
    }
    if calib is not None:
        meta["coupling"].update({
            "analytic_guess": calib.analytic_guess,
            "fitted_rate": calib.fitted_rate,
            "fit_residual": calib.fit_residual,
            "iterations": calib.iterations,
        })
    meta.update(extra)
    return json.dumps(meta, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# run

@dataclass
class RunResult:
    outdir: Path
    report: dict[str, float]
    files: list[Path]


def run(cfg: RunConfig, outdir: str | Path) -> RunResult:
    """Execute one configured run and write all requested products."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        grid = resolve_grid(cfg)
        params, calib = resolve_params(cfg, grid)
        if cfg.input.kind == "two_photon":
            report = _run_two_photon(cfg, grid, params, calib, outdir, written)
        else:
            report = _run_single(cfg, grid, params, calib, outdir, written)
        return RunResult(outdir=outdir, report=report, files=list(written))
    except Exception as exc:
        for path in written:
            try:
                path.unlink()
            except OSError:
                pass
        code = 2 if isinstance(exc, ConfigError) else 3
        record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        err_path = outdir / "error.json"
        err_path.write_text(json.dumps(record, indent=2) + "\n", encoding="utf-8")
        raise


class _DensitySampler:
    """Collects N(z, t) rows at a fixed ladder of sample times."""

    def __init__(self, targets, zgrid, density_fn):
        self.targets = list(targets)
        self.zgrid = zgrid
        self.density_fn = density_fn
        self.rows: list[tuple[float, np.ndarray]] = []
        self._next = 0

    def __call__(self, state) -> None:
        if self._next >= len(self.targets):
            return
        if state.time + 1e-9 >= self.targets[self._next]:
            self.rows.append((state.time, self.density_fn(state, self.zgrid)))
            while (self._next < len(self.targets)
                   and self.targets[self._next] <= state.time + 1e-9):
                self._next += 1


def _run_two_photon(cfg, grid, params, calib, outdir, written) -> dict[str, float]:
    spec = TwoPhotonInputSpec(
        pulse1=pulse_from_section(cfg.pulse1),
        pulse2=pulse_from_section(cfg.pulse2),
        sigma_p=cfg.input.sigma_p,
    )
    state0 = build_two_photon_state(spec, grid, params)
    icfg = resolve_integrator(cfg)
    out = cfg.output

    sampler = None
    if out.density_map:
        zgrid = _density_zgrid(cfg, grid, out.density_n_z)
        targets = np.linspace(0.0, icfg.t_end, out.density_n_t)
        sampler = _DensitySampler(targets, zgrid, photon_density)

    traj = evolve(state0, icfg, params, on_sample=sampler)
    report = build_scatter_report(traj)
    fields = report.as_dict()
    fields["max_norm_drift"] = traj.max_norm_drift
    fields["t_end"] = traj.times[-1]

    if out.series:
        _write_text(outdir / "series.tsv",
                    _series_text(cfg, grid, params, traj.times, {
                        "p_e": traj.p_e, "n_r": traj.n_r, "n_l": traj.n_l,
                        "t_r": 0.5 * traj.n_r, "t_l": 0.5 * traj.n_l,
                        "norm": traj.norm,
                    }), written)
    if out.density_map and sampler is not None:
        if out.density_format == "binary":
            _write_bytes(outdir / "density.bin",
                         _density_binary(sampler.zgrid.zs, sampler.rows), written)
        else:
            _write_text(outdir / "density.tsv",
                        _density_text(cfg, grid, params, sampler.zgrid.zs,
                                      sampler.rows), written)
    for t_req in out.snapshot_times:
        match = [s for t, s in traj.checkpoints if abs(t - t_req) <= traj.dt]
        if not match:
            continue
        snap = match[0]
        tag = f"{t_req:g}"
        zsnap = _density_zgrid(cfg, grid, out.snapshot_n_z)
        beta_z = np.abs(real_space_wavepacket(snap, zsnap))
        _write_text(outdir / f"wavepacket_z_t{tag}.tsv",
                    _matrix_text(cfg, grid, params,
                                 f"|beta(z,z')| at t={tag}", "z", zsnap.zs, beta_z),
                    written)
        stride = max(1, int(math.ceil(grid.n_modes / 512)))
        kmat = np.abs(snap.amp_gg[::stride, ::stride])
        kaxis = grid.kappas_flat[::stride]
        txt = _matrix_text(cfg, grid, params,
                           f"|beta(k,k')| at t={tag} "
                           f"(flat modes, left branch then right, stride {stride})",
                           "kappa", kaxis, kmat)
        _write_text(outdir / f"wavepacket_k_t{tag}.tsv", txt, written)
    if out.report:
        _write_text(outdir / "report.txt", _report_text(fields), written)
    _write_text(outdir / "metadata.json",
                _metadata(cfg, grid, params, calib,
                          {"integrator": {"dt": traj.dt,
                                          "t_end": float(traj.times[-1])}}),
                written)
    return fields


def _run_single(cfg, grid, params, calib, outdir, written) -> dict[str, float]:
    out = cfg.output
    if cfg.input.kind == "single_photon":
        pulse = pulse_from_section(cfg.pulse1)
        state0 = build_single_photon_state(pulse, grid, params.v_g)
    else:
        pulse = None
        state0 = build_excited_emitter_state(grid)
    icfg = resolve_integrator(cfg)

    sampler = None
    if out.density_map:
        zgrid = _density_zgrid(cfg, grid, out.density_n_z)
        targets = np.linspace(0.0, icfg.t_end, out.density_n_t)
        sampler = _DensitySampler(
            targets, zgrid,
            lambda s, zg: single_density(s.amp_k, grid, zg))

    traj = evolve_single(state0, icfg, params, on_sample=sampler)
    final = traj.final
    n, dk = grid.n_per_branch, grid.dk
    abs2 = np.abs(final.amp_k) ** 2
    p_left = dk * float(abs2[:n].sum())
    p_right = dk * float(abs2[n:].sum())
    fields: dict[str, float] = {
        "residual_p_e": abs(final.amp_e) ** 2,
        "p_e_max": float(np.max(traj.p_e)),
        "max_norm_drift": traj.max_norm_drift,
        "t_end": traj.times[-1],
    }
    if pulse is not None:
        if pulse.direction is Branch.RIGHT:
            fields["transmission"], fields["reflection"] = p_right, p_left
        else:
            fields["transmission"], fields["reflection"] = p_left, p_right
        fields["transmission_oracle"] = lorentzian_transmission(
            pulse.sigma, pulse.delta, params.gamma, params.v_g)
        spec_mag = np.abs(final.amp_k[grid.branch_slice(pulse.direction)])
        refl_mag = np.abs(final.amp_k[grid.branch_slice(pulse.direction.mirror())])
        head = _header(cfg, grid, params, "single-photon spectra")
        lines = [head + "kappa\ttransmitted\treflected"]
        for i, k in enumerate(grid.kappas):
            lines.append(f"{_r(k)}\t{_r(spec_mag[i])}\t{_r(refl_mag[i])}")
        _write_text(outdir / "spectrum.tsv", "\n".join(lines) + "\n", written)
    else:
        fields["n_r_final"], fields["n_l_final"] = p_right, p_left

    if out.series:
        _write_text(outdir / "series.tsv",
                    _series_text(cfg, grid, params, traj.times, {
                        "p_e": traj.p_e, "n_r": traj.n_r, "n_l": traj.n_l,
                        "norm": traj.norm,
                    }), written)
    if out.density_map and sampler is not None:
        if out.density_format == "binary":
            _write_bytes(outdir / "density.bin",
                         _density_binary(sampler.zgrid.zs, sampler.rows), written)
        else:
            _write_text(outdir / "density.tsv",
                        _density_text(cfg, grid, params, sampler.zgrid.zs,
                                      sampler.rows), written)
    if out.report:
        _write_text(outdir / "report.txt", _report_text(fields), written)
    _write_text(outdir / "metadata.json",
                _metadata(cfg, grid, params, calib,
                          {"integrator": {"dt": traj.dt,
                                          "t_end": float(traj.times[-1])}}),
                written)
    return fields


# ---------------------------------------------------------------------------
# calibrate verb

def calibrate_run(cfg: RunConfig, outdir: str | Path) -> CalibrationResult:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    grid = resolve_grid(cfg)
    calib = calibrate_coupling(cfg.physical.gamma, grid, v_g=cfg.physical.v_g)
    record = {
        "g": calib.g,
        "analytic_guess": calib.analytic_guess,
        "fitted_rate": calib.fitted_rate,
        "fit_amplitude": calib.fit_amplitude,
        "fit_residual": calib.fit_residual,
        "iterations": calib.iterations,
        "gamma_target": calib.gamma_target,
        "grid": {"n_per_branch": grid.n_per_branch,
                 "kappa_max": grid.kappa_max, "dk": grid.dk},
        "version": __version__,
    }
    written: list[Path] = []
    _write_text(outdir / "calibration.json",
                json.dumps(record, indent=2, sort_keys=True) + "\n", written)
    return calib


# ---------------------------------------------------------------------------
# sweep

_SWEEP_COLUMNS = ("t_r", "t_l", "p_rr", "p_ll", "p_lr", "p_e_max",
                  "f_plus", "f_minus", "residual_p_e")


def compute_scatter_point(cfg: RunConfig) -> ScatterReport:
    """Evaluate one configuration without writing files."""
    grid = resolve_grid(cfg)
    params, _ = resolve_params(cfg, grid)
    spec = TwoPhotonInputSpec(
        pulse1=pulse_from_section(cfg.pulse1),
        pulse2=pulse_from_section(cfg.pulse2),
        sigma_p=cfg.input.sigma_p,
    )
    state0 = build_two_photon_state(spec, grid, params)
    icfg = IntegratorConfig(t_end=cfg.integrator.t_end, dt=cfg.integrator.dt,
                            observable_stride=cfg.integrator.observable_stride)
    traj = evolve(state0, icfg, params)
    return build_scatter_report(traj)


def _sweep_point_task(task) -> dict:
    cfg, parameter, value, index = task
    row = {"index": index, "value": value, "status": "ok"}
    try:
        point = apply_sweep_parameter(cfg, parameter, value)
        report = compute_scatter_point(point)
        row.update(report.as_dict())
    except Exception as exc:
        row["status"] = f"error: {type(exc).__name__}: {exc}"
        for col in _SWEEP_COLUMNS:
            row[col] = math.nan
    return row


def _load_journal(path: Path) -> dict[int, dict]:
    rows: dict[int, dict] = {}
    if not path.exists():
        return rows
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        entry = json.loads(line)
        rows[int(entry["index"])] = entry
    return rows


def sweep(cfg: RunConfig, parameter: str, values, outdir: str | Path,
          workers: int = 1) -> int:
    """Run one configuration across a parameter ladder.

    Completed points are journaled and skipped on rerun; per-point failures
    are recorded in their row without aborting the rest.  Returns the
    number of failed points.  The final table is sorted by value index, so
    its bytes do not depend on worker count or completion order.
    """
    if parameter == "sigma_p":
        values = [math.inf if (isinstance(v, str) and v.strip().lower() == "inf")
                  else float(v) for v in values]
    else:
        values = [float(v) for v in values]
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    journal_path = outdir / "sweep_journal.jsonl"
    rows = _load_journal(journal_path)
    for idx, value in enumerate(values):
        entry = rows.get(idx)
        if entry is not None and entry.get("value") != _json_value(value):
            raise ConfigError(
                f"journal entry {idx} was computed for value {entry.get('value')}, "
                f"not {value}; use a fresh output directory")
    pending = [(cfg, parameter, values[i], i) for i in range(len(values))
               if i not in rows]
    if pending:
        with ProcessPoolExecutor(max_workers=max(1, workers)) as pool:
            futures = [pool.submit(_sweep_point_task, task) for task in pending]
            with journal_path.open("a", encoding="utf-8") as journal:
                for fut in as_completed(futures):
                    row = fut.result()
                    row["value"] = _json_value(row["value"])
                    rows[row["index"]] = row
                    journal.write(json.dumps(row, sort_keys=True) + "\n")
                    journal.flush()

    lines = ["# wgscatter sweep v" + __version__,
             f"# parameter: {parameter}",
             "\t".join(["index", "value", "status"] + list(_SWEEP_COLUMNS))]
    failures = 0
    for idx in range(len(values)):
        row = rows[idx]
        if row["status"] != "ok":
            failures += 1
        vals = [str(idx), _r(_from_json_value(row["value"])), row["status"]]
        vals += [_r(row[c]) for c in _SWEEP_COLUMNS]
        lines.append("\t".join(vals))
    written: list[Path] = []
    _write_text(outdir / "sweep.tsv", "\n".join(lines) + "\n", written)
    return failures


def _json_value(v: float):
    return "inf" if isinstance(v, float) and math.isinf(v) else v


def _from_json_value(v) -> float:
    return math.inf if v == "inf" else float(v)
