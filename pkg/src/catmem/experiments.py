"""Experiment configuration, presets and artifact-producing pipelines.

A run resolves a flat configuration into parameter objects, samples the
input cat, integrates the ensemble, applies the coherent-reference phase
correction and evaluates the requested signatures.  Sweeps repeat that over
one or two parameter axes with per-point checkpoints so interrupted long
jobs resume.  Artifacts are CSV fields plus a JSON manifest; every CSV
embeds the fingerprint of the resolved configuration so the numbers in it
can be traced back to exactly one parameter set.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import oracle
from .engine import (EnsembleResult, apply_phase_correction, reference_gain,
                     run_ensemble, write_gain)
from .model import (CatParams, GridField, ProtocolSchedule, SystemParams,
                    derive_rates, parse_storage_time)
from .modes import default_write_duration, transfer_amplitude
from .sampling import SamplerConfig, sample_cat
from . import signatures as sig

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "PointResult",
    "PRESETS",
    "preset",
    "parse_config_text",
    "load_config",
    "config_fingerprint",
    "run_point",
    "write_run_artifacts",
    "run_sweep",
    "oracle_query",
    "oracle_negativity",
]

# Reference device: 17.5 Hz mechanical linewidth against a 170 kHz cavity.
DEFAULT_GAMMA_M = 17.5 / 170e3
DEFAULT_SEED = 846290731

KNOWN_SIGNATURES = ("p_distribution", "wigner", "negativity", "density", "p_variance")
SWEEP_FIELDS = ("t_store", "alpha0", "n_bar", "gamma_int")


class ConfigError(ValueError):
    """Configuration problem, annotated with the offending line when known."""

    def __init__(self, message: str, line: int | None = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat, fully explicit description of one run or sweep."""

    gamma_ext: float = 1.0
    gamma_int: float = 0.0
    gamma_m: float = DEFAULT_GAMMA_M
    g_eff: float = 0.6
    n_bar: float = 0.0        # mechanical bath occupation during the protocol
    n_init: float = 0.0       # occupation of the initial mechanical state
    alpha0: float = 2.0
    t_store: float = 0.02 / DEFAULT_GAMMA_M
    t_write: float | None = None  # None: ten retrieval lifetimes
    dt: float = 0.1
    n_samples: int = 4
    stratified: bool = True
    master_seed: int = DEFAULT_SEED
    workers: int = 1
    signatures: tuple = ("p_distribution", "wigner", "negativity", "p_variance")
    quad_theta: float = math.pi / 2.0
    quad_step: float = 0.01
    wigner_h: float = 0.05
    wigner_pad: float = 4.0
    density_step: float = 0.1
    jackknife_blocks: int = 100
    time_step_check: bool = True
    sweep: tuple = ()  # ((field, (values, ...)), ...), at most two axes
    out_dir: str = "artifacts"

    def system_params(self) -> SystemParams:
        return SystemParams.make(self.gamma_ext, self.gamma_int,
                                 gamma_m=self.gamma_m, g_eff=self.g_eff,
                                 n_th_mech=self.n_bar, n_init_mech=self.n_init)

    def cat_params(self) -> CatParams:
        return CatParams.make(self.alpha0)

    def schedule(self) -> ProtocolSchedule:
        params = self.system_params()
        t_w = self.t_write if self.t_write is not None else default_write_duration(params)
        return ProtocolSchedule.make(t_w, self.t_store, self.dt)

    def validate(self) -> None:
        self.system_params()
        self.cat_params()
        self.schedule()
        for name in self.signatures:
            if name not in KNOWN_SIGNATURES:
                raise ConfigError(f"unknown signature {name!r}")
        if len(self.sweep) > 2:
            raise ConfigError("at most two sweep axes are supported")
        for axis_field, values in self.sweep:
            if axis_field not in SWEEP_FIELDS:
                raise ConfigError(f"cannot sweep over {axis_field!r}")
            if len(values) == 0:
                raise ConfigError(f"sweep axis {axis_field!r} has no values")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be positive")


def _preset_table1() -> ExperimentConfig:
    return ExperimentConfig(
        t_store=(0.5 * math.log(2.0)) / DEFAULT_GAMMA_M,
        signatures=("p_variance",),
        sweep=(("alpha0", (1.0, 2.0, 3.0, 4.0)),),
    )


def _preset_fig5() -> ExperimentConfig:
    return ExperimentConfig(alpha0=5.0, t_store=0.02 / DEFAULT_GAMMA_M,
                            signatures=("p_distribution", "wigner", "negativity"))


def _preset_fig6() -> ExperimentConfig:
    return replace(_preset_fig5(), t_store=0.3466 / DEFAULT_GAMMA_M)


def _preset_fig9() -> ExperimentConfig:
    times = tuple(x / DEFAULT_GAMMA_M for x in (0.02, 0.10, 0.20, 0.3466))
    return ExperimentConfig(
        signatures=("negativity",),
        sweep=(("t_store", times), ("alpha0", (2.0, 3.0, 4.0, 5.0))),
    )


def _preset_fig10() -> ExperimentConfig:
    times = tuple(x / DEFAULT_GAMMA_M for x in (0.02, 0.04, 0.06, 0.0912))
    return ExperimentConfig(
        alpha0=2.0, n_bar=2.0, n_samples=200_000, jackknife_blocks=1000,
        signatures=("negativity",), sweep=(("t_store", times),),
    )


def _preset_fig11() -> ExperimentConfig:
    times = tuple(x / DEFAULT_GAMMA_M for x in (0.02, 0.05, 0.0912, 0.15, 0.25, 0.3466))
    return ExperimentConfig(
        alpha0=2.0, n_samples=200_000, jackknife_blocks=100, time_step_check=False,
        signatures=("negativity",),
        sweep=(("n_bar", (0.0, 1.0, 2.0, 3.0, 4.0)), ("t_store", times)),
    )


def _preset_fig12() -> ExperimentConfig:
    return replace(_preset_fig9(), gamma_ext=0.95, gamma_int=0.05)


PRESETS = {
    "table1": _preset_table1,
    "fig5": _preset_fig5,
    "fig6": _preset_fig6,
    "fig9": _preset_fig9,
    "fig10": _preset_fig10,
    "fig11": _preset_fig11,
    "fig12": _preset_fig12,
}


def preset(name: str) -> ExperimentConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


_FLOAT_FIELDS = ("gamma_ext", "gamma_int", "gamma_m", "g_eff", "n_bar", "n_init",
                 "alpha0", "dt", "quad_theta", "quad_step", "wigner_h",
                 "wigner_pad", "density_step")
_INT_FIELDS = ("n_samples", "master_seed", "workers", "jackknife_blocks")
_BOOL_FIELDS = ("stratified", "time_step_check")


def _parse_bool(raw: str, line: int) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}", line)


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse 'key = value' lines into a configuration.

    Unknown keys fail with the line number.  Storage times accept the
    '/Gm' suffix form; since gamma_m may itself appear in the file, storage
    entries are resolved after every plain scalar.
    """
    config = base if base is not None else ExperimentConfig()
    entries: list[tuple[int, str, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected 'key = value', got {stripped!r}", lineno)
        key, value = stripped.split("=", 1)
        entries.append((lineno, key.strip(), value.strip()))

    updates: dict = {}
    storage_entries: list[tuple[int, str, str]] = []
    sweep_axes: dict[str, tuple] = {axis_field: vals for axis_field, vals in config.sweep}
    sweep_order: list[str] = [axis_field for axis_field, _ in config.sweep]

    for lineno, key, value in entries:
        if key == "t_store" or key.startswith("sweep."):
            storage_entries.append((lineno, key, value))
            continue
        if key in _FLOAT_FIELDS:
            try:
                updates[key] = float(value)
            except ValueError:
                raise ConfigError(f"expected a number for {key}, got {value!r}", lineno) from None
        elif key in _INT_FIELDS:
            try:
                updates[key] = int(value)
            except ValueError:
                raise ConfigError(f"expected an integer for {key}, got {value!r}", lineno) from None
        elif key in _BOOL_FIELDS:
            updates[key] = _parse_bool(value, lineno)
        elif key == "t_write":
            updates[key] = None if value.lower() in ("auto", "none") else float(value)
        elif key == "signatures":
            if value.lower() in ("", "none"):
                updates[key] = ()
            else:
                names = tuple(v.strip() for v in value.split(",") if v.strip())
                for name in names:
                    if name not in KNOWN_SIGNATURES:
                        raise ConfigError(f"unknown signature {name!r}", lineno)
                updates[key] = names
        elif key == "out_dir":
            updates[key] = value
        else:
            raise ConfigError(f"unknown key {key!r}", lineno)

    gamma_m = updates.get("gamma_m", config.gamma_m)
    for lineno, key, value in storage_entries:
        if key == "t_store":
            try:
                updates[key] = parse_storage_time(value, gamma_m)
            except ValueError as exc:
                raise ConfigError(str(exc), lineno) from None
            continue
        axis_field = key[len("sweep."):]
        if axis_field not in SWEEP_FIELDS:
            raise ConfigError(f"cannot sweep over {axis_field!r}", lineno)
        parts = [v.strip() for v in value.split(",") if v.strip()]
        if not parts:
            raise ConfigError(f"sweep axis {axis_field!r} has no values", lineno)
        try:
            if axis_field == "t_store":
                vals = tuple(parse_storage_time(p, gamma_m) for p in parts)
            else:
                vals = tuple(float(p) for p in parts)
        except ValueError as exc:
            raise ConfigError(str(exc), lineno) from None
        if axis_field not in sweep_axes:
            sweep_order.append(axis_field)
        sweep_axes[axis_field] = vals

    updates["sweep"] = tuple((axis_field, sweep_axes[axis_field]) for axis_field in sweep_order)
    resolved = replace(config, **updates)
    resolved.validate()
    return resolved


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"), base)


def config_fingerprint(config: ExperimentConfig) -> str:
    """Digest of everything that determines the output numbers.

    The worker count and output directory are excluded on purpose: results
    are worker-count independent by construction.
    """
    payload = dataclasses.asdict(config)
    payload.pop("workers")
    payload.pop("out_dir")
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def oracle_negativity(alpha0: float, t_store: float, n_bar: float, gamma_m: float,
                      grid: sig.WignerGrid) -> float:
    """Negativity of the ideal decohered cat evaluated on the same grid."""
    ofield = oracle.evolved_wigner_field(grid.x, grid.y, t_store, alpha0, n_bar, gamma_m)
    return sig.wigner_negativity(ofield)


@dataclass
class PointResult:
    """Signature values for a single parameter point."""

    scalars: dict
    fields: dict = field(default_factory=dict)


def _as_input_ensemble(samples) -> EnsembleResult:
    return EnsembleResult(
        alpha_out=np.array([s.alpha_in for s in samples], dtype=np.complex128),
        alpha_out_plus=np.array([s.alpha_in_plus for s in samples], dtype=np.complex128),
        weight=np.array([s.weight for s in samples]),
        branch=np.array([s.branch for s in samples]))


def _point_core(config: ExperimentConfig, want_fields: bool) -> PointResult:
    """One resolved run: sample, integrate, phase-correct, estimate."""
    params = config.system_params()
    cat = config.cat_params()
    schedule = config.schedule()
    rates = derive_rates(params)

    samples = sample_cat(SamplerConfig(cat=cat, n_samples=config.n_samples,
                                       master_seed=config.master_seed,
                                       stratified=config.stratified))
    ens = run_ensemble(samples, params, schedule, config.master_seed,
                       workers=config.workers)
    gain = reference_gain(params, schedule)
    ens = apply_phase_correction(ens, gain)

    inputs = _as_input_ensemble(samples)
    in_moments = sig.quadrature_moments(inputs)
    scalars: dict = {
        "mean_weight": in_moments["mean_weight"],
        "reference_gain_abs": abs(gain),
        "reference_gain_phase": math.atan2(gain.imag, gain.real),
        "transfer_amplitude_analytic": transfer_amplitude(params),
        "p_variance_in": sig.p_variance(inputs),
        "t_write_resolved": schedule.t_write,
        "t_store_resolved": schedule.t_store,
        "dt": schedule.dt,
        "gamma_bar_re": rates.gamma_bar.real,
        "noisy": bool(params.n_th_mech > 0 or params.n_init_mech > 0),
    }
    fields: dict = {}

    sigs = config.signatures
    if "p_distribution" in sigs:
        grid = sig.default_quadrature_grid(config.alpha0, config.quad_theta,
                                           config.quad_step)
        fields["p_distribution"] = sig.p_distribution(ens, grid)
    need_wigner = "wigner" in sigs or "negativity" in sigs
    if need_wigner:
        wgrid = sig.default_wigner_grid(config.alpha0, config.wigner_h,
                                        config.wigner_pad)
        if "negativity" in sigs and scalars["noisy"] and config.jackknife_blocks >= 2:
            jack = sig.negativity_with_error(ens, wgrid,
                                             n_blocks=config.jackknife_blocks)
            wfield = jack.pop("field")
            scalars["negativity"] = jack["negativity"]
            scalars["sampling_error"] = jack["jackknife_se"]
            scalars["jackknife_blocks"] = jack["n_blocks"]
        else:
            wfield = sig.wigner_estimate(ens, wgrid)
            if "negativity" in sigs:
                scalars["negativity"] = sig.wigner_negativity(wfield)
                if not scalars["noisy"]:
                    scalars["sampling_error"] = 0.0
        scalars["wigner_norm"] = wfield.meta["norm"]
        scalars["wigner_max_imag_residual"] = wfield.meta["max_imag_residual"]
        if "negativity" in sigs and config.gamma_int == 0 and config.n_init == 0:
            scalars["negativity_oracle"] = oracle_negativity(
                config.alpha0, schedule.t_store, config.n_bar, config.gamma_m, wgrid)
        if "wigner" in sigs and want_fields:
            fields["wigner"] = wfield
    if "density" in sigs:
        axis = sig.default_density_axis(config.alpha0, config.density_step)
        fields["density"] = sig.reconstruct_density(ens, axis, axis)
    if "p_variance" in sigs:
        out_moments = sig.quadrature_moments(ens)
        scalars["p_variance_out"] = sig.p_variance(ens)
        scalars["mixture_falsified"] = sig.is_mixture_falsified(scalars["p_variance_out"])
        scalars["p_moment_imag_residual"] = max(
            abs(out_moments["p_mean"].imag), abs(out_moments["p_sq"].imag))

    if not want_fields:
        fields = {}
    return PointResult(scalars=scalars, fields=fields)


def run_point(config: ExperimentConfig, want_fields: bool = True) -> PointResult:
    """Run one point, optionally with a doubled-step rerun for the error bar.

    The time-step component is a Richardson estimate from one rerun at
    2*dt: fourth-order global error means the doubled-step result is about
    sixteen times worse, so the difference over fifteen estimates the fine
    -step error.  For noisy runs a fresh noise realisation enters the
    difference, so the estimate carries a sampling floor; the components
    are reported separately so this stays visible.
    """
    config.validate()
    point = _point_core(config, want_fields)
    if config.time_step_check and "negativity" in config.signatures:
        coarse_cfg = replace(config, dt=2.0 * config.dt, time_step_check=False,
                             signatures=("negativity",), sweep=(),
                             jackknife_blocks=0)
        coarse = _point_core(coarse_cfg, want_fields=False)
        ts_err = abs(point.scalars["negativity"] - coarse.scalars["negativity"]) / 15.0
        point.scalars["time_step_error"] = ts_err
        samp = point.scalars.get("sampling_error", 0.0)
        point.scalars["error_quadrature_sum"] = math.hypot(samp, ts_err)
    elif "negativity" in config.signatures:
        samp = point.scalars.get("sampling_error", 0.0)
        point.scalars["time_step_error"] = 0.0
        point.scalars["error_quadrature_sum"] = samp
    return point


def _json_safe(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    return value


def _sha256_of(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_run_artifacts(config: ExperimentConfig, point: PointResult,
                        out_dir, wall_time_s: float) -> dict:
    """Write field CSV/JSON files plus the run manifest; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fingerprint = config_fingerprint(config)

    artifacts = {}
    for name, fld in point.fields.items():
        fld.meta["manifest_sha256"] = fingerprint
        csv_path = out / f"{name}.csv"
        fld.to_csv(csv_path)
        fld.to_json(out / f"{name}.json")
        artifacts[name] = {"csv": csv_path.name, "json": f"{name}.json",
                           "sha256": _sha256_of(csv_path)}

    manifest = {
        "config": {k: _json_safe(v) for k, v in dataclasses.asdict(config).items()},
        "config_sha256": fingerprint,
        "scalars": {k: _json_safe(v) for k, v in point.scalars.items()},
        "artifacts": artifacts,
        "wall_time_s": round(wall_time_s, 3),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True),
                                       encoding="utf-8")
    return manifest


def _apply_axis(config: ExperimentConfig, axis_field: str, value: float) -> ExperimentConfig:
    if axis_field == "gamma_int":
        total = config.gamma_ext + config.gamma_int
        if value >= total:
            raise ConfigError("gamma_int must stay below the total optical rate")
        return replace(config, gamma_int=value, gamma_ext=total - value)
    return replace(config, **{axis_field: value})


def sweep_points(config: ExperimentConfig) -> list[tuple[dict, ExperimentConfig]]:
    """Expand the sweep axes into (labels, sub-configuration) pairs."""
    if not config.sweep:
        raise ConfigError("sweep requested but no sweep axes configured")
    grids: list[list[tuple[str, float]]] = [
        [(axis_field, v) for v in values] for axis_field, values in config.sweep]
    points = []
    if len(grids) == 1:
        combos = [[g] for g in grids[0]]
    else:
        combos = [[g0, g1] for g0 in grids[0] for g1 in grids[1]]
    for combo in combos:
        sub = replace(config, sweep=())
        labels = {}
        for axis_field, value in combo:
            sub = _apply_axis(sub, axis_field, value)
            labels[axis_field] = value
        points.append((labels, sub))
    return points


_SWEEP_SCALAR_COLUMNS = ("negativity", "negativity_oracle", "sampling_error",
                         "time_step_error", "error_quadrature_sum",
                         "p_variance_in", "p_variance_out", "mean_weight",
                         "reference_gain_abs", "wigner_norm")


def run_sweep(config: ExperimentConfig, out_dir, progress=None) -> list[dict]:
    """Run every sweep point, checkpointing each as it completes.

    A checkpoint is reused only when its configuration fingerprint matches,
    so edits to the config invalidate stale points automatically.
    """
    out = Path(out_dir)
    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    points = sweep_points(config)
    rows = []
    for index, (labels, sub) in enumerate(points):
        sub_fp = config_fingerprint(sub)
        ckpt = ckpt_dir / f"point_{index:04d}.json"
        row = None
        if ckpt.exists():
            cached = json.loads(ckpt.read_text(encoding="utf-8"))
            if cached.get("config_sha256") == sub_fp:
                row = cached
        if row is None:
            start = time.perf_counter()
            point = run_point(sub, want_fields=False)
            row = {
                "index": index,
                "labels": {k: _json_safe(v) for k, v in labels.items()},
                "scalars": {k: _json_safe(v) for k, v in point.scalars.items()},
                "config_sha256": sub_fp,
                "wall_time_s": round(time.perf_counter() - start, 3),
            }
            ckpt.write_text(json.dumps(row, sort_keys=True), encoding="utf-8")
        if progress is not None:
            progress(f"point {index + 1}/{len(points)} "
                     + " ".join(f"{k}={v:g}" for k, v in row["labels"].items()))
        rows.append(row)

    axis_names = [axis_field for axis_field, _ in config.sweep]
    fingerprint = config_fingerprint(config)
    csv_path = out / "sweep.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# manifest_sha256 = {fingerprint}\n")
        header = axis_names + [c for c in _SWEEP_SCALAR_COLUMNS]
        fh.write(",".join(header) + "\r\n")
        for row in rows:
            cells = [repr(float(row["labels"][a])) for a in axis_names]
            for col in _SWEEP_SCALAR_COLUMNS:
                value = row["scalars"].get(col, "")
                cells.append(repr(float(value)) if value != "" else "")
            fh.write(",".join(cells) + "\r\n")

    manifest = {
        "config": {k: _json_safe(v) for k, v in dataclasses.asdict(config).items()},
        "config_sha256": fingerprint,
        "axes": {axis_field: list(values) for axis_field, values in config.sweep},
        "rows": rows,
        "artifacts": {"sweep": {"csv": csv_path.name, "sha256": _sha256_of(csv_path)}},
    }
    (out / "sweep_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return rows


def oracle_query(name: str, params: dict) -> dict:
    """Evaluate a named closed-form quantity; used by the oracle subcommand."""
    gamma = float(params.get("gamma", 1.0))
    n_bar = float(params.get("n_bar", 0.0))
    alpha0 = float(params.get("alpha0", 2.0))
    if name == "t_positive":
        return {"t_positive": oracle.t_positive(n_bar, gamma)}
    if name == "t_p_bound":
        return {"t_p_bound": oracle.t_p_bound(n_bar, gamma)}
    if name == "cat_variance":
        return {"cat_variance": oracle.cat_variance(alpha0)}
    if name == "q_parameter":
        t = float(params["t"])
        return {"q_parameter": oracle.q_parameter(t, n_bar, gamma)}
    if name == "decohered_density":
        t = float(params["t"])
        amp, coeff = oracle.decohered_density(t, alpha0, gamma)
        return {"amplitude": amp, "coefficient": coeff}
    if name == "transfer_amplitude":
        gamma_int = float(params.get("gamma_int", 0.0))
        gamma_ext = float(params.get("gamma_ext", 1.0 - gamma_int))
        sys_params = SystemParams.make(gamma_ext, gamma_int,
                                       gamma_m=float(params.get("gamma_m", DEFAULT_GAMMA_M)),
                                       g_eff=float(params.get("g_eff", 0.6)))
        return {"transfer_amplitude": transfer_amplitude(sys_params)}
    if name == "negativity":
        t = float(params.get("t", 0.0))
        grid = sig.default_wigner_grid(alpha0)
        return {"negativity": oracle_negativity(alpha0, t, n_bar,
                                                float(params.get("gamma", DEFAULT_GAMMA_M)),
                                                grid)}
    raise ConfigError(f"unknown oracle query {name!r}")
