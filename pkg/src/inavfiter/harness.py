"""Experiment driver: run navigators over a synthesized flight and score them.

Errors are reported in the local-level (North-Up-East) frame at
update-interval boundaries. Earth-frame estimates are first converted using
their own geodetic position, so any conversion error is charged to them.
"""

from __future__ import annotations

import configparser
import io
import json
import logging
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .baselines import LlNavState, improved_2sample_step, typical_2sample_step
from .earth import WGS84, EarthModel, cne_from_geodetic, ecef2lla, radii
from .geomath import dcm_to_quat, principal_angle, quat_conj, quat_mul, quat_norm
from .imu import (
    DEG_PER_HOUR,
    DEG_PER_SQRT_HOUR,
    PER_SQRT_HOUR,
    SENSOR_PRESETS,
    SensorSpec,
    corrupt_increments,
    load_increments,
)
from .integrator import IterConfig, navigate
from .trajgen import TrajectoryParams, damp_vertical, synth_stream, truth_state

log = logging.getLogger(__name__)

ALGORITHMS = ("inavfiter", "typical2", "improved2")
CSV_HEADER = "t,att_err_rad,qnorm_err,verr_n,verr_u,verr_e,perr_n,perr_u,perr_e"
SUMMARY_HEADER = "algo,flight,sensor,max_we_pos_err_m"
DETAIL_HEADER = (
    "algo,flight,sensor,status,epochs,max_att_err_rad,max_qnorm_err,"
    "max_verr_n,max_verr_u,max_verr_e,max_perr_n,max_perr_u,max_perr_e,"
    "final_att_err_rad,final_verr_n,final_verr_u,final_verr_e,"
    "final_perr_n,final_perr_u,final_perr_e"
)


@dataclass(frozen=True)
class ExperimentConfig:
    trajectory: TrajectoryParams = field(default_factory=TrajectoryParams)
    sensors: SensorSpec = field(default_factory=SensorSpec)
    algorithms: tuple[str, ...] = ALGORITHMS
    iter: IterConfig = field(default_factory=IterConfig)
    damped: bool = False
    output_dir: str | Path = "results"
    emit_plots: bool = False
    sensor_label: str = "perfect"
    dense: int = 0  # extra iNavFIter samples inside each interval (0 = boundaries only)
    dataset: str | Path | None = None  # increments file replacing synthesis

    def __post_init__(self) -> None:
        algos = tuple(self.algorithms)
        if not algos:
            raise ValueError("select at least one algorithm")
        unknown = [a for a in algos if a not in ALGORITHMS]
        if unknown:
            raise ValueError(f"unknown algorithm(s) {unknown}; choose from {ALGORITHMS}")
        if len(set(algos)) != len(algos):
            raise ValueError("algorithm listed twice")
        if self.dense < 0:
            raise ValueError("dense must be non-negative")
        object.__setattr__(self, "algorithms", algos)
        object.__setattr__(self, "output_dir", Path(self.output_dir))


@dataclass(frozen=True)
class ErrorRecord:
    """Error time series, one row per epoch.

    ``v_err`` and ``p_err`` are estimate minus truth in North, Up, East order;
    horizontal position errors are converted to metres along the ellipsoid.
    """

    t: NDArray[np.float64]
    principal_angle: NDArray[np.float64]
    quat_norm_err: NDArray[np.float64]
    v_err: NDArray[np.float64]
    p_err: NDArray[np.float64]

    def __post_init__(self) -> None:
        n = len(self.t)
        shapes = {"principal_angle": (n,), "quat_norm_err": (n,), "v_err": (n, 3), "p_err": (n, 3)}
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=float).reshape(shape)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float).reshape(n))
        if n > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("record times must increase")

    def __len__(self) -> int:
        return len(self.t)

    def table(self) -> NDArray[np.float64]:
        """Rows in CSV column order."""
        return np.column_stack([self.t, self.principal_angle, self.quat_norm_err, self.v_err, self.p_err])

    @classmethod
    def empty(cls) -> "ErrorRecord":
        return cls(np.empty(0), np.empty(0), np.empty(0), np.empty((0, 3)), np.empty((0, 3)))


@dataclass
class AlgorithmRun:
    name: str
    records: ErrorRecord
    wall_time_s: float
    diverged: bool = False
    message: str = ""
    iterations: NDArray | None = None  # (intervals, 2): attitude, vel/pos
    dense: ErrorRecord | None = None

    def summary(self) -> dict:
        r = self.records
        out = {"algo": self.name, "status": "diverged" if self.diverged else "ok", "epochs": len(r)}
        if len(r):
            out["max_att_err_rad"] = float(np.max(r.principal_angle))
            out["max_qnorm_err"] = float(np.max(r.quat_norm_err))
            for i, ax in enumerate("nue"):
                out[f"max_verr_{ax}"] = float(np.max(np.abs(r.v_err[:, i])))
                out[f"max_perr_{ax}"] = float(np.max(np.abs(r.p_err[:, i])))
                out[f"final_verr_{ax}"] = float(r.v_err[-1, i])
                out[f"final_perr_{ax}"] = float(r.p_err[-1, i])
            out["final_att_err_rad"] = float(r.principal_angle[-1])
            out["max_we_pos_err_m"] = out["max_perr_e"]
        else:
            out["max_we_pos_err_m"] = float("nan")
        return out


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: dict[str, AlgorithmRun]
    files: list[Path] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(r.diverged for r in self.runs.values())

    def max_we_pos_err(self) -> dict[str, float]:
        return {k: r.summary()["max_we_pos_err_m"] for k, r in self.runs.items()}


# -- error computation --------------------------------------------------------


def _wrap(angle: NDArray) -> NDArray:
    return (angle + np.pi) % (2 * np.pi) - np.pi


def compute_errors(
    truth,
    t: ArrayLike,
    q: ArrayLike,
    v: ArrayLike,
    p: ArrayLike,
    frame: str = "earth",
    earth: EarthModel = WGS84,
    time_tol: float = 1e-9,
) -> ErrorRecord:
    """Local-level errors of an estimate stream against truth at the same epochs.

    ``frame="earth"``: ``q`` body-to-ECEF, ``v`` and ``p`` ECEF.
    ``frame="local"``: ``q`` body-to-NUE, ``v`` NUE, ``p`` = ``[lon, lat, h]``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    q = np.asarray(q, dtype=float).reshape(-1, 4)
    v = np.asarray(v, dtype=float).reshape(-1, 3)
    p = np.asarray(p, dtype=float).reshape(-1, 3)
    t_true = np.atleast_1d(np.asarray(truth.t, dtype=float))
    if not (len(t) == len(t_true) == len(q) == len(v) == len(p)):
        raise ValueError("truth and estimate streams differ in length")
    if len(t) and np.max(np.abs(t - t_true)) > time_tol:
        raise ValueError("truth and estimate timestamps do not match")
    if len(t) == 0:
        return ErrorRecord.empty()
    if frame == "earth":
        lla = ecef2lla(p, earth)
        c_ne = cne_from_geodetic(lla[:, 0], lla[:, 1])
        q_nb = quat_mul(quat_conj(dcm_to_quat(c_ne)), q)
        v_n = np.einsum("nji,nj->ni", c_ne, v)
    elif frame == "local":
        lla, q_nb, v_n = p, q, v
    else:
        raise ValueError(f"frame must be 'earth' or 'local', got {frame!r}")
    true_lla = np.asarray(truth.lla).reshape(-1, 3)
    r_e, r_n = radii(true_lla[:, 1], earth)
    h = true_lla[:, 2]
    p_err = np.column_stack([
        (lla[:, 1] - true_lla[:, 1]) * (r_n + h),
        lla[:, 2] - h,
        _wrap(lla[:, 0] - true_lla[:, 0]) * (r_e + h) * np.cos(true_lla[:, 1]),
    ])
    return ErrorRecord(
        t=t,
        principal_angle=principal_angle(q_nb, np.asarray(truth.q_nb).reshape(-1, 4)),
        quat_norm_err=np.abs(quat_norm(q) - 1.0),
        v_err=v_n - np.asarray(truth.v_n).reshape(-1, 3),
        p_err=p_err,
    )


# -- algorithm runners --------------------------------------------------------


def _run_inavfiter(cfg: ExperimentConfig, gyro, accel, earth):
    params = cfg.trajectory
    start = truth_state(params, 0.0, earth).nav_state()
    after = (lambda s: damp_vertical(s, earth)) if cfg.damped else None
    t, q, v, p, iters = [start.t], [start.q], [start.v], [start.p], []
    dense_t, dense_rows = [], []
    message = ""
    try:
        # the integrator turns non-finite values into ArithmeticError
        with np.errstate(over="ignore", invalid="ignore"):
            for sol in navigate(start, gyro, accel, params.sample_rate, cfg.iter, earth, after_interval=after):
                e = sol.end_state
                t.append(e.t)
                q.append(e.q)
                v.append(e.v)
                p.append(e.p)
                iters.append((sol.attitude.iterations, sol.velpos.iterations))
                for j in range(1, cfg.dense + 1):
                    tj = sol.start.t + j * (e.t - sol.start.t) / (cfg.dense + 1)
                    s = sol.state_at(tj)
                    dense_t.append(tj)
                    dense_rows.append(np.concatenate([s.q, s.v, s.p]))
    except (ArithmeticError, ValueError) as exc:
        message = f"{type(exc).__name__}: {exc}"
    dense = None
    if cfg.dense:
        rows = np.array(dense_rows).reshape(-1, 10)
        dense_t = np.array(dense_t)
        dense = compute_errors(
            truth_state(params, dense_t, earth), dense_t, rows[:, :4], rows[:, 4:7], rows[:, 7:], "earth", earth
        )
    return (np.array(t), np.array(q), np.array(v), np.array(p)), "earth", message, np.array(iters).reshape(-1, 2), dense


def _run_two_sample(cfg: ExperimentConfig, gyro, accel, earth, variant: str):
    params = cfg.trajectory
    step = typical_2sample_step if variant == "typical2" else improved_2sample_step
    state = truth_state(params, 0.0, earth).ll_state()
    T = 2.0 / params.sample_rate
    n = len(gyro) // 2
    t = np.empty(n + 1)
    q, v, p = np.empty((n + 1, 4)), np.empty((n + 1, 3)), np.empty((n + 1, 3))
    t[0], q[0], v[0], p[0] = state.t, state.q, state.v, state.p
    message = ""
    done = n
    try:
        for k in range(n):
            i = 2 * k
            state = step(state, gyro[i], gyro[i + 1], accel[i], accel[i + 1], T, earth)
            state = LlNavState(state.q, state.v, state.p, (k + 1) * T)
            if cfg.damped:
                state = damp_vertical(state, earth)
            t[k + 1], q[k + 1], v[k + 1], p[k + 1] = state.t, state.q, state.v, state.p
    except (ArithmeticError, ValueError) as exc:
        message = f"{type(exc).__name__}: {exc}"
        done = k
    sl = slice(0, done + 1)
    return (t[sl], q[sl], v[sl], p[sl]), "local", message, None, None


def increment_stream(cfg: ExperimentConfig, earth: EarthModel = WGS84) -> tuple[NDArray, NDArray, NDArray]:
    """Sensor increments for the configured run, with sensor errors applied."""
    params = cfg.trajectory
    h = 1.0 / params.sample_rate
    if cfg.dataset is not None:
        t_end, gyro, accel = load_increments(cfg.dataset)
        n = min(len(t_end), params.n_samples)
        t_end, gyro, accel = t_end[:n], gyro[:n], accel[:n]
        expected = h * np.arange(1, n + 1)
        if n and np.max(np.abs(t_end - expected)) > 1e-6:
            raise ValueError(f"{cfg.dataset}: sample times do not match rate {params.sample_rate} Hz from t=0")
    else:
        t_end, gyro, accel = synth_stream(params, earth)
    gyro, accel = corrupt_increments(gyro, accel, h, cfg.sensors)
    return t_end, gyro, accel


def run_experiment(cfg: ExperimentConfig, earth: EarthModel = WGS84, write: bool = True) -> ExperimentResult:
    """Run every selected algorithm on one shared increment stream.

    A diverging algorithm keeps its records up to the failure and is flagged;
    the others still run. Outputs are written when ``write`` is set.
    """
    _, gyro, accel = increment_stream(cfg, earth)
    runs: dict[str, AlgorithmRun] = {}
    for name in cfg.algorithms:
        start = time.perf_counter()
        if name == "inavfiter":
            est, frame, msg, iters, dense = _run_inavfiter(cfg, gyro, accel, earth)
        else:
            est, frame, msg, iters, dense = _run_two_sample(cfg, gyro, accel, earth, name)
        elapsed = time.perf_counter() - start
        t, q, v, p = est
        records = compute_errors(truth_state(cfg.trajectory, t, earth), t, q, v, p, frame, earth)
        if msg:
            log.warning("%s diverged at t=%.3f s: %s", name, t[-1], msg)
        runs[name] = AlgorithmRun(name, records, elapsed, bool(msg), msg, iters, dense)
        log.info("%s finished in %.2f s", name, elapsed)
    result = ExperimentResult(cfg, runs)
    if write:
        result.files = emit_outputs(result)
    return result


# -- output -------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def write_error_csv(path: str | Path, records: ErrorRecord) -> None:
    path = Path(path)
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            if len(records):
                np.savetxt(fh, records.table(), fmt="%.17g", delimiter=",")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_error_csv(path: str | Path) -> ErrorRecord:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        body = fh.read()
    if not body.strip():
        return ErrorRecord.empty()
    data = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2)
    return ErrorRecord(data[:, 0], data[:, 1], data[:, 2], data[:, 3:6], data[:, 6:9])


def summary_lines(result: ExperimentResult) -> list[str]:
    """``algo,flight,sensor,max_we_pos_err_m`` rows, header first."""
    cfg = result.config
    lines = [SUMMARY_HEADER]
    for name, run in result.runs.items():
        lines.append(f"{name},{cfg.trajectory.mode},{cfg.sensor_label},{run.summary()['max_we_pos_err_m']:.6e}")
    return lines


def _detail_lines(result: ExperimentResult) -> list[str]:
    cfg = result.config
    cols = DETAIL_HEADER.split(",")[3:]
    lines = [DETAIL_HEADER]
    for name, run in result.runs.items():
        s = run.summary()
        vals = [str(s.get(c, "nan")) if c in ("status", "epochs") else _fmt(s.get(c, float("nan"))) for c in cols]
        lines.append(",".join([name, cfg.trajectory.mode, cfg.sensor_label] + vals))
    return lines


def _write_text(path: Path, lines: Iterable[str]) -> None:
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


PLOT_PANELS = (
    ("attitude", "Attitude principal angle error", "rad", ["att_err_rad"]),
    ("velocity", "Velocity error (NUE)", "m/s", ["verr_n", "verr_u", "verr_e"]),
    ("position", "Position error (NUE)", "m", ["perr_n", "perr_u", "perr_e"]),
)


def _plot_specs(result: ExperimentResult) -> dict[str, dict]:
    specs = {}
    for key, title, unit, cols in PLOT_PANELS:
        specs[key] = {
            "title": title,
            "x": {"column": "t", "label": "time (s)"},
            "y": {"label": f"|error| ({unit})", "scale": "log", "abs": True},
            "series": [
                {"file": f"{name}.csv", "column": c, "label": f"{name} {c}"}
                for name in result.runs
                for c in cols
            ],
        }
    return specs


def _render_svg(spec: dict, outdir: Path, svg_path: Path) -> bool:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib not installed; wrote plot spec only")
        return False
    plt.rcParams["svg.hashsalt"] = "inavfiter"
    fig, ax = plt.subplots(figsize=(8, 4.5))
    cache: dict[str, ErrorRecord] = {}
    for s in spec["series"]:
        rec = cache.setdefault(s["file"], read_error_csv(outdir / s["file"]))
        col = CSV_HEADER.split(",").index(s["column"])
        y = np.abs(rec.table()[:, col])
        ax.plot(rec.t, np.where(y > 0, y, np.nan), label=s["label"], linewidth=0.8)
    ax.set_yscale("log")
    ax.set_title(spec["title"])
    ax.set_xlabel(spec["x"]["label"])
    ax.set_ylabel(spec["y"]["label"])
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(svg_path, metadata={"Date": None})
    plt.close(fig)
    return True


def emit_outputs(result: ExperimentResult) -> list[Path]:
    """Write CSV series, summaries and (optionally) plot files.

    Everything except ``timings.csv`` is a pure function of the config and
    seed, so reruns are byte-identical.
    """
    cfg = result.config
    outdir = Path(cfg.output_dir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {outdir}: {exc.strerror or exc}") from exc
    if not os.access(outdir, os.W_OK):
        raise OSError(f"cannot write {outdir}: permission denied")
    files = []
    for name, run in result.runs.items():
        path = outdir / f"{name}.csv"
        write_error_csv(path, run.records)
        files.append(path)
        if run.dense is not None:
            path = outdir / f"{name}_dense.csv"
            write_error_csv(path, run.dense)
            files.append(path)
        if run.iterations is not None:
            path = outdir / f"{name}_iterations.csv"
            _write_text(path, ["interval,attitude,velpos"] + [f"{i},{a},{b}" for i, (a, b) in enumerate(run.iterations)])
            files.append(path)
    for fname, lines in (("summary.csv", summary_lines(result)), ("summary_detail.csv", _detail_lines(result))):
        _write_text(outdir / fname, lines)
        files.append(outdir / fname)
    timing = ["algo,wall_time_s"] + [f"{n},{r.wall_time_s:.3f}" for n, r in result.runs.items()]
    _write_text(outdir / "timings.csv", timing)
    files.append(outdir / "timings.csv")
    if cfg.emit_plots:
        pdir = outdir / "plots"
        pdir.mkdir(exist_ok=True)
        for key, spec in _plot_specs(result).items():
            jpath = pdir / f"{key}.json"
            _write_text(jpath, [json.dumps({**spec, "data_dir": ".."}, indent=2)])
            files.append(jpath)
            svg = pdir / f"{key}.svg"
            if _render_svg(spec, outdir, svg):
                files.append(svg)
    return files


# -- configuration ------------------------------------------------------------

_UNIT_SCALE = {
    "gyro_bias": {"deg/h": DEG_PER_HOUR, "rad/s": 1.0},
    "gyro_arw": {"deg/sqrt(h)": DEG_PER_SQRT_HOUR, "rad/sqrt(s)": 1.0},
    "accel_bias": {"m/s^2": 1.0},
    # "m/s^2/sqrt(hz)" is numerically the same as m/s^1.5
    "accel_vrw": {"m/s/sqrt(h)": PER_SQRT_HOUR, "m/s^1.5": 1.0, "m/s^2/sqrt(hz)": 1.0},
}
_DEFAULT_UNIT = {"gyro_bias": "deg/h", "gyro_arw": "deg/sqrt(h)", "accel_bias": "m/s^2", "accel_vrw": "m/s/sqrt(h)"}


def read_key_values(text: str, source: str = "<string>") -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` and ``;`` start comments.

    Keys are case-insensitive and ``-``/``_`` are interchangeable.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        parser.read_string("[top]\n" + text, source=source)
    except configparser.Error as exc:
        raise ValueError(f"{source}: {exc}") from exc
    return {k.replace("-", "_"): v.strip() for k, v in parser["top"].items()}


def sensor_spec_from_text(text: str, source: str = "<string>", seed: int = 0) -> SensorSpec:
    """Sensor file: ``gyro_bias``, ``gyro_arw``, ``accel_bias``, ``accel_vrw``
    values, each with an optional ``<name>_unit`` tag (see ``_UNIT_SCALE``)."""
    kv = read_key_values(text, source)
    values = {}
    for name, units in _UNIT_SCALE.items():
        unit = kv.pop(f"{name}_unit", _DEFAULT_UNIT[name]).lower().replace(" ", "")
        if unit not in units:
            raise ValueError(f"{source}: unit {unit!r} for {name} not one of {sorted(units)}")
        values[name] = float(kv.pop(name, "0")) * units[unit]
    seed = int(kv.pop("seed", seed))
    if kv:
        raise ValueError(f"{source}: unknown keys {sorted(kv)}")
    return SensorSpec(seed=seed, **values)


def resolve_sensors(name: str, seed: int = 0) -> tuple[SensorSpec, str]:
    """Preset name or ``file:PATH`` to a spec and a summary label."""
    if name.startswith("file:"):
        path = Path(name[5:])
        try:
            text = path.read_text()
        except OSError as exc:
            raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
        return sensor_spec_from_text(text, str(path), seed), path.stem
    if name not in SENSOR_PRESETS:
        raise ValueError(f"sensors must be one of {sorted(SENSOR_PRESETS)} or file:PATH")
    return replace(SENSOR_PRESETS[name], seed=seed), name
