"""Command line entry point.

``inavfiter simulate`` runs one experiment; ``inavfiter export-dataset``
writes the synthesized (optionally corrupted) increment stream to text.
Exit status: 0 success, 1 an algorithm diverged, 2 bad usage or
configuration, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .harness import ALGORITHMS, ExperimentConfig, increment_stream, read_key_values, resolve_sensors, run_experiment
from .imu import save_increments
from .integrator import IterConfig
from .trajgen import TrajectoryParams

EXIT_OK, EXIT_DIVERGED, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trajectory", choices=("coning", "level"), default="coning")
    p.add_argument("--duration", type=float, default=4000.0, help="seconds")
    p.add_argument("--rate", type=float, default=100.0, help="sample rate in Hz")
    p.add_argument("--sensors", default="perfect", help="perfect, nav, high or file:PATH")
    p.add_argument("--seed", type=int, default=0, help="noise seed (unsigned 64-bit)")
    p.add_argument("--config", type=Path, help="key = value file overriding the flags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="inavfiter", description="Strapdown navigation experiments.")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run navigators against an analytic flight")
    _common(sim)
    sim.add_argument("--samples-per-update", type=int, default=8)
    sim.add_argument("--algorithms", default=",".join(ALGORITHMS), help="comma list of " + ", ".join(ALGORITHMS))
    sim.add_argument("--damped", action="store_true", help="zero up velocity and height after each update")
    sim.add_argument("--order", choices=("standard", "swapped"), default="standard")
    sim.add_argument("--dense", type=int, default=0, help="extra samples inside each iNavFIter interval")
    sim.add_argument("--dataset", type=Path, help="increments file to use instead of synthesis")
    sim.add_argument("--out", type=Path, default=Path("results"))
    sim.add_argument("--emit-plots", action="store_true")

    exp = sub.add_parser("export-dataset", help="write the increment stream as text")
    _common(exp)
    exp.add_argument("--out", type=Path, required=True)
    return parser


def _apply_config(ns: argparse.Namespace) -> None:
    try:
        text = ns.config.read_text()
    except OSError as exc:
        raise OSError(f"cannot read {ns.config}: {exc.strerror or exc}") from exc
    defaults = vars(ns).copy()
    for key, raw in read_key_values(text, str(ns.config)).items():
        if key in ("config", "command", "log_level") or key not in defaults:
            raise ValueError(f"{ns.config}: unknown key {key!r}")
        current = defaults[key]
        if isinstance(current, bool):
            value = _bool(raw)
        elif isinstance(current, int):
            value = int(raw)
        elif isinstance(current, float):
            value = float(raw)
        elif key in ("out", "dataset"):
            value = Path(raw)
        else:
            value = raw
        setattr(ns, key, value)


def _trajectory(ns) -> TrajectoryParams:
    return TrajectoryParams(mode=ns.trajectory, duration=ns.duration, sample_rate=ns.rate)


def _experiment_config(ns) -> ExperimentConfig:
    sensors, label = resolve_sensors(ns.sensors, ns.seed)
    algos = tuple(a.strip() for a in ns.algorithms.split(",") if a.strip())
    return ExperimentConfig(
        trajectory=_trajectory(ns),
        sensors=sensors,
        algorithms=algos,
        iter=IterConfig(N=ns.samples_per_update, order=ns.order),
        damped=ns.damped,
        output_dir=ns.out,
        emit_plots=ns.emit_plots,
        sensor_label=label,
        dense=ns.dense,
        dataset=ns.dataset,
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=ns.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        if ns.config is not None:
            _apply_config(ns)
        if ns.command == "export-dataset":
            sensors, _ = resolve_sensors(ns.sensors, ns.seed)
            cfg = ExperimentConfig(trajectory=_trajectory(ns), sensors=sensors, algorithms=("typical2",))
            t_end, gyro, accel = increment_stream(cfg)
            save_increments(ns.out, t_end, gyro, accel)
            print(f"wrote {len(t_end)} samples to {ns.out}")
            return EXIT_OK
        cfg = _experiment_config(ns)
        result = run_experiment(cfg)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for run in result.runs.values():
        if run.diverged:
            print(f"error: {run.name} diverged: {run.message}", file=sys.stderr)
    print((cfg.output_dir / "summary.csv").read_text(), end="")
    return EXIT_OK if result.ok else EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
