"""Command-line entry point.

Exit codes:
    0  success
    1  unexpected internal error
    2  usage error (unknown verb, bad flag)
    3  missing or malformed config
    4  I/O failure while writing outputs
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from fedsel import spectrum
from fedsel.config import (
    DEFAULT_LMAX_GRID,
    DEFAULT_N_GRID,
    ConfigError,
    ExperimentConfig,
    SweepSpec,
    load_config,
)
from fedsel.experiments import (
    SUMMARY_COLUMNS,
    emit_plot,
    run_round,
    summarize,
    sweep,
    write_csv,
    write_metrics_csv,
    write_skips_csv,
)
from fedsel.population import dump_population_csv, sample_population

log = logging.getLogger("fedsel")

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3, 4
SEED_ENV = "FEDSEL_SEED"
VERBS = ("sweep-lmax", "sweep-n", "spectrum-train", "spectrum-eval", "gen-population", "solve-round")


@dataclass
class Command:
    verb: str
    config_path: Path
    out_dir: Path
    seed_override: int | None
    emit_plots: bool
    jobs: int = 1
    policy_path: Path | None = None
    seed_source: str = ""


def _u64(text: str) -> int:
    try:
        value = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed out of unsigned 64-bit range: {value}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedsel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", metavar="VERB", required=True)
    for verb in VERBS:
        p = sub.add_parser(verb)
        p.add_argument("--config", required=True, type=Path, help="JSON experiment config")
        p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
        p.add_argument("--seed", type=_u64, default=None, help=f"seed override (fallback: ${SEED_ENV})")
        p.add_argument("--jobs", type=_positive_int, default=1, help="worker processes for sweeps")
        p.add_argument("--plots", action="store_true", help="also write SVG plots")
        if verb == "spectrum-eval":
            p.add_argument("--policy", type=Path, default=None,
                           help="trained policy JSON (default: OUT/q_policy.json, trained if absent)")
    return parser


def parse(argv: list[str] | None) -> Command:
    args = build_parser().parse_args(argv)
    seed, source = args.seed, "--seed"
    if seed is None and os.environ.get(SEED_ENV):
        try:
            seed, source = _u64(os.environ[SEED_ENV]), SEED_ENV
        except argparse.ArgumentTypeError as exc:
            raise ConfigError(f"{SEED_ENV}: {exc}") from exc
    return Command(
        verb=args.verb,
        config_path=args.config,
        out_dir=args.out,
        seed_override=seed,
        emit_plots=args.plots,
        jobs=args.jobs,
        policy_path=getattr(args, "policy", None),
        seed_source=source if seed is not None else "",
    )


def _provenance(cmd: Command) -> list[str]:
    if cmd.seed_override is None:
        return []
    return [f"overrides: seed={cmd.seed_override} (from {cmd.seed_source})"]


def _run_sweep(cmd: Command, cfg: ExperimentConfig, param: str, name: str) -> None:
    default = DEFAULT_LMAX_GRID if param == "l_max_bytes" else DEFAULT_N_GRID
    grid = cfg.sweep.grid if cfg.sweep.param == param else list(default)
    cfg = dataclasses.replace(cfg, sweep=SweepSpec(param, grid))
    if cmd.seed_override is not None:
        cfg = dataclasses.replace(cfg, seeds=[cmd.seed_override])
    rows = sweep(cfg, jobs=cmd.jobs)
    cmd.out_dir.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(cmd.out_dir / f"{name}.csv", rows, _provenance(cmd))
    if any(r.skipped for r in rows):
        write_skips_csv(cmd.out_dir / f"{name}_skipped.csv", rows)
    summary = summarize(rows)
    write_csv(cmd.out_dir / f"{name}_summary.csv", SUMMARY_COLUMNS, summary, _provenance(cmd))
    if cmd.emit_plots:
        metric = "objective" if param == "l_max_bytes" else "total_sensed"
        emit_plot(summary, cmd.out_dir / f"{name}.svg", metric)
    log.info("%s: %d rows -> %s", name, len(rows), cmd.out_dir)


def _solve_round(cmd: Command, cfg: ExperimentConfig) -> None:
    seed = cfg.seeds[0] if cmd.seed_override is None else cmd.seed_override
    rows = run_round(cfg, seed)
    cmd.out_dir.mkdir(parents=True, exist_ok=True)
    path = cmd.out_dir / "round.csv"
    write_metrics_csv(path, rows, _provenance(cmd))
    sys.stdout.write(path.read_text(encoding="utf-8"))


def _gen_population(cmd: Command, cfg: ExperimentConfig) -> None:
    seed = cfg.population.seed if cmd.seed_override is None else cmd.seed_override
    devices = sample_population(cfg.population, seed)
    cmd.out_dir.mkdir(parents=True, exist_ok=True)
    dump_population_csv(devices, cmd.out_dir / "population.csv")


def _spectrum_seed(cmd: Command, cfg: ExperimentConfig) -> int:
    return cfg.spectrum.seed if cmd.seed_override is None else cmd.seed_override


def _spectrum_train(cmd: Command, cfg: ExperimentConfig) -> spectrum.QPolicy:
    sc = cfg.spectrum
    policy, curve = spectrum.train_agent(sc.workload, sc.hyper, _spectrum_seed(cmd, cfg))
    cmd.out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(cmd.out_dir / "learning_curve.csv", ("episode", "mean_delay_s", "violation_rate"),
              curve, _provenance(cmd))
    spectrum.save_policy(policy, cmd.out_dir / "q_policy.json")
    return policy


@dataclass
class _EvalRow:
    policy: str
    mean_delay_s: float
    violation_rate: float


def _spectrum_eval(cmd: Command, cfg: ExperimentConfig) -> None:
    sc = cfg.spectrum
    path = cmd.policy_path or cmd.out_dir / "q_policy.json"
    if path.exists():
        policy = spectrum.load_policy(path)
    elif cmd.policy_path is not None:
        raise ConfigError(f"policy file not found: {path}")
    else:
        policy = _spectrum_train(cmd, cfg)
    # evaluation stream is disjoint from the training stream
    eval_seed = [_spectrum_seed(cmd, cfg), 1]
    rows = []
    for name, pol in [("q_learning", policy)] + [(b, b) for b in spectrum.BASELINES]:
        delay, viol = spectrum.evaluate_policy(pol, sc.workload, eval_seed, sc.eval_episodes)
        rows.append(_EvalRow(name, delay, viol))
    cmd.out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(cmd.out_dir / "spectrum_eval.csv", ("policy", "mean_delay_s", "violation_rate"),
              rows, _provenance(cmd))


def dispatch(cmd: Command, cfg: ExperimentConfig) -> None:
    if cmd.verb == "sweep-lmax":
        _run_sweep(cmd, cfg, "l_max_bytes", "sweep_lmax")
    elif cmd.verb == "sweep-n":
        _run_sweep(cmd, cfg, "n_devices", "sweep_n")
    elif cmd.verb == "solve-round":
        _solve_round(cmd, cfg)
    elif cmd.verb == "gen-population":
        _gen_population(cmd, cfg)
    elif cmd.verb == "spectrum-train":
        _spectrum_train(cmd, cfg)
    elif cmd.verb == "spectrum-eval":
        _spectrum_eval(cmd, cfg)
    else:  # argparse restricts verbs; kept for direct callers
        raise ConfigError(f"unknown verb {cmd.verb!r}")


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    try:
        cmd = parse(argv)
        cfg = load_config(cmd.config_path)
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"fedsel: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        dispatch(cmd, cfg)
    except ConfigError as exc:
        print(f"fedsel: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"fedsel: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001 - last-resort diagnostic
        print(f"fedsel: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
