"""Command line entry point: ``boundary-vqe <experiment> [flags]``.

Settings come from built-in defaults, then an optional ``--config`` file
(YAML or JSON), then explicit flags.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path

import yaml

from .experiments import EXIT_CONFIG, EXIT_OK, EXPERIMENTS, RunConfig, run

log = logging.getLogger("boundary_vqe")

# flag name -> RunConfig field
_FLAGS = {
    "L": "L", "J": "J", "hx": "h_x", "hr": "h_r", "hl": "h_l",
    "h_start": "h_start", "h_stop": "h_stop", "points": "points", "direction": "direction",
    "layers": "layers", "boundary_mode": "boundary_mode",
    "max_iters_first": "max_iters_first", "max_iters_subsequent": "max_iters_subsequent",
    "gradient_tolerance": "gradient_tolerance",
    "energy_change_tolerance": "energy_change_tolerance",
    "restarts": "restarts", "seed": "seed", "sizes": "sizes", "fit_min_L": "fit_min_L",
    "shots": "shots", "x": "x_file", "y": "y_file", "column": "column",
    "params": "params_file", "outdir": "outdir", "tie_boundary": "tie_boundary",
}


def _sizes(text: str) -> list[int]:
    return [int(v) for v in text.replace(" ", "").split(",") if v]


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML/JSON file with RunConfig fields")
    p.add_argument("--outdir")
    p.add_argument("--seed", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def _add_chain(p: argparse.ArgumentParser):
    p.add_argument("--L", type=int)
    p.add_argument("--J", type=float)
    p.add_argument("--hx", type=float)
    p.add_argument("--hr", type=float, help="fixed right boundary field")
    tie = p.add_mutually_exclusive_group()
    tie.add_argument("--tie-boundary", dest="tie_boundary", action="store_true", default=None,
                     help="set h_r = -h_l at every point")
    tie.add_argument("--no-tie-boundary", dest="tie_boundary", action="store_false")


def _add_grid(p: argparse.ArgumentParser):
    p.add_argument("--h-start", type=float)
    p.add_argument("--h-stop", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--direction", choices=("increasing", "decreasing"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="boundary-vqe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="experiment", required=True)

    p = sub.add_parser("sweep-exact", help="free-fermion energies and derivatives along h_l")
    _add_common(p), _add_chain(p), _add_grid(p)

    p = sub.add_parser("sweep-vqe", help="warm-started VQE sweep along h_l")
    _add_common(p), _add_chain(p), _add_grid(p)
    p.add_argument("--layers", type=int)
    p.add_argument("--boundary-mode", choices=("tied", "untied"))
    p.add_argument("--max-iters-first", type=int)
    p.add_argument("--max-iters-subsequent", type=int)
    p.add_argument("--gradient-tolerance", type=float)
    p.add_argument("--energy-change-tolerance", type=float)
    p.add_argument("--restarts", type=int, help="extra random restarts per point, best kept")
    p.add_argument("--shots", type=int, help="also estimate each optimum with this many shots")

    p = sub.add_parser("scaling", help="argmin of d2E/dh2 versus 1/L (h_r = -h_l)")
    _add_common(p), _add_grid(p)
    p.add_argument("--J", type=float)
    p.add_argument("--hx", type=float)
    p.add_argument("--sizes", type=_sizes)
    p.add_argument("--fit-min-L", type=int)

    p = sub.add_parser("gap-scan", help="gap versus L and decay classification")
    _add_common(p), _add_chain(p)
    p.add_argument("--hl", type=float)
    p.add_argument("--sizes", type=_sizes)

    p = sub.add_parser("rms-report", help="RMS deviation between two CSV columns")
    _add_common(p)
    p.add_argument("--x", required=False)
    p.add_argument("--y", required=False)
    p.add_argument("--column")

    p = sub.add_parser("dump-circuit", help="print the ansatz gate list")
    _add_common(p)
    p.add_argument("--L", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--boundary-mode", choices=("tied", "untied"))
    p.add_argument("--params", help="params JSON (single point, or a sweep-vqe params.json)")
    p.add_argument("--hl", type=float, help="sweep point to pick from a params bundle")

    p = sub.add_parser("batch", help="run a list of experiment configs concurrently")
    p.add_argument("file", help="YAML/JSON list of configs, each with an 'experiment' key")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--outdir")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def load_config_file(path: str | Path) -> dict | list:
    text = Path(path).read_text()
    return yaml.safe_load(text) if text.strip() else {}


def _coerce(data: dict) -> dict:
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return data


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if getattr(args, "config", None):
        loaded = load_config_file(args.config)
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a mapping")
        values.update(_coerce(loaded))
    for flag, name in _FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[name] = v
    values["experiment"] = args.experiment
    return RunConfig(**values)


def _run_one(data: dict) -> tuple[int, dict]:
    outcome = run(RunConfig(**_coerce(data)))
    return outcome.status, {"directory": str(outcome.directory) if outcome.directory else None,
                            **outcome.summary}


def run_batch(path: str, workers: int, outdir: str | None) -> int:
    entries = load_config_file(path)
    if not isinstance(entries, list):
        raise ValueError("batch file must hold a list of configs")
    jobs = []
    for entry in entries:
        entry = dict(entry)
        if outdir is not None:
            entry.setdefault("outdir", outdir)
        if entry.get("experiment") not in EXPERIMENTS:
            raise ValueError(f"batch entry has unknown experiment {entry.get('experiment')!r}")
        jobs.append(entry)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    for status, summary in results:
        print(json.dumps({"status": status, **summary}, default=str))
    return max(status for status, _ in results) if results else EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        if args.experiment == "batch":
            return run_batch(args.file, args.workers, args.outdir)
        config = resolve_config(args)
    except (ValueError, TypeError, OSError, yaml.YAMLError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outcome = run(config)
    if outcome.text:
        print(outcome.text)
    if outcome.directory is not None:
        print(json.dumps({"status": outcome.status, "directory": str(outcome.directory),
                          **outcome.summary}, default=str))
    elif outcome.status != EXIT_OK:
        print(f"error: {outcome.summary.get('error')}", file=sys.stderr)
    return outcome.status


if __name__ == "__main__":
    sys.exit(main())
