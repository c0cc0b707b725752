"""Experiment runners behind the command line.

Each runner takes a validated :class:`RunConfig`, writes its artifacts under
``<outdir>/<experiment>/<config-hash>/`` and returns an :class:`Outcome`.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__
from .ansatz import (
    HvaConfig,
    build_circuit,
    load_params,
    params_from_dict,
    params_to_dict,
    run_ansatz,
)
from .criticality import (
    BoundaryMinimumWarning,
    EnergyCurve,
    ScalingSeries,
    classify_gap_decay,
    find_second_derivative_minimum,
    finite_size_scaling,
    relative_error_series,
    rms,
    spline_derivative,
)
from .free_fermion import DENSE_MAX_SITES, chain_gap, dense_ed, ground_energy
from .spin_model import IsingChainSpec, build_hamiltonian, build_kink_operator
from .statevector import RNG_NAME, expectation, sample_expectation
from .vqe import VqeConfig, sweep

log = logging.getLogger(__name__)

EXPERIMENTS = ("sweep-exact", "sweep-vqe", "scaling", "gap-scan", "rms-report", "dump-circuit")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2
EXIT_NUMERICAL = 3

DEFAULT_SIZES = (4, 8, 12, 16, 20, 24, 28, 32, 40, 60, 100, 200, 500)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    experiment: str
    L: int = 4
    J: float = 1.0
    h_x: float = 0.5
    h_r: float | None = None
    tie_boundary: bool = True
    h_start: float = 0.4
    h_stop: float = 1.0
    points: int = 10
    direction: str | None = None
    layers: int = 6
    boundary_mode: str | None = None
    max_iters_first: int = 7000
    max_iters_subsequent: int = 1000
    gradient_tolerance: float = 1e-8
    energy_change_tolerance: float = 1e-12
    restarts: int = 0
    seed: int = 0
    sizes: list[int] = field(default_factory=lambda: list(DEFAULT_SIZES))
    h_l: float = 0.4
    fit_min_L: int = 40
    shots: int = 0
    x_file: str | None = None
    y_file: str | None = None
    column: str = "energy"
    params_file: str | None = None
    outdir: str = "runs"

    def validate(self) -> "RunConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.L < 2:
            raise ConfigError("L must be >= 2")
        if self.J <= 0:
            raise ConfigError("J must be positive")
        if self.experiment in ("sweep-exact", "sweep-vqe", "scaling"):
            if self.points < 2 or self.h_start == self.h_stop:
                raise ConfigError("field grid is degenerate")
            if not self.tie_boundary and self.h_r is None:
                raise ConfigError("--hr is required unless the boundary fields are tied")
        if self.direction not in (None, "increasing", "decreasing"):
            raise ConfigError(f"direction must be increasing or decreasing, got {self.direction}")
        if self.boundary_mode not in (None, "tied", "untied"):
            raise ConfigError(f"unknown boundary mode {self.boundary_mode}")
        if self.experiment in ("scaling", "gap-scan") and len(self.sizes) < 3:
            raise ConfigError("need at least 3 sizes")
        if self.experiment == "rms-report" and not (self.x_file and self.y_file):
            raise ConfigError("rms-report needs --x and --y files")
        if self.shots < 0:
            raise ConfigError("shots must be non-negative")
        return self

    def payload(self) -> dict:
        """Config fields that determine the results (output directory excluded)."""
        data = asdict(self)
        data.pop("outdir")
        return data

    def config_hash(self) -> str:
        text = json.dumps(self.payload(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:12]

    def spec_template(self) -> IsingChainSpec:
        h_r = -self.h_start if self.tie_boundary or self.h_r is None else self.h_r
        return IsingChainSpec(self.L, self.J, self.h_x, self.h_start, h_r)

    def h_grid(self, default_direction: str) -> np.ndarray:
        grid = np.linspace(self.h_start, self.h_stop, self.points)
        direction = self.direction or default_direction
        return np.sort(grid) if direction == "increasing" else np.sort(grid)[::-1]

    def hva(self) -> HvaConfig:
        mode = self.boundary_mode or ("tied" if self.tie_boundary else "untied")
        return HvaConfig(self.layers, mode)

    def vqe(self) -> VqeConfig:
        return VqeConfig(
            max_iters_first=self.max_iters_first,
            max_iters_subsequent=self.max_iters_subsequent,
            seed=self.seed,
            gradient_tolerance=self.gradient_tolerance,
            energy_change_tolerance=self.energy_change_tolerance,
            restarts=self.restarts,
        )


@dataclass
class Outcome:
    status: int
    directory: Path | None
    summary: dict
    text: str = ""


def fmt(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return "" if value is None else str(value)


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence[Any]], config_hash: str):
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    path.write_text(buf.getvalue())


def read_csv_column(path: str | Path, column: str) -> np.ndarray:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or column not in reader.fieldnames:
        raise ConfigError(f"{path} has no column {column!r}")
    return np.array([float(r[column]) if r[column] != "" else math.nan for r in reader])


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj)}")


def write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")


def _output_dir(config: RunConfig) -> Path:
    d = Path(config.outdir) / config.experiment / config.config_hash()
    d.mkdir(parents=True, exist_ok=True)
    return d


def _manifest(config: RunConfig, started: float, extra: dict) -> dict:
    return {
        "tool": "boundary-vqe",
        "version": __version__,
        "experiment": config.experiment,
        "config_hash": config.config_hash(),
        "config": config.payload(),
        "seed": config.seed,
        "rng": RNG_NAME,
        "wall_time_s": time.time() - started,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        **extra,
    }


def _curve_analysis(h: np.ndarray, energy: np.ndarray, **metadata) -> tuple[dict, list]:
    ok = np.isfinite(energy)
    curve = EnergyCurve.from_points(h[ok], energy[ok], **metadata)
    if curve.h.size < 4:
        return {"argmin_h": None, "note": "fewer than 4 valid points"}, []
    d1 = spline_derivative(curve, 1)
    d2 = spline_derivative(curve, 2)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", BoundaryMinimumWarning)
        crit = find_second_derivative_minimum(curve)
    rows = list(zip(d1.h, d1.values, d2.values))
    info = {
        "argmin_h": crit.h,
        "min_second_derivative": crit.value,
        "argmin_at_boundary": crit.at_boundary,
        "max_abs_first_derivative": float(np.abs(d1.values).max()),
        "warnings": [str(w.message) for w in caught],
    }
    return info, rows


# ---------------------------------------------------------------------------


def run_sweep_exact(config: RunConfig) -> Outcome:
    started = time.time()
    out = _output_dir(config)
    grid = config.h_grid("increasing")
    rows, energies, failures = [], [], []
    for h in grid:
        h_r = -h if config.tie_boundary else config.h_r
        spec = IsingChainSpec(config.L, config.J, config.h_x, float(h), float(h_r))
        try:
            e, gap = ground_energy(spec), chain_gap(spec)
        except ArithmeticError as exc:
            failures.append({"h_l": float(h), "error": str(exc)})
            e, gap = math.nan, math.nan
        energies.append(e)
        rows.append((h, h_r, config.L, e, gap))
    h_c = math.sqrt(1.0 - config.h_x) if config.h_x < 1 else None
    write_csv(out / "data.csv", ("h_l", "h_r", "L", "energy", "gap"), rows, config.config_hash())
    info, deriv_rows = _curve_analysis(grid, np.array(energies), source="free-fermion")
    write_csv(out / "derivatives.csv", ("h_l", "dE_dh", "d2E_dh2"), deriv_rows,
              config.config_hash())
    manifest = _manifest(config, started, {"analysis": info, "h_c_reference": h_c,
                                           "failures": failures})
    write_json(out / "manifest.json", manifest)
    status = EXIT_PARTIAL if failures else EXIT_OK
    return Outcome(status, out, {"argmin_h": info.get("argmin_h"), "h_c": h_c})


def run_sweep_vqe(config: RunConfig) -> Outcome:
    started = time.time()
    out = _output_dir(config)
    hva, vqe_cfg = config.hva(), config.vqe()
    grid = config.h_grid("decreasing")
    template = config.spec_template()
    result = sweep(template, grid, hva, vqe_cfg, mirror_right=config.tie_boundary)
    kink = build_kink_operator(config.L)
    rows, trace_rows, params, failures = [], [], {}, []
    energies, exact = [], []
    for idx, point in enumerate(result.points):
        spec = result.spec_at(idx)
        reference = ground_energy(spec)
        if not point.ok:
            failures.append({"h_l": point.h_l, "error": point.error})
            rows.append((point.h_l, point.h_r, None, None, None, None, False, None, None))
            continue
        r = point.result
        state = run_ansatz(hva, config.L, r.optimal_params)
        rel = float(relative_error_series([r.energy], [reference])[0])
        shot_energy = None
        if config.shots:
            shot_energy = sample_expectation(state, build_hamiltonian(spec), config.shots,
                                             seed=config.seed + idx)
        rows.append((point.h_l, point.h_r, r.energy, r.energy / config.L, rel, r.iterations,
                     r.converged, expectation(state, kink), shot_energy))
        energies.append(r.energy)
        exact.append(reference)
        params[fmt(point.h_l)] = {
            "h_l": point.h_l,
            "h_r": point.h_r,
            "params": params_to_dict(hva, r.optimal_params),
        }
        trace_rows += [(idx, it, e - reference) for it, e in r.iteration_trace]
    columns = ("h_l", "h_r", "energy", "energy_per_site", "relative_error_vs_exact",
               "iterations", "converged", "kink_expectation", "shot_energy")
    write_csv(out / "data.csv", columns, rows, config.config_hash())
    write_csv(out / "trace.csv", ("point_index", "iteration", "energy_error"), trace_rows,
              config.config_hash())
    write_json(out / "params.json", {
        "config_hash": config.config_hash(),
        "L": config.L,
        "ansatz": hva.to_dict(),
        "spec_template": template.to_dict(),
        "tie_boundary": config.tie_boundary,
        "points": params,
    })
    ok_h = [p.h_l for p in result.points if p.ok]
    info, _ = _curve_analysis(np.array(ok_h), np.array(energies), source="vqe")
    manifest = _manifest(config, started, {
        "ansatz": hva.to_dict(),
        "vqe": vqe_cfg.to_dict(),
        "direction": result.direction,
        "analysis": info,
        "rms_vs_exact": rms(energies, exact).rms if energies else None,
        "failures": failures,
    })
    write_json(out / "manifest.json", manifest)
    worst = max((row[4] for row in rows if row[4] is not None), default=None)
    status = EXIT_PARTIAL if failures else EXIT_OK
    return Outcome(status, out, {"max_relative_error": worst, "argmin_h": info.get("argmin_h")})


def scaling_series(h_x: float, sizes: Sequence[int], h_start: float, h_stop: float,
                   points: int, J: float = 1.0) -> ScalingSeries:
    grid = np.linspace(min(h_start, h_stop), max(h_start, h_stop), points)
    argmins = []
    for L in sizes:
        energies = [ground_energy(IsingChainSpec(L, J, h_x, h, -h)) for h in grid]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BoundaryMinimumWarning)
            argmins.append(find_second_derivative_minimum(EnergyCurve(grid, np.array(energies))).h)
    return ScalingSeries(np.array(sizes), np.array(argmins), math.sqrt(1.0 - h_x))


def run_scaling(config: RunConfig) -> Outcome:
    started = time.time()
    out = _output_dir(config)
    series = scaling_series(config.h_x, config.sizes, config.h_start, config.h_stop,
                            config.points, config.J)
    report = finite_size_scaling(series, config.fit_min_L)
    cols = ("L", "inv_L", "argmin_h", "h_c_reference", "deviation")
    write_csv(out / "data.csv", cols, [[r[c] for c in cols] for r in report.rows()],
              config.config_hash())
    extra = {
        "fit_min_L": report.fit_min_L,
        "slope": report.slope,
        "intercept": report.intercept,
        "intercept_deviation": report.intercept_deviation,
        "receding_sizes": list(report.receding_sizes),
        "approaching_from": report.approaching_from,
        "non_monotone": report.non_monotone,
    }
    write_json(out / "manifest.json", _manifest(config, started, extra))
    return Outcome(EXIT_OK, out, extra)


def run_gap_scan(config: RunConfig) -> Outcome:
    started = time.time()
    out = _output_dir(config)
    h_r = -config.h_l if config.tie_boundary or config.h_r is None else config.h_r
    rows, gaps = [], []
    for L in config.sizes:
        spec = IsingChainSpec(L, config.J, config.h_x, config.h_l, h_r)
        gap = chain_gap(spec)
        dense_gap = None
        if L <= DENSE_MAX_SITES:
            levels = dense_ed(spec, levels=2).eigenvalues
            dense_gap = float(levels[1] - levels[0])
        rows.append((L, gap, dense_gap))
        gaps.append((L, gap))
    write_csv(out / "data.csv", ("L", "gap", "dense_gap"), rows, config.config_hash())
    usable = [(L, g) for L, g in gaps if g > 0]
    extra: dict = {"h_l": config.h_l, "h_r": h_r}
    try:
        fit = classify_gap_decay(usable)
        extra.update({"preferred": fit.preferred, "exp_rate": fit.exp_rate,
                      "exp_residual": fit.exp_residual, "power": fit.power,
                      "power_residual": fit.power_residual})
    except ValueError as exc:
        extra["classification_error"] = str(exc)
    write_json(out / "manifest.json", _manifest(config, started, extra))
    status = EXIT_OK if "preferred" in extra else EXIT_PARTIAL
    return Outcome(status, out, extra)


def run_rms_report(config: RunConfig) -> Outcome:
    started = time.time()
    x = read_csv_column(config.x_file, config.column)
    y = read_csv_column(config.y_file, config.column)
    if x.shape != y.shape:
        raise ConfigError(f"series lengths differ: {x.size} vs {y.size}")
    report = rms(x, y, (config.x_file, config.y_file))
    out = _output_dir(config)
    write_csv(out / "data.csv", ("rms", "n"), [(report.rms, report.n)], config.config_hash())
    write_json(out / "manifest.json", _manifest(config, started, {"rms": report.rms,
                                                                  "n": report.n}))
    return Outcome(EXIT_OK, out, {"rms": report.rms, "n": report.n}, text=fmt(report.rms))


def run_dump_circuit(config: RunConfig) -> Outcome:
    if config.params_file:
        text = Path(config.params_file).read_text()
        data = json.loads(text)
        if "points" in data:
            # sweep bundle: take the point nearest to h_l
            hva = HvaConfig(**data["ansatz"])
            L = int(data["L"])
            point = min(data["points"].values(), key=lambda p: abs(p["h_l"] - config.h_l))
            values = params_from_dict(hva, point["params"])
        else:
            hva, L, values, _ = load_params(text)
    else:
        hva, L = config.hva(), config.L
        values = np.zeros(hva.num_params)
    circuit = build_circuit(hva, L, values)
    return Outcome(EXIT_OK, None, {"gates": len(circuit)}, text=circuit.render())


RUNNERS = {
    "sweep-exact": run_sweep_exact,
    "sweep-vqe": run_sweep_vqe,
    "scaling": run_scaling,
    "gap-scan": run_gap_scan,
    "rms-report": run_rms_report,
    "dump-circuit": run_dump_circuit,
}


def run(config: RunConfig) -> Outcome:
    """Validate and execute one experiment; errors map onto exit statuses."""
    try:
        config.validate()
        return RUNNERS[config.experiment](config)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return Outcome(EXIT_CONFIG, None, {"error": str(exc)})
    except ArithmeticError as exc:
        log.error("numerical integrity failure: %s", exc)
        return Outcome(EXIT_NUMERICAL, None, {"error": str(exc)})
    except (ValueError, KeyError, OSError) as exc:
        log.error("invalid input: %s", exc)
        return Outcome(EXIT_CONFIG, None, {"error": str(exc)})

