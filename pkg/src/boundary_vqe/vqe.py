"""Cost, gradients, L-BFGS minimization and warm-started field sweeps."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import line_search

from .ansatz import HvaConfig, build_circuit, random_params
from .spin_model import IsingChainSpec, Observable, build_hamiltonian
from .statevector import (
    Circuit,
    apply_gate,
    apply_generator,
    compile_observable,
    expectation,
    init_zero,
    inverse,
    run_circuit,
)

log = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]


@dataclass(frozen=True)
class VqeConfig:
    max_iters_first: int = 7000
    max_iters_subsequent: int = 1000
    init_range: tuple[float, float] = (-0.3 * np.pi, 0.3 * np.pi)
    seed: int = 0
    gradient_tolerance: float = 1e-8
    energy_change_tolerance: float = 1e-12
    history_size: int = 10
    gradient_method: str = "adjoint"
    restarts: int = 0

    def __post_init__(self):
        if self.max_iters_first < 1 or self.max_iters_subsequent < 1:
            raise ValueError("iteration caps must be positive")
        lo, hi = self.init_range
        if not (lo < hi and np.isclose(lo, -hi)):
            raise ValueError(f"init_range must be symmetric about 0, got {self.init_range}")
        if self.gradient_method not in ("adjoint", "parameter-shift"):
            raise ValueError(f"unknown gradient method {self.gradient_method!r}")

    def to_dict(self) -> dict:
        return {
            "max_iters_first": self.max_iters_first,
            "max_iters_subsequent": self.max_iters_subsequent,
            "init_range": list(self.init_range),
            "seed": self.seed,
            "gradient_tolerance": self.gradient_tolerance,
            "energy_change_tolerance": self.energy_change_tolerance,
            "history_size": self.history_size,
            "gradient_method": self.gradient_method,
            "restarts": self.restarts,
        }


@dataclass
class VqeResult:
    optimal_params: np.ndarray
    energy: float
    iteration_trace: list[tuple[int, float]]
    converged: bool
    h_value: float | None = None
    message: str = ""
    evaluations: int = 0
    initial_params: np.ndarray | None = None

    @property
    def iterations(self) -> int:
        return self.iteration_trace[-1][0] if self.iteration_trace else 0


@dataclass
class SweepPoint:
    h_l: float
    h_r: float
    result: VqeResult | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.result is not None and self.error is None


@dataclass
class SweepResult:
    points: list[SweepPoint]
    spec_template: IsingChainSpec
    ansatz_config: HvaConfig
    vqe_config: VqeConfig
    mirror_right: bool
    direction: str = field(default="decreasing")

    @property
    def h_values(self) -> np.ndarray:
        return np.array([p.h_l for p in self.points])

    def spec_at(self, index: int) -> IsingChainSpec:
        p = self.points[index]
        return self.spec_template.with_fields(p.h_l, p.h_r)


# ---------------------------------------------------------------------------
# cost and gradients


def cost(params: Sequence[float], spec: IsingChainSpec, ansatz_config: HvaConfig,
         hamiltonian: Observable | None = None) -> float:
    H = build_hamiltonian(spec) if hamiltonian is None else hamiltonian
    state = run_circuit(build_circuit(ansatz_config, spec.L, params), init_zero(spec.L))
    return expectation(state, H)


def _circuit_energy(circuit: Circuit, H: Observable) -> float:
    return expectation(run_circuit(circuit), H)


def parameter_shift_gradient(params: Sequence[float], spec: IsingChainSpec,
                             ansatz_config: HvaConfig,
                             hamiltonian: Observable | None = None) -> np.ndarray:
    """Two-point shift rule applied to each gate occurrence separately.

    Shared parameters collect sign * (C(+pi/2) - C(-pi/2)) / 2 from every gate
    they drive.
    """
    H = build_hamiltonian(spec) if hamiltonian is None else hamiltonian
    circuit = build_circuit(ansatz_config, spec.L, params)
    names = circuit.parameter_names
    grad = np.zeros(len(names))
    position = {n: i for i, n in enumerate(names)}
    gates = list(circuit.gates)
    for idx, gate in enumerate(gates):
        if gate.param is None:
            continue
        shifted = []
        for shift in (0.5 * np.pi, -0.5 * np.pi):
            trial = gates.copy()
            trial[idx] = gate.with_angle(gate.angle + shift)
            shifted.append(_circuit_energy(Circuit(circuit.qubit_count, tuple(trial), names), H))
        grad[position[gate.param]] += gate.sign * 0.5 * (shifted[0] - shifted[1])
    return grad


def adjoint_energy_and_gradient(params: Sequence[float], spec: IsingChainSpec,
                                ansatz_config: HvaConfig,
                                hamiltonian: Observable | None = None
                                ) -> tuple[float, np.ndarray]:
    """Energy and exact gradient from one forward and one reverse sweep.

    For a gate exp(-i a G / 2) the derivative of the energy with respect to a
    is Im <lambda|G|psi>, with psi the state right after the gate and lambda
    the back-propagated H|psi_final>. Agrees with the shift rule to rounding.
    """
    H = build_hamiltonian(spec) if hamiltonian is None else hamiltonian
    circuit = build_circuit(ansatz_config, spec.L, params)
    L = spec.L
    psi = run_circuit(circuit)
    compiled = compile_observable(H)
    lam_amps = compiled.apply(psi.amplitudes)
    raw = np.vdot(psi.amplitudes, lam_amps)
    energy = float(raw.real) + compiled.offset
    lam = type(psi)(lam_amps, L)
    names = circuit.parameter_names
    position = {n: i for i, n in enumerate(names)}
    grad = np.zeros(len(names))
    for gate in reversed(circuit.gates):
        if gate.param is not None:
            g_psi = apply_generator(psi.amplitudes, L, gate)
            grad[position[gate.param]] += gate.sign * float(np.vdot(lam.amplitudes, g_psi).imag)
        inv = inverse(gate)
        apply_gate(psi, inv)
        apply_gate(lam, inv)
    return energy, grad


def gradient(params: Sequence[float], spec: IsingChainSpec, ansatz_config: HvaConfig,
             method: str = "parameter-shift") -> np.ndarray:
    if method == "parameter-shift":
        return parameter_shift_gradient(params, spec, ansatz_config)
    if method == "adjoint":
        return adjoint_energy_and_gradient(params, spec, ansatz_config)[1]
    raise ValueError(f"unknown gradient method {method!r}")


def make_objective(spec: IsingChainSpec, ansatz_config: HvaConfig,
                   method: str = "adjoint") -> Objective:
    H = build_hamiltonian(spec)
    if method == "adjoint":
        return lambda x: adjoint_energy_and_gradient(x, spec, ansatz_config, H)
    return lambda x: (cost(x, spec, ansatz_config, H),
                      parameter_shift_gradient(x, spec, ansatz_config, H))


# ---------------------------------------------------------------------------
# L-BFGS


class _CachedObjective:
    """Evaluate (f, g) once per point; scipy's line search asks for f and g separately."""

    def __init__(self, objective: Objective):
        self.objective = objective
        self.evaluations = 0
        self._key: bytes | None = None
        self._value: tuple[float, np.ndarray] | None = None

    def __call__(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        key = np.asarray(x, dtype=float).tobytes()
        if key != self._key:
            f, g = self.objective(np.array(x, dtype=float))
            self._key, self._value = key, (float(f), np.asarray(g, dtype=float))
            self.evaluations += 1
        return self._value

    def f(self, x):
        return self(x)[0]

    def g(self, x):
        return self(x)[1]


def _two_loop(grad: np.ndarray, s_hist: list, y_hist: list) -> np.ndarray:
    q = grad.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / y.dot(s)
        a = rho * s.dot(q)
        q -= a * y
        alphas.append((rho, a))
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        q *= s.dot(y) / y.dot(y)
    for (s, y), (rho, a) in zip(zip(s_hist, y_hist), reversed(alphas)):
        b = rho * y.dot(q)
        q += (a - b) * s
    return -q


def _wolfe_step(fun, x, d, g, f, old_f, c1, c2):
    # a failed search is handled by the caller, so scipy's warning is noise
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="The line search")
        alpha, _, _, f_new, _, _ = line_search(fun.f, fun.g, x, d, gfk=g, old_fval=f,
                                               old_old_fval=old_f, c1=c1, c2=c2, maxiter=50)
    return alpha, f_new


def lbfgs(objective: Objective, x0: Sequence[float], max_iters: int,
          gradient_tolerance: float = 1e-8, energy_change_tolerance: float = 1e-12,
          history_size: int = 10, c1: float = 1e-4, c2: float = 0.9) -> VqeResult:
    """Limited-memory BFGS with a strong-Wolfe line search.

    Stops when ||g|| <= gradient_tolerance, when an accepted step lowers the
    objective by no more than energy_change_tolerance, or at max_iters.
    A failed line search ends the run with ``converged=False``.
    """
    fun = _CachedObjective(objective)
    x = np.array(x0, dtype=float)
    f, g = fun(x)
    trace = [(0, f)]
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    old_f = f + 0.5 * np.linalg.norm(g)
    converged, message = False, "iteration cap reached"
    for it in range(1, max_iters + 1):
        if np.linalg.norm(g) <= gradient_tolerance:
            converged, message = True, "gradient norm below tolerance"
            break
        d = _two_loop(g, s_hist, y_hist)
        if d.dot(g) >= 0:
            s_hist.clear()
            y_hist.clear()
            d = -g
        alpha, f_new = _wolfe_step(fun, x, d, g, f, old_f, c1, c2)
        if alpha is None and (s_hist or not np.allclose(d, -g)):
            s_hist.clear()
            y_hist.clear()
            d = -g
            alpha, f_new = _wolfe_step(fun, x, d, g, f, None, c1, c2)
        if alpha is None or f_new is None or not f_new <= f:
            message = "line search failed"
            break
        x_new = x + alpha * d
        f_new, g_new = fun(x_new)
        s, y = x_new - x, g_new - g
        if s.dot(y) > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)
            if len(s_hist) > history_size:
                s_hist.pop(0)
                y_hist.pop(0)
        old_f, f = f, f_new
        x, g = x_new, g_new
        trace.append((it, f))
        if old_f - f <= energy_change_tolerance:
            converged, message = True, "energy change below tolerance"
            break
    return VqeResult(x, f, trace, converged, message=message, evaluations=fun.evaluations)


def minimize(spec: IsingChainSpec, ansatz_config: HvaConfig, vqe_config: VqeConfig,
             initial_params: Sequence[float], max_iters: int | None = None,
             objective: Objective | None = None) -> VqeResult:
    initial = np.array(initial_params, dtype=float)
    if objective is None:
        if initial.shape != (ansatz_config.num_params,):
            raise ValueError(f"expected {ansatz_config.num_params} parameters, got {initial.shape}")
        objective = make_objective(spec, ansatz_config, vqe_config.gradient_method)
    result = lbfgs(
        objective,
        initial,
        max_iters or vqe_config.max_iters_first,
        vqe_config.gradient_tolerance,
        vqe_config.energy_change_tolerance,
        vqe_config.history_size,
    )
    result.initial_params = initial
    return result


# ---------------------------------------------------------------------------
# sweeps


def _best_of(results: list[VqeResult]) -> VqeResult:
    return min(results, key=lambda r: r.energy)


def sweep(spec_template: IsingChainSpec, h_values: Sequence[float], ansatz_config: HvaConfig,
          vqe_config: VqeConfig, mirror_right: bool = True) -> SweepResult:
    """Optimize along ``h_values`` of h_l, warm-starting each point from the last success.

    With ``mirror_right`` the right field follows h_r = -h_l; otherwise h_r is
    taken from ``spec_template``.
    """
    h_values = np.asarray(h_values, dtype=float)
    if h_values.size == 0:
        raise ValueError("empty field grid")
    steps = np.diff(h_values)
    if h_values.size > 1 and not (np.all(steps > 0) or np.all(steps < 0)):
        raise ValueError("field grid must be strictly monotone")
    direction = "decreasing" if h_values.size > 1 and steps[0] < 0 else "increasing"
    rng = np.random.default_rng(vqe_config.seed)
    points: list[SweepPoint] = []
    warm: np.ndarray | None = None
    for h in h_values:
        h_r = -h if mirror_right else spec_template.h_r
        spec = spec_template.with_fields(float(h), float(h_r))
        try:
            attempts = []
            if warm is None:
                start = random_params(ansatz_config, rng, vqe_config.init_range)
                attempts.append(minimize(spec, ansatz_config, vqe_config, start,
                                         vqe_config.max_iters_first))
            else:
                attempts.append(minimize(spec, ansatz_config, vqe_config, warm,
                                         vqe_config.max_iters_subsequent))
            for _ in range(vqe_config.restarts):
                start = random_params(ansatz_config, rng, vqe_config.init_range)
                attempts.append(minimize(spec, ansatz_config, vqe_config, start,
                                         vqe_config.max_iters_first))
            best = _best_of(attempts)
            best.h_value = float(h)
            if not np.isfinite(best.energy):
                raise FloatingPointError("non-finite energy")
            warm = best.optimal_params
            points.append(SweepPoint(float(h), float(h_r), best))
            log.info("h_l=%.6f energy=%.12f iters=%d %s", h, best.energy, best.iterations,
                     best.message)
        except (ArithmeticError, ValueError) as exc:
            log.warning("point h_l=%s failed: %s", h, exc)
            points.append(SweepPoint(float(h), float(h_r), None, str(exc)))
    return SweepResult(points, spec_template, ansatz_config, vqe_config, mirror_right, direction)


def with_seed(config: VqeConfig, seed: int) -> VqeConfig:
    return replace(config, seed=seed)
