"""Hamiltonian-variational ansatz for the boundary-field Ising chain.

Circuit: a Hadamard on every qubit, then ``p`` layers of

    RX(x) on every site
    RZZ(zz) on (1,2), (3,4), ...  then on (2,3), (4,5), ...
    RZ(z) on site 1 and RZ(-z) on site L        (tied)
    RZ(z) on site 1 and RZ(zr) on site L        (untied)

Optimal parameters depend on this within-layer order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .spin_model import IsingChainSpec
from .statevector import Circuit, GateOp, StateVector, init_zero, run_circuit

BOUNDARY_MODES = ("tied", "untied")


@dataclass(frozen=True)
class HvaConfig:
    layers: int
    boundary_mode: str = "tied"

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError("need at least one layer")
        if self.boundary_mode not in BOUNDARY_MODES:
            raise ValueError(f"boundary_mode must be one of {BOUNDARY_MODES}")

    @property
    def per_layer(self) -> tuple[str, ...]:
        return ("zz", "x", "z") if self.boundary_mode == "tied" else ("zz", "x", "z", "zr")

    @property
    def num_params(self) -> int:
        return self.layers * len(self.per_layer)

    def parameter_names(self) -> tuple[str, ...]:
        return tuple(
            f"layer{i}.{kind}" for i in range(1, self.layers + 1) for kind in self.per_layer
        )

    def to_dict(self) -> dict:
        return {"layers": self.layers, "boundary_mode": self.boundary_mode}


def _bond_order(L: int) -> list[tuple[int, int]]:
    odd = [(i, i + 1) for i in range(1, L, 2)]
    even = [(i, i + 1) for i in range(2, L, 2)]
    return odd + even


def build_circuit(config: HvaConfig, L: int, params: Sequence[float]) -> Circuit:
    if L < 2:
        raise ValueError("ansatz needs L >= 2")
    params = np.asarray(params, dtype=float)
    if params.shape != (config.num_params,):
        raise ValueError(
            f"expected {config.num_params} parameters for {config}, got {params.shape}"
        )
    names = config.parameter_names()
    values = dict(zip(names, params))
    gates = [GateOp("H", (s,)) for s in range(1, L + 1)]
    bonds = _bond_order(L)
    for layer in range(1, config.layers + 1):
        key = f"layer{layer}."
        x, zz, z = values[key + "x"], values[key + "zz"], values[key + "z"]
        gates += [GateOp("RX", (s,), x, key + "x") for s in range(1, L + 1)]
        gates += [GateOp("RZZ", b, zz, key + "zz") for b in bonds]
        gates.append(GateOp("RZ", (1,), z, key + "z"))
        if config.boundary_mode == "tied":
            gates.append(GateOp("RZ", (L,), -z, key + "z", sign=-1))
        else:
            gates.append(GateOp("RZ", (L,), values[key + "zr"], key + "zr"))
    return Circuit(L, tuple(gates), names)


def run_ansatz(config: HvaConfig, L: int, params: Sequence[float]) -> StateVector:
    return run_circuit(build_circuit(config, L, params), init_zero(L))


def expected_gate_count(config: HvaConfig, L: int) -> int:
    return L + config.layers * (L + (L - 1) + 2)


def random_params(config: HvaConfig, rng: np.random.Generator,
                  init_range: tuple[float, float] = (-0.3 * np.pi, 0.3 * np.pi)) -> np.ndarray:
    return rng.uniform(init_range[0], init_range[1], size=config.num_params)


def params_to_dict(config: HvaConfig, params: Sequence[float]) -> dict[str, float]:
    return {n: float(v) for n, v in zip(config.parameter_names(), params)}


def params_from_dict(config: HvaConfig, named: Mapping[str, float]) -> np.ndarray:
    missing = set(config.parameter_names()) - set(named)
    if missing:
        raise KeyError(f"missing parameters: {sorted(missing)}")
    return np.array([float(named[n]) for n in config.parameter_names()])


def dump_params(config: HvaConfig, L: int, params: Sequence[float],
                spec: IsingChainSpec | None = None) -> str:
    payload = {
        "L": L,
        "config": config.to_dict(),
        "spec": spec.to_dict() if spec is not None else None,
        "params": params_to_dict(config, params),
    }
    return json.dumps(payload, indent=2)


def load_params(text: str) -> tuple[HvaConfig, int, np.ndarray, IsingChainSpec | None]:
    data = json.loads(text)
    config = HvaConfig(**data["config"])
    spec = IsingChainSpec(**data["spec"]) if data.get("spec") else None
    return config, int(data["L"]), params_from_dict(config, data["params"]), spec
