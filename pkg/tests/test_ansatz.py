import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from boundary_vqe.ansatz import (
    HvaConfig,
    build_circuit,
    dump_params,
    expected_gate_count,
    load_params,
    params_from_dict,
    params_to_dict,
    random_params,
    run_ansatz,
)
from boundary_vqe.spin_model import IsingChainSpec, build_hamiltonian
from boundary_vqe.statevector import StateVector, expectation


def test_parameter_counts_and_names():
    tied, untied = HvaConfig(6, "tied"), HvaConfig(6, "untied")
    assert tied.num_params == 18 and untied.num_params == 24
    assert tied.parameter_names()[:4] == ("layer1.zz", "layer1.x", "layer1.z", "layer2.zz")
    assert untied.parameter_names()[:5] == (
        "layer1.zz", "layer1.x", "layer1.z", "layer1.zr", "layer2.zz")
    assert HvaConfig(28).num_params == 84


def test_invalid_config():
    with pytest.raises(ValueError):
        HvaConfig(0)
    with pytest.raises(ValueError):
        HvaConfig(2, "mirrored")


@pytest.mark.parametrize("L,p", [(2, 1), (4, 6), (5, 3), (8, 16)])
def test_gate_count(L, p):
    circuit = build_circuit(HvaConfig(p), L, np.zeros(3 * p))
    assert len(circuit.gates) == L + p * (2 * L + 1) == expected_gate_count(HvaConfig(p), L)


def test_layer_structure_l4():
    gates = build_circuit(HvaConfig(1), 4, [0.1, 0.2, 0.3]).gates
    assert [g.kind for g in gates[:4]] == ["H"] * 4
    layer = gates[4:]
    assert [(g.kind, g.targets) for g in layer] == [
        ("RX", (1,)), ("RX", (2,)), ("RX", (3,)), ("RX", (4,)),
        ("RZZ", (1, 2)), ("RZZ", (3, 4)), ("RZZ", (2, 3)),
        ("RZ", (1,)), ("RZ", (4,)),
    ]
    assert layer[-1].angle == -layer[-2].angle == -0.3


def test_wrong_parameter_length():
    with pytest.raises(ValueError):
        build_circuit(HvaConfig(2), 4, np.zeros(5))


def test_each_parameter_drives_its_gates():
    config = HvaConfig(3, "untied")
    circuit = build_circuit(config, 5, np.arange(12, dtype=float))
    slots = circuit.parameter_slots()
    assert set(slots) == set(config.parameter_names())
    assert len(slots["layer2.x"]) == 5
    assert len(slots["layer2.zz"]) == 4
    assert len(slots["layer1.z"]) == 1 and len(slots["layer1.zr"]) == 1
    for name, positions in slots.items():
        for k, sign in positions:
            assert circuit.gates[k].param == name and sign == 1


def test_tied_slot_has_two_gates_with_opposite_sign():
    circuit = build_circuit(HvaConfig(1), 4, [0.0, 0.0, 0.7])
    slots = circuit.parameter_slots()["layer1.z"]
    assert sorted(sign for _, sign in slots) == [-1, 1]
    assert sorted(circuit.gates[k].angle for k, _ in slots) == [-0.7, 0.7]


def test_zero_parameters_give_uniform_superposition():
    for mode, n in (("tied", 9), ("untied", 12)):
        psi = run_ansatz(HvaConfig(3, mode), 4, np.zeros(n))
        np.testing.assert_allclose(psi.amplitudes, StateVector.uniform(4).amplitudes, atol=1e-14)


@given(seed=st.integers(0, 2**32 - 1), L=st.integers(2, 6), p=st.integers(1, 4))
def test_tied_mirror_symmetry(seed, L, p):
    """Flipping every z angle maps the energy at (h_l, -h_l) to the one at (-h_l, h_l)."""
    rng = np.random.default_rng(seed)
    config = HvaConfig(p)
    theta = random_params(config, rng)
    flipped = theta.copy()
    flipped[2::3] *= -1
    h = rng.uniform(0.05, 1.5)
    a = build_hamiltonian(IsingChainSpec(L, 1.0, 0.5, h, -h))
    b = build_hamiltonian(IsingChainSpec(L, 1.0, 0.5, -h, h))
    assert expectation(run_ansatz(config, L, theta), a) == pytest.approx(
        expectation(run_ansatz(config, L, flipped), b), abs=1e-12)


def test_untied_contains_tied():
    rng = np.random.default_rng(1)
    theta = random_params(HvaConfig(2), rng)
    untied = np.concatenate([[*theta[i:i + 3], -theta[i + 2]] for i in (0, 3)])
    np.testing.assert_allclose(run_ansatz(HvaConfig(2), 5, theta).amplitudes,
                               run_ansatz(HvaConfig(2, "untied"), 5, untied).amplitudes,
                               atol=1e-14)


def test_random_params_in_range():
    theta = random_params(HvaConfig(10), np.random.default_rng(0))
    assert theta.shape == (30,)
    assert np.all(np.abs(theta) <= 0.3 * np.pi)


def test_params_round_trip():
    config = HvaConfig(2, "untied")
    theta = np.linspace(-1, 1, 8)
    named = params_to_dict(config, theta)
    np.testing.assert_array_equal(params_from_dict(config, named), theta)
    del named["layer2.zr"]
    with pytest.raises(KeyError):
        params_from_dict(config, named)
    spec = IsingChainSpec(4, 1.0, 0.5, 0.6, -0.6)
    text = dump_params(config, 4, theta, spec)
    assert json.loads(text)["params"]["layer1.zr"] == theta[3]
    config2, L, theta2, spec2 = load_params(text)
    assert (config2, L, spec2) == (config, 4, spec)
    np.testing.assert_array_equal(theta2, theta)


def test_render_is_deterministic():
    circuit = build_circuit(HvaConfig(1), 3, [0.25, -0.5, 1.0])
    text = circuit.render()
    assert text == build_circuit(HvaConfig(1), 3, [0.25, -0.5, 1.0]).render()
    assert "RZZ" in text and "layer1.zz" in text
