import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from boundary_vqe.free_fermion import (
    CONSTANT_SHIFT,
    EffectiveChainSpec,
    FermionMatrices,
    UnsupportedSectorError,
    build_AB,
    chain_gap,
    dense_ed,
    dense_ed_effective,
    dump_matrices,
    ground_energy,
    hamiltonian_matrix,
    sector_gap,
    sector_ground_energy,
    sector_spectrum,
    single_particle_spectrum,
)
from boundary_vqe.spin_model import IsingChainSpec

# dense-ED reference values, computed once and frozen
L4_GROUND = -3.6912093227248164
L4_GAP = 0.2571922564312046
EFF2_EPS = [0.0, 0.3673848, 0.80423432, 2.43684952]
EFF2_EGS = -1.8042343176907663


def test_ab_matrices_two_sites():
    m = build_AB(EffectiveChainSpec(2, 0.5, 0.3, 0.3))
    A = np.array([[0, -0.3, 0, 0], [-0.3, -1, -1, 0], [0, -1, -1, -0.3], [0, 0, -0.3, 0]])
    np.testing.assert_allclose(m.A, A)
    B = np.array([[0, -0.3, 0, 0], [0.3, 0, -1, 0], [0, 1, 0, -0.3], [0, 0, 0.3, 0]])
    np.testing.assert_allclose(m.B, B)


@given(L=st.integers(2, 30), g=st.floats(0, 2), hl=st.floats(0, 2), hr=st.floats(0, 2))
def test_ab_symmetry(L, g, hl, hr):
    m = build_AB(EffectiveChainSpec(L, g, hl, hr))
    assert m.A.shape == (L + 2, L + 2)
    np.testing.assert_array_equal(m.A, m.A.T)
    np.testing.assert_array_equal(m.B, -m.B.T)


def test_effective_spectrum_two_sites():
    s = single_particle_spectrum(build_AB(EffectiveChainSpec(2, 0.5, 0.3, 0.3)))
    np.testing.assert_allclose(s.epsilons, EFF2_EPS, atol=1e-7)
    assert s.E_gs == pytest.approx(EFF2_EGS, abs=1e-12)
    assert np.all(np.diff(s.epsilons) >= 0)


@pytest.mark.parametrize("L,g,hl,hr", [(2, 0.5, 0.3, 0.3), (3, 0.7, 0.2, 1.1), (4, 0.3, 1.4, 0.05)])
def test_subset_sums_reproduce_dense_effective_spectrum(L, g, hl, hr):
    spec = EffectiveChainSpec(L, g, hl, hr)
    s = single_particle_spectrum(build_AB(spec))
    levels = sorted(
        s.E_gs + CONSTANT_SHIFT + sum(e for e, n in zip(s.epsilons, occ) if n)
        for occ in itertools.product((0, 1), repeat=spec.size)
    )
    dense = dense_ed_effective(spec).eigenvalues
    np.testing.assert_allclose(levels, dense, atol=1e-10)


def test_zero_mode_is_exact():
    s = single_particle_spectrum(build_AB(EffectiveChainSpec(50, 0.5, 0.4, 0.9)))
    assert s.epsilons[0] == 0.0


def test_left_field_zero_decouples_auxiliary_site():
    with_field = single_particle_spectrum(build_AB(EffectiveChainSpec(6, 0.5, 0.0, 0.6)))
    m = build_AB(EffectiveChainSpec(6, 0.5, 0.0, 0.6))
    assert not m.A[0].any() and not m.B[0].any()
    # site 0 contributes one extra exact zero mode
    assert with_field.epsilons[1] == pytest.approx(0.0, abs=1e-14)


def test_classical_limit_matches_enumeration():
    """With no transverse field every Z configuration is an eigenstate."""
    L, hl, hr = 5, 0.4, -0.9
    best = min(
        -sum(z[i] * z[i + 1] for i in range(L - 1)) + hl * z[0] + hr * z[-1]
        for z in itertools.product((1, -1), repeat=L)
    )
    assert sector_ground_energy(IsingChainSpec(L, 1.0, 0.0, hl, hr)) == pytest.approx(best, abs=1e-12)


def test_frozen_l4_values():
    spec = IsingChainSpec(4, 1.0, 0.5, 0.71, -0.71)
    assert sector_ground_energy(spec) == pytest.approx(L4_GROUND, abs=1e-9)
    assert sector_gap(spec) == pytest.approx(L4_GAP, abs=1e-9)
    assert sector_gap(spec, method="dense") == pytest.approx(L4_GAP, abs=1e-9)
    assert dense_ed(spec).eigenvalues[0] == pytest.approx(L4_GROUND, abs=1e-12)


@given(
    L=st.integers(2, 9),
    h_x=st.floats(0.05, 0.95),
    h=st.floats(0.01, 1.5),
    sign=st.sampled_from([1, -1]),
    ratio=st.floats(0.05, 2.0),
)
def test_sector_energy_and_gap_match_dense(L, h_x, h, sign, ratio):
    spec = IsingChainSpec(L, 1.0, h_x, sign * h, -sign * h * ratio)
    levels = dense_ed(spec).eigenvalues
    assert sector_ground_energy(spec) == pytest.approx(levels[0], abs=1e-9)
    assert sector_gap(spec) == pytest.approx(levels[1] - levels[0], abs=1e-9)


@given(L=st.integers(2, 8), h_x=st.floats(0.05, 0.95), hl=st.floats(0, 1.5), hr=st.floats(0, 1.5))
def test_parallel_fields_use_even_sector(L, h_x, hl, hr):
    spec = IsingChainSpec(L, 1.0, h_x, hl, hr)
    levels = dense_ed(spec).eigenvalues
    assert ground_energy(spec) == pytest.approx(levels[0], abs=1e-9)
    assert chain_gap(spec) == pytest.approx(levels[1] - levels[0], abs=1e-9)


def test_parallel_fields_rejected_by_sector_functions():
    spec = IsingChainSpec(4, 1.0, 0.5, 0.5, 0.5)
    for fn in (sector_spectrum, sector_ground_energy, sector_gap):
        with pytest.raises(UnsupportedSectorError):
            fn(spec)
    with pytest.raises(UnsupportedSectorError):
        sector_gap(IsingChainSpec(4, 1.0, 0.5, 0.0, 0.5))
    with pytest.raises(ValueError):
        sector_gap(IsingChainSpec(4, 1.0, 0.5, 0.5, -0.5), method="lanczos")


def test_field_sign_symmetry():
    a = sector_ground_energy(IsingChainSpec(7, 1.0, 0.4, 0.6, -0.3))
    b = sector_ground_energy(IsingChainSpec(7, 1.0, 0.4, -0.6, 0.3))
    assert a == b


def test_hamiltonian_matrix_is_hermitian_and_sized():
    H = hamiltonian_matrix(IsingChainSpec(6, 1.0, 0.5, 0.4, -0.4))
    assert H.shape == (64, 64)
    assert abs(H - H.T).max() == 0


def test_dense_ed_partial_levels_above_full_threshold():
    spec = IsingChainSpec(13, 1.0, 0.5, 0.7, -0.7)
    levels = dense_ed(spec, levels=2).eigenvalues
    assert levels[0] == pytest.approx(sector_ground_energy(spec), abs=1e-9)
    assert levels[1] - levels[0] == pytest.approx(sector_gap(spec), abs=1e-8)


def test_large_chain_is_fast_and_finite():
    spec = IsingChainSpec(500, 1.0, 0.5, 0.7, -0.7)
    s = sector_spectrum(spec)
    assert s.epsilons.size == 502 and np.all(np.isfinite(s.epsilons))
    # bulk energy per site approaches the infinite-chain value
    assert s.sector_ground_energy / 500 == pytest.approx(-1.0635, abs=5e-3)


def test_non_bidiagonal_input_uses_dense_path():
    m = build_AB(EffectiveChainSpec(4, 0.5, 0.3, 0.6))
    A = m.A.copy()
    A[1, 3] = A[3, 1] = 0.2
    s = single_particle_spectrum(FermionMatrices(A, m.B))
    ref = np.sqrt(np.clip(np.linalg.eigvalsh((A + m.B) @ (A - m.B)), 0, None))
    np.testing.assert_allclose(s.epsilons, ref, atol=1e-7)


def test_dump_matrices_lists_both_blocks():
    text = dump_matrices(build_AB(EffectiveChainSpec(2, 0.5, 0.3, 0.3)))
    assert "A" in text and "B" in text
