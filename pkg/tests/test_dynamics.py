import numpy as np
import pytest
from scipy import sparse
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

from hocov import (
    EvolutionConfig,
    InteractionSpec,
    ModeLayout,
    build_classical_pump_hamiltonian,
    build_hamiltonian,
    coherent_state,
    embed,
    evolve,
    expectation,
    number_operator,
    product_state,
    thermal_state,
    vacuum_state,
)


def trilinear_setup(dims=(6, 5, 9), k=1, l=2, kappa=1.0):
    lay = ModeLayout(dims)
    spec = InteractionSpec(lay, k=k, l=l, kappa=kappa)
    return lay, build_hamiltonian(spec)


def test_hamiltonian_is_hermitian_and_traceless():
    lay, h = trilinear_setup()
    dense = h.data.toarray()
    assert np.abs(dense - dense.conj().T).max() < 1e-14
    assert abs(np.trace(dense)) < 1e-14
    assert h.hermitian


def test_builder_validation():
    lay3 = ModeLayout((4, 4, 4))
    with pytest.raises(ValueError):
        build_hamiltonian(InteractionSpec(lay3, k=1, l=1))
    with pytest.raises(ValueError):
        build_hamiltonian(InteractionSpec(ModeLayout((4, 4)), k=1, l=2))
    with pytest.raises(ValueError):
        build_hamiltonian(InteractionSpec(ModeLayout((4, 3, 8)), k=3, l=2))
    with pytest.raises(ValueError):
        InteractionSpec(lay3, k=0, l=2)
    with pytest.raises(ValueError):
        InteractionSpec(lay3, k=1, l=2, kappa=-1.0)
    with pytest.raises(ValueError):
        build_classical_pump_hamiltonian(InteractionSpec(ModeLayout((4, 4)), k=1, l=2), 2.0)
    with pytest.raises(ValueError):
        build_classical_pump_hamiltonian(InteractionSpec(lay3, k=1, l=1), 2.0)


def test_conserved_charges_commute_exactly():
    # each conversion event moves one pump photon into k photons of A and l of B,
    # so l*N_A - k*N_B and k*N_P + N_A commute with H
    for k, l in ((1, 2), (2, 1), (1, 3), (2, 2)):
        lay = ModeLayout((5, 7, 8))
        h = build_hamiltonian(InteractionSpec(lay, k=k, l=l)).data
        n_p = embed(number_operator(5), 0, lay).data
        n_a = embed(number_operator(7), 1, lay).data
        n_b = embed(number_operator(8), 2, lay).data
        charge1 = l * n_a - k * n_b
        charge2 = k * n_p + n_a
        for q in (charge1, charge2):
            comm = (h @ q - q @ h).toarray()
            assert np.abs(comm).max() < 1e-12, (k, l)


def test_classical_pump_reproduces_two_mode_squeezing():
    dim = 24
    lay = ModeLayout((dim, dim))
    spec = InteractionSpec(lay, k=1, l=1, kappa=1.0)
    alpha_p = 2.0
    h = build_classical_pump_hamiltonian(spec, alpha_p)
    r = 0.5
    cfg = EvolutionConfig(xi_grid=(0.0, r), kappa=1.0, alpha_p=alpha_p)
    final = evolve(vacuum_state(lay), h, cfg)[-1]
    n_a = embed(number_operator(dim), 0, lay)
    assert expectation(n_a, final).real == pytest.approx(np.sinh(r) ** 2, abs=1e-8)
    # Schmidt amplitudes tanh(r)^n / cosh(r) on the twin-photon diagonal
    grid = final.vector.reshape(dim, dim)
    for n in range(8):
        target = np.tanh(r) ** n / np.cosh(r)
        assert grid[n, n].real == pytest.approx(target, abs=1e-9)
        assert abs(grid[n, n].imag) < 1e-9
    off = grid - np.diag(np.diag(grid))
    assert np.abs(off).max() < 1e-9


def test_lanczos_against_dense_expm():
    lay, h = trilinear_setup(dims=(3, 3, 5))
    pump = coherent_state(0.6, 3, allow_truncation=True)
    ground_a = np.eye(3, dtype=complex)[:, 0]
    ground_b = np.eye(5, dtype=complex)[:, 0]
    psi0 = product_state(lay, pump, ground_a, ground_b)
    cfg = EvolutionConfig(xi_grid=(0.0, 0.2, 0.4), kappa=1.0, alpha_p=1.5)
    states = evolve(psi0, h, cfg)
    dense = h.data.toarray()
    for state, t in zip(states, cfg.times()):
        direct = expm(-1j * t * dense) @ psi0.vector
        assert np.abs(state.vector - direct).max() < 1e-9


def test_lanczos_against_expm_multiply():
    lay, h = trilinear_setup(dims=(8, 6, 11), k=1, l=2)
    pump = coherent_state(1.2, 8)
    ground_a = np.eye(6, dtype=complex)[:, 0]
    ground_b = np.eye(11, dtype=complex)[:, 0]
    psi0 = product_state(lay, pump, ground_a, ground_b)
    xi = 0.5
    cfg = EvolutionConfig(xi_grid=(0.0, xi), kappa=1.0, alpha_p=1.2)
    final = evolve(psi0, h, cfg)[-1]
    t = xi / 1.2
    direct = expm_multiply(-1j * t * h.data.tocsc(), psi0.vector)
    assert np.abs(final.vector - direct).max() < 1e-8


def test_photon_number_ratio_follows_process_orders():
    for k, l, dims in ((1, 2, (6, 8, 15)), (2, 1, (6, 11, 6))):
        lay = ModeLayout(dims)
        h = build_hamiltonian(InteractionSpec(lay, k=k, l=l))
        pump = coherent_state(1.0, dims[0])
        psi0 = product_state(
            lay, pump, np.eye(dims[1], dtype=complex)[:, 0], np.eye(dims[2], dtype=complex)[:, 0]
        )
        cfg = EvolutionConfig(xi_grid=(0.0, 0.15, 0.3), kappa=1.0, alpha_p=1.0)
        final = evolve(psi0, h, cfg)[-1]
        na = expectation(embed(number_operator(dims[1]), 1, lay), final).real
        nb = expectation(embed(number_operator(dims[2]), 2, lay), final).real
        assert na > 1e-4
        assert nb * k == pytest.approx(na * l, rel=1e-8)


def test_energy_and_norm_conservation():
    lay, h = trilinear_setup(dims=(8, 6, 11))
    pump = coherent_state(1.3, 8)
    psi0 = product_state(
        lay, pump, np.eye(6, dtype=complex)[:, 0], np.eye(11, dtype=complex)[:, 0]
    )
    grid = tuple(np.round(np.arange(0.0, 0.61, 0.1), 10))
    cfg = EvolutionConfig(xi_grid=grid, kappa=1.0, alpha_p=1.3)
    for state in evolve(psi0, h, cfg):
        assert state.norm() == pytest.approx(1.0, abs=1e-9)
        assert abs(expectation(h, state)) < 1e-8


def test_time_reversal_recovers_initial_state():
    lay, h = trilinear_setup(dims=(6, 5, 9))
    pump = coherent_state(1.0, 6)
    psi0 = product_state(
        lay, pump, np.eye(5, dtype=complex)[:, 0], np.eye(9, dtype=complex)[:, 0]
    )
    cfg = EvolutionConfig(xi_grid=(0.0, 0.35), kappa=1.0, alpha_p=1.0)
    forward = evolve(psi0, h, cfg)[-1]
    h_rev = type(h)(h.layout, (-h.data).tocsr(), hermitian=True)
    fwd_state = type(psi0)(lay, vector=forward.vector)
    back = evolve(fwd_state, h_rev, cfg)[-1]
    assert np.abs(back.vector - psi0.vector).max() < 1e-8


def test_mixed_state_evolution_matches_branch_mixture():
    lay, h = trilinear_setup(dims=(4, 4, 7))
    ground_a = np.eye(4, dtype=complex)[:, 0]
    ground_b = np.eye(7, dtype=complex)[:, 0]
    rho_p = thermal_state(0.3, 4)
    mixed0 = product_state(lay, rho_p, ground_a, ground_b)
    cfg = EvolutionConfig(xi_grid=(0.0, 0.25), kappa=1.0, alpha_p=1.0)
    rho_final = evolve(mixed0, h, cfg)[-1]
    assert not rho_final.is_pure

    manual = np.zeros((lay.total_dim, lay.total_dim), dtype=complex)
    weights = np.diag(rho_p).real
    for n, w in enumerate(weights):
        if w < 1e-14:
            continue
        pump_vec = np.zeros(4, dtype=complex)
        pump_vec[n] = 1.0
        branch0 = product_state(lay, pump_vec, ground_a, ground_b)
        branch = evolve(branch0, h, cfg)[-1]
        manual += w * np.outer(branch.vector, branch.vector.conj())
    assert np.abs(rho_final.matrix - manual).max() < 1e-9


def test_truncation_guard_note_attached():
    # deliberately starve mode A so the wavefunction piles up at the cutoff
    lay = ModeLayout((8, 3, 5))
    h = build_hamiltonian(InteractionSpec(lay, k=1, l=2))
    pump = coherent_state(1.4, 8)
    psi0 = product_state(
        lay, pump, np.eye(3, dtype=complex)[:, 0], np.eye(5, dtype=complex)[:, 0]
    )
    cfg = EvolutionConfig(xi_grid=(0.0, 1.2), kappa=1.0, alpha_p=1.4)
    final = evolve(psi0, h, cfg)[-1]
    assert any("truncation guard" in note for note in final.notes)


def test_evolution_config_validation():
    with pytest.raises(ValueError):
        EvolutionConfig(xi_grid=(0.1, 0.2), kappa=1.0, alpha_p=1.0)
    with pytest.raises(ValueError):
        EvolutionConfig(xi_grid=(0.0, 0.2, 0.2), kappa=1.0, alpha_p=1.0)
    with pytest.raises(ValueError):
        EvolutionConfig(xi_grid=(0.0, 0.2), kappa=-1.0, alpha_p=1.0)
    with pytest.raises(ValueError):
        EvolutionConfig(xi_grid=(0.0, 0.2), kappa=1.0, alpha_p=1.0, tol=0.0)


def test_layout_mismatch_raises():
    lay, h = trilinear_setup(dims=(4, 4, 7))
    other = vacuum_state(ModeLayout((4, 4, 8)))
    cfg = EvolutionConfig(xi_grid=(0.0, 0.1), kappa=1.0, alpha_p=1.0)
    with pytest.raises(ValueError):
        evolve(other, h, cfg)
