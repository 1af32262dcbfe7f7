import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clustergrape.graph import complete_graph, parse_graph, path_graph
from clustergrape.qcore import (
    PAULI,
    PhysicalProblem,
    bloch_vector,
    cluster_problem,
    cluster_state,
    drift_hamiltonian,
    evolve,
    fidelity,
    global_control,
    initial_state,
    local_controls,
    pauli_on,
)


def random_hermitian(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + a.conj().T) / 2


def random_state(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def test_pauli_on():
    assert np.allclose(pauli_on(1, 0, "z"), np.diag([1, -1]))
    assert np.allclose(pauli_on(2, 1, "x"), np.kron(np.eye(2), PAULI["x"]))
    zz = pauli_on(3, 0, "z") @ pauli_on(3, 1, "z")
    e000 = np.eye(8)[0]
    assert np.allclose(zz @ e000, e000)
    with pytest.raises(ValueError):
        pauli_on(2, 2, "x")


def test_drift_k3_zz():
    H = drift_hamiltonian(complete_graph(3))
    assert H[0, 0].real == pytest.approx(3 * np.pi / 2)
    zsum = sum(pauli_on(3, a, "z") @ pauli_on(3, b, "z") for a, b in [(0, 1), (1, 2), (0, 2)])
    assert np.allclose(H, np.pi / 2 * zsum, atol=1e-14)


def test_drift_with_local_terms():
    H = drift_hamiltonian(path_graph(2), include_local=True)
    # |01>: qubit 0 up (+1), qubit 1 down (-1) -> (1 + 1)(1 + 1) = 4
    assert H[1, 1].real == pytest.approx(2 * np.pi)
    assert H[0, 0].real == pytest.approx(0.0)


@pytest.mark.parametrize("name", ["K3", "C4", "G2x3", "L3"])
def test_drift_diagonal_real_and_commutes_with_z(name):
    g = parse_graph(name)
    H = drift_hamiltonian(g)
    assert np.allclose(H, np.diag(np.diag(H)))
    assert np.all(np.diag(H).imag == 0)
    for q in range(g.n_qubits):
        Z = pauli_on(g.n_qubits, q, "z")
        assert np.allclose(H @ Z - Z @ H, 0)


def test_local_controls():
    ctl = local_controls(1)
    assert np.allclose(ctl[0], PAULI["x"] / 2) and np.allclose(ctl[1], PAULI["y"] / 2)
    ctl3 = local_controls(3)
    assert len(ctl3) == 6
    for op in ctl3:
        assert np.allclose(np.linalg.eigvalsh(op), [-0.5] * 4 + [0.5] * 4)


def test_global_control():
    assert np.allclose(global_control(1), PAULI["x"] / 2)
    ev = np.linalg.eigvalsh(global_control(3))
    assert np.allclose(sorted(set(np.round(ev, 12))), [-1.5, -0.5, 0.5, 1.5])
    assert np.allclose(global_control(3), sum(local_controls(3)[0::2]))


def test_initial_state():
    assert np.allclose(initial_state(1), np.array([1, 1]) / np.sqrt(2))
    assert np.allclose(initial_state(3), np.full(8, 1 / (2 * np.sqrt(2))))
    assert fidelity(initial_state(3), initial_state(3)) == pytest.approx(1.0)


def test_cluster_state_k3():
    g = complete_graph(3)
    T3 = cluster_state(g)
    evolved = evolve(initial_state(3), drift_hamiltonian(g), 0.5)
    assert fidelity(T3, evolved) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(np.abs(T3), 1 / (2 * np.sqrt(2)))


def test_cluster_state_overlap_by_phase_sum():
    # independent oracle: accumulate exp(-i (pi/4) sum_edges z_a z_b) over bit strings
    edges = [(0, 1), (0, 2), (1, 2)]
    total = 0
    for bits in itertools.product([0, 1], repeat=3):
        z = [1 - 2 * b for b in bits]
        total += np.exp(-1j * np.pi / 4 * sum(z[a] * z[b] for a, b in edges)) / 8
    expected = abs(total)
    assert expected == pytest.approx(0.5)
    assert fidelity(cluster_state(complete_graph(3)), initial_state(3)) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("name", ["K3", "L3", "K4", "C4", "K5", "K6", "G2x3"])
def test_free_evolution_reaches_cluster_state(name):
    g = parse_graph(name)
    psi = evolve(initial_state(g.n_qubits), drift_hamiltonian(g), 0.5)
    assert fidelity(cluster_state(g), psi) == pytest.approx(1.0, abs=1e-12)


def test_evolve_identity_and_group_property(rng):
    H = random_hermitian(rng, 6)
    psi = random_state(rng, 6)
    assert np.allclose(evolve(psi, H, 0.0), psi)
    a = evolve(evolve(psi, H, 0.3), H, 0.45)
    b = evolve(psi, H, 0.75)
    assert np.max(np.abs(a - b)) < 1e-10


def test_evolve_rejects_non_hermitian(rng):
    with pytest.raises(ValueError):
        evolve(random_state(rng, 2), np.array([[0, 1], [0, 0]]), 1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 8), st.floats(0, 10))
def test_evolve_preserves_norm(seed, dim, t):
    rng = np.random.default_rng(seed)
    out = evolve(random_state(rng, dim), random_hermitian(rng, dim), t)
    assert abs(np.linalg.norm(out) - 1) < 1e-12


def test_fidelity_examples(rng):
    psi = random_state(rng, 4)
    assert fidelity(psi, psi) == pytest.approx(1.0)
    assert fidelity(psi, np.exp(0.7j) * psi) == pytest.approx(1.0)
    a = np.array([np.sqrt(3) / 2, 0.5])
    b = np.array([np.sqrt(3) / 2, -0.5])
    assert fidelity(a, b) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        fidelity(a, psi)


def test_bloch_vector():
    assert np.allclose(bloch_vector([np.sqrt(3) / 2, 0.5]), [np.sqrt(3) / 2, 0, 0.5])
    assert np.allclose(bloch_vector([np.sqrt(3) / 2, -0.5]), [-np.sqrt(3) / 2, 0, 0.5])
    assert np.allclose(bloch_vector([1, 0]), [0, 0, 1])
    with pytest.raises(ValueError):
        bloch_vector(np.ones(4) / 2)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bloch_vector_unit_norm(seed):
    psi = random_state(np.random.default_rng(seed), 2)
    assert abs(np.linalg.norm(bloch_vector(psi)) - 1) < 1e-12


def test_problem_validation():
    p = cluster_problem(complete_graph(3), "local")
    assert p.n_controls == 6 and p.dim == 8
    with pytest.raises(ValueError):
        PhysicalProblem(np.eye(2), (), np.array([1, 0]), np.array([0, 1]))
    with pytest.raises(ValueError):
        PhysicalProblem(np.eye(2), (np.eye(3),), np.array([1, 0]), np.array([0, 1]))
    with pytest.raises(ValueError):
        PhysicalProblem(np.eye(2), (np.eye(2),), np.array([1, 1]), np.array([0, 1]))
    with pytest.raises(ValueError):
        cluster_problem(complete_graph(3), "both")
