"""Dense state-vector machinery on the full ``2**n`` dimensional register.

Conventions: hbar = 1, qubit 0 is the most significant bit of the
computational-basis index, and every Hamiltonian carries the coupling ``J``
explicitly so that time is measured in units of ``1/J``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from ._validation import check_hermitian, check_positive, check_state

__all__ = [
    "PAULI",
    "PhysicalProblem",
    "pauli_on",
    "drift_hamiltonian",
    "local_controls",
    "global_control",
    "initial_state",
    "cluster_state",
    "evolve",
    "expm_hermitian",
    "fidelity",
    "bloch_vector",
    "cluster_problem",
]

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True, eq=False)
class PhysicalProblem:
    """State transfer ``initial -> target`` under ``drift + sum_j u_j controls[j]``."""

    drift: np.ndarray
    controls: tuple
    initial: np.ndarray
    target: np.ndarray
    J: float = 1.0
    label: str = field(default="")

    def __post_init__(self):
        drift = check_hermitian(self.drift, "drift")
        dim = drift.shape[0]
        controls = tuple(check_hermitian(c, f"controls[{j}]") for j, c in enumerate(self.controls))
        if not controls:
            raise ValueError("at least one control Hamiltonian is required")
        for j, c in enumerate(controls):
            if c.shape != drift.shape:
                raise ValueError(f"controls[{j}] has shape {c.shape}, drift has {drift.shape}")
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "controls", controls)
        object.__setattr__(self, "initial", check_state(self.initial, dim, "initial"))
        object.__setattr__(self, "target", check_state(self.target, dim, "target"))
        object.__setattr__(self, "J", check_positive(self.J, "J"))

    @property
    def dim(self):
        return self.drift.shape[0]

    @property
    def n_controls(self):
        return len(self.controls)


def pauli_on(n, qubit, axis):
    """``1 x ... x sigma_axis x ... x 1`` with the Pauli matrix on ``qubit``."""
    if not 0 <= qubit < n:
        raise ValueError(f"qubit {qubit} out of range for {n} qubits")
    factors = [np.eye(2, dtype=complex)] * n
    factors[qubit] = PAULI[axis]
    return reduce(np.kron, factors)


def _z_signs(n):
    # row q holds the sigma_z eigenvalue (+1/-1) of qubit q on every basis state
    idx = np.arange(2**n)
    bits = (idx[None, :] >> (n - 1 - np.arange(n))[:, None]) & 1
    return 1 - 2 * bits


def _drift_diagonal(graph, J, include_local):
    z = _z_signs(graph.n_qubits)
    diag = np.zeros(2**graph.n_qubits)
    for a, b in graph.edges:
        if include_local:
            diag += (1 + z[a]) * (1 - z[b])
        else:
            diag += z[a] * z[b]
    return np.pi * J / 2 * diag


def drift_hamiltonian(graph, J=1.0, include_local=False):
    """Ising drift of ``graph``.

    With ``include_local=False`` (the default used to define targets) this is
    ``(pi J / 2) sum_edges Z_a Z_b``; otherwise the local terms of
    ``(pi J / 2) sum_edges (1 + Z_a)(1 - Z_b)`` are kept as well.
    """
    J = check_positive(J, "J")
    return np.diag(_drift_diagonal(graph, J, include_local)).astype(complex)


def local_controls(n):
    """``[X_0/2, Y_0/2, X_1/2, Y_1/2, ...]``: independent x and y drives per qubit."""
    if n < 1:
        raise ValueError("need at least one qubit")
    out = []
    for q in range(n):
        out.append(pauli_on(n, q, "x") / 2)
        out.append(pauli_on(n, q, "y") / 2)
    return out


def global_control(n):
    """Collective x drive ``F_x = (1/2) sum_q X_q``."""
    if n < 1:
        raise ValueError("need at least one qubit")
    return sum(pauli_on(n, q, "x") for q in range(n)) / 2


def initial_state(n):
    """Uniform superposition ``|+>^n``."""
    return np.full(2**n, 2.0 ** (-n / 2), dtype=complex)


def cluster_state(graph, J=1.0):
    """Cluster state of ``graph``: ``|+>^n`` evolved under the ZZ drift for ``1/(2J)``.

    The drift is diagonal, so the evolution is a per-basis-state phase.
    """
    J = check_positive(J, "J")
    phases = np.exp(-1j * _drift_diagonal(graph, J, False) / (2 * J))
    return initial_state(graph.n_qubits) * phases


def expm_hermitian(H, t):
    """``exp(-i t H)`` for Hermitian ``H`` via its eigendecomposition."""
    w, V = np.linalg.eigh(H)
    return (V * np.exp(-1j * t * w)) @ V.conj().T


def evolve(state, H, t):
    """Apply ``exp(-i t H)`` to ``state``."""
    H = check_hermitian(H)
    if t < 0:
        raise ValueError(f"evolution time must be non-negative, got {t}")
    psi = check_state(state, H.shape[0])
    out = expm_hermitian(H, t) @ psi
    return out / np.linalg.norm(out)


def fidelity(a, b):
    """``|<a|b>|``."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(min(1.0, abs(np.vdot(a, b))))


def bloch_vector(state):
    """Expectation values ``(<X>, <Y>, <Z>)`` of a two-level state."""
    psi = np.asarray(state, dtype=complex)
    if psi.shape != (2,):
        raise ValueError(f"Bloch vector needs a 2-dim state, got shape {psi.shape}")
    return np.array([np.vdot(psi, PAULI[k] @ psi).real for k in "xyz"])


def cluster_problem(graph, control="global", J=1.0):
    """Full-space transfer ``|+>^n -> cluster_state(graph)``.

    ``control`` selects ``"global"`` (a single F_x drive) or ``"local"``
    (x and y on every qubit).
    """
    n = graph.n_qubits
    if control == "global":
        controls = (global_control(n),)
    elif control == "local":
        controls = tuple(local_controls(n))
    else:
        raise ValueError(f"control must be 'global' or 'local', got {control!r}")
    return PhysicalProblem(
        drift=drift_hamiltonian(graph, J),
        controls=controls,
        initial=initial_state(n),
        target=cluster_state(graph, J),
        J=J,
        label=graph.label,
    )
