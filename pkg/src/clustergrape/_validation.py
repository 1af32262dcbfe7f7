"""Input validation helpers shared by the estimators and free functions."""

import numpy as np

HERMITIAN_ATOL = 1e-12
NORM_ATOL = 1e-12


def check_operator(op, name="operator"):
    """Return ``op`` as a square complex array."""
    arr = np.asarray(op, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def check_hermitian(op, name="hamiltonian", atol=HERMITIAN_ATOL):
    arr = check_operator(op, name)
    scale = max(1.0, float(np.max(np.abs(arr))))
    if np.max(np.abs(arr - arr.conj().T)) > atol * scale:
        raise ValueError(f"{name} is not Hermitian")
    return arr


def check_state(psi, dim=None, name="state", atol=1e-10):
    """Return ``psi`` as a 1-d complex array of unit norm."""
    arr = np.asarray(psi, dtype=complex)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    norm = np.linalg.norm(arr)
    if abs(norm - 1.0) > atol:
        raise ValueError(f"{name} is not normalised (norm {norm:.3e})")
    return arr


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value
