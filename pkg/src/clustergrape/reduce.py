"""Exact reduction of a transfer problem to its minimal invariant subspace.

The dynamics generated by ``drift + sum_j u_j(t) controls[j]`` starting from
``initial`` never leave the smallest subspace that contains ``initial`` and is
closed under the drift and every control. :func:`invariant_subspace` builds an
orthonormal basis of that subspace by repeated application and re-orthogonalised
Gram-Schmidt; :func:`reduce_problem` compresses the problem through it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_hermitian, check_state
from .exceptions import ReductionError

__all__ = [
    "ReducedProblem",
    "SubspaceReducer",
    "cyclic_shift_operator",
    "persymmetry_operator",
    "symmetry_sector",
    "invariant_subspace",
    "canonical_basis",
    "reduce_problem",
    "drift_control_overlap",
    "check_reduction",
]

DEFAULT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ReducedProblem:
    """Transfer problem expressed in a ``d``-dimensional invariant subspace.

    ``basis`` is the ``(2**n, d)`` isometry ``V``; ``drift = V^H H_d V`` and
    likewise for every control. ``target`` may differ from ``V^H target_full``
    by a global phase (fixed so its largest entry is real positive).
    """

    drift: np.ndarray
    controls: tuple
    initial: np.ndarray
    target: np.ndarray
    basis: np.ndarray
    J: float = 1.0
    label: str = field(default="")

    def __post_init__(self):
        drift = check_hermitian(self.drift, "drift")
        controls = tuple(check_hermitian(c, f"controls[{j}]") for j, c in enumerate(self.controls))
        if not controls:
            raise ValueError("at least one control Hamiltonian is required")
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "controls", controls)
        object.__setattr__(self, "initial", check_state(self.initial, drift.shape[0], "initial"))
        object.__setattr__(self, "target", check_state(self.target, drift.shape[0], "target"))

    @property
    def d(self):
        return self.drift.shape[0]

    dim = d

    @property
    def n_controls(self):
        return len(self.controls)


def cyclic_shift_operator(n):
    """Permutation ``|b_1 b_2 ... b_n> -> |b_n b_1 ... b_{n-1}>``."""
    if n < 2:
        raise ValueError(f"cyclic shift needs n >= 2, got {n}")
    dim = 2**n
    idx = np.arange(dim)
    rotated = (idx >> 1) | ((idx & 1) << (n - 1))
    S = np.zeros((dim, dim), dtype=complex)
    S[rotated, idx] = 1.0
    return S


def persymmetry_operator(n):
    """Global bit flip ``X^{(x)n}``: ones on the anti-diagonal."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    return np.fliplr(np.eye(2**n)).astype(complex)


def symmetry_sector(n):
    """Orthonormal basis of the joint ``S = 1, P = 1`` eigenspace.

    This is the symmetry-adapted sector for the cyclic shift ``S`` and the
    persymmetry ``P``. It contains every state that is invariant under both,
    and is generally larger than the minimal invariant subspace.
    """
    dim = 2**n
    S = cyclic_shift_operator(n).real
    P = persymmetry_operator(n).real
    avg_s = sum(np.linalg.matrix_power(S, k) for k in range(n)) / n
    proj = avg_s @ (np.eye(dim) + P) / 2
    proj = (proj + proj.T) / 2
    w, v = np.linalg.eigh(proj)
    return v[:, w > 0.5].astype(complex)


def _orthogonalize(w, basis):
    for _ in range(2):
        for b in basis:
            w = w - np.vdot(b, w) * b
    return w


def invariant_subspace(problem, tol=DEFAULT_TOL, order=None, max_dim=None):
    """Smallest subspace containing ``problem.initial`` closed under all generators.

    Parameters
    ----------
    problem : PhysicalProblem
    tol : float
        New directions whose norm (relative to the image vector) falls below
        ``tol`` are discarded.
    order : sequence of int, optional
        Order in which the generators ``[drift, *controls]`` are applied.
        The dimension does not depend on it.

    Returns
    -------
    ndarray, shape (dim, d)
        Orthonormal columns.
    """
    if not 0 < tol <= 1e-6:
        raise ValueError(f"tol must lie in (0, 1e-6], got {tol}")
    generators = [problem.drift, *problem.controls]
    if order is not None:
        generators = [generators[i] for i in order]
    dim = problem.drift.shape[0]
    max_dim = dim if max_dim is None else max_dim

    v0 = np.asarray(problem.initial, dtype=complex)
    basis = [v0 / np.linalg.norm(v0)]
    head = 0
    sweeps = 0
    while head < len(basis):
        sweeps += 1
        if sweeps > dim + 1:
            raise RuntimeError("invariant subspace construction did not terminate")
        for H in generators:
            image = H @ basis[head]
            scale = max(1.0, np.linalg.norm(image))
            w = _orthogonalize(image, basis)
            norm = np.linalg.norm(w)
            if norm > tol * scale:
                basis.append(w / norm)
                if len(basis) > max_dim:
                    raise RuntimeError("invariant subspace exceeds the ambient dimension")
        head += 1
    return np.column_stack(basis)


def _phase_fix(v, ref=None):
    """Rotate the global phase of ``v`` so ``<ref|v>`` (or its largest entry) is real positive."""
    if ref is not None:
        ov = np.vdot(ref, v)
        if abs(ov) > 1e-12:
            return v * (np.conj(ov) / abs(ov))
    k = int(np.argmax(np.abs(v) > np.max(np.abs(v)) * (1 - 1e-9)))
    return v * (np.conj(v[k]) / abs(v[k]))


def canonical_basis(V, drift, controls, initial, degeneracy_tol=1e-9):
    """Re-express the span of ``V`` in a reproducible orthonormal basis.

    The basis diagonalises the compressed drift (degenerate blocks are split
    by the first control), each vector has a real non-negative overlap with
    ``initial`` (or a real positive largest entry when orthogonal to it), and
    vectors are ordered by descending overlap with ``initial``, ties broken by
    ascending drift eigenvalue.
    """
    hd = V.conj().T @ drift @ V
    hd = (hd + hd.conj().T) / 2
    evals, W = np.linalg.eigh(hd)
    scale = max(1.0, float(np.max(np.abs(evals))))
    hc = V.conj().T @ controls[0] @ V
    start = 0
    while start < len(evals):
        stop = start + 1
        while stop < len(evals) and evals[stop] - evals[start] < degeneracy_tol * scale:
            stop += 1
        if stop - start > 1:
            block = W[:, start:stop]
            sub = block.conj().T @ hc @ block
            _, R = np.linalg.eigh((sub + sub.conj().T) / 2)
            W[:, start:stop] = block @ R
        start = stop

    B = V @ W
    for k in range(B.shape[1]):
        B[:, k] = _phase_fix(B[:, k], initial)
    overlaps = np.abs(B.conj().T @ initial)
    keys = sorted(
        range(B.shape[1]),
        key=lambda k: (-round(float(overlaps[k]), 9), round(float(evals[k]) / scale, 9)),
    )
    return B[:, keys]


def reduce_problem(problem, tol=DEFAULT_TOL, basis=None, canonical=True):
    """Compress ``problem`` into its invariant subspace.

    Parameters
    ----------
    problem : PhysicalProblem
    tol : float
        Closure tolerance, also the bound on the target's residual outside the
        subspace.
    basis : ndarray, optional
        Use these orthonormal columns instead of the minimal closure. They must
        span an invariant subspace containing ``initial`` and ``target``.
    canonical : bool
        Apply :func:`canonical_basis` so the reduced matrices are reproducible.

    Raises
    ------
    ReductionError
        If the target has a component of norm above ``tol`` outside the subspace.
    """
    V = invariant_subspace(problem, tol) if basis is None else np.asarray(basis, dtype=complex)
    if canonical:
        V = canonical_basis(V, problem.drift, problem.controls, problem.initial)

    target = np.asarray(problem.target, dtype=complex)
    target_r = V.conj().T @ target
    residual = float(np.linalg.norm(target - V @ target_r))
    if residual > tol:
        raise ReductionError("target state lies outside the invariant subspace", residual)

    def compress(H):
        h = V.conj().T @ H @ V
        return (h + h.conj().T) / 2

    initial_r = V.conj().T @ problem.initial
    rp = ReducedProblem(
        drift=compress(problem.drift),
        controls=tuple(compress(c) for c in problem.controls),
        initial=initial_r / np.linalg.norm(initial_r),
        target=_phase_fix(target_r / np.linalg.norm(target_r)),
        basis=V,
        J=problem.J,
        label=problem.label,
    )
    if basis is not None:
        check_reduction(rp, problem)
    return rp


def check_reduction(rp, problem, atol=1e-9):
    """Assert the isometry and invariance properties of a reduction.

    Returns the largest invariance residual ``||(1 - V V^H) H V||``.
    """
    V = rp.basis
    d = V.shape[1]
    if np.max(np.abs(V.conj().T @ V - np.eye(d))) > 1e-10:
        raise ReductionError("basis is not orthonormal", float(np.linalg.norm(V.conj().T @ V - np.eye(d))))
    init_res = float(np.linalg.norm(V @ rp.initial - problem.initial))
    if init_res > 1e-10:
        raise ReductionError("reduced initial state does not reproduce the full one", init_res)
    worst = 0.0
    for H in (problem.drift, *problem.controls):
        HV = H @ V
        worst = max(worst, float(np.max(np.linalg.norm(HV - V @ (V.conj().T @ HV), axis=0))))
    if worst > atol:
        raise ReductionError("subspace is not invariant under the generators", worst)
    return worst


def drift_control_overlap(rp):
    """Normalised Frobenius overlap ``|Tr(D^H C)| / (||D|| ||C||)`` of drift and control.

    Trace parts are kept. Only defined for single-control problems.
    """
    if len(rp.controls) != 1:
        raise ValueError(f"overlap needs exactly one control, got {len(rp.controls)}")
    D = rp.drift
    C = rp.controls[0]
    return float(abs(np.trace(D.conj().T @ C)) / (np.linalg.norm(D) * np.linalg.norm(C)))


class SubspaceReducer(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`reduce_problem`.

    ``fit`` learns the invariant subspace of a problem; ``transform`` maps
    full-space state vectors (rows) into reduced coordinates and
    ``inverse_transform`` embeds them back.

    Attributes
    ----------
    basis_ : ndarray, shape (dim, d)
    n_components_ : int
    reduced_ : ReducedProblem
    overlap_ : float or None
        Drift/control overlap, ``None`` for multi-control problems.
    """

    def __init__(self, tol=DEFAULT_TOL, canonical=True):
        self.tol = tol
        self.canonical = canonical

    def fit(self, problem, y=None):
        self.reduced_ = reduce_problem(problem, tol=self.tol, canonical=self.canonical)
        self.basis_ = self.reduced_.basis
        self.n_components_ = self.basis_.shape[1]
        self.overlap_ = (
            drift_control_overlap(self.reduced_) if len(self.reduced_.controls) == 1 else None
        )
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        X = np.asarray(X, dtype=complex)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.basis_.shape[0]:
            raise ValueError(f"expected states of dimension {self.basis_.shape[0]}, got {X.shape[1]}")
        out = X @ self.basis_.conj()
        return out[0] if single else out

    def inverse_transform(self, X):
        check_is_fitted(self, "basis_")
        X = np.asarray(X, dtype=complex)
        single = X.ndim == 1
        out = np.atleast_2d(X) @ self.basis_.T
        return out[0] if single else out
