"""Closed-form time-optimal transfer for three completely coupled qubits.

Under collective x control the K3 problem lives in a two-level subspace, so
the transfer can be drawn on the Bloch sphere. Writing each reduced
Hamiltonian as ``alpha * 1 + r . sigma / 2``, the control axis ``c`` passes
through the initial Bloch vector and the target sits on the circle at polar
angle 2*pi/3 about ``c``. Rotations about ``c`` are free (unbounded control),
so only the motion in polar angle costs time. The drift component
perpendicular to ``c`` has length ``sqrt(3) pi J`` regardless of the control,
which fixes the minimal time at ``(2 pi / 3) / (sqrt(3) pi J) = 2 / (3 sqrt(3) J)``.

All functions work at ``J = 1`` unless a ``J`` argument is offered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .qcore import PAULI, bloch_vector, expm_hermitian, fidelity
from .reduce import ReducedProblem

__all__ = [
    "AnalyticSolution",
    "reduced_k3",
    "bloch_axis",
    "rotation_axes",
    "transfer_time",
    "optimal_angle",
    "optimal_solution",
    "orthogonal_axis",
    "verify_solution",
    "control_axis_angle",
    "polar_angle",
    "constant_control_time",
    "optimal_trajectory",
    "trotter_segment_compare",
]

SQRT3 = math.sqrt(3.0)
THETA_MIN = math.pi / 3
THETA_MAX = 2 * math.pi / 3


@dataclass(frozen=True)
class AnalyticSolution:
    """Constant control ``u`` for time ``T`` followed by an instantaneous hard pulse.

    ``phi`` is the hard-pulse angle about the unit-normalised control axis,
    applied as ``exp(-2i phi c_hat . sigma / 2)``.
    """

    u: float
    phi: float
    T: float

    def __post_init__(self):
        if self.T < 0:
            raise ValueError(f"duration must be non-negative, got {self.T}")


def reduced_k3(J=1.0):
    """The two-level K3 transfer problem, written down directly."""
    drift = np.pi * J / 2 * np.diag([-1.0, 3.0])
    control = 0.5 * np.array([[2.0, SQRT3], [SQRT3, 0.0]])
    return ReducedProblem(
        drift=drift,
        controls=(control,),
        initial=np.array([SQRT3 / 2, 0.5]),
        target=np.array([SQRT3 / 2, -0.5]),
        basis=None,
        J=J,
        label="K3",
    )


def bloch_axis(H):
    """Vector ``r`` in ``H = alpha * 1 + r . sigma / 2``; returns ``(r, alpha)``."""
    H = np.asarray(H, dtype=complex)
    if H.shape != (2, 2):
        raise ValueError(f"need a 2x2 operator, got {H.shape}")
    r = np.array([np.trace(H @ PAULI[k]).real for k in "xyz"])
    return r, np.trace(H).real / 2


def rotation_axes(problem=None):
    """Bloch rotation axes ``(drift_axis, control_axis)`` of the reduced K3 problem."""
    problem = reduced_k3() if problem is None else problem
    return bloch_axis(problem.drift)[0], bloch_axis(problem.controls[0])[0]


def transfer_time(theta, J=1.0):
    """Time to reach the target circle rotating about an axis at angle ``theta`` to ``c``.

    ``T = (2 / (sqrt(3) pi J)) sin(theta) arcsin(sqrt(3) / (2 sin(theta)))``.
    Only ``theta`` in ``[pi/3, 2 pi/3]`` reaches the circle.
    """
    if not THETA_MIN - 1e-12 <= theta <= THETA_MAX + 1e-12:
        raise ValueError(f"theta={theta} outside [pi/3, 2pi/3]: the orbit misses the target circle")
    s = math.sin(theta)
    return 2.0 / (SQRT3 * math.pi * J) * s * math.asin(min(1.0, SQRT3 / (2 * s)))


def _golden_min(f, a, b, tol=1e-12, max_iter=200):
    inv_phi = (math.sqrt(5) - 1) / 2
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def optimal_angle(grid_resolution=101):
    """Angle in ``[pi/3, 2 pi/3]`` that minimises :func:`transfer_time`.

    A uniform grid locates the basin, golden-section search refines it.
    """
    if grid_resolution < 3:
        raise ValueError("grid_resolution must be at least 3")
    grid = np.linspace(THETA_MIN, THETA_MAX, grid_resolution)
    times = [transfer_time(t) for t in grid]
    k = int(np.argmin(times))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid_resolution - 1)]
    return _golden_min(transfer_time, lo, hi)


def optimal_solution(J=1.0):
    """``(u, phi, T) = (pi J / 2, -pi / 4, 2 / (3 sqrt(3) J))``."""
    return AnalyticSolution(u=math.pi * J / 2, phi=-math.pi / 4, T=2.0 / (3.0 * SQRT3 * J))


def orthogonal_axis(J=1.0):
    """``(sqrt(3) pi J / 2)(-sqrt(3) I_z + I_x)`` with ``I_k = sigma_k / 2``."""
    return SQRT3 * math.pi * J / 2 * (-SQRT3 * PAULI["z"] / 2 + PAULI["x"] / 2)


def _hard_pulse(phi, control):
    r, _ = bloch_axis(control)
    n = r / np.linalg.norm(r)
    return expm_hermitian(2 * phi * sum(n[i] * PAULI[k] / 2 for i, k in enumerate("xyz")), 1.0)


def verify_solution(sol, problem=None):
    """Fidelity reached by constant ``u`` for ``T`` followed by the hard pulse ``phi``."""
    problem = reduced_k3() if problem is None else problem
    control = problem.controls[0]
    psi = expm_hermitian(problem.drift + sol.u * control, sol.T) @ problem.initial
    psi = _hard_pulse(sol.phi, control) @ psi
    return fidelity(problem.target, psi)


def control_axis_angle(u, problem=None):
    """Angle between the Bloch axis of ``drift + u * control`` and the control axis."""
    problem = reduced_k3() if problem is None else problem
    r, _ = bloch_axis(problem.drift + u * problem.controls[0])
    c = rotation_axes(problem)[1]
    return math.acos(np.clip(np.dot(r, c) / (np.linalg.norm(r) * np.linalg.norm(c)), -1, 1))


def polar_angle(state, problem=None):
    """Angle between the Bloch vector of ``state`` and the control axis."""
    problem = reduced_k3() if problem is None else problem
    c = rotation_axes(problem)[1]
    b = bloch_vector(state)
    return math.acos(np.clip(np.dot(b, c) / (np.linalg.norm(b) * np.linalg.norm(c)), -1, 1))


def constant_control_time(u, problem=None, t_max=2.0, samples=4000):
    """First time at which constant control ``u`` reaches the target's circle about ``c``.

    Found by direct simulation and root bracketing, independent of
    :func:`transfer_time`. Returns ``inf`` when the orbit never gets there.
    """
    problem = reduced_k3() if problem is None else problem
    H = problem.drift + u * problem.controls[0]
    goal = polar_angle(problem.target, problem)
    w, V = np.linalg.eigh(H)
    c0 = V.conj().T @ problem.initial

    def gap(t):
        return polar_angle(V @ (np.exp(-1j * w * t) * c0), problem) - goal

    ts = np.linspace(0.0, t_max, samples)
    vals = np.array([gap(t) for t in ts])
    hits = np.nonzero(vals >= 0)[0]
    if len(hits) == 0:
        # the orbit may touch the circle tangentially between samples
        k = int(np.argmax(vals))
        lo, hi = ts[max(k - 1, 0)], ts[min(k + 1, samples - 1)]
        res = minimize_scalar(lambda t: -gap(t), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        return float(res.x) if -res.fun > -1e-9 else math.inf
    k = hits[0]
    if k == 0:
        return 0.0
    return brentq(gap, ts[k - 1], ts[k], xtol=1e-14)


def optimal_trajectory(n_samples=101, problem=None, sol=None):
    """Bloch vectors along the constant segment of the optimal solution, plus the final point.

    Returns an ``(n_samples + 1, 4)`` array of ``(t, x, y, z)``; the last row
    is the state after the hard pulse, stamped with time ``T``.
    """
    problem = reduced_k3() if problem is None else problem
    sol = optimal_solution(problem.J) if sol is None else sol
    H = problem.drift + sol.u * problem.controls[0]
    rows = []
    psi = problem.initial
    for t in np.linspace(0.0, sol.T, n_samples):
        psi = expm_hermitian(H, t) @ problem.initial
        rows.append([t, *bloch_vector(psi)])
    final = _hard_pulse(sol.phi, problem.controls[0]) @ psi
    rows.append([sol.T, *bloch_vector(final)])
    return np.array(rows)


def trotter_segment_compare(v, delta, start_angle=math.pi / 3, problem=None):
    """Angle rotated about the orthogonal axis to move between two nearby control circles.

    Both paths start at the same point of the optimal trajectory at polar
    angle ``start_angle`` about the control axis. The optimal path rotates
    purely about ``H_perp`` for ``delta`` and ends on the circle at polar angle
    ``start_angle + |H_perp| delta``. The generic path evolves under
    ``H_perp + v * H_c`` until it reaches that same circle. Because rotations
    about the control axis cost no time, the time spent is the time spent
    rotating about ``H_perp``, and the swept angle is ``|H_perp|`` times it.

    Returns
    -------
    (optimal_angle, generic_angle)
        ``generic_angle`` is ``inf`` when the generic path never reaches the circle.
    """
    if not 0 < delta <= 0.01:
        raise ValueError(f"delta={delta} must lie in (0, 0.01] for the control to be treated as constant")
    if not math.isfinite(v):
        raise ValueError("v must be finite")
    problem = reduced_k3() if problem is None else problem
    h_perp = orthogonal_axis(problem.J)
    speed = float(np.linalg.norm(bloch_axis(h_perp)[0]))

    # start on the optimal trajectory where the polar angle equals start_angle
    t0 = start_angle / speed
    psi0 = expm_hermitian(h_perp, t0) @ problem.initial
    goal = polar_angle(expm_hermitian(h_perp, delta) @ psi0, problem)

    optimal = speed * delta
    H = h_perp + v * problem.controls[0]
    w, V = np.linalg.eigh(H)
    c0 = V.conj().T @ psi0

    def gap(t):
        return polar_angle(V @ (np.exp(-1j * w * t) * c0), problem) - goal

    ts = np.linspace(0.0, 50 * delta, 5001)
    vals = np.array([gap(t) for t in ts])
    hits = np.nonzero(vals >= 0)[0]
    if len(hits) == 0:
        return optimal, math.inf
    k = hits[0]
    t_hit = 0.0 if k == 0 else brentq(gap, ts[k - 1], ts[k], xtol=1e-16)
    return optimal, speed * float(t_hit)
