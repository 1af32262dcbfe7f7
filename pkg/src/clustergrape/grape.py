"""Gradient ascent pulse engineering for state transfer.

Controls are piecewise constant over ``N`` equal slices of a total duration
``T``. Slice propagators are built from the eigendecomposition of each slice
Hamiltonian, which also yields the exact derivative of every propagator with
respect to every amplitude (no first-order-in-``dt`` approximation). The
amplitudes are unbounded, so near-instantaneous "hard" rotations appear as
large-amplitude slices.

Times passed to :func:`propagate` and :func:`optimize` are in units of ``1/J``;
:func:`minimal_time` and :func:`fidelity_vs_time` work in units of ``1/(2J)``,
in which the free-evolution preparation takes exactly 1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import OptimizationFailure

__all__ = [
    "PulseSequence",
    "GrapeConfig",
    "OptimizationResult",
    "GrapeOptimizer",
    "propagate",
    "gradient",
    "fidelity_and_gradient",
    "optimize",
    "fidelity_vs_time",
    "minimal_time",
]

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.999


@dataclass(frozen=True, eq=False)
class PulseSequence:
    """Piecewise-constant amplitudes, shape ``(N, m)``, over total duration ``T``."""

    T: float
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=float)
        if amps.ndim == 1:
            amps = amps[:, None]
        if amps.ndim != 2 or amps.shape[0] < 1:
            raise ValueError(f"amplitudes must have shape (N, m) with N >= 1, got {amps.shape}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        if not self.T > 0:
            raise ValueError(f"duration must be positive, got {self.T}")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "T", float(self.T))

    @property
    def n_slices(self):
        return self.amplitudes.shape[0]

    @property
    def n_controls(self):
        return self.amplitudes.shape[1]

    @property
    def dt(self):
        return self.T / self.n_slices

    @classmethod
    def zeros(cls, T, n_slices, n_controls=1):
        return cls(T, np.zeros((n_slices, n_controls)))

    def slice_starts(self):
        return np.arange(self.n_slices) * self.dt


@dataclass(frozen=True)
class GrapeConfig:
    """Optimizer settings.

    Random initial amplitudes for restart ``r`` are drawn uniformly from
    ``[-s, s] * amplitude_init_scale * pi * J`` with ``s`` cycling through
    ``init_scale_ladder``; small scales alone miss the large-amplitude basins
    that contain hard pulses. ``target_fidelity`` stops the restart loop early
    once any restart reaches it.
    """

    max_iterations: int = 3000
    step_size_initial: float = 1.0
    line_search_shrink_factor: float = 0.5
    step_growth_factor: float = 2.0
    convergence_threshold: float = 1e-10
    restarts: int = 20
    rng_seed: int = 0
    amplitude_init_scale: float = 1.0
    target_fidelity: float | None = None
    method: str = "lbfgs"
    memory: int = 20
    init_scale_ladder: tuple = (1.0, 3.0, 10.0, 30.0)
    stall_window: int = 20

    def __post_init__(self):
        for name in ("max_iterations", "step_size_initial", "convergence_threshold",
                     "restarts", "amplitude_init_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.line_search_shrink_factor < 1:
            raise ValueError("line_search_shrink_factor must lie in (0, 1)")
        if self.step_growth_factor < 1:
            raise ValueError("step_growth_factor must be >= 1")
        if self.method not in ("lbfgs", "gradient"):
            raise ValueError(f"method must be 'lbfgs' or 'gradient', got {self.method!r}")


@dataclass
class OptimizationResult:
    best_fidelity: float
    best_pulse: PulseSequence
    fidelity_trace: np.ndarray
    seed: int
    converged: bool
    restart_fidelities: list = field(default_factory=list)
    iterations: int = 0


def _generators(problem):
    """Drift and stacked controls, as real arrays when they have no imaginary part."""
    drift = np.asarray(problem.drift)
    controls = np.asarray(problem.controls)
    if not (np.any(drift.imag) or np.any(controls.imag)):
        # real symmetric eigh is several times faster than the complex one
        return drift.real, controls.real
    return drift, controls


def _check_pulse(pulse, problem):
    if pulse.n_controls != len(problem.controls):
        raise ValueError(
            f"pulse has {pulse.n_controls} controls, problem has {len(problem.controls)}"
        )


def _slice_spectra(amplitudes, dt, drift, controls):
    H = drift[None, :, :] + np.einsum("km,mij->kij", amplitudes, controls)
    w, V = np.linalg.eigh(H)
    phases = np.exp(-1j * dt * w)
    U = (V * phases[:, None, :]) @ V.conj().transpose(0, 2, 1)
    return w, V, phases, U


def _forward(U, psi0):
    states = np.empty((U.shape[0] + 1, psi0.shape[0]), dtype=complex)
    states[0] = psi0
    for k in range(U.shape[0]):
        states[k + 1] = U[k] @ states[k]
    return states


def propagate(pulse, problem):
    """Final state and fidelity ``|<target|U_N ... U_1|initial>|``."""
    _check_pulse(pulse, problem)
    drift, controls = _generators(problem)
    *_, U = _slice_spectra(pulse.amplitudes, pulse.dt, drift, controls)
    psi = _forward(U, problem.initial)[-1]
    return psi, float(min(1.0, abs(np.vdot(problem.target, psi))))


def fidelity_and_gradient(pulse, problem):
    """Fidelity and its exact gradient with respect to every amplitude.

    The derivative of ``exp(-i dt H)`` along a control ``H_j`` is, in the
    eigenbasis of ``H``, ``(V^H H_j V) * G`` with the divided differences
    ``G_pq = (e^{-i dt l_p} - e^{-i dt l_q}) / (l_p - l_q)``, evaluated in the
    cancellation-free form ``-i dt e^{-i dt (l_p + l_q)/2} sinc(dt (l_p - l_q)/2)``.

    Returns
    -------
    fidelity : float
    grad : ndarray, shape (N, m)
    """
    _check_pulse(pulse, problem)
    dt = pulse.dt
    drift, controls = _generators(problem)
    w, V, _, U = _slice_spectra(pulse.amplitudes, dt, drift, controls)
    states = _forward(U, problem.initial)
    n = U.shape[0]

    costates = np.empty_like(states)
    costates[n] = problem.target
    for k in range(n - 1, -1, -1):
        costates[k] = U[k].conj().T @ costates[k + 1]

    overlap = np.vdot(problem.target, states[n])
    fid = abs(overlap)

    lp = w[:, :, None]
    lq = w[:, None, :]
    G = -1j * dt * np.exp(-0.5j * dt * (lp + lq)) * np.sinc(dt * (lp - lq) / (2 * np.pi))

    Vh = V.conj().transpose(0, 2, 1)
    a = np.einsum("kij,kj->ki", Vh, costates[1:])
    b = np.einsum("kij,kj->ki", Vh, states[:-1])
    M = a.conj()[:, :, None] * G * b[:, None, :]
    K = V.conj() @ M @ V.transpose(0, 2, 1)
    dc = np.einsum("mrs,krs->km", controls, K)

    if fid < 1e-300:
        return 0.0, np.zeros_like(pulse.amplitudes)
    grad = (np.conj(overlap) * dc).real / fid
    return float(min(1.0, fid)), grad


def gradient(pulse, problem):
    """Exact gradient of the transfer fidelity, shape ``(N, m)``."""
    return fidelity_and_gradient(pulse, problem)[1]


def _lbfgs_direction(grad, pairs):
    """Two-loop recursion: quasi-Newton ascent direction from stored ``(s, y)`` pairs."""
    q = grad.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= np.dot(s, y) / np.dot(y, y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return q


def _ascend(problem, amplitudes, T, config, trace):
    """Backtracking ascent from one starting point.

    Returns ``(amplitudes, fidelity, converged, iterations)``. ``trace``
    receives the fidelity after every accepted step.
    """
    shape = amplitudes.shape
    x = np.asarray(amplitudes, dtype=float).ravel()
    fid, grad = fidelity_and_gradient(PulseSequence(T, x.reshape(shape)), problem)
    grad = grad.ravel()
    trace.append(fid)
    pairs = []
    step = config.step_size_initial
    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        if config.target_fidelity is not None and fid >= config.target_fidelity:
            converged = True
            break
        if np.dot(grad, grad) < 1e-30:
            converged = True
            break
        if config.method == "lbfgs":
            direction = _lbfgs_direction(grad, pairs)
            if np.dot(direction, grad) <= 0:
                pairs.clear()
                direction = grad
            alpha = 1.0 if pairs else step
        else:
            direction = grad
            alpha = step
        dnorm = np.linalg.norm(direction)
        accepted = False
        while alpha * dnorm > 1e-14:
            x_new = x + alpha * direction
            f_new, g_new = fidelity_and_gradient(PulseSequence(T, x_new.reshape(shape)), problem)
            if f_new > fid:
                accepted = True
                break
            alpha *= config.line_search_shrink_factor
        if not accepted:
            if pairs:
                pairs.clear()
                continue
            converged = True
            break
        g_new = g_new.ravel()
        s = x_new - x
        y = grad - g_new
        sy = np.dot(s, y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y, 1.0 / sy))
            if len(pairs) > config.memory:
                pairs.pop(0)
        x, fid, grad = x_new, f_new, g_new
        trace.append(fid)
        if pairs:
            step = alpha
        else:
            step = alpha * config.step_growth_factor
        window = config.stall_window
        if len(trace) > window and fid - trace[-1 - window] < config.convergence_threshold:
            converged = True
            break
    return x.reshape(shape), fid, converged, it


def optimize(problem, T, n_slices=100, config=None, initial_amplitudes=None):
    """Multi-restart GRAPE for the transfer ``problem.initial -> problem.target``.

    Parameters
    ----------
    problem : PhysicalProblem or ReducedProblem
    T : float
        Duration in units of ``1/J``.
    n_slices : int
    config : GrapeConfig, optional
    initial_amplitudes : array_like, optional
        Extra starting point (e.g. a warm start); it is tried first and counts
        as one of the restarts.

    Returns
    -------
    OptimizationResult
        Best over all restarts. Restart ``r`` draws from an independent stream
        seeded by ``(rng_seed, r)`` so results do not depend on execution order.
    """
    config = config or GrapeConfig()
    if not T > 0:
        raise ValueError(f"duration must be positive, got {T}")
    if n_slices < 1:
        raise ValueError("need at least one slice")
    m = len(problem.controls)
    scale = config.amplitude_init_scale * np.pi * problem.J

    starts = []
    if initial_amplitudes is not None:
        starts.append(np.asarray(initial_amplitudes, dtype=float).reshape(n_slices, m))
    ladder = config.init_scale_ladder
    for r in range(config.restarts - len(starts)):
        rng = np.random.default_rng([config.rng_seed, r])
        s = scale * ladder[r % len(ladder)]
        starts.append(rng.uniform(-s, s, size=(n_slices, m)))

    zero_fid = propagate(PulseSequence.zeros(T, n_slices, m), problem)[1]
    best = None
    results = []
    total_iter = 0
    for amps in starts:
        trace = []
        amps, fid, converged, it = _ascend(problem, amps, T, config, trace)
        total_iter += it
        results.append(fid)
        if best is None or fid > best[1]:
            best = (amps, fid, converged, trace)
        if config.target_fidelity is not None and fid >= config.target_fidelity:
            break

    amps, fid, converged, trace = best
    if fid < zero_fid:
        # the optimizer must never report less than doing nothing
        amps, fid, converged, trace = np.zeros((n_slices, m)), zero_fid, False, [zero_fid]
    return OptimizationResult(
        best_fidelity=fid,
        best_pulse=PulseSequence(T, amps),
        fidelity_trace=np.asarray(trace),
        seed=config.rng_seed,
        converged=converged,
        restart_fidelities=results,
        iterations=total_iter,
    )


def _time_units(problem):
    # one unit of 1/(2J) expressed in units of 1/J
    return 1.0 / (2.0 * problem.J)


def fidelity_vs_time(problem, T_grid, n_slices=100, config=None):
    """Best fidelity at each duration of ``T_grid`` (units of ``1/(2J)``).

    Every grid point is an independent :func:`optimize` run with the same
    config. Returns a list of ``(T, best_fidelity)`` pairs; a non-monotone
    curve is logged, not corrected.
    """
    grid = [float(t) for t in T_grid]
    if not grid:
        raise ValueError("empty time grid")
    if any(t <= 0 for t in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("time grid must be positive and strictly ascending")
    unit = _time_units(problem)
    curve = [(t, optimize(problem, t * unit, n_slices, config).best_fidelity) for t in grid]
    fids = [f for _, f in curve]
    if any(b < a - 1e-6 for a, b in zip(fids, fids[1:])):
        logger.warning("fidelity curve is not monotone in T: %s", fids)
    return curve


def _resample(amplitudes, n_slices):
    if amplitudes.shape[0] == n_slices:
        return amplitudes.copy()
    idx = (np.arange(n_slices) * amplitudes.shape[0]) // n_slices
    return amplitudes[idx]


def minimal_time(problem, threshold=DEFAULT_THRESHOLD, time_tol=0.005, n_slices=100, config=None,
                 T_hi=1.0, T_lo=None, return_result=False):
    """Shortest duration (units of ``1/(2J)``) at which GRAPE reaches ``threshold``.

    Bisection on ``[T_lo, T_hi]``; ``T_hi`` defaults to 1, where free evolution
    already succeeds. Each probe is warm-started from the pulse found at the
    current upper bracket.

    Raises
    ------
    OptimizationFailure
        If the fidelity at ``T_hi`` is below ``threshold``.
    """
    if not 0.9 < threshold < 1:
        raise ValueError(f"threshold must lie in (0.9, 1), got {threshold}")
    if not time_tol > 0:
        raise ValueError("time_tol must be positive")
    config = replace(config or GrapeConfig(), target_fidelity=threshold)
    unit = _time_units(problem)

    def solve(t, warm=None):
        init = None if warm is None else _resample(warm.best_pulse.amplitudes, n_slices)
        res = optimize(problem, t * unit, n_slices, config, initial_amplitudes=init)
        logger.info("T=%.4f fidelity=%.6f", t, res.best_fidelity)
        return res

    hi_res = solve(T_hi)
    if hi_res.best_fidelity < threshold:
        raise OptimizationFailure(f"threshold {threshold} not reached at T={T_hi}", hi_res.best_fidelity)
    hi = T_hi
    lo = 0.5 * T_hi if T_lo is None else T_lo
    while True:
        lo_res = solve(lo, hi_res)
        if lo_res.best_fidelity < threshold:
            break
        hi, hi_res = lo, lo_res
        lo *= 0.5
        if lo < time_tol:
            lo = 0.0
            break
    while hi - lo > time_tol:
        mid = 0.5 * (lo + hi)
        res = solve(mid, hi_res)
        if res.best_fidelity >= threshold:
            hi, hi_res = mid, res
        else:
            lo = mid
    return (hi, hi_res) if return_result else hi


class GrapeOptimizer(BaseEstimator):
    """Estimator front end for :func:`optimize` and :func:`minimal_time`.

    ``fit(problem, duration)`` optimizes a pulse of the given duration (units
    of ``1/J``); with ``duration=None`` it searches the minimal time instead
    and stores it in ``minimal_time_`` (units of ``1/(2J)``).
    """

    def __init__(self, n_slices=100, restarts=20, max_iterations=3000, step_size=1.0,
                 shrink=0.5, tol=1e-10, init_scale=1.0, threshold=DEFAULT_THRESHOLD, time_tol=0.005,
                 method="lbfgs", random_state=0):
        self.n_slices = n_slices
        self.restarts = restarts
        self.max_iterations = max_iterations
        self.step_size = step_size
        self.shrink = shrink
        self.tol = tol
        self.init_scale = init_scale
        self.threshold = threshold
        self.time_tol = time_tol
        self.method = method
        self.random_state = random_state

    def _config(self):
        return GrapeConfig(
            max_iterations=self.max_iterations,
            step_size_initial=self.step_size,
            line_search_shrink_factor=self.shrink,
            convergence_threshold=self.tol,
            restarts=self.restarts,
            rng_seed=self.random_state,
            amplitude_init_scale=self.init_scale,
            method=self.method,
        )

    def fit(self, problem, duration=None):
        if duration is None:
            t_min, result = minimal_time(problem, self.threshold, self.time_tol, self.n_slices,
                                         self._config(), return_result=True)
            self.minimal_time_ = t_min
        else:
            result = optimize(problem, duration, self.n_slices, self._config())
        self.result_ = result
        self.best_pulse_ = result.best_pulse
        self.best_fidelity_ = result.best_fidelity
        return self

    def predict(self, problem):
        """Final state reached by the fitted pulse."""
        check_is_fitted(self, "best_pulse_")
        return propagate(self.best_pulse_, problem)[0]

    def score(self, problem):
        """Fidelity of the fitted pulse on ``problem``."""
        check_is_fitted(self, "best_pulse_")
        return propagate(self.best_pulse_, problem)[1]
