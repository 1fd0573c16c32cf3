"""Time evolution of Bethe roots under the dynamical Bethe equations.

For a detuning ``Delta(t)`` at fixed coupling ``c`` the state

    |Psi(t)> = exp(i p(t)) prod_j B(lambda_j(t)) |vac>

solves the Schrodinger equation when

    d lambda_n / dt = Delta'(t) / c + i phi_n({lambda}) lambda_n,
    d p / dt        = -E({lambda}) - sum_n phi_n({lambda}).

The phase ``p`` is complex, so ``exp(i p)`` also carries the norm.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial import legendre
from scipy.integrate import DOP853, OdeSolution

from .core import DEFAULT_PHI_NORMALIZATION, ModelParams, RootSet, as_roots, phi_vector
from .errors import GridMismatchError, IntegrationError, ParameterError, SingularStateError
from .fock import (
    _bethe_amplitudes,
    bethe_vector_closed_form,
    ket_coefficient_matrix,
    roots_from_symmetric,
)
from .protocols import DriveProtocol

log = logging.getLogger(__name__)

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
WARN_SEPARATION = 1e-6
ABORT_SEPARATION = 1e-10
_GL_NODES, _GL_WEIGHTS = legendre.leggauss(8)


class CloseApproachWarning(RuntimeWarning):
    """Two roots came closer than ``WARN_SEPARATION`` during integration."""


@dataclass(frozen=True)
class Trajectory:
    """Roots sampled along an integration.

    Attributes
    ----------
    times : ndarray, shape (T,)
        Sample times, strictly monotonic in the direction of integration.
    roots : ndarray, shape (T, N)
        Roots at each sample time, in the order of the initial root set.
    phase : ndarray, shape (T,) or None
        Complex phase ``p(t)`` with ``p(times[0]) = 0``.
    min_separation, min_modulus : ndarray, shape (T,)
        Per-sample diagnostics.
    step_min_separation : float
        Smallest root separation seen at any accepted integrator step.
    """

    params: ModelParams
    protocol: DriveProtocol
    times: np.ndarray
    roots: np.ndarray
    phase: np.ndarray | None
    min_separation: np.ndarray
    min_modulus: np.ndarray
    step_min_separation: float
    n_steps: int
    nfev: int
    sigma: int | None = None
    dense: OdeSolution | None = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return self.times.size

    def root_set(self, i: int) -> RootSet:
        return RootSet(self.roots[i], self.sigma)

    @property
    def final_roots(self) -> np.ndarray:
        return self.roots[-1]

    def fock_states(self, with_phase: bool = True) -> np.ndarray:
        """Unnormalized Fock amplitudes per sample time, shape (T, N+1)."""
        c = self.params.c
        out = np.array(
            [
                _bethe_amplitudes(lam, self.protocol.delta(t), c)
                for t, lam in zip(self.times, self.roots)
            ]
        )
        if with_phase:
            if self.phase is None:
                raise ValueError("trajectory has no phase; call accumulate_phase first")
            out = out * np.exp(1j * self.phase)[:, None]
        return out


def _check_roots(lam: np.ndarray, time: float | None = None, last=None) -> None:
    zero = np.flatnonzero(np.abs(lam) < ABORT_SEPARATION)
    if zero.size:
        raise SingularStateError(
            f"root {int(zero[0])} reached zero", tuple(int(i) for i in zero), time, last
        )
    if lam.size > 1:
        d = np.abs(lam[:, None] - lam[None, :])
        np.fill_diagonal(d, np.inf)
        i, j = np.unravel_index(np.argmin(d), d.shape)
        if d[i, j] < ABORT_SEPARATION:
            raise SingularStateError(
                f"roots {min(i, j)} and {max(i, j)} collided",
                (int(min(i, j)), int(max(i, j))),
                time,
                last,
            )


def _separation(lam: np.ndarray) -> float:
    if lam.size < 2:
        return math.inf
    d = np.abs(lam[:, None] - lam[None, :])
    np.fill_diagonal(d, np.inf)
    return float(d.min())


def rhs_driven(
    t: float,
    roots,
    protocol: DriveProtocol,
    params: ModelParams,
    normalization: str = DEFAULT_PHI_NORMALIZATION,
) -> np.ndarray:
    """``d lambda_n / dt = Delta'(t)/c + i phi_n lambda_n`` aligned with ``roots``."""
    lam = as_roots(roots)
    _check_roots(lam, t)
    c = params.c
    phi = phi_vector(lam, protocol.delta(t), c, normalization)
    return protocol.delta_dot(t) / c + 1j * phi * lam


def sample_times(t_start: float, t_end: float, dt: float) -> np.ndarray:
    """Grid ``t_start, t_start +- dt, ...`` ending exactly at ``t_end``."""
    if dt <= 0:
        raise ParameterError("sample spacing must be positive")
    span = t_end - t_start
    n = int(math.floor(abs(span) / dt + 1e-9))
    times = t_start + math.copysign(dt, span) * np.arange(n + 1)
    if abs(times[-1] - t_end) > 1e-9 * dt:
        times = np.append(times, t_end)
    else:
        times[-1] = t_end
    return times


def evolve(
    initial,
    protocol: DriveProtocol,
    t_end: float,
    params: ModelParams,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    times: np.ndarray | None = None,
    sample_dt: float | None = None,
    t_start: float = 0.0,
    with_phase: bool = True,
    normalization: str = DEFAULT_PHI_NORMALIZATION,
    max_step: float | None = None,
) -> Trajectory:
    """Integrate the dynamical Bethe equations from ``t_start`` to ``t_end``.

    Uses the adaptive Dormand-Prince 8(5,3) pair with dense output. ``t_end``
    may precede ``t_start`` (backward integration). Sample times default to
    a grid of spacing ``sample_dt`` (or 100 intervals).

    Raises
    ------
    SingularStateError
        If roots collide or reach zero; carries the last good state.
    IntegrationError
        If the step size underflows or the integrator otherwise fails.
    """
    lam0 = as_roots(initial).astype(complex)
    sigma = initial.sigma if isinstance(initial, RootSet) else None
    if lam0.size != params.n_particles:
        raise ParameterError(f"{lam0.size} roots for N = {params.n_particles}")
    if t_end == t_start:
        raise ParameterError("t_end must differ from t_start")
    if rtol <= 0 or atol <= 0:
        raise ParameterError("tolerances must be positive")
    _check_roots(lam0, t_start, lam0)
    if times is None:
        times = sample_times(t_start, t_end, sample_dt or abs(t_end - t_start) / 100)
    times = np.asarray(times, dtype=float)
    direction = math.copysign(1.0, t_end - t_start)
    if times[0] != t_start or np.any(direction * np.diff(times) <= 0):
        raise ParameterError("sample times must start at t_start and be strictly monotonic")

    c = params.c
    nfev = 0

    def fun(t, y):
        nonlocal nfev
        nfev += 1
        phi = phi_vector(y, protocol.delta(t), c, normalization)
        return protocol.delta_dot(t) / c + 1j * phi * y

    if lam0.size == 0:
        return _empty_trajectory(params, protocol, times, sigma)

    if max_step is None:
        max_step = float(np.min(np.abs(np.diff(times)))) if times.size > 1 else np.inf
    solver = DOP853(fun, t_start, lam0, t_end, rtol=rtol, atol=atol, max_step=max_step)
    step_ts = [t_start]
    interpolants = []
    last_good = lam0.copy()
    min_sep = _separation(lam0)
    warned = False
    while solver.status == "running":
        message = solver.step()
        if solver.status == "failed":
            raise IntegrationError(
                f"integration failed at t={solver.t:.6g}: {message}",
                time=float(solver.t),
                last_state=last_good,
                diagnosis=f"min root separation {_separation(last_good):.3e}",
            )
        y = solver.y
        if not np.all(np.isfinite(y)):
            raise SingularStateError("non-finite roots", (), float(solver.t_old), last_good)
        _check_roots(y, float(solver.t), last_good)
        sep = _separation(y)
        min_sep = min(min_sep, sep)
        if sep < WARN_SEPARATION:
            solver.max_step = min(solver.max_step, 0.5 * abs(solver.t - solver.t_old))
            if not warned:
                warnings.warn(
                    f"roots within {sep:.2e} of each other at t={solver.t:.6g}",
                    CloseApproachWarning,
                    stacklevel=2,
                )
                warned = True
        step_ts.append(solver.t)
        interpolants.append(solver.dense_output())
        last_good = y.copy()

    dense = OdeSolution(step_ts, interpolants)
    roots = dense(times).T.copy()
    roots[0] = lam0
    mods = np.min(np.abs(roots), axis=1)
    seps = np.array([_separation(r) for r in roots])
    traj = Trajectory(
        params=params,
        protocol=protocol,
        times=times,
        roots=roots,
        phase=None,
        min_separation=seps,
        min_modulus=mods,
        step_min_separation=min_sep,
        n_steps=len(interpolants),
        nfev=nfev,
        sigma=sigma,
        dense=dense,
    )
    return accumulate_phase(traj, normalization) if with_phase else traj


def _empty_trajectory(params, protocol, times, sigma):
    # N = 0: the vacuum only acquires the zero-energy phase
    zeros = np.zeros((times.size, 0), dtype=complex)
    inf = np.full(times.size, np.inf)
    return Trajectory(
        params, protocol, times, zeros, np.zeros(times.size, dtype=complex), inf, inf,
        math.inf, 0, 0, sigma,
    )


def _phase_rate(lam: np.ndarray, deltas: np.ndarray, c: float) -> np.ndarray:
    """``-E - sum_n phi_n`` for a batch of root sets ``lam`` with shape (M, N)."""
    d = lam[:, :, None] - lam[:, None, :]
    n = lam.shape[1]
    idx = np.arange(n)
    d[:, idx, idx] = 1.0
    u = 1.0 - c / d
    w = 1.0 + c / d
    u[:, idx, idx] = 1.0
    w[:, idx, idx] = 1.0
    phi = (deltas[:, None] - c * lam) * u.prod(axis=2) + w.prod(axis=2) / (c * lam)
    e = (np.prod(1.0 - c / lam, axis=1) - 1.0) / c**2
    return -e - phi.sum(axis=1)


def accumulate_phase(
    trajectory: Trajectory, normalization: str = DEFAULT_PHI_NORMALIZATION
) -> Trajectory:
    """Integrate ``dp/dt = -E - sum phi_n`` along the trajectory's dense output.

    Each integrator step is integrated with 8-point Gauss-Legendre
    quadrature (order 16), above the order of the root integrator.
    """
    if normalization != DEFAULT_PHI_NORMALIZATION:
        raise ValueError("phase accumulation is defined for the calibrated normalization only")
    dense = trajectory.dense
    if dense is None:
        raise ValueError("trajectory has no dense output")
    proto, c = trajectory.protocol, trajectory.params.c
    step_ts = np.asarray(dense.ts)
    # integral over each step, in integration order
    step_int = np.array(
        [_gauss(dense, proto, c, a, b) for a, b in zip(step_ts[:-1], step_ts[1:])]
    )
    cum = np.concatenate([[0.0], np.cumsum(step_int)])
    times = trajectory.times
    forward = step_ts[-1] > step_ts[0]
    key = step_ts if forward else -step_ts
    tkey = times if forward else -times
    seg = np.clip(np.searchsorted(key, tkey, side="right") - 1, 0, len(step_ts) - 2)
    phase = np.empty(times.size, dtype=complex)
    for i, (t, s) in enumerate(zip(times, seg)):
        phase[i] = cum[s] + (_gauss(dense, proto, c, step_ts[s], t) if t != step_ts[s] else 0)
    phase[0] = 0.0
    return replace(trajectory, phase=phase)


def _gauss(dense, proto, c, a, b) -> complex:
    half = 0.5 * (b - a)
    nodes = 0.5 * (a + b) + half * _GL_NODES
    lam = dense(nodes).T
    deltas = np.array([proto.delta(t) for t in nodes])
    return complex(half * np.dot(_GL_WEIGHTS, _phase_rate(lam, deltas, c)))


# --- quench -----------------------------------------------------------------


def quench_initial(
    pre_roots, delta_old: float, delta_new: float, params: ModelParams
) -> RootSet:
    """Roots that represent the same state after ``delta_old -> delta_new`` at fixed ``c``.

    ``B`` depends on the detuning only through ``lambda - delta/c``, so the
    state is unchanged when every root moves by ``(delta_new - delta_old)/c``.
    """
    lam = as_roots(pre_roots)
    sigma = pre_roots.sigma if isinstance(pre_roots, RootSet) else None
    shifted = lam + (delta_new - delta_old) / params.c
    hit = np.flatnonzero(np.abs(shifted) < ABORT_SEPARATION)
    if hit.size:
        raise SingularStateError(
            f"shifted root {int(hit[0])} is zero", tuple(int(i) for i in hit), 0.0, lam
        )
    return RootSet(shifted, sigma)


def quench_initial_general(
    pre_roots, params_old: ModelParams, params_new: ModelParams
) -> RootSet:
    """Experimental: re-express a Bethe state after a quench of both ``delta`` and ``c``.

    Solves ``M_new e = alpha * Psi_old`` for the elementary symmetric
    polynomials ``e`` of the new roots (``e_0 = 1`` fixes ``alpha``) and
    returns the polynomial roots. The result matches the original state up
    to an overall scalar, provided the new coefficient matrix is regular.
    """
    if params_old.n_particles != params_new.n_particles:
        raise ParameterError("a quench preserves the particle number")
    lam = as_roots(pre_roots)
    n = lam.size
    target = bethe_vector_closed_form(lam, params_old).amplitudes
    M = ket_coefficient_matrix(n, params_new.delta, params_new.c)
    try:
        e = np.linalg.solve(M, target)
    except np.linalg.LinAlgError:
        raise SingularStateError("post-quench coefficient matrix is singular") from None
    if abs(e[0]) < 1e-300:
        raise SingularStateError("post-quench state has fewer than N finite roots")
    new = roots_from_symmetric(e / e[0])
    _check_roots(new, 0.0, lam)
    return RootSet(new, pre_roots.sigma if isinstance(pre_roots, RootSet) else None)


# --- orthogonality monitoring ---------------------------------------------


@dataclass(frozen=True)
class OrthogonalityReport:
    """Per-time maximum normalized overlap between distinct trajectories.

    ``derivative`` holds the finite-difference time derivative of the
    phase-carrying pairing, which must vanish as well.
    """

    times: np.ndarray
    max_overlap: np.ndarray
    derivative: np.ndarray

    @property
    def worst(self) -> float:
        return float(self.max_overlap.max()) if self.max_overlap.size else 0.0


def orthogonality_residuals(trajectories) -> OrthogonalityReport:
    """Pairwise overlaps ``|<Psi_s'|Psi_s>| / (|Psi_s'| |Psi_s|)`` along a family.

    The pairing is the physical (conjugate-linear) one, which evolves
    unitarily. At an instant where all states are eigenstates it coincides
    with the Bethe-dual pairing, since then the dual vectors are
    proportional to the transposed kets.
    """
    trajs = list(trajectories)
    if len(trajs) < 2:
        empty = np.zeros(0)
        return OrthogonalityReport(empty, empty, empty)
    ref = trajs[0]
    for tr in trajs[1:]:
        if tr.params != ref.params:
            raise GridMismatchError("trajectories have different parameters")
        if tr.times.shape != ref.times.shape or np.any(tr.times != ref.times):
            raise GridMismatchError("trajectories are sampled on different time grids")
    states = [tr.fock_states(with_phase=tr.phase is not None) for tr in trajs]
    norms0 = [np.linalg.norm(s[0]) for s in states]
    T = ref.times.size
    worst = np.zeros(T)
    deriv = np.zeros(T)
    for a in range(len(trajs)):
        for b in range(a):
            raw = np.einsum("ij,ij->i", np.conj(states[a]), states[b])
            scale = np.linalg.norm(states[a], axis=1) * np.linalg.norm(states[b], axis=1)
            worst = np.maximum(worst, np.abs(raw) / scale)
            if T > 1:
                grad = np.gradient(raw / (norms0[a] * norms0[b]), ref.times)
                deriv = np.maximum(deriv, np.abs(grad))
    return OrthogonalityReport(ref.times.copy(), worst, deriv)
