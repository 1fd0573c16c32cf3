"""Exact-diagonalization oracle for the dimer in a fixed particle-number sector."""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np
from scipy.integrate import solve_ivp

from .core import ModelParams
from .errors import IntegrationError, ParameterError
from .fock import FockVector, coherence, hamiltonian_block
from .protocols import DriveProtocol


@dataclass(frozen=True)
class SectorSpectrum:
    """Eigenpairs of one sector, energies ascending; ``vectors[:, s]`` is state s."""

    params: ModelParams
    energies: np.ndarray
    vectors: np.ndarray

    def state(self, s: int) -> FockVector:
        return FockVector(self.vectors[:, s])

    @property
    def ground_state(self) -> FockVector:
        return self.state(0)


def build_hamiltonian(params: ModelParams) -> np.ndarray:
    """Real symmetric ``(N+1) x (N+1)`` sector Hamiltonian."""
    return hamiltonian_block(params.delta, params.c, params.n_particles)


def eigensolve(params: ModelParams) -> SectorSpectrum:
    w, v = np.linalg.eigh(build_hamiltonian(params))
    # fix the arbitrary eigenvector sign so results are reproducible
    pivot = np.argmax(np.abs(v), axis=0)
    v = v * np.sign(v[pivot, np.arange(v.shape[1])])
    return SectorSpectrum(params, w, v)


@dataclass(frozen=True)
class EDTrajectory:
    """Sampled Schrodinger evolution; ``states[i]`` is the amplitude vector at ``times[i]``."""

    times: np.ndarray
    states: np.ndarray
    max_norm_drift: float

    def coherence(self) -> np.ndarray:
        return np.array([coherence(FockVector(s)) for s in self.states])

    def b_occupation(self) -> np.ndarray:
        n = self.states.shape[1] - 1
        nb = n - np.arange(n + 1)
        p = np.abs(self.states) ** 2
        return (p @ nb) / p.sum(axis=1)


def propagate(
    psi0: FockVector | np.ndarray,
    protocol: DriveProtocol,
    times: np.ndarray,
    params: ModelParams,
    rtol: float = 1e-12,
    atol: float = 1e-12,
    method: str = "auto",
) -> EDTrajectory:
    """Integrate ``i d psi/dt = H(Delta(t)) psi`` and sample at ``times``.

    ``method="eigen"`` propagates exactly through the eigendecomposition and
    is only valid for piecewise-constant protocols; ``method="rk"`` uses an
    adaptive 8th-order Runge-Kutta scheme. ``"auto"`` picks the former when
    possible. The norm is never renormalized; its drift is recorded.
    """
    amp = psi0.amplitudes if isinstance(psi0, FockVector) else np.asarray(psi0, dtype=complex)
    n = params.n_particles
    if amp.size != n + 1:
        raise ParameterError(f"state has {amp.size - 1} particles, params say {n}")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) <= 0):
        raise ParameterError("time grid must be non-empty and strictly increasing")
    if method == "auto":
        method = "eigen" if protocol.is_piecewise_constant else "rk"
    if method == "eigen":
        if not protocol.is_piecewise_constant:
            raise ParameterError("eigen propagation needs a piecewise-constant protocol")
        states = _propagate_eigen(amp, params.with_delta(protocol.delta(times[0])), times)
    elif method == "rk":
        states = _propagate_smooth(amp, params, protocol.delta, times, rtol, atol)
    else:
        raise ValueError(f"unknown propagation method {method!r}")
    norms = np.linalg.norm(states, axis=1)
    drift = float(np.max(np.abs(norms - np.linalg.norm(amp))))
    return EDTrajectory(times, states, drift)


def observable_series(states) -> tuple[np.ndarray, np.ndarray]:
    """Coherence and ``<b^dag b>`` per time for a sequence of state vectors."""
    traj = EDTrajectory(np.arange(len(states), dtype=float), np.asarray(states), 0.0)
    return traj.coherence(), traj.b_occupation()


def _propagate_eigen(amp, params, times):
    eig = eigensolve(params)
    coeff = eig.vectors.T @ amp
    phases = np.exp(-1j * np.outer(times - times[0], eig.energies))
    return (phases * coeff) @ eig.vectors.T


def _propagate_smooth(amp, params, delta_of_t, times, rtol, atol):
    h_off = build_hamiltonian(params.with_delta(0.0))
    k = np.arange(params.n_particles + 1)
    nb = (params.n_particles - k).astype(float)

    def rhs(t, y):
        return -1j * (h_off @ y + delta_of_t(t) * nb * y)

    if times.size == 1:
        return amp[None, :].astype(complex)
    sol = solve_ivp(
        rhs,
        (times[0], times[-1]),
        amp.astype(complex),
        method="DOP853",
        t_eval=times,
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise IntegrationError(f"ED propagation failed: {sol.message}", time=float(sol.t[-1]))
    return sol.y.T.copy()
