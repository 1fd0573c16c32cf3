from __future__ import annotations

import numpy as np
import pytest

from bethe_dimer.core import ModelParams
from bethe_dimer.ed import build_hamiltonian, eigensolve, observable_series, propagate
from bethe_dimer.errors import ParameterError
from bethe_dimer.fock import FockVector, fock_state
from bethe_dimer.protocols import DriveProtocol


def test_n1_matrix():
    h = build_hamiltonian(ModelParams(0.5, 1.0, 1))
    # basis index k = n_a: |0,1>, |1,0>
    np.testing.assert_allclose(h, [[0.5, 1.0], [1.0, 0.0]])


def test_n2_matrix():
    d, c = 0.3, 0.8
    h = build_hamiltonian(ModelParams(d, c, 2))
    s2 = np.sqrt(2.0)
    expected = [[2 * d, s2, 0], [s2, d + c * c, s2], [0, s2, 0]]
    np.testing.assert_allclose(h, expected)


def test_eigensolve_sorted_and_orthonormal():
    spec = eigensolve(ModelParams(0.7, 0.5, 6))
    assert np.all(np.diff(spec.energies) >= 0)
    np.testing.assert_allclose(spec.vectors.T @ spec.vectors, np.eye(7), atol=1e-12)
    assert isinstance(spec.ground_state, FockVector)


def test_constant_drive_is_stationary():
    p = ModelParams(0.7, 0.5, 4)
    spec = eigensolve(p)
    times = np.linspace(0, 5, 11)
    for method in ("eigen", "rk"):
        tr = propagate(spec.state(2), DriveProtocol.constant(p.delta), times, p, method=method)
        overlap = np.abs(tr.states @ spec.vectors[:, 2])
        np.testing.assert_allclose(overlap, 1.0, atol=1e-10)


def test_eigen_and_rk_agree_after_quench():
    p = ModelParams(0.2, 0.9, 3)
    times = np.linspace(0, 4, 9)
    psi0 = fock_state(1, 2)
    drive = DriveProtocol.quench(0.0, 0.2)
    a = propagate(psi0, drive, times, p, method="eigen").states
    b = propagate(psi0, drive, times, p, method="rk").states
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_norm_drift_small_for_driven():
    p = ModelParams(0.7, 0.5, 5)
    tr = propagate(fock_state(2, 3), DriveProtocol.aperiodic(0.7), np.linspace(0, 3, 7), p)
    assert tr.max_norm_drift < 1e-9
    nu, nb = tr.coherence(), tr.b_occupation()
    assert np.all((nu >= 0) & (nu <= 0.5 + 1e-12))
    assert np.all((nb >= -1e-12) & (nb <= 5 + 1e-12))


def test_observable_series_fock_states():
    nu, nb = observable_series([fock_state(0, 2).amplitudes, fock_state(2, 0).amplitudes])
    np.testing.assert_allclose(nu, [0, 0])
    np.testing.assert_allclose(nb, [2, 0])


def test_propagate_errors():
    p = ModelParams(0.0, 1.0, 2)
    drive = DriveProtocol.constant(0.0)
    with pytest.raises(ParameterError):
        propagate(fock_state(1, 0), drive, [0.0, 1.0], p)
    with pytest.raises(ParameterError):
        propagate(fock_state(0, 2), drive, [1.0, 0.0], p)
    with pytest.raises(ParameterError):
        propagate(fock_state(0, 2), DriveProtocol.aperiodic(0.0), [0.0, 1.0], p, method="eigen")
