from __future__ import annotations

import math

import numpy as np
import pytest

from bethe_dimer.core import (
    PHI_PRINTED,
    ModelParams,
    RootSet,
    energy,
    off_shell_phi,
    off_shell_phi_hamiltonian,
    params_from_physical,
    phi_and_jacobian,
    phi_vector,
    rmatrix_f,
    rmatrix_g,
    theta,
    vacuum_eigenvalues,
)
from bethe_dimer.errors import InvalidRootSetError, ParameterError, PoleError


def test_params_validation():
    with pytest.raises(ParameterError):
        ModelParams(0.0, 0.0, 1)
    with pytest.raises(ParameterError):
        ModelParams(0.0, -1.0, 1)
    with pytest.raises(ParameterError):
        ModelParams(math.nan, 1.0, 1)
    with pytest.raises(ParameterError):
        ModelParams(0.0, 1.0, -1)
    p = ModelParams(1, 2, 3)
    assert isinstance(p.delta, float) and p.with_delta(0.5).delta == 0.5


def test_params_from_physical():
    p = params_from_physical(epsilon=0.5, j=2.0, u=3.0, v=1.0, n=4)
    assert p.delta == pytest.approx(0.5)
    assert p.c == pytest.approx(1.0)
    with pytest.raises(ParameterError, match="J = 0"):
        params_from_physical(1, 0, 1, 0, 1)
    with pytest.raises(ParameterError, match="imaginary"):
        params_from_physical(1, 1, 0, 1, 1)
    with pytest.raises(ParameterError, match="U = V"):
        params_from_physical(1, 1, 1, 1, 1)


def test_rootset_invariants():
    with pytest.raises(InvalidRootSetError):
        RootSet.of([1.0, 1.0])
    with pytest.raises(InvalidRootSetError):
        RootSet.of([0.0, 1.0])
    with pytest.raises(InvalidRootSetError):
        RootSet.of([np.inf])
    rs = RootSet.of([2 + 1j, -1, 2 - 1j], sigma=3).sorted()
    assert list(rs.roots) == [-1, 2 - 1j, 2 + 1j]
    assert rs.sigma == 3
    with pytest.raises(ValueError):
        rs.roots[0] = 5


def test_rmatrix_and_vacuum():
    assert rmatrix_f(2.0, 1.0, 1.0) == 0.0
    assert rmatrix_g(2.0, 1.0, 0.5) == -0.5
    with pytest.raises(PoleError):
        rmatrix_f(1.0, 1.0, 1.0)
    with pytest.raises(PoleError):
        rmatrix_g(1.0, 1.0, 1.0)
    a, d = vacuum_eigenvalues(2.0, ModelParams(1.0, 0.5, 0))
    assert a == 2.0 * (2.0 - 2.0) and d == 4.0


def test_theta_on_empty_set_is_vacuum_sum():
    p = ModelParams(0.3, 0.7, 0)
    a, d = vacuum_eigenvalues(1.1, p)
    assert theta(1.1, [], p) == pytest.approx(a + d)


def test_hamiltonian_phi_is_spectral_point():
    rng = np.random.default_rng(0)
    p = ModelParams(0.4, 0.8, 3)
    lam = rng.normal(size=3) + 1j * rng.normal(size=3)
    for n in range(3):
        assert off_shell_phi_hamiltonian(n, lam, p) == pytest.approx(off_shell_phi(0.0, n, lam, p))


def test_phi_single_root_quadratic():
    # N=1, delta=0, c=1: phi = 1/lam - lam, zero at +-1
    p = ModelParams(0.0, 1.0, 1)
    assert abs(off_shell_phi_hamiltonian(0, [1.0], p)) < 1e-15
    assert abs(off_shell_phi_hamiltonian(0, [-1.0], p)) < 1e-15
    assert off_shell_phi_hamiltonian(0, [2.0], p) == pytest.approx(-1.5)


def test_phi_errors():
    p = ModelParams(0.0, 1.0, 2)
    with pytest.raises(IndexError):
        off_shell_phi_hamiltonian(2, [1.0, 2.0], p)
    with pytest.raises(PoleError):
        off_shell_phi_hamiltonian(0, [0.0, 2.0], p)
    with pytest.raises(PoleError):
        off_shell_phi(1.0, 0, [1.0, 2.0], p)
    with pytest.raises(ValueError):
        off_shell_phi_hamiltonian(0, [1.0, 2.0], p, normalization="bogus")


def test_printed_normalization_differs():
    p = ModelParams(0.5, 0.6, 2)
    lam = [1.0 + 0.2j, -0.7]
    assert abs(off_shell_phi_hamiltonian(0, lam, p) -
               off_shell_phi_hamiltonian(0, lam, p, PHI_PRINTED)) > 1e-3


def test_energy_examples():
    p = ModelParams(0.0, 1.0, 1)
    assert energy([1.0], p) == pytest.approx(-1.0)
    assert energy([-1.0], p) == pytest.approx(1.0)
    assert energy([], p) == 0.0


def test_permutation_invariance(rng):
    p = ModelParams(0.3, 0.9, 4)
    lam = rng.normal(size=4) + 1j * rng.normal(size=4)
    perm = rng.permutation(4)
    assert energy(lam, p) == pytest.approx(energy(lam[perm], p))
    np.testing.assert_allclose(
        np.sort_complex(phi_vector(lam, p.delta, p.c)),
        np.sort_complex(phi_vector(lam[perm], p.delta, p.c)),
        rtol=1e-12,
    )


def test_jacobian_matches_finite_differences(rng):
    for n in (1, 2, 4, 6):
        lam = 2 * (rng.normal(size=n) + 1j * rng.normal(size=n))
        delta, c = 0.7, 0.6
        _, jac = phi_and_jacobian(lam, delta, c)
        h = 1e-7
        fd = np.empty((n, n), dtype=complex)
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            fd[:, j] = (phi_vector(lam + e, delta, c) - phi_vector(lam - e, delta, c)) / (2 * h)
        np.testing.assert_allclose(jac, fd, rtol=1e-6, atol=1e-7)


def test_jacobian_when_roots_differ_by_c():
    # a vanishing factor 1 - c/(l_n - l_j) must not produce nan
    phi, jac = phi_and_jacobian(np.array([1.5 + 0j, 1.0 + 0j]), 0.2, 0.5)
    assert np.all(np.isfinite(jac)) and np.all(np.isfinite(phi))
