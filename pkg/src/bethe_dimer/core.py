"""Model parameters and closed-form algebraic Bethe ansatz functions.

The dimer Hamiltonian in dimensionless form is

    H = delta * b^dag b + a^dag b + a b^dag + c^2 a^dag a b^dag b,

with rational R-matrix entries ``f(mu, lam) = 1 - c/(mu - lam)`` and
``g(mu, lam) = -c/(mu - lam)`` and vacuum eigenvalues
``a(lam) = lam (lam - delta/c)``, ``d(lam) = c^-2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidRootSetError, ParameterError, PoleError

#: Off-shell normalization obtained from the general spectral-parameter
#: formula at the Hamiltonian point mu = 0. This is the one under which
#: H prod B|vac> = E prod B|vac> - sum_n phi_n X prod_{j!=n} B|vac> holds.
PHI_SPECTRAL_POINT = "spectral-point"
#: Variant without the factor c on the first term. Kept only so that the
#: validation suite can demonstrate that it breaks the operator identity.
PHI_PRINTED = "printed"
PHI_NORMALIZATIONS = (PHI_SPECTRAL_POINT, PHI_PRINTED)
DEFAULT_PHI_NORMALIZATION = PHI_SPECTRAL_POINT


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless dimer parameters.

    Attributes
    ----------
    delta : float
        Detuning (``2 epsilon / J``).
    c : float
        Coupling, ``c**2 = (U - V) / J``. Must be real and positive.
    n_particles : int
        Total particle number ``N``.
    """

    delta: float
    c: float
    n_particles: int

    def __post_init__(self):
        if not (math.isfinite(self.delta) and math.isfinite(self.c)):
            raise ParameterError("delta and c must be finite")
        if self.c == 0:
            raise ParameterError("c = 0 is degenerate: Bethe formulas divide by c")
        if self.c < 0:
            raise ParameterError("c must be positive (real coupling branch)")
        if int(self.n_particles) != self.n_particles or self.n_particles < 0:
            raise ParameterError("n_particles must be a nonnegative integer")
        object.__setattr__(self, "n_particles", int(self.n_particles))
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "c", float(self.c))

    def with_delta(self, delta: float) -> "ModelParams":
        return replace(self, delta=float(delta))

    def with_c(self, c: float) -> "ModelParams":
        return replace(self, c=float(c))

    def with_n(self, n: int) -> "ModelParams":
        return replace(self, n_particles=int(n))


def params_from_physical(epsilon: float, j: float, u: float, v: float, n: int) -> ModelParams:
    """Map physical dimer parameters (epsilon, J, U, V) to ``ModelParams``.

    Uses ``delta = 2 epsilon / J`` and ``c = sqrt((U - V) / J)``.
    """
    if j == 0:
        raise ParameterError("hopping J = 0: the rescaled Hamiltonian is undefined")
    c2 = (u - v) / j
    if c2 < 0:
        raise ParameterError(
            f"(U - V)/J = {c2:g} < 0 gives imaginary c; complex coupling is unsupported"
        )
    if c2 == 0:
        raise ParameterError("U = V gives c = 0, which is degenerate for the Bethe ansatz")
    return ModelParams(delta=2.0 * epsilon / j, c=math.sqrt(c2), n_particles=n)


@dataclass(frozen=True)
class RootSet:
    """Ordered collection of distinct nonzero complex Bethe roots.

    ``sigma`` optionally labels the eigenstate the roots belong to.
    """

    roots: np.ndarray = field(repr=False)
    sigma: int | None = None

    def __post_init__(self):
        arr = np.array(self.roots, dtype=complex).reshape(-1)
        if not np.all(np.isfinite(arr)):
            raise InvalidRootSetError("roots must be finite")
        zero = np.flatnonzero(arr == 0)
        if zero.size:
            raise InvalidRootSetError(f"zero root at index {int(zero[0])}")
        if arr.size > 1:
            d = np.abs(arr[:, None] - arr[None, :])
            np.fill_diagonal(d, np.inf)
            i, j = np.unravel_index(np.argmin(d), d.shape)
            if d[i, j] == 0:
                raise InvalidRootSetError(f"roots {min(i, j)} and {max(i, j)} coincide")
        arr.setflags(write=False)
        object.__setattr__(self, "roots", arr)

    @classmethod
    def of(cls, roots: Iterable[complex], sigma: int | None = None) -> "RootSet":
        return cls(np.asarray(list(roots), dtype=complex), sigma)

    def __len__(self) -> int:
        return self.roots.size

    def __iter__(self):
        return iter(self.roots)

    def __repr__(self) -> str:
        body = ", ".join(f"{z.real:.6g}{z.imag:+.6g}j" for z in self.roots)
        return f"RootSet([{body}], sigma={self.sigma})"

    def sorted(self) -> "RootSet":
        """Return a copy sorted by (real part, imaginary part)."""
        order = np.lexsort((self.roots.imag, self.roots.real))
        return RootSet(self.roots[order], self.sigma)

    def with_sigma(self, sigma: int | None) -> "RootSet":
        return RootSet(self.roots, sigma)

    def min_separation(self) -> float:
        return min_separation(self.roots)

    def min_modulus(self) -> float:
        return float(np.min(np.abs(self.roots))) if len(self) else math.inf


def min_separation(roots: np.ndarray) -> float:
    roots = np.asarray(roots)
    if roots.size < 2:
        return math.inf
    d = np.abs(roots[:, None] - roots[None, :])
    np.fill_diagonal(d, np.inf)
    return float(d.min())


def _as_array(roots) -> np.ndarray:
    if isinstance(roots, RootSet):
        return roots.roots
    return np.asarray(roots, dtype=complex).reshape(-1)


def rmatrix_f(mu: complex, lam: complex, c: float) -> complex:
    if mu == lam:
        raise PoleError("f(mu, lam) has a pole at mu = lam")
    return 1.0 - c / (mu - lam)


def rmatrix_g(mu: complex, lam: complex, c: float) -> complex:
    if mu == lam:
        raise PoleError("g(mu, lam) has a pole at mu = lam")
    return -c / (mu - lam)


def vacuum_eigenvalues(lam: complex, params: ModelParams) -> tuple[complex, complex]:
    """Eigenvalues ``(a(lam), d(lam))`` of A and D on the pseudo-vacuum."""
    c = params.c
    return lam * (lam - params.delta / c), 1.0 / c**2


def _check_off_roots(mu: complex, roots: np.ndarray) -> None:
    hit = np.flatnonzero(roots == mu)
    if hit.size:
        raise PoleError(f"spectral parameter coincides with root {int(hit[0])}")


def theta(mu: complex, roots, params: ModelParams) -> complex:
    """Transfer-matrix eigenvalue ``a(mu) prod f(mu, l_j) + d(mu) prod f(l_j, mu)``."""
    lam = _as_array(roots)
    _check_off_roots(mu, lam)
    a, d = vacuum_eigenvalues(mu, params)
    c = params.c
    return complex(a * np.prod(1.0 - c / (mu - lam)) + d * np.prod(1.0 - c / (lam - mu)))


def off_shell_phi(mu: complex, n: int, roots, params: ModelParams) -> complex:
    """Coefficient of ``B(mu) prod_{j != n} B(l_j)|vac>`` in ``tau(mu) prod B(l_j)|vac>``.

    ``n`` is a zero-based root index.
    """
    lam = _as_array(roots)
    if not 0 <= n < lam.size:
        raise IndexError(f"root index {n} out of range for {lam.size} roots")
    _check_off_roots(mu, lam)
    c = params.c
    ln = lam[n]
    others = np.delete(lam, n)
    if np.any(others == ln):
        raise PoleError("coincident roots")
    a_n, d_n = vacuum_eigenvalues(ln, params)
    big = -c / (ln - mu) * np.prod(1.0 - c / (ln - others))
    big_bar = -c / (mu - ln) * np.prod(1.0 - c / (others - ln))
    return complex(a_n * big + d_n * big_bar)


def phi_vector(
    lam: np.ndarray, delta: float, c: float, normalization: str = DEFAULT_PHI_NORMALIZATION
) -> np.ndarray:
    """All dimer off-shell functions at the Hamiltonian point, vectorized.

    No validation is performed; callers guarantee distinct nonzero roots.
    """
    lam = np.asarray(lam, dtype=complex)
    d = lam[:, None] - lam[None, :]
    np.fill_diagonal(d, 1.0)
    u = 1.0 - c / d
    w = 1.0 + c / d
    np.fill_diagonal(u, 1.0)
    np.fill_diagonal(w, 1.0)
    F = u.prod(axis=1)
    G = w.prod(axis=1)
    first = (delta - c * lam) if normalization == PHI_SPECTRAL_POINT else (delta / c - lam)
    return first * F + G / (c * lam)


def _exclusive_products(u: np.ndarray) -> np.ndarray:
    """``P[n, j] = prod_{i != j} u[n, i]`` without dividing by ``u[n, j]``."""
    n = u.shape[1]
    pre = np.ones((u.shape[0], n + 1), dtype=u.dtype)
    suf = np.ones((u.shape[0], n + 1), dtype=u.dtype)
    for i in range(n):
        pre[:, i + 1] = pre[:, i] * u[:, i]
        suf[:, n - i - 1] = suf[:, n - i] * u[:, n - i - 1]
    return pre[:, :n] * suf[:, 1:]


def phi_and_jacobian(lam: np.ndarray, delta: float, c: float) -> tuple[np.ndarray, np.ndarray]:
    """Off-shell functions and their analytic Jacobian ``d phi_n / d l_j``.

    The Jacobian uses exclusive products so factors that vanish (roots
    exactly ``c`` apart) do not produce 0/0.
    """
    lam = np.asarray(lam, dtype=complex)
    N = lam.size
    d = lam[:, None] - lam[None, :]
    np.fill_diagonal(d, 1.0)
    u = 1.0 - c / d
    w = 1.0 + c / d
    np.fill_diagonal(u, 1.0)
    np.fill_diagonal(w, 1.0)
    F = u.prod(axis=1)
    G = w.prod(axis=1)
    A = delta - c * lam
    Bt = 1.0 / (c * lam)
    phi = A * F + Bt * G
    # d u_nj / d l_n = c / d_nj^2, d w_nj / d l_n = -c / d_nj^2
    du = c / d**2
    np.fill_diagonal(du, 0.0)
    PF = _exclusive_products(u) * du
    PG = -_exclusive_products(w) * du
    J = -(A[:, None] * PF + Bt[:, None] * PG)
    idx = np.arange(N)
    J[idx, idx] = A * PF.sum(axis=1) + Bt * PG.sum(axis=1) - c * F - G / (c * lam**2)
    return phi, J


def off_shell_phi_hamiltonian(
    n: int, roots, params: ModelParams, normalization: str = DEFAULT_PHI_NORMALIZATION
) -> complex:
    """Dimer off-shell function entering the static and dynamical Bethe equations.

    ``n`` is zero-based. The default normalization equals
    ``off_shell_phi(0, n, roots, params)``.
    """
    if normalization not in PHI_NORMALIZATIONS:
        raise ValueError(f"unknown normalization {normalization!r}")
    lam = _as_array(roots)
    if not 0 <= n < lam.size:
        raise IndexError(f"root index {n} out of range for {lam.size} roots")
    if np.any(lam == 0):
        raise PoleError("zero root: phi contains 1/(c lambda_n)")
    if lam.size > 1 and min_separation(lam) == 0:
        raise PoleError("coincident roots")
    return complex(phi_vector(lam, params.delta, params.c, normalization)[n])


def energy(roots, params: ModelParams) -> complex:
    """Bethe energy ``-c^-2 + c^-2 prod_j (1 - c / l_j)``."""
    lam = _as_array(roots)
    if np.any(lam == 0):
        raise PoleError("zero root in energy")
    c = params.c
    return complex((np.prod(1.0 - c / lam) - 1.0) / c**2)


def max_residual(roots, params: ModelParams) -> float:
    lam = _as_array(roots)
    if lam.size == 0:
        return 0.0
    return float(np.max(np.abs(phi_vector(lam, params.delta, params.c))))


def as_roots(roots: RootSet | Sequence[complex] | np.ndarray) -> np.ndarray:
    """Public alias for coercing any root container to a complex array."""
    return _as_array(roots)
