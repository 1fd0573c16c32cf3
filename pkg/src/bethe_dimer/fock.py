"""Two-mode Fock-space representation of Bethe vectors and monodromy operators.

Basis convention: inside the N-particle sector, index ``k`` is the number of
particles in mode ``a``; the state is ``|k>_a |N-k>_b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .core import (
    DEFAULT_PHI_NORMALIZATION,
    PHI_NORMALIZATIONS,
    ModelParams,
    RootSet,
    as_roots,
    energy,
    off_shell_phi,
    phi_vector,
    theta,
)
from .errors import BetheError

BASIS_CONVENTION = "k = particles in mode a; |k>_a |N-k>_b"


class FockError(BetheError, ValueError):
    pass


@dataclass(frozen=True)
class FockVector:
    """Amplitudes over ``|k>_a |N-k>_b`` for ``k = 0..N``."""

    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if arr.size == 0:
            raise FockError("a FockVector needs at least one amplitude")
        if not np.all(np.isfinite(arr)):
            raise FockError("non-finite amplitude")
        arr.setflags(write=False)
        object.__setattr__(self, "amplitudes", arr)

    @property
    def n_particles(self) -> int:
        return self.amplitudes.size - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "FockVector":
        nrm = self.norm()
        if nrm == 0:
            raise FockError("cannot normalize the zero vector")
        return FockVector(self.amplitudes / nrm)

    def __mul__(self, other: complex) -> "FockVector":
        return FockVector(self.amplitudes * other)

    __rmul__ = __mul__

    def __add__(self, other: "FockVector") -> "FockVector":
        _check_same_sector(self, other)
        return FockVector(self.amplitudes + other.amplitudes)

    def __sub__(self, other: "FockVector") -> "FockVector":
        _check_same_sector(self, other)
        return FockVector(self.amplitudes - other.amplitudes)

    def __repr__(self) -> str:
        return f"FockVector(N={self.n_particles}, norm={self.norm():.6g})"


def vacuum() -> FockVector:
    return FockVector(np.array([1.0 + 0j]))


def fock_state(n_a: int, n_b: int) -> FockVector:
    amp = np.zeros(n_a + n_b + 1, dtype=complex)
    amp[n_a] = 1.0
    return FockVector(amp)


def _check_same_sector(u: FockVector, v: FockVector) -> None:
    if u.n_particles != v.n_particles:
        raise FockError(f"sector mismatch: N={u.n_particles} vs N={v.n_particles}")


@dataclass(frozen=True)
class TwoModeOperator:
    """Operator on the Fock space truncated at ``n_max`` particles.

    ``blocks[n]`` maps the n-particle sector to the ``n + shift`` sector.
    Creation-type operators (``shift = 1``) have no block for ``n = n_max``.
    """

    n_max: int
    shift: int
    blocks: dict

    def block(self, n: int) -> np.ndarray:
        try:
            return self.blocks[n]
        except KeyError:
            raise FockError(f"no block for sector N={n} (n_max={self.n_max})") from None

    def apply(self, vec: FockVector) -> FockVector:
        return FockVector(self.block(vec.n_particles) @ vec.amplitudes)

    __call__ = apply

    def __matmul__(self, other):
        if isinstance(other, FockVector):
            return self.apply(other)
        if isinstance(other, TwoModeOperator):
            blocks = {}
            for n, m in other.blocks.items():
                target = n + other.shift
                if target in self.blocks:
                    blocks[n] = self.blocks[target] @ m
            return TwoModeOperator(min(self.n_max, other.n_max), self.shift + other.shift, blocks)
        return NotImplemented

    def matrix(self) -> np.ndarray:
        """Dense matrix over the full truncated space, sectors stacked by N."""
        offsets = np.cumsum([0] + [n + 1 for n in range(self.n_max + 1)])
        out = np.zeros((offsets[-1], offsets[-1]), dtype=complex)
        for n, m in self.blocks.items():
            t = n + self.shift
            out[offsets[t] : offsets[t + 1], offsets[n] : offsets[n + 1]] = m
        return out


def _number_ops(n: int):
    k = np.arange(n + 1)
    return k.astype(float), (n - k).astype(float)


def _hop_a_dag_b(n: int) -> np.ndarray:
    """``a^dag b`` in sector n: |k> -> sqrt((k+1)(n-k)) |k+1>."""
    m = np.zeros((n + 1, n + 1))
    k = np.arange(n)
    m[k + 1, k] = np.sqrt((k + 1) * (n - k))
    return m


def _b_block(lam: complex, delta: float, c: float, n: int) -> np.ndarray:
    """``B(lam) = (lam - delta/c - c n_a) b^dag - a^dag / c`` from sector n to n+1."""
    m = np.zeros((n + 2, n + 1), dtype=complex)
    k = np.arange(n + 1)
    m[k, k] = (lam - delta / c - c * k) * np.sqrt(n - k + 1)
    m[k + 1, k] = -np.sqrt(k + 1) / c
    return m


def _x_block(delta: float, c: float, n: int) -> np.ndarray:
    """``X = (delta/c) b^dag + c a^dag a b^dag + a^dag / c`` from sector n to n+1."""
    return -_b_block(0.0, delta, c, n)


def build_b_operator(lam: complex, params: ModelParams, n_max: int) -> TwoModeOperator:
    if n_max < 1:
        raise FockError("n_max must be at least 1")
    blocks = {n: _b_block(lam, params.delta, params.c, n) for n in range(n_max)}
    return TwoModeOperator(n_max, 1, blocks)


def build_x_operator(params: ModelParams, n_max: int) -> TwoModeOperator:
    blocks = {n: _x_block(params.delta, params.c, n) for n in range(n_max)}
    return TwoModeOperator(n_max, 1, blocks)


def b_dagger_operator(n_max: int) -> TwoModeOperator:
    blocks = {}
    for n in range(n_max):
        m = np.zeros((n + 2, n + 1), dtype=complex)
        k = np.arange(n + 1)
        m[k, k] = np.sqrt(n - k + 1)
        blocks[n] = m
    return TwoModeOperator(n_max, 1, blocks)


def _a_block(mu: complex, delta: float, c: float, n: int) -> np.ndarray:
    na, nb = _number_ops(n)
    diag = mu**2 - mu * (c * n + delta / c) + delta * nb + c**2 * na * nb
    return np.diag(diag).astype(complex) + _hop_a_dag_b(n)


def _d_block(c: float, n: int) -> np.ndarray:
    # a b^dag is the transpose of a^dag b
    return _hop_a_dag_b(n).T.astype(complex) + np.eye(n + 1) / c**2


def build_a_operator(mu: complex, params: ModelParams, n_max: int) -> TwoModeOperator:
    return TwoModeOperator(
        n_max, 0, {n: _a_block(mu, params.delta, params.c, n) for n in range(n_max + 1)}
    )


def build_d_operator(mu: complex, params: ModelParams, n_max: int) -> TwoModeOperator:
    return TwoModeOperator(n_max, 0, {n: _d_block(params.c, n) for n in range(n_max + 1)})


def build_tau_operator(mu: complex, params: ModelParams, n_max: int) -> TwoModeOperator:
    blocks = {
        n: _a_block(mu, params.delta, params.c, n) + _d_block(params.c, n)
        for n in range(n_max + 1)
    }
    return TwoModeOperator(n_max, 0, blocks)


def hamiltonian_block(delta: float, c: float, n: int) -> np.ndarray:
    """Sector matrix of ``delta b^dag b + a^dag b + a b^dag + c^2 a^dag a b^dag b``."""
    na, nb = _number_ops(n)
    hop = _hop_a_dag_b(n)
    return np.diag(delta * nb + c**2 * na * nb) + hop + hop.T


def apply_a(mu: complex, vec: FockVector, params: ModelParams) -> FockVector:
    return FockVector(_a_block(mu, params.delta, params.c, vec.n_particles) @ vec.amplitudes)


def apply_d(mu: complex, vec: FockVector, params: ModelParams) -> FockVector:
    return FockVector(_d_block(params.c, vec.n_particles) @ vec.amplitudes)


def apply_tau(mu: complex, vec: FockVector, params: ModelParams) -> FockVector:
    n = vec.n_particles
    m = _a_block(mu, params.delta, params.c, n) + _d_block(params.c, n)
    return FockVector(m @ vec.amplitudes)


def apply_x(vec: FockVector, params: ModelParams) -> FockVector:
    return FockVector(_x_block(params.delta, params.c, vec.n_particles) @ vec.amplitudes)


def apply_hamiltonian(vec: FockVector, params: ModelParams) -> FockVector:
    return FockVector(hamiltonian_block(params.delta, params.c, vec.n_particles) @ vec.amplitudes)


# --- Bethe vectors -------------------------------------------------------


def bethe_vector_oracle(roots, params: ModelParams) -> FockVector:
    """``prod_j B(l_j)|vac>`` by explicit operator application."""
    lam = as_roots(roots)
    amp = np.array([1.0 + 0j])
    for n, l in enumerate(lam):
        amp = _b_block(l, params.delta, params.c, n) @ amp
    return FockVector(amp)


def _bethe_amplitudes(lam: np.ndarray, delta: float, c: float) -> np.ndarray:
    """Same as the oracle, returning a raw array (hot path for trajectories)."""
    amp = np.array([1.0 + 0j])
    for n, l in enumerate(lam):
        k = np.arange(n + 1)
        out = np.zeros(n + 2, dtype=complex)
        out[: n + 1] = (l - delta / c - c * k) * np.sqrt(n - k + 1) * amp
        out[1:] -= np.sqrt(k + 1) / c * amp
        amp = out
    return amp


@lru_cache(maxsize=None)
def stirling_d(m: int, k: int) -> int:
    """``D(m, k) = k D(m-1, k) + D(m-1, k-1)`` with ``D(1, 1) = 1``.

    Extended with ``D(0, 0) = 1`` and ``D(m, 0) = 0`` for ``m >= 1`` so the
    Fock expansion can use ``l = 0`` terms.
    """
    if m < 0 or k < 0:
        raise ValueError("stirling_d needs m >= 0 and k >= 0")
    if k > m:
        return 0
    if k == 0:
        return 1 if m == 0 else 0
    if m == 1:
        return 1
    return k * stirling_d(m - 1, k) + stirling_d(m - 1, k - 1)


def stirling_d_nested(m: int, k: int) -> int:
    """Nested-sum evaluation of ``D(m, k)`` over powers ``k^n1 (k-1)^n2 ... 2^n_{k-1}``."""
    if k > m:
        return 0
    if k == 0:
        return 1 if m == 0 else 0
    bases = list(range(k, 1, -1))

    def nest(i: int, remaining: int) -> int:
        if i == len(bases):
            return 1
        return sum(bases[i] ** n * nest(i + 1, remaining - n) for n in range(remaining + 1))

    return nest(0, m - k)


def elementary_symmetric(roots) -> np.ndarray:
    """All elementary symmetric polynomials ``e_0 .. e_N`` of the roots."""
    lam = as_roots(roots)
    e = np.array([1.0 + 0j])
    for l in lam:
        e = np.concatenate([e, [0]]) + np.concatenate([[0], e]) * l
    return e


def elem_sym(m: int, roots) -> complex:
    lam = as_roots(roots)
    if not 0 <= m <= lam.size:
        raise ValueError(f"e_{m} undefined for {lam.size} roots")
    return complex(elementary_symmetric(lam)[m])


def _half_log_fact(k: int, n: int) -> float:
    return 0.5 * (math.lgamma(k + 1) + math.lgamma(n - k + 1))


def ket_coefficient_matrix(n: int, delta: float, c: float) -> np.ndarray:
    """Matrix ``M`` with ``prod B(l_j)|vac> = M @ e(l)`` (closed-form expansion).

    The printed expansion equals ``(-1)^N prod B|vac>``; the sign is folded in
    here so that the result matches the operator product exactly.
    """
    M = np.zeros((n + 1, n + 1))
    sign_n = -1.0 if n % 2 else 1.0
    for m in range(n + 1):
        for l in range(n - m + 1):
            binom = math.comb(n - m, l)
            for k in range(l + 1):
                dlk = stirling_d(l, k)
                if dlk == 0:
                    continue
                mag = math.exp(_half_log_fact(k, n) + (-n + m + 2 * l - 2 * k) * math.log(c))
                M[k, m] += (-1) ** m * mag * dlk * binom * delta ** (n - m - l)
    return sign_n * M


def dual_coefficient_matrix(n: int, c: float) -> np.ndarray:
    """Row-vector coefficients of the dual Bethe vector as ``M @ e(l)``."""
    M = np.zeros((n + 1, n + 1))
    for m in range(n + 1):
        for k in range(n - m + 1):
            dnk = stirling_d(n - m, k)
            if dnk == 0:
                continue
            mag = math.exp(_half_log_fact(k, n) + (n - 2 * k - m) * math.log(c))
            # bra <N-k|_a <k|_b sits at a-count N-k
            M[n - k, m] += (-1) ** m * mag * dnk
    return M


def bethe_vector_closed_form(roots, params: ModelParams) -> FockVector:
    lam = as_roots(roots)
    M = ket_coefficient_matrix(lam.size, params.delta, params.c)
    return FockVector(M @ elementary_symmetric(lam))


def dual_vector_closed_form(roots, params: ModelParams) -> FockVector:
    """Dual (left) Bethe vector coefficients; pair with ``scalar_product``."""
    lam = as_roots(roots)
    M = dual_coefficient_matrix(lam.size, params.c)
    return FockVector(M @ elementary_symmetric(lam))


def roots_from_symmetric(e: np.ndarray) -> np.ndarray:
    """Invert ``elementary_symmetric``: roots of ``x^N - e_1 x^{N-1} + ...``."""
    e = np.asarray(e, dtype=complex)
    n = e.size - 1
    if n == 0:
        return np.zeros(0, dtype=complex)
    signs = (-1.0) ** np.arange(n + 1)
    return np.roots(e * signs)


# --- pairings and observables -------------------------------------------


def scalar_product(dual: FockVector, ket: FockVector) -> complex:
    """Bilinear Bethe pairing ``<dual|ket>`` (no complex conjugation)."""
    _check_same_sector(dual, ket)
    return complex(dual.amplitudes @ ket.amplitudes)


def inner(u: FockVector, v: FockVector) -> complex:
    """Physical inner product ``<u|v>`` with conjugation of ``u``."""
    _check_same_sector(u, v)
    return complex(np.vdot(u.amplitudes, v.amplitudes))


def _a_dag_b_expectation(amp: np.ndarray) -> complex:
    n = amp.size - 1
    k = np.arange(n)
    return complex(np.sum(np.conj(amp[1:]) * amp[:-1] * np.sqrt((k + 1) * (n - k))))


def coherence(vec: FockVector) -> float:
    """Intersite coherence ``|<a^dag b>| / N`` of the normalized state."""
    n = vec.n_particles
    if n == 0:
        raise FockError("coherence is undefined for N = 0")
    nrm2 = float(np.vdot(vec.amplitudes, vec.amplitudes).real)
    if nrm2 == 0:
        raise FockError("coherence of the zero vector")
    return abs(_a_dag_b_expectation(vec.amplitudes)) / nrm2 / n


def b_occupation(vec: FockVector) -> float:
    """``<b^dag b>`` of the normalized state."""
    amp = vec.amplitudes
    nrm2 = float(np.vdot(amp, amp).real)
    if nrm2 == 0:
        raise FockError("occupation of the zero vector")
    nb = vec.n_particles - np.arange(amp.size)
    return float(np.sum(nb * np.abs(amp) ** 2) / nrm2)


def completeness_sum(root_sets: Sequence, params: ModelParams) -> np.ndarray:
    """``sum_sigma |Psi_s><Psi_s| / <Psi_s|Psi_s>`` with Bethe-dual bras."""
    n = params.n_particles
    out = np.zeros((n + 1, n + 1), dtype=complex)
    for rs in root_sets:
        ket = bethe_vector_oracle(rs, params)
        bra = dual_vector_closed_form(rs, params)
        out += np.outer(ket.amplitudes, bra.amplitudes) / scalar_product(bra, ket)
    return out


# --- operator identities (calibration oracles) ---------------------------


def hamiltonian_identity_residual(
    roots, params: ModelParams, normalization: str = DEFAULT_PHI_NORMALIZATION
) -> float:
    """Relative norm residual of ``H Psi = E Psi - sum_n phi_n X Psi_{\\n}``."""
    lam = as_roots(roots)
    psi = bethe_vector_oracle(lam, params)
    lhs = apply_hamiltonian(psi, params).amplitudes
    rhs = energy(lam, params) * psi.amplitudes
    phis = phi_vector(lam, params.delta, params.c, normalization)
    for n in range(lam.size):
        reduced = bethe_vector_oracle(np.delete(lam, n), params)
        rhs = rhs - phis[n] * apply_x(reduced, params).amplitudes
    scale = max(np.linalg.norm(lhs), np.linalg.norm(rhs), 1e-300)
    return float(np.linalg.norm(lhs - rhs) / scale)


def tau_identity_residual(mu: complex, roots, params: ModelParams) -> float:
    """Relative residual of ``tau(mu) Psi = Theta Psi + sum_n phi_n(mu) B(mu) Psi_{\\n}``."""
    lam = as_roots(roots)
    psi = bethe_vector_oracle(lam, params)
    lhs = apply_tau(mu, psi, params).amplitudes
    rhs = theta(mu, lam, params) * psi.amplitudes
    n_part = lam.size
    for n in range(n_part):
        reduced = bethe_vector_oracle(np.delete(lam, n), params)
        b_mu = _b_block(mu, params.delta, params.c, n_part - 1)
        rhs = rhs + off_shell_phi(mu, n, lam, params) * (b_mu @ reduced.amplitudes)
    scale = max(np.linalg.norm(lhs), np.linalg.norm(rhs), 1e-300)
    return float(np.linalg.norm(lhs - rhs) / scale)


def random_roots(rng: np.random.Generator, n: int, scale: float = 1.5) -> np.ndarray:
    """Generic complex roots for off-shell checks (distinct, away from zero)."""
    while True:
        lam = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        if n == 0:
            return lam
        if np.min(np.abs(lam)) > 0.05 and (n < 2 or _min_sep(lam) > 0.05):
            return lam


def _min_sep(lam: np.ndarray) -> float:
    d = np.abs(lam[:, None] - lam[None, :])
    np.fill_diagonal(d, np.inf)
    return float(d.min())


def calibrate_phi_normalization(
    rng: np.random.Generator | None = None,
    n_values: Iterable[int] = (1, 2, 3, 4),
    trials: int = 5,
    tol: float = 1e-10,
) -> tuple[str, dict]:
    """Pick the off-shell normalization under which the Hamiltonian identity holds.

    Returns the winning identifier and the worst residual of every candidate.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    worst = {name: 0.0 for name in PHI_NORMALIZATIONS}
    for n in n_values:
        for _ in range(trials):
            params = ModelParams(rng.uniform(-2, 2), rng.uniform(0.2, 2), n)
            lam = random_roots(rng, n)
            for name in PHI_NORMALIZATIONS:
                worst[name] = max(worst[name], hamiltonian_identity_residual(lam, params, name))
    passing = [name for name, r in worst.items() if r <= tol]
    if len(passing) != 1:
        raise BetheError(f"normalization calibration ambiguous: {worst}")
    return passing[0], worst
