"""Solutions of the static Bethe equations ``phi_n({lambda}) = 0``.

All N+1 solutions of a sector are enumerated through the polynomial
(Baxter TQ) form of the equations. With ``x = c * lambda`` and
``P(x) = prod_j (x - c lambda_j)``, the Bethe equations are equivalent to

    x (delta - x) P(x - c^2) - P(x + c^2) = P(x) (-x^2 + q1 x + q0),

with ``q1 = delta + N c^2``. The map ``P -> q0 P`` is linear on monic
polynomials of degree N, so every eigenvector of an (N+1) x (N+1) matrix
gives one root set, and ``E = -(1 + q0) / c^2``. Roots are then polished
by Newton iteration on the original equations, switching to
multiprecision when double precision cannot resolve them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
from numpy.polynomial import hermite

from .core import ModelParams, RootSet, as_roots, energy, min_separation, phi_and_jacobian
from .errors import (
    BranchLostError,
    ConvergenceError,
    IncompleteSpectrumError,
    InvalidRootSetError,
    ParameterError,
    SingularJacobianError,
)

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12
DEFAULT_STEPS = 32
MP_DPS = 40
# roots closer than this are treated as coincident
COLLISION_DISTANCE = 1e-8


@dataclass(frozen=True)
class SpectrumSolution:
    """All Bethe solutions of one sector, sorted by ascending energy.

    Attributes
    ----------
    root_sets : tuple of RootSet
        One root set per state; ``root_sets[s].sigma == s``.
    energies : ndarray
        Real parts of the Bethe energies computed from the roots.
    residuals : ndarray
        ``max_n |phi_n|`` per state at the precision the roots were solved in.
    double_residuals : ndarray
        The same residual evaluated from the stored double-precision roots.
        It exceeds the tolerance for near-singular states (roots pinned
        close to ``0, c, 2c, ...``) that only multiprecision resolves.
    multiprecision : tuple of bool
        Whether a state needed the multiprecision fallback.
    crossings : tuple
        ``(step, order)`` records where continuation saw the energy order change.
    """

    params: ModelParams
    root_sets: tuple
    energies: np.ndarray
    residuals: np.ndarray
    double_residuals: np.ndarray
    multiprecision: tuple = ()
    crossings: tuple = ()
    tq_energies: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.root_sets)

    def well_conditioned(self, tol: float = DEFAULT_TOL) -> tuple:
        """Per state: do the double-precision roots satisfy the equations to ``tol``?"""
        return tuple(bool(r <= tol) for r in self.double_residuals)

    @property
    def ground_state(self) -> RootSet:
        return self.root_sets[int(np.argmin(self.energies))]

    def max_relative_error(self, reference: np.ndarray) -> float:
        """Largest ``|E - E_ref| / max(1, |E_ref|)`` after sorting both sides."""
        ref = np.sort(np.asarray(reference, dtype=float))
        mine = np.sort(self.energies)
        if ref.size != mine.size:
            raise ValueError(f"{mine.size} Bethe energies vs {ref.size} reference values")
        return float(np.max(np.abs(mine - ref) / np.maximum(1.0, np.abs(ref))))


# --- Newton iteration ------------------------------------------------------


def solve_newton(
    seed,
    params: ModelParams,
    tol: float = DEFAULT_TOL,
    max_iter: int = 50,
) -> RootSet:
    """Damped Newton iteration on ``phi_n = 0`` with the analytic Jacobian.

    Raises
    ------
    InvalidRootSetError
        If the seed has coincident or zero roots.
    SingularJacobianError
        If the Jacobian becomes singular or roots collide during iteration.
    ConvergenceError
        If ``max_n |phi_n| <= tol`` is not reached in ``max_iter`` iterations.
    """
    sigma = seed.sigma if isinstance(seed, RootSet) else None
    lam = RootSet(as_roots(seed)).roots.astype(complex)
    if lam.size != params.n_particles:
        raise ParameterError(f"seed has {lam.size} roots but N = {params.n_particles}")
    if lam.size == 0:
        return RootSet(lam, sigma)
    delta, c = params.delta, params.c
    phi, jac = phi_and_jacobian(lam, delta, c)
    res = float(np.max(np.abs(phi)))
    for it in range(max_iter):
        if res <= tol:
            return RootSet(lam, sigma)
        try:
            step = np.linalg.solve(jac, -phi)
        except np.linalg.LinAlgError:
            raise SingularJacobianError("singular Jacobian", res, it) from None
        if not np.all(np.isfinite(step)):
            raise SingularJacobianError("non-finite Newton step", res, it)
        # backtrack until the residual decreases
        alpha = 1.0
        for _ in range(12):
            trial = lam + alpha * step
            if np.all(trial != 0) and min_separation(trial) > 0:
                t_phi, t_jac = phi_and_jacobian(trial, delta, c)
                t_res = float(np.max(np.abs(t_phi)))
                if np.isfinite(t_res) and t_res < res:
                    break
            alpha *= 0.5
        else:
            raise ConvergenceError("line search failed to reduce the residual", res, it)
        lam, phi, jac, res = trial, t_phi, t_jac, t_res
        if min_separation(lam) < COLLISION_DISTANCE * max(1.0, float(np.max(np.abs(lam)))):
            raise SingularJacobianError("roots collided during Newton iteration", res, it)
    if res <= tol:
        return RootSet(lam, sigma)
    raise ConvergenceError(f"no convergence after {max_iter} iterations", res, max_iter)


# --- polynomial (TQ) formulation -----------------------------------------


def tq_operator(n: int, delta: float, c: float) -> np.ndarray:
    """Matrix of ``P -> q0 P`` on monomial coefficients ``x^0 .. x^N``.

    Column m holds the coefficients of
    ``x(delta - x)(x - c^2)^m - (x + c^2)^m - x^m (q1 x - x^2)`` up to degree N;
    the higher-degree terms cancel by the choice of ``q1``.
    """
    eps = c * c
    q1 = delta + n * eps
    L = np.zeros((n + 1, n + 1))
    for m in range(n + 1):
        col = np.zeros(m + 3)
        for i in range(m + 1):
            a = math.comb(m, i) * (-eps) ** (m - i)
            col[i + 1] += delta * a
            col[i + 2] -= a
            col[i] -= math.comb(m, i) * eps ** (m - i)
        col[m + 1] -= q1
        col[m + 2] += 1.0
        L[: min(m + 3, n + 1), m] = col[: n + 1]
    return L


def tq_operator_mp(n: int, delta: float, c: float) -> mpmath.matrix:
    """Multiprecision copy of ``tq_operator`` (uses the current mpmath precision)."""
    delta, c = mpmath.mpf(delta), mpmath.mpf(c)
    eps = c * c
    q1 = delta + n * eps
    L = mpmath.zeros(n + 1, n + 1)
    for m in range(n + 1):
        col = [mpmath.mpf(0)] * (m + 3)
        for i in range(m + 1):
            a = mpmath.binomial(m, i) * (-eps) ** (m - i)
            col[i + 1] += delta * a
            col[i + 2] -= a
            col[i] -= mpmath.binomial(m, i) * eps ** (m - i)
        col[m + 1] -= q1
        col[m + 2] += 1
        for i in range(min(m + 3, n + 1)):
            L[i, m] = col[i]
    return L


def _tq_eigen(params: ModelParams):
    n, c = params.n_particles, params.c
    w, v = np.linalg.eig(tq_operator(n, params.delta, c))
    energies = -(1.0 + w.real) / c**2
    order = np.argsort(energies)
    return energies[order], w.real[order], v[:, order]


def _roots_from_coefficients(p: np.ndarray, c: float) -> np.ndarray:
    """Roots ``lambda = x / c`` of the polynomial with ascending coefficients ``p``."""
    p = np.asarray(p, dtype=complex)
    return np.roots(p[::-1] / p[-1]) / c


def _energy_scale(e: float) -> float:
    return max(1.0, abs(e))


def _mp_phi(lam, delta, c):
    out = []
    for n, ln in enumerate(lam):
        F = G = mpmath.mpf(1)
        for j, lj in enumerate(lam):
            if j != n:
                F *= 1 - c / (ln - lj)
                G *= 1 + c / (ln - lj)
        out.append((delta - c * ln) * F + G / (c * ln))
    return out


def _mp_newton(lam, delta, c, iterations: int = 40):
    n = len(lam)
    lam = mpmath.matrix(lam)
    target = mpmath.mpf(10) ** (-(mpmath.mp.dps - 5))
    h = mpmath.mpf(10) ** (-(mpmath.mp.dps // 2))
    for _ in range(iterations):
        F = mpmath.matrix(_mp_phi(list(lam), delta, c))
        J = mpmath.zeros(n, n)
        for j in range(n):
            shifted = lam.copy()
            shifted[j] += h
            Fp = _mp_phi(list(shifted), delta, c)
            for i in range(n):
                J[i, j] = (Fp[i] - F[i]) / h
        step = mpmath.lu_solve(J, -F)
        lam = lam + step
        if mpmath.norm(step) < target * max(1, mpmath.norm(lam)):
            break
    return [lam[i] for i in range(n)]


def _mp_energy(lam, c):
    prod = mpmath.mpf(1)
    for l in lam:
        prod *= 1 - c / l
    return (prod - 1) / c**2


def _solve_state_mp(params: ModelParams, q0_guess: float):
    """Root set of the TQ eigenvector nearest ``q0_guess`` in multiprecision.

    Returns double-precision roots together with the energy and residual
    evaluated from the multiprecision roots.
    """
    n = params.n_particles
    with mpmath.workdps(MP_DPS):
        L = tq_operator_mp(n, params.delta, params.c)
        shift = mpmath.mpf(q0_guess) + mpmath.mpf(10) ** (-MP_DPS // 2)
        A = L - shift * mpmath.eye(n + 1)
        v = mpmath.matrix([1] * (n + 1))
        for _ in range(6):
            v = mpmath.lu_solve(A, v)
            v = v / mpmath.norm(v)
        coeffs = [v[i] / v[n] for i in range(n + 1)]
        c, delta = mpmath.mpf(params.c), mpmath.mpf(params.delta)
        x = mpmath.polyroots(coeffs[::-1], maxsteps=400, extraprec=4 * MP_DPS)
        lam = _mp_newton([xi / c for xi in x], delta, c)
        e = float(mpmath.re(_mp_energy(lam, c)))
        res = float(max(abs(f) for f in _mp_phi(lam, delta, c)))
        return np.array([complex(z) for z in lam]), e, res


def _solve_state(params: ModelParams, p: np.ndarray, q0: float, e_tq: float, tol: float):
    """Polish one TQ eigenvector into a root set.

    Returns ``(roots, energy, residual, used_mp)`` where energy and residual
    come from whichever precision produced the roots.
    """
    try:
        lam = solve_newton(_roots_from_coefficients(p, params.c), params, tol=tol).roots
        e = energy(lam, params).real
        if abs(e - e_tq) <= 1e-10 * _energy_scale(e_tq):
            phi, _ = phi_and_jacobian(lam, params.delta, params.c)
            return lam, e, float(np.max(np.abs(phi))), False
        log.debug("double-precision roots landed on another state (E=%g vs %g)", e, e_tq)
    except (ConvergenceError, InvalidRootSetError):
        log.debug("double-precision polish failed; switching to multiprecision")
    return (*_solve_state_mp(params, q0), True)


def solve_spectrum(params: ModelParams, tol: float = DEFAULT_TOL) -> SpectrumSolution:
    """All N+1 Bethe solutions of the sector, sorted by energy.

    Raises
    ------
    IncompleteSpectrumError
        If fewer than N+1 distinct root sets are obtained.
    """
    n = params.n_particles
    if n < 1:
        raise ParameterError("solve_spectrum needs N >= 1")
    e_tq, q0, vecs = _tq_eigen(params)
    found = []
    for s in range(n + 1):
        try:
            found.append(_solve_state(params, vecs[:, s], q0[s], e_tq[s], tol))
        except (ConvergenceError, InvalidRootSetError, ZeroDivisionError, ValueError) as exc:
            log.warning("state %d lost: %s", s, exc)
    distinct = _count_distinct(np.array([f[1] for f in found]))
    if distinct < n + 1:
        raise IncompleteSpectrumError(
            f"found {distinct} distinct solutions out of {n + 1}", distinct, n + 1
        )
    return _assemble(params, found, e_tq)


def _count_distinct(energies: np.ndarray) -> int:
    e = np.sort(energies)
    if e.size == 0:
        return 0
    gaps = np.diff(e) > 1e-9 * np.maximum(1.0, np.abs(e[1:]))
    return int(1 + np.count_nonzero(gaps))


def _assemble(params, found, e_tq=None, crossings=()) -> SpectrumSolution:
    """Build a solution from ``(roots, energy, residual, used_mp)`` records."""
    order = np.argsort([f[1] for f in found], kind="stable")
    root_sets, energies, residuals, fast, mp_flags = [], [], [], [], []
    for s, i in enumerate(order):
        lam, e, res, used_mp = found[i]
        rs = RootSet(lam, sigma=s).sorted()
        phi, _ = phi_and_jacobian(rs.roots, params.delta, params.c)
        root_sets.append(rs)
        energies.append(e)
        residuals.append(res)
        fast.append(float(np.max(np.abs(phi))))
        mp_flags.append(bool(used_mp))
    return SpectrumSolution(
        params=params,
        root_sets=tuple(root_sets),
        energies=np.array(energies),
        residuals=np.array(residuals),
        double_residuals=np.array(fast),
        multiprecision=tuple(mp_flags),
        crossings=tuple(crossings),
        tq_energies=None if e_tq is None else np.sort(e_tq),
    )


def ground_state_roots(params: ModelParams, tol: float = DEFAULT_TOL) -> RootSet:
    """Root set of the lowest-energy state."""
    return solve_spectrum(params, tol).root_sets[0]


# --- asymptotic seeds and continuation -------------------------------------


def asymptotic_seeds(n: int, k: int, delta: float, c: float) -> np.ndarray:
    """Approximate roots for small ``c``.

    As ``c -> 0`` the roots of a state collapse onto the two zeros
    ``x_pm = (delta +- sqrt(delta^2 + 4)) / 2`` of ``delta - x + 1/x``, with
    ``k`` roots near ``x_+ / c`` and ``n - k`` near ``x_- / c``. Inside each
    cluster of size m the offsets are proportional to the zeros of the
    Hermite polynomial ``H_m``.
    """
    if not 0 <= k <= n:
        raise ValueError(f"cluster size k={k} outside 0..{n}")
    root = math.sqrt(delta * delta + 4.0)
    clusters = [((delta + root) / 2.0, root, k), ((delta - root) / 2.0, -root, n - k)]
    seeds = []
    for centre, slope, m in clusters:
        if m == 0:
            continue
        offsets = hermite.hermgauss(m)[0] if m > 1 else np.zeros(1)
        width = np.sqrt(complex(2.0 / slope))
        seeds.extend(centre / c + width * offsets)
    return np.array(seeds, dtype=complex)


def _interpolate(p_from: ModelParams, p_to: ModelParams, s: float) -> ModelParams:
    delta = (1.0 - s) * p_from.delta + s * p_to.delta
    c = math.exp((1.0 - s) * math.log(p_from.c) + s * math.log(p_to.c))
    return ModelParams(delta, c, p_from.n_particles)


def continuation_path(
    params_from: ModelParams,
    params_to: ModelParams,
    steps: int = DEFAULT_STEPS,
    tol: float = DEFAULT_TOL,
    start: SpectrumSolution | None = None,
    max_refinements: int = 6,
) -> SpectrumSolution:
    """Track every branch from ``params_from`` to ``params_to``.

    The path is linear in ``delta`` and geometric in ``c``. Each branch is
    followed by Newton iteration from a secant predictor; a failing step is
    retried with the step count doubled, up to ``max_refinements`` times.
    Changes of the energy ordering along the path are recorded in
    ``crossings``.

    Raises
    ------
    BranchLostError
        If Newton fails at some step even after refinement.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if params_from.n_particles != params_to.n_particles:
        raise ParameterError("continuation cannot change the particle number")
    sol = start if start is not None else solve_spectrum(params_from, tol)
    if params_from == params_to:
        return sol
    current = [rs.roots.copy() for rs in sol.root_sets]
    previous = [None] * len(current)
    s_prev, s_cur = None, 0.0
    order = list(range(len(current)))
    crossings = []
    n_steps = steps
    step_index = 0
    while s_cur < 1.0:
        s_next = min(1.0, s_cur + 1.0 / n_steps)
        target = _interpolate(params_from, params_to, s_next)
        try:
            nxt = []
            for b, lam in enumerate(current):
                pred = lam
                if previous[b] is not None:
                    pred = lam + (lam - previous[b]) * (s_next - s_cur) / (s_cur - s_prev)
                nxt.append(_track_step(pred, lam, target, tol, step_index, b))
        except BranchLostError:
            if n_steps >= steps * 2**max_refinements:
                raise
            n_steps *= 2
            continue
        previous, current = current, nxt
        s_prev, s_cur = s_cur, s_next
        step_index += 1
        energies = [energy(lam, target).real for lam in current]
        new_order = list(np.argsort(energies, kind="stable"))
        if new_order != order:
            crossings.append((step_index, tuple(int(i) for i in new_order)))
            order = new_order
    records = []
    for lam in current:
        phi, _ = phi_and_jacobian(lam, target.delta, target.c)
        records.append((lam, energy(lam, target).real, float(np.max(np.abs(phi))), False))
    return _assemble(params_to, records, crossings=crossings)


def _track_step(pred, fallback, target, tol, step_index, branch):
    for guess in (pred, fallback):
        try:
            lam = solve_newton(guess, target, tol=tol, max_iter=30).roots
        except (ConvergenceError, InvalidRootSetError):
            continue
        # reject jumps much larger than the local motion of the branch
        if np.max(np.abs(lam - pred)) <= 0.25 * max(min_separation(lam), 1.0):
            return lam
    raise BranchLostError(f"branch {branch} lost at step {step_index}", step_index, branch)
