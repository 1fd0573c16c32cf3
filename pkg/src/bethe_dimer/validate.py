"""Property suites that cross-check every layer against independent oracles.

Each check returns a ``PropertyResult`` holding the worst observed value,
the tolerance it was held to and enough inputs to replay a failure.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import DEFAULT_PHI_NORMALIZATION, ModelParams, energy
from .dynamics import CloseApproachWarning, evolve, orthogonality_residuals, quench_initial
from .ed import build_hamiltonian, eigensolve, propagate
from .fock import (
    FockVector,
    bethe_vector_closed_form,
    bethe_vector_oracle,
    coherence,
    completeness_sum,
    dual_vector_closed_form,
    hamiltonian_identity_residual,
    random_roots,
    scalar_product,
    stirling_d,
    stirling_d_nested,
    tau_identity_residual,
)
from .protocols import DriveProtocol
from .static import solve_spectrum


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    worst: float
    tolerance: float
    detail: str = ""
    inputs: dict = field(default_factory=dict)

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {self.name}: worst={self.worst:.3e} tol={self.tolerance:.1e} {self.detail}"


@dataclass(frozen=True)
class ValidationReport:
    results: tuple
    seconds: float

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failures(self) -> list:
        return [r for r in self.results if not r.passed]


@dataclass(frozen=True)
class ValidateConfig:
    """Sizes of the property suites; defaults match the acceptance settings."""

    seed: int = 0
    n_max_identity: int = 6
    identity_trials: int = 100
    n_max_closed_form: int = 8
    closed_form_trials: int = 50
    n_max_spectrum: int = 8
    spectrum_draws: int = 20
    n_max_family: int = 4
    phi_normalization: str = DEFAULT_PHI_NORMALIZATION


def _result(name, worst, tol, detail="", inputs=None) -> PropertyResult:
    worst = float(worst)
    return PropertyResult(name, bool(worst <= tol), worst, tol, detail, inputs or {})


def _draw_params(rng, n) -> ModelParams:
    return ModelParams(float(rng.uniform(-2, 2)), float(rng.uniform(0.2, 2)), n)


# --- fock-rep ---------------------------------------------------------------


def check_offshell_identity(rng, cfg: ValidateConfig) -> PropertyResult:
    worst, arg = 0.0, {}
    for n in range(1, cfg.n_max_identity + 1):
        for _ in range(cfg.identity_trials):
            p = _draw_params(rng, n)
            lam = random_roots(rng, n)
            r = hamiltonian_identity_residual(lam, p, cfg.phi_normalization)
            if r > worst:
                worst, arg = r, {"params": p, "roots": lam.tolist()}
    return _result(
        "offshell_hamiltonian_identity", worst, 1e-10, f"normalization={cfg.phi_normalization}", arg
    )


def check_tau_identity(rng, cfg: ValidateConfig) -> PropertyResult:
    worst = 0.0
    for n in range(1, 5):
        for _ in range(20):
            p = _draw_params(rng, n)
            lam = random_roots(rng, n)
            mu = complex(rng.normal(), rng.normal())
            worst = max(worst, tau_identity_residual(mu, lam, p))
    return _result("offshell_transfer_identity", worst, 1e-10)


def check_closed_form(rng, cfg: ValidateConfig) -> list:
    worst = 0.0
    for n in range(0, cfg.n_max_closed_form + 1):
        for _ in range(cfg.closed_form_trials):
            p = _draw_params(rng, n)
            lam = random_roots(rng, n)
            a = bethe_vector_oracle(lam, p).amplitudes
            b = bethe_vector_closed_form(lam, p).amplitudes
            worst = max(worst, float(np.max(np.abs(a - b)) / np.max(np.abs(a))))
    mismatches = [
        (m, k) for m in range(0, 9) for k in range(0, 9) if stirling_d(m, k) != stirling_d_nested(m, k)
    ]
    return [
        _result("closed_form_vs_operator_product", worst, 1e-9),
        _result("stirling_recurrence_vs_nested_sum", len(mismatches), 0, str(mismatches[:3])),
    ]


def check_coherence_bound(rng, cfg: ValidateConfig) -> PropertyResult:
    worst = 0.0
    for n in range(1, 7):
        z = rng.normal(size=(10_000, n + 1)) + 1j * rng.normal(size=(10_000, n + 1))
        k = np.arange(n)
        ex = np.abs(np.sum(np.conj(z[:, 1:]) * z[:, :-1] * np.sqrt((k + 1) * (n - k)), axis=1))
        nu = ex / np.sum(np.abs(z) ** 2, axis=1) / n
        worst = max(worst, float(np.max(nu)) - 0.5, -float(np.min(nu)))
    return _result("coherence_bound", max(worst, 0.0), 1e-14)


# --- spectrum ----------------------------------------------------------------


def check_spectrum(rng, cfg: ValidateConfig) -> list:
    worst, worst_res, arg = 0.0, 0.0, {}
    n_mp = 0
    for n in range(1, cfg.n_max_spectrum + 1):
        for _ in range(cfg.spectrum_draws):
            p = _draw_params(rng, n)
            sol = solve_spectrum(p)
            err = sol.max_relative_error(eigensolve(p).energies)
            n_mp += sum(sol.multiprecision)
            worst_res = max(worst_res, float(sol.residuals.max()))
            if err > worst:
                worst, arg = err, {"params": p}
    return [
        _result("spectrum_matches_ed", worst, 1e-9, f"{n_mp} states needed multiprecision", arg),
        _result("static_residuals", worst_res, 1e-12),
    ]


def check_orthogonality_completeness(rng, cfg: ValidateConfig) -> list:
    worst_orth, worst_comp = 0.0, 0.0
    for n in range(1, cfg.n_max_family + 1):
        p = _draw_params(rng, n)
        sol = solve_spectrum(p)
        kets = [bethe_vector_oracle(rs, p) for rs in sol.root_sets]
        duals = [dual_vector_closed_form(rs, p) for rs in sol.root_sets]
        for a in range(n + 1):
            for b in range(n + 1):
                if a != b:
                    val = abs(scalar_product(duals[a], kets[b]))
                    val /= np.linalg.norm(duals[a].amplitudes) * np.linalg.norm(kets[b].amplitudes)
                    worst_orth = max(worst_orth, val)
        comp = completeness_sum(sol.root_sets, p)
        worst_comp = max(worst_comp, float(np.max(np.abs(comp - np.eye(n + 1)))))
    return [
        _result("static_dual_orthogonality", worst_orth, 1e-10),
        _result("completeness", worst_comp, 1e-8),
    ]


# --- exact diagonalization ------------------------------------------------


def check_ed(rng, cfg: ValidateConfig) -> list:
    herm, eig, lin, cons, paths = 0.0, 0.0, 0.0, 0.0, 0.0
    for n in range(0, 7):
        p = _draw_params(rng, n)
        h = build_hamiltonian(p)
        herm = max(herm, float(np.max(np.abs(h - h.T))), float(np.max(np.abs(np.triu(h, 2)))))
        sol = eigensolve(p)
        scale = max(1.0, float(np.linalg.norm(h, 2)))
        res = np.linalg.norm(h @ sol.vectors - sol.vectors * sol.energies, axis=0).max()
        ortho = np.max(np.abs(sol.vectors.T @ sol.vectors - np.eye(n + 1)))
        eig = max(eig, float(res) / scale, float(ortho))
        if n == 0:
            continue
        times = np.linspace(0, 3, 31)
        drive = DriveProtocol.aperiodic(p.delta)
        u = rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1)
        v = rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1)
        a, b = complex(rng.normal(), rng.normal()), complex(rng.normal(), rng.normal())
        su = propagate(u, drive, times, p).states
        sv = propagate(v, drive, times, p).states
        sw = propagate(a * u + b * v, drive, times, p).states
        lin = max(lin, float(np.max(np.abs(sw - a * su - b * sv)) / np.max(np.abs(sw))))
        const = DriveProtocol.constant(p.delta)
        st = propagate(u / np.linalg.norm(u), const, times, p, method="rk").states
        e = np.einsum("ij,jk,ik->i", np.conj(st), h, st).real
        cons = max(cons, float(np.max(np.abs(e - e[0]))) / scale)
        q = DriveProtocol.quench(p.delta, p.delta + 1.0)
        s1 = propagate(u, q, times, p, method="eigen").states
        s2 = propagate(u, q, times, p, method="rk").states
        paths = max(paths, float(np.max(np.abs(s1 - s2)) / np.linalg.norm(u)))
    return [
        _result("ed_hermitian_tridiagonal", herm, 0.0),
        _result("ed_eigensolve", eig, 1e-12),
        _result("ed_linearity", lin, 1e-9),
        _result("ed_energy_conservation", cons, 1e-9),
        _result("ed_eigen_vs_rk", paths, 1e-9),
    ]


# --- dynamics ------------------------------------------------------------


def check_stationarity(rng, cfg: ValidateConfig) -> PropertyResult:
    worst, atol = 0.0, 1e-12
    for n in range(1, 5):
        p = _draw_params(rng, n).with_c(float(rng.uniform(0.3, 1.0)))
        sol = solve_spectrum(p)
        for rs, ok in zip(sol.root_sets, sol.well_conditioned()):
            if not ok:
                continue
            tr = evolve(rs, DriveProtocol.constant(p.delta), 10.0, p, atol=atol, with_phase=False)
            worst = max(worst, float(np.max(np.abs(tr.roots - tr.roots[0]))))
    return _result("stationarity", worst, 10 * atol)


def check_reversibility(rng, cfg: ValidateConfig) -> PropertyResult:
    worst = 0.0
    rtol, atol = 1e-10, 1e-12
    for n in range(1, 5):
        p = ModelParams(float(rng.uniform(0, 1)), float(rng.uniform(0.4, 0.8)), n)
        drive = DriveProtocol.aperiodic(p.delta)
        start = solve_spectrum(p.with_delta(drive.delta(0.0))).root_sets[0]
        fwd = evolve(start, drive, 3.0, p, rtol=rtol, atol=atol, with_phase=False)
        back = evolve(fwd.final_roots, drive, 0.0, p, rtol=rtol, atol=atol, t_start=3.0,
                      with_phase=False)
        scale = rtol * float(np.max(np.abs(start.roots))) + atol
        worst = max(worst, float(np.max(np.abs(back.final_roots - start.roots))) / scale)
    return _result("reversibility", worst, 100.0, "error in units of the local tolerance")


def check_trajectory_vs_ed(rng, cfg: ValidateConfig) -> list:
    """Driven and quenched runs against ED: observables, fidelity and norm."""
    nu_err, fid_err, norm_drift = 0.0, 0.0, 0.0
    worst_orth = 0.0
    for n in (2, 3):
        c = float(rng.uniform(0.4, 0.8))
        d0 = float(rng.uniform(0.2, 1.0))
        for proto in (DriveProtocol.aperiodic(d0), DriveProtocol.quench(d0, d0 + 1.0)):
            p = ModelParams(proto.initial_delta, c, n)
            sol = solve_spectrum(p)
            trs = []
            for rs in sol.root_sets:
                init = rs
                if proto.kind == "quench":
                    init = quench_initial(rs, proto.delta0, proto.delta1, p)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", CloseApproachWarning)
                    tr = evolve(init, proto, 5.0, p, sample_dt=0.05)
                trs.append(tr)
                psi0 = bethe_vector_oracle(rs, p).normalized()
                ed = propagate(psi0, proto, tr.times, p)
                st = tr.fock_states()
                nu_b = np.array([coherence(FockVector(s)) for s in st])
                nu_err = max(nu_err, float(np.max(np.abs(nu_b - ed.coherence()))))
                ov = np.abs(np.einsum("ij,ij->i", np.conj(ed.states), st))
                ov /= np.linalg.norm(st, axis=1) * np.linalg.norm(ed.states, axis=1)
                fid_err = max(fid_err, float(1 - ov.min()))
                norms = np.linalg.norm(st, axis=1)
                norm_drift = max(norm_drift, float(np.max(np.abs(norms / norms[0] - 1))))
            worst_orth = max(worst_orth, orthogonality_residuals(trs).worst)
    return [
        _result("observable_agreement", nu_err, 1e-6),
        _result("state_fidelity", fid_err, 1e-7),
        _result("norm_consistency", norm_drift, 1e-7),
        _result("dynamical_orthogonality", worst_orth, 1e-6),
    ]


def check_energy_phase(rng, cfg: ValidateConfig) -> PropertyResult:
    """Stationary eigenstate: ``p(t) = -E t``."""
    p = ModelParams(0.697, 0.531, 3)
    rs = solve_spectrum(p).root_sets[1]
    tr = evolve(rs, DriveProtocol.constant(p.delta), 5.0, p)
    e = energy(rs, p).real
    return _result("stationary_phase", float(np.max(np.abs(tr.phase + e * tr.times))), 1e-8)


SUITES = (
    check_offshell_identity,
    check_tau_identity,
    check_closed_form,
    check_coherence_bound,
    check_spectrum,
    check_orthogonality_completeness,
    check_ed,
    check_stationarity,
    check_reversibility,
    check_trajectory_vs_ed,
    check_energy_phase,
)


def run_validation(cfg: ValidateConfig | None = None, suites=SUITES) -> ValidationReport:
    """Run every suite with its own generator derived from ``cfg.seed``."""
    cfg = cfg or ValidateConfig()
    t0 = time.perf_counter()
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(suites))
    results = []
    for suite, ss in zip(suites, seeds):
        rng = np.random.default_rng(ss)
        try:
            out = suite(rng, cfg)
        except Exception as exc:  # a crashing suite is a failed property, not a crash
            out = PropertyResult(suite.__name__, False, float("inf"), 0.0, f"raised {exc!r}")
        results.extend(out if isinstance(out, list) else [out])
    return ValidationReport(tuple(results), time.perf_counter() - t0)

