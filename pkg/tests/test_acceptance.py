"""End-to-end acceptance checks, one test per criterion."""

from __future__ import annotations

import subprocess
import sys
import time

import numpy as np
import pytest

from bethe_dimer.core import ModelParams
from bethe_dimer.dynamics import evolve, orthogonality_residuals, quench_initial
from bethe_dimer.ed import eigensolve, propagate
from bethe_dimer.fock import (
    FockVector,
    bethe_vector_closed_form,
    bethe_vector_oracle,
    coherence,
    completeness_sum,
    hamiltonian_identity_residual,
    random_roots,
    stirling_d,
    stirling_d_nested,
)
from bethe_dimer.protocols import DriveProtocol
from bethe_dimer.static import ground_state_roots, solve_spectrum
from bethe_dimer.validate import ValidateConfig, check_reversibility, check_stationarity
from conftest import record_acceptance

N_FIG, C_FIG, DELTA0 = 5, 0.531, 0.697


def _figure_run(protocol: DriveProtocol):
    params = ModelParams(protocol.initial_delta, C_FIG, N_FIG)
    ground = ground_state_roots(params)
    start = ground
    if protocol.kind == "quench":
        start = quench_initial(ground, protocol.delta0, protocol.delta1, params)
    traj = evolve(start, protocol, 10.0, params, sample_dt=0.01)
    psi0 = bethe_vector_oracle(ground, params).normalized()
    ed = propagate(psi0, protocol, traj.times, params)
    states = traj.fock_states()
    nu_b = np.array([coherence(FockVector(s)) for s in states])
    fid = np.abs(np.einsum("ij,ij->i", np.conj(ed.states), states))
    fid /= np.linalg.norm(states, axis=1) * np.linalg.norm(ed.states, axis=1)
    return float(np.max(np.abs(nu_b - ed.coherence()))), float(fid.min())


@pytest.fixture(scope="module")
def driven_run():
    t0 = time.perf_counter()
    out = _figure_run(DriveProtocol.aperiodic(DELTA0))
    return (*out, time.perf_counter() - t0)


@pytest.fixture(scope="module")
def quench_run():
    t0 = time.perf_counter()
    out = _figure_run(DriveProtocol.quench(DELTA0, DELTA0 + 1.0))
    return (*out, time.perf_counter() - t0)


def test_criterion_1_spectrum_equivalence():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for n in range(1, 9):
        for _ in range(20):
            p = ModelParams(rng.uniform(-2, 2), rng.uniform(0.2, 2), n)
            worst = max(worst, solve_spectrum(p).max_relative_error(eigensolve(p).energies))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed <= 60
    record_acceptance(1, "spectrum equivalence", ok,
                      f"max rel err {worst:.2e} <= 1e-9, {elapsed:.1f}s <= 60s")
    assert ok


def test_criterion_2_driven_coherence(driven_run):
    dnu, _, elapsed = driven_run
    ok = dnu <= 1e-6 and elapsed <= 60
    record_acceptance(2, "driven coherence vs ED", ok,
                      f"max |dnu| {dnu:.2e} <= 1e-6, {elapsed:.1f}s <= 60s")
    assert ok


def test_criterion_3_quench_coherence(quench_run):
    dnu, _, elapsed = quench_run
    ok = dnu <= 1e-6 and elapsed <= 60
    record_acceptance(3, "quench coherence vs ED", ok,
                      f"max |dnu| {dnu:.2e} <= 1e-6, {elapsed:.1f}s <= 60s")
    assert ok


def test_criterion_4_fidelity(driven_run, quench_run):
    worst = 1.0 - min(driven_run[1], quench_run[1])
    ok = worst <= 1e-7
    record_acceptance(4, "full-state fidelity", ok, f"1 - min fidelity {worst:.2e} <= 1e-7")
    assert ok


def test_criterion_5_offshell_identity():
    rng = np.random.default_rng(5)
    worst = 0.0
    for n in range(1, 7):
        for _ in range(100):
            p = ModelParams(rng.uniform(-2, 2), rng.uniform(0.2, 2), n)
            worst = max(worst, hamiltonian_identity_residual(random_roots(rng, n), p))
    ok = worst <= 1e-10
    record_acceptance(5, "off-shell operator identity", ok, f"max residual {worst:.2e} <= 1e-10")
    assert ok


def test_criterion_6_fock_expansion():
    rng = np.random.default_rng(6)
    worst = 0.0
    for n in range(0, 9):
        for _ in range(50):
            p = ModelParams(rng.uniform(-2, 2), rng.uniform(0.2, 2), n)
            lam = random_roots(rng, n)
            a = bethe_vector_oracle(lam, p).amplitudes
            b = bethe_vector_closed_form(lam, p).amplitudes
            worst = max(worst, float(np.max(np.abs(a - b)) / np.max(np.abs(a))))
    exact = all(stirling_d(m, k) == stirling_d_nested(m, k) for m in range(9) for k in range(9))
    ok = worst <= 1e-9 and exact
    record_acceptance(6, "closed-form expansion", ok,
                      f"max rel diff {worst:.2e} <= 1e-9, recurrence == nested sum: {exact}")
    assert ok


def test_criterion_7_orthogonality_completeness():
    drive = DriveProtocol.aperiodic(DELTA0)
    worst_orth, worst_comp = 0.0, 0.0
    for n in range(1, 5):
        p = ModelParams(drive.initial_delta, C_FIG, n)
        sol = solve_spectrum(p)
        comp = completeness_sum(sol.root_sets, p)
        worst_comp = max(worst_comp, float(np.max(np.abs(comp - np.eye(n + 1)))))
        trajs = [evolve(rs, drive, 5.0, p, sample_dt=0.05) for rs in sol.root_sets]
        worst_orth = max(worst_orth, orthogonality_residuals(trajs).worst)
    ok = worst_orth <= 1e-6 and worst_comp <= 1e-8
    record_acceptance(7, "orthogonality and completeness", ok,
                      f"pairing {worst_orth:.2e} <= 1e-6, completeness {worst_comp:.2e} <= 1e-8")
    assert ok


def test_criterion_8_properties_and_validate(tmp_path):
    cfg = ValidateConfig()
    stat = check_stationarity(np.random.default_rng(8), cfg)
    rev = check_reversibility(np.random.default_rng(9), cfg)
    t0 = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "bethe_dimer.cli", "validate", "--out", str(tmp_path / "v")],
        capture_output=True,
        text=True,
        timeout=600,
    )
    elapsed = time.perf_counter() - t0
    ok = stat.passed and rev.passed and proc.returncode == 0 and elapsed <= 300
    record_acceptance(
        8,
        "stationarity, reversibility, validate",
        ok,
        f"stationarity {stat.worst:.1e}, reversibility {rev.worst:.2f} tol units, "
        f"validate exit {proc.returncode} in {elapsed:.1f}s <= 300s",
    )
    assert ok, proc.stdout + proc.stderr
