"""Command-line entry point: ``bethe-dimer {spectrum,evolve,quench,strobe,validate}``.

Every run writes ``<out>.csv`` and a JSON metadata sidecar ``<out>.json``.
Numbers are written in fixed 17-significant-digit scientific notation and
JSON keys are sorted, so outputs are byte-identical for a fixed config.

Exit status: 0 success, 1 validation failure, 2 numerical failure,
3 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import DEFAULT_PHI_NORMALIZATION, PHI_NORMALIZATIONS, ModelParams
from .dynamics import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    CloseApproachWarning,
    evolve,
    orthogonality_residuals,
    quench_initial,
    sample_times,
)
from .ed import eigensolve, propagate
from .errors import BetheError, ConfigError, ParameterError
from .fock import BASIS_CONVENTION, FockVector, bethe_vector_oracle, coherence
from .protocols import DriveProtocol
from .static import solve_spectrum
from .validate import ValidateConfig, run_validation

log = logging.getLogger("bethe_dimer")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_CONFIG = 0, 1, 2, 3
MODES = ("spectrum", "evolve", "quench", "strobe", "validate")

_DEFAULTS = {
    "n": 5,
    "delta": 0.697,
    "c": 0.531,
    "protocol": "const",
    "t_end": 10.0,
    "sample_dt": 0.01,
    "rtol": DEFAULT_RTOL,
    "atol": DEFAULT_ATOL,
    "out": None,
    "seed": 0,
    "sigma": 0,
    "family": False,
    "phi_normalization": DEFAULT_PHI_NORMALIZATION,
}
_TYPES = {
    "n": int,
    "delta": float,
    "c": float,
    "protocol": str,
    "t_end": float,
    "sample_dt": float,
    "rtol": float,
    "atol": float,
    "out": str,
    "seed": int,
    "sigma": int,
    "family": None,  # parsed by _parse_bool
    "phi_normalization": str,
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run configuration."""

    mode: str
    n: int
    delta: float
    c: float
    protocol: str
    t_end: float
    sample_dt: float
    rtol: float
    atol: float
    out: str
    seed: int
    sigma: int = 0
    family: bool = False
    phi_normalization: str = DEFAULT_PHI_NORMALIZATION
    sources: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.n < 0:
            raise ConfigError("n must be nonnegative")
        if not (math.isfinite(self.c) and self.c > 0):
            raise ConfigError(f"c must be a positive finite number, got {self.c}")
        if not math.isfinite(self.delta):
            raise ConfigError("delta must be finite")
        if self.sample_dt <= 0:
            raise ConfigError("sample_dt must be positive")
        if self.t_end < self.sample_dt:
            raise ConfigError("t_end must be at least sample_dt")
        if self.rtol <= 0 or self.atol <= 0:
            raise ConfigError("tolerances must be positive")
        if self.phi_normalization not in PHI_NORMALIZATIONS:
            raise ConfigError(f"unknown phi normalization {self.phi_normalization!r}")

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.delta, self.c, self.n)

    def drive(self) -> DriveProtocol:
        return parse_protocol(self.protocol, self.delta)


def parse_protocol(text: str, delta: float) -> DriveProtocol:
    """``const`` | ``quench:<delta'>`` | ``aperiodic`` | ``table:<path>``."""
    kind, _, arg = text.partition(":")
    if kind == "const" and not arg:
        return DriveProtocol.constant(delta)
    if kind == "aperiodic" and not arg:
        return DriveProtocol.aperiodic(delta)
    if kind == "quench":
        try:
            return DriveProtocol.quench(delta, float(arg))
        except ValueError:
            raise ConfigError(f"quench needs a numeric target, got {arg!r}") from None
    if kind == "table" and arg:
        return DriveProtocol.from_file(arg)
    raise ConfigError(f"unknown protocol {text!r}")


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def read_config_file(path: str | Path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, dashes equal underscores."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or not key:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        if key not in _TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _convert(key, value.strip(), f"{path}:{lineno}")
    return out


def _convert(key, value, where):
    kind = _TYPES[key]
    try:
        return _parse_bool(value) if kind is None else kind(value)
    except (ValueError, ConfigError):
        raise ConfigError(f"{where}: bad value {value!r} for {key}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bethe-dimer",
        description="Exact Bose-Hubbard dimer dynamics from dynamical Bethe equations.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("--n", type=int, help="particle number N")
        p.add_argument("--delta", type=float, help="detuning (pre-quench / drive offset)")
        p.add_argument("--c", type=float, help="coupling c > 0")
        p.add_argument("--protocol", help="const | quench:D | aperiodic | table:PATH")
        p.add_argument("--t-end", dest="t_end", type=float)
        p.add_argument("--sample-dt", dest="sample_dt", type=float)
        p.add_argument("--rtol", type=float)
        p.add_argument("--atol", type=float)
        p.add_argument("--out", help="output prefix; writes PREFIX.csv and PREFIX.json")
        p.add_argument("--seed", type=int)
        p.add_argument("--config", help="flat key=value file; command-line flags win")
        p.add_argument("--sigma", type=int, help="state index (0 = ground state)")
        p.add_argument(
            "--family",
            action="store_const",
            const=True,
            help="evolve all N+1 states and report the orthogonality residual",
        )
        p.add_argument("--phi-normalization", dest="phi_normalization",
                       choices=PHI_NORMALIZATIONS)
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = dict(_DEFAULTS)
    sources = {k: "default" for k in values}
    if args.config:
        for k, v in read_config_file(args.config).items():
            values[k], sources[k] = v, "config"
    for k in _DEFAULTS:
        v = getattr(args, k, None)
        if v is not None:
            values[k], sources[k] = v, "flag"
    if values["out"] is None:
        values["out"] = f"bethe_{args.mode}"
    return RunConfig(mode=args.mode, sources=sources, **values)


# --- output -------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.16e}"


def write_csv(path: Path, header: list, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_metadata(cfg: RunConfig, results: dict) -> Path:
    meta = {
        "version": __version__,
        "mode": cfg.mode,
        "parameters": {"n": cfg.n, "delta": cfg.delta, "c": cfg.c, "protocol": cfg.protocol},
        "tolerances": {"rtol": cfg.rtol, "atol": cfg.atol},
        "sampling": {"t_end": cfg.t_end, "sample_dt": cfg.sample_dt},
        "seed": cfg.seed,
        "basis_convention": BASIS_CONVENTION,
        "phi_normalization": cfg.phi_normalization,
        "float_format": "17 significant digits, scientific",
        "results": results,
    }
    path = Path(cfg.out + ".json")
    path.write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n")
    return path


def _root_columns(n: int) -> list:
    cols = []
    for j in range(1, n + 1):
        cols += [f"re_lambda_{j}", f"im_lambda_{j}"]
    return cols


def _split(z) -> list:
    out = []
    for v in z:
        out += [v.real, v.imag]
    return out


# --- subcommands ------------------------------------------------------------


def run_spectrum(cfg: RunConfig) -> int:
    params = cfg.params
    sol = solve_spectrum(params)
    ed = eigensolve(params).energies
    rel = np.abs(sol.energies - ed) / np.maximum(1.0, np.abs(ed))
    header = ["sigma", "energy", "energy_ed", "rel_error", "residual", "multiprecision"]
    header += _root_columns(params.n_particles)
    rows = []
    for s, rs in enumerate(sol.root_sets):
        row = [s, sol.energies[s], ed[s], rel[s], sol.residuals[s], sol.multiprecision[s]]
        rows.append(row + _split(rs.roots))
    write_csv(Path(cfg.out + ".csv"), header, rows)
    match = bool(np.all(rel <= 1e-9))
    write_metadata(cfg, {"ed_match": match, "max_rel_error": float(rel.max()),
                         "states": len(sol)})
    print(f"{len(sol)} states, max relative error vs ED {rel.max():.3e}, ED match {match}")
    return EXIT_OK if match else EXIT_VALIDATION


def _initial_roots(cfg: RunConfig, drive: DriveProtocol):
    """Eigenstate roots at the initial detuning and the roots the evolution starts from."""
    params = cfg.params.with_delta(drive.initial_delta)
    sol = solve_spectrum(params)
    if not 0 <= cfg.sigma < len(sol):
        raise ConfigError(f"sigma must be in 0..{len(sol) - 1}")
    picks = sol.root_sets if cfg.family else (sol.root_sets[cfg.sigma],)
    pairs = []
    for rs in picks:
        start = rs
        if drive.kind == "quench":
            start = quench_initial(rs, drive.delta0, drive.delta1, params)
        pairs.append((rs, start))
    return params, pairs


def _run_series(cfg: RunConfig, drive: DriveProtocol) -> int:
    params, pairs = _initial_roots(cfg, drive)
    times = sample_times(0.0, cfg.t_end, cfg.sample_dt)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", CloseApproachWarning)
        trajs = [evolve(start, drive, cfg.t_end, params, cfg.rtol, cfg.atol, times=times)
                 for _, start in pairs]
    eig_rs, _ = pairs[0]
    traj = trajs[0]
    psi0 = bethe_vector_oracle(eig_rs, params).normalized()
    ed = propagate(psi0, drive, times, params)
    states = traj.fock_states()
    nu_b = np.array([coherence(FockVector(s)) for s in states])
    nu_e = ed.coherence()
    fid = np.abs(np.einsum("ij,ij->i", np.conj(ed.states), states))
    fid /= np.linalg.norm(states, axis=1) * np.linalg.norm(ed.states, axis=1)
    orth = orthogonality_residuals(trajs) if cfg.family else None
    header = ["t"] + _root_columns(params.n_particles)
    header += ["re_phase", "im_phase", "nu_bethe", "nu_ed", "fidelity"]
    if orth is not None:
        header.append("orthogonality")
    rows = []
    for i, t in enumerate(times):
        row = [t] + _split(traj.roots[i]) + [traj.phase[i].real, traj.phase[i].imag]
        row += [nu_b[i], nu_e[i], fid[i]]
        if orth is not None:
            row.append(orth.max_overlap[i])
        rows.append(row)
    write_csv(Path(cfg.out + ".csv"), header, rows)
    results = {
        "protocol": drive.describe(),
        "initial_delta": drive.initial_delta,
        "sigma": "all" if cfg.family else cfg.sigma,
        "max_abs_nu_difference": float(np.max(np.abs(nu_b - nu_e))),
        "min_fidelity": float(fid.min()),
        "ed_norm_drift": ed.max_norm_drift,
        "min_root_separation": float(min(tr.step_min_separation for tr in trajs)),
        "min_root_modulus": float(min(tr.min_modulus.min() for tr in trajs)),
        "integrator_steps": [tr.n_steps for tr in trajs],
        "close_approach_warnings": len(caught),
    }
    if drive.kind == "quench":
        results["delta_before"], results["delta_after"] = drive.delta0, drive.delta1
    if orth is not None:
        results["max_orthogonality_residual"] = orth.worst
    write_metadata(cfg, results)
    print(
        f"max |nu_bethe - nu_ed| = {results['max_abs_nu_difference']:.3e}, "
        f"min fidelity = {results['min_fidelity']:.15f}"
    )
    return EXIT_OK


def run_evolve(cfg: RunConfig) -> int:
    return _run_series(cfg, cfg.drive())


def run_quench(cfg: RunConfig) -> int:
    drive = cfg.drive()
    if drive.kind != "quench":
        raise ConfigError("quench mode needs --protocol quench:<delta'>")
    return _run_series(cfg, drive)


def run_strobe(cfg: RunConfig) -> int:
    drive = cfg.drive()
    params, pairs = _initial_roots(cfg, drive)
    times = sample_times(0.0, cfg.t_end, cfg.sample_dt)
    rows = []
    for k, (_, start) in enumerate(pairs):
        sigma = k if cfg.family else cfg.sigma
        traj = evolve(start, drive, cfg.t_end, params, cfg.rtol, cfg.atol, times=times,
                      with_phase=False)
        for i, t in enumerate(times):
            for j, z in enumerate(traj.roots[i], 1):
                rows.append([t, sigma, j, z.real, z.imag])
    write_csv(Path(cfg.out + ".csv"), ["t", "sigma", "j", "re_lambda", "im_lambda"], rows)
    write_metadata(cfg, {"protocol": drive.describe(), "points": len(rows)})
    print(f"{len(rows)} points written")
    return EXIT_OK


def run_validate(cfg: RunConfig) -> int:
    report = run_validation(ValidateConfig(seed=cfg.seed, phi_normalization=cfg.phi_normalization))
    rows = [[r.name, r.passed, r.worst, r.tolerance] for r in report.results]
    path = Path(cfg.out + ".csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["property", "passed", "worst", "tolerance"])
        for name, ok, worst, tol in rows:
            writer.writerow([name, _fmt(ok), _fmt(worst), _fmt(tol)])
    failures = {
        r.name: {"worst": r.worst, "detail": r.detail, "inputs": repr(r.inputs)}
        for r in report.failures()
    }
    write_metadata(cfg, {"passed": report.passed, "properties": len(rows), "failures": failures})
    for r in report.results:
        print(r.line())
    return EXIT_OK if report.passed else EXIT_VALIDATION


RUNNERS = {
    "spectrum": run_spectrum,
    "evolve": run_evolve,
    "quench": run_quench,
    "strobe": run_strobe,
    "validate": run_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args)
        return RUNNERS[cfg.mode](cfg)
    except (ConfigError, ParameterError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BetheError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
