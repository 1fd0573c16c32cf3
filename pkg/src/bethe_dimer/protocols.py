"""Time dependence of the detuning."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError

CONSTANT = "constant"
QUENCH = "quench"
APERIODIC = "aperiodic"
TABULATED = "tabulated"


@dataclass(frozen=True)
class DriveProtocol:
    """Detuning protocol ``Delta(t)`` and its exact derivative.

    Kinds
    -----
    constant
        ``Delta(t) = delta0``.
    quench
        ``delta0`` before ``t = 0``, ``delta1`` afterwards. Evolution starts
        at ``t = 0`` with the post-quench value; ``delta0`` only fixes the
        initial state.
    aperiodic
        ``Delta(t) = delta0 + cos(t^2)``.
    tabulated
        Cubic spline through ``(table_t, table_delta)``; the derivative is
        the spline derivative, so the drive is C^1 (in fact C^2).
    """

    kind: str
    delta0: float
    delta1: float | None = None
    table_t: tuple = ()
    table_delta: tuple = ()
    _spline: CubicSpline | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in (CONSTANT, QUENCH, APERIODIC, TABULATED):
            raise ConfigError(f"unknown protocol kind {self.kind!r}")
        if self.kind == QUENCH and self.delta1 is None:
            raise ConfigError("quench protocol needs the post-quench detuning")
        if self.kind == TABULATED:
            t = np.asarray(self.table_t, dtype=float)
            d = np.asarray(self.table_delta, dtype=float)
            if t.size < 2 or t.size != d.size:
                raise ConfigError("tabulated drive needs at least two (t, delta) samples")
            if np.any(np.diff(t) <= 0):
                raise ConfigError("tabulated times must be strictly increasing")
            if not (np.all(np.isfinite(t)) and np.all(np.isfinite(d))):
                raise ConfigError("tabulated drive has non-finite samples")
            object.__setattr__(self, "_spline", CubicSpline(t, d))

    @classmethod
    def constant(cls, delta: float) -> "DriveProtocol":
        return cls(CONSTANT, float(delta))

    @classmethod
    def quench(cls, delta_old: float, delta_new: float) -> "DriveProtocol":
        return cls(QUENCH, float(delta_old), float(delta_new))

    @classmethod
    def aperiodic(cls, delta0: float) -> "DriveProtocol":
        return cls(APERIODIC, float(delta0))

    @classmethod
    def tabulated(cls, times, deltas) -> "DriveProtocol":
        t = tuple(float(x) for x in times)
        d = tuple(float(x) for x in deltas)
        return cls(TABULATED, d[0] if d else math.nan, table_t=t, table_delta=d)

    @classmethod
    def from_file(cls, path: str | Path) -> "DriveProtocol":
        """Read whitespace- or comma-separated ``t delta`` rows; ``#`` starts a comment."""
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read drive table {path}: {exc}") from exc
        rows = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except (IndexError, ValueError):
                raise ConfigError(f"{path}:{lineno}: expected 't delta'") from None
        if not rows:
            raise ConfigError(f"drive table {path} is empty")
        t, d = zip(*rows)
        return cls.tabulated(t, d)

    def delta(self, t: float) -> float:
        if self.kind == CONSTANT:
            return self.delta0
        if self.kind == QUENCH:
            return self.delta1
        if self.kind == APERIODIC:
            return self.delta0 + math.cos(t * t)
        return float(self._spline(t))

    def delta_dot(self, t: float) -> float:
        if self.kind in (CONSTANT, QUENCH):
            return 0.0
        if self.kind == APERIODIC:
            return -2.0 * t * math.sin(t * t)
        return float(self._spline(t, 1))

    @property
    def initial_delta(self) -> float:
        """Detuning that defines the initial eigenstate."""
        if self.kind == QUENCH:
            return self.delta0
        return self.delta(0.0)

    @property
    def is_piecewise_constant(self) -> bool:
        return self.kind in (CONSTANT, QUENCH)

    def describe(self) -> str:
        if self.kind == QUENCH:
            return f"quench {self.delta0!r} -> {self.delta1!r}"
        if self.kind == APERIODIC:
            return f"aperiodic {self.delta0!r} + cos(t^2)"
        if self.kind == TABULATED:
            return f"tabulated ({len(self.table_t)} samples)"
        return f"constant {self.delta0!r}"
