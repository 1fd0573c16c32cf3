from __future__ import annotations

import math

import numpy as np
import pytest

from bethe_dimer.errors import ConfigError
from bethe_dimer.protocols import DriveProtocol


def test_constant_and_quench():
    c = DriveProtocol.constant(0.5)
    assert c.delta(3.0) == 0.5 and c.delta_dot(3.0) == 0.0 and c.is_piecewise_constant
    q = DriveProtocol.quench(0.0, 1.0)
    assert q.initial_delta == 0.0 and q.delta(0.0) == 1.0
    with pytest.raises(ConfigError):
        DriveProtocol("quench", 0.0)
    with pytest.raises(ConfigError):
        DriveProtocol("sawtooth", 0.0)


def test_aperiodic_derivative_matches_finite_difference():
    d = DriveProtocol.aperiodic(0.697)
    assert d.initial_delta == pytest.approx(1.697)
    for t in (0.0, 0.7, 2.3, 4.1):
        h = 1e-6
        fd = (d.delta(t + h) - d.delta(t - h)) / (2 * h)
        assert d.delta_dot(t) == pytest.approx(fd, abs=1e-6)
    assert d.delta(math.sqrt(math.pi)) == pytest.approx(0.697 - 1)


def test_tabulated_and_file(tmp_path):
    t = np.linspace(0, 2, 21)
    d = DriveProtocol.tabulated(t, np.sin(t))
    assert d.delta(1.0) == pytest.approx(math.sin(1.0), abs=1e-4)
    assert d.delta_dot(1.0) == pytest.approx(math.cos(1.0), abs=1e-3)
    path = tmp_path / "drive.txt"
    path.write_text("# t delta\n0 0.0\n1, 1.0  # comment\n\n2 4.0\n")
    f = DriveProtocol.from_file(path)
    assert f.kind == "tabulated" and f.delta(2.0) == pytest.approx(4.0)


@pytest.mark.parametrize(
    "text", ["", "0 1\n0 2\n", "0 1\nx y\n", "0 1\n1 nan\n", "0\n"]
)
def test_bad_tables(tmp_path, text):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(ConfigError):
        DriveProtocol.from_file(path)


def test_missing_table(tmp_path):
    with pytest.raises(ConfigError):
        DriveProtocol.from_file(tmp_path / "nope.txt")
