from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from bethe_dimer import cli
from bethe_dimer.errors import ConfigError


def run(tmp_path, *args):
    out = str(tmp_path / "run")
    code = cli.main([*args, "--out", out])
    return code, out


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_spectrum_mode(tmp_path):
    code, out = run(tmp_path, "spectrum", "--n", "4", "--delta", "0.697", "--c", "0.531")
    assert code == 0
    rows = read_csv(out + ".csv")
    assert rows[0][:3] == ["sigma", "energy", "energy_ed"]
    assert len(rows) == 6
    meta = json.loads(open(out + ".json").read())
    assert meta["results"]["ed_match"] is True
    assert meta["parameters"]["n"] == 4
    assert "basis_convention" in meta


def test_evolve_mode_with_family(tmp_path):
    code, out = run(
        tmp_path, "evolve", "--n", "2", "--delta", "0.5", "--c", "0.8",
        "--protocol", "aperiodic", "--t-end", "1", "--sample-dt", "0.5", "--family",
    )
    assert code == 0
    rows = read_csv(out + ".csv")
    header = rows[0]
    assert header[-1] == "orthogonality" and len(rows) == 4
    nu_b = np.array([float(r[header.index("nu_bethe")]) for r in rows[1:]])
    nu_e = np.array([float(r[header.index("nu_ed")]) for r in rows[1:]])
    assert np.max(np.abs(nu_b - nu_e)) < 1e-9


def test_quench_and_strobe(tmp_path):
    code, _ = run(tmp_path, "quench", "--n", "2", "--protocol", "quench:1.0",
                  "--t-end", "1", "--sample-dt", "0.5")
    assert code == 0
    code, out = run(tmp_path, "strobe", "--n", "2", "--protocol", "aperiodic",
                    "--t-end", "1", "--sample-dt", "0.5", "--family")
    assert code == 0
    rows = read_csv(out + ".csv")
    assert rows[0] == ["t", "sigma", "j", "re_lambda", "im_lambda"]
    assert len(rows) == 1 + 3 * 3 * 2


def test_quench_mode_requires_quench_protocol(tmp_path):
    code, _ = run(tmp_path, "quench", "--n", "2", "--protocol", "const")
    assert code == 3


@pytest.mark.parametrize(
    "args",
    [
        ["spectrum", "--c", "0"],
        ["spectrum", "--n", "-1"],
        ["evolve", "--protocol", "bogus"],
        ["evolve", "--sigma", "7", "--n", "2"],
        ["evolve", "--protocol", "table:/does/not/exist"],
    ],
)
def test_config_errors_exit_3(tmp_path, args):
    code, _ = run(tmp_path, *args)
    assert code == 3


def test_deterministic_output(tmp_path):
    args = ["evolve", "--n", "2", "--protocol", "aperiodic", "--t-end", "1", "--sample-dt", "0.25"]
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert cli.main([*args, "--out", str(a)]) == 0
    assert cli.main([*args, "--out", str(b)]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    ja = json.loads((tmp_path / "a.json").read_text())
    jb = json.loads((tmp_path / "b.json").read_text())
    assert ja == jb


def test_config_precedence(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# test\nn = 3\nsample-dt = 0.5\nt_end = 1\ndelta = 0.2\n")
    args = cli.build_parser().parse_args(["evolve", "--config", str(conf), "--n", "2"])
    cfg = cli.resolve_config(args)
    assert cfg.n == 2 and cfg.sources["n"] == "flag"
    assert cfg.sample_dt == 0.5 and cfg.sources["sample_dt"] == "config"
    assert cfg.delta == 0.2
    assert cfg.sources["c"] == "default"


@pytest.mark.parametrize("text", ["n 3\n", "bogus = 1\n", "n = three\n", "family = maybe\n"])
def test_bad_config_files(tmp_path, text):
    conf = tmp_path / "bad.conf"
    conf.write_text(text)
    with pytest.raises(ConfigError):
        cli.read_config_file(conf)


def test_table_protocol(tmp_path):
    table = tmp_path / "drive.txt"
    t = np.linspace(0, 2, 41)
    table.write_text("\n".join(f"{x} {0.5 + 0.3 * np.sin(x)}" for x in t))
    code, out = run(tmp_path, "evolve", "--n", "2", "--protocol", f"table:{table}",
                    "--t-end", "1.5", "--sample-dt", "0.5")
    assert code == 0
    meta = json.loads(open(out + ".json").read())
    assert meta["results"]["min_fidelity"] > 1 - 1e-9


def test_parse_protocol():
    assert cli.parse_protocol("const", 0.3).delta(1.0) == 0.3
    assert cli.parse_protocol("quench:1.5", 0.3).delta1 == 1.5
    with pytest.raises(ConfigError):
        cli.parse_protocol("quench:x", 0.3)


def test_printed_normalization_fails_validation(tmp_path):
    code, out = run(tmp_path, "validate", "--phi-normalization", "printed")
    assert code == 1
    meta = json.loads(open(out + ".json").read())
    assert meta["results"]["passed"] is False
    assert meta["results"]["failures"]
