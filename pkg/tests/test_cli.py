import json
import os

import numpy as np
import pytest

from blochband.cli import (EXIT_CONFIG, EXIT_OK, ConfigError, atomic_write,
                           load_config, main, _parse_law)
from blochband.material import Constant, Rational

MINI_CONFIG = """
[mesh]
n_per_side = 8

[material]
background = constant:1.0
inclusion = constant:8.9

[sweep]
omega_min = 0.25
omega_max = 0.27
omega_step = 0.01
theta_count = 3
endpoint_tolerance = 1e-3

[solver]
algorithm = shira
shift = 0.05+0.25j

[output]
directory = {out}
"""


@pytest.fixture
def mini_config(tmp_path):
    out = tmp_path / "results"
    path = tmp_path / "run.ini"
    path.write_text(MINI_CONFIG.format(out=out))
    return str(path), str(out)


def test_parse_law():
    assert _parse_law("constant:2.5") == Constant(2.5)
    assert _parse_law("rational:1,5.34,1") == Rational(1.0, 5.34, 1.0)
    with pytest.raises(ConfigError):
        _parse_law("polynomial:1,2")
    with pytest.raises(ConfigError):
        _parse_law("rational:1,2")


def test_load_config_roundtrip(mini_config):
    path, out = mini_config
    run = load_config(path)
    assert run.n_per_side == 8
    assert run.model.inclusion(0.1) == 8.9
    assert run.sweep.omega_range == (0.25, 0.27)
    assert run.sweep.solver.shift == 0.05 + 0.25j
    assert run.out_dir == out


def test_unknown_key_is_error(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[mesh]\nn_per_side = 4\nspline_order = 3\n")
    with pytest.raises(ConfigError, match="unknown keys"):
        load_config(str(path))
    path.write_text("[turbo]\nenabled = yes\n")
    with pytest.raises(ConfigError, match="unknown section"):
        load_config(str(path))


def test_range_consistency_checked(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[material]\nvalid_range = 0.0, 0.5\n"
                    "[sweep]\nomega_max = 0.6\n")
    with pytest.raises(ConfigError, match="exceeds"):
        load_config(str(path))


def test_atomic_write(tmp_path):
    target = tmp_path / "data.txt"
    atomic_write(str(target), "hello\n")
    assert target.read_text() == "hello\n"
    atomic_write(str(target), "replaced\n")
    assert target.read_text() == "replaced\n"
    leftovers = [p for p in os.listdir(tmp_path) if p.startswith(".tmp-")]
    assert leftovers == []


def test_sweep_command_artifacts(mini_config, capsys):
    path, out = mini_config
    code = main(["sweep", "--config", path])
    assert code == EXIT_OK
    assert "gaps found: 1" in capsys.readouterr().out

    with open(os.path.join(out, "gaps.json")) as fh:
        payload = json.load(fh)
    assert payload["schema"] == "band-gap-report-v1"
    assert len(payload["gaps"]) == 1
    gap = payload["gaps"][0]
    assert gap["lo"] < gap["hi"]
    assert not gap["indeterminate"]
    assert payload["provenance"]["n_per_side"] == 8
    assert payload["indeterminate_frequencies"] == []

    with open(os.path.join(out, "eigs.csv")) as fh:
        header = fh.readline().strip()
        first = fh.readline().strip().split(",")
    assert header == "omega,theta,re_lambda,im_lambda,residual,mirrored_flag"
    assert len(first) == 6
    float(first[2])  # re-parseable
    assert first[5] in ("0", "1")

    for name in ("tube.csv", "surfaces.csv"):
        with open(os.path.join(out, name)) as fh:
            rows = fh.read().splitlines()
        assert len(rows) >= 1 and "," in rows[0]


def test_sweep_malformed_config_exit(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text("[mesh]\nn_per_side = one\n")
    assert main(["sweep", "--config", str(path)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    assert main(["sweep", "--config", str(tmp_path / "missing.ini")]) \
        == EXIT_CONFIG


def test_point_command(mini_config, capsys):
    path, _ = mini_config
    assert main(["point", "--config", path, "--omega", "0.26",
                 "--theta", "0"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "re_lambda" in out
    # Inside the gap no filtered eigenvalue is (numerically) real.
    ims = [abs(float(line.split()[1])) for line in out.splitlines()[1:]]
    assert all(v > 1e-6 for v in ims)


def test_point_rejects_bad_arguments(mini_config, capsys):
    path, _ = mini_config
    assert main(["point", "--config", path, "--omega", "0.26",
                 "--theta", "1.0"]) == EXIT_CONFIG
    assert main(["point", "--config", path, "--omega", "0.9"]) == EXIT_CONFIG


def test_oracle_command(capsys):
    assert main(["oracle", "--omega", "0", "--m-range", "1"]) == EXIT_OK
    out = capsys.readouterr().out
    for line in out.splitlines()[1:]:
        re_l, im_l = (float(t) for t in line.split())
        assert abs(re_l - round(re_l)) < 1e-12
        assert abs(im_l - round(im_l)) < 1e-12


def test_mesh_info(capsys):
    assert main(["mesh-info", "--n-per-side", "6"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "dofs: 144" in out
    assert "elements: 72" in out
    assert "h_over_2pi: " in out


def test_bz_constant_override(mini_config):
    path, out = mini_config
    assert main(["sweep", "--config", path, "--bz-constant", "0.5",
                 "--out", out + "_strict"]) == EXIT_OK
    with open(os.path.join(out + "_strict", "gaps.json")) as fh:
        payload = json.load(fh)
    assert payload["provenance"]["n_per_side"] == 8


def test_nine_significant_digits(mini_config):
    path, out = mini_config
    main(["sweep", "--config", path])
    with open(os.path.join(out, "eigs.csv")) as fh:
        fh.readline()
        cell = fh.readline().split(",")[2]
    digits = cell.replace("-", "").replace(".", "").split("e")[0].lstrip("0")
    assert len(digits) <= 9
