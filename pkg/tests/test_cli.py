import csv
from pathlib import Path

import numpy as np
import pytest

from crossdiff import cli
from crossdiff.errors import ConfigError
from crossdiff.mesh import field_from_text

ROOT = Path(__file__).resolve().parents[1]

HEAT = """\
[grid]
extents = 1
cells = 32
bc = dirichlet0

[model]
diffusion = constant

[initial]
kind = trig
modes = 1;3
coefficients = 1, 0.3

[run]
T_end = 0.05
diagnostics = l2, mass
"""

POROUS = """\
[grid]
extents = 1
cells = 64
bc = dirichlet0

[model]
diffusion = diagonal_power
diffusion.exponents = 2
reaction = potential_pair
reaction.coef = 1
reaction.q = 3
reaction.B_coef = 0.8
reaction.B_power = 5

[initial]
kind = trig
amplitude = 27.3

[certificate]
kind = scalar
k = 1.224744871391589
samples = 20000

[run]
T_end = 0.02
threshold = 1e4
"""


def _with_output(text, out):
    return text + f"\n[output]\ndir = {out}\n"


def test_minimal_scenario_defaults():
    cfg = cli.parse_scenario(HEAT)
    assert cfg.sections["run"]["threshold"] == 1e6
    assert cfg.sections["run"]["safety"] == 0.5
    echo = cfg.to_text()
    assert "threshold = 1000000.0" in echo
    assert "safety = 0.5" in echo
    assert cli.parse_scenario(echo).to_text() == echo


@pytest.mark.parametrize(
    "text,line",
    [
        (HEAT.replace("cells = 32", "cells = 32\nbogus = 1"), 4),
        (HEAT.replace("[run]\nT_end = 0.05\n", "[run]\n"), None),
        (HEAT.replace("extents = 1", "extents = -1"), 2),
        (HEAT.replace("diffusion = constant", "diffusion = nothing"), 7),
        (HEAT + "\n[nonsense]\nx = 1\n", 18),
        (HEAT.replace("T_end = 0.05", "T_end = soon"), 15),
        (HEAT + "just text\n", 17),
    ],
)
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as info:
        cli.parse_scenario(text)
    if line is not None:
        assert str(info.value).startswith(f"line {line}:")


def test_js_kappa_rejected_at_parse_time():
    text = (ROOT / "scenarios" / "js_residual.cfg").read_text().replace("diffusion.kappa = 1", "diffusion.kappa = 4")
    with pytest.raises(ConfigError, match="kappa"):
        cli.parse_scenario(text)


def test_thickness_sweep_children():
    cfg = cli.load_scenario(ROOT / "scenarios" / "slab_sweep.cfg")
    kids = cfg.children()
    assert len(kids) == 4
    assert [k.grid.extents[2] for k in kids] == [0.2, 0.1, 0.05, 0.025]
    assert [k.out_dir.name for k in kids] == ["child_000", "child_001", "child_002", "child_003"]


def test_sweep_values_must_be_nonempty():
    with pytest.raises(ConfigError):
        cli.parse_scenario(HEAT + "\n[sweep]\nparam = run.T_end\nvalues =\n")
    with pytest.raises(ConfigError):
        cli.parse_scenario(HEAT + "\n[sweep]\nparam = run.nothing\nvalues = 1, 2\n")


def test_heat_run_artifacts(tmp_path):
    cfg = cli.parse_scenario(_with_output(HEAT, tmp_path / "heat"))
    code, summary = cli.run_scenario(cfg)
    assert code == cli.EXIT_OK
    assert summary["termination"] == "ReachedT"
    out = tmp_path / "heat"
    for name in ("config.txt", "diagnostics.csv", "summary.txt", "final_field.txt"):
        assert (out / name).exists()
    rows = list(csv.DictReader((out / "diagnostics.csv").open()))
    l2 = np.array([float(r["l2"]) for r in rows])
    assert np.all(np.diff(l2) <= 0)
    final = field_from_text((out / "final_field.txt").read_text())
    assert final.time == pytest.approx(0.05)


def test_porous_blowup_exit_and_horizon(tmp_path):
    cfg = cli.parse_scenario(_with_output(POROUS, tmp_path / "porous"))
    code, summary = cli.run_scenario(cfg)
    assert code == cli.EXIT_BLOWUP
    assert summary["termination"] == "BlowupDetected"
    assert summary["verdict"] == "BlowupCertified"
    t_b, horizon = float(summary["time"]), float(summary["horizon"])
    assert t_b <= 1.1 * horizon
    assert (tmp_path / "porous" / "certificate.txt").exists()


def test_negative_extent_leaves_no_artifacts(tmp_path, capsys):
    out = tmp_path / "bad"
    path = tmp_path / "bad.cfg"
    path.write_text(_with_output(HEAT.replace("extents = 1", "extents = -1"), out))
    assert cli.main([str(path)]) == cli.EXIT_CONFIG
    assert not out.exists()
    assert "line 2" in capsys.readouterr().err


def test_missing_file_is_io_error(tmp_path):
    assert cli.main([str(tmp_path / "absent.cfg")]) == cli.EXIT_IO


def test_wall_clock_exit(tmp_path):
    path = tmp_path / "heat.cfg"
    path.write_text(_with_output(HEAT.replace("T_end = 0.05", "T_end = 100"), tmp_path / "slow"))
    assert cli.main([str(path), "--max-wall", "0"]) == cli.EXIT_WALL


def test_exit_codes_distinct():
    codes = [cli.EXIT_OK, cli.EXIT_CONFIG, cli.EXIT_BLOWUP, cli.EXIT_FLOOR, cli.EXIT_NUMERICAL, cli.EXIT_IO, cli.EXIT_WALL]
    assert len(set(codes)) == len(codes)


def test_power_reaction_sweep_transition(tmp_path):
    text = _with_output(
        """\
[grid]
extents = 1
cells = 16
bc = neumann0

[model]
reaction = power
reaction.coef = 1
reaction.power = 1
diffusion = constant

[initial]
kind = constant
value = 0.1

[run]
T_end = 1
threshold = 1e4

[sweep]
param = model.reaction.coef
values = 0.5, 2, 40
""",
        tmp_path / "sink",
    )
    rows = cli.sweep(cli.parse_scenario(text))
    assert [r["value"] for r in rows] == ["0.5", "2", "40"]
    assert [r["termination"] for r in rows] == ["ReachedT", "ReachedT", "BlowupDetected"]
    assert (tmp_path / "sink" / "sweep.csv").exists()


def test_sweep_records_child_failure(tmp_path):
    text = _with_output(HEAT + "\n[sweep]\nparam = grid.extents\nvalues = 1; -1\n", tmp_path / "mixed")
    rows = cli.sweep(cli.parse_scenario(text))
    assert rows[0]["termination"] == "ReachedT"
    assert rows[1]["exit"] == str(cli.EXIT_CONFIG)
    assert rows[1]["error"]


def test_resolution_sweep_order(tmp_path):
    text = (ROOT / "scenarios" / "js_residual.cfg").read_text()
    text = text.replace("values = 16,16,16; 32,32,32; 64,64,64", "values = 8,8,8; 16,16,16; 32,32,32").replace("dir = out/js", f"dir = {tmp_path / 'js'}")
    rows = cli.sweep(cli.parse_scenario(text))
    orders = [float(r["order"]) for r in rows[1:]]
    assert min(orders) >= 1.8


def test_reproducible_artifacts(tmp_path):
    outs = []
    for name in ("a", "b"):
        text = _with_output(HEAT.replace("coefficients = 1, 0.3", "random_modes = 3"), tmp_path / name)
        cfg = cli.parse_scenario(text)
        cli.run_scenario(cfg)
        outs.append({p.name: p.read_bytes() for p in (tmp_path / name).iterdir() if p.name != "config.txt"})
    assert outs[0] == outs[1]
