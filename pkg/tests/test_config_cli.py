import csv
import json
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from retrialq import __version__
from retrialq.cli import compare_checks, log_grid, main
from retrialq.config import KEYS, load_config, parse_config
from retrialq.errors import ConfigError
from retrialq.model import Deterministic, Lomax, ParetoTail

MODEL_E1 = """\
model.lambda = 1
model.mu = 1
model.batch.kind = deterministic
model.batch.m = 1
model.service.kind = lomax
model.service.sigma = 0.75
model.service.d = 2.5
"""


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


# -- config parsing -----------------------------------------------------------

def test_parse_model():
    cfg = parse_config(MODEL_E1 + "exact.trunc = 128  # inline comment\n; full-line comment\n")
    p = cfg.model()
    assert p.batch == Deterministic(1) and p.service == Lomax(0.75, 2.5)
    assert cfg.trunc() == 128


def test_defaults_and_resolution():
    cfg = parse_config(MODEL_E1)
    assert cfg.get("exact.trunc") == 8192
    res = cfg.resolved("compare.")
    assert res["compare.ratio_tol"] == 0.05
    assert set(res) == {k for k in KEYS if k.startswith("compare.")}
    assert parse_config(MODEL_E1 + "sim.horizon = 10\n").resolved("sim.")["sim.warmup"] is None


@pytest.mark.parametrize(
    "extra",
    [
        "model.lamda = 1\n",  # unknown key
        "Model.Lambda = 1\n",  # keys are case-sensitive
        "model.lambda = 2\n",  # repeated key
        "[model]\nlambda = 1\n",  # section headers are not part of the grammar
        "exact.trunc = many\n",
        "model.batch.p = 0.5\n",  # does not apply to a deterministic batch
        "compare.sim = maybe\n",
    ],
)
def test_strict_parsing(extra):
    with pytest.raises(ConfigError):
        parse_config(MODEL_E1 + extra).model()


def test_unknown_kind():
    with pytest.raises(ConfigError, match="kind"):
        parse_config(MODEL_E1.replace("lomax", "weibull")).model()


def test_missing_parameter():
    with pytest.raises(ConfigError, match="model.service.d"):
        parse_config(MODEL_E1.replace("model.service.d = 2.5\n", "")).model()


def test_bad_parameter_value():
    with pytest.raises(ConfigError):
        parse_config(MODEL_E1.replace("sigma = 0.75", "sigma = -1")).model()


def test_missing_horizon():
    with pytest.raises(ConfigError, match="sim.horizon"):
        parse_config(MODEL_E1).sim()


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")


def test_second_order_section():
    cfg = parse_config(
        "second_order.f1.theta = 1\nsecond_order.f1.d = 1.5\nsecond_order.f2.theta = 1\n"
        "second_order.f2.d = 2.5\nsecond_order.t = 10, 20\n"
    )
    f1, f2, ts, trunc = cfg.second_order()
    assert (f1.index, f2.index, ts, trunc) == (1.5, 2.5, (10, 20), 16384)


@pytest.mark.parametrize("name", ["e1.ini", "case2.ini", "case3.ini", "mm1.ini", "light.ini"])
def test_shipped_model_configs_parse(configs, name):
    load_config(configs / name).model()


def test_shipped_case_configs(configs):
    assert load_config(configs / "case2.ini").model().batch == ParetoTail(2.0, 1.8)
    load_config(configs / "second_order.ini").second_order()


def test_log_grid():
    g = log_grid(256, 1024, 9)
    assert g[0] == 256 and g[-1] == 1024 and np.all(np.diff(g) > 0)
    assert list(log_grid(5, 5, 9)) == [5]
    with pytest.raises(ConfigError):
        log_grid(0, 10, 3)


# -- exit codes ---------------------------------------------------------------

def test_exit_config_error(tmp_path, capsys):
    cfg = write(tmp_path, MODEL_E1 + "bogus.key = 1\n")
    assert main(["exact", str(cfg), "-o", str(tmp_path / "x.csv")]) == 2
    assert "bogus.key" in capsys.readouterr().err


def test_exit_missing_config(tmp_path):
    assert main(["exact", str(tmp_path / "missing.ini"), "-o", str(tmp_path / "x.csv")]) == 2


def test_exit_unstable(tmp_path):
    cfg = write(tmp_path, MODEL_E1.replace("model.lambda = 1", "model.lambda = 3") + "exact.trunc = 64\n")
    assert main(["exact", str(cfg), "-o", str(tmp_path / "x.csv")]) == 3


def test_exit_unsupported(tmp_path, configs):
    assert main(["asym", str(configs / "light.ini"), "-o", str(tmp_path / "a.csv")]) == 5


def test_exit_infinite_mean(tmp_path):
    cfg = write(tmp_path, MODEL_E1.replace("model.service.d = 2.5", "model.service.d = 0.9"))
    # an infinite mean is outside the supported regime
    assert main(["asym", str(cfg), "-o", str(tmp_path / "a.csv")]) == 5


def test_exit_compare_fail(tmp_path, capsys):
    cfg = write(tmp_path, MODEL_E1 + "exact.trunc = 1024\ncompare.j_lo = 64\ncompare.j_hi = 256\ncompare.ratio_tol = 1e-9\n")
    assert main(["compare", str(cfg), "-o", str(tmp_path / "r.json")]) == 6
    out = capsys.readouterr().out
    assert "FAIL tail_ratio_lmu_linf" in out
    assert json.loads((tmp_path / "r.json").read_text())["pass"] is False


def test_compare_window_outside_truncation(tmp_path):
    cfg = write(tmp_path, MODEL_E1 + "exact.trunc = 128\n")
    assert main(["compare", str(cfg), "-o", str(tmp_path / "r.json")]) == 2


def test_version_and_module_entry():
    out = subprocess.run([sys.executable, "-m", "retrialq", "--version"], capture_output=True, text=True, check=True)
    assert __version__ in out.stdout


# -- exact --------------------------------------------------------------------

@pytest.fixture(scope="module")
def exact_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("exact")
    cfg = write(d, MODEL_E1 + "exact.trunc = 4096\n", "e1.ini")
    paths = []
    for i in (1, 2):
        out, svg = d / f"run{i}.csv", d / f"run{i}.svg"
        assert main(["exact", str(cfg), "-o", str(out), "--svg", str(svg)]) == 0
        paths.append((out, out.with_suffix(".json"), svg))
    return paths


def test_exact_csv_shape(exact_run):
    rows = read_csv(exact_run[0][0])
    assert len(rows) == 4098
    assert all(len(r) == 15 for r in rows)
    assert rows[0][:3] == ["j", "k_star_pmf", "k_star_tail"]
    assert rows[0][-2:] == ["lmu_pmf", "lmu_tail"]


def test_exact_csv_values(exact_run):
    rows = read_csv(exact_run[0][0])
    head = rows[0]
    first = dict(zip(head, rows[1]))
    assert float(first["d0_tail"]) == pytest.approx(1 - float(first["d0_pmf"]), abs=1e-15)
    # 17 significant digits round-trip
    assert all(len(v.replace("-", "").replace(".", "").split("e")[0].lstrip("0")) <= 17 for v in rows[1])


def test_exact_sidecar(exact_run):
    meta = json.loads(exact_run[0][1].read_text())
    assert meta["rho"] == pytest.approx(0.5) and meta["psi"] == pytest.approx(1.0)
    assert set(meta["deficits"]) == {"k_star", "k_circ", "k", "d0", "d1", "linf", "lmu"}
    assert meta["config"]["exact.trunc"] == 4096 and meta["command"] == "exact"


def test_exact_outputs_deterministic(exact_run):
    (a_csv, a_json, a_svg), (b_csv, b_json, b_svg) = exact_run
    assert a_csv.read_bytes() == b_csv.read_bytes()
    assert a_json.read_bytes() == b_json.read_bytes()
    assert a_svg.read_bytes() == b_svg.read_bytes()


def test_svg_is_log_log_xml(exact_run):
    root = ET.parse(exact_run[0][2]).getroot()
    assert root.tag.endswith("svg")
    ids = {el.get("id") for el in root.iter() if el.get("id")}
    # matplotlib labels major ticks xtick_1, xtick_2, ...; 1..4096 spans four decades
    assert sum(1 for i in ids if i.startswith("xtick_")) >= 3
    assert sum(1 for i in ids if i.startswith("ytick_")) >= 3


# -- asym ---------------------------------------------------------------------

def test_asym_e1(tmp_path, configs):
    out = tmp_path / "a.csv"
    assert main(["asym", str(configs / "e1.ini"), "-o", str(out)]) == 0
    rep = json.loads(out.with_suffix(".json").read_text())
    assert rep["case_id"] == "Case1" and rep["a"] == 2.5
    assert rep["constants"]["c_D0"]["value"] == pytest.approx(1.6)
    assert rep["constants"]["refined_coefficient"]["value"] == pytest.approx(3.6)
    rows = read_csv(out)
    assert rows[0][0] == "j" and "refined" in rows[0] and "N_B" in rows[0]
    # 64 log-spaced points, rounded to distinct integers
    assert rows[1][0] == "1" and rows[-1][0] == "8192" and 40 < len(rows) <= 65
    # canonical serialisation
    assert out.with_suffix(".json").read_text() == json.dumps(rep, sort_keys=True, indent=2) + "\n"


def test_asym_case2_omits_service_curves(tmp_path, configs):
    out = tmp_path / "a.csv"
    assert main(["asym", str(configs / "case2.ini"), "-o", str(out)]) == 0
    assert "N_B" not in read_csv(out)[0]
    assert "absent" in json.loads(out.with_suffix(".json").read_text())["curves"]["N_B"]


# -- sim ----------------------------------------------------------------------

SIM = MODEL_E1 + "sim.horizon = 2e4\nsim.replications = 3\nsim.base_seed = 5\nsim.j_max = 8\n"


def test_sim_outputs(tmp_path):
    cfg = write(tmp_path, SIM)
    out = tmp_path / "s.csv"
    assert main(["sim", str(cfg), "-o", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["j", "tail", "tail_hw", "d0_tail", "d0_tail_hw", "d1_tail", "d1_tail_hw", "upcrossings", "reliable"]
    assert len(rows) == 9
    meta = json.loads(out.with_suffix(".json").read_text())
    assert 0 <= meta["busy_fraction"] <= 1
    assert meta["seeds"] == [[5, 0], [5, 1], [5, 2]] and len(meta["events"]) == 3


def test_sim_deterministic_across_workers(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sim", str(write(tmp_path, SIM, "a.ini")), "-o", str(a)]) == 0
    assert main(["sim", str(write(tmp_path, SIM + "sim.workers = 3\n", "b.ini")), "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    ja, jb = (json.loads(p.with_suffix(".json").read_text()) for p in (a, b))
    ja["config"].pop("sim.workers"), jb["config"].pop("sim.workers")
    ja.pop("config_file"), jb.pop("config_file")
    assert ja == jb


def test_sim_standard(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sim", str(write(tmp_path, SIM)), "-o", str(out), "--system", "standard"]) == 0
    assert read_csv(out)[0] == ["j", "tail", "tail_hw", "upcrossings", "reliable"]


# -- compare ------------------------------------------------------------------

@pytest.mark.parametrize("name", ["case2.ini", "case3.ini"])
def test_compare_passes(tmp_path, configs, name, capsys):
    out, svg = tmp_path / "r.json", tmp_path / "r.svg"
    assert main(["compare", str(configs / name), "-o", str(out), "--svg", str(svg)]) == 0
    rep = json.loads(out.read_text())
    assert rep["pass"] is True
    assert {c["name"] for c in rep["checks"]} == {
        "tail_ratio_lmu_linf", "difference_over_refined_curve", "D0_tail_over_curve", "D1_tail_over_curve", "K_tail_over_curve",
    }
    assert capsys.readouterr().out.count("PASS") == 5
    ET.parse(svg)


def test_compare_fast_retrials_ratio_is_one():
    cfg = parse_config(MODEL_E1.replace("model.mu = 1", "model.mu = 1e6") + "exact.trunc = 2048\ncompare.j_lo = 16\ncompare.j_hi = 512\n")
    res = compare_checks(cfg.model(), cfg)
    ratio = next(c for c in res["checks"] if c["name"] == "tail_ratio_lmu_linf")
    assert np.all(np.abs(ratio["values"] - 1) <= 1e-3)


# -- second-order -------------------------------------------------------------

def test_second_order_cli(tmp_path, configs):
    out = tmp_path / "so.csv"
    assert main(["second-order", str(configs / "second_order.ini"), "-o", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["t", "ratio", "sum_tail", "f1_tail", "f2_tail"]
    ratios = {int(r[0]): float(r[1]) for r in rows[1:]}
    assert 0.9 <= ratios[2000] <= 1.1
    meta = json.loads(out.with_suffix(".json").read_text())
    assert meta["d"] == 2.5 and meta["f2"] == {"index": 2.5, "theta": 1.0}


def test_second_order_mismatch_exit(tmp_path, configs):
    text = (configs / "second_order.ini").read_text().replace("second_order.f2.d = 2.5", "second_order.f2.d = 3")
    assert main(["second-order", str(write(tmp_path, text)), "-o", str(tmp_path / "so.csv")]) == 2
