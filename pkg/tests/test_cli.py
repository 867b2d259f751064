import csv
import io
import json
import math

import numpy as np
import pytest
import yaml

from phifamily.cli import main
from phifamily.config import ExperimentConfig, echo, load_config
from phifamily.measure import integrate, make_uniform_grid
from phifamily.runner import ResultTable, emit_csv, field_from_expression, render_csv


def write_config(tmp_path, data, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


def read_table(path):
    text = open(path).read()
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = value
        else:
            body.append(line)
    rows = list(csv.reader(io.StringIO("\n".join(body))))
    return meta, rows[0], rows[1:]


def test_psi_sweep_matches_closed_form(tmp_path):
    cfg = write_config(tmp_path, {"experiment": "psi-sweep",
                                  "psi_sweep": {"witness": "wstar", "schedule": [0.5, 0.9, 0.99]}})
    out = tmp_path / "sweep.csv"
    assert main(["psi-sweep", "--config", cfg, "--out", str(out)]) == 0
    meta, header, rows = read_table(out)
    assert header == ["lambda", "psi", "dpsi"]
    assert len(rows) == 3
    for lam, psi, _ in rows:
        lam = float(lam)
        assert abs(float(psi) - (-lam - math.log1p(-lam))) <= 1e-4
    assert meta["verdict"] == "DerivativeBlowup"
    assert meta["truncated"] == "false"


def test_delta2_probe_on_exponential_chart(tmp_path):
    out = tmp_path / "d2.csv"
    assert main(["delta2-probe", "--out", str(out)]) == 0
    meta, header, rows = read_table(out)
    assert meta["verdict"] == "Violated"
    assert header == ["u", "ratio", "log_ratio"]
    assert len(rows) == 64


def test_norm_of_one_under_square(tmp_path):
    cfg = write_config(tmp_path, {"norm": {"mo": {"kind": "power", "p": 2}, "fields": ["1"]}})
    out = tmp_path / "norm.csv"
    assert main(["norm", "--config", cfg, "--out", str(out)]) == 0
    _, header, rows = read_table(out)
    assert header == ["field", "luxemburg", "orlicz", "ratio", "verdict"]
    (row,) = rows
    assert float(row[1]) == pytest.approx(1.0, abs=1e-7)
    assert float(row[2]) == pytest.approx(2.0, abs=1e-7)
    assert row[4] == "E_space"


def test_counterexample_default_is_certified(tmp_path):
    out = tmp_path / "cx.csv"
    assert main(["counterexample", "--out", str(out)]) == 0
    meta, _, rows = read_table(out)
    values = {r[0]: r for r in rows}
    assert float(values["mass_c"][1]) == pytest.approx(1.0, abs=1e-8)
    assert float(values["mass_c_plus_u"][1]) == pytest.approx(39 / 32, abs=1e-6)
    assert values["mass_c_plus_2u"][2] == "Divergent"
    assert meta["verdict"] == "pass"


def test_exclusion_counterexample(tmp_path):
    cfg = write_config(tmp_path, {"counterexample": {"kind": "exclusion"}})
    out = tmp_path / "ex.csv"
    assert main(["counterexample", "--config", cfg, "--out", str(out)]) == 0
    meta, _, _ = read_table(out)
    assert meta["verdict"] == "pass"


def test_chart_roundtrip_on_kappa_chart(tmp_path):
    cfg = write_config(tmp_path, {"phi": {"kind": "kappa", "kappa": 0.5},
                                  "grid": {"n": 64, "grading": "none"}})
    out = tmp_path / "rt.csv"
    assert main(["chart-roundtrip", "--config", cfg, "--out", str(out)]) == 0
    meta, _, rows = read_table(out)
    assert meta["verdict"] == "pass"
    assert all(float(r[4]) <= 1e-7 for r in rows)


def test_truncated_sweep_keeps_rows_and_fails(tmp_path):
    cfg = write_config(tmp_path, {"psi_sweep": {"witness": None, "field": "-2*log(t) - 2",
                                                "schedule": [0.2, 0.4, 0.6, 0.8]}})
    out = tmp_path / "trunc.csv"
    assert main(["psi-sweep", "--config", cfg, "--out", str(out)]) == 3
    meta, _, rows = read_table(out)
    assert len(rows) == 2
    assert meta["truncated"] == "true" and "error" in meta


def test_output_is_deterministic(tmp_path):
    cfg = write_config(tmp_path, {"psi_sweep": {"witness": "wsubstar"}})
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["psi-sweep", "--config", cfg, "--out", str(a)]) == 0
    assert main(["psi-sweep", "--config", cfg, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_config_echo_round_trips(tmp_path):
    cfg = write_config(tmp_path, {"phi": {"kind": "kappa", "kappa": 0.25},
                                  "delta2_probe": {"points": 32}})
    out = tmp_path / "d2.csv"
    assert main(["delta2-probe", "--config", cfg, "--out", str(out)]) == 0
    meta, _, _ = read_table(out)
    back = ExperimentConfig.model_validate(json.loads(meta["config"]))
    assert back == load_config(cfg)
    assert echo(back) == meta["config"]


def test_json_config_is_accepted(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"norm": {"fields": ["t"]}}))
    assert load_config(str(path)).norm.fields == ["t"]


@pytest.mark.parametrize("data", [
    {"bogus": 1},
    {"grid": {"n": 64, "spacing": 3}},
    {"phi": {"kind": "kappa", "kappa": 1.5}},
    {"norm": {"tol": -1e-8}},
    {"experiment": "norm"},
])
def test_config_errors_exit_2(tmp_path, data):
    cfg = write_config(tmp_path, data)
    assert main(["psi-sweep", "--config", cfg]) == 2


def test_bad_expression_exits_2(tmp_path):
    cfg = write_config(tmp_path, {"norm": {"fields": ["t + q"]}})
    assert main(["norm", "--config", cfg]) == 2


def test_missing_config_exits_2(tmp_path):
    assert main(["norm", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_unwritable_output_exits_4(tmp_path):
    out = tmp_path / "missing_dir" / "x.csv"
    assert main(["norm", "--out", str(out)]) == 4


def test_stdout_when_no_path(capsys):
    assert main(["norm"]) == 0
    captured = capsys.readouterr()
    assert "luxemburg" in captured.out
    assert "norm: 1 rows" in captured.err


def test_empty_table_is_header_only(tmp_path):
    table = ResultTable(["a", "b"], metadata={"library": "x"})
    path = tmp_path / "empty.csv"
    emit_csv(table, path)
    assert path.read_text() == "# library: x\na,b\n"


def test_float_format_and_row_width():
    table = ResultTable(["x", "verdict"])
    table.add(math.pi, "Finite")
    table.add(np.float64(1e-20), "")
    assert render_csv(table).splitlines()[1:] == ["3.14159265359,Finite", "1e-20,"]
    with pytest.raises(ValueError):
        table.add(1.0)
    with pytest.raises(ValueError, match="verdict"):
        table.add(1.0, "Maybe")


def test_log_expressions_stay_finite_on_graded_grids():
    g = make_uniform_grid(256, singular_ends="left")
    v = integrate(field_from_expression(g, "-log(t) - 1"))
    assert v.is_finite and abs(v.value) <= 1e-9
