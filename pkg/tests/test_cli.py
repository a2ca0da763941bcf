import csv
import io
import json
import math

import numpy as np
import pytest

from clocklmi.cli import (CSV_COLUMNS, JobConfig, PlantFileError, main, parse_plant_file,
                          parse_plant_text, run_bisection, run_sweep, write_rows)
from clocklmi.sampled import SampledDataPlant
from clocklmi.synth import ImpulsivePlant


def scalar_plant(tmp_path, aj=0.5, name="plant.json"):
    path = tmp_path / name
    path.write_text(json.dumps({"type": "impulsive", "A": [[1.0]], "A_J": [[aj]],
                                "t_min": 0.1, "t_max": 0.2}))
    return path


def test_builtin_example():
    src = JobConfig(mode="ltv", alpha=2.0).source()
    assert isinstance(src, SampledDataPlant)
    assert np.array_equal(src.A, [[0.5, 2.0], [-2.0, 0.5]])
    assert np.array_equal(src.B, [[0.0], [1.0]]) and np.array_equal(src.C_J, [[1.0, 0.0]])
    assert src.dwell.t_min == 0.25


def test_parse_impulsive_with_defaults(tmp_path):
    pl = parse_plant_file(scalar_plant(tmp_path))
    assert isinstance(pl, ImpulsivePlant)
    assert pl.B.shape == (1, 1) and not pl.B.any()
    assert pl.dwell.t_min == 0.1 and pl.dwell.t_max == 0.2


def test_sampled_inferred_without_c():
    text = json.dumps({"A": [[0.0, 1.0], [0.0, 0.0]], "B": [[0.0], [1.0]], "C_J": [[1.0, 0.0]],
                       "t_min": 0.2})
    pl = parse_plant_text(text)
    assert isinstance(pl, SampledDataPlant)
    assert pl.dwell.t_max == pytest.approx(2.0)


def test_ragged_rows_name_the_field():
    text = '{\n  "type": "sampled",\n  "A": [[1, 2], [3]],\n  "B": [[0], [1]],\n' \
           '  "C_J": [[1, 0]],\n  "t_min": 0.1\n}'
    with pytest.raises(PlantFileError) as info:
        parse_plant_text(text)
    assert info.value.field_name == "A" and info.value.line == 3
    assert "'A'" in str(info.value)


def test_parse_errors():
    with pytest.raises(PlantFileError) as info:
        parse_plant_text('{"A": [[1]],\n "B": ')
    assert info.value.line == 2
    with pytest.raises(PlantFileError):
        parse_plant_text(json.dumps({"type": "hybrid", "A": [[1]], "t_min": 0.1}))
    with pytest.raises(PlantFileError):
        parse_plant_text(json.dumps({"A": [[1, 0]], "B": [[1]], "C_J": [[1]], "t_min": 0.1}))
    with pytest.raises(PlantFileError):
        parse_plant_text(json.dumps({"A": [["x"]], "B": [[1]], "C_J": [[1]], "t_min": 0.1}))


def test_job_config_validation():
    with pytest.raises(ValueError):
        JobConfig(mode="nope", alpha=1.0)
    with pytest.raises(ValueError):
        JobConfig(alpha=1.0, bisect_tol=0.0)
    with pytest.raises(ValueError):
        JobConfig()
    with pytest.raises(ValueError):
        JobConfig(alpha=1.0, bisect_lo=0.25).bracket(0.25)
    assert JobConfig(alpha=1.0).bracket(0.25) == (pytest.approx(0.26), pytest.approx(2.5))


def test_bisection_scalar_analyze(tmp_path):
    cfg = JobConfig(mode="analyze", plant_path=str(scalar_plant(tmp_path)), bisect_tol=0.05,
                    bisect_hi=1.0)
    res = run_bisection(cfg)
    assert res.status == "ok"
    assert 0.5 <= res.tmax_star <= math.log(2)
    assert all(p.verify_margin > 0 for p in res.probes if p.verified)
    assert res.margin > 0


def test_no_feasible_point_row(tmp_path):
    cfg = JobConfig(mode="analyze", plant_path=str(scalar_plant(tmp_path, aj=1.0)))
    res = run_bisection(cfg)
    assert res.status == "NoFeasiblePoint" and math.isnan(res.tmax_star)
    assert len(res.probes) == 1


def test_mode_needs_matching_plant(tmp_path):
    cfg = JobConfig(mode="ltv+hold", plant_path=str(scalar_plant(tmp_path)))
    with pytest.raises(ValueError):
        run_bisection(cfg)


def test_single_alpha_single_mode_sweep_row(tmp_path):
    cfg = JobConfig(alpha=1.0, bisect_hi=3.0, bisect_tol=1.0, grid_points=41)
    rows = run_sweep(cfg, [1.0], ["ltv"])
    assert len(rows) == 1
    assert rows[0]["status"] == "ok" and rows[0]["tmax_star"] >= 0.3
    out = tmp_path / "rows.csv"
    write_rows(rows, out)
    header = out.read_text().splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)


def test_reruns_identical_up_to_timing(tmp_path):
    path = str(scalar_plant(tmp_path))

    def run():
        cfg = JobConfig(mode="analyze", plant_path=path, bisect_tol=0.1, bisect_hi=1.0)
        res = run_bisection(cfg)
        return [(p.t_max, p.status, p.verified, p.margin) for p in res.probes], res.tmax_star

    assert run() == run()


def test_main_writes_csv(tmp_path, capsys):
    out = tmp_path / "out.csv"
    code = main(["--mode", "analyze", "--plant", str(scalar_plant(tmp_path)), "--bisect-tol",
                 "0.1", "--bisect-hi", "1.0", "--out", str(out)])
    assert code == 0
    printed = capsys.readouterr().out
    assert "probe t_max=" in printed
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert rows[0]["mode"] == "analyze" and rows[0]["status"] == "ok"


def test_main_reports_bad_input(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"A": [[1, 2]]}')
    assert main(["--mode", "analyze", "--plant", str(bad)]) == 2
    assert "error" in capsys.readouterr().err
