import json
import math
import subprocess
import sys
from dataclasses import replace

import pytest

from sinrlab.harness import (COLUMNS, RunConfig, Scenario, ScenarioError, calibrate_dilution, generate, load,
                             loads, read_csv, run_protocol, save, silence_holds, to_csv)
from sinrlab.harness.cli import main
from sinrlab.sinr import SinrParams, Station, pivotal_cell, box_of

from helpers import PARAMS


def test_line_has_path_diameter():
    sc = generate("line", PARAMS, n=4)
    g = sc.graph()
    assert g.connected and g.diameter == 3 and g.max_degree == 2


def test_generation_is_deterministic():
    assert generate("random_geometric", PARAMS, seed=42, n=8).dumps() == \
        generate("random_geometric", PARAMS, seed=42, n=8).dumps()


def test_snowball_cluster_sizes():
    sc = generate("snowball", PARAMS, slots=3)
    xs = sorted(s.x for s in sc.stations)
    # Three clusters at spacing 0.8r, each of radius at most 0.05r.
    groups = []
    for x in xs:
        if groups and x - groups[-1][-1] < 0.3:
            groups[-1].append(x)
        else:
            groups.append([x])
    assert [len(g) for g in groups] == [1, 2, 4]
    assert sc.graph().connected


def test_two_box_places_k_per_box():
    sc = generate("two_box", PARAMS, k=3, seed=1)
    cell = pivotal_cell(PARAMS)
    boxes = {}
    for s in sc.stations:
        boxes[box_of(s, cell)] = boxes.get(box_of(s, cell), 0) + 1
    assert sorted(boxes.values()) == [3, 3]


def test_only_first_station_awake_by_default():
    sc = generate("grid", PARAMS, n=6)
    assert len(sc.awake) == 1 and sc.awake[0] == sc.stations[0].label


def test_labels_within_label_space():
    sc = generate("random_geometric", PARAMS, n=10, seed=3)
    assert sc.n_labels == 20 and all(1 <= u <= 20 for u in sc.labels)


def test_round_trip_is_bit_exact(tmp_path):
    sc = generate("random_geometric", PARAMS, n=7, seed=9)
    path = save(sc, tmp_path / "s.json")
    again = load(path)
    assert again == sc
    assert again.dumps() == path.read_text()


def test_validation_errors():
    sc = generate("line", PARAMS, n=3)
    far = replace(sc, stations=sc.stations + (Station(sc.n_labels, 50.0, 50.0),), n=4)
    with pytest.raises(ScenarioError):
        far.validate()
    dup = replace(sc, stations=sc.stations[:2] + (replace(sc.stations[2], label=sc.stations[0].label),))
    with pytest.raises(ScenarioError):
        dup.validate()
    with pytest.raises(ScenarioError):
        loads(json.dumps({"alpha": 3}))


def test_calibration_values_and_monotonicity():
    d3 = calibrate_dilution(PARAMS, 1).d_silence
    assert 1 <= d3 <= 8
    for k in (1, 2, 3):
        low = calibrate_dilution(SinrParams.with_unit_range(alpha=2.01), k).d_silence
        high = calibrate_dilution(SinrParams.with_unit_range(alpha=4), k).d_silence
        assert low >= high
    assert calibrate_dilution(SinrParams.with_unit_range(alpha=2.01), 3).d_silence > \
        calibrate_dilution(SinrParams.with_unit_range(alpha=4), 3).d_silence


def test_larger_silence_never_breaks_a_passing_radius():
    for k in (1, 2, 3):
        d = calibrate_dilution(PARAMS, k).d_silence
        assert all(silence_holds(PARAMS, k, e) for e in range(d, 9))


def test_zero_density_rejected():
    with pytest.raises(ValueError):
        calibrate_dilution(PARAMS, 0)


def test_metrics_header_and_order():
    res = run_protocol(generate("line", PARAMS, n=3), RunConfig("tree-grower"))
    text = to_csv([res.metrics])
    assert text.splitlines()[0] == ",".join(COLUMNS)
    assert res.metrics.config_hash == res.config_hash


def test_config_hash_depends_on_run_settings():
    sc = generate("line", PARAMS, n=3)
    a = run_protocol(sc, RunConfig("tree-grower")).config_hash
    b = run_protocol(sc, RunConfig("tree-grower", seed=1)).config_hash
    assert a != b


def test_unknown_protocol_rejected():
    with pytest.raises(ValueError):
        RunConfig("flooding")


# ------------------------------------------------------------------- CLI
def test_gen_run_verify_exit_zero(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SINRLAB_OUT", str(tmp_path))
    assert main(["gen", "--kind", "line", "--n", "4"]) == 0
    scen = str(tmp_path / "scenario.json")
    assert main(["run", "--scenario", scen, "--protocol", "wakeup"]) == 0
    assert main(["verify", "--scenario", scen]) == 0
    trace = (tmp_path / "trace.csv").read_text()
    rows = read_csv(tmp_path / "metrics.csv")
    assert trace.startswith(f"# config_hash={rows[0]['config_hash']}\n")


def test_out_flag_used_without_env(tmp_path, monkeypatch):
    monkeypatch.delenv("SINRLAB_OUT", raising=False)
    assert main(["gen", "--kind", "line", "--n", "3", "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "scenario.json").exists()


def test_disconnected_scenario_fails_loudly(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SINRLAB_OUT", str(tmp_path))
    main(["gen", "--kind", "line", "--n", "4"])
    path = tmp_path / "scenario.json"
    doc = json.loads(path.read_text())
    doc["stations"][-1]["x"] += 10.0
    path.write_text(json.dumps(doc))
    code = main(["run", "--scenario", str(path), "--protocol", "tree-grower"])
    assert code != 0
    assert "disconnected" in capsys.readouterr().err


def test_tampered_trace_fails_verification(tmp_path, monkeypatch):
    monkeypatch.setenv("SINRLAB_OUT", str(tmp_path))
    main(["gen", "--kind", "grid", "--n", "4"])
    scen = str(tmp_path / "scenario.json")
    assert main(["run", "--scenario", scen, "--protocol", "tree-grower"]) == 0
    trace = tmp_path / "trace.csv"
    lines = trace.read_text().splitlines()
    rx = next(i for i, line in enumerate(lines) if ",receive," in line)
    lines.insert(rx + 1, lines[rx])
    trace.write_text("\n".join(lines) + "\n")
    assert main(["verify", "--scenario", scen]) != 0


def test_sweep_row_count(tmp_path, monkeypatch):
    monkeypatch.setenv("SINRLAB_OUT", str(tmp_path))
    assert main(["sweep", "--protocol", "multi-broadcast", "--n", "2..8", "--seeds", "10"]) == 0
    rows = read_csv(tmp_path / "sweep.csv")
    assert len(rows) == 70
    assert int(rows[0]["properties_passed"]) > 0


def test_calibrate_command(capsys):
    assert main(["calibrate", "--alpha", "3", "--k-density", "1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["c_derived"] == (2 * out["d_silence"] + 1) ** 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "sinrlab", "calibrate"], capture_output=True, text=True)
    assert proc.returncode == 0 and "d_silence" in proc.stdout
