import json
import textwrap

import numpy as np
import pytest

from csatml import experiments as ex
from csatml import sim
from csatml.cli import main
from csatml.config import load_config, parse_config
from csatml.models import TrainConfig

SMALL = textwrap.dedent("""
    seed: 5
    scenarios:
      - ap_count: 1
        duration: 40
      - ap_count: 2
        placements: [{distance_ft: 6, sight: LOS}, {distance_ft: 15, sight: LOS}]
        duration: 40
    dataset: {w: 32, max_chunks_per_class: 200}
    train: {optimizer: Adam, lr: 0.001, epochs: 2, seed: 5}
    online: {initial: 1}
""")


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(SMALL)
    return p


def test_config_covers_every_field(cfg_file):
    cfg = load_config(cfg_file)
    assert cfg.seed == 5 and len(cfg.scenarios) == 2
    assert cfg.scenarios[1].placements[1] == sim.Placement(15, "LOS")
    assert cfg.train == TrainConfig(optimizer="Adam", lr=0.001, epochs=2, seed=5)
    assert cfg.dataset["w"] == 32 and cfg.online["duty"] == {0: 1.0, 1: 0.5, 2: 0.33}
    full = parse_config({"scenarios": [{
        "ap_count": 0, "placements": [], "duration": 1, "sample_rate": 100, "seed": 3,
        "traffic": "FullBuffer", "noise_floor_dbm": -90}]})
    assert full.scenarios[0].noise_floor_dbm == -90 and full.scenarios[0].seed == 3


@pytest.mark.parametrize("raw, match", [
    ({"bogus": 1}, "unknown key"),
    ({"train": {"lr": -1}}, "lr"),
    ({"train": {"learning_rate": 1}}, "unknown key"),
    ({"scenarios": [{"ap_count": 1}]}, "missing duration"),
    ({"scenarios": [{"ap_count": 1, "duration": -3}]}, "duration"),
    ({"model": {"family": "RNN"}}, "family"),
])
def test_config_rejections(raw, match):
    with pytest.raises(ValueError, match=match):
        parse_config(raw)


def test_cli_stepwise_matches_pipeline(cfg_file, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["simulate", "--config", str(cfg_file), "--out", str(out)]) == 0
    assert (out / "traces.png").stat().st_size > 0
    traces = sorted(str(p) for p in out.glob("trace_*.csv"))
    assert main(["prepare", "--config", str(cfg_file), *traces, "--out", str(out / "ds")]) == 0
    assert main(["train", "--config", str(cfg_file), "--dataset", str(out / "ds"),
                 "--out", str(out)]) == 0
    assert (out / "training.png").exists()
    assert main(["eval", "--dataset", str(out / "ds"), "--model", str(out / "model.ckpt"),
                 "--out", str(out / "eval.csv")]) == 0
    lines = (out / "eval.csv").read_text().splitlines()
    assert lines[0] == "method,ap_count,accuracy,P_D,P_FA,TP,FN,FP,TN" and len(lines) == 5

    pipe = tmp_path / "pipe"
    assert main(["pipeline", "--config", str(cfg_file), "--out", str(pipe)]) == 0
    assert (pipe / "eval_report.csv").read_bytes() == (out / "eval.csv").read_bytes()
    assert (pipe / "train_report.csv").read_bytes() == (out / "train_report.csv").read_bytes()


def test_cli_online(cfg_file, tmp_path, capsys):
    out = tmp_path / "run"
    main(["pipeline", "--config", str(cfg_file), "--out", str(out)])
    capsys.readouterr()
    trace = sim.simulate_trace(sim.ScenarioConfig.standard(2, 2.0, seed=99))
    inp = tmp_path / "samples.txt"
    inp.write_text("\n".join(f"{v:.3f}" for v in trace.values) + "\nnan\n")
    assert main(["online", "--config", str(cfg_file), "--model", str(out / "model.ckpt"),
                 "--input", str(inp)]) == 0
    lines = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
    assert lines[-1]["summary"]["chunks"] == len(trace.values) // 32
    assert lines[-1]["summary"]["dropped"] == 1
    assert {"time_s", "predicted_class", "confirmed_class", "duty_cycle"} <= set(lines[0])


def test_cli_errors_exit_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("train: {optimizer: Nesterov}\nscenarios: []\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "optimizer" in capsys.readouterr().err
    assert main(["eval", "--dataset", str(tmp_path / "none"), "--model", "x"]) == 2
    (tmp_path / "s.yaml").write_text("sweep: {widths: [1, 4096]}\n")
    assert main(["sweep", "--config", str(tmp_path / "s.yaml"), "--out", str(tmp_path)]) == 2
    assert "4096" in capsys.readouterr().err


# -- experiments --------------------------------------------------------------------------

def test_sweep_rejects_short_trace_before_training():
    tr = [sim.simulate_trace(sim.ScenarioConfig.standard(ap, 1.0)) for ap in (1, 2)]
    with pytest.raises(ValueError, match="fewer than the largest width 512"):
        ex.run_sweep([4, 512], tr, 2, TrainConfig(epochs=1))


def test_sweep_small_run_rows():
    tr = ex.sweep_traces(2, 20.0, seed=1)
    rows = ex.run_sweep([4, 16], tr, 2, TrainConfig(optimizer="Adam", lr=1e-3, epochs=1),
                        max_chunks_per_class=100, seed=1)
    assert [(r.w, r.k) for r in rows] == [(4, 2), (16, 2)]
    assert ex.sweep_csv(rows).splitlines()[0] == "w,k,test_accuracy,epochs,n_train,n_test"


def test_default_widths_cover_named_points():
    assert {384, 512, 1, 2048} <= set(ex.DEFAULT_WIDTHS)
    assert ex.validate_widths(ex.DEFAULT_WIDTHS)


def test_scenario_matrix():
    scn = ex.comparison_scenarios(10.0, seed=0)
    assert len(scn) == 6
    by = {(c, s): cfg for c, s, cfg in scn}
    b, c = by[("B", "LOS")], by[("C", "LOS")]
    assert b.ap_count == c.ap_count == 1
    assert b.placements[0].distance_ft == 6 and c.placements[0].distance_ft == 15
    assert by[("A", "NLOS")].ap_count == 2
    assert all(p.sight == "NLOS" for p in by[("A", "NLOS")].placements)


def test_comparison_shape_and_ac_file(tmp_path):
    ac = tmp_path / "ac.csv"
    ac.write_text("scenario,sight,accuracy,P_D,P_FA\nA,LOS,0.93,0.9,0.02\n")
    rows, _, _ = ex.run_comparison(30.0, 64, TrainConfig(optimizer="Adam", lr=1e-3, epochs=1),
                                   seed=2, max_chunks_per_class=150,
                                   ac_results=ex.read_ac_results(ac))
    assert len(rows) == len(ex.METHODS) * 3 * 2
    got = {(r.method, r.scenario, r.sight): r for r in rows}
    assert got[("AC-external", "A", "LOS")].accuracy == 0.93
    assert np.isnan(got[("AC-external", "B", "LOS")].accuracy)
    text = ex.comparison_csv(rows)
    assert "AC-external,B,LOS,,," in text
    for r in rows:
        if r.method != "AC-external":
            assert r.accuracy == pytest.approx((r.p_d + 1 - r.p_fa) / 2)


def test_bad_ac_file(tmp_path):
    ac = tmp_path / "ac.csv"
    ac.write_text("scenario,sight,accuracy\nA,LOS,high\n")
    with pytest.raises(ValueError, match="ac.csv:2"):
        ex.read_ac_results(ac)
