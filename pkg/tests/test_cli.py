import io
import json

import pytest

from risloc.cli import CSV_COLUMNS, apply_axis, main, run_sweep
from risloc.config import emit_config, paper_v, parse_config


def _run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def test_describe_paper_v():
    code, out, _ = _run("describe", "--preset", "paper-v")
    assert code == 0
    assert "RIS1-UE              3.000" in out
    assert "BS-UE               15.906" in out
    assert "parameter layout (39 entries)" in out
    assert "[ 15] path 1 ris_yaw" in out
    assert "2D^2/lambda" in out


def test_describe_empty_scenario(tmp_path):
    p = tmp_path / "empty.toml"
    p.write_text("")
    code, out, _ = _run("describe", "--config", str(p))
    assert code == 0
    assert out.startswith("scenario custom:")
    assert "RIS1" not in out


def test_sweep_csv_header_and_rows(tmp_path):
    dest = tmp_path / "a.csv"
    code, _, _ = _run("sweep", "--preset", "paper-v", "--grid", "1,4,16", "--out", str(dest))
    assert code == 0
    lines = dest.read_text().splitlines()
    assert lines[0] == "axis,peb_m,oeb_rad,lambda_min_norm,verdict,regime,case"
    assert ",".join(CSV_COLUMNS) == lines[0]
    assert [ln.split(",")[0] for ln in lines[1:]] == ["1", "4", "16"]
    assert all(ln.endswith(",near,a") for ln in lines[1:])


def test_sweep_is_deterministic_across_runs_and_threads(monkeypatch):
    args = ("sweep", "--preset", "paper-v", "--regime", "far", "--grid", "4,9,16", "--seed", "7")
    monkeypatch.delenv("RIS_FIM_THREADS", raising=False)
    first = _run(*args)[1]
    second = _run(*args)[1]
    monkeypatch.setenv("RIS_FIM_THREADS", "3")
    threaded = _run(*args)[1]
    assert first.encode() == second.encode() == threaded.encode()


def test_prior_axis_sweep_rows():
    cfg = paper_v().with_(sweep=paper_v().sweep.__class__("prior", (1e-3, 1e-1, 10.0)))
    res = run_sweep(cfg, workers=1)
    assert len(res.rows) == 3
    oeb = [r.oeb for r in res.rows]
    assert oeb[0] >= oeb[1] >= oeb[2]


def test_apply_axis_targets():
    cfg = paper_v()
    assert apply_axis(cfg, "n_u", 9).ue.count == 9
    assert apply_axis(cfg, "n_r", 16).ris[0].count == 16
    p = apply_axis(cfg, "prior", 0.5).prior
    assert p.ris_orientation == p.ris_position == 0.5


def test_empty_grid_is_an_error():
    code, _, err = _run("sweep", "--preset", "paper-v", "--grid", "")
    assert code == 2
    assert "grid" in err


@pytest.mark.parametrize("check, want", [("lemma3", 0), ("theorem2", 0), ("lemma4", 1)])
def test_validate_exit_status(check, want):
    code, out, _ = _run("validate", check, "--preset", "paper-v")
    assert code == want
    assert out.startswith(f"{check}: {'PASS' if want == 0 else 'FAIL'}")


def test_validate_writes_json(tmp_path):
    dest = tmp_path / "t2.json"
    code, _, _ = _run("validate", "theorem2", "--preset", "paper-v", "--out", str(dest))
    assert code == 0
    doc, = json.loads(dest.read_text())
    assert doc["passed"] is True
    assert doc["rows"][0]["jacobian_diff"] == 0.0


def test_config_error_exit_and_message(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text('name = "x"\n[waveform]\nsymbols = "four"\n')
    code, _, err = _run("describe", "--config", str(p))
    assert code == 2
    assert "line 3, field 'waveform.symbols'" in err


def test_case_needing_two_ris_on_one_ris_config(tmp_path):
    cfg = paper_v()
    p = tmp_path / "one.toml"
    p.write_text(emit_config(cfg.with_(ris=cfg.ris[:1])))
    code, _, err = _run("sweep", "--config", str(p), "--case", "d", "--grid", "4")
    assert code == 2 and "needs 2 RIS" in err


def test_emit_round_trip(tmp_path):
    dest = tmp_path / "p.toml"
    assert _run("emit", "--preset", "paper-v", "--out", str(dest))[0] == 0
    assert parse_config(dest.read_text()) == paper_v()


def test_bad_seed_rejected():
    code, _, _ = _run("sweep", "--preset", "paper-v", "--seed", "-1", "--grid", "4")
    assert code == 2
