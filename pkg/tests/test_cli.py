import json

import pytest

from tablekit.annotation import load_annotation
from tablekit.cli import InputError, RunConfig, main, worker_count
from tablekit.report import REPORT_SCHEMA, load_report


@pytest.fixture
def gt(tmp_path):
    path = tmp_path / "gt.json"
    assert main(["generate", "--rows", "4", "--cols", "5", "--merge-prob", "0.3", "--seed", "3",
                 "--deform", "rotation", "-o", str(path)]) == 0
    return path


def test_encode_decode_eval(tmp_path, gt):
    maps, pred, rep = tmp_path / "m.cctm", tmp_path / "pred.json", tmp_path / "rep.json"
    assert main(["encode", str(gt), "-o", str(maps)]) == 0
    assert main(["decode", str(maps), "-o", str(pred)]) == 0
    assert main(["eval", "--pred", str(pred), "--gt", str(gt), "--metrics", "all", "-o", str(rep)]) == 0
    doc = json.loads(rep.read_text())
    assert doc["schema"] == REPORT_SCHEMA
    assert doc["teds"] == 1.0 and doc["weighted_avg_f1"] == 1.0
    assert all(v["f1"] == 1.0 for block in ("physical", "adjacency") for v in doc[block].values())
    assert load_report(rep).teds == 1.0


def test_eval_self(capsys, gt):
    assert main(["eval", "--pred", str(gt), "--gt", str(gt), "--metrics", "all"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["teds"] == 1.0
    assert all(v["f1"] == 1.0 for v in doc["adjacency"].values())


def test_decode_output_reloads_losslessly(tmp_path, gt):
    maps, pred = tmp_path / "m.cctm", tmp_path / "pred.json"
    main(["encode", str(gt), "-o", str(maps)])
    main(["decode", str(maps), "-o", str(pred)])
    text = pred.read_text()
    a = load_annotation(pred)
    pred.unlink()
    from tablekit.annotation import save_annotation
    save_annotation(a, pred)
    assert pred.read_text() == text


def test_schema_error_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema": "wtw-kit/1", "image": {"width": 10, "height": 10}}')
    assert main(["eval", "--pred", str(bad), "--gt", str(bad)]) == 2
    assert capsys.readouterr().err.startswith("tablekit:error:schema: /tables")


def test_missing_file_and_bad_flags(tmp_path):
    assert main(["decode", str(tmp_path / "nope.cctm")]) == 2
    assert main(["encode", "x.json", "-o", "y", "--stride", "3"]) == 2
    assert main(["frobnicate"]) == 2


def test_fail_below(tmp_path, gt):
    other = tmp_path / "other.json"
    main(["generate", "--rows", "3", "--cols", "3", "--seed", "9", "-o", str(other)])
    assert main(["eval", "--pred", str(other), "--gt", str(gt), "--fail-below", "0.9"]) == 1


def test_roundtrip_small(capsys):
    assert main(["roundtrip", "--n", "6", "--seed", "7"]) == 0
    assert "6/6 ok" in capsys.readouterr().out


def test_selftest_quick(capsys):
    assert main(["selftest", "--quick"]) == 0
    out = capsys.readouterr().out
    assert "[PASS] gradients" in out and "FAIL" not in out


def test_render(tmp_path, gt):
    out = tmp_path / "o.svg"
    assert main(["render", str(gt), "-o", str(out)]) == 0
    assert out.read_text().startswith("<svg") and "<polygon" in out.read_text()


def test_generate_fixtures(tmp_path):
    assert main(["generate", "--fixtures", "--n", "2", "--seed", "11", "-o", str(tmp_path)]) == 0
    cases = sorted((tmp_path / "11").iterdir())
    assert len(cases) == 2
    for c in cases:
        assert {p.name for p in c.iterdir()} == {"annotation.json", "maps.cctm", "expected-report.json"}


def test_eval_directories(tmp_path, gt):
    for d in ("p", "g"):
        (tmp_path / d).mkdir()
        (tmp_path / d / "a.json").write_text(gt.read_text())
    assert main(["eval", "--pred", str(tmp_path / "p"), "--gt", str(tmp_path / "g"), "--fail-below", "1.0"]) == 0


def test_worker_count_env(monkeypatch):
    monkeypatch.delenv("TABLEKIT_THREADS", raising=False)
    n = worker_count()
    monkeypatch.setenv("TABLEKIT_THREADS", "1")
    assert worker_count() == 1
    monkeypatch.setenv("TABLEKIT_THREADS", "10000")
    assert worker_count() == n
    monkeypatch.setenv("TABLEKIT_THREADS", "junk")
    with pytest.raises(InputError):
        worker_count()


def test_run_config_validation():
    with pytest.raises(Exception):
        RunConfig(stride=3)
