import json

from click.testing import CliRunner

from toolgym.cli import main


def test_vsp_gen_writes_png_and_sidecar(tmp_path):
    out = tmp_path / "vsp"
    result = CliRunner().invoke(
        main,
        ["vsp", "gen", "--size", "4", "--holes", "3", "--count", "2",
         "--seed", "5", "--out", str(out), "--cell-px", "40"],
    )
    assert result.exit_code == 0, result.output
    pngs = sorted(out.glob("*.png"))
    sidecars = sorted(out.glob("*.json"))
    assert len(pngs) == 2 and len(sidecars) == 2
    record = json.loads(sidecars[0].read_text())
    assert record["task_kind"] == "navigation"
    assert record["size"] == 4
    assert pngs[0].read_bytes().startswith(b"\x89PNG")


def test_jigsaw_gen(tmp_path):
    out = tmp_path / "jig"
    result = CliRunner().invoke(
        main,
        ["jigsaw", "gen", "--count", "1", "--seed", "2", "--out", str(out),
         "--source-px", "90"],
    )
    assert result.exit_code == 0, result.output
    assert len(list(out.glob("*_base.png"))) == 1
    assert len(list(out.glob("*_cand_a.png"))) == 1
    record = json.loads(next(out.glob("*.json")).read_text())
    assert record["label"] in ("A", "B")


def test_curate_emits_dataset(tmp_path):
    out = tmp_path / "data"
    result = CliRunner().invoke(
        main,
        ["curate", "--task", "vsp_verify", "--count", "4", "--reflection", "0.25",
         "--seed", "3", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["records"] == 4
    assert (out / "data.jsonl").exists()


def test_eval_run_in_process(tmp_path):
    report = tmp_path / "report.json"
    result = CliRunner().invoke(
        main,
        ["eval", "run", "--policy", "oracle", "--task", "vsp_verify",
         "--count", "3", "--seed", "1", "--report", str(report)],
    )
    assert result.exit_code == 0, result.output
    assert "acc%=100.00" in result.output
    payload = json.loads(report.read_text())
    assert payload["per_task"]["vsp_verify"]["episodes"] == 3


def test_eval_run_replay(tmp_path):
    data = tmp_path / "ds"
    assert (
        CliRunner()
        .invoke(main, ["curate", "--task", "jigsaw", "--count", "2",
                       "--seed", "4", "--out", str(data)])
        .exit_code
        == 0
    )
    result = CliRunner().invoke(
        main,
        ["eval", "run", "--policy", "replay", "--replay-path", str(data),
         "--count", "1"],
    )
    assert result.exit_code == 0, result.output
    assert "jigsaw" in result.output
