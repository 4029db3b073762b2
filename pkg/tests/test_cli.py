"""Exit codes and stdout contract of the iqh command line."""

import json

import pytest

from iqharness.cli import main
from iqharness.runstore import RunStore, Table

from conftest import MEAN_INTENSITY_TASK, write_stub_task


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "sanity" in capsys.readouterr().out


def test_usage_errors_exit_one(capsys):
    assert main(["frobnicate"]) == 1
    assert main(["run"]) == 1  # --plan is required
    assert main([]) == 1
    assert "error:" in capsys.readouterr().err


def test_modify_happy_path(small_dataset, capsys):
    code = main(["modify", str(small_dataset), "--kind", "jpeg_quality",
                 "--quality", "40"])
    assert code == 0
    out = capsys.readouterr().out
    assert "created" in out and "small#jpg40_modifier" in out
    derived = small_dataset.parent / "small#jpg40_modifier"
    assert (derived / "images" / "im0.png").is_file()
    assert (derived / "annotations.json").is_file()

    # same destination again: refuse, then accept with --overwrite
    assert main(["modify", str(small_dataset), "--kind", "jpeg_quality",
                 "--quality", "40"]) == 1
    assert main(["modify", str(small_dataset), "--kind", "jpeg_quality",
                 "--quality", "40", "--overwrite"]) == 0


@pytest.mark.parametrize("argv_tail", [
    ["--kind", "jpeg_quality", "--sigma", "2"],   # wrong flag for the kind
    ["--kind", "jpeg_quality"],                   # missing flag
    ["--kind", "gaussian_noise"],
    ["--kind", "warp"],                           # unknown kind
    ["--kind", "identity", "--quality", "3"],
    ["--kind", "jpeg_quality", "--quality", "0"],
])
def test_modify_rejects_bad_parameters(small_dataset, argv_tail, capsys):
    assert main(["modify", str(small_dataset), *argv_tail]) == 1
    assert "error:" in capsys.readouterr().err


def test_quiet_silences_stdout(small_dataset, capsys):
    code = main(["modify", str(small_dataset), "--kind", "identity", "--quiet"])
    assert code == 0
    assert capsys.readouterr().out == ""


def test_metric_command(small_dataset, tmp_path, capsys):
    assert main(["metric", str(small_dataset), "--name", "snr_hb"]) == 0
    assert "snr_hb: aggregate=" in capsys.readouterr().out

    out = tmp_path / "m"
    assert main(["metric", str(small_dataset), "--name", "snr_hb",
                 "--out", str(out)]) == 0
    assert (out / "metric_snr_hb.json").is_file()
    assert main(["metric", str(small_dataset), "--name", "snr_hb",
                 "--out", str(out)]) == 1  # clobber guard
    assert main(["metric", str(small_dataset), "--name", "snr_hb",
                 "--out", str(out), "--overwrite"]) == 0


def test_metric_unknown_name(small_dataset, capsys):
    assert main(["metric", str(small_dataset), "--name", "nope"]) == 1
    assert "error:" in capsys.readouterr().err


def test_metric_full_reference_needs_ref(small_dataset):
    assert main(["metric", str(small_dataset), "--name", "psnr"]) == 1
    assert main(["metric", str(small_dataset), "--name", "psnr",
                 "--ref", str(small_dataset)]) == 0


def test_eval_command(small_dataset, tmp_path, capsys):
    gt = small_dataset / "annotations.json"
    doc = json.loads(gt.read_text())
    preds = [{"image_id": a["image_id"], "category_id": a["category_id"],
              "bbox": a["bbox"], "score": 0.9} for a in doc["annotations"]]
    pred_path = tmp_path / "preds.json"
    pred_path.write_text(json.dumps(preds))

    assert main(["eval", "--gt", str(gt), "--pred", str(pred_path)]) == 0
    assert "AP=1 " in capsys.readouterr().out

    assert main(["eval", "--gt", str(tmp_path / "absent.json"),
                 "--pred", str(pred_path)]) == 2  # unreadable input file


def test_sanity_command(small_dataset, tmp_path, capsys):
    out = tmp_path / "clean"
    assert main(["sanity", str(small_dataset), "--out", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "duplicates_removed: 0" in stdout
    assert "clean: yes" in stdout
    assert (out / "annotations.json").is_file()

    assert main(["sanity", str(small_dataset), "--out", str(out)]) == 1
    assert main(["sanity", str(small_dataset), "--out", str(out),
                 "--overwrite"]) == 0


def test_stats_command(small_dataset, tmp_path, capsys):
    out = tmp_path / "stats"
    assert main(["stats", str(small_dataset), "--out", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "mean image size: 32 x 32" in stdout
    assert "annotations: 3" in stdout
    assert (out / "stats.json").is_file()
    assert main(["stats", str(small_dataset), "--out", str(out)]) == 1


def _write_plan(tmp_path, small_dataset, task_body=MEAN_INTENSITY_TASK):
    task = write_stub_task(tmp_path / "task.py", task_body)
    plan = {
        "experiment_name": "cliexp",
        "task": {"executable": str(task)},
        "train": str(small_dataset),
        "modifiers": [{"kind": "identity"}],
        "hyperparams": {"lr": [0.1, 0.2]},
    }
    path = tmp_path / "plan.json"
    path.write_text(json.dumps(plan))
    return path


def test_run_and_report_commands(small_dataset, tmp_path, capsys):
    plan = _write_plan(tmp_path, small_dataset)
    store = tmp_path / "store"
    assert main(["run", "--plan", str(plan), "--store", str(store)]) == 0
    stdout = capsys.readouterr().out
    assert "runs: 2 completed=2 failed=0 timeout=0" in stdout

    out = tmp_path / "rep"
    assert main(["report", "--experiment", "cliexp", "--x", "lr",
                 "--y", "mean_intensity_final", "--store", str(store),
                 "--out", str(out)]) == 0
    table = Table.read_csv(out / "report.csv")
    assert table.columns == ("lr", "mean_intensity_final")
    assert [row[0] for row in table.rows] == [0.1, 0.2]
    assert (out / "plot_mean_intensity_final.svg").is_file()

    assert main(["report", "--experiment", "cliexp", "--x", "lr",
                 "--y", "mean_intensity_final", "--store", str(store),
                 "--out", str(out)]) == 1  # clobber guard

    assert main(["report", "--experiment", "ghost", "--x", "lr",
                 "--y", "mean_intensity_final", "--store", str(store),
                 "--out", str(tmp_path / "rep2")]) == 1  # unknown experiment


def test_run_partial_failure_exits_three(small_dataset, tmp_path, capsys):
    flaky = (
        "import json, sys\n"
        "from pathlib import Path\n"
        "args = sys.argv[1:]\n"
        "if args[args.index('--lr') + 1] == '0.2':\n"
        "    sys.exit(1)\n"
        "out = Path(args[args.index('--outputpath') + 1])\n"
        "out.mkdir(parents=True, exist_ok=True)\n"
        "(out / 'results.json').write_text(json.dumps({'loss': [0.1]}))\n"
    )
    plan = _write_plan(tmp_path, small_dataset, task_body=flaky)
    code = main(["run", "--plan", str(plan), "--store", str(tmp_path / "store")])
    assert code == 3
    assert "failed=1" in capsys.readouterr().out


def test_run_missing_plan_exits_one(tmp_path):
    assert main(["run", "--plan", str(tmp_path / "absent.json")]) == 1


def test_store_env_variable(small_dataset, tmp_path, monkeypatch):
    plan = _write_plan(tmp_path, small_dataset)
    root = tmp_path / "envstore"
    monkeypatch.setenv("IQH_STORE", str(root))
    assert main(["run", "--plan", str(plan), "--quiet"]) == 0
    assert len(RunStore(root).load_runs("cliexp")) == 2
