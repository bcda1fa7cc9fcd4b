import json

import pytest

from fatesim.config import settings
from fatesim.main import main
from fatesim.services.artifacts import CHART_FILE, MANIFEST_FILE, REPORT_JSON, REPORT_TEXT, RUNS_DIR, SUMMARY_FILE
from fatesim.services.model_service import load_model_file


@pytest.fixture(autouse=True)
def no_forced_output(monkeypatch):
    monkeypatch.setattr(settings, "FATESIM_OUT", "")


@pytest.fixture
def model_path(tmp_path, tiny_document_factory):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(tiny_document_factory()), encoding="utf-8")
    return path


def run_args(model_path, out, *extra):
    return ["run", "--model", str(model_path), "--algos", "random,qlearn", "--reps", "3",
            "--steps", "40", "--episode-length", "10", "--out", str(out), *extra]


def read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


class TestRun:
    def test_writes_every_artifact(self, model_path, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(run_args(model_path, out)) == 0
        csvs = sorted(p.name for p in (out / RUNS_DIR).iterdir())
        assert csvs == [f"{a}__seed{s}.csv" for a in ("qlearn", "random") for s in range(3)]
        for name in (SUMMARY_FILE, MANIFEST_FILE, REPORT_JSON, REPORT_TEXT, CHART_FILE):
            assert (out / name).exists()

        summary = read_json(out / SUMMARY_FILE)
        assert summary["seeds"] == [0, 1, 2]
        assert summary["failures"] == {}
        assert len(summary["runs"]) == 6
        assert read_json(out / MANIFEST_FILE)["complete"] is True
        assert "Winner:" in capsys.readouterr().out

    def test_rerun_is_byte_identical(self, model_path, tmp_path):
        first, second = tmp_path / "first", tmp_path / "second"
        assert main(run_args(model_path, first)) == 0
        assert main(run_args(model_path, second)) == 0
        for csv in (first / RUNS_DIR).iterdir():
            assert csv.read_bytes() == (second / RUNS_DIR / csv.name).read_bytes()
        for name in (REPORT_JSON, REPORT_TEXT, CHART_FILE):
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_environment_output_override(self, model_path, tmp_path, monkeypatch):
        forced = tmp_path / "forced"
        monkeypatch.setattr(settings, "FATESIM_OUT", str(forced))
        assert main(run_args(model_path, tmp_path / "ignored")) == 0
        assert (forced / SUMMARY_FILE).exists()
        assert not (tmp_path / "ignored").exists()

    def test_knob_overrides_reach_the_summary(self, model_path, tmp_path):
        out = tmp_path / "out"
        assert main(run_args(model_path, out, "--set", "qlearn.epsilon=0.5", "--set", "qlearn.gamma=0.99")) == 0
        assert read_json(out / SUMMARY_FILE)["config"]["overrides"] == {"qlearn": {"epsilon": 0.5, "gamma": 0.99}}

    def test_config_file_with_flag_override(self, model_path, tmp_path):
        config = tmp_path / "experiment.json"
        config.write_text(json.dumps({"steps": 30, "episode_length": 10, "repetitions": 4,
                                      "algorithms": ["random", "qlearn"]}), encoding="utf-8")
        out = tmp_path / "out"
        argv = ["run", "--model", str(model_path), "--config", str(config), "--reps", "2", "--out", str(out)]
        assert main(argv) == 0
        resolved = read_json(out / SUMMARY_FILE)["config"]
        assert resolved["steps"] == 30
        assert resolved["repetitions"] == 2

    def test_desk_scale(self, model_path, tmp_path):
        out = tmp_path / "out"
        argv = ["run", "--model", str(model_path), "--algos", "random,qlearn", "--desk",
                "--steps", "20", "--episode-length", "10", "--out", str(out)]
        assert main(argv) == 0
        assert len(read_json(out / SUMMARY_FILE)["seeds"]) == settings.DESK_SCALE_REPETITIONS

    def test_unknown_algorithm(self, model_path, tmp_path, capsys):
        out = tmp_path / "out"
        argv = ["run", "--model", str(model_path), "--algos", "random,a2c", "--out", str(out)]
        assert main(argv) == 2
        assert "a2c" in capsys.readouterr().err

    def test_malformed_override(self, model_path, tmp_path):
        assert main(run_args(model_path, tmp_path / "out", "--set", "epsilon")) == 2

    def test_missing_model_leaves_partial_artifacts(self, tmp_path):
        out = tmp_path / "out"
        assert main(run_args(tmp_path / "missing.json", out)) == 1
        manifest = read_json(out / MANIFEST_FILE)
        assert manifest["complete"] is False
        assert set(manifest["runs"].values()) == {"failed"}
        assert not (out / REPORT_JSON).exists()

    @pytest.mark.parametrize("command", ["run", "sweep"])
    def test_invalid_model_is_rejected_before_running(self, tmp_path, tiny_document_factory, capsys, command):
        document = tiny_document_factory()
        document["max_widget_slots"] = 2
        path = tmp_path / "narrow.json"
        path.write_text(json.dumps(document), encoding="utf-8")
        out = tmp_path / "out"
        argv = [command, "--model", str(path), "--reps", "2", "--steps", "20", "--episode-length", "10",
                "--out", str(out), *(["--grid", "qlearn"] if command == "sweep" else [])]
        assert main(argv) == 2
        err = capsys.readouterr().err
        assert "error: Invalid model" in err
        assert err.count("max_widget_slots") >= 2  # log line and error message
        assert not (out / RUNS_DIR).exists()

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--steps", "many"])
        assert exc.value.code == 2


class TestSweep:
    def test_grid_cells_become_labels(self, model_path, tmp_path):
        out = tmp_path / "out"
        argv = ["sweep", "--model", str(model_path), "--grid", "qlearn", "--reps", "2",
                "--steps", "20", "--episode-length", "10", "--out", str(out)]
        assert main(argv) == 0
        names = {p.name for p in (out / RUNS_DIR).iterdir()}
        assert len(names) == 16
        assert "qlearn#3__seed1.csv" in names
        report = read_json(out / REPORT_JSON)
        assert set(report["algorithms"]) == {f"qlearn#{i}" for i in range(1, 9)}

    def test_unknown_grid(self, model_path):
        with pytest.raises(SystemExit):
            main(["sweep", "--model", str(model_path), "--grid", "a2c"])


class TestStats:
    def test_reproduces_the_run_report(self, model_path, tmp_path, capsys):
        out, again = tmp_path / "out", tmp_path / "again"
        assert main(run_args(model_path, out)) == 0
        capsys.readouterr()
        assert main(["stats", "--in", str(out), "--out", str(again)]) == 0
        assert (again / REPORT_JSON).read_bytes() == (out / REPORT_JSON).read_bytes()
        assert "Winner:" in capsys.readouterr().out

    def test_alpha_override(self, model_path, tmp_path):
        out = tmp_path / "out"
        assert main(run_args(model_path, out)) == 0
        assert main(["stats", "--in", str(out), "--alpha", "0.01"]) == 0
        assert read_json(out / REPORT_JSON)["alpha"] == 0.01

    def test_missing_directory(self, tmp_path):
        assert main(["stats", "--in", str(tmp_path / "nowhere")]) == 2

    def test_too_few_runs(self, model_path, tmp_path):
        out = tmp_path / "out"
        argv = ["run", "--model", str(model_path), "--algos", "random", "--reps", "2",
                "--steps", "20", "--episode-length", "10", "--out", str(out)]
        assert main(argv) == 0
        assert main(["stats", "--in", str(out)]) == 2


class TestModelCommands:
    def test_validate(self, model_path, capsys):
        assert main(["validate", str(model_path)]) == 0
        assert "3 nodes" in capsys.readouterr().out

    def test_validate_broken_model(self, tmp_path, tiny_document_factory, capsys):
        document = tiny_document_factory()
        document["nodes"][0]["transitions"][0]["destination"] = "nowhere"
        path = tmp_path / "broken.json"
        path.write_text(json.dumps(document), encoding="utf-8")
        assert main(["validate", str(path)]) == 2
        assert "nowhere" in capsys.readouterr().err

    def test_gen_to_file(self, tmp_path):
        out = tmp_path / "social.json"
        assert main(["gen", "--preset", "social/aug_5", "--out", str(out)]) == 0
        model = load_model_file(out)
        assert len(model.app_nodes) == 18
        assert len(model.node("login").transitions) == 9

    def test_gen_to_stdout(self, capsys):
        assert main(["gen", "--preset", "player/20_str", "--seed", "4"]) == 0
        document = json.loads(capsys.readouterr().out)
        assert document["initial_node"] == "home"
        assert len(document["string_pool"]) == 20

    def test_gen_unknown_preset(self):
        assert main(["gen", "--preset", "chat/20_str"]) == 2

    def test_presets(self, capsys):
        assert main(["presets"]) == 0
        out = capsys.readouterr().out
        assert "social/aug_10" in out
        assert "market/80_str" in out
        assert len(out.strip().splitlines()) == 17
