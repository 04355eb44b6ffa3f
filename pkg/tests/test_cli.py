import json

import pytest

from pdegreedy.cli import main
from pdegreedy.siren import load_checkpoint
from pdegreedy.snapshots import load_snapshot, save_snapshot


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory, small_snapshot):
    path = tmp_path_factory.mktemp("data")
    save_snapshot(small_snapshot, path / "burgers.txt")
    return path


def run(*argv):
    return main([str(a) for a in argv])


class TestGenerate:
    def test_writes_snapshot_and_manifest(self, tmp_path):
        code = run("generate", "--pde", "burgers", "--n", "32", "--m", "9",
                   "--domain", "-8", "8", "1.0", "--out-dir", tmp_path)
        assert code == 0
        snap = load_snapshot(tmp_path / "burgers.txt")
        assert snap.u.shape == (32, 9)
        manifest = json.loads((tmp_path / "burgers_manifest.json").read_text())
        assert manifest["command"] == "generate"
        assert manifest["config"]["n"] == 32

    def test_unknown_pde_lists_presets(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as err:
            run("generate", "--pde", "wave", "--out-dir", tmp_path)
        assert "allen-cahn" in str(err.value)


class TestSample:
    def test_greedy_sample_csv(self, tmp_path, data_dir):
        code = run("sample", "--snapshot", data_dir / "burgers.txt",
                   "--t-div", "2", "--eps", "1e-3", "--out-dir", tmp_path)
        assert code == 0
        lines = (tmp_path / "samples.csv").read_text().splitlines()
        assert lines[0] == "window,t_index,x_index,t,x,u"
        assert len(lines) > 1
        assert (tmp_path / "samples_manifest.json").exists()

    def test_random_sample_size(self, tmp_path, data_dir):
        code = run("sample", "--snapshot", data_dir / "burgers.txt",
                   "--random", "--size", "100", "--seed", "7",
                   "--out-dir", tmp_path)
        assert code == 0
        lines = (tmp_path / "samples.csv").read_text().splitlines()
        assert len(lines) == 101

    def test_missing_input_fails(self, tmp_path):
        with pytest.raises(SystemExit):
            run("sample", "--snapshot", tmp_path / "absent.txt",
                "--t-div", "1", "--eps", "1e-3", "--out-dir", tmp_path)

    def test_pde_data_dir_lookup(self, tmp_path, data_dir):
        code = run("sample", "--pde", "burgers", "--data-dir", data_dir,
                   "--t-div", "1", "--eps", "1e-2", "--out-dir", tmp_path)
        assert code == 0


class TestTrain:
    def test_single_iteration_outputs(self, tmp_path, data_dir):
        code = run("train", "--snapshot", data_dir / "burgers.txt",
                   "--pde", "burgers", "--t-div", "2", "--eps", "1e-3",
                   "--max-iter", "1", "--widths", "2,8,8,1",
                   "--out-dir", tmp_path)
        assert code == 0
        lines = (tmp_path / "trajectory.csv").read_text().splitlines()
        assert len(lines) == 2  # header + one iteration
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["iterations"] == 1
        assert len(summary["final_p"]) == 2
        net = load_checkpoint(tmp_path / "checkpoint.txt")
        assert net.widths == (2, 8, 8, 1)

    def test_invalid_spec_name(self, tmp_path, data_dir):
        with pytest.raises(SystemExit) as err:
            run("train", "--snapshot", data_dir / "burgers.txt",
                "--pde", "nope", "--t-div", "1", "--eps", "1e-2",
                "--out-dir", tmp_path)
        assert "presets" in str(err.value)

    def test_config_file_overridden_by_flags(self, tmp_path, data_dir):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"max_iter": 3, "widths": "2,8,1"}))
        code = run("train", "--snapshot", data_dir / "burgers.txt",
                   "--pde", "burgers", "--t-div", "1", "--eps", "1e-2",
                   "--config", cfg_path, "--max-iter", "2",
                   "--out-dir", tmp_path)
        assert code == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["iterations"] == 2  # flag beats config file
        manifest = json.loads((tmp_path / "train_manifest.json").read_text())
        assert manifest["config"]["widths"] == [2, 8, 1]  # config beats default

    def test_unknown_config_key_rejected(self, tmp_path, data_dir):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"bogus": 1}))
        with pytest.raises(SystemExit):
            run("train", "--snapshot", data_dir / "burgers.txt",
                "--pde", "burgers", "--t-div", "1", "--eps", "1e-2",
                "--config", cfg_path, "--out-dir", tmp_path)


class TestSweepBaselineCluster:
    def test_sweep_default_grid(self, tmp_path, data_dir):
        code = run("sweep", "--snapshot", data_dir / "burgers.txt",
                   "--pde", "burgers", "--max-iter", "1", "--widths", "2,6,1",
                   "--out-dir", tmp_path)
        assert code == 0
        records = json.loads((tmp_path / "records.json").read_text())
        assert len(records) == 80
        assert (tmp_path / "records.csv").exists()
        assert (tmp_path / "plot_data.json").exists()

    def test_baseline_and_cluster_pipeline(self, tmp_path, data_dir):
        code = run("baseline", "--snapshot", data_dir / "burgers.txt",
                   "--pde", "burgers", "--min-n", "10", "--max-n", "40",
                   "--reps", "5", "--max-iter", "1", "--widths", "2,6,1",
                   "--out-dir", tmp_path)
        assert code == 0
        records = json.loads((tmp_path / "records.json").read_text())
        assert len(records) == 55

        code = run("cluster", "--results", tmp_path / "records.json",
                   "--k", "5", "--n-init", "10", "--coef", "0",
                   "--out-dir", tmp_path)
        assert code == 0
        lines = (tmp_path / "centroids.csv").read_text().splitlines()
        assert len(lines) == 6

    def test_cluster_json_format(self, tmp_path, data_dir):
        run("baseline", "--snapshot", data_dir / "burgers.txt",
            "--pde", "burgers", "--min-n", "5", "--max-n", "16", "--reps", "1",
            "--max-iter", "1", "--widths", "2,6,1", "--out-dir", tmp_path)
        code = run("cluster", "--results", tmp_path / "records.json",
                   "--k", "3", "--n-init", "5", "--format", "json",
                   "--out-dir", tmp_path)
        assert code == 0
        payload = json.loads((tmp_path / "centroids.json").read_text())
        assert len(payload["0"]["centroids"]) == 3


class TestDeterminism:
    def test_repeat_run_byte_identical(self, tmp_path, data_dir):
        dirs = [tmp_path / "a", tmp_path / "b"]
        for d in dirs:
            code = run("train", "--snapshot", data_dir / "burgers.txt",
                       "--pde", "burgers", "--t-div", "2", "--eps", "1e-3",
                       "--max-iter", "3", "--widths", "2,8,1", "--seed", "5",
                       "--out-dir", d)
            assert code == 0
        assert (dirs[0] / "trajectory.csv").read_bytes() == \
            (dirs[1] / "trajectory.csv").read_bytes()
        assert (dirs[0] / "checkpoint.txt").read_bytes() == \
            (dirs[1] / "checkpoint.txt").read_bytes()
        # summary matches except the timing field
        summaries = []
        for d in dirs:
            data = json.loads((d / "summary.json").read_text())
            data.pop("wall_time_s")
            summaries.append(data)
        assert summaries[0] == summaries[1]

    def test_sample_repeat_identical(self, tmp_path, data_dir):
        dirs = [tmp_path / "a", tmp_path / "b"]
        for d in dirs:
            run("sample", "--snapshot", data_dir / "burgers.txt",
                "--random", "--size", "50", "--seed", "3", "--out-dir", d)
        assert (dirs[0] / "samples.csv").read_bytes() == \
            (dirs[1] / "samples.csv").read_bytes()
