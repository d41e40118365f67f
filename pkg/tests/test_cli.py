import csv
import json

import pytest

from eegfactor.cli import main

CONFIG = """\
preprocess:
  filter_order: 8
cpd:
  n_starts: 2
  tol: 1.0e-10
  max_iters: 200
  seed: 3
diffit:
  r_max: 4
  n_runs: 2
classify:
  k_folds: 5
  svm_epochs: 120
  seed: 3
"""


def run(*argv):
    return main(list(argv))


@pytest.fixture()
def workdir(tmp_path):
    cfg = tmp_path / "config.yaml"
    cfg.write_text(CONFIG)
    return tmp_path / "work", cfg


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestPipeline:
    def test_synth_to_report_flow(self, workdir):
        wd, cfg = workdir
        base = ["--config", str(cfg), "--workdir", str(wd)]
        assert run(*base, "synth", "--mode", "cohort", "--dims", "30", "19", "89",
                   "--snr-db", "25", "--subjects-per-class", "CN=6,MCI=5,AD=6",
                   "--epochs-per-subject", "3") == 0
        for name in ("tensor.bin", "truth_factors.json", "cohort_tensor.bin",
                     "cohort_provenance.csv", "labels.csv", "truth_weights.csv"):
            assert (wd / name).exists(), name

        assert run(*base, "diffit") == 0
        report = json.loads((wd / "rank_report.json").read_text())
        assert report["modal_rank"] == 3
        hist = read_csv(wd / "rank_histogram.csv")
        assert hist[0] == ["rank", "count"]
        assert len(hist) == 4  # header + ranks 1..3

        assert run(*base, "decompose") == 0
        meta = json.loads((wd / "decompose_meta.json").read_text())
        assert meta["rank"] == 3
        assert meta["solver"] == "GN"
        assert meta["rel_error"] < 0.1
        for i in (1, 2, 3):
            topo = read_csv(wd / f"factor_{i}_topomap.csv")
            assert len(topo) == 20 and topo[0] == ["channel", "value"]
            spec_rows = read_csv(wd / f"factor_{i}_spectrum.csv")
            assert len(spec_rows) == 90 and spec_rows[0] == ["freq_hz", "value"]
        coords = read_csv(wd / "electrode_coords.csv")
        assert len(coords) == 20

        assert run(*base, "project", "--tensor", str(wd / "cohort_tensor.bin"),
                   "--provenance", str(wd / "cohort_provenance.csv")) == 0
        weights = read_csv(wd / "weights.csv")
        assert weights[0] == ["subject_id", "recording_id", "epoch_index", "w1", "w2", "w3"]
        assert len(weights) == 1 + 17 * 3
        pib_rows = read_csv(wd / "validation_pib.csv")
        assert len(pib_rows[0]) == 3 + 95

        assert run(*base, "classify") == 0
        summary = read_csv(wd / "summary.csv")
        assert summary[0] == ["feature", "classifier", "task", "mean_auc", "std_auc"]
        combos = {(r[0], r[1], r[2]) for r in summary[1:]}
        assert ("TD", "GNB", "CNvsAD") in combos
        assert ("PIB", "SVM", "CNvsMCI") in combos
        for row in summary[1:]:
            assert 0.0 <= float(row[3]) <= 1.0

        assert run(*base, "report") == 0
        doc = json.loads((wd / "report.json").read_text())
        assert doc["rank_report_modal_rank"] == 3
        assert "summary.csv" in doc["artifacts"]
        assert doc["config_hash"] == meta["config_hash"]

    def test_stage_rerun_is_byte_identical(self, workdir):
        wd, cfg = workdir
        base = ["--config", str(cfg), "--workdir", str(wd)]
        assert run(*base, "synth", "--mode", "tensor", "--dims", "25", "19", "89") == 0
        assert run(*base, "decompose", "--rank", "3") == 0
        first = {p.name: p.read_bytes() for p in wd.iterdir() if p.is_file()}
        assert run(*base, "synth", "--mode", "tensor", "--dims", "25", "19", "89") == 0
        assert run(*base, "decompose", "--rank", "3") == 0
        second = {p.name: p.read_bytes() for p in wd.iterdir() if p.is_file()}
        assert first.keys() == second.keys()
        for name in first:
            assert first[name] == second[name], f"{name} differs between reruns"


class TestEdfRoute:
    def test_synth_edf_preprocess(self, workdir):
        wd, cfg = workdir
        base = ["--config", str(cfg), "--workdir", str(wd)]
        assert run(*base, "synth", "--mode", "edf", "--n-recordings", "3",
                   "--duration", "50") == 0
        assert (wd / "manifest.csv").exists()
        assert run(*base, "preprocess", "--manifest", str(wd / "manifest.csv")) == 0
        assert (wd / "tensor.bin").exists()
        prov = read_csv(wd / "provenance.csv")
        assert prov[0] == ["epoch_row", "subject_id", "recording_id", "epoch_index"]
        # 3 recordings x 2..5 kept epochs each
        assert 3 * 2 <= len(prov) - 1 <= 3 * 5
        pib_rows = read_csv(wd / "pib.csv")
        assert len(pib_rows) == len(prov)

    def test_project_via_manifest(self, workdir):
        wd, cfg = workdir
        base = ["--config", str(cfg), "--workdir", str(wd)]
        assert run(*base, "synth", "--mode", "edf", "--n-recordings", "2",
                   "--duration", "50") == 0
        assert run(*base, "preprocess", "--manifest", str(wd / "manifest.csv")) == 0
        assert run(*base, "decompose", "--rank", "2") == 0
        assert run(*base, "project", "--manifest", str(wd / "manifest.csv")) == 0
        weights = read_csv(wd / "weights.csv")
        assert weights[0][:4] == ["subject_id", "recording_id", "epoch_index", "w1"]
        assert len(weights) > 1


class TestErrors:
    def test_classify_without_project_names_producer(self, workdir, capsys):
        wd, cfg = workdir
        wd.mkdir(parents=True)
        (wd / "labels.csv").write_text("subject_id,label\ns0,CN\n")
        code = run("--config", str(cfg), "--workdir", str(wd), "classify")
        assert code == 2
        assert "project" in capsys.readouterr().err

    def test_diffit_without_tensor_names_producer(self, workdir, capsys):
        wd, cfg = workdir
        code = run("--config", str(cfg), "--workdir", str(wd), "diffit")
        assert code == 2
        assert "preprocess" in capsys.readouterr().err

    def test_bad_config_field(self, tmp_path, capsys):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("classify:\n  k_folds: 1\n")
        code = run("--config", str(cfg), "--workdir", str(tmp_path / "w"), "report")
        assert code == 1
        assert "k_folds" in capsys.readouterr().err

    def test_unknown_config_section(self, tmp_path, capsys):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("mystery:\n  a: 1\n")
        assert run("--config", str(cfg), "--workdir", str(tmp_path / "w"), "report") == 1

    def test_locked_workdir(self, workdir, capsys):
        wd, cfg = workdir
        wd.mkdir(parents=True)
        (wd / ".lock").write_text("held")
        code = run("--config", str(cfg), "--workdir", str(wd), "report")
        assert code == 1
        assert "lock" in capsys.readouterr().err.lower()

    def test_lock_released_after_run(self, workdir):
        wd, cfg = workdir
        assert run("--config", str(cfg), "--workdir", str(wd), "synth",
                   "--mode", "tensor", "--dims", "10", "19", "89") == 0
        assert not (wd / ".lock").exists()

    def test_bad_rank_flag(self, workdir, capsys):
        wd, cfg = workdir
        assert run("--config", str(cfg), "--workdir", str(wd), "synth",
                   "--mode", "tensor", "--dims", "10", "19", "89") == 0
        assert run("--config", str(cfg), "--workdir", str(wd),
                   "decompose", "--rank", "0") == 1

    def test_unknown_subcommand(self, workdir):
        wd, cfg = workdir
        assert run("--config", str(cfg), "--workdir", str(wd), "explode") == 1

    def test_missing_config_file(self, tmp_path):
        assert run("--config", str(tmp_path / "nope.yaml"), "report") == 1
