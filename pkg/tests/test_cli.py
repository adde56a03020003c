import json
from pathlib import Path

import numpy as np
import pytest

from amrkit.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from amrkit.corpus import load_amr_file
from amrkit.embeddings import write_contextual
from amrkit.samplefile import DENSE, INDEXED, read_samples

TOY = Path(__file__).resolve().parents[1] / "src" / "amrkit" / "data" / "toy"


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    """preprocess + oracle over the bundled toy training corpus."""
    root = tmp_path_factory.mktemp("toy")
    out = root / "run"
    rc = main(["preprocess", "--amr", str(TOY / "train.amr"),
               "--conllu", str(TOY / "train.conllu"), "--out", str(out)])
    assert rc == EXIT_OK
    rc = main(["oracle", "--archive", str(out), "--out", str(out),
               "--static-table", str(TOY / "glove.txt")])
    assert rc == EXIT_OK
    return out


class TestPreprocess:
    def test_outputs_and_coverage(self, run_dir):
        assert (run_dir / "examples.jsonl").exists()
        assert (run_dir / "concept_table.tsv").exists()
        stats = (run_dir / "stats.txt").read_text()
        coverage = float(stats.split("alignment-coverage: ")[1].split("\n")[0])
        assert coverage >= 0.8
        assert "reentrancy-incidence" in stats
        assert "non-projectivity-incidence" in stats

    def test_rerun_byte_identical(self, run_dir, tmp_path):
        again = tmp_path / "again"
        rc = main(["preprocess", "--amr", str(TOY / "train.amr"),
                   "--conllu", str(TOY / "train.conllu"), "--out", str(again)])
        assert rc == EXIT_OK
        for name in ("examples.jsonl", "concept_table.tsv", "stats.txt"):
            assert (again / name).read_bytes() == (run_dir / name).read_bytes()

    def test_missing_required_flag_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["preprocess", "--amr", str(TOY / "train.amr")])
        assert exc.value.code == EXIT_USAGE

    def test_nonexistent_conllu_is_data_error(self, tmp_path):
        rc = main(["preprocess", "--amr", str(TOY / "train.amr"),
                   "--conllu", str(tmp_path / "missing.conllu"),
                   "--out", str(tmp_path / "out")])
        assert rc == EXIT_DATA

    def test_corrupt_amr_reports_and_fails(self, tmp_path, capsys):
        bad = tmp_path / "bad.amr"
        bad.write_text("# ::id x\n# ::tok a\n(a / alpha\n")
        rc = main(["preprocess", "--amr", str(bad), "--conllu",
                   str(TOY / "train.conllu"), "--out", str(tmp_path / "out")])
        assert rc == EXIT_DATA
        assert "PENMAN" in capsys.readouterr().err

    def test_heuristic_aligner_kicks_in(self, tmp_path, capsys):
        amr = tmp_path / "plain.amr"
        amr.write_text(
            "# ::id p1\n# ::snt The dog sleeps\n# ::tok The dog sleeps\n"
            "(s / sleep-01 :ARG0 (d / dog))\n"
        )
        conllu = tmp_path / "plain.conllu"
        conllu.write_text(
            "# sent_id = p1\n"
            "1\tThe\tthe\tDET\t_\t_\t2\tdet\t_\t_\n"
            "2\tdog\tdog\tNOUN\t_\t_\t3\tnsubj\t_\t_\n"
            "3\tsleeps\tsleep\tVERB\t_\t_\t0\troot\t_\t_\n"
        )
        rc = main(["preprocess", "--amr", str(amr), "--conllu", str(conllu),
                   "--out", str(tmp_path / "out")])
        assert rc == EXIT_OK
        stats = (tmp_path / "out" / "stats.txt").read_text()
        assert "heuristically-aligned-sentences: 1" in stats
        assert "alignment-coverage: 1.0000" in stats


class TestOracle:
    def test_sample_files_written(self, run_dir):
        for name in ("action", "label", "reentrancy"):
            sample_file = read_samples(run_dir / f"samples.{name}.bin")
            assert sample_file.classifier == name
            assert sample_file.count > 0
            assert sample_file.storage == INDEXED  # auto picks indexed for static
            assert len(sample_file.manifest_hash) == 64

    def test_loss_report_clean(self, run_dir):
        report = json.loads((run_dir / "loss_report.txt").read_text())
        assert report["reentrant_dropped"] == 0
        assert report["adjacency_dropped"] == 0
        assert report["cross_fragment_dropped"] == 0
        assert report["dropped_nodes"] == 0
        assert report["failures"] == []

    def test_dense_storage_flag(self, run_dir, tmp_path):
        out = tmp_path / "dense"
        rc = main(["oracle", "--archive", str(run_dir), "--out", str(out),
                   "--static-table", str(TOY / "glove.txt"), "--storage", "dense"])
        assert rc == EXIT_OK
        dense = read_samples(out / "samples.action.bin")
        indexed = read_samples(run_dir / "samples.action.bin")
        assert dense.storage == DENSE
        assert dense.count == indexed.count
        n_blocks = len(indexed.blocks)
        per_block = sum(w - 1 for _, w, _ in indexed.blocks)
        assert dense.row_floats - indexed.row_floats == per_block
        assert n_blocks == 8  # 3 stack word + 3 stack concept + 2 buffer word

    def test_contextual_without_store_is_error(self, run_dir, tmp_path, capsys):
        rc = main(["oracle", "--archive", str(run_dir), "--out", str(tmp_path / "x"),
                   "--embeddings", "contextual",
                   "--static-table", str(TOY / "glove.txt")])
        assert rc == EXIT_DATA
        assert "contextual-store" in capsys.readouterr().err

    def test_contextual_store_gap_names_sentences(self, run_dir, tmp_path, capsys):
        store = tmp_path / "partial.amre"
        write_contextual(store, [("t01", np.zeros((5, 768), dtype=np.float32))], 768)
        rc = main(["oracle", "--archive", str(run_dir), "--out", str(tmp_path / "x"),
                   "--embeddings", "contextual", "--contextual-store", str(store),
                   "--static-table", str(TOY / "glove.txt")])
        assert rc == EXIT_DATA
        err = capsys.readouterr().err
        assert "t02" in err and "t14" in err and "t01" not in err

    def test_ablation_changes_only_dependency_coordinates(self, run_dir, tmp_path):
        out = tmp_path / "abl"
        rc = main(["oracle", "--archive", str(run_dir), "--out", str(out),
                   "--static-table", str(TOY / "glove.txt"),
                   "--no-dependency-features", "--storage", "dense"])
        assert rc == EXIT_OK
        base_out = tmp_path / "base"
        rc = main(["oracle", "--archive", str(run_dir), "--out", str(base_out),
                   "--static-table", str(TOY / "glove.txt"), "--storage", "dense"])
        assert rc == EXIT_OK
        from amrkit.embeddings import EmbeddingConfig, Embeddings, load_static
        from amrkit.features import FeatureTemplate

        template, _ = FeatureTemplate.from_manifest(
            (base_out / "feature_manifest.txt").read_text()
        )
        embeddings = Embeddings(EmbeddingConfig(), static=load_static(TOY / "glove.txt"))
        dep_coords = set(template.dependency_coordinates(embeddings))
        base = read_samples(base_out / "samples.action.bin")
        ablated = read_samples(out / "samples.action.bin")
        assert base.manifest_hash != ablated.manifest_hash
        assert base.rows.shape == ablated.rows.shape
        diff_cols = set(np.nonzero((base.rows != ablated.rows).any(axis=0))[0].tolist())
        assert diff_cols <= dep_coords
        assert not ablated.rows[:, sorted(dep_coords)].any()


@pytest.fixture(scope="module")
def trained_dir(run_dir):
    for name in ("action", "label", "reentrancy"):
        rc = main(["train", "--samples", str(run_dir / f"samples.{name}.bin"),
                   "--static-table", str(TOY / "glove.txt"), "--out", str(run_dir),
                   "--epochs", "60", "--patience", "15"])
        assert rc == EXIT_OK
    return run_dir


class TestTrainParseEvaluate:
    def test_models_written(self, trained_dir):
        for name in ("action", "label", "reentrancy"):
            assert (trained_dir / f"model.{name}.bin").exists()
            assert (trained_dir / f"model.{name}.bin.labels").exists()
            metrics = (trained_dir / f"metrics.{name}.jsonl").read_text().splitlines()
            assert json.loads(metrics[0])["epoch"] == 0

    def test_parse_emits_valid_penman(self, trained_dir, tmp_path):
        pred = tmp_path / "pred.amr"
        rc = main(["parse", "--model-dir", str(trained_dir),
                   "--input", str(TOY / "dev.conllu"), "--out", str(pred),
                   "--static-table", str(TOY / "glove.txt")])
        assert rc == EXIT_OK
        records, errors = load_amr_file(pred)
        assert errors == []
        assert [r.id for r in records] == ["d01", "d02", "d03", "d04"]
        for record in records:
            assert record.graph.root  # every graph parsed back and is rooted

    def test_parse_deterministic_across_jobs(self, trained_dir, tmp_path):
        outputs = []
        for jobs in ("1", "4"):
            pred = tmp_path / f"pred{jobs}.amr"
            rc = main(["parse", "--model-dir", str(trained_dir),
                       "--input", str(TOY / "dev.conllu"), "--out", str(pred),
                       "--static-table", str(TOY / "glove.txt"), "--jobs", jobs])
            assert rc == EXIT_OK
            outputs.append(pred.read_bytes())
        assert outputs[0] == outputs[1]

    def test_evaluate_pred_equals_gold(self, tmp_path, capsys):
        # the train corpus exercises every metric (reentrancy, wiki, negation)
        rc = main(["evaluate", "--pred", str(TOY / "train.amr"),
                   "--gold", str(TOY / "train.amr")])
        assert rc == EXIT_OK
        table = capsys.readouterr().out
        assert "smatch" in table
        for line in table.splitlines()[1:]:
            assert line.split()[1:] == ["100.0", "100.0", "100.0"], line

    def test_evaluate_id_mismatch(self, tmp_path, capsys):
        shuffled = tmp_path / "renamed.amr"
        shuffled.write_text(
            (TOY / "dev.amr").read_text().replace("::id d01", "::id zz")
        )
        rc = main(["evaluate", "--pred", str(shuffled), "--gold", str(TOY / "dev.amr")])
        assert rc == EXIT_DATA
        err = capsys.readouterr().err
        assert "zz" in err and "d01" in err

    def test_evaluate_records_output(self, tmp_path):
        out = tmp_path / "records.tsv"
        rc = main(["evaluate", "--pred", str(TOY / "dev.amr"),
                   "--gold", str(TOY / "dev.amr"), "--metrics", "smatch,concepts",
                   "--out", str(out)])
        assert rc == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0].startswith("smatch\t1.0000")

    def test_unknown_metric_is_data_error(self):
        rc = main(["evaluate", "--pred", str(TOY / "dev.amr"),
                   "--gold", str(TOY / "dev.amr"), "--metrics", "bogus"])
        assert rc == EXIT_DATA

    def test_train_on_missing_file_is_data_error(self, tmp_path):
        rc = main(["train", "--samples", str(tmp_path / "none.bin"),
                   "--out", str(tmp_path)])
        assert rc == EXIT_DATA


class TestConfigFile:
    def test_config_defaults_and_flag_override(self, tmp_path, run_dir):
        config = tmp_path / "amrkit.conf"
        config.write_text(f"static-table={TOY / 'glove.txt'}\nepochs=2\npatience=1\n")
        out = tmp_path / "trained"
        rc = main(["--config", str(config), "train",
                   "--samples", str(run_dir / "samples.reentrancy.bin"),
                   "--out", str(out)])
        assert rc == EXIT_OK
        snapshot = (out / "train.reentrancy.config.txt").read_text()
        assert "epochs=2" in snapshot
        rc = main(["--config", str(config), "train",
                   "--samples", str(run_dir / "samples.reentrancy.bin"),
                   "--out", str(out), "--epochs", "3"])
        assert rc == EXIT_OK
        snapshot = (out / "train.reentrancy.config.txt").read_text()
        assert "epochs=3" in snapshot  # the flag wins over the config file


class TestOracleJobs:
    def test_jobs_invariant(self, run_dir, tmp_path):
        outs = []
        for jobs in ("1", "3"):
            out = tmp_path / f"jobs{jobs}"
            rc = main(["oracle", "--archive", str(run_dir), "--out", str(out),
                       "--static-table", str(TOY / "glove.txt"), "--jobs", jobs])
            assert rc == EXIT_OK
            outs.append(out)
        for name in ("action", "label", "reentrancy"):
            a = (outs[0] / f"samples.{name}.bin").read_bytes()
            b = (outs[1] / f"samples.{name}.bin").read_bytes()
            assert a == b
