"""End-to-end command-line behaviour and file outputs."""

import json

import pytest

from tabfill import ConstraintSet, load_csv
from tabfill.cli import EXIT_DATA, EXIT_OK, main


def run(*argv) -> int:
    return main(list(argv))


class TestInfer:
    def test_iris_constraints_file(self, iris_path, tmp_path, capsys):
        code = run("infer", str(iris_path), "--output", str(tmp_path / "c.json"),
                   "--output-dir", str(tmp_path))
        assert code == EXIT_OK
        constraints = ConstraintSet.from_json((tmp_path / "c.json").read_text())
        assert len(constraints.column_constraints) == 5
        assert len(constraints.associations) == 60
        meta = json.loads((tmp_path / "iris.metadata.json").read_text())
        assert meta["command"] == "infer" and "version" in meta

    def test_custom_missing_tokens(self, tmp_path):
        source = tmp_path / "custom.csv"
        source.write_text("v\n1.5\nMISSING\n2.5\n3.5\n")
        code = run("impute", str(source), "--missing-tokens", "MISSING,",
                   "--output-dir", str(tmp_path))
        assert code == EXIT_OK
        out = (tmp_path / "custom.imputed.csv").read_text()
        assert "MISSING" not in out
        assert out.splitlines()[2] == "2.5"  # mean of 1.5, 2.5, 3.5

    def test_missing_input_is_data_error(self, tmp_path):
        assert run("infer", str(tmp_path / "nope.csv")) == EXIT_DATA

    def test_empty_file_ok(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        code = run("infer", str(empty), "--output-dir", str(tmp_path))
        assert code == EXIT_OK
        data = json.loads((tmp_path / "empty.constraints.json").read_text())
        assert data["column_constraints"] == {}

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as exc:
            run("infer")  # missing input argument
        assert exc.value.code == 2


class TestImpute:
    def test_complete_input_identity(self, tmp_path):
        source = tmp_path / "full.csv"
        source.write_text("x,y\n1.0,2.0\n3.0,4.0\n")
        code = run("impute", str(source), "--output-dir", str(tmp_path))
        assert code == EXIT_OK
        assert (tmp_path / "full.imputed.csv").read_text() == "x,y\n1.0,2.0\n3.0,4.0\n"
        assert (tmp_path / "full.explanations.jsonl").read_text() == ""

    def test_masked_iris_outputs(self, iris_table, tmp_path):
        from tabfill import apply_types, infer_all, inject_missing, write_csv

        typed = apply_types(iris_table, infer_all(iris_table))
        masked, mask = inject_missing(typed, 10, seed=21)
        source = tmp_path / "masked.csv"
        write_csv(masked, source)

        code = run("impute", str(source), "--output-dir", str(tmp_path))
        assert code == EXIT_OK

        imputed = load_csv(tmp_path / "masked.imputed.csv")
        assert not imputed.has_missing()
        lines = (tmp_path / "masked.explanations.jsonl").read_text().splitlines()
        assert len(lines) == len(mask.positions)
        first = json.loads(lines[0])
        assert {"row", "column", "value", "method", "predictors", "error_or_prob",
                "explanation"} <= set(first)

        meta = json.loads((tmp_path / "masked.metadata.json").read_text())
        assert meta["command"] == "impute"
        assert meta["imputed_cells"] == len(mask.positions)
        assert "removed_edges" in meta and "imputation_order" in meta
        assert meta["config"]["seed"] == 42

    def test_prebuilt_constraints_roundtrip(self, iris_path, tmp_path):
        assert run("infer", str(iris_path), "--output", str(tmp_path / "c.json")) == EXIT_OK
        code = run(
            "impute", str(iris_path),
            "--constraints", str(tmp_path / "c.json"),
            "--output-dir", str(tmp_path),
        )
        assert code == EXIT_OK

    def test_schema_mismatch_is_data_error(self, iris_path, tmp_path):
        other = tmp_path / "other.csv"
        other.write_text("a,b\n1,2\n")
        assert run("infer", str(other), "--output", str(tmp_path / "c.json")) == EXIT_OK
        code = run(
            "impute", str(iris_path),
            "--constraints", str(tmp_path / "c.json"),
            "--output-dir", str(tmp_path),
        )
        assert code == EXIT_DATA


class TestEval:
    def test_polynomial_bench_outputs(self, tmp_path):
        code = run(
            "eval", "--bench", "polynomial", "--perc", "5", "--iters", "1",
            "--seed", "42", "--output-dir", str(tmp_path), "--no-figures",
        )
        assert code == EXIT_OK
        report = json.loads((tmp_path / "polynomial.report.json").read_text())
        assert report["bench"] == "polynomial"
        assert report["percs"][0]["perc"] == 5.0
        text = (tmp_path / "polynomial.report.txt").read_text()
        assert "NRMSE" in text
        csv_text = (tmp_path / "polynomial.report.csv").read_text()
        assert csv_text.startswith("bench,perc,method,NRMSE,F1")

    def test_repeat_run_bit_identical(self, tmp_path):
        a_dir = tmp_path / "a"
        b_dir = tmp_path / "b"
        for out in (a_dir, b_dir):
            code = run(
                "eval", "--bench", "polynomial", "--perc", "5", "--iters", "1",
                "--seed", "7", "--output-dir", str(out), "--no-figures",
            )
            assert code == EXIT_OK
        a = (a_dir / "polynomial.report.json").read_bytes()
        b = (b_dir / "polynomial.report.json").read_bytes()
        assert a == b

    def test_figures_rendered_by_default(self, tmp_path):
        code = run(
            "eval", "--bench", "polynomial", "--perc", "5", "--iters", "1",
            "--seed", "1", "--output-dir", str(tmp_path),
        )
        assert code == EXIT_OK
        assert (tmp_path / "nrmse.png").exists()

    def test_iris_eval_with_f1_figure(self, iris_path, tmp_path):
        code = run(
            "eval", str(iris_path), "--perc", "10", "--iters", "1",
            "--seed", "3", "--output-dir", str(tmp_path),
        )
        assert code == EXIT_OK
        assert (tmp_path / "f1.png").exists()
        report = json.loads((tmp_path / "iris.report.json").read_text())
        ours = report["percs"][0]["methods"]["constraint"]
        assert ours["f1_macro"] is not None

    def test_incomplete_input_is_data_error(self, tmp_path):
        bad = tmp_path / "gaps.csv"
        bad.write_text("a,b\n1,\n2,3\n")
        assert run("eval", str(bad), "--output-dir", str(tmp_path)) == EXIT_DATA

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"iters": 1, "perc": [5], "seed": 11}))
        code = run(
            "eval", "--bench", "polynomial", "--config", str(cfg),
            "--seed", "12", "--output-dir", str(tmp_path), "--no-figures",
        )
        assert code == EXIT_OK
        meta = json.loads((tmp_path / "polynomial.metadata.json").read_text())
        assert meta["config"]["iters"] == 1       # from file
        assert meta["config"]["seed"] == 12       # flag wins
