import os

import pytest

from uctprover.cli import EXIT_ERROR, EXIT_NOT_PROVED, EXIT_OK, main


@pytest.fixture(autouse=True)
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def problem(smoke_dir, name):
    return os.path.join(smoke_dir, f"{name}.p")


class TestProve:
    def test_proved(self, smoke_dir, capsys):
        assert main(["prove", problem(smoke_dir, "mortal")]) == EXIT_OK
        out = capsys.readouterr().out
        assert "% mortal: proved (6 inferences, 3 playouts, 0 bigsteps)" in out
        assert "ext 0 0" in out

    def test_not_proved(self, smoke_dir, capsys):
        assert main(["prove", problem(smoke_dir, "satisfiable")]) == EXIT_NOT_PROVED
        assert "dead_root" in capsys.readouterr().out

    def test_missing_problem(self, workdir):
        assert main(["prove", str(workdir / "missing.p")]) == EXIT_ERROR

    def test_deepening(self, smoke_dir, capsys):
        assert main(["prove", problem(smoke_dir, "successor"), "--mode", "deepening"]) == EXIT_OK
        assert "% successor: proved (3 inferences" in capsys.readouterr().out

    def test_budget_flag(self, smoke_dir, capsys):
        assert main(["prove", problem(smoke_dir, "six_clauses"), "--budget", "1"]) == EXIT_NOT_PROVED
        assert "budget_exhausted (1 inferences" in capsys.readouterr().out

    def test_guided_mode_without_model(self, smoke_dir):
        assert main(["prove", problem(smoke_dir, "mortal"), "--mode", "uct+policy"]) == EXIT_ERROR


class TestCheck:
    def test_proof_file(self, smoke_dir, workdir, capsys):
        """A written proof checks; a truncated one does not."""
        assert main(["prove", problem(smoke_dir, "mortal"), "--proof", "mortal.proof"]) == EXIT_OK
        assert main(["check", problem(smoke_dir, "mortal"), "mortal.proof"]) == EXIT_OK
        assert "proof verified" in capsys.readouterr().out
        lines = (workdir / "mortal.proof").read_text().splitlines()
        (workdir / "short.proof").write_text("\n".join(line for line in lines if line != "ext 0 0") + "\n")
        assert main(["check", problem(smoke_dir, "mortal"), "short.proof"]) == EXIT_NOT_PROVED
        assert "proof rejected: 1 goals remain open" in capsys.readouterr().out

    def test_malformed_proof(self, smoke_dir, workdir):
        (workdir / "bad.proof").write_text("jump 3\n")
        assert main(["check", problem(smoke_dir, "mortal"), "bad.proof"]) == EXIT_ERROR


class TestCorpusCommands:
    def test_split(self, smoke_dir, capsys):
        assert main(["split", smoke_dir, "--test-frac", "0.34"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        rows = [line.split("\t") for line in lines if line.startswith(("train\t", "test\t"))]
        assert len(rows) == 6
        assert sum(row[0] == "test" for row in rows) == 2

    def test_run(self, smoke_dir, workdir):
        """Not every problem is proved, so the exit code is 1."""
        code = main(["run", smoke_dir, "--playouts", "2", "--budget", "3000", "--output", "results.jsonl"])
        assert code == EXIT_NOT_PROVED
        assert len((workdir / "results.jsonl").read_text().splitlines()) == 6

    def test_export_and_train(self, smoke_dir, workdir, capsys):
        assert main(["export-data", smoke_dir, "--out", "data", "--playouts", "2", "--budget", "3000"]) == EXIT_OK
        assert (workdir / "data" / "policy.examples").exists()
        code = main(["train", "data/value.examples", "--kind", "value", "--out", "value.model",
                     "--test", "data/value.examples"])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "train RMSE" in out and "test RMSE" in out
        assert (workdir / "value.model").read_text().startswith("uctprover-model 1")

    def test_train_on_malformed_examples(self, workdir):
        (workdir / "bad.examples").write_text("0.5 3:1\nnot-a-number\n")
        assert main(["train", "bad.examples", "--kind", "policy", "--out", "p.model"]) == EXIT_ERROR


class TestConfiguration:
    def test_unknown_key(self, smoke_dir, workdir):
        (workdir / "bad.yml").write_text("search:\n  budgt: 5\n")
        assert main(["--config", "bad.yml", "prove", problem(smoke_dir, "mortal")]) == EXIT_ERROR

    def test_local_config_is_picked_up(self, smoke_dir, workdir, capsys):
        """./uctprover.yml applies without --config."""
        (workdir / "uctprover.yml").write_text("search:\n  budget: 1\n")
        assert main(["prove", problem(smoke_dir, "six_clauses")]) == EXIT_NOT_PROVED
        assert "budget_exhausted (1 inferences" in capsys.readouterr().out
