import json
import subprocess
import sys

import pytest

from concentrate.cli import main, read_config_file


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestRun:
    def test_json_report(self, capsys):
        code, out, _ = run_cli(capsys, "run", "--protocol", "proposal2", "--alpha-sq", "0.75",
                               "--trials", "20000", "--seed", "3")
        assert code == 0
        data = json.loads(out)
        assert data["mode"] == "monte-carlo"
        assert data["config"]["seed"] == 3

    def test_csv_report(self, capsys):
        code, out, _ = run_cli(capsys, "exact", "--protocol", "proposal1", "--alpha-sq", "0.75",
                               "--format", "csv")
        assert code == 0
        assert out.splitlines()[0] == "round,pairs_in,successes,empirical_p,std_error,analytic_p,z_score"
        assert out.splitlines()[1].split(",")[3] == "0.375"

    def test_out_file_byte_identical(self, tmp_path, capsys):
        paths = [tmp_path / "a.json", tmp_path / "b.json"]
        for path in paths:
            assert main(["run", "--protocol", "cat", "--alpha-sq", "0.8", "--parties", "4",
                         "--method", "proposal1", "--trials", "5000", "--seed", "11",
                         "--out", str(path)]) == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_workers_flag_changes_nothing(self, capsys):
        base = ["run", "--protocol", "ent-assisted", "--alpha-sq", "0.6", "--trials", "150000", "--seed", "8"]
        _, one, _ = run_cli(capsys, *base, "--workers", "1")
        _, four, _ = run_cli(capsys, *base, "--workers", "4")
        assert one == four


class TestExitCodes:
    def test_check_failure_is_one(self, capsys):
        # Ten trials with a vanishing tolerance cannot match the analytic value exactly.
        code, _, _ = run_cli(capsys, "run", "--protocol", "proposal1", "--alpha-sq", "0.75",
                             "--trials", "10", "--seed", "0", "--sigma", "1e-9", "--check")
        assert code == 1

    def test_failure_without_check_is_zero(self, capsys):
        code, out, _ = run_cli(capsys, "run", "--protocol", "proposal1", "--alpha-sq", "0.75",
                               "--trials", "10", "--seed", "0", "--sigma", "1e-9")
        assert code == 0
        assert json.loads(out)["verdict"] == "fail"

    def test_exact_check_passes(self, capsys):
        code, _, _ = run_cli(capsys, "exact", "--protocol", "ent-assisted", "--alpha-sq", "0.9", "--check")
        assert code == 0

    @pytest.mark.parametrize(
        "argv",
        [
            ["run", "--protocol", "bogus", "--alpha-sq", "0.7"],
            ["run", "--protocol", "cat", "--alpha-sq", "0.7", "--parties", "2"],
            ["run", "--protocol", "proposal1", "--alpha-sq", "0.2"],
            ["run", "--protocol", "proposal1"],
            ["run", "--protocol", "proposal1", "--alpha-sq", "0.7", "--workers", "0"],
            ["exact", "--protocol", "proposal1", "--alpha-sq", "0.7", "--seed", "1"],
            [],
        ],
    )
    def test_usage_errors_are_two(self, argv, capsys):
        with pytest.raises(SystemExit) as info:
            code = main(argv)
            raise SystemExit(code)
        assert info.value.code == 2
        assert capsys.readouterr().err

    def test_unwritable_output_is_two(self, tmp_path, capsys):
        code, out, err = run_cli(capsys, "exact", "--protocol", "proposal2", "--alpha-sq", "0.7",
                                 "--out", str(tmp_path / "no" / "such.json"))
        assert code == 2
        assert "cannot write" in err
        assert out == ""


class TestConfigFile:
    def test_parse_comments_and_types(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("# campaign\nprotocol = cat  # inline\nalpha-sq=0.8\nparties = 5\ncheck = yes\n",
                        encoding="utf-8")
        assert read_config_file(str(path)) == {"protocol": "cat", "alpha_sq": 0.8, "parties": 5, "check": True}

    def test_flags_win(self, tmp_path, capsys):
        path = tmp_path / "c.cfg"
        path.write_text("protocol = proposal1\nalpha_sq = 0.6\ntrials = 1000\nseed = 5\n", encoding="utf-8")
        code, out, _ = run_cli(capsys, "run", "--config", str(path), "--seed", "6")
        assert code == 0
        config = json.loads(out)["config"]
        assert config["seed"] == 6
        assert config["alpha_sq"] == 0.6

    def test_exact_ignores_sampling_keys(self, tmp_path, capsys):
        path = tmp_path / "c.cfg"
        path.write_text("protocol = proposal2\nalpha_sq = 0.6\ntrials = 10\nseed = 4\n", encoding="utf-8")
        code, out, _ = run_cli(capsys, "exact", "--config", str(path), "--format", "csv")
        assert code == 0

    @pytest.mark.parametrize("body", ["colour = blue\n", "trials = many\n", "[section]\nprotocol = x\n"])
    def test_bad_files(self, tmp_path, capsys, body):
        path = tmp_path / "c.cfg"
        path.write_text(body, encoding="utf-8")
        code, _, err = run_cli(capsys, "run", "--config", str(path), "--protocol", "proposal1", "--alpha-sq", "0.7")
        assert code == 2
        assert err

    def test_missing_file(self, tmp_path, capsys):
        code, _, _ = run_cli(capsys, "run", "--config", str(tmp_path / "absent"))
        assert code == 2


class TestEntryPoints:
    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "concentrate", "exact", "--protocol", "proposal2", "--alpha-sq", "0.75",
             "--format", "csv", "--check"],
            capture_output=True, text=True, check=False,
        )
        assert proc.returncode == 0
        assert proc.stdout.splitlines()[1].startswith("1,1,0.5,0.5,")

    def test_log_level_from_environment(self):
        proc = subprocess.run(
            [sys.executable, "-m", "concentrate", "run", "--protocol", "proposal1", "--alpha-sq", "0.75",
             "--trials", "100", "--format", "csv"],
            capture_output=True, text=True, check=False, env={"CONCENTRATE_LOG": "info", "PATH": ""},
        )
        assert proc.returncode == 0
        assert "INFO" in proc.stderr
