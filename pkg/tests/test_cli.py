import hashlib
import json
import os

import pytest

from microdispatch.cli import main


def run(argv):
    return main(argv)


def file_hash(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def small_year(tmp_path_factory):
    """A 30-day dataset: proportional split gives a few test days quickly."""
    path = tmp_path_factory.mktemp("data") / "small.csv"
    assert run(["generate", "--days", "30", "--seed", "5", "-o", str(path)]) == 0
    return path


class TestGenerate:
    def test_full_year_row_count(self, tmp_path):
        out = tmp_path / "data.csv"
        assert run(["generate", "--days", "365", "--seed", "7", "-o", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 365 * 24 + 1  # header + rows

    def test_missing_output_flag_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc_info:
            run(["generate", "--days", "10"])
        assert exc_info.value.code == 1

    def test_same_flags_twice_byte_identical(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        assert run(["generate", "--days", "40", "--seed", "3", "-o", str(a)]) == 0
        assert run(["generate", "--days", "40", "--seed", "3", "-o", str(b)]) == 0
        assert file_hash(a) == file_hash(b)


class TestDayAhead:
    def test_commitment_file_written(self, small_year, tmp_path):
        out = tmp_path / "commitment.json"
        assert run(["day-ahead", "--data", str(small_year), "--out", str(out)]) == 0
        payload = json.loads(out.read_text())
        assert len(payload["grid_buy_kw"]) == 24
        assert len(payload["buying"]) == 24

    def test_missing_data_file_is_runtime_error(self, tmp_path):
        out = tmp_path / "commitment.json"
        assert run(["day-ahead", "--data", str(tmp_path / "nope.csv"),
                    "--out", str(out)]) == 2


class TestTrainDrl:
    def test_zero_episode_smoke(self, small_year, tmp_path):
        weights = tmp_path / "w.json"
        curve = tmp_path / "curve.csv"
        assert run(["train-drl", "--data", str(small_year), "--episodes", "0",
                    "--out", str(weights), "--curve", str(curve)]) == 0
        payload = json.loads(weights.read_text())
        assert payload["layer_sizes"] == [6, 64, 128, 128, 64, 40]
        assert curve.read_text().splitlines() == ["episode,total_reward"]

    def test_training_months_set_default_episode_count(self, tmp_path):
        year = tmp_path / "year.csv"
        assert run(["generate", "--days", "365", "--seed", "2", "-o", str(year)]) == 0
        weights = tmp_path / "w.json"
        curve = tmp_path / "curve.csv"
        assert run(["train-drl", "--data", str(year), "--train-months", "1",
                    "--epsilon-decay-steps", "400",
                    "--out", str(weights), "--curve", str(curve)]) == 0
        # one pass over November: one episode per day
        assert len(curve.read_text().splitlines()) == 1 + 30

    def test_same_seed_same_weight_hash(self, small_year, tmp_path):
        files = []
        for tag in ("a", "b"):
            weights = tmp_path / f"w_{tag}.json"
            curve = tmp_path / f"c_{tag}.csv"
            assert run(["train-drl", "--data", str(small_year), "--episodes", "2",
                        "--seed", "9", "--out", str(weights),
                        "--curve", str(curve)]) == 0
            files.append(weights)
        assert file_hash(files[0]) == file_hash(files[1])


class TestSimulateCompareValidate:
    def test_simulate_writes_report_and_trace(self, small_year, tmp_path):
        report = tmp_path / "report.json"
        trace = tmp_path / "trace.csv"
        assert run(["simulate", "--data", str(small_year),
                    "--controller", "rule-based", "--days", "2",
                    "--out", str(report), "--trace", str(trace)]) == 0
        payload = json.loads(report.read_text())
        assert payload["controller"] == "rule-based"
        assert payload["hours"] == 48
        assert len(payload["ledger"]) == 48
        assert len(trace.read_text().splitlines()) == 49

    def test_compare_emits_tables(self, small_year, tmp_path):
        out = tmp_path / "cmp"
        assert run(["compare", "--data", str(small_year),
                    "--controllers", "rule-based,mpc-perfect", "--days", "2",
                    "--out", str(out)]) == 0
        summary = (out / "summary.csv").read_text().splitlines()
        assert len(summary) == 3  # header + 2 controllers
        daywise = (out / "daywise.csv").read_text().splitlines()
        assert daywise[0] == "day,rule-based,mpc-perfect"
        assert len(daywise) == 3  # header + 2 days
        assert (out / "trace_rule-based.csv").exists()
        assert (out / "trace_mpc-perfect.csv").exists()
        assert (out / "commitment.json").exists()

    def test_single_controller_compare(self, small_year, tmp_path):
        out = tmp_path / "cmp1"
        assert run(["compare", "--data", str(small_year),
                    "--controllers", "rule-based", "--days", "1",
                    "--out", str(out)]) == 0
        assert len((out / "summary.csv").read_text().splitlines()) == 2

    def test_drl_without_weights_fails(self, small_year, tmp_path):
        assert run(["simulate", "--data", str(small_year),
                    "--controller", "drl", "--days", "1"]) == 2

    def test_validate_clean_controllers(self, small_year):
        assert run(["validate", "--data", str(small_year),
                    "--controllers", "rule-based,mpc-perfect", "--days", "1"]) == 0

    def test_unknown_controller_rejected(self, small_year, tmp_path):
        assert run(["compare", "--data", str(small_year),
                    "--controllers", "telepathy", "--days", "1",
                    "--out", str(tmp_path / "x")]) == 2
