import pytest

from gridcoal.cli import build_parser, main

SCENARIO_INI = """\
[meta]
horizon = 2
seed = 5

[providers]
1 = bus=1 hosts=4 vms_per_host=2 pue=1.3 p_idle=0.1 p_peak=0.5
2 = bus=2 hosts=4 vms_per_host=2 pue=1.4 p_idle=0.1 p_peak=0.5

[migration]
mode = zero
"""


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "sc.ini"
    path.write_text(SCENARIO_INI)
    return str(path)


class TestParser:
    def test_subcommand_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_run_requires_out(self, scenario_file):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["run", "--scenario", scenario_file])

    def test_all_subcommands_exist(self):
        parser = build_parser()
        for argv in (["run", "--scenario", "s", "--out", "o"],
                     ["policy", "--scenario", "s", "--slot", "0"],
                     ["analyze", "--scenario", "s", "--slot", "0", "--delta", "0"],
                     ["baseline", "--scenario", "s"]):
            args = parser.parse_args(argv)
            assert callable(args.func)


class TestCommands:
    def test_run_writes_reports(self, scenario_file, tmp_path, capsys):
        out = tmp_path / "out"
        main(["run", "--scenario", scenario_file, "--schemes", "nocoop,cent",
              "--out", str(out), "--quiet"])
        names = sorted(p.name for p in out.iterdir())
        assert names == ["cp_profit.csv", "partitions.csv", "prices.csv",
                         "sg_profit.csv", "summary.txt"]
        captured = capsys.readouterr()
        assert "wrote" in captured.out

    def test_run_rejects_unknown_scheme(self, scenario_file, tmp_path):
        with pytest.raises(SystemExit):
            main(["run", "--scenario", scenario_file, "--schemes", "magic",
                  "--out", str(tmp_path / "out")])

    def test_policy_prints_distribution(self, scenario_file, capsys):
        main(["policy", "--scenario", scenario_file, "--slot", "0"])
        out = capsys.readouterr().out
        assert "expected utility" in out
        assert "expected price provider 1" in out

    def test_analyze_prints_chain(self, scenario_file, tmp_path, capsys):
        dump = tmp_path / "T.csv"
        main(["analyze", "--scenario", scenario_file, "--slot", "0",
              "--delta", "0", "--dump-matrix", str(dump)])
        out = capsys.readouterr().out
        assert "stationary distribution" in out
        assert dump.exists()

    def test_analyze_rejects_bad_action(self, scenario_file):
        with pytest.raises(SystemExit):
            main(["analyze", "--scenario", scenario_file, "--slot", "0",
                  "--delta", "99"])

    def test_baseline_prints_each_slot(self, scenario_file, capsys):
        main(["baseline", "--scenario", scenario_file])
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 3  # header + 2 slots
