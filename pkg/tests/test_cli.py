import numpy as np

from fishcoop import cli, harness
from fishcoop.learner import PpoAgent, PpoHyper, save_checkpoint


def run_cli(*argv):
    return cli.main(list(argv))


class TestLimits:
    def test_exit_zero(self, capsys):
        assert run_cli("limits", "--agents", "1,2,8", "--growth-rate", "1") == 0
        out = capsys.readouterr().out
        assert "S_LSH" in out and "stable growth rates" in out


class TestControl:
    def test_sweep_and_oracle(self, capsys):
        code = run_cli(
            "control", "--agents", "1", "--seq", "1.0", "--horizon", "6",
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "sweep: objective=" in out
        assert "brute force: objective=" in out


class TestBaseline:
    def test_writes_csv(self, tmp_path, capsys):
        code = run_cli(
            "baseline", "--agents", "2", "--tmax", "100",
            "--ms-lo", "0.4", "--ms-hi", "1.2", "--ms-step", "0.2",
            "--out", str(tmp_path / "base"),
        )
        assert code == 0
        text = (tmp_path / "base" / "baseline.csv").read_text()
        assert text.startswith("n_agents,m_s,s_eq,length,social_welfare,sw_normalized")
        assert len(text.strip().splitlines()) == 6


class TestRunAndReplay:
    def test_run_then_replay(self, tmp_path, capsys):
        out1 = tmp_path / "first"
        code = run_cli(
            "run", "--agents", "2", "--ms", "0.8", "--signal", "1",
            "--trials", "1", "--seed", "3", "--episodes", "4", "--tmax", "10",
            "--steps-per-update", "1000000", "--out", str(out1),
        )
        assert code == 0
        assert (out1 / "manifest.json").exists()
        out2 = tmp_path / "second"
        code = run_cli("replay", "--manifest", str(out1 / "manifest.json"), "--out", str(out2))
        assert code == 0
        a = (out1 / "n2_g1_ms0.8" / "episodes.csv").read_bytes()
        b = (out2 / "n2_g1_ms0.8" / "episodes.csv").read_bytes()
        assert a == b

    def test_config_file_with_cli_override(self, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text(
            "# demo config\nagents=2\nms=0.8\nsignal=1\ntrials=1\n"
            "episodes=3\ntmax=8\nsteps_per_update=1000000\n"
            f"out={tmp_path / 'cfgout'}\nseed=5\n"
        )
        code = run_cli("run", "--config", str(config), "--episodes", "2")
        assert code == 0
        manifest = harness.load_manifest(tmp_path / "cfgout" / "manifest.json")
        assert manifest[0].max_episodes == 2  # CLI flag wins
        assert manifest[0].base_seed == 5


class TestCicCommand:
    def test_checkpoint_evaluation(self, tmp_path, capsys):
        agents = [
            PpoAgent(2, 1.0, PpoHyper(), np.random.default_rng(i), hidden=(8, 8))
            for i in range(2)
        ]
        path = tmp_path / "p.ckpt"
        save_checkpoint(path, agents)
        code = run_cli(
            "cic", "--checkpoint", str(path), "--states", "10", "--samples", "20"
        )
        assert code == 0
        assert "mean CIC=" in capsys.readouterr().out


class TestExitCodes:
    def test_parameter_error_is_one(self, capsys):
        assert run_cli("run", "--agents", "not-a-number", "--out", "/tmp/x") == 1
        assert run_cli("frobnicate") == 1
        assert run_cli("run", "--agents", "2", "--ms", "0.5", "--signal", "1") == 1

    def test_runtime_failure_is_two(self, capsys):
        assert run_cli("replay", "--manifest", "/nonexistent/m.json", "--out", "/tmp/y") == 2
