import io
import json

import numpy as np
import pytest
import yaml

from digraph_nash import cli
from digraph_nash.config import load_experiment, load_fixture, parse_steps_flag
from digraph_nash.errors import ConfigError
from digraph_nash.harness import EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, cmd_check, cmd_oracle, cmd_run
from digraph_nash.montecarlo import aggregate, run_montecarlo

from .conftest import PRINTED_NE


def write_config(tmp_path, doc, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc))
    return path


def test_fixture_reproduces_printed_parameters(osnr_experiment):
    g = osnr_experiment.game
    np.testing.assert_array_equal(g.beta, [0.5, 0.51, 0.52, 0.3, 0.31, 0.32])
    np.testing.assert_array_equal(g.a, [0.261, 0.494, 0.107, 0.366, 0.208, 0.305])
    assert g.phi[0, 0] == pytest.approx(7.463e-5) and g.phi[5, 5] == pytest.approx(6.894e-5)
    assert (g.n0, g.x_min, g.x_max) == (0.43e-6, 0.2, 2.0)


def test_check_osnr_fixture(osnr_experiment):
    buf = io.StringIO()
    assert cmd_check(osnr_experiment, out=buf) == EXIT_OK
    text = buf.getvalue()
    assert "strongly connected: yes" in text
    assert "0.080222" in text and "result: PASS" in text


def test_check_linear_fixture(linear_experiment):
    buf = io.StringIO()
    assert cmd_check(linear_experiment, out=buf) == EXIT_OK
    assert "-1.18973" in buf.getvalue()
    assert "not monotone" in buf.getvalue()


def test_gamma_one_rejected(tmp_path):
    doc = load_fixture("osnr_six_player")
    doc["algorithm"]["gamma"] = 1.0
    with pytest.raises(ConfigError) as info:
        load_experiment(write_config(tmp_path, doc))
    assert info.value.location == "algorithm.gamma"
    assert cli.main(["check", "--fixture", "osnr_six_player", "--gamma", "1"]) == EXIT_VALIDATION


def test_config_errors_carry_location(tmp_path):
    doc = load_fixture("osnr_six_player")
    doc["algorithm"]["tol"] = "tiny"
    with pytest.raises(ConfigError, match="algorithm.tol"):
        load_experiment(write_config(tmp_path, doc))
    doc = load_fixture("osnr_six_player")
    del doc["game"]["params"]["a"]
    with pytest.raises(ConfigError, match="game.params"):
        load_experiment(write_config(tmp_path, doc))
    bad = tmp_path / "bad.yaml"
    bad.write_text("game: [unclosed\n")
    with pytest.raises(ConfigError, match="bad.yaml:"):
        load_experiment(bad)


def test_graph_node_mismatch(tmp_path):
    doc = load_fixture("osnr_six_player")
    doc["graph"] = {"generator": "cycle", "n": 5}
    with pytest.raises(ConfigError, match="graph.n"):
        load_experiment(write_config(tmp_path, doc))


def test_check_fails_on_disconnected_graph(tmp_path):
    doc = load_fixture("linear_nonmonotone")
    doc["graph"] = {"edges": [[0, 1]]}
    exp = load_experiment(write_config(tmp_path, doc))
    buf = io.StringIO()
    assert cmd_check(exp, out=buf) == EXIT_VALIDATION
    assert "strongly connected: NO" in buf.getvalue()
    assert cmd_run(exp, out=io.StringIO())[0] == EXIT_VALIDATION


def test_check_explicit_weights(tmp_path):
    doc = load_fixture("linear_nonmonotone")
    doc["graph"]["weights"] = [[1.0, 0.0], [0.0, 1.0]]
    exp = load_experiment(write_config(tmp_path, doc))
    buf = io.StringIO()
    assert cmd_check(exp, out=buf) == EXIT_VALIDATION
    assert "sparsity" in buf.getvalue()
    doc["graph"]["weights"] = [[0.6, 0.4], [0.1, 0.9]]
    assert cmd_check(load_experiment(write_config(tmp_path, doc)), out=io.StringIO()) == EXIT_OK


def test_check_fails_on_large_steps(tmp_path):
    doc = load_fixture("linear_nonmonotone")
    doc["algorithm"]["steps"] = [1.5, 0.05]
    exp = load_experiment(write_config(tmp_path, doc))
    assert cmd_check(exp, out=io.StringIO()) == EXIT_VALIDATION


def test_fixture_reference_in_game_section(tmp_path):
    doc = {"game": {"fixture": "osnr_six_player"}, "algorithm": {"gamma": 0.5}}
    exp = load_experiment(write_config(tmp_path, doc))
    assert exp.spec.num_agents == 6 and exp.algo.gamma == 0.5


def test_steps_flag():
    assert parse_steps_flag("theorem1") == "theorem1"
    assert parse_steps_flag("0.1,0.2") == [0.1, 0.2]
    with pytest.raises(ConfigError):
        parse_steps_flag("a,b")


def test_oracle_command(osnr_experiment, linear_experiment):
    code, res = cmd_oracle(osnr_experiment, out=io.StringIO())
    assert code == EXIT_OK
    np.testing.assert_allclose(res["x"], PRINTED_NE, atol=5e-4)
    assert res["residual"] < 1e-9 and res["interior"]
    code, res = cmd_oracle(linear_experiment, out=io.StringIO())
    np.testing.assert_array_equal(res["x"], [0.0, 0.0])


def test_oracle_diagonal_toy(tmp_path):
    doc = {
        "game": {
            "builtin": "osnr",
            "params": {
                "eta": [1.0, 1.0], "beta": [0.5, 0.4], "a": [0.3, 0.6],
                "phi": [[1.0, 1.0e-12], [1.0e-12, 1.0]], "n0": 0.001, "x_min": 0.01, "x_max": 1.0,
            },
        }
    }
    exp = load_experiment(write_config(tmp_path, doc))
    _, res = cmd_oracle(exp, out=io.StringIO())
    g = exp.game
    np.testing.assert_allclose(res["x"], (g.a * g.beta / (g.eta + g.beta) - g.n0) / g.a, rtol=1e-9)


def test_oracle_unavailable(tmp_path):
    doc = {"game": {"builtin": "linear", "params": {"A": [[1.0, 2.0], [2.0, 1.0]], "b": [-10.0, 0.0],
                                                    "lower": [0.0, 0.0], "upper": [1.0, 1.0]}}}
    exp = load_experiment(write_config(tmp_path, doc))
    assert cmd_oracle(exp, out=io.StringIO())[0] == EXIT_RUNTIME


def test_run_writes_outputs(tmp_path, osnr_experiment):
    osnr_experiment.out_dir = tmp_path / "run"
    code, traj = cmd_run(osnr_experiment, out=io.StringIO())
    assert code == EXIT_OK
    summary = json.loads((tmp_path / "run" / "summary.json").read_text())
    assert summary["reason"] == "tolerance" and summary["action_error_inf"] < 1e-4
    assert (tmp_path / "run" / "weights.csv").exists()
    header = (tmp_path / "run" / "trajectory.csv").read_text().splitlines()[0]
    assert header == "iter,action_error,consensus_residual,fixed_point_residual,step_delta"


def test_run_csv_byte_identical(tmp_path):
    for k in range(2):
        assert cli.main(["run", "--fixture", "osnr_six_player", "--out", str(tmp_path / f"r{k}")]) == EXIT_OK
    a = (tmp_path / "r0" / "trajectory.csv").read_bytes()
    b = (tmp_path / "r1" / "trajectory.csv").read_bytes()
    assert a == b


def test_cli_seeded_init_and_steps(tmp_path, capsys):
    args = ["run", "--fixture", "linear_nonmonotone", "--seed", "3", "--steps", "0.5,0.05",
            "--gamma", "0.4", "--out", str(tmp_path)]
    assert cli.main(args) == EXIT_OK
    assert "reason=tolerance" in capsys.readouterr().out


def test_cli_run_baseline_needs_gamma_zero(tmp_path, capsys):
    args = ["run", "--fixture", "osnr_six_player", "--gamma", "0", "--steps", ",".join(["0.0006"] * 6),
            "--out", str(tmp_path)]
    with pytest.warns(UserWarning):
        assert cli.main(args) == EXIT_OK
    assert "reason=tolerance" in capsys.readouterr().out


def test_cli_missing_config():
    assert cli.main(["check"]) == EXIT_VALIDATION
    assert cli.main(["check", "--config", "/nonexistent.yaml"]) == EXIT_VALIDATION


def test_montecarlo_single_instance():
    rep = run_montecarlo(4, [0.2, 0.5], 1, seed=3)
    assert rep.verify()
    for a in rep.aggregates:
        (row,) = [r for r in rep.rows if r.gamma == a.gamma]
        assert a.count == 1
        assert a.mean_error == row.terminal_error
        assert a.mean_iters == row.iterations
        assert a.std_error == 0.0


def test_montecarlo_parallel_matches_sequential():
    seq = run_montecarlo(4, [0.2, 0.8], 4, seed=11, jobs=1)
    par = run_montecarlo(4, [0.2, 0.8], 4, seed=11, jobs=2)
    assert [r.key() for r in seq.rows] == [r.key() for r in par.rows]
    assert seq.checksum == par.checksum


def test_montecarlo_checksum_detects_tampering():
    rep = run_montecarlo(3, [0.5], 2, seed=0)
    assert rep.verify()
    rep.aggregates = aggregate(rep.rows[:1], rep.gammas)
    assert not rep.verify()


def test_montecarlo_skips_failed_instances(monkeypatch):
    import digraph_nash.montecarlo as mc
    from digraph_nash.errors import GenerationError

    real = mc.random_osnr_instance

    def flaky(N, seed):
        if seed == 2:
            raise GenerationError("nope")
        return real(N, seed)

    monkeypatch.setattr(mc, "random_osnr_instance", flaky)
    rep = run_montecarlo(3, [0.5], 3, seed=0)
    assert rep.skipped == [2]
    assert len(rep.rows) == 2 and rep.verify()


def test_montecarlo_csv(tmp_path):
    rep = run_montecarlo(3, [0.2, 0.5], 2, seed=0)
    rep.write_csv(tmp_path)
    inst = (tmp_path / "instances.csv").read_text().splitlines()
    assert inst[0] == "instance,seed,gamma,iterations,terminal_error,reason,wall_time"
    assert len(inst) == 1 + 4
    summ = (tmp_path / "summary.csv").read_text().splitlines()
    assert summ[0].startswith("gamma,count,mean_error,std_error,mean_iters,mean_wall_time,skipped,rows_checksum")
    assert summ[1].endswith(rep.checksum)


def test_montecarlo_rejects_bad_arguments():
    with pytest.raises(ValueError):
        run_montecarlo(3, [1.0], 1)
    with pytest.raises(ValueError):
        run_montecarlo(3, [0.5], 0)


def test_cli_montecarlo(tmp_path, capsys):
    assert cli.main(["montecarlo", "--n", "3", "--gammas", "0.2,0.8", "--instances", "2",
                     "--out", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "gamma=0.2" in out and "gamma=0.8" in out
    assert (tmp_path / "summary.csv").exists()
