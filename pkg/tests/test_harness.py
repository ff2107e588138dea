import json

import numpy as np
import pytest

from deloclab.harness import cli, experiments, io, runner
from deloclab.harness.config import ConfigError, ExperimentConfig, parse_config
from deloclab.harness.io import emit_results, read_rows_csv
from deloclab.harness.runner import aggregate, run_experiment
from deloclab.harness.statistics import deloc_statistics, gumbel_statistic
from deloclab.linalg import Spectrum, eigh


def test_parse_config():
    cfg = parse_config(
        """
        # comment
        schema = 1
        experiment = gumbel
        N = 10, 20   # two sizes
        replicas = 5
        intervals = -0.3, 0.2, 0.5, 0.9
        """
    )
    assert cfg.N == (10, 20) and cfg.replicas == 5 and cfg.intervals == (-0.3, 0.2, 0.5, 0.9)


@pytest.mark.parametrize(
    "text,field",
    [
        ("experiment = gumbel", "schema"),
        ("schema = 2\nexperiment = gumbel", "schema"),
        ("schema = 1\nexperiment = gumbel\nbogus = 3", "bogus"),
        ("schema = 1\nexperiment = gumbel\nreplicas = many", "replicas"),
        ("schema = 1\nexperiment = nope", "experiment"),
        ("schema = 1\nexperiment = gumbel\nN = 2", "N"),
        ("schema = 1\nexperiment = levelrep-tail\nreplicas = 10", "replicas"),
    ],
)
def test_config_errors_name_field(text, field):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.field == field


def test_gumbel_statistic_hand_matrix():
    U = np.array([[1, 0, 0], [0, 0.6, 0.8], [0, -0.8, 0.6]]).T
    S = Spectrum(np.array([-1.0, 0.0, 1.0]), U)
    N = 3
    ref = (N * 1.0 - 4 * np.log(N) + np.log(np.log(N)) + np.log(2 * np.pi)) / 2
    assert gumbel_statistic(S) == pytest.approx(ref)


def test_deloc_statistics_n1_and_permutation(rng):
    st = deloc_statistics(Spectrum(np.array([0.3]), np.array([[1.0]])), q=np.array([1.0]))
    assert st["max_linf"] == st["linf_edge"] == st["linf_bulk"] == st["sup_iso"] == 1.0
    A = rng.standard_normal((15, 15))
    M = A + A.T
    P = np.eye(15)[rng.permutation(15)]
    a, b = deloc_statistics(eigh(M)), deloc_statistics(eigh(P @ M @ P.T))
    for k in ("max_linf", "linf_edge", "linf_bulk", "scaled_sup"):
        assert a[k] == pytest.approx(b[k], abs=1e-12)


def test_single_replica():
    cfg = ExperimentConfig("gumbel", N=(12,), replicas=1, seed=4)
    m, rows = run_experiment(cfg)
    assert len(rows) == 1 and rows[0].stream == 0 and rows[0].status == "ok"
    assert m.seed == 4 and m.config["N"] == [12] and "c_sc" in m.calibration


def test_workers_do_not_change_rows():
    cfg = ExperimentConfig("deloc-iso", N=(20, 30), replicas=7, seed=9)
    _, a = run_experiment(cfg)
    _, b = run_experiment(cfg.with_overrides(workers=3))
    assert [r.as_tuple() for r in a] == [r.as_tuple() for r in b]
    assert aggregate(a) == aggregate(b)


def test_replica_failure_is_recorded(monkeypatch):
    def kernel(cfg, N, stream):
        if stream == 1:
            raise RuntimeError("boom")
        return [("x", float(stream), "")]

    monkeypatch.setitem(experiments.KERNELS, "gumbel", kernel)
    monkeypatch.setitem(runner.KERNELS, "gumbel", kernel)
    _, rows = run_experiment(ExperimentConfig("gumbel", N=(5,), replicas=3))
    assert [r.status for r in rows] == ["ok", "error:RuntimeError:boom", "ok"]
    assert np.isnan(rows[1].value)
    assert aggregate(rows)["5/x"]["n"] == 2


def test_deloc_sup_csv_roundtrip(tmp_path):
    cfg = ExperimentConfig("deloc-sup", N=(400,), replicas=200, seed=1)
    m, rows = run_experiment(cfg)
    paths = emit_results(rows, m, tmp_path, "csv")
    back = read_rows_csv(paths["rows"])
    assert back == rows
    maxes = [r.value for r in rows if r.statistic == "max_linf"]
    assert len(maxes) == 200 and all(0 < v <= 1 for v in maxes)
    summary = json.loads(open(paths["summary"]).read())
    assert summary["statistics"]["400/max_linf"]["n"] == 200


def test_empty_rows(tmp_path):
    m, _ = run_experiment(ExperimentConfig("gumbel", N=(5,), replicas=1))
    paths = emit_results([], m, tmp_path, "csv")
    assert open(paths["rows"], newline="").read() == "experiment,N,stream,statistic,value,status,aux\r\n"
    assert json.loads(open(paths["summary"]).read())["n_rows"] == 0


def test_json_output(tmp_path):
    m, rows = run_experiment(ExperimentConfig("gumbel", N=(5,), replicas=2))
    paths = emit_results(rows, m, tmp_path, "json")
    data = json.loads(open(paths["rows"]).read())
    assert [d["value"] for d in data] == [r.value for r in rows]


def test_partial_files_removed(tmp_path, monkeypatch):
    m, rows = run_experiment(ExperimentConfig("gumbel", N=(5,), replicas=2))
    real = io.json.dump

    def failing(obj, fh, **kw):
        if isinstance(obj, dict) and "manifest" in obj:
            raise OSError("disk full")
        return real(obj, fh, **kw)

    monkeypatch.setattr(io.json, "dump", failing)
    with pytest.raises(OSError):
        emit_results(rows, m, tmp_path, "csv")
    assert list(tmp_path.iterdir()) == []


def test_cli_exit_codes(tmp_path, capsys):
    cfgp = tmp_path / "c.cfg"
    cfgp.write_text("schema = 1\nexperiment = gumbel\nN = 8\nreplicas = 3\n")
    out = tmp_path / "o"
    assert cli.main(["gumbel", "--config", str(cfgp), "--out", str(out), "--seed", "2"]) == 0
    assert (out / "results.csv").exists()
    cfgp.write_text("schema = 1\nexperiment = gumbel\nreplicas = -1\n")
    assert cli.main(["gumbel", "--config", str(cfgp)]) == 2
    assert "replicas" in capsys.readouterr().err
    assert cli.main(["nonsense"]) == 2
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfgp.write_text("schema = 1\nexperiment = gumbel\nN = 8\nreplicas = 1\n")
    assert cli.main(["gumbel", "--config", str(cfgp), "--out", str(blocker / "sub")]) == 3


def test_every_experiment_runs(tmp_path):
    for name in experiments.KERNELS:
        reps = 100 if name == "levelrep-tail" else 2
        cfg = ExperimentConfig(name, N=(12,), replicas=reps, configs=2, batch=20, t=0.05)
        _, rows = run_experiment(cfg)
        assert rows and all(r.status == "ok" for r in rows), name
        assert experiments.DESCRIPTIONS[name]
