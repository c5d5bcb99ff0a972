import json
import math

import numpy as np
import pandas as pd
import pytest

import app
import harness
from config import parse_run_config
from constants import EXIT_OK, EXIT_CONFIG_ERROR, EXIT_NUMERICAL_FAILURE, EXIT_VERIFICATION_FAILURE
from errors import ConfigError, QuadratureError

INSTANT = {'kind': 'tabulated', 'points': [[0, 1], [1e-15, 0], [1e6, 0]], 'interpolation': 'linear',
           'tail': {'class': 'power', 'A': 1.0, 'p': 0.0}}


def _config(experiment, **fields):
    doc = {'schema_version': 1, 'experiment': experiment}
    doc.update(fields)
    return parse_run_config(json.dumps(doc))


def test_write_table_keeps_full_precision(tmp_path):
    df = pd.DataFrame({'lambda': [1.0], 'value': [1.0 / 3.0]})
    path = harness.write_table(df, str(tmp_path / "nested" / "table.csv"))
    back = pd.read_csv(path)
    assert list(back.columns) == ['lambda', 'value']
    assert back['value'][0] == 1.0 / 3.0


def test_exact_curve_for_instant_searcher():
    cfg = _config('exact-curve', immigration={'scheme': 'tii', 'u': 'constant'}, model=INSTANT,
                  lambdas=[2, 5], t_grid=[0.1, 0.5, 1.0])
    df = harness.run(cfg, seed=0)
    assert list(df.columns) == harness.EXACT_CURVE_COLUMNS
    assert len(df) == 6
    np.testing.assert_allclose(df['survival'], np.exp(-df['lambda'] * df['t']), rtol=1e-6)


def test_exact_curve_needs_grid():
    cfg = _config('exact-curve', lambdas=[2])
    with pytest.raises(ConfigError):
        harness.run(cfg, seed=0)


def test_limit_curve_yule():
    cfg = _config('limit-curve', immigration={'scheme': 'yule'}, lambdas=[100],
                  x_grid={'start': -2, 'stop': 2, 'num': 5})
    df = harness.run(cfg, seed=0)
    assert list(df.columns) == harness.LIMIT_CURVE_COLUMNS
    np.testing.assert_allclose(df['limit_survival'], 1.0 / (1.0 + np.exp(df['x'])), rtol=1e-12)
    assert np.all(np.diff(df['t']) > 0)
    assert df['t'].iloc[1] - df['t'].iloc[0] == pytest.approx(1.0 / 100)


def test_limit_curve_drops_points_below_gamma_support():
    cfg = _config('limit-curve', immigration={'scheme': 'tii'}, model={'kind': 'network', 'preset': 'grid5x5'},
                  lambdas=[1000], x_grid=[-1, 0, 0.5, 1])
    df = harness.run(cfg, seed=0)
    assert list(df['x']) == [0.0, 0.5, 1.0]
    assert df['t'].iloc[0] == 0.0


def test_simulate_table():
    cfg = _config('simulate', immigration={'scheme': 'tii'}, lambdas=[10, 20], replicates=25)
    df = harness.run(cfg, seed=3)
    assert list(df.columns) == harness.SIMULATE_COLUMNS
    assert len(df) == 50
    assert list(df['replicate'][:25]) == list(range(25))
    again = harness.run(cfg, seed=3)
    pd.testing.assert_frame_equal(df, again)


def test_histogram_density():
    samples = np.random.default_rng(0).random(20000)
    density = harness.histogram_density(samples, np.array([-0.5, 0.25, 0.5, 0.75, 1.5]))
    assert density[0] == 0.0 and density[-1] == 0.0
    np.testing.assert_allclose(density[1:4], 1.0, atol=0.15)


def test_density_convergence_table():
    cfg = _config('density-convergence', immigration={'scheme': 'yule'}, lambdas=[50], replicates=300, k=1,
                  x_grid=[-1, 0, 1])
    df = harness.run(cfg, seed=2)
    assert list(df.columns) == harness.DENSITY_COLUMNS
    assert len(df) == 3
    assert np.all(df['mc_density'] >= 0)
    assert np.all(df['exact_density'] > 0)
    np.testing.assert_allclose(df['limit_density'], np.exp(-df['x']) / (1 + np.exp(-df['x'])) ** 2, rtol=1e-12)


def test_mean_error_vanishes_for_instant_searcher():
    cfg = _config('mean-error', immigration={'scheme': 'tii'}, model=INSTANT, lambdas=[5, 50])
    df = harness.run(cfg, seed=0)
    assert list(df.columns) == harness.MEAN_ERROR_COLUMNS
    np.testing.assert_allclose(df['exact_mean'], 1.0 / df['lambda'], rtol=1e-6)
    assert np.all(df['rel_error'] < 1e-6)


def test_compare_branching():
    cfg = _config('compare-branching', lambdas=[10, 100], chain_rates=[2], diffusion={'L': 1, 'D': 1})
    df = harness.run(cfg, seed=0)
    assert list(df.columns) == harness.BRANCHING_COLUMNS
    np.testing.assert_allclose(df['shift'], 0.0, atol=1e-15)
    np.testing.assert_allclose(df['ratio'], 2.0)


def test_compare_branching_chain_only():
    cfg = _config('compare-branching', lambdas=[10], chain_rates=[1, 1])
    df = harness.run(cfg, seed=0)
    assert df['shift'][0] == pytest.approx(math.log(math.log(10.0)) / 10.0)
    assert math.isnan(df['t_bbm'][0])


def test_compare_branching_needs_inputs():
    with pytest.raises(ConfigError):
        harness.run(_config('compare-branching', lambdas=[10]), seed=0)


def test_deterministic_checks_pass():
    rows = (harness._check_geometric_composition() + harness._check_short_time_convolution()
            + harness._check_scaling_equivalence() + harness._check_branching_formulas()
            + harness._check_limit_moments())
    failed = [name for name, _, _, passed in rows if not passed]
    assert failed == []


@pytest.mark.slow
def test_verify_suite_report(capsys):
    df = harness.run_verify_suite(None, seed=20240501)
    assert list(df.columns) == harness.VERIFY_COLUMNS
    assert len(df) == 13
    assert not df['statistic'].isna().any()
    assert "Checks:" in capsys.readouterr().out


def test_print_report_marks_failures(capsys):
    df = pd.DataFrame([('good', 0.0, 1.0, True), ('bad', 2.0, 1.0, False)], columns=harness.VERIFY_COLUMNS)
    harness.print_report(df)
    out = capsys.readouterr().out
    assert "[PASSED]" in out and "[FAILED]" in out
    assert "1/2" in out


# Command line

@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for key in ("FPT_WORKERS", "FPT_SEED", "FPT_LOG_LEVEL", "FPT_OUTPUT_DIR"):
        monkeypatch.setenv(key, "unset")
        monkeypatch.delenv(key)
    return tmp_path


def _write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def test_app_writes_csv(workdir):
    config_path = _write(workdir / "run.json", {'schema_version': 1, 'experiment': 'compare-branching',
                                                'lambdas': [10], 'chain_rates': [2]})
    out = workdir / "out" / "branching.csv"
    assert app.run(['compare-branching', '--config', config_path, '--out', str(out)]) == EXIT_OK
    assert list(pd.read_csv(out).columns) == harness.BRANCHING_COLUMNS


def test_app_lambda_override(workdir):
    config_path = _write(workdir / "run.json", {'schema_version': 1, 'experiment': 'compare-branching',
                                                'lambdas': [10], 'chain_rates': [2]})
    out = workdir / "b.csv"
    assert app.run(['compare-branching', '--config', config_path, '--out', str(out), '--lambda', '5,50']) == EXIT_OK
    assert list(pd.read_csv(out)['lambda']) == [5.0, 50.0]


def test_app_default_output_dir(workdir):
    config_path = _write(workdir / "run.json", {'schema_version': 1, 'experiment': 'compare-branching',
                                                'lambdas': [10], 'diffusion': {'L': 1, 'D': 1}})
    assert app.run(['compare-branching', '--config', config_path]) == EXIT_OK
    assert (workdir / "results" / "compare-branching.csv").exists()


@pytest.mark.parametrize("argv", [
    ['exact'],
    ['exact', '--config', 'missing.json'],
    ['simulate', '--config', 'run.json', '--seed', '-1'],
    ['simulate', '--config', 'run.json', '--workers', '0'],
    ['simulate', '--config', 'run.json', '--lambda', 'ten'],
])
def test_app_config_errors(workdir, argv):
    _write(workdir / "run.json", {'schema_version': 1, 'experiment': 'simulate', 'lambdas': [10]})
    assert app.run(argv) == EXIT_CONFIG_ERROR


def test_app_numerical_failure(workdir, monkeypatch):
    def fail(cfg, seed, workers):
        raise QuadratureError("did not converge")
    monkeypatch.setattr(harness, 'run', fail)
    config_path = _write(workdir / "run.json", {'schema_version': 1, 'experiment': 'exact-curve', 'lambdas': [1]})
    assert app.run(['exact', '--config', config_path]) == EXIT_NUMERICAL_FAILURE


def test_app_verification_failure(workdir, monkeypatch):
    failing = pd.DataFrame([('check', 1.0, 0.0, False)], columns=harness.VERIFY_COLUMNS)
    monkeypatch.setattr(harness, 'run', lambda cfg, seed, workers: failing)
    assert app.run(['verify', '--out', str(workdir / "verify.csv")]) == EXIT_VERIFICATION_FAILURE
    assert (workdir / "verify.csv").exists()
