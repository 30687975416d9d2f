import json

import numpy as np
import pandas as pd
import pytest

from predrec.baseball.records import simulate_season, write_records
from predrec.cli import build_parser, main
from predrec.core.kernels import KernelModel
from predrec.core.mixing import GridSpec, from_atoms, init_uniform, point_mass, write_measure
from predrec.core.recursion import pr_step

FIT_CONFIG = """
[kernel]
family = "normal"
params = { bounds = [-3.0, 3.0], variance = 1.0 }

[grid]
node_count = 50

[pr]
gamma = 0.75
n_permutations = 1
shuffle = false
"""


@pytest.fixture
def fit_inputs(tmp_path):
    data = tmp_path / 'obs.csv'
    data.write_text("id,y\na,0.5\nb,-1.25\n")
    config = tmp_path / 'fit.toml'
    config.write_text(FIT_CONFIG)
    return str(data), str(config)


def stderr_diagnostic(capsys):
    lines = [line for line in capsys.readouterr().err.splitlines() if line.startswith('{')]
    return json.loads(lines[-1])


def write_fit_dir(path, F, model):
    path.mkdir()
    write_measure(F, str(path / 'mixing.csv'))
    (path / 'fit.json').write_text(json.dumps({'kernel': model.to_dict()}))
    return str(path)


class TestParser:
    def test_subcommands(self):
        parser = build_parser()
        for command in ('fit', 'decide', 'simulate', 'baseball', 'tune'):
            assert callable(parser.parse_args([command] + (['a', 'b'] if command == 'decide' else ['a'])).execute)

    def test_standard_flags(self):
        args = build_parser().parse_args(['fit', 'obs.csv', '--seed', '4', '--threads', '2', '--out', 'x'])
        assert (args.seed, args.threads, args.out, args.config_file) == (4, 2, 'x', None)


class TestFit:
    def test_fit_unrolls_two_steps(self, tmp_path, fit_inputs):
        data, config = fit_inputs
        out = tmp_path / 'fit'
        assert main(['fit', data, '--config', config, '--out', str(out)]) == 0
        model = KernelModel.normal((-3.0, 3.0))
        F0 = init_uniform(GridSpec(50, (-3.0, 3.0)))
        expected = pr_step(pr_step(F0, model, 0.5, 1.0, 2 ** -0.75), model, -1.25, 1.0, 3 ** -0.75)
        mixing = pd.read_csv(out / 'mixing.csv')
        np.testing.assert_allclose(mixing['density'], expected.grid_density, rtol=1e-12)
        predictive = pd.read_csv(out / 'predictive.csv')
        assert list(predictive['id']) == ['a', 'b']
        summary = json.loads((out / 'fit.json').read_text())
        assert summary['kernel']['family'] == 'normal'
        manifest = json.loads((out / 'manifest.json').read_text())
        assert manifest['subcommand'] == 'fit'
        assert len(manifest['inputs']) == 1

    def test_same_seed_same_bytes(self, tmp_path, fit_inputs):
        data, config = fit_inputs
        for name in ('one', 'two'):
            assert main(['fit', data, '--config', config, '--out', str(tmp_path / name),
                         '--seed', '7', '--permutations', '3']) == 0
        for name in ('mixing.csv', 'mixing_atoms.json', 'predictive.csv', 'fit.json'):
            assert (tmp_path / 'one' / name).read_bytes() == (tmp_path / 'two' / name).read_bytes()

    def test_inadmissible_gamma(self, tmp_path, fit_inputs, capsys):
        data, config = fit_inputs
        out = tmp_path / 'fit'
        assert main(['fit', data, '--config', config, '--out', str(out), '--gamma', '1.2']) == 2
        diagnostic = stderr_diagnostic(capsys)
        assert diagnostic['field'] == 'pr.gamma'
        assert '(1/2, 1]' in diagnostic['message']
        assert not out.exists()

    def test_missing_data_file(self, tmp_path, fit_inputs):
        _, config = fit_inputs
        assert main(['fit', str(tmp_path / 'absent.csv'), '--config', config, '--out', str(tmp_path / 'o')]) == 1

    def test_missing_column(self, tmp_path, fit_inputs, capsys):
        _, config = fit_inputs
        data = tmp_path / 'bad.csv'
        data.write_text("value\n1.0\n")
        assert main(['fit', str(data), '--config', config, '--out', str(tmp_path / 'o')]) == 2
        assert stderr_diagnostic(capsys)['error'] == 'FormatError'


class TestDecide:
    def test_point_mass_fit_gives_constant_estimates(self, tmp_path):
        model = KernelModel.binomial(trials=10)
        fit_dir = write_fit_dir(tmp_path / 'fit', point_mass(0.5), model)
        data = tmp_path / 'obs.csv'
        data.write_text("y,trials\n0,10\n3,10\n10,10\n7,10\n")
        out = tmp_path / 'decide'
        assert main(['decide', fit_dir, str(data), '--out', str(out)]) == 0
        decisions = pd.read_csv(out / 'decisions.csv')
        assert len(decisions) == 4
        np.testing.assert_allclose(decisions['estimate'], 0.5)
        np.testing.assert_array_equal(decisions['action'], decisions['estimate'])

    def test_two_point_test(self, tmp_path):
        model = KernelModel.binomial(trials=1)
        fit_dir = write_fit_dir(tmp_path / 'fit', from_atoms([0.2, 0.8], [0.5, 0.5]), model)
        data = tmp_path / 'obs.csv'
        data.write_text("y\n1\n0\n")
        config = tmp_path / 'test.toml'
        config.write_text('[problem]\nkind = "test"\nkappa1 = 1.0\nkappa2 = 1.0\nnull = { atoms = [0.2] }\n')
        out = tmp_path / 'decide'
        assert main(['decide', fit_dir, str(data), '--config', str(config), '--out', str(out)]) == 0
        decisions = pd.read_csv(out / 'decisions.csv')
        assert list(decisions['action']) == ['a1', 'a0']
        assert decisions['posterior_prob'].iloc[0] == pytest.approx(0.2)

    def test_kernel_mismatch(self, tmp_path, capsys):
        fit_dir = write_fit_dir(tmp_path / 'fit', point_mass(0.5), KernelModel.binomial(trials=10))
        data = tmp_path / 'obs.csv'
        data.write_text("y\n1\n")
        assert main(['decide', fit_dir, str(data), '--kernel', 'normal', '--out', str(tmp_path / 'o')]) == 2
        assert stderr_diagnostic(capsys)['field'] == 'problem.kernel.family'


class TestSimulate:
    def scenario(self, tmp_path, family='normal'):
        path = tmp_path / 'scenario.json'
        path.write_text(json.dumps({
            'name': 'tiny',
            'kernel': {'family': family, 'params': {'bounds': [-4.0, 4.0], 'variance': 1.0}},
            'grid': {'node_count': 60},
            'truth': {'kind': 'normal', 'mean': 0.0, 'sd': 1.0},
            'pr': {'gamma': 0.75, 'n_permutations': 1, 'seed': 0},
            'param': 1.0,
            'sample_sizes': [50, 100],
            'replications': 3,
        }))
        return str(path)

    def test_single_row(self, tmp_path):
        out = tmp_path / 'sim'
        assert main(['simulate', self.scenario(tmp_path), '--sizes', '100', '--replications', '1',
                     '--out', str(out)]) == 0
        trace = pd.read_csv(out / 'trace.csv')
        assert len(trace) == 1
        assert list(trace.columns) == ['n', 'replication', 'excess_risk', 'kl', 'eb_risk', 'bayes_risk']
        summary = json.loads((out / 'summary.json').read_text())
        assert summary['sample_sizes'] == [100]
        assert 'weight_series' in summary['assumptions']

    def test_same_seed_same_bytes(self, tmp_path):
        scenario = self.scenario(tmp_path)
        snapshots = []
        for name in ('one', 'two', 'one'):
            out = tmp_path / name
            assert main(['simulate', scenario, '--seed', '5', '--threads', '2', '--out', str(out)]) == 0
            snapshots.append({f: (out / f).read_bytes() for f in ('trace.csv', 'summary.json')})
        assert snapshots[0] == snapshots[1] == snapshots[2]
        assert len(pd.read_csv(tmp_path / 'one' / 'trace.csv')) == 6

    def test_unknown_kernel(self, tmp_path, capsys):
        out = tmp_path / 'sim'
        assert main(['simulate', self.scenario(tmp_path, family='laplace'), '--out', str(out)]) == 2
        assert stderr_diagnostic(capsys)['field'] == 'kernel.family'
        assert not out.exists()

    def test_unknown_scenario_name(self, tmp_path, capsys):
        assert main(['simulate', 'no_such_scenario', '--out', str(tmp_path / 'o')]) == 2
        assert stderr_diagnostic(capsys)['field'] == 'scenario'


class TestBaseball:
    def test_simulated_season(self, tmp_path):
        out = tmp_path / 'baseball'
        season = tmp_path / 'season.csv'
        assert main(['baseball', '--simulate', '--permutations', '2', '--grid-nodes', '200',
                     '--write-data', str(season), '--out', str(out)]) == 0
        report = json.loads((out / 'report.json').read_text())
        assert report['relative_errors']['naive'] == {'nonpitchers': 1.0, 'pitchers': 1.0}
        assert (out / 'priors_pitchers_pr.csv').exists()
        assert (out / 'predictions_nonpitchers.csv').exists()
        assert season.exists()

    def test_rejected_rows_are_reported(self, tmp_path):
        data = tmp_path / 'batting.csv'
        write_records(simulate_season(n_pitchers=20, n_nonpitchers=30, seed=2), str(data))
        with open(data, 'a') as f:
            f.write("zz,0,first,5,9\n")
        out = tmp_path / 'baseball'
        assert main(['baseball', str(data), '--permutations', '1', '--grid-nodes', '100',
                     '--out', str(out)]) == 0
        rejected = pd.read_csv(out / 'rejected_rows.csv')
        assert list(rejected['line']) == [2 * 50 + 2]
        manifest = json.loads((out / 'manifest.json').read_text())
        assert len(manifest['inputs']) == 1

    def test_needs_data(self, tmp_path, capsys):
        assert main(['baseball', '--out', str(tmp_path / 'o')]) == 2
        assert stderr_diagnostic(capsys)['field'] == 'data'

    def test_tune(self, tmp_path):
        out = tmp_path / 'tune'
        assert main(['tune', '--simulate', '--gammas', '0.7', '0.9', '--permutations', '1',
                     '--grid-nodes', '100', '--out', str(out)]) == 0
        curve = pd.read_csv(out / 'tuning.csv')
        assert len(curve) == 4
        summary = json.loads((out / 'tuning.json').read_text())
        assert set(summary['best_gamma']) == {'pitchers', 'nonpitchers'}
