import os
import json
import pytest
from rdalloc import storage
from rdalloc.rdalloc import run

ARTIFACTS = ['rd_samples.csv', 'features.csv', 'labels.csv', 'synth_config.json',
             'cluster_model.json', 'cluster_labels.csv', 'centroids.csv', 'error_vs_k.csv',
             'classifier.json', 'train_report.json', 'pca.csv', 'predictions.csv',
             'weights.json', 'histogram.csv', 'allocation.json', 'sweeps.csv', 'bdrate.json']

def pipeline(out, seed=3):
    """generate -> cluster -> train -> classify -> weights -> optimize -> evaluate"""
    def p(name):
        return os.path.join(out, name)
    base = ['--seed', str(seed), '--out-dir', out, '--workers', '2']
    steps = [
        ['generate', '--n-chunks', '90', '--k-true', '3', '--feature-noise', '0.3'],
        ['cluster', '--rd', p('rd_samples.csv'), '-k', '3', '--n-init', '2', '--sweep', '1-4'],
        ['train', '--features', p('features.csv'), '--labels', p('cluster_labels.csv'), '--split', '0.75',
         '--folds', '3', '--c-grid', '1,10', '--gamma-grid', '0.1,1', '--pca-out', p('pca.csv')],
        ['classify', '--features', p('features.csv'), '--model', p('classifier.json')],
        ['weights', '--predictions', p('predictions.csv'), '-k', '3'],
        ['optimize', '--model', p('cluster_model.json'), '--weights', p('weights.json'),
         '--min-avg-quality', '35', '--min-worst-quality', '20'],
        ['evaluate', '--model', p('cluster_model.json'), '--weights', p('weights.json'), '--rd', p('rd_samples.csv'),
         '--features', p('features.csv'), '--classifier', p('classifier.json'), '--oracle',
         '--crf-ladder', '10,18,26,34,42,50,58'],
    ]
    for step in steps:
        assert run(base + step) == 0, step[0]

@pytest.fixture(scope='module')
def first_run(tmpdir_factory):
    out = str(tmpdir_factory.mktemp('first'))
    pipeline(out)
    return out

def test_every_artifact_is_written(first_run):
    for name in ARTIFACTS:
        assert os.path.exists(os.path.join(first_run, name)), name

def test_artifacts_are_byte_identical_across_runs(first_run, tmpdir):
    second = str(tmpdir.mkdir('second'))
    pipeline(second)
    for name in ARTIFACTS:
        with open(os.path.join(first_run, name), 'rb') as a, open(os.path.join(second, name), 'rb') as b:
            assert a.read() == b.read(), name

def test_reports(first_run):
    report = json.load(open(os.path.join(first_run, 'train_report.json')))
    assert report['train_count'] + report['test_count'] == 90
    assert len(report['cv_grid']) == 4
    allocation = json.load(open(os.path.join(first_run, 'allocation.json')))
    assert allocation['avg_quality'] >= 35 - 1e-9
    assert allocation['worst_quality'] >= 20 - 1e-9
    assert len(allocation['op_index']) == 3
    bdrate = json.load(open(os.path.join(first_run, 'bdrate.json')))
    pairs = [entry['pair'] for entry in bdrate['entries']]
    assert pairs == ['optimal_expected_vs_baseline_expected', 'optimal_actual_vs_baseline_actual',
                     'oracle_actual_vs_baseline_actual']
    assert bdrate['entries'][0]['bd_rate_percent'] <= 0.0
    sweeps = open(os.path.join(first_run, 'sweeps.csv')).read().splitlines()
    assert sweeps[0] == 'kind,label,avg_rate_kbps,avg_quality_db,worst_quality_db'
    assert len(sweeps) == 1 + 5 * 7
    assert len(open(os.path.join(first_run, 'error_vs_k.csv')).read().splitlines()) == 5

def test_exhaustive_optimize_agrees(first_run, tmpdir):
    out = str(tmpdir)
    assert run(['--out-dir', out, 'optimize', '--model', os.path.join(first_run, 'cluster_model.json'),
                '--weights', os.path.join(first_run, 'weights.json'), '--min-avg-quality', '35',
                '--min-worst-quality', '20', '--exhaustive']) == 0
    exact = json.load(open(os.path.join(out, 'allocation.json')))
    heuristic = json.load(open(os.path.join(first_run, 'allocation.json')))
    assert exact['exact']
    assert exact['avg_rate'] <= heuristic['avg_rate'] <= exact['avg_rate'] * 1.005

def test_failed_command_leaves_no_outputs(first_run, tmpdir):
    out = str(tmpdir)
    labels = os.path.join(out, 'labels.csv')
    ids = sorted(storage.read_labels_csv(os.path.join(first_run, 'cluster_labels.csv')))
    storage.write_labels_csv(labels, ids + ['stranger'], [0] * (len(ids) + 1))
    status = run(['--out-dir', out, 'train', '--features', os.path.join(first_run, 'features.csv'),
                  '--labels', labels, '--folds', '3'])
    assert status == 1
    assert not os.path.exists(os.path.join(out, 'classifier.json'))
    assert not os.path.exists(os.path.join(out, 'train_report.json'))

def test_infeasible_optimize_exits_with_error(first_run, tmpdir):
    out = str(tmpdir)
    status = run(['--out-dir', out, 'optimize', '--model', os.path.join(first_run, 'cluster_model.json'),
                  '--weights', os.path.join(first_run, 'weights.json'), '--min-avg-quality', '90',
                  '--min-worst-quality', '20'])
    assert status == 1
    assert not os.path.exists(os.path.join(out, 'allocation.json'))

def test_config_file_overrides_defaults(first_run, tmpdir):
    out = str(tmpdir)
    config = storage.write_json(os.path.join(out, 'config.json'), {'k': 2, 'n_init': 1})
    assert run(['--out-dir', out, '--config', config, 'cluster', '--rd', os.path.join(first_run, 'rd_samples.csv')]) == 0
    assert storage.load_cluster_model(os.path.join(out, 'cluster_model.json')).k == 2
    bad = storage.write_json(os.path.join(out, 'bad.json'), {'colour': 'red'})
    assert run(['--out-dir', out, '--config', bad, 'cluster', '--rd', os.path.join(first_run, 'rd_samples.csv')]) == 1

def test_usage_errors_exit_through_argparse():
    with pytest.raises(SystemExit):
        run(['frobnicate'])
    with pytest.raises(SystemExit):
        run(['cluster'])

def test_missing_inputs_exit_with_error(first_run, tmpdir):
    out = str(tmpdir)
    assert run(['--out-dir', out, 'cluster', '--rd', os.path.join(out, 'nope.csv')]) == 1
    assert run(['--out-dir', out, 'optimize', '--model', os.path.join(out, 'nope.json'),
                '--weights', os.path.join(first_run, 'weights.json'), '--min-avg-quality', '35',
                '--min-worst-quality', '20']) == 1
    assert not os.path.exists(os.path.join(out, 'cluster_model.json'))

def test_cluster_sweeps_error_over_training_sizes(first_run, tmpdir):
    out = str(tmpdir)
    rd = os.path.join(first_run, 'rd_samples.csv')
    assert run(['--out-dir', out, 'cluster', '--rd', rd, '-k', '3', '--n-init', '2',
                '--sweep', '1-3', '--sweep-n', '30,90']) == 0
    lines = open(os.path.join(out, 'error_vs_nk.csv')).read().splitlines()
    assert lines[0] == 'n,k,mean_relative_error'
    assert [tuple(l.split(',')[:2]) for l in lines[1:]] == [('30', '1'), ('30', '2'), ('30', '3'),
                                                          ('90', '1'), ('90', '2'), ('90', '3')]
    other = str(tmpdir.mkdir('other'))
    assert run(['--out-dir', other, 'cluster', '--rd', rd, '--sweep-n', '30']) == 1
    assert not os.path.exists(os.path.join(other, 'cluster_model.json'))
