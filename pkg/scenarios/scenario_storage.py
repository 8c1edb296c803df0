import os
import json
import pytest
import numpy as np
from rdalloc import storage, synth_corpus, clustering, classifier
from rdalloc.rd_model import OperatingPointGrid, RDSample
from rdalloc.allocation import CorpusDistribution, estimate_weights
from rdalloc.svm import SvmHyperparams
from rdalloc.errors import IngestionError, RDAllocError

RD_HEADER = 'chunk_id,q,rate_kbps,quality_db\n'

def write(path, text):
    with open(path, 'w') as f:
        f.write(text)
    return str(path)

def test_read_rd_csv_sorts_chunks_and_points(tmpdir):
    path = write(tmpdir.join('rd.csv'), RD_HEADER +
                 'b,30,500,36\n'
                 'b,20,900,40\n'
                 'a,20,1000,41\n'
                 'a,30,600,37\n')
    grid, samples = storage.read_rd_csv(path)
    assert list(grid.points) == [20., 30.]
    assert [s.chunk_id for s in samples] == ['a', 'b']
    assert list(samples[1].rates) == [900., 500.]
    assert list(samples[1].qualities) == [40., 36.]

@pytest.mark.parametrize('body, line', [
    ('a,20,1000,41\na,30,x,37\n', 3),
    ('a,20,1000,41\na,20,900,40\n', 3),
    ('a,20,1000,41\na,30,600,37\nb,20,900,40\n', 4),
])
def test_read_rd_csv_reports_line(tmpdir, body, line):
    path = write(tmpdir.join('rd.csv'), RD_HEADER + body)
    with pytest.raises(IngestionError) as info:
        storage.read_rd_csv(path)
    assert info.value.line == line
    assert str(info.value).startswith('line %d: ' % line)

def test_read_rd_csv_rejects_bad_header_and_curves(tmpdir):
    with pytest.raises(IngestionError):
        storage.read_rd_csv(write(tmpdir.join('h.csv'), 'chunk,q,rate,quality\na,20,1,1\n'))
    with pytest.raises(IngestionError):
        storage.read_rd_csv(write(tmpdir.join('e.csv'), ''))
    with pytest.raises(IngestionError):
        storage.read_rd_csv(write(tmpdir.join('m.csv'), RD_HEADER + 'a,20,500,41\na,30,600,37\n'))

def test_rd_csv_rewrite_is_byte_identical(tmpdir):
    cfg = synth_corpus.SynthConfig(n_chunks=12, k_true=3, seed=2)
    samples, _, _ = synth_corpus.generate(cfg)
    first = storage.write_rd_csv(str(tmpdir.join('one.csv')), samples, cfg.grid)
    grid, again = storage.read_rd_csv(first)
    assert grid == cfg.grid
    second = storage.write_rd_csv(str(tmpdir.join('two.csv')), again, grid)
    assert open(first, 'rb').read() == open(second, 'rb').read()

def test_features_and_labels(tmpdir):
    features = [classifier.FeatureVector('c%d' % i, [i, 2.5 * i]) for i in range(4)]
    path = storage.write_features_csv(str(tmpdir.join('f.csv')), features)
    assert open(path).readline().strip() == 'chunk_id,f0,f1'
    back = storage.read_features_csv(path)
    assert [fv.chunk_id for fv in back] == ['c0', 'c1', 'c2', 'c3']
    assert np.allclose(back[3].values, [3., 7.5])
    labels = storage.write_labels_csv(str(tmpdir.join('l.csv')), ['c0', 'c1'], [2, 0], column='true_cluster')
    assert storage.read_labels_csv(labels) == {'c0': 2, 'c1': 0}
    with pytest.raises(IngestionError):
        storage.read_features_csv(write(tmpdir.join('bad.csv'), 'chunk_id,g0\nc0,1\n'))

def test_weights_and_histogram(tmpdir):
    dist = estimate_weights([0, 1, 1, 2], 3)
    path = storage.write_json(str(tmpdir.join('w.json')), storage.weights_to_dict(dist))
    doc = json.load(open(path))
    assert doc == {'v': 1, 'k': 3, 'weights': [0.25, 0.5, 0.25], 'counts': [1, 2, 1]}
    assert list(storage.load_weights(path).weights) == [0.25, 0.5, 0.25]
    hist = storage.write_histogram_csv(str(tmpdir.join('h.csv')), dist)
    assert open(hist).read().splitlines() == ['cluster,count,weight', '0,1,0.25', '1,2,0.5', '2,1,0.25']

def test_unknown_schema_version(tmpdir):
    path = write(tmpdir.join('w.json'), '{"v": 2, "k": 1, "weights": [1.0]}')
    with pytest.raises(IngestionError):
        storage.load_weights(path)
    with pytest.raises(IngestionError):
        storage.read_json(write(tmpdir.join('x.json'), '{not json'))

def test_cluster_model_round_trip(tmpdir, small_corpus):
    cfg, samples, _, _ = small_corpus
    model, _ = clustering.cluster_samples(samples, clustering.KMeansConfig(k=3, n_init=2, seed=4), cfg.grid)
    path = storage.save_cluster_model(str(tmpdir.join('m.json')), model)
    back = storage.load_cluster_model(path)
    assert back.k == 3 and back.seed == 4
    assert back.grid == model.grid
    assert np.array_equal(back.rates, model.rates)
    assert np.array_equal(back.normalized_centroids, model.normalized_centroids)
    storage.check_grid(back, cfg.grid)
    with pytest.raises(RDAllocError):
        storage.check_grid(back, OperatingPointGrid([1, 2]))

def test_classifier_model_predicts_the_same_after_reload(tmpdir, small_corpus):
    _, _, features, labels = small_corpus
    X = np.vstack([fv.values for fv in features])
    model = classifier.train_classifier(X, labels, SvmHyperparams(1.0, 0.5))
    path = storage.save_classifier_model(str(tmpdir.join('c.json')), model)
    back = storage.load_classifier_model(path)
    assert back.hyperparams == model.hyperparams
    assert np.array_equal(back.predict_many(X), model.predict_many(X))

def test_rollback_removes_partial_outputs(tmpdir):
    outputs = storage.Outputs()
    with pytest.raises(RDAllocError):
        with storage.rollback(outputs):
            outputs.add(storage.write_json(str(tmpdir.join('a.json')), {'x': 1}))
            raise RDAllocError('boom')
    assert not os.path.exists(str(tmpdir.join('a.json')))
    assert not os.path.exists(str(tmpdir.join('a.json.tmp')))

def test_distribution_needs_counts_for_histogram(tmpdir):
    with pytest.raises(RDAllocError):
        storage.write_histogram_csv(str(tmpdir.join('h.csv')), CorpusDistribution([1.0]))

def test_rd_csv_layout(tmpdir):
    grid = OperatingPointGrid([20, 30])
    path = storage.write_rd_csv(str(tmpdir.join('rd.csv')), [RDSample('z', [10., 5.], [40., 30.], grid)], grid)
    assert open(path).read().splitlines()[1:] == ['z,20.0,10.0,40.0', 'z,30.0,5.0,30.0']

def test_missing_files_are_ingestion_errors(tmpdir):
    with pytest.raises(IngestionError):
        storage.read_json(str(tmpdir.join('absent.json')))
    with pytest.raises(IngestionError):
        storage.read_rd_csv(str(tmpdir.join('absent.csv')))
