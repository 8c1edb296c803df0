"""
File formats: CSV for bulk tabular data (pandas), JSON for models and
reports. Every writer is byte-deterministic for identical inputs.
"""
import os
import json
import logging
from contextlib import contextmanager
import numpy as np
import pandas as pd
from rdalloc.rd_model import OperatingPointGrid, RDSample, NormalizationStats, CentroidCurve, ClusterModel
from rdalloc.classifier import FeatureVector, FeatureScaler, ClassifierModel
from rdalloc.svm import SvmHyperparams, BinaryMachine
from rdalloc.allocation import CorpusDistribution
from rdalloc.errors import IngestionError, RDAllocError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
RD_COLUMNS = ['chunk_id', 'q', 'rate_kbps', 'quality_db']
SWEEP_COLUMNS = ['kind', 'label', 'avg_rate_kbps', 'avg_quality_db', 'worst_quality_db']


class Outputs(object):
    """Paths written by one command, so a failure can remove them all."""

    def __init__(self):
        self.paths = []

    def add(self, path):
        self.paths.append(path)
        return path

    def remove_all(self):
        for path in self.paths:
            if os.path.exists(path):
                os.remove(path)
                logger.debug("Removed partial output %s", path)


@contextmanager
def rollback(outputs):
    try:
        yield outputs
    except BaseException:
        outputs.remove_all()
        raise


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError("not JSON serializable: %r" % (obj,))


def _atomic(path, writer):
    directory = os.path.dirname(os.path.abspath(path))
    tmp = path + '.tmp'
    try:
        if not os.path.isdir(directory):
            os.makedirs(directory)
        writer(tmp)
        os.replace(tmp, path)
    except (IOError, OSError) as e:
        raise RDAllocError("cannot write %s: %s" % (path, e))
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)
    return path


def write_json(path, obj):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + '\n'

    def writer(tmp):
        with open(tmp, 'w') as f:
            f.write(text)
    return _atomic(path, writer)


def read_json(path):
    try:
        with open(path, 'r') as f:
            return json.load(f)
    except ValueError as e:
        raise IngestionError("%s: invalid JSON: %s" % (path, e))
    except (IOError, OSError) as e:
        raise IngestionError("%s: cannot read: %s" % (path, e.strerror or e))


def write_csv(path, frame):
    return _atomic(path, lambda tmp: frame.to_csv(tmp, index=False))


def _read_csv(path, expected=None, prefix_columns=None):
    try:
        frame = pd.read_csv(path, dtype={'chunk_id': str}, keep_default_na=False, na_values=[''],
                            float_precision='round_trip')
    except pd.errors.EmptyDataError:
        raise IngestionError("%s: empty CSV" % path, line=1)
    except pd.errors.ParserError as e:
        raise IngestionError("%s: malformed CSV: %s" % (path, e))
    except (IOError, OSError) as e:
        raise IngestionError("%s: cannot read: %s" % (path, e.strerror or e))
    columns = list(frame.columns)
    if expected is not None and columns != expected:
        raise IngestionError("%s: header %s, expected %s" % (path, ','.join(columns), ','.join(expected)), line=1)
    if frame.empty:
        raise IngestionError("%s: no data rows" % path, line=2)
    return frame


def _numeric(frame, column, path):
    values = pd.to_numeric(frame[column], errors='coerce')
    bad = np.flatnonzero(~np.isfinite(values.to_numpy(dtype=float)))
    if len(bad):
        # header is line 1, first data row line 2
        raise IngestionError("%s: %s is not a finite number: %r" % (path, column, frame[column].iloc[bad[0]]),
                             line=int(bad[0]) + 2)
    return values.to_numpy(dtype=float)


def read_rd_csv(path):
    """(grid, samples sorted by chunk_id); the grid is the sorted set of q values."""
    frame = _read_csv(path, RD_COLUMNS)
    missing_id = np.flatnonzero(frame['chunk_id'].isna().to_numpy())
    if len(missing_id):
        raise IngestionError("%s: missing chunk_id" % path, line=int(missing_id[0]) + 2)
    q = _numeric(frame, 'q', path)
    rates = _numeric(frame, 'rate_kbps', path)
    qualities = _numeric(frame, 'quality_db', path)
    dup = np.flatnonzero(pd.DataFrame({'c': frame['chunk_id'], 'q': q}).duplicated().to_numpy())
    if len(dup):
        raise IngestionError("%s: duplicate row for chunk %s" % (path, frame['chunk_id'].iloc[dup[0]]),
                             line=int(dup[0]) + 2)
    grid = OperatingPointGrid(np.unique(q))
    rows = {}
    for i, chunk_id in enumerate(frame['chunk_id']):
        rows.setdefault(chunk_id, []).append(i)
    samples = []
    for chunk_id in sorted(rows):
        idx = np.array(rows[chunk_id])
        if len(idx) != grid.s:
            raise IngestionError("%s: chunk %s covers %d of %d grid points" % (path, chunk_id, len(idx), grid.s),
                                 line=int(idx[0]) + 2)
        order = idx[np.argsort(q[idx])]
        samples.append(RDSample(chunk_id, rates[order], qualities[order], grid))
    return grid, samples


def write_rd_csv(path, samples, grid):
    records = []
    for s in samples:
        for j, q in enumerate(grid.points):
            records.append((s.chunk_id, float(q), float(s.rates[j]), float(s.qualities[j])))
    return write_csv(path, pd.DataFrame.from_records(records, columns=RD_COLUMNS))


def read_features_csv(path):
    frame = _read_csv(path)
    columns = list(frame.columns)
    expected = ['chunk_id'] + ['f%d' % i for i in range(len(columns) - 1)]
    if columns != expected or len(columns) < 2:
        raise IngestionError("%s: header must be chunk_id,f0,f1,..." % path, line=1)
    dup = np.flatnonzero(frame['chunk_id'].duplicated().to_numpy())
    if len(dup):
        raise IngestionError("%s: duplicate chunk %s" % (path, frame['chunk_id'].iloc[dup[0]]), line=int(dup[0]) + 2)
    values = np.column_stack([_numeric(frame, c, path) for c in columns[1:]])
    return [FeatureVector(chunk_id, row) for chunk_id, row in zip(frame['chunk_id'], values)]


def write_features_csv(path, features):
    dims = len(features[0])
    frame = pd.DataFrame(np.vstack([fv.values for fv in features]), columns=['f%d' % i for i in range(dims)])
    frame.insert(0, 'chunk_id', [fv.chunk_id for fv in features])
    return write_csv(path, frame)


def read_labels_csv(path, column='cluster'):
    """chunk_id -> int label; accepts `cluster` or `true_cluster` as the label column."""
    frame = _read_csv(path)
    columns = list(frame.columns)
    if len(columns) != 2 or columns[0] != 'chunk_id' or columns[1] not in ('cluster', 'true_cluster', column):
        raise IngestionError("%s: header must be chunk_id,%s" % (path, column), line=1)
    labels = _numeric(frame, columns[1], path)
    return dict((chunk_id, int(v)) for chunk_id, v in zip(frame['chunk_id'], labels))


def write_labels_csv(path, chunk_ids, labels, column='cluster'):
    return write_csv(path, pd.DataFrame({'chunk_id': list(chunk_ids), column: [int(l) for l in labels]},
                                        columns=['chunk_id', column]))


def write_centroids_csv(path, model):
    records = []
    for curve in model.centroids:
        for j, q in enumerate(model.grid.points):
            records.append((curve.cluster_id, float(q), float(curve.rates[j]), float(curve.qualities[j])))
    return write_csv(path, pd.DataFrame.from_records(records, columns=['cluster', 'q', 'rate_kbps', 'quality_db']))


def write_error_vs_k_csv(path, sweep):
    return write_csv(path, pd.DataFrame.from_records(sweep, columns=['k', 'mean_relative_error']))


def write_error_vs_nk_csv(path, rows):
    return write_csv(path, pd.DataFrame.from_records(rows, columns=['n', 'k', 'mean_relative_error']))


def write_histogram_csv(path, dist):
    if dist.counts is None:
        raise RDAllocError("histogram needs chunk counts, weights alone are not enough")
    return write_csv(path, pd.DataFrame({'cluster': range(dist.k), 'count': dist.counts,
                                         'weight': list(dist.weights)}, columns=['cluster', 'count', 'weight']))


def write_sweeps_csv(path, sweeps):
    records = []
    for sweep in sweeps:
        for p in sweep.points:
            records.append((sweep.kind, p.label, p.avg_rate, p.avg_quality, p.worst_quality))
    return write_csv(path, pd.DataFrame.from_records(records, columns=SWEEP_COLUMNS))


def _check_version(d, what):
    if d.get('v') != SCHEMA_VERSION:
        raise IngestionError("%s: unsupported schema version %r" % (what, d.get('v')))


def weights_to_dict(dist):
    return {'v': SCHEMA_VERSION, 'k': dist.k, 'weights': [float(w) for w in dist.weights], 'counts': dist.counts}


def weights_from_dict(d):
    _check_version(d, 'weights')
    return CorpusDistribution(d['weights'], d.get('counts'))


def cluster_model_to_dict(model):
    return {
        'v': SCHEMA_VERSION,
        'k': model.k,
        'seed': model.seed,
        'grid': [float(p) for p in model.grid.points],
        'stats': {'means': list(model.stats.means), 'stds': list(model.stats.stds)},
        'centroids': [{'cluster_id': c.cluster_id, 'rates': list(c.rates), 'qualities': list(c.qualities)}
                      for c in model.centroids],
    }


def cluster_model_from_dict(d):
    _check_version(d, 'cluster model')
    try:
        grid = OperatingPointGrid(d['grid'])
        stats = NormalizationStats(d['stats']['means'], d['stats']['stds'])
        centroids = [CentroidCurve(c['cluster_id'], c['rates'], c['qualities']) for c in d['centroids']]
        model = ClusterModel(grid, stats, centroids, seed=d.get('seed'))
    except KeyError as e:
        raise IngestionError("cluster model: missing field %s" % e)
    if model.k != d['k']:
        raise IngestionError("cluster model: k=%r but %d centroids" % (d['k'], model.k))
    return model


def classifier_model_to_dict(model):
    machines = []
    for (a, b), m in sorted(model.machines.items()):
        machines.append({'pair': [a, b], 'support_vectors': m.support_vectors.tolist(),
                         'dual_coef': list(m.dual_coef), 'bias': m.bias, 'converged': m.converged})
    return {
        'v': SCHEMA_VERSION,
        'classes': model.classes,
        'scaler': {'means': list(model.scaler.means), 'stds': list(model.scaler.stds)},
        'hyperparams': {'c': model.hyperparams.c, 'gamma': model.hyperparams.gamma},
        'machines': machines,
    }


def classifier_model_from_dict(d):
    _check_version(d, 'classifier model')
    try:
        hp = SvmHyperparams(d['hyperparams']['c'], d['hyperparams']['gamma'])
        scaler = FeatureScaler(d['scaler']['means'], d['scaler']['stds'])
        machines = {}
        for m in d['machines']:
            a, b = m['pair']
            machines[(a, b)] = BinaryMachine(m['support_vectors'], m['dual_coef'], m['bias'], hp.gamma,
                                             positive=a, negative=b, converged=m.get('converged', True))
    except KeyError as e:
        raise IngestionError("classifier model: missing field %s" % e)
    return ClassifierModel(scaler, d['classes'], machines, hp)


def train_report_to_dict(report):
    return {
        'v': SCHEMA_VERSION,
        'cv_grid': [{'c': c, 'gamma': g, 'accuracy': acc} for c, g, acc in report.cv_grid],
        'best': {'c': report.best.c, 'gamma': report.best.gamma},
        'test_accuracy': report.test_accuracy,
        'confusion_matrix': np.asarray(report.confusion_matrix).tolist(),
        'train_count': report.train_count,
        'test_count': report.test_count,
    }


def save_cluster_model(path, model):
    return write_json(path, cluster_model_to_dict(model))


def load_cluster_model(path):
    return cluster_model_from_dict(read_json(path))


def save_classifier_model(path, model):
    return write_json(path, classifier_model_to_dict(model))


def load_classifier_model(path):
    return classifier_model_from_dict(read_json(path))


def load_weights(path):
    return weights_from_dict(read_json(path))


def check_grid(model, grid):
    if model.grid != grid:
        raise RDAllocError("R-D samples use grid %s, model uses %s" % (list(grid.points), list(model.grid.points)))
