#!/usr/bin/env python
"""
Corpus-level encoder operating point allocation

    generate   synthetic R-D samples, features and true labels
    cluster    k-means over normalized R-D curves -> cluster model + labels
    train      SVM cluster classifier with grid-search CV -> model + report
    classify   predict clusters for a feature file
    weights    cluster weights (and histogram) from predictions
    optimize   per-cluster operating points under quality constraints
    evaluate   baseline / optimal / oracle sweeps and BD-rates
"""
import os
import sys
import time
import logging
from argparse import ArgumentParser
import numpy as np
from rdalloc import __version__
from rdalloc import storage, rd_model, clustering, classifier, allocation, evaluation, synth_corpus
from rdalloc.config import PipelineConfig, parse_float_list, parse_int_list
from rdalloc.errors import RDAllocError
from rdalloc.tasks import set_logging
from rdalloc.storage import Outputs, rollback
from logutils.events import log_event

logger = logging.getLogger(__name__)

COMMANDS = ('generate', 'cluster', 'train', 'classify', 'weights', 'optimize', 'evaluate')


def parse_arguments(argv=None):
    parser = ArgumentParser(prog='rdalloc', description=__doc__.strip().splitlines()[0])
    parser.add_argument('-v', '--version', action='version', version='%(prog)s ' + __version__)
    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="Seed for every random choice (default: 0)")
    parser.add_argument(
        "-o", "--out-dir",
        dest="out_dir",
        default=".",
        help="Directory for outputs (default: %(default)s)")
    parser.add_argument(
        "-c", "--config",
        default=None,
        help="JSON file overriding pipeline defaults (default: %(default)s)")
    parser.add_argument(
        "-w", "--workers",
        type=int,
        default=None,
        help="Worker threads (default: 4)")
    parser.add_argument(
        "-d", "--debug",
        action="store_true",
        help="Debug logging (default: %(default)s)")
    parser.add_argument(
        "--log-json",
        dest="log_json",
        action="store_true",
        help="Log one JSON document per line (default: %(default)s)")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("generate", help="Generate a synthetic corpus")
    p.add_argument("--synth-config", dest="synth_config", help="JSON SynthConfig")
    p.add_argument("--n-chunks", dest="n_chunks", type=int, help="Number of chunks")
    p.add_argument("--k-true", dest="k_true", type=int, help="Number of archetypes")
    p.add_argument("--rd-noise", dest="rd_noise_rel", type=float, help="Relative R-D parameter noise")
    p.add_argument("--feature-noise", dest="feature_noise", type=float, help="Feature noise std")

    p = sub.add_parser("cluster", help="Cluster R-D curves")
    p.add_argument("--rd", dest="rd_csv", required=True, help="R-D sample CSV")
    p.add_argument("-k", dest="k", type=int, help="Number of clusters (default: 10)")
    p.add_argument("--n-init", dest="n_init", type=int, help="k-means restarts (default: 10)")
    p.add_argument("--out-model", dest="out_model", help="Cluster model JSON (default: <out-dir>/cluster_model.json)")
    p.add_argument("--sweep", dest="sweep_k", type=parse_int_list,
                   help="Also write relative error vs k for these k, e.g. 1-15")
    p.add_argument("--sweep-n", dest="sweep_n", type=parse_int_list,
                   help="Repeat the --sweep on seeded subsets of these sizes, e.g. 500,1000,2000")

    p = sub.add_parser("train", help="Train the cluster classifier")
    p.add_argument("--features", dest="features_csv", required=True, help="Feature CSV")
    p.add_argument("--labels", dest="labels_csv", required=True, help="Labels CSV (chunk_id,cluster)")
    p.add_argument("--split", type=float, help="Training fraction (default: 0.8)")
    p.add_argument("--folds", type=int, help="Cross-validation folds (default: 5)")
    p.add_argument("--c-grid", dest="c_grid", type=parse_float_list, help="Comma-separated C values")
    p.add_argument("--gamma-grid", dest="gamma_grid", type=parse_float_list, help="Comma-separated gamma values")
    p.add_argument("--out-model", dest="out_model", help="Classifier JSON (default: <out-dir>/classifier.json)")
    p.add_argument("--pca-out", dest="pca_out", help="Write a 2-component PCA projection CSV of the features")

    p = sub.add_parser("classify", help="Predict R-D clusters")
    p.add_argument("--features", dest="features_csv", required=True, help="Feature CSV")
    p.add_argument("--model", dest="classifier_model", required=True, help="Classifier JSON")
    p.add_argument("--label-noise", dest="label_noise", type=float, default=0.0,
                   help="Fraction of predictions replaced by a random other cluster (default: %(default)s)")
    p.add_argument("-k", dest="k", type=int, help="Cluster count for label noise (default: model classes)")

    p = sub.add_parser("weights", help="Estimate cluster weights")
    p.add_argument("--predictions", dest="predictions_csv", required=True, help="Predictions CSV")
    p.add_argument("-k", dest="k", type=int, help="Number of clusters (default: 10)")

    p = sub.add_parser("optimize", help="Solve the allocation problem")
    p.add_argument("--model", dest="cluster_model", required=True, help="Cluster model JSON")
    p.add_argument("--weights", dest="weights", required=True, help="Weights JSON")
    p.add_argument("--min-avg-quality", dest="min_avg_quality", type=float, required=True, help="dB")
    p.add_argument("--min-worst-quality", dest="min_worst_quality", type=float, required=True, help="dB")
    p.add_argument("--exhaustive", action="store_true", help="Enumerate all combinations instead")

    p = sub.add_parser("evaluate", help="Sweeps and BD-rates")
    p.add_argument("--model", dest="cluster_model", required=True, help="Cluster model JSON")
    p.add_argument("--weights", dest="weights", required=True, help="Weights JSON")
    p.add_argument("--rd", dest="rd_csv", required=True, help="R-D sample CSV")
    p.add_argument("--features", dest="features_csv", required=True, help="Feature CSV")
    p.add_argument("--classifier", dest="classifier_model", required=True, help="Classifier JSON")
    p.add_argument("--crf-ladder", dest="crf_ladder", type=parse_float_list,
                   help="Baseline CRFs (default: the whole grid)")
    p.add_argument("--label-noise", dest="label_noise", type=float, default=0.0,
                   help="Fraction of chunk predictions flipped (default: %(default)s)")
    p.add_argument("--oracle", action="store_true", help="Add the per-chunk oracle sweep")

    return parser.parse_args(argv)


def _out(out_dir, name, explicit=None):
    return explicit or os.path.join(out_dir, name)


def cmd_generate(out_dir, seed=0, synth_config=None, outputs=None, **overrides):
    outputs = outputs or Outputs()
    params = storage.read_json(synth_config) if synth_config else {}
    params.update(dict((k, v) for k, v in overrides.items() if v is not None))
    params.setdefault('seed', seed)
    cfg = synth_corpus.SynthConfig.from_dict(params)
    samples, features, labels = synth_corpus.generate(cfg)
    outputs.add(storage.write_rd_csv(os.path.join(out_dir, 'rd_samples.csv'), samples, cfg.grid))
    outputs.add(storage.write_features_csv(os.path.join(out_dir, 'features.csv'), features))
    outputs.add(storage.write_labels_csv(os.path.join(out_dir, 'labels.csv'), [s.chunk_id for s in samples],
                                         labels, column='true_cluster'))
    outputs.add(storage.write_json(os.path.join(out_dir, 'synth_config.json'), cfg.to_dict()))
    return 0


def cmd_cluster(rd_csv, k, seed, out_model, out_dir='.', n_init=10, max_iters=300, sweep_k=None, workers=4,
                outputs=None, sweep_n=None):
    outputs = outputs or Outputs()
    grid, samples = storage.read_rd_csv(rd_csv)
    log_event('ingest', 'rd_samples', chunks=len(samples), grid_size=grid.s)
    cfg = clustering.KMeansConfig(k=k, n_init=n_init, max_iters=max_iters, seed=seed)
    model, labels = clustering.cluster_samples(samples, cfg, grid, max_workers=workers)
    outputs.add(storage.save_cluster_model(out_model, model))
    outputs.add(storage.write_labels_csv(os.path.join(out_dir, 'cluster_labels.csv'),
                                         [s.chunk_id for s in samples], labels))
    outputs.add(storage.write_centroids_csv(os.path.join(out_dir, 'centroids.csv'), model))
    if sweep_k:
        X = rd_model.normalize(rd_model.rd_matrix(samples, grid), model.stats)
        sweep = clustering.error_vs_k_sweep(X, sweep_k, cfg, max_workers=workers)
        outputs.add(storage.write_error_vs_k_csv(os.path.join(out_dir, 'error_vs_k.csv'), sweep))
        if sweep_n:
            rows = clustering.error_vs_n_sweep(X, sweep_n, sweep_k, cfg, max_workers=workers)
            outputs.add(storage.write_error_vs_nk_csv(os.path.join(out_dir, 'error_vs_nk.csv'), rows))
    elif sweep_n:
        raise RDAllocError("--sweep-n needs --sweep to name the k values")
    return 0


def _join(features, labels):
    by_id = dict((fv.chunk_id, fv) for fv in features)
    unmatched = sorted(set(by_id) ^ set(labels))
    if unmatched:
        raise RDAllocError("unmatched chunk_ids between features and labels: %s" % ', '.join(unmatched))
    return [(by_id[chunk_id], labels[chunk_id]) for chunk_id in sorted(labels)]


def cmd_train(features_csv, labels_csv, split, folds, seed, out_model, out_dir='.', c_grid=classifier.C_GRID,
              gamma_grid=classifier.GAMMA_GRID, pca_out=None, workers=4, outputs=None):
    outputs = outputs or Outputs()
    features = storage.read_features_csv(features_csv)
    log_event('ingest', 'features', chunks=len(features), dims=len(features[0]))
    dataset = _join(features, storage.read_labels_csv(labels_csv))
    k = max(label for _, label in dataset) + 1
    model, report = classifier.train_and_report(dataset, split, folds, seed, c_grid, gamma_grid, k=k,
                                                max_workers=workers)
    logger.info("Test accuracy %.4f (%d train / %d test), C=%g gamma=%g", report.test_accuracy,
                report.train_count, report.test_count, report.best.c, report.best.gamma)
    outputs.add(storage.save_classifier_model(out_model, model))
    outputs.add(storage.write_json(os.path.join(out_dir, 'train_report.json'), storage.train_report_to_dict(report)))
    if pca_out:
        import pandas as pd
        X = np.vstack([fv.values for fv, _ in dataset])
        projected = classifier.project_pca(X, model.scaler)
        frame = pd.DataFrame({'chunk_id': [fv.chunk_id for fv, _ in dataset],
                              'cluster': [label for _, label in dataset],
                              'pc1': projected[:, 0], 'pc2': projected[:, 1]},
                             columns=['chunk_id', 'cluster', 'pc1', 'pc2'])
        outputs.add(storage.write_csv(pca_out, frame))
    return 0


def cmd_classify(features_csv, classifier_model, out_dir='.', label_noise=0.0, k=None, seed=0, outputs=None):
    outputs = outputs or Outputs()
    features = storage.read_features_csv(features_csv)
    model = storage.load_classifier_model(classifier_model)
    predictions = model.predict_many(np.vstack([fv.values for fv in features]))
    if label_noise:
        predictions = classifier.inject_label_noise(predictions, label_noise, k or max(model.classes) + 1, seed)
    outputs.add(storage.write_labels_csv(os.path.join(out_dir, 'predictions.csv'),
                                         [fv.chunk_id for fv in features], predictions))
    return 0


def cmd_weights(predictions_csv, k, out_dir='.', outputs=None):
    outputs = outputs or Outputs()
    predictions = storage.read_labels_csv(predictions_csv)
    dist = allocation.estimate_weights([predictions[c] for c in sorted(predictions)], k)
    outputs.add(storage.write_json(os.path.join(out_dir, 'weights.json'), storage.weights_to_dict(dist)))
    outputs.add(storage.write_histogram_csv(os.path.join(out_dir, 'histogram.csv'), dist))
    return 0


def cmd_optimize(cluster_model, weights, min_avg_quality, min_worst_quality, out_dir='.', exhaustive=False,
                 outputs=None):
    outputs = outputs or Outputs()
    model = storage.load_cluster_model(cluster_model)
    w = storage.load_weights(weights)
    constraints = allocation.QualityConstraints(min_avg_quality, min_worst_quality)
    solve = allocation.exhaustive_allocation if exhaustive else allocation.solve_allocation
    sol = solve(model, w, constraints)
    logger.info("Average rate %.2f kbps, average quality %.3f dB, worst %.3f dB", sol.avg_rate, sol.avg_quality,
                sol.worst_quality)
    outputs.add(storage.write_json(os.path.join(out_dir, 'allocation.json'), sol.to_dict()))
    return 0


def cmd_evaluate(cluster_model, weights, rd_csv, features_csv, classifier_model, crf_ladder=None, out_dir='.',
                 label_noise=0.0, oracle=False, seed=0, outputs=None):
    outputs = outputs or Outputs()
    model = storage.load_cluster_model(cluster_model)
    w = storage.load_weights(weights)
    grid, samples = storage.read_rd_csv(rd_csv)
    storage.check_grid(model, grid)
    features = storage.read_features_csv(features_csv)
    svm_model = storage.load_classifier_model(classifier_model)
    crfs = list(crf_ladder) if crf_ladder else [float(q) for q in grid.points]

    baseline = evaluation.baseline_sweep_expected(model, w, crfs)
    optimal = evaluation.optimal_sweep_expected(model, w, baseline)
    predictions = evaluation.predict_chunks(samples, features, svm_model)
    if label_noise:
        predictions = classifier.inject_label_noise(predictions, label_noise, model.k, seed)
    ladder = [p.q for p in optimal.points]
    baseline_actual, optimal_actual = evaluation.actual_sweeps(samples, features, svm_model, model,
                                                               optimal.solutions, ladder, predictions)
    sweeps = [baseline, optimal, baseline_actual, optimal_actual]
    bdrates = [evaluation.compare('optimal_expected_vs_baseline_expected', baseline, optimal),
               evaluation.compare('optimal_actual_vs_baseline_actual', baseline_actual, optimal_actual)]
    if oracle:
        oracle_actual = evaluation.oracle_sweep(samples, baseline_actual, grid)
        sweeps.append(oracle_actual)
        bdrates.append(evaluation.compare('oracle_actual_vs_baseline_actual', baseline_actual, oracle_actual))
    for entry in bdrates:
        logger.info("%s: BD-rate %.2f%%, BD-quality %.3f dB", entry['pair'], entry['bd_rate_percent'],
                    entry['bd_quality_db'])

    outputs.add(storage.write_sweeps_csv(os.path.join(out_dir, 'sweeps.csv'), sweeps))
    outputs.add(storage.write_json(os.path.join(out_dir, 'bdrate.json'), {'v': storage.SCHEMA_VERSION,
                                                                          'entries': bdrates}))
    return 0


def dispatch(args, cfg, outputs):
    out_dir = args.out_dir
    if args.command == 'generate':
        return cmd_generate(out_dir, cfg.seed, args.synth_config, outputs, n_chunks=args.n_chunks,
                            k_true=args.k_true, rd_noise_rel=args.rd_noise_rel, feature_noise=args.feature_noise)
    elif args.command == 'cluster':
        return cmd_cluster(args.rd_csv, cfg.k, cfg.seed, _out(out_dir, 'cluster_model.json', args.out_model),
                           out_dir, cfg.n_init, cfg.max_iters, cfg.sweep_k, cfg.workers, outputs, cfg.sweep_n)
    elif args.command == 'train':
        return cmd_train(args.features_csv, args.labels_csv, cfg.split, cfg.folds, cfg.seed,
                         _out(out_dir, 'classifier.json', args.out_model), out_dir, cfg.c_grid, cfg.gamma_grid,
                         args.pca_out, cfg.workers, outputs)
    elif args.command == 'classify':
        return cmd_classify(args.features_csv, args.classifier_model, out_dir, args.label_noise, args.k, cfg.seed,
                            outputs)
    elif args.command == 'weights':
        return cmd_weights(args.predictions_csv, cfg.k, out_dir, outputs)
    elif args.command == 'optimize':
        return cmd_optimize(args.cluster_model, args.weights, args.min_avg_quality, args.min_worst_quality,
                            out_dir, args.exhaustive, outputs)
    elif args.command == 'evaluate':
        return cmd_evaluate(args.cluster_model, args.weights, args.rd_csv, args.features_csv,
                            args.classifier_model, cfg.crf_ladder, out_dir, args.label_noise, args.oracle,
                            cfg.seed, outputs)
    raise RDAllocError("unknown command %r" % args.command)


def run(argv=None):
    """Run one subcommand; returns the exit status."""
    args = parse_arguments(argv)
    set_logging(args.debug, args.log_json)
    start = time.time()
    outputs = Outputs()
    try:
        cfg = PipelineConfig.load(args.config).merge(args)
        log_event('cli', 'started', show=False, command=args.command, seed=cfg.seed)
        with rollback(outputs):
            status = dispatch(args, cfg, outputs)
    except RDAllocError as e:
        log_event('cli', 'failed', show=False, command=args.command, error=str(e))
        logger.error("%s failed: %s", args.command, e)
        return 1
    for path in outputs.paths:
        log_event('cli', 'wrote', show=False, command=args.command, path=path)
    log_event('cli', 'done', show=False, command=args.command, duration=time.time() - start)
    return status


def main():
    sys.exit(run())


if __name__ == '__main__':
    main()
