"""
Command line entry point

Every subcommand reads and writes artifacts on disk, so the stages can be run
one by one or all at once with end-to-end. Results go to standard output as
text, or as a single JSON document with --json; logging goes to stderr.
"""

import argparse
import dataclasses
import json
import os
import sys

from eagle.archive import file_digest
from eagle.autodiff import set_precision
from eagle.data import (OrderTable, SupplyGraph, SplitTag, audit_features, build_graph,
                        generate_synthetic, ingest_stats, load_bundle, load_bundle_graph, prepare_bundle, read_orders,
                        save_bundle, write_synthetic_csv)
from eagle.data.snapshots import label_stats
from eagle.errors import EagleError, IOFailure, UsageError
from eagle.explain import Attribution, ExportFormat, aggregate_risk, export_risk
from eagle.log import get_logger, setup_logger
from eagle.model import ablation_from_string
from eagle.pipeline import end_to_end
from eagle.settings import PRESETS, load_settings
from eagle.training import Checkpoint, calibrate_threshold, collect_reports, metrics, predict, run_ablation, train
from eagle.training.experiment import write_history_csv

logger = get_logger('eagle.cli')


def _split_choices():
    return [tag.value for tag in SplitTag]


def build_parser():
    parser = argparse.ArgumentParser(prog='eagle', description='Delivery-delay prediction on supply graphs')
    parser.add_argument('--json', action='store_true',
                        help='Print results as JSON on stdout')
    parser.add_argument('--debug', action='store_true',
                        help='Enable debug logging')
    parser.add_argument('--log-file', type=str, default=None,
                        help='Also log to this file')
    parser.add_argument('--precision', type=int, choices=[32, 64], default=None,
                        help='Floating point precision of the tensor engine (default: from config, 32)')
    parser.add_argument('--threads', type=int, default=None,
                        help='Worker processes for independent seeds (default: from config, 1)')
    parser.add_argument('--config', type=str, default=None,
                        help='INI config file overriding the preset')
    parser.add_argument('--preset', choices=PRESETS, default='paper',
                        help='Default settings to start from (default: paper)')
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True

    synthetic = commands.add_parser('synthetic', help='Write a generated order CSV in the raw column layout')
    synthetic.add_argument('--out', required=True, help='CSV path to write')
    synthetic.add_argument('--seed', type=int, default=0)

    ingest = commands.add_parser('ingest', help='Parse and audit a raw order CSV')
    source = ingest.add_mutually_exclusive_group(required=True)
    source.add_argument('--csv', help='Raw order CSV')
    source.add_argument('--synthetic', action='store_true', help='Generate orders from the synthetic config')
    ingest.add_argument('--schema', help='INI file with a [schema] section (default: --config)')
    ingest.add_argument('--seed', type=int, default=0, help='Seed for --synthetic')
    ingest.add_argument('--out', required=True, help='Directory for the order table')
    ingest.add_argument('--audit', help='Where to write the audit report (default: <out>/audit.json)')

    graph = commands.add_parser('graph', help='Build the supply graph, or show its statistics')
    graph.add_argument('action', nargs='?', choices=['build', 'stats'], default='build')
    graph.add_argument('--orders', help='Order table directory')
    graph.add_argument('--graph', help='Graph file for stats')
    graph.add_argument('--out', help='Graph file to write')
    graph.add_argument('--dot', help='Also write a DOT rendering')
    graph.add_argument('--graphml', help='Also write a GraphML rendering')

    snapshots = commands.add_parser('snapshots', help='Build the labeled snapshot bundle, or show its statistics')
    snapshots.add_argument('action', nargs='?', choices=['build', 'stats'], default='build')
    snapshots.add_argument('--orders', help='Order table directory')
    snapshots.add_argument('--graph', help='Graph file')
    snapshots.add_argument('--bundle', help='Bundle file for stats')
    snapshots.add_argument('--window', type=int, default=None)
    snapshots.add_argument('--stride', type=int, default=None)
    snapshots.add_argument('--horizon', type=int, default=None)
    snapshots.add_argument('--out', help='Bundle file to write')

    train_cmd = commands.add_parser('train', help='Train one model for one seed')
    train_cmd.add_argument('--bundle', required=True)
    train_cmd.add_argument('--graph', required=True)
    train_cmd.add_argument('--seed', type=int, required=True)
    train_cmd.add_argument('--variant', default='full', help='full, A1, A2, A3 or static_gat')
    train_cmd.add_argument('--out', required=True, help='Checkpoint file to write')
    train_cmd.add_argument('--history', help='Per-epoch history CSV to write')

    evaluate = commands.add_parser('eval', help='Score a checkpoint on one split')
    evaluate.add_argument('--ckpt', required=True)
    evaluate.add_argument('--bundle', required=True)
    evaluate.add_argument('--graph', help='Graph file (default: the graph embedded in the bundle)')
    evaluate.add_argument('--split', choices=_split_choices(), default='test')
    evaluate.add_argument('--threshold', type=float, default=None,
                          help='Decision threshold (default: calibrated on the validation split)')
    evaluate.add_argument('--predictions', help='Per-node prediction CSV to write')

    ablate = commands.add_parser('ablate', help='Train and evaluate every seed of an ablation variant')
    ablate.add_argument('--variant', required=True, help='full, A1, A2, A3 or static_gat')
    ablate.add_argument('--bundle', required=True)
    ablate.add_argument('--graph', help='Graph file (default: the graph embedded in the bundle)')
    ablate.add_argument('--out', required=True, help='Runs directory')

    explain = commands.add_parser('explain', help='Aggregate attention into a node risk graph')
    explain.add_argument('--ckpt', required=True)
    explain.add_argument('--bundle', required=True)
    explain.add_argument('--graph', help='Graph file (default: the graph embedded in the bundle)')
    explain.add_argument('--split', choices=_split_choices(), default='test')
    explain.add_argument('--attribution', choices=[a.value for a in Attribution], default=None)
    explain.add_argument('--format', choices=[f.value for f in ExportFormat], default='json')
    explain.add_argument('--top', type=int, default=10, help='Ranked nodes to print')
    explain.add_argument('--out', required=True)

    report = commands.add_parser('report', help='Merge the reports of a runs directory')
    report.add_argument('--runs', required=True)
    report.add_argument('--out', help='JSON file to write')

    pipeline = commands.add_parser('end-to-end', help='Run every stage with caching and a run manifest')
    pipeline.add_argument('--csv', help='Raw order CSV (default: generated orders)')
    pipeline.add_argument('--out', help='Run directory (default: from config)')
    pipeline.add_argument('--cache-dir', help='Stage cache (default: $EAGLE_CACHE_DIR or from config)')
    return parser


def _write_text(path, text):
    try:
        with open(path, 'w', encoding='utf-8') as fh:
            fh.write(text)
    except OSError as e:
        raise IOFailure(f"Cannot write {path}: {e}")


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise UsageError(f"{args.command} {getattr(args, 'action', '')}".strip() +
                             f" needs --{name.replace('_', '-')}")


def _graph_for(args):
    """--graph when given, else the graph embedded in --bundle"""
    if args.graph is not None:
        return SupplyGraph.load(args.graph)
    graph = load_bundle_graph(args.bundle)
    if graph is None:
        raise UsageError(f"{args.command} needs --graph: {args.bundle} does not embed a graph")
    return graph


def cmd_synthetic(args, settings):
    table = generate_synthetic(settings.synthetic, args.seed)
    write_synthetic_csv(table, args.out, settings.schema)
    return {'out': args.out, 'rows': len(table), 'digest': file_digest(args.out)}


def cmd_ingest(args, settings):
    schema = load_settings(args.schema, args.preset).schema if args.schema else settings.schema
    audit = audit_features(schema)
    if args.csv is not None:
        table = read_orders(args.csv, schema)
    else:
        table = generate_synthetic(settings.synthetic, args.seed)
    table.save(args.out)
    audit_path = args.audit or os.path.join(args.out, 'audit.json')
    audit.save(audit_path)
    return {'out': args.out, 'audit': audit_path, 'audit_passed': audit.passed, 'dropped': table.dropped,
            'stats': ingest_stats(table).to_json()}


def cmd_graph(args, settings):
    if args.action == 'stats':
        _require(args, 'graph')
        return SupplyGraph.load(args.graph).degree_stats()
    _require(args, 'orders', 'out')
    graph = build_graph(OrderTable.load(args.orders), settings.schema)
    graph.save(args.out)
    for path, render in ((args.dot, graph.to_dot), (args.graphml, graph.to_graphml)):
        if path is not None:
            _write_text(path, render())
    return dict(graph.degree_stats(), out=args.out)


def cmd_snapshots(args, settings):
    if args.action == 'stats':
        _require(args, 'bundle')
        return label_stats(load_bundle(args.bundle))
    _require(args, 'orders', 'graph', 'out')
    overrides = {name: getattr(args, name) for name in ('window', 'stride', 'horizon')
                 if getattr(args, name) is not None}
    config = dataclasses.replace(settings.snapshots, **overrides)
    graph = SupplyGraph.load(args.graph)
    bundle = prepare_bundle(OrderTable.load(args.orders), graph.index, config)
    save_bundle(bundle, args.out, graph)
    return dict(label_stats(bundle), out=args.out, digest=file_digest(args.out))


def cmd_train(args, settings):
    model_config = settings.model.with_ablation(ablation_from_string(args.variant))
    checkpoint, history = train(load_bundle(args.bundle), SupplyGraph.load(args.graph), model_config,
                                settings.train, args.seed)
    digest = checkpoint.save(args.out)
    if args.history is not None:
        write_history_csv(history, args.history)
    return {'out': args.out, 'digest': digest, 'seed': args.seed, 'variant': model_config.ablation.value,
            'best_epoch': checkpoint.best_epoch, 'best_val_auc': checkpoint.best_val_auc}


def cmd_eval(args, settings):
    checkpoint = Checkpoint.load(args.ckpt)
    bundle = load_bundle(args.bundle)
    graph = _graph_for(args)
    threshold = args.threshold
    if threshold is None:
        val = predict(checkpoint, bundle, graph, SplitTag.VAL)
        threshold = calibrate_threshold(val.score, val.y_class)
    predictions = predict(checkpoint, bundle, graph, args.split)
    if args.predictions is not None:
        predictions.save(args.predictions)
    return dict(metrics(predictions, threshold), split=args.split)


def cmd_ablate(args, settings):
    report = run_ablation(load_bundle(args.bundle), _graph_for(args), settings.model, args.variant,
                          settings.train, workers=settings.pipeline.workers, out_dir=args.out)
    return report.to_json()


def cmd_explain(args, settings):
    attribution = args.attribution or settings.pipeline.attribution
    risk = aggregate_risk(Checkpoint.load(args.ckpt), load_bundle(args.bundle), _graph_for(args),
                          args.split, attribution)
    export_risk(risk, args.format, args.out)
    ranked = [{'node': risk.graph.index.label(i), 'risk': float(risk.normalized[i])}
              for i in risk.ranking(args.top)]
    return {'out': args.out, 'format': args.format, 'snapshots': risk.snapshot_count, 'top': ranked}


def cmd_report(args, settings):
    merged = collect_reports(args.runs)
    if args.out is not None:
        _write_text(args.out, json.dumps(merged, indent=2, sort_keys=True))
    return merged


def cmd_end_to_end(args, settings):
    result = end_to_end(settings, csv_path=args.csv, out_dir=args.out, cache_dir=args.cache_dir)
    return {
        'out': result.out_dir,
        'variants': {name: report.aggregate for name, report in result.reports.items()},
        'top_risk': [result.risk.graph.index.label(i) for i in result.risk.ranking(5)],
        'cached': result.manifest.cached,
        'config_hash': result.manifest.config_hash,
    }


COMMANDS = {
    'synthetic': cmd_synthetic,
    'ingest': cmd_ingest,
    'graph': cmd_graph,
    'snapshots': cmd_snapshots,
    'train': cmd_train,
    'eval': cmd_eval,
    'ablate': cmd_ablate,
    'explain': cmd_explain,
    'report': cmd_report,
    'end-to-end': cmd_end_to_end,
}


def _print_text(value, indent=0):
    pad = '  ' * indent
    if isinstance(value, dict):
        for key, item in value.items():
            if isinstance(item, (dict, list)) and item:
                print(f"{pad}{key}:")
                _print_text(item, indent + 1)
            else:
                print(f"{pad}{key}: {item}")
    elif isinstance(value, list):
        for item in value:
            if isinstance(item, dict):
                print(f"{pad}-")
                _print_text(item, indent + 1)
            else:
                print(f"{pad}- {item}")
    else:
        print(f"{pad}{value}")


def _load_settings(args):
    settings = load_settings(args.config, args.preset)
    if args.precision is not None:
        settings.pipeline.precision = args.precision
    if args.threads is not None:
        if args.threads < 1:
            raise UsageError(f"--threads must be at least 1, got {args.threads}")
        settings.pipeline.workers = args.threads
    set_precision(settings.pipeline.precision)
    return settings


def dispatch(argv=None):
    """Run one command line and return its exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse has already printed usage and the error
        if e.code is None:
            return 0
        return e.code if isinstance(e.code, int) else UsageError.exit_code

    setup_logger(log_file=args.log_file, debug=args.debug)
    try:
        settings = _load_settings(args)
        result = COMMANDS[args.command](args, settings)
    except EagleError as e:
        logger.error(f"{type(e).__name__}: {e}")
        if args.json:
            body = {'status': 'error', 'error': str(e), 'class': type(e).__name__}
            if e.stage is not None:
                body['stage'] = e.stage
            print(json.dumps(body))
        return e.exit_code

    if args.json:
        print(json.dumps({'status': 'ok', 'command': args.command, 'result': result}, sort_keys=True))
    else:
        _print_text(result)
    return 0


def main():
    """CLI entry point"""
    sys.exit(dispatch())


if __name__ == '__main__':
    main()
