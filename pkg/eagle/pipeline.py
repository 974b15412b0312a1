"""
End-to-end pipeline

Runs ingest, graph, snapshots, training of every configured variant and explain
in order. Each stage's outputs live in a cache directory named by a digest of
its inputs and config, together with an index of the sha256 of every file it
wrote. A stage whose index exists is served from the cache once its files have
been re-hashed; a file whose bytes no longer match the index is reported as
corrupted. Outputs are then copied into the run directory and listed in the
run manifest with their digests.
"""

import json
import os
import shutil
import time
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

import eagle
from eagle.archive import file_digest, json_digest
from eagle.autodiff import precision
from eagle.data.audit import audit_features, measure_correlations
from eagle.data.graph import SupplyGraph, build_graph
from eagle.data.ingest import read_orders
from eagle.data.order import OrderTable
from eagle.data.snapshots import BUNDLE_VERSION, SplitTag, label_stats, load_bundle, prepare_bundle, save_bundle
from eagle.data.synthetic import generate_synthetic
from eagle.errors import EagleError, FormatError, IOFailure
from eagle.explain import Attribution, ExportFormat, aggregate_risk, export_risk, load_risk
from eagle.log import get_logger
from eagle.model import ablation_from_string
from eagle.training.checkpoint import CHECKPOINT_VERSION, Checkpoint
from eagle.training.experiment import MetricsReport, collect_reports, run_ablation

logger = get_logger('eagle.pipeline')

MANIFEST_VERSION = 1
INDEX_FILE = 'index.json'
RUNS_DIR = 'runs'


def _write_json(path, json_object):
    try:
        with open(path, 'w', encoding='utf-8') as fh:
            json.dump(json_object, fh, indent=2, sort_keys=True)
    except OSError as e:
        raise IOFailure(f"Cannot write {path}: {e}")


class StageCache:
    """Stage outputs keyed by the digest of everything they were computed from"""

    def __init__(self, root):
        self.root = root

    def directory(self, stage, key):
        return os.path.join(self.root, f"{stage}-{key[:16]}")

    def lookup(self, stage, key):
        """File digests of a complete cache entry, or None on a miss

        :raises FormatError: the entry exists but an artifact is missing or its digest changed
        """
        directory = self.directory(stage, key)
        index_path = os.path.join(directory, INDEX_FILE)
        if not os.path.exists(index_path):
            return None
        try:
            with open(index_path, encoding='utf-8') as fh:
                index = json.load(fh)
        except (OSError, ValueError) as e:
            raise FormatError(f"Cache index {index_path} is unreadable: {e}")
        if index.get('key') != key:
            raise FormatError(f"Cache entry {directory} belongs to another {stage} run")
        for name, digest in index['files'].items():
            path = os.path.join(directory, name)
            if not os.path.exists(path):
                raise FormatError(f"Cached artifact {path} is missing")
            if file_digest(path) != digest:
                raise FormatError(f"Digest mismatch for cached artifact {path}")
        return index['files']

    def prepare(self, stage, key):
        directory = self.directory(stage, key)
        try:
            # leftovers of an interrupted run are never reused
            shutil.rmtree(directory, ignore_errors=True)
            os.makedirs(directory)
        except OSError as e:
            raise IOFailure(f"Cannot create cache directory {directory}: {e}")
        return directory

    def store(self, stage, key):
        """Hash every file a stage wrote and seal the entry with its index"""
        directory = self.directory(stage, key)
        files = {}
        for dirpath, _, filenames in os.walk(directory):
            for filename in filenames:
                path = os.path.join(dirpath, filename)
                name = os.path.relpath(path, directory).replace(os.sep, '/')
                if name != INDEX_FILE:
                    files[name] = file_digest(path)
        files = dict(sorted(files.items()))
        _write_json(os.path.join(directory, INDEX_FILE), {'stage': stage, 'key': key, 'files': files})
        return files


@dataclass
class RunManifest:
    """Where every number of a run came from"""
    config_hash: str
    inputs: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    versions: dict = field(default_factory=dict)
    seeds: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    cached: dict = field(default_factory=dict)

    def add_artifact(self, stage, path, digest):
        self.artifacts[path] = {'stage': stage, 'digest': digest}

    def to_json(self):
        return {
            'version': MANIFEST_VERSION,
            'config_hash': self.config_hash,
            'inputs': self.inputs,
            'artifacts': self.artifacts,
            'versions': self.versions,
            'seeds': self.seeds,
            'timings': self.timings,
            'cached': self.cached,
        }

    @classmethod
    def from_json(cls, json_object):
        if json_object.get('version') != MANIFEST_VERSION:
            raise FormatError(f"Unsupported manifest version {json_object.get('version')}")
        try:
            return cls(json_object['config_hash'], json_object['inputs'], json_object['artifacts'],
                       json_object['versions'], json_object['seeds'], json_object['timings'],
                       json_object['cached'])
        except KeyError as e:
            raise FormatError(f"Manifest lacks {e}")

    def save(self, path):
        _write_json(path, self.to_json())

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding='utf-8') as fh:
                return cls.from_json(json.load(fh))
        except OSError as e:
            raise IOFailure(f"Cannot read manifest {path}: {e}")
        except ValueError as e:
            raise FormatError(f"Manifest {path} is not valid JSON: {e}")


@dataclass
class PipelineResult:
    reports: dict
    risk: object
    manifest: RunManifest
    out_dir: str


def config_hash(settings):
    """Digest of every setting that can change an output; paths and worker counts are left out"""
    json_object = settings.to_json()
    for name in ('out_dir', 'cache_dir', 'workers'):
        json_object['pipeline'].pop(name, None)
    return json_digest(json_object)


class Pipeline:

    def __init__(self, settings, csv_path=None, out_dir=None, cache_dir=None, workers=None):
        self.settings = settings
        self.csv_path = csv_path
        self.out_dir = out_dir or settings.pipeline.out_dir
        self.cache = StageCache(cache_dir or settings.pipeline.resolved_cache_dir())
        self.workers = workers or settings.pipeline.workers
        self.manifest = RunManifest(
            config_hash=config_hash(settings),
            seeds=list(settings.train.seeds),
            versions={
                'eagle': eagle.__version__,
                'numpy': np.__version__,
                'pandas': pd.__version__,
                'graph': SupplyGraph.VERSION,
                'bundle': BUNDLE_VERSION,
                'checkpoint': CHECKPOINT_VERSION,
                'manifest': MANIFEST_VERSION,
            })

    def _publish(self, stage, directory, files, target):
        target_dir = os.path.join(self.out_dir, target)
        for name, digest in files.items():
            destination = os.path.join(target_dir, name)
            try:
                os.makedirs(os.path.dirname(destination), exist_ok=True)
                shutil.copyfile(os.path.join(directory, name), destination)
            except OSError as e:
                raise IOFailure(f"Cannot copy {name} into {target_dir}: {e}")
            self.manifest.add_artifact(stage, f"{target}/{name}", digest)

    def run_stage(self, stage, key_payload, produce, load, target=None):
        """Serve a stage from the cache or run it, then publish its files

        :param key_payload: JSON-serializable digests and configs the stage depends on
        :param produce: callable writing the stage's files into a directory
        :param load: callable reading the stage's result back from that directory
        :param target: subdirectory of the run directory receiving the files
        :return: (result, cache directory, file digests)
        """
        key = json_digest({'stage': stage, **key_payload})
        start = time.time()
        try:
            files = self.cache.lookup(stage, key)
            cached = files is not None
            directory = self.cache.directory(stage, key)
            if cached:
                logger.info(f"Stage {stage}: served from cache ({directory})")
            else:
                logger.info(f"Stage {stage}: running")
                produce(self.cache.prepare(stage, key))
                files = self.cache.store(stage, key)
            result = load(directory)
            self._publish(stage, directory, files, target or stage)
        except EagleError as e:
            e.stage = stage
            logger.error(f"Stage {stage} failed: {e}")
            raise
        self.manifest.timings[stage] = round(time.time() - start, 3)
        self.manifest.cached[stage] = cached
        return result, directory, files

    def _ingest(self):
        schema = self.settings.schema
        if self.csv_path is not None:
            source = {'csv': file_digest(self.csv_path)}
            self.manifest.inputs['csv'] = {'path': os.path.abspath(self.csv_path), 'digest': source['csv']}

            def produce(directory):
                read_orders(self.csv_path, schema).save(directory)
        else:
            seed = self.settings.pipeline.data_seed
            source = {'synthetic': self.settings.synthetic.to_json(), 'seed': seed}
            self.manifest.inputs['synthetic'] = {'digest': json_digest(source)}

            def produce(directory):
                generate_synthetic(self.settings.synthetic, seed).save(directory)

        return self.run_stage('ingest', {'source': source, 'schema': schema.to_json()}, produce, OrderTable.load)

    def _graph(self, table, orders_digest):
        def produce(directory):
            build_graph(table, self.settings.schema).save(os.path.join(directory, 'graph.json'))

        return self.run_stage('graph', {'orders': orders_digest}, produce,
                              lambda directory: SupplyGraph.load(os.path.join(directory, 'graph.json')))

    def _snapshots(self, table, graph, orders_digest, graph_digest):
        config = self.settings.snapshots

        def produce(directory):
            bundle = prepare_bundle(table, graph.index, config)
            save_bundle(bundle, os.path.join(directory, 'bundle.npz'), graph)
            _write_json(os.path.join(directory, 'label_stats.json'), label_stats(bundle))

        return self.run_stage('snapshots', {'orders': orders_digest, 'graph': graph_digest,
                                            'config': config.to_json()}, produce,
                              lambda directory: load_bundle(os.path.join(directory, 'bundle.npz')))

    def _train(self, bundle, graph, variant, upstream):
        ablation = ablation_from_string(variant)
        model_config = self.settings.model.with_ablation(ablation)
        payload = dict(upstream, model=model_config.to_json(), train=self.settings.train.to_json(),
                       precision=self.settings.pipeline.precision)

        def produce(directory):
            run_ablation(bundle, graph, self.settings.model, ablation.value, self.settings.train,
                         workers=self.workers, out_dir=directory)

        return self.run_stage(f"train_{ablation.value}", payload, produce,
                              lambda directory: MetricsReport.load(os.path.join(directory,
                                                                                f"report_{ablation.value}.json")),
                              target=RUNS_DIR)

    def _explain(self, bundle, graph, full_report, full_dir, upstream):
        first = full_report.seed_results[0]
        attribution = Attribution(self.settings.pipeline.attribution)
        payload = dict(upstream, checkpoint=first.checkpoint_digest, attribution=attribution.value)

        def produce(directory):
            checkpoint = Checkpoint.load(os.path.join(full_dir, first.checkpoint_path))
            risk = aggregate_risk(checkpoint, bundle, graph, SplitTag.TEST, attribution)
            for fmt in ExportFormat:
                export_risk(risk, fmt, os.path.join(directory, f"risk.{fmt.value}"))

        return self.run_stage('explain', payload, produce,
                              lambda directory: load_risk(os.path.join(directory, 'risk.json')))

    def run(self):
        """Run every stage and write the combined report and the manifest

        :rtype: PipelineResult
        """
        try:
            os.makedirs(self.out_dir, exist_ok=True)
        except OSError as e:
            raise IOFailure(f"Cannot create run directory {self.out_dir}: {e}")
        settings = self.settings
        logger.info(f"Running the {settings.preset} pipeline into {self.out_dir} (cache {self.cache.root})")

        with precision(settings.pipeline.precision):
            audit = audit_features(settings.schema)
            table, _, orders_files = self._ingest()
            orders_digest = json_digest(orders_files)
            graph, _, graph_files = self._graph(table, orders_digest)
            graph_digest = graph_files['graph.json']
            bundle, _, bundle_files = self._snapshots(table, graph, orders_digest, graph_digest)
            upstream = {'bundle': bundle_files['bundle.npz'], 'graph': graph_digest}

            audit_path = os.path.join(self.out_dir, 'audit.json')
            measure_correlations(audit, bundle).save(audit_path)
            self.manifest.add_artifact('audit', 'audit.json', file_digest(audit_path))

            reports, directories = {}, {}
            for variant in settings.pipeline.variants:
                report, directory, _ = self._train(bundle, graph, variant, upstream)
                reports[report.variant] = report
                directories[report.variant] = directory

            risk, _, _ = self._explain(bundle, graph, reports['full'], directories['full'], upstream)

        report_path = os.path.join(self.out_dir, 'report.json')
        _write_json(report_path, collect_reports(os.path.join(self.out_dir, RUNS_DIR)))
        self.manifest.add_artifact('report', 'report.json', file_digest(report_path))
        self.manifest.save(os.path.join(self.out_dir, 'manifest.json'))

        for report in reports.values():
            logger.info(report.summary())
        logger.info(f"Pipeline finished; manifest at {os.path.join(self.out_dir, 'manifest.json')}")
        return PipelineResult(reports, risk, self.manifest, self.out_dir)


def end_to_end(settings, csv_path=None, out_dir=None, cache_dir=None, workers=None):
    """Full pipeline from a raw CSV, or from generated orders when no CSV is given

    :type settings: Settings
    :rtype: PipelineResult
    """
    return Pipeline(settings, csv_path, out_dir, cache_dir, workers).run()
