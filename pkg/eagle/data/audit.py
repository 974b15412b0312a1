"""
Feature audit

Every node, edge and label quantity the pipeline computes is declared in a
manifest with its source field and time scope. The audit refuses any manifest
that would let delivery outcomes reach the features.
"""

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from eagle.errors import LeakageError, SchemaError, IOFailure
from eagle.log import get_logger

logger = get_logger('eagle.audit')

CORRELATION_LIMIT = 0.50


class FeatureKind(Enum):
    NODE = 'node'
    EDGE = 'edge'
    LABEL = 'label'


class TimeScope(Enum):
    FEATURE_WINDOW = '[t, t+14)'
    GLOBAL_STATIC = 'global static'
    TRAIN_SPLIT_ONLY = 'train split only'
    LABEL_WINDOW = '[t+14, t+28)'


class LeakageRule(Enum):
    DIRECT_LABEL = 'direct label leakage: outcome-encoding columns are removed'
    CO_DERIVATION = 'co-derivation leakage: columns derived together with the outcome are removed'
    TEMPORAL = 'temporal leakage: features use strict past windows only'


# Fields that encode realized delivery outcomes once an order is delivered
OUTCOME_FIELDS = {'delay_days', 'real_days'}

# Logical names of outcome columns the order table never carries
FORBIDDEN_SOURCES = {
    'delivery_status': LeakageRule.DIRECT_LABEL,
    'late_risk': LeakageRule.CO_DERIVATION,
    'shipping_date': LeakageRule.DIRECT_LABEL,
}


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: FeatureKind
    source: str
    aggregate: str
    scope: TimeScope
    justification: str
    width: int = 1


NODE_FEATURES = [
    FeatureSpec('order_vol', FeatureKind.NODE, 'order_id', 'count(orders)', TimeScope.FEATURE_WINDOW,
                'Feature window only'),
    FeatureSpec('mean_scheduled_transit', FeatureKind.NODE, 'scheduled_days', 'mean(scheduled_days)',
                TimeScope.FEATURE_WINDOW, 'Known at order placement'),
    FeatureSpec('std_scheduled_transit', FeatureKind.NODE, 'scheduled_days', 'std(scheduled_days)',
                TimeScope.FEATURE_WINDOW, 'Known at order placement'),
    FeatureSpec('mean_discount_rate', FeatureKind.NODE, 'discount_rate', 'mean(discount)',
                TimeScope.FEATURE_WINDOW, 'Known at order placement'),
    FeatureSpec('prev_delay_days', FeatureKind.NODE, 'delay_days', 'mean(actual_delay)',
                TimeScope.FEATURE_WINDOW, 'Past-realised outcomes only'),
]

EDGE_FEATURES = [
    FeatureSpec('transit_mean', FeatureKind.EDGE, 'scheduled_days', 'mean(scheduled_days)',
                TimeScope.GLOBAL_STATIC, 'Scheduled (not actual) transit; stable over time'),
    FeatureSpec('transit_std', FeatureKind.EDGE, 'scheduled_days', 'std(scheduled_days)',
                TimeScope.GLOBAL_STATIC, 'Same as above'),
    FeatureSpec('flow_volume', FeatureKind.EDGE, 'order_id', 'count(orders)', TimeScope.GLOBAL_STATIC,
                'Lane-level aggregate, not outcome-related'),
    FeatureSpec('mode_distribution', FeatureKind.EDGE, 'shipping_mode', 'fraction(mode)',
                TimeScope.GLOBAL_STATIC, 'Shipping mode choice, not delivery outcome', width=4),
]

LABELS = [
    FeatureSpec('mu_v', FeatureKind.LABEL, 'delay_days', 'mean(delay_days)', TimeScope.TRAIN_SPLIT_ONLY,
                'Computed exclusively from training data'),
    FeatureSpec('y_class', FeatureKind.LABEL, 'delay_days', '1[d > mu_v]', TimeScope.LABEL_WINDOW,
                'Target variable'),
    FeatureSpec('y_reg', FeatureKind.LABEL, 'delay_days', 'mean(delay_days)', TimeScope.LABEL_WINDOW,
                'Target variable'),
]

DEFAULT_MANIFEST = NODE_FEATURES + EDGE_FEATURES + LABELS


class AuditReport:

    def __init__(self, rows, dropped_columns, max_abs_correlation=None, correlations=None):
        self.rows = rows
        self.dropped_columns = list(dropped_columns)
        self.max_abs_correlation = max_abs_correlation
        self.correlations = dict(correlations or {})

    @property
    def passed(self):
        return all(not row['future_info'] for row in self.rows if row['type'] != FeatureKind.LABEL.value)

    def to_json(self):
        return {
            'rows': self.rows,
            'dropped_columns': self.dropped_columns,
            'max_abs_correlation': self.max_abs_correlation,
            'correlations': self.correlations,
            'passed': self.passed
        }

    @classmethod
    def from_json(cls, json_object):
        return cls(json_object['rows'], json_object['dropped_columns'],
                   json_object.get('max_abs_correlation'), json_object.get('correlations'))

    def save(self, path):
        try:
            with open(path, 'w', encoding='utf-8') as fh:
                json.dump(self.to_json(), fh, indent=2, sort_keys=True)
        except OSError as e:
            raise IOFailure(f"Cannot write audit report {path}: {e}")


def _rule_for_column(header, schema):
    if header == schema.late_risk_column:
        return LeakageRule.CO_DERIVATION
    return LeakageRule.DIRECT_LABEL


def audit_features(schema, feature_manifest=None):
    """Check a feature manifest against the leakage rules

    :param schema: supplies the forbidden columns and the field-to-header map
    :type schema: SchemaConfig
    :param feature_manifest: every node, edge and label quantity the pipeline computes
    :type feature_manifest: list of FeatureSpec
    :return: one row per feature, all with the future-info flag false
    :rtype: AuditReport
    :raises LeakageError: on the first feature violating a rule
    """
    if feature_manifest is None:
        feature_manifest = DEFAULT_MANIFEST
    forbidden = set(schema.forbidden_columns)
    rows = []
    seen = set()
    for spec in feature_manifest:
        if spec.name in seen:
            raise SchemaError(f"Feature {spec.name!r} declared twice in the manifest")
        seen.add(spec.name)

        header = schema.header_for(spec.source)
        source_column = header if header is not None else spec.source
        if spec.source in FORBIDDEN_SOURCES:
            rule = FORBIDDEN_SOURCES[spec.source]
            raise LeakageError(f"Feature {spec.name!r} reads outcome field {spec.source!r} ({rule.value})",
                               column=source_column, rule=rule)
        if source_column in forbidden:
            rule = _rule_for_column(source_column, schema)
            raise LeakageError(f"Feature {spec.name!r} reads forbidden column {source_column!r} ({rule.value})",
                               column=source_column, rule=rule)

        if spec.kind != FeatureKind.LABEL:
            if spec.scope == TimeScope.LABEL_WINDOW:
                raise LeakageError(f"Feature {spec.name!r} is scoped to the label window ({LeakageRule.TEMPORAL.value})",
                                   column=source_column, rule=LeakageRule.TEMPORAL)
            if spec.source in OUTCOME_FIELDS and spec.scope != TimeScope.FEATURE_WINDOW:
                raise LeakageError(f"Feature {spec.name!r} aggregates realized outcomes outside the feature window "
                                   f"({LeakageRule.TEMPORAL.value})",
                                   column=source_column, rule=LeakageRule.TEMPORAL)

        rows.append({
            'name': spec.name,
            'type': spec.kind.value,
            'source': spec.aggregate,
            'source_column': source_column,
            'time_scope': spec.scope.value,
            'future_info': False,
            'justification': spec.justification,
            'width': spec.width
        })
    logger.info(f"Feature audit passed for {len(rows)} manifest entries")
    return AuditReport(rows, sorted(forbidden))


def measure_correlations(report, bundle):
    """Record each node feature's correlation with the train labels

    Correlates every feature's window mean with y_class over the train
    node-windows and stores the largest absolute value on the report.
    """
    train = bundle.train
    if not train:
        return report
    features = np.stack([s.node_features for s in train]).mean(axis=2)  # (S, N, d)
    labels = np.stack([s.y_class for s in train]).astype(np.float64).reshape(-1)
    correlations = {}
    for i, spec in enumerate(NODE_FEATURES):
        column = features[:, :, i].reshape(-1)
        if column.std() == 0 or labels.std() == 0:
            continue
        correlations[spec.name] = float(np.corrcoef(column, labels)[0, 1])
    report.correlations = correlations
    report.max_abs_correlation = max((abs(r) for r in correlations.values()), default=None)
    if report.max_abs_correlation is not None:
        if report.max_abs_correlation >= CORRELATION_LIMIT:
            logger.warning(f"Max |feature/label correlation| {report.max_abs_correlation:.3f} "
                           f"reaches the {CORRELATION_LIMIT} limit")
        else:
            logger.info(f"Max |feature/label correlation| {report.max_abs_correlation:.3f}")
    return report
