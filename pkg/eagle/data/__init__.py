from eagle.data.order import OrderRecord, OrderTable, ShippingMode
from eagle.data.schema import SchemaConfig
from eagle.data.ingest import parse_orders, read_orders, ingest_stats
from eagle.data.audit import audit_features, measure_correlations, AuditReport, FeatureSpec
from eagle.data.graph import SupplyGraph, NodeIndex, EdgeList, NodeRole, build_graph, build_node_index, \
    build_edges, compute_edge_features
from eagle.data.snapshots import Snapshot, SplitBundle, SplitTag, SnapshotConfig, build_snapshots, \
    chronological_split, compute_baselines, assign_labels, standardize, prepare_bundle, save_bundle, load_bundle, \
    load_bundle_graph
from eagle.data.synthetic import SyntheticConfig, generate_synthetic, write_synthetic_csv
