import pytest

from eagle.data import OrderTable, SchemaConfig, audit_features, ingest_stats, parse_orders, read_orders, \
    write_synthetic_csv
from eagle.data.audit import FeatureKind, FeatureSpec, LeakageRule, TimeScope
from eagle.errors import ConfigError, DataError, EmptyInputError, IOFailure, LeakageError, SchemaError

HEADER = ('Order Id,order date (DateOrders),Days for shipment (scheduled),Days for shipping (real),'
          'Order Item Discount Rate,Shipping Mode,Market,Order Region,Delivery Status,Late_delivery_risk\n')


def _csv(*rows):
    return (HEADER + ''.join(row + '\n' for row in rows)).encode('utf-8')


def test_parse_orders_derives_days_and_delay():
    data = _csv('2,1/2/2017 09:30,4,3,0.0,Second Class,Europe,Western Europe,Advance shipping,0',
                '1,1/1/2017 10:00,2,4,0.1,Standard Class,LATAM,Caribbean,Late delivery,1')
    table = parse_orders(data, SchemaConfig())

    assert len(table) == 2
    assert table.epoch == '2017-01-01'
    first, second = list(table.records())
    assert (first.order_id, first.order_day, first.delay_days) == ('1', 0, 2.0)
    assert (second.order_id, second.order_day, second.delay_days) == ('2', 1, 0.0)
    assert second.origin_region == 'Europe' and second.dest_region == 'Western Europe'


def test_forbidden_columns_never_reach_the_table():
    table = parse_orders(_csv('1,1/1/2017 10:00,2,4,0.1,Standard Class,LATAM,Caribbean,Late delivery,1'),
                         SchemaConfig())
    assert 'Delivery Status' not in table.frame.columns
    assert 'Late_delivery_risk' not in table.frame.columns


def test_unparseable_rows_are_counted():
    data = _csv('1,1/1/2017 10:00,2,4,0.1,Standard Class,LATAM,Caribbean,Late delivery,1',
                '2,not a date,2,4,0.1,Standard Class,LATAM,Caribbean,Late delivery,1',
                '3,1/3/2017 10:00,2,2,0.1,Teleport,LATAM,Caribbean,Shipping on time,0')
    table = parse_orders(data, SchemaConfig(max_drop_rate=0.9))
    assert len(table) == 1
    assert table.dropped == {'unparseable_date': 1, 'unknown_shipping_mode': 1}


def test_drop_rate_above_limit_fails():
    data = _csv('1,1/1/2017 10:00,2,4,0.1,Standard Class,LATAM,Caribbean,Late delivery,1',
                '2,not a date,2,4,0.1,Standard Class,LATAM,Caribbean,Late delivery,1')
    with pytest.raises(DataError):
        parse_orders(data, SchemaConfig())


def test_missing_header_is_a_schema_error():
    data = b'Order Id,Shipping Mode\n1,Standard Class\n'
    with pytest.raises(SchemaError, match='Missing required header'):
        parse_orders(data, SchemaConfig())


@pytest.mark.parametrize('data', [b'', HEADER.encode('utf-8')])
def test_empty_input(data):
    with pytest.raises(EmptyInputError):
        parse_orders(data, SchemaConfig())


def test_missing_file_is_an_io_failure(tmp_path):
    with pytest.raises(IOFailure):
        read_orders(str(tmp_path / 'absent.csv'), SchemaConfig())


def test_schema_must_forbid_outcome_columns():
    with pytest.raises(ConfigError):
        SchemaConfig(forbidden_columns=['Delivery Status'])


def test_synthetic_csv_round_trips_through_ingest(tmp_path, synthetic_table):
    path = write_synthetic_csv(synthetic_table, str(tmp_path / 'orders.csv'))
    table = read_orders(path, SchemaConfig())

    assert len(table) == len(synthetic_table)
    assert table.dropped_rows == 0
    assert table.frame['delay_days'].sum() == pytest.approx(synthetic_table.frame['delay_days'].sum())


def test_order_table_save_and_load(tmp_path, synthetic_table):
    synthetic_table.save(str(tmp_path / 'orders'))
    loaded = OrderTable.load(str(tmp_path / 'orders'))
    assert loaded.equals(synthetic_table)


def test_ingest_stats(toy_table):
    stats = ingest_stats(toy_table)
    assert stats.row_count == 4
    assert stats.day_span == 3
    assert stats.origin_regions == 2 and stats.dest_regions == 2
    assert stats.mode_counts == {'Standard Class': 1, 'Second Class': 1, 'First Class': 1, 'Same Day': 1}
    assert stats.delayed_fraction == pytest.approx(0.5)


def test_default_manifest_passes_the_audit():
    report = audit_features(SchemaConfig())
    assert report.passed
    assert len(report.rows) == 12
    assert not any(row['future_info'] for row in report.rows)
    prev_delay = next(row for row in report.rows if row['name'] == 'prev_delay_days')
    assert prev_delay['justification'] == 'Past-realised outcomes only'


def test_empty_manifest_passes():
    report = audit_features(SchemaConfig(), [])
    assert report.rows == [] and report.passed


@pytest.mark.parametrize('source,rule', [
    ('Delivery Status', LeakageRule.DIRECT_LABEL),
    ('real_days', LeakageRule.DIRECT_LABEL),
    ('Late_delivery_risk', LeakageRule.CO_DERIVATION),
    ('delivery_status', LeakageRule.DIRECT_LABEL),
    ('late_risk', LeakageRule.CO_DERIVATION),
    ('shipping_date', LeakageRule.DIRECT_LABEL),
])
def test_forbidden_sources_are_rejected(source, rule):
    spec = FeatureSpec('suspicious', FeatureKind.NODE, source, 'mean', TimeScope.FEATURE_WINDOW, '')
    with pytest.raises(LeakageError) as excinfo:
        audit_features(SchemaConfig(), [spec])
    assert excinfo.value.rule == rule
    assert excinfo.value.column == (SchemaConfig().header_for(source) or source)


def test_realized_delay_edge_statistic_is_temporal_leakage():
    spec = FeatureSpec('lane_delay', FeatureKind.EDGE, 'delay_days', 'mean(delay_days)', TimeScope.GLOBAL_STATIC, '')
    with pytest.raises(LeakageError) as excinfo:
        audit_features(SchemaConfig(), [spec])
    assert excinfo.value.rule == LeakageRule.TEMPORAL


def test_label_window_feature_is_temporal_leakage():
    spec = FeatureSpec('future_volume', FeatureKind.NODE, 'order_id', 'count', TimeScope.LABEL_WINDOW, '')
    with pytest.raises(LeakageError):
        audit_features(SchemaConfig(), [spec])


def test_outcome_field_names_resolve_to_their_headers():
    schema = SchemaConfig()
    assert schema.header_for('delivery_status') == 'Delivery Status'
    assert schema.header_for('late_risk') == 'Late_delivery_risk'
