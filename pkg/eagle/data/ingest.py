"""
Raw order CSV ingest

Reads only the headers the schema maps, so outcome-encoding columns such as the
delivery status never enter memory. Malformed rows are dropped and counted per
reason; a drop rate above the schema's limit aborts, since silent attrition
would shift split boundaries.
"""

import io
from dataclasses import dataclass

import numpy as np
import pandas as pd

from eagle.data.order import OrderTable, COLUMNS, SHIPPING_MODES, shipping_mode_from_string
from eagle.errors import SchemaError, EmptyInputError, DataError, IOFailure
from eagle.log import get_logger

logger = get_logger('eagle.ingest')

CHUNK_ROWS = 50_000


def _open_source(csv_source):
    if isinstance(csv_source, (bytes, bytearray)):
        return io.BytesIO(csv_source)
    return csv_source


def _convert_chunk(chunk, schema, dropped):
    """Type one chunk of raw string rows, counting the rows that do not parse"""
    headers = schema.columns
    n = len(chunk)
    keep = np.ones(n, dtype=bool)

    def drop(mask, reason):
        newly = mask & keep
        count = int(newly.sum())
        if count:
            dropped[reason] = dropped.get(reason, 0) + count
            keep[newly] = False

    dates = pd.to_datetime(chunk[headers['order_date']].str.strip(), format=schema.date_format, errors='coerce')
    drop(dates.isna().to_numpy(), 'unparseable_date')

    scheduled = pd.to_numeric(chunk[headers['scheduled_days']], errors='coerce')
    real = pd.to_numeric(chunk[headers['real_days']], errors='coerce')
    bad_transit = (scheduled.isna() | real.isna() | (scheduled < 0) | (real < 0)
                   | (scheduled.fillna(0) % 1 != 0) | (real.fillna(0) % 1 != 0))
    drop(bad_transit.to_numpy(), 'invalid_transit_days')

    discount = pd.to_numeric(chunk[headers['discount_rate']], errors='coerce')
    drop((discount.isna() | (discount < 0) | (discount > 1)).to_numpy(), 'invalid_discount')

    modes = chunk[headers['shipping_mode']].map(shipping_mode_from_string)
    drop(modes.isna().to_numpy(), 'unknown_shipping_mode')

    origin = chunk[schema.origin_region_column].str.strip()
    dest = chunk[schema.dest_region_column].str.strip()
    drop(((origin == '') | (dest == '')).to_numpy(), 'missing_region')

    order_id = chunk[headers['order_id']].str.strip()
    drop((order_id == '').to_numpy(), 'missing_order_id')

    frame = pd.DataFrame({
        'order_id': order_id[keep].to_numpy(dtype=object),
        'order_date': dates[keep].dt.floor('D').to_numpy(),
        'origin_region': origin[keep].to_numpy(dtype=object),
        'dest_region': dest[keep].to_numpy(dtype=object),
        'scheduled_days': scheduled[keep].to_numpy().astype(np.int64),
        'real_days': real[keep].to_numpy().astype(np.int64),
        'discount_rate': discount[keep].to_numpy().astype(np.float64),
        'shipping_mode': np.array([m.value for m in modes[keep]], dtype=object),
    })
    return frame


def parse_orders(csv_source, schema):
    """Parse a raw order CSV into a clean OrderTable

    :param csv_source: path, binary stream or raw bytes of the CSV
    :param schema: header mapping and forbidden columns
    :type schema: SchemaConfig
    :return: the order table sorted by (order_day, order_id)
    :rtype: OrderTable
    """
    required = schema.required_headers()
    wanted = set(required)
    try:
        reader = pd.read_csv(_open_source(csv_source), dtype=str, keep_default_na=False,
                             usecols=lambda header: header in wanted, chunksize=CHUNK_ROWS,
                             encoding='utf-8', encoding_errors='replace')
        chunks = []
        raw_rows = 0
        dropped = {}
        for chunk in reader:
            missing = [header for header in required if header not in chunk.columns]
            if missing:
                raise SchemaError(f"Missing required header: {missing[0]!r}")
            raw_rows += len(chunk)
            chunks.append(_convert_chunk(chunk, schema, dropped))
    except pd.errors.EmptyDataError:
        raise EmptyInputError("Order CSV is empty")
    except FileNotFoundError as e:
        raise IOFailure(f"Cannot read order CSV: {e}")
    except ValueError as e:
        # pandas reports usecols/header problems as ValueError
        raise SchemaError(f"Cannot parse order CSV: {e}")

    if not chunks:
        # header row only: check the header the same way
        raise EmptyInputError("Order CSV has no data rows")
    frame = pd.concat(chunks, ignore_index=True)
    if len(frame) == 0:
        raise EmptyInputError(f"No parseable rows among {raw_rows} raw rows")

    dropped_rows = sum(dropped.values())
    drop_rate = dropped_rows / raw_rows
    logger.info(f"Read {raw_rows:,} raw rows, kept {len(frame):,}, dropped {dropped_rows:,} ({drop_rate:.2%})")
    for reason, count in sorted(dropped.items()):
        logger.warning(f"Dropped {count:,} rows: {reason}")
    if drop_rate > schema.max_drop_rate:
        raise DataError(f"Drop rate {drop_rate:.2%} exceeds the limit of {schema.max_drop_rate:.2%}")

    epoch = frame['order_date'].min()
    frame['order_day'] = (frame['order_date'] - epoch).dt.days.astype(np.int64)
    frame['delay_days'] = np.maximum(0, frame['real_days'] - frame['scheduled_days']).astype(np.float64)
    frame = frame[COLUMNS].sort_values(['order_day', 'order_id'], kind='mergesort')
    return OrderTable(frame, epoch.date().isoformat(), raw_rows=raw_rows, dropped=dropped,
                      schema_digest=schema.digest())


def read_orders(path, schema):
    try:
        with open(path, 'rb') as fh:
            return parse_orders(fh, schema)
    except OSError as e:
        raise IOFailure(f"Cannot read order CSV {path}: {e}")


@dataclass
class IngestStats:
    row_count: int
    first_day: int
    last_day: int
    day_span: int
    origin_regions: int
    dest_regions: int
    mode_counts: dict
    delay_quantiles: dict
    delayed_fraction: float

    def to_json(self):
        return {
            'row_count': self.row_count,
            'first_day': self.first_day,
            'last_day': self.last_day,
            'day_span': self.day_span,
            'origin_regions': self.origin_regions,
            'dest_regions': self.dest_regions,
            'mode_counts': self.mode_counts,
            'delay_quantiles': self.delay_quantiles,
            'delayed_fraction': self.delayed_fraction
        }


QUANTILES = (0.5, 0.75, 0.9, 0.99, 1.0)


def ingest_stats(table):
    """Summarize an order table

    :type table: OrderTable
    :rtype: IngestStats
    """
    if len(table) == 0:
        raise EmptyInputError("Cannot summarize an empty order table")
    frame = table.frame
    counts = frame['shipping_mode'].value_counts()
    delays = frame['delay_days'].to_numpy()
    return IngestStats(
        row_count=len(frame),
        first_day=int(frame['order_day'].min()),
        last_day=int(frame['order_day'].max()),
        day_span=table.day_span,
        origin_regions=int(frame['origin_region'].nunique()),
        dest_regions=int(frame['dest_region'].nunique()),
        mode_counts={mode.value: int(counts.get(mode.value, 0)) for mode in SHIPPING_MODES},
        delay_quantiles={str(q): float(np.quantile(delays, q)) for q in QUANTILES},
        delayed_fraction=float((delays > 0).mean()),
    )
