import json
import os
from dataclasses import dataclass
from enum import Enum

import numpy as np
import pandas as pd

from eagle.errors import SchemaError, FormatError, IOFailure


class ShippingMode(Enum):
    STANDARD_CLASS = "Standard Class"
    SECOND_CLASS = "Second Class"
    FIRST_CLASS = "First Class"
    SAME_DAY = "Same Day"


# Column order of the mode fractions in edge features
SHIPPING_MODES = list(ShippingMode)

_MODE_MAP = {mode.value: mode for mode in ShippingMode}
_MODE_MAP.update({mode.name: mode for mode in ShippingMode})


def shipping_mode_from_string(mode_str):
    """Convert a raw shipping mode string to ShippingMode, or None when unknown"""
    if mode_str is None:
        return None
    return _MODE_MAP.get(mode_str.strip())


@dataclass(frozen=True)
class OrderRecord:
    order_id: str
    order_day: int
    origin_region: str
    dest_region: str
    scheduled_days: int
    real_days: int
    discount_rate: float
    shipping_mode: ShippingMode
    delay_days: float

    @classmethod
    def create(cls, order_id, order_day, origin_region, dest_region, scheduled_days, real_days,
               discount_rate, shipping_mode):
        """Build a record, deriving delay_days from the transit days"""
        if isinstance(shipping_mode, str):
            mode = shipping_mode_from_string(shipping_mode)
            if mode is None:
                raise SchemaError(f"Unknown shipping mode: {shipping_mode!r}")
            shipping_mode = mode
        return cls(str(order_id), int(order_day), origin_region, dest_region, int(scheduled_days),
                   int(real_days), float(discount_rate), shipping_mode,
                   float(max(0, int(real_days) - int(scheduled_days))))

    def to_json(self):
        return {
            'order_id': self.order_id,
            'order_day': self.order_day,
            'origin_region': self.origin_region,
            'dest_region': self.dest_region,
            'scheduled_days': self.scheduled_days,
            'real_days': self.real_days,
            'discount_rate': self.discount_rate,
            'shipping_mode': self.shipping_mode.value,
            'delay_days': self.delay_days
        }


COLUMNS = ['order_id', 'order_day', 'origin_region', 'dest_region', 'scheduled_days', 'real_days',
           'discount_rate', 'shipping_mode', 'delay_days']

_STRING_COLUMNS = ['order_id', 'origin_region', 'dest_region', 'shipping_mode']


class OrderTable:
    """The cleaned, typed order table, sorted by (order_day, order_id)

    Treated as immutable once built; the underlying frame must not be mutated.
    """

    TABLE_FILE = 'orders.csv'
    META_FILE = 'orders.json'

    def __init__(self, frame, epoch, raw_rows=None, dropped=None, schema_digest=None):
        missing = [c for c in COLUMNS if c not in frame.columns]
        if missing:
            raise SchemaError(f"Order table is missing columns: {missing}")
        self.frame = frame[COLUMNS].reset_index(drop=True)
        self.epoch = epoch
        self.raw_rows = len(frame) if raw_rows is None else raw_rows
        self.dropped = dict(dropped or {})
        self.schema_digest = schema_digest

    @classmethod
    def from_records(cls, records, epoch="1970-01-01", raw_rows=None, dropped=None):
        rows = [record.to_json() for record in records]
        frame = pd.DataFrame(rows, columns=COLUMNS)
        frame = _typed(frame)
        frame = frame.sort_values(['order_day', 'order_id'], kind='mergesort')
        return cls(frame, epoch, raw_rows=raw_rows, dropped=dropped)

    def __len__(self):
        return len(self.frame)

    @property
    def dropped_rows(self):
        return sum(self.dropped.values())

    @property
    def num_days(self):
        """Days from the epoch to the last order, inclusive"""
        if len(self.frame) == 0:
            return 0
        return int(self.frame['order_day'].max()) + 1

    @property
    def day_span(self):
        if len(self.frame) == 0:
            return 0
        return int(self.frame['order_day'].max() - self.frame['order_day'].min()) + 1

    def records(self):
        for row in self.frame.itertuples(index=False):
            yield OrderRecord(row.order_id, int(row.order_day), row.origin_region, row.dest_region,
                              int(row.scheduled_days), int(row.real_days), float(row.discount_rate),
                              ShippingMode(row.shipping_mode), float(row.delay_days))

    def equals(self, other):
        return self.epoch == other.epoch and self.frame.equals(other.frame)

    def with_frame(self, frame):
        """A new table over a modified frame, re-deriving delay_days"""
        frame = frame.copy()
        frame['delay_days'] = np.maximum(0, frame['real_days'] - frame['scheduled_days']).astype(np.float64)
        frame = frame.sort_values(['order_day', 'order_id'], kind='mergesort')
        return OrderTable(frame, self.epoch, self.raw_rows, self.dropped, self.schema_digest)

    def meta_json(self):
        return {
            'epoch': self.epoch,
            'raw_rows': self.raw_rows,
            'dropped': self.dropped,
            'rows': len(self.frame),
            'schema_digest': self.schema_digest
        }

    def save(self, directory):
        """Write the table as CSV plus a JSON sidecar"""
        try:
            os.makedirs(directory, exist_ok=True)
            self.frame.to_csv(os.path.join(directory, self.TABLE_FILE), index=False)
            with open(os.path.join(directory, self.META_FILE), 'w', encoding='utf-8') as fh:
                json.dump(self.meta_json(), fh, indent=2, sort_keys=True)
        except OSError as e:
            raise IOFailure(f"Cannot write order table to {directory}: {e}")

    @classmethod
    def load(cls, directory):
        table_path = os.path.join(directory, cls.TABLE_FILE)
        meta_path = os.path.join(directory, cls.META_FILE)
        if not os.path.exists(table_path) or not os.path.exists(meta_path):
            raise IOFailure(f"No order table found in {directory}")
        try:
            with open(meta_path, encoding='utf-8') as fh:
                meta = json.load(fh)
            frame = pd.read_csv(table_path, dtype={c: str for c in _STRING_COLUMNS},
                                keep_default_na=False, float_precision='round_trip')
            frame = _typed(frame)
        except (ValueError, KeyError) as e:
            raise FormatError(f"Corrupted order table in {directory}: {e}")
        if len(frame) != meta.get('rows'):
            raise FormatError(f"Order table in {directory} has {len(frame)} rows, sidecar says {meta.get('rows')}")
        return cls(frame, meta['epoch'], meta.get('raw_rows'), meta.get('dropped'), meta.get('schema_digest'))


def _typed(frame):
    frame = frame.copy()
    for column in _STRING_COLUMNS:
        frame[column] = frame[column].astype(object)
    for column in ['order_day', 'scheduled_days', 'real_days']:
        frame[column] = frame[column].astype(np.int64)
    for column in ['discount_rate', 'delay_days']:
        frame[column] = frame[column].astype(np.float64)
    return frame
