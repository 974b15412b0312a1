import hashlib
import json
from dataclasses import dataclass, field, asdict

from eagle.errors import ConfigError

# Logical fields every raw order file must provide
REQUIRED_FIELDS = ['order_id', 'order_date', 'scheduled_days', 'real_days', 'discount_rate', 'shipping_mode']

DATACO_COLUMNS = {
    'order_id': 'Order Id',
    'order_date': 'order date (DateOrders)',
    'scheduled_days': 'Days for shipment (scheduled)',
    'real_days': 'Days for shipping (real)',
    'discount_rate': 'Order Item Discount Rate',
    'shipping_mode': 'Shipping Mode',
}


@dataclass
class SchemaConfig:
    """Where each logical order field lives in the raw CSV, and what must never become a feature"""
    columns: dict = field(default_factory=lambda: dict(DATACO_COLUMNS))
    origin_region_column: str = 'Market'
    dest_region_column: str = 'Order Region'
    delivery_status_column: str = 'Delivery Status'
    late_risk_column: str = 'Late_delivery_risk'
    forbidden_columns: list = field(default_factory=lambda: [
        'Delivery Status',
        'Days for shipping (real)',
        'Late_delivery_risk',
        'shipping date (DateOrders)',
    ])
    date_format: str = '%m/%d/%Y %H:%M'
    max_drop_rate: float = 0.01

    def __post_init__(self):
        missing = [name for name in REQUIRED_FIELDS if name not in self.columns]
        if missing:
            raise ConfigError(f"schema column map lacks logical fields: {missing}")
        if not self.forbidden_columns:
            raise ConfigError("schema forbidden_columns must not be empty")
        for required in (self.delivery_status_column, self.columns['real_days'], self.late_risk_column):
            if required not in self.forbidden_columns:
                raise ConfigError(f"schema forbidden_columns must include {required!r}")
        if not 0 <= self.max_drop_rate <= 1:
            raise ConfigError(f"max_drop_rate must be in [0, 1], got {self.max_drop_rate}")

    def header_for(self, logical_field):
        """The raw CSV header holding a logical field, or None if it is derived"""
        if logical_field == 'origin_region':
            return self.origin_region_column
        if logical_field == 'dest_region':
            return self.dest_region_column
        if logical_field == 'delivery_status':
            return self.delivery_status_column
        if logical_field == 'late_risk':
            return self.late_risk_column
        return self.columns.get(logical_field)

    def required_headers(self):
        headers = [self.columns[name] for name in REQUIRED_FIELDS]
        for header in (self.origin_region_column, self.dest_region_column):
            if header not in headers:
                headers.append(header)
        return headers

    def to_json(self):
        return asdict(self)

    @classmethod
    def from_json(cls, json_object):
        try:
            return cls(**json_object)
        except TypeError as e:
            raise ConfigError(f"invalid schema config: {e}")

    def digest(self):
        payload = json.dumps(self.to_json(), sort_keys=True).encode('utf-8')
        return hashlib.sha256(payload).hexdigest()
