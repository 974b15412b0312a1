"""
Synthetic order streams

Hubs ship to destination regions over a full bipartite lane set. Daily volume
follows a weekly cycle; each hub's delay propensity drifts slowly on its own
sinusoid, scaled by its entry in the hub risk map.
"""

from dataclasses import dataclass, field, asdict
from datetime import date, timedelta

import numpy as np
import pandas as pd

from eagle.data.order import OrderTable, COLUMNS, SHIPPING_MODES, ShippingMode
from eagle.data.schema import SchemaConfig
from eagle.errors import ConfigError, IOFailure
from eagle.log import get_logger

logger = get_logger('eagle.synthetic')

EPOCH = date(2015, 1, 1)
MIN_DAYS = 28

SCHEDULED_DAYS = {
    ShippingMode.STANDARD_CLASS: 4,
    ShippingMode.SECOND_CLASS: 2,
    ShippingMode.FIRST_CLASS: 1,
    ShippingMode.SAME_DAY: 0,
}
MODE_PROBABILITIES = [0.60, 0.20, 0.15, 0.05]
DISCOUNT_RATES = np.array([0.0, 0.01, 0.05, 0.1, 0.15, 0.2, 0.25])


@dataclass
class SyntheticConfig:
    n_regions: int = 5
    n_hubs: int = 5
    n_days: int = 120
    base_delay_rate: float = 0.1
    seasonal_amplitude: float = 0.3
    hub_risk_map: dict = field(default_factory=dict)
    orders_per_day: float = 40.0

    def __post_init__(self):
        if self.n_regions < 1 or self.n_hubs < 1:
            raise ConfigError(f"synthetic needs at least one hub and one region, got "
                              f"n_hubs={self.n_hubs}, n_regions={self.n_regions}")
        if self.n_days < MIN_DAYS:
            raise ConfigError(f"synthetic.n_days must be at least {MIN_DAYS}, got {self.n_days}")
        if not 0 <= self.base_delay_rate <= 1:
            raise ConfigError(f"synthetic.base_delay_rate must be in [0, 1], got {self.base_delay_rate}")
        if not 0 <= self.seasonal_amplitude < 1:
            raise ConfigError(f"synthetic.seasonal_amplitude must be in [0, 1), got {self.seasonal_amplitude}")
        if self.orders_per_day <= 0:
            raise ConfigError(f"synthetic.orders_per_day must be positive, got {self.orders_per_day}")
        hubs = set(self.hub_names())
        for hub, risk in self.hub_risk_map.items():
            if hub not in hubs:
                raise ConfigError(f"synthetic.hub_risk_map names unknown hub {hub!r}")
            if risk < 0:
                raise ConfigError(f"synthetic.hub_risk_map[{hub!r}] must be non-negative, got {risk}")

    def hub_names(self):
        return [f"HUB-{i:02d}" for i in range(self.n_hubs)]

    def region_names(self):
        return [f"REGION-{i:02d}" for i in range(self.n_regions)]

    def to_json(self):
        return asdict(self)

    @classmethod
    def from_json(cls, json_object):
        try:
            return cls(**json_object)
        except TypeError as e:
            raise ConfigError(f"invalid synthetic config: {e}")


def generate_synthetic(config, seed):
    """Generate a deterministic order table for the given seed

    :type config: SyntheticConfig
    :type seed: int
    :rtype: OrderTable
    """
    rng = np.random.default_rng(seed)
    hubs = config.hub_names()
    regions = config.region_names()
    days = np.arange(config.n_days)

    weekly = 1.0 + config.seasonal_amplitude * np.sin(2 * np.pi * (days % 7) / 7)
    volume = rng.poisson(config.orders_per_day * weekly)
    # every hub and region appears on day 0 so the epoch and node set are fixed
    coverage = max(len(hubs), len(regions))
    day = np.concatenate([np.zeros(coverage, dtype=np.int64), np.repeat(days, volume)])
    n = len(day)
    hub = np.concatenate([np.arange(coverage) % len(hubs), rng.integers(0, len(hubs), n - coverage)])
    region = np.concatenate([np.arange(coverage) % len(regions), rng.integers(0, len(regions), n - coverage)])

    mode = rng.choice(len(SHIPPING_MODES), size=n, p=MODE_PROBABILITIES)
    scheduled = np.array([SCHEDULED_DAYS[m] for m in SHIPPING_MODES], dtype=np.int64)[mode]

    period = rng.uniform(60.0, 120.0, size=len(hubs))
    phase = rng.uniform(0.0, 2 * np.pi, size=len(hubs))
    risk = np.array([config.hub_risk_map.get(h, 1.0) for h in hubs], dtype=np.float64)
    drift = 1.0 + 0.5 * np.sin(2 * np.pi * day / period[hub] + phase[hub])
    propensity = np.clip(config.base_delay_rate * risk[hub] * drift, 0.0, 1.0)
    delayed = rng.random(n) < propensity
    delay = np.where(delayed, 1 + rng.poisson(1.0, size=n), 0)
    early = (~delayed) & (scheduled > 0) & (rng.random(n) < 0.2)
    real = scheduled + delay - early.astype(np.int64)

    frame = pd.DataFrame({
        'order_id': np.array([str(i + 1) for i in range(n)], dtype=object),
        'order_day': day.astype(np.int64),
        'origin_region': np.array(hubs, dtype=object)[hub],
        'dest_region': np.array(regions, dtype=object)[region],
        'scheduled_days': scheduled,
        'real_days': real.astype(np.int64),
        'discount_rate': rng.choice(DISCOUNT_RATES, size=n),
        'shipping_mode': np.array([m.value for m in SHIPPING_MODES], dtype=object)[mode],
    })
    frame['delay_days'] = np.maximum(0, frame['real_days'] - frame['scheduled_days']).astype(np.float64)
    frame = frame[COLUMNS].sort_values(['order_day', 'order_id'], kind='mergesort')
    logger.info(f"Generated {n:,} synthetic orders over {config.n_days} days "
                f"({len(hubs)} hubs, {len(regions)} regions, seed={seed})")
    return OrderTable(frame, EPOCH.isoformat(), raw_rows=n)


def _delivery_status(real, scheduled):
    return np.where(real > scheduled, 'Late delivery',
                    np.where(real < scheduled, 'Advance shipping', 'Shipping on time'))


def write_synthetic_csv(table, path, schema=None):
    """Write an order table in the raw CSV layout the schema describes

    Outcome columns (delivery status, late-risk flag, shipping date) are
    included so ingest has something to exclude.
    """
    schema = schema or SchemaConfig()
    frame = table.frame
    epoch = date.fromisoformat(table.epoch)
    order_dates = pd.to_datetime([epoch + timedelta(days=int(d)) for d in frame['order_day']])
    shipping_dates = order_dates + pd.to_timedelta(frame['real_days'].to_numpy(), unit='D')
    real = frame['real_days'].to_numpy()
    scheduled = frame['scheduled_days'].to_numpy()
    columns = schema.columns
    raw = pd.DataFrame({
        columns['order_id']: frame['order_id'].to_numpy(),
        columns['order_date']: order_dates.strftime(schema.date_format),
        schema.origin_region_column: frame['origin_region'].to_numpy(),
        schema.dest_region_column: frame['dest_region'].to_numpy(),
        columns['scheduled_days']: scheduled,
        columns['real_days']: real,
        columns['discount_rate']: frame['discount_rate'].to_numpy(),
        columns['shipping_mode']: frame['shipping_mode'].to_numpy(),
        schema.delivery_status_column: _delivery_status(real, scheduled),
        schema.late_risk_column: (real > scheduled).astype(np.int64),
        'shipping date (DateOrders)': shipping_dates.strftime(schema.date_format),
    })
    try:
        raw.to_csv(path, index=False)
    except OSError as e:
        raise IOFailure(f"Cannot write synthetic CSV {path}: {e}")
    logger.info(f"Wrote {len(raw):,} synthetic rows to {path}")
    return path
