"""
INI configuration

Each section fills one config dataclass; keys are the dataclass field names.
Tuples are comma-separated, the synthetic hub risk map is written as
'HUB-00: 3.0, HUB-01: 1.5', and schema column headers use 'column.<field>'
keys. Unknown sections and keys are rejected.
"""

import configparser
import dataclasses
import os
from dataclasses import dataclass, field

from eagle.data.schema import SchemaConfig
from eagle.data.snapshots import SnapshotConfig
from eagle.data.synthetic import SyntheticConfig
from eagle.errors import ConfigError, IOFailure
from eagle.model import ModelConfig
from eagle.training import TrainConfig

CACHE_ENV = 'EAGLE_CACHE_DIR'
DEFAULT_CACHE_DIR = '.eagle_cache'
PRESETS = ('paper', 'synthetic')


@dataclass
class PipelineConfig:
    out_dir: str = 'eagle_runs'
    cache_dir: str = None
    workers: int = 1
    precision: int = 32
    variants: tuple = ('full', 'A1', 'A2', 'A3')
    attribution: str = 'receiver'
    data_seed: int = 0

    def __post_init__(self):
        self.variants = tuple(self.variants)
        if self.workers < 1:
            raise ConfigError(f"pipeline.workers must be at least 1, got {self.workers}")
        if self.precision not in (32, 64):
            raise ConfigError(f"pipeline.precision must be 32 or 64, got {self.precision}")
        if self.attribution not in ('receiver', 'sender'):
            raise ConfigError(f"pipeline.attribution must be receiver or sender, got {self.attribution!r}")
        if 'full' not in self.variants:
            raise ConfigError("pipeline.variants must include full")

    def resolved_cache_dir(self):
        return self.cache_dir or os.environ.get(CACHE_ENV) or DEFAULT_CACHE_DIR

    def to_json(self):
        json_object = dataclasses.asdict(self)
        json_object['variants'] = list(self.variants)
        return json_object


@dataclass
class Settings:
    schema: SchemaConfig = field(default_factory=SchemaConfig)
    snapshots: SnapshotConfig = field(default_factory=SnapshotConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    preset: str = 'paper'

    def to_json(self):
        return {
            'preset': self.preset,
            'schema': self.schema.to_json(),
            'snapshots': self.snapshots.to_json(),
            'model': self.model.to_json(),
            'train': self.train.to_json(),
            'synthetic': self.synthetic.to_json(),
            'pipeline': self.pipeline.to_json(),
        }


def preset_settings(preset='paper'):
    """Defaults for the full experiment ('paper') or a fast run on generated data ('synthetic')"""
    if preset == 'paper':
        return Settings(preset='paper')
    if preset == 'synthetic':
        return Settings(
            model=ModelConfig(d_model=16, gat_heads=2, head_hidden=16),
            train=TrainConfig(lr=3e-3, lr_min=1e-4, epochs=8, early_stop_patience=4, seeds=(0, 1)),
            synthetic=SyntheticConfig(n_regions=5, n_hubs=5, n_days=120, base_delay_rate=0.15,
                                      hub_risk_map={'HUB-00': 3.0}),
            pipeline=PipelineConfig(variants=('full', 'A3')),
            preset='synthetic',
        )
    raise ConfigError(f"Unknown preset {preset!r}; expected one of {PRESETS}")


def _parse_value(raw, default, name):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            return raw.lower() in ('1', 'true', 'yes', 'on')
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, (tuple, list)):
            items = [item.strip() for item in raw.split(',') if item.strip()]
            if default and isinstance(default[0], int):
                return tuple(int(item) for item in items)
            if default and isinstance(default[0], float):
                return tuple(float(item) for item in items)
            return tuple(items)
        if isinstance(default, dict):
            pairs = [item.split(':', 1) for item in raw.split(',') if item.strip()]
            return {key.strip(): float(value) for key, value in pairs}
    except ValueError:
        raise ConfigError(f"Cannot parse {name} = {raw!r}")
    if raw.lower() in ('', 'none'):
        return None
    return raw


def _section_values(parser, section, config_cls):
    fields = {f.name: f for f in dataclasses.fields(config_cls)}
    defaults = config_cls()
    values = {}
    columns = {}
    for key, raw in parser.items(section):
        if config_cls is SchemaConfig and key.startswith('column.'):
            columns[key[len('column.'):]] = raw.strip()
            continue
        if key not in fields:
            raise ConfigError(f"Unknown key [{section}] {key}")
        default = getattr(defaults, key)
        if key == 'hub_risk_map':
            default = {}
        if key == 'forbidden_columns':
            default = ('',)
        if key == 'split_sizes':
            default = (0,)
        values[key] = _parse_value(raw, default, f"[{section}] {key}")
    if columns:
        merged = dict(defaults.columns)
        merged.update(columns)
        values['columns'] = merged
    if 'forbidden_columns' in values:
        values['forbidden_columns'] = list(values['forbidden_columns'])
    return values


_SECTIONS = {
    'schema': SchemaConfig,
    'snapshots': SnapshotConfig,
    'model': ModelConfig,
    'train': TrainConfig,
    'synthetic': SyntheticConfig,
    'pipeline': PipelineConfig,
}


def load_settings(path=None, preset='paper'):
    """Preset defaults overridden by an INI file

    :param path: INI file, or None for the preset alone
    :param preset: 'paper' or 'synthetic'
    :rtype: Settings
    """
    settings = preset_settings(preset)
    if path is None:
        return settings
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding='utf-8') as fh:
            parser.read_file(fh)
    except OSError as e:
        raise IOFailure(f"Cannot read config {path}: {e}")
    except configparser.Error as e:
        raise ConfigError(f"Malformed config {path}: {e}")

    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"Unknown config section [{section}] in {path}")
        current = getattr(settings, section)
        overrides = _section_values(parser, section, _SECTIONS[section])
        setattr(settings, section, dataclasses.replace(current, **overrides))
    return settings
