from dataclasses import dataclass, asdict, replace
from enum import Enum

from eagle.errors import ConfigError


class Ablation(Enum):
    FULL = 'full'
    A1_NO_TEMPORAL = 'A1'
    A2_NO_EDGE = 'A2'
    A3_SINGLE_TASK = 'A3'
    STATIC_GAT = 'static_gat'

    @property
    def uses_temporal_encoder(self):
        return self not in (Ablation.A1_NO_TEMPORAL, Ablation.STATIC_GAT)

    @property
    def uses_edge_features(self):
        return self not in (Ablation.A2_NO_EDGE, Ablation.STATIC_GAT)

    @property
    def has_regression_head(self):
        return self != Ablation.A3_SINGLE_TASK


def ablation_from_string(value):
    """Accept 'full', 'A1'..'A3', 'static_gat' or the enum member name"""
    if isinstance(value, Ablation):
        return value
    for ablation in Ablation:
        if str(value).lower() in (ablation.value.lower(), ablation.name.lower()):
            return ablation
    raise ConfigError(f"Unknown ablation variant {value!r}; expected one of {[a.value for a in Ablation]}")


@dataclass
class ModelConfig:
    window: int = 14
    patch_len: int = 7
    d_node: int = 5
    d_model: int = 64
    encoder_layers: int = 2
    encoder_heads: int = 2
    ffn_mult: int = 2
    gat_layers: int = 2
    gat_heads: int = 4
    d_edge: int = 7
    head_hidden: int = 32
    lam: float = 0.7
    pos_weight: float = 5.0
    huber_delta: float = 1.0
    dropout_rate: float = 0.1
    leaky_slope: float = 0.2
    gat_activation: str = 'elu'
    ablation: Ablation = Ablation.FULL

    def __post_init__(self):
        self.ablation = ablation_from_string(self.ablation)
        for name in ('window', 'patch_len', 'd_node', 'd_model', 'encoder_layers', 'encoder_heads', 'ffn_mult',
                     'gat_layers', 'gat_heads', 'd_edge', 'head_hidden'):
            if getattr(self, name) < 1:
                raise ConfigError(f"model.{name} must be at least 1, got {getattr(self, name)}")
        if self.window % self.patch_len != 0:
            raise ConfigError(f"model.window ({self.window}) must be divisible by patch_len ({self.patch_len})")
        if self.d_model % self.gat_heads != 0:
            raise ConfigError(f"model.d_model ({self.d_model}) must be divisible by gat_heads ({self.gat_heads})")
        if self.d_model % self.encoder_heads != 0:
            raise ConfigError(f"model.d_model ({self.d_model}) must be divisible by encoder_heads "
                              f"({self.encoder_heads})")
        if not 0 <= self.lam <= 1:
            raise ConfigError(f"model.lam must be in [0, 1], got {self.lam}")
        if self.pos_weight <= 0:
            raise ConfigError(f"model.pos_weight must be positive, got {self.pos_weight}")
        if self.huber_delta <= 0:
            raise ConfigError(f"model.huber_delta must be positive, got {self.huber_delta}")
        if not 0 <= self.dropout_rate < 1:
            raise ConfigError(f"model.dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.gat_activation not in ('elu', 'relu', 'identity'):
            raise ConfigError(f"model.gat_activation must be elu, relu or identity, got {self.gat_activation!r}")

    @property
    def num_patches(self):
        return self.window // self.patch_len

    @property
    def ffn_width(self):
        return self.ffn_mult * self.d_model

    def with_ablation(self, ablation):
        return replace(self, ablation=ablation_from_string(ablation))

    def to_json(self):
        json_object = asdict(self)
        json_object['ablation'] = self.ablation.value
        return json_object

    @classmethod
    def from_json(cls, json_object):
        try:
            return cls(**json_object)
        except TypeError as e:
            raise ConfigError(f"invalid model config: {e}")
