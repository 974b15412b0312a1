from dataclasses import dataclass, asdict

from eagle.errors import ConfigError


@dataclass
class TrainConfig:
    lr: float = 3e-4
    lr_min: float = 1e-5
    weight_decay: float = 1e-4
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    epochs: int = 40
    early_stop_patience: int = 10
    clip_norm: float = 1.0
    seeds: tuple = (0, 1, 2, 3)
    checkpoint_metric: str = 'val_auc'

    def __post_init__(self):
        self.betas = tuple(float(b) for b in self.betas)
        self.seeds = tuple(int(s) for s in self.seeds)
        if self.lr <= 0:
            raise ConfigError(f"train.lr must be positive, got {self.lr}")
        if not 0 <= self.lr_min <= self.lr:
            raise ConfigError(f"train.lr_min must be in [0, lr], got {self.lr_min}")
        if self.weight_decay < 0:
            raise ConfigError(f"train.weight_decay must be non-negative, got {self.weight_decay}")
        if len(self.betas) != 2 or not all(0 <= b < 1 for b in self.betas):
            raise ConfigError(f"train.betas must be two values in [0, 1), got {self.betas}")
        if self.epochs < 1:
            raise ConfigError(f"train.epochs must be at least 1, got {self.epochs}")
        if self.early_stop_patience < 1:
            raise ConfigError(f"train.early_stop_patience must be at least 1, got {self.early_stop_patience}")
        if self.clip_norm <= 0:
            raise ConfigError(f"train.clip_norm must be positive, got {self.clip_norm}")
        if not self.seeds:
            raise ConfigError("train.seeds must name at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"train.seeds contains duplicates: {self.seeds}")
        if self.checkpoint_metric != 'val_auc':
            raise ConfigError(f"train.checkpoint_metric must be val_auc, got {self.checkpoint_metric!r}")

    def to_json(self):
        json_object = asdict(self)
        json_object['betas'] = list(self.betas)
        json_object['seeds'] = list(self.seeds)
        return json_object

    @classmethod
    def from_json(cls, json_object):
        try:
            return cls(**json_object)
        except TypeError as e:
            raise ConfigError(f"invalid train config: {e}")
