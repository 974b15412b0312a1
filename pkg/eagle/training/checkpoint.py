import numpy as np

from eagle.archive import write_archive, read_archive, file_digest
from eagle.autodiff import precision
from eagle.errors import FormatError
from eagle.model import ModelConfig, ModelParams
from eagle.training.config import TrainConfig

CHECKPOINT_VERSION = 1
_PARAM_PREFIX = 'param.'


class Checkpoint:
    """Best-epoch parameters of one training run and everything needed to reuse them"""

    def __init__(self, params, model_config, train_config, seed, best_epoch, best_val_auc, num_nodes,
                 feature_mean, feature_std, precision_bits=32):
        self.params = params
        self.model_config = model_config
        self.train_config = train_config
        self.seed = seed
        self.best_epoch = best_epoch
        self.best_val_auc = best_val_auc
        self.num_nodes = num_nodes
        self.feature_mean = np.asarray(feature_mean, dtype=np.float64)
        self.feature_std = np.asarray(feature_std, dtype=np.float64)
        self.precision_bits = precision_bits

    def header_json(self):
        return {
            'version': CHECKPOINT_VERSION,
            'model_config': self.model_config.to_json(),
            'train_config': self.train_config.to_json(),
            'seed': self.seed,
            'best_epoch': self.best_epoch,
            'best_val_auc': self.best_val_auc,
            'num_nodes': self.num_nodes,
            'precision': self.precision_bits,
            'param_names': self.params.names(),
        }

    def save(self, path):
        arrays = {f'{_PARAM_PREFIX}{name}': values for name, values in self.params.state().items()}
        arrays['feature_mean'] = self.feature_mean
        arrays['feature_std'] = self.feature_std
        write_archive(path, self.header_json(), arrays)
        return file_digest(path)

    @classmethod
    def load(cls, path):
        header, arrays = read_archive(path)
        if header.get('version') != CHECKPOINT_VERSION:
            raise FormatError(f"Checkpoint version {header.get('version')} is not supported "
                              f"(expected {CHECKPOINT_VERSION})")
        try:
            names = header['param_names']
            state = {name: arrays[f'{_PARAM_PREFIX}{name}'] for name in names}
            with precision(header['precision']):
                params = ModelParams.from_state(state)
            return cls(params, ModelConfig.from_json(header['model_config']),
                       TrainConfig.from_json(header['train_config']), header['seed'], header['best_epoch'],
                       header['best_val_auc'], header['num_nodes'], arrays['feature_mean'],
                       arrays['feature_std'], header['precision'])
        except KeyError as e:
            raise FormatError(f"Checkpoint {path} lacks {e}")
