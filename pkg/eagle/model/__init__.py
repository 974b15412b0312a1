from eagle.model.config import Ablation, ModelConfig, ablation_from_string
from eagle.model.params import ModelParams, init_params, prior_bias
from eagle.model.encoder import encode_temporal, encode_static
from eagle.model.egat import egat_layer
from eagle.model.network import ForwardResult, GraphInputs, forward, loss
