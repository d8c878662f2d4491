"""双输入参考图超分模型"""

from .schemas import Correspondence, MatchVariant, ModelConfig, ModelParams
from .refsr_net import (
    ForwardTrace,
    compute_key_features,
    forward_graph,
    init_params,
    match_textures,
    super_resolve,
)

__all__ = [
    "Correspondence",
    "MatchVariant",
    "ModelConfig",
    "ModelParams",
    "ForwardTrace",
    "compute_key_features",
    "forward_graph",
    "init_params",
    "match_textures",
    "super_resolve",
]
