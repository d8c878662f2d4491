"""训练：损失、Adam、训练循环与检查点"""

from .losses import PerceptualProxy, l_per_proxy, l_rec
from .optimizer import AdamConfig, OptimizerState, adam_step
from .trainer import BatchLoss, LossProfile, TrainConfig, TrainingRun, train, train_loss_gradients
from .checkpoint import checkpoint_size, load_checkpoint, save_checkpoint

__all__ = [
    "PerceptualProxy",
    "l_per_proxy",
    "l_rec",
    "AdamConfig",
    "OptimizerState",
    "adam_step",
    "BatchLoss",
    "LossProfile",
    "TrainConfig",
    "TrainingRun",
    "train",
    "train_loss_gradients",
    "checkpoint_size",
    "load_checkpoint",
    "save_checkpoint",
]
