"""
Numpy CNN for stability classification: layers, model, optimizers, training
and checkpoints.
"""

from stvs_lab.learning.layers import (
    conv2d_forward,
    conv2d_backward,
    Layer,
    Conv2D,
    BatchNorm2D,
    batchnorm_forward,
    ReLU,
    MaxPoolTime,
    Flatten,
    Dense,
    softmax,
    cross_entropy,
    softmax_cross_entropy,
)
from stvs_lab.learning.model import Architecture, CnnClassifier, forward
from stvs_lab.learning.optim import SGD, Adam, make_optimizer
from stvs_lab.learning.training import TrainConfig, TrainingLog, train, fine_tune, accuracy, batch_indices
from stvs_lab.learning.gradcheck import GradCheckReport, gradient_check, relative_error
from stvs_lab.learning.checkpoint import save_checkpoint, load_checkpoint

__all__ = [
    'conv2d_forward',
    'conv2d_backward',
    'Layer',
    'Conv2D',
    'BatchNorm2D',
    'batchnorm_forward',
    'ReLU',
    'MaxPoolTime',
    'Flatten',
    'Dense',
    'softmax',
    'cross_entropy',
    'softmax_cross_entropy',
    'Architecture',
    'CnnClassifier',
    'forward',
    'SGD',
    'Adam',
    'make_optimizer',
    'TrainConfig',
    'TrainingLog',
    'train',
    'fine_tune',
    'accuracy',
    'batch_indices',
    'GradCheckReport',
    'gradient_check',
    'relative_error',
    'save_checkpoint',
    'load_checkpoint',
]
