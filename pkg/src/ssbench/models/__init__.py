# Classifiers, autoencoder and their training loops
from .autoencoder import AutoencoderSpec, PointAutoencoder, autoencode, chamfer, chamfer_distance
from .classifiers import (
    ClassifierSpec, EdgeConvNet, Logits, PointwiseMaxPoolNet, build_classifier,
    batch_logits, evaluate_accuracy, forward, input_gradient, predict,
)
from .training import TrainResult, reconstruction_error, train, train_autoencoder

__all__ = [
    'AutoencoderSpec', 'PointAutoencoder', 'autoencode', 'chamfer', 'chamfer_distance',
    'ClassifierSpec', 'EdgeConvNet', 'Logits', 'PointwiseMaxPoolNet', 'build_classifier',
    'batch_logits', 'evaluate_accuracy', 'forward', 'input_gradient', 'predict',
    'TrainResult', 'reconstruction_error', 'train', 'train_autoencoder',
]
