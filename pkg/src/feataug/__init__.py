"""Dataset augmentation in the learned feature space of a sequence autoencoder."""

from .augment import (AugmentConfig, CoarseIndex, SyntheticContext, add_noise, augment_dataset,
                      extrapolate, interpolate, knn_in_class)
from .autoencoder import (AutoencoderModel, LSTMLayerParams, backward, decode, encode,
                          lstm_cell_forward, reconstruction_loss)
from .classifier import MLPModel, evaluate, mlp_forward, repeated_eval, train_classifier
from .optim import AdamState, PlateauSchedule, TrainConfig, adam_step, plateau_update, train_autoencoder
from .tensor import RandomStream, euclidean_distance, gaussian_sample, per_element_std

__version__ = "0.1.0"
