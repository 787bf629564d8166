"""Facial gesture recognition by template correlation, PCA face space and
minimum-distance (Mahalanobis and friends) classification."""

from .classifier import (
    ClassificationResult,
    GestureModel,
    TrainConfig,
    classify,
    evaluate,
    intensity,
    load_model,
    save_model,
    train,
)
from .correlation import CorrelationMap, Peak, cross_correlate_direct, cross_correlate_fft, find_peaks, locate, ncc
from .imgio import GrayImage, LabeledDataset, load_dataset, read_pgm, synth_dataset, write_pgm
from .subspace import Subspace, fit_pca_direct, fit_pca_snapshot, project, reconstruct

__version__ = "0.1.0"
