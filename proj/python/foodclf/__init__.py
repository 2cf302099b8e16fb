"""Food image classification: augmentation, conv features, clustering and classifiers."""

import json as _json

from ._foodclf import (
    FoodclfError,
    Model,
    WeightBundle,
    augment_dataset,
    augment_variants,
    exit_code_for,
    extract_features,
    k_sweep,
    kmeans,
    load_features,
    read_image,
    resize_bilinear,
    save_features,
    silhouette_samples,
    silhouette_score,
    split_indices,
    train_gbdt,
    train_mlp,
    train_svm,
    write_png,
)
from ._foodclf import run_experiment as _run_experiment


def run_experiment(config, include_timing=True):
    """Run the experiment described by a config file. Returns (report dict, table text)."""
    text, table = _run_experiment(str(config), include_timing)
    return _json.loads(text), table


__all__ = [
    "FoodclfError",
    "Model",
    "WeightBundle",
    "augment_dataset",
    "augment_variants",
    "exit_code_for",
    "extract_features",
    "k_sweep",
    "kmeans",
    "load_features",
    "read_image",
    "resize_bilinear",
    "run_experiment",
    "save_features",
    "silhouette_samples",
    "silhouette_score",
    "split_indices",
    "train_gbdt",
    "train_mlp",
    "train_svm",
    "write_png",
]
