"""Shipped problem instances."""

from .data import DatasetSplit, load_csv_dataset, make_blob_split, make_blobs
from .dro_mtl import calibrate_threshold, make_dro_mtl, robust_task2_problem
from .mlp import MlpLayout, mlp_loss_and_grads
from .testbed import KktPoint, QuadraticTestbed, make_testbed, solve_kkt

__all__ = [
    "DatasetSplit", "load_csv_dataset", "make_blob_split", "make_blobs",
    "calibrate_threshold", "make_dro_mtl", "robust_task2_problem",
    "MlpLayout", "mlp_loss_and_grads",
    "KktPoint", "QuadraticTestbed", "make_testbed", "solve_kkt",
]
