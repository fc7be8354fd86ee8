from .base import (KernelCache, MirroredMap, is_reachable, load_model,
                   mirror_se2, rbf_kernel_matrix, save_model)
from .mlp import MlpClassifier
from .svm import OneClassRbfSvm, RbfSvmClassifier

__all__ = [
    "KernelCache", "MirroredMap", "MlpClassifier", "OneClassRbfSvm",
    "RbfSvmClassifier", "is_reachable", "load_model", "mirror_se2",
    "rbf_kernel_matrix", "save_model",
]
