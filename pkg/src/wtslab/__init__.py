"""Desk-scale lab for long-tailed noisy-label learning with weak-teacher supervision."""

from .corruption import (
    LabelAssignment,
    TransitionMatrix,
    apply_noise,
    build_asymmetric_matrix,
    build_joint_matrix,
    build_symmetric_matrix,
    longtail_counts,
    subsample_longtail,
)
from .datasets import (
    DatasetFormatError,
    EmbeddingDataset,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    normalize_rows,
    save_dataset,
    split_per_class,
)
from .estimator import WTSClassifier
from .evaluation import RunMetrics, evaluate, group_split
from .losses import (
    ClassPrior,
    StudentProbe,
    adjust_logits_la,
    ce_loss_and_grad,
    combined_loss,
    kl_teacher_loss_and_grad,
    la_gradient_difference,
    mixed_target,
)
from .teacher import (
    TeacherHead,
    TeacherOutput,
    overlap_ratio,
    similarities,
    teacher_probs,
    text_predicted_labels,
)
from .training import TrainConfig, TrainResult, sample_beta, sgd_step, train

__version__ = "0.1.0"

__all__ = [
    "ClassPrior",
    "DatasetFormatError",
    "EmbeddingDataset",
    "LabelAssignment",
    "RunMetrics",
    "StudentProbe",
    "SyntheticSpec",
    "TeacherHead",
    "TeacherOutput",
    "TrainConfig",
    "TrainResult",
    "TransitionMatrix",
    "WTSClassifier",
    "adjust_logits_la",
    "apply_noise",
    "build_asymmetric_matrix",
    "build_joint_matrix",
    "build_symmetric_matrix",
    "ce_loss_and_grad",
    "combined_loss",
    "evaluate",
    "generate_synthetic",
    "group_split",
    "kl_teacher_loss_and_grad",
    "la_gradient_difference",
    "load_dataset",
    "longtail_counts",
    "mixed_target",
    "normalize_rows",
    "overlap_ratio",
    "sample_beta",
    "save_dataset",
    "sgd_step",
    "similarities",
    "split_per_class",
    "subsample_longtail",
    "teacher_probs",
    "text_predicted_labels",
    "train",
]
