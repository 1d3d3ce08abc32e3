"""Dual-space sample distillation for learning with noisy labels."""

from .classifier import ToyClassifier, load_classifier_checkpoint, save_classifier_checkpoint
from .data import (
    Dataset,
    NoiseKind,
    NoiseSpec,
    NoisyCluster,
    Sample,
    SyntheticSpec,
    generate_synthetic,
    inject_noise,
    load_sample_table,
    partition_by_label,
    split_dataset,
    write_sample_table,
)
from .division import (
    Partition,
    StrategyKind,
    ThresholdStrategy,
    compute_posteriors,
    divide_cluster,
    divide_dataset,
    read_partition_file,
    resolve_threshold,
    write_partition_file,
)
from .errors import DegenerateFit, MetaStarved, NoCenter, NumericalError, ParseError
from .gmm import Gmm1d, GmmConfig, Orientation, fit_gmm1d, posterior, posteriors
from .metanet import (
    MetaDataset,
    MetaNet,
    MetaTrainConfig,
    bce_loss,
    build_meta_dataset,
    fuse_scores,
    load_meta_checkpoint,
    meta_forward,
    meta_loss_and_grads,
    purify,
    save_meta_checkpoint,
    train_meta,
    weighted_average_baseline,
)
from .metrics import SelectionReport, accuracy, selection_metrics
from .pipeline import DistillParams, DistillResult, run_distillation
from .scores import (
    ClassCenter,
    ScoreTable,
    class_center,
    cosine_similarity_score,
    cross_entropy_score,
    score_dataset,
)
from .seeding import derive_seed, rng_from
from .semisup import (
    RoundResult,
    TrainConfig,
    co_guess,
    distill_round,
    ensemble_outputs,
    labeled_loss,
    make_ensemble,
    refine_label,
    reg_loss,
    total_loss,
    unlabeled_loss,
    warmup,
)

__version__ = "0.1.0"
