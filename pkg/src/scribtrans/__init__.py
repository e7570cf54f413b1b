"""scribtrans: pre-train with scribbles, full masks or class labels on a
source domain, transfer the backbone, and evaluate low-data classification
on a target domain."""

from .augment import augment_pair, random_crop, random_hflip, random_rescale
from .checkpoint import (
    Checkpoint,
    CheckpointMeta,
    checkpoint_from_model,
    load_checkpoint,
    load_checkpoint_into_model,
    save_checkpoint,
    transfer_backbone_weights,
)
from .config import FinetuneConfig, PretrainConfig, parse_config
from .losses import LossValue, bce_multilabel, masked_seg_loss, masked_seg_loss_batch, softmax_ce_pixel
from .manifest import DatasetManifest, ManifestRecord, load_manifest, save_manifest
from .masks import (
    IGNORE,
    LabelMask,
    derive_multilabel_target,
    load_indexed_mask,
    save_indexed_mask,
)
from .metrics import accuracy, pixel_accuracy
from .models import (
    ModelConfig,
    build_backbone,
    build_classification_model,
    build_model,
    build_segmentation_model,
)
from .optim import AdamState, SGDMomentumState, adam_update, sgd_update
from .report import AggregateRow, aggregate_mean_std, emit_results_table
from .results import RunResult, load_run_result, save_run_result
from .sampling import SplitSpec, kfold_splits, subsample_per_class
from .schedules import exp_lr, poly_lr
from .scribbles import ScribbleParams, synthesize_scribbles
from .seeds import derive_seed, derived_rng
from .synthetic import SyntheticSpec, generate_synthetic_dataset
from .train import run_finetuning, run_pretraining, run_seed_battery

__version__ = "0.1.0"
