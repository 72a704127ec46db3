"""Entropic losses (IsoMax, IsoMax+, DisMax) for out-of-distribution detection."""

from .calibration import CalibrationResult, apply_temperature, calibrate_temperature
from .data import LabeledDataset, build_mosaic, gen_blobs, gen_ood_ring, load_csv, load_idx, split, write_csv
from .encoder import EncoderSpec, OptimizerState, encoder_forward, lr_at_epoch, sgd_step
from .errors import (
    ConfigError,
    ContractError,
    DataFormatError,
    EntropicOODError,
    NumericalError,
    ShapeError,
    UnsupportedError,
)
from .heads import (
    HeadParams,
    LossConfig,
    dismax_loss,
    fpr_penalty,
    fpr_target,
    head_logits,
    inference_probabilities,
    init_head,
    training_loss,
)
from .metrics import EvalReport, accuracy, aupr, auroc, dtacc, ece, tnr_at_tpr95
from .model import Model
from .numeric import normalize_rows, pairwise_euclidean, shannon_entropy, stable_softmax
from .scores import entropic_score, max_logit, mds, mmles, mps
from .training import TrainRecipe, train

__version__ = "0.1.0"
