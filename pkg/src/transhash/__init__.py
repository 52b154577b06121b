"""Two-tower cross-modal hashing with auxiliary-pair supervision and MMD alignment."""

from .core_types import (Ablation, CodeTable, Domain, FeatureDataset, Modality, RelationSet,
                         TrainConfig, TrainingSets, build_training_sets)
from .datagen import SynthData, SynthSpec, generate, reference_spec
from .estimator import TransitiveHashing
from .evaluation import EvalReport, average_precision, mean_average_precision
from .network import Tower, backward, forward, init_tower
from .objective import BatchActivations, residuals, total_objective
from .retrieval import (HammingIndex, binarize, encode, hamming_distance, pack_bits,
                        rank_database, unpack_bits)
from .training import TrainLog, TrainingDiverged, train

__version__ = "0.1.0"

__all__ = [
    "Ablation", "BatchActivations", "CodeTable", "Domain", "EvalReport", "FeatureDataset",
    "HammingIndex", "Modality", "RelationSet", "SynthData", "SynthSpec", "Tower",
    "TrainConfig", "TrainLog", "TrainingDiverged", "TrainingSets", "TransitiveHashing",
    "average_precision", "backward", "binarize", "build_training_sets", "encode", "forward",
    "generate", "hamming_distance", "init_tower", "mean_average_precision", "pack_bits",
    "rank_database", "reference_spec", "residuals", "total_objective", "train", "unpack_bits",
]
