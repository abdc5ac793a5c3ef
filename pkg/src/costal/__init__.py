"""Cost-effective active learning: dual-criteria selection plus intra-class aggregation."""
from ._accel import USE_NUMBA
from .augmentation import AugmentedSample, build_aggregated_set, geometric_augment, mixup, replicate_4, stitch_2x2
from .classifier import ClassifierConfig, SoftmaxClassifier
from .experiment import ExperimentConfig, LearningCurve, compare_strategies, gamma_sweep, run_experiment
from .features import PCABasis, fit_pca, gray_world_normalize, project, resize_bilinear, to_feature_vector
from .hashing import LSHIndex, bucket_of, build_index, uniform_fetch
from .metrics import EvalResult, auc_roc, average_precision, evaluate, mcnemar_p
from .pool import Oracle, Sample, SamplePool
from .selection import SelectionConfig, SelectionRound, budget, select_round
from .synthetic import SyntheticSpec, generate_synthetic

__version__ = "0.1.0"
