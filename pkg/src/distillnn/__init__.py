"""distillnn: distill sampling-based uncertainty estimators (MC dropout,
deep ensembles) into single deterministic networks that output distribution
parameters, with the full calibration/uncertainty evaluation suite."""

__version__ = "0.1.0"

from .datasets import (
    AugmentationSpec,
    ClassificationDataset,
    RegressionDataset,
    SplitSpec,
    augment,
    gen_classification,
    gen_regression,
)
from .errors import (
    ContractError,
    DimensionError,
    NumericError,
    ScheduleExhaustedError,
    TrainingDivergedError,
)
from .evaluation import evaluate_student, evaluate_teacher, speedup_ratio
from .metrics import (
    EvalReport,
    ause,
    bald,
    ece_classification,
    ece_regression,
    epistemic_variance,
    js_distance,
    predictive_metrics,
    total_variance,
)
from .nn import MlpModel, build_mlp
from .optim import SgdOptimizer, poly_lr
from .rng import RngState
from .sampler import SampleBatch, SamplerConfig, draw_targets, estimate_sigma_tilde
from .student import (
    DistParams,
    StudentConfig,
    StudentModel,
    load_student,
    save_student,
    student_classification_uncertainty,
    student_predict,
    train_student,
)
from .teacher import (
    PredictiveSampleSet,
    TeacherConfig,
    TeacherModel,
    classification_mean,
    load_teacher,
    mc_predict,
    save_teacher,
    train_teacher,
)
from .tensor import Tensor
