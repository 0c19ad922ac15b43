from .model import LABELS, LABEL_INDEX, ModelConfig, SequenceModel, build_vocab
from .gradcheck import (
    GradCheckReport,
    analytic_gradients,
    compare_gradients,
    gradient_check,
    numeric_gradients,
)
from .tagging import (
    CueTagger,
    ModelTagger,
    PicosAssessment,
    SentenceTag,
    assess_compliance,
    split_sentences,
)
from .training import (
    TrainParams,
    TrainingResult,
    evaluate_accuracy,
    load_dataset,
    dump_dataset,
    split_dataset,
    train,
)
from . import synthetic
from .synthetic import generate_abstract, generate_sentences

__all__ = [
    "LABELS",
    "LABEL_INDEX",
    "ModelConfig",
    "SequenceModel",
    "build_vocab",
    "GradCheckReport",
    "analytic_gradients",
    "compare_gradients",
    "gradient_check",
    "numeric_gradients",
    "CueTagger",
    "ModelTagger",
    "PicosAssessment",
    "SentenceTag",
    "assess_compliance",
    "split_sentences",
    "TrainParams",
    "TrainingResult",
    "evaluate_accuracy",
    "load_dataset",
    "dump_dataset",
    "split_dataset",
    "train",
    "synthetic",
    "generate_abstract",
    "generate_sentences",
]
