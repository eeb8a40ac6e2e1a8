"""Long-tail classification over fixed embeddings with attention-based weight transfer to rare classes."""
from .core import (
    ClassGroup,
    ClassifierHead,
    EmbeddingDataset,
    GroupReport,
    GroupThresholds,
    HeadKind,
    PrototypeSet,
    Source,
    class_group,
    cosine_score,
    l2_normalize,
    predict,
)
from .data import SynthConfig, generate_synthetic, load_embd, load_head, save_embd, save_head
from .evaluation import evaluate, mismatch_count, sharpness_curve
from .head import TrainConfig, ce_loss_and_grads, train_head
from .prototypes import compute_prototypes, prototype_predict
from .sampling import BatchSampler, SamplerKind, SamplerSpec, class_probabilities
from .transfer import (
    Direction,
    Ensemble,
    HybridClassifier,
    Mode,
    TransferConfig,
    attention_weights,
    build_continual,
    build_hybrid,
    eligible_set,
    ensemble_predict,
    kt_vector,
)

__version__ = "0.1.0"
