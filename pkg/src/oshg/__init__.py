"""Hypergraph adapters that calibrate a joint image-text embedding space.

The package splits into small layers: ``matrix`` (deterministic RNG and
array helpers), ``hypergraph`` (KNN incidence structures and the
normalized propagation operator), ``adapter`` (convolution layers and
checkpoint files), ``dataio`` (caption JSONL and EMB matrix formats),
``infotheory`` (histogram entropies and the NMI fusion ratio),
``retrieval`` (recall@K evaluation), ``augment`` (synonym generation),
``kernels`` (pooling and pairwise-graph baselines), ``training`` (the
model, its hand-written gradients, and the finite-difference checker),
and ``bench`` (a planted synthetic end-to-end benchmark).  The ``oshg``
command in ``cli`` fronts all of it.
"""

from .adapter import (
    TextAdapter,
    VisionAdapter,
    fuse_text,
    fuse_vision,
    load_checkpoint,
    project_psi,
    save_checkpoint,
)
from .augment import (
    AugmentConfig,
    augment_records,
    build_prompt,
    generate_synonyms,
    load_offline_synonyms,
)
from .bench import BenchConfig, BenchReport, make_synthetic_corpus, run_bench
from .dataio import (
    CaptionRecord,
    embed_texts,
    hash_embed,
    load_captions_jsonl,
    parse_emb_file,
    write_captions_jsonl,
    write_emb_file,
)
from .errors import (
    AugmentError,
    ConfigError,
    DataError,
    OshgError,
    ShapeError,
    TrainingDiverged,
)
from .hgconv import ConvLayer, Propagator, conv_forward, propagation_matrix
from .hypergraph import (
    Hypergraph,
    auto_k,
    concat_incidence,
    knn_hyperedges,
    load_hypergraph_json,
    save_hypergraph_json,
)
from .infotheory import (
    EntropyReport,
    caption_bits,
    hist_entropy,
    modality_entropy_report,
    nmi_alpha,
)
from .kernels import baseline_adapt
from .matrix import Rng, l2_normalize_rows
from .retrieval import (
    EvalReport,
    ImageCodebook,
    evaluate,
    hard_assign,
    score_matrix,
    sentence_similarity,
    word_similarity,
)
from .training import (
    Corpus,
    GradCheckReport,
    Model,
    TrainConfig,
    TrainResult,
    build_corpus,
    finite_diff_check,
    grad_deviation,
    load_model,
    train,
    triplet_loss,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentConfig",
    "AugmentError",
    "BenchConfig",
    "BenchReport",
    "CaptionRecord",
    "ConfigError",
    "ConvLayer",
    "Corpus",
    "DataError",
    "EntropyReport",
    "EvalReport",
    "GradCheckReport",
    "Hypergraph",
    "ImageCodebook",
    "Model",
    "OshgError",
    "Propagator",
    "Rng",
    "ShapeError",
    "TextAdapter",
    "TrainConfig",
    "TrainResult",
    "TrainingDiverged",
    "VisionAdapter",
    "augment_records",
    "auto_k",
    "baseline_adapt",
    "build_corpus",
    "build_prompt",
    "caption_bits",
    "concat_incidence",
    "conv_forward",
    "embed_texts",
    "evaluate",
    "finite_diff_check",
    "fuse_text",
    "fuse_vision",
    "generate_synonyms",
    "grad_deviation",
    "hard_assign",
    "hash_embed",
    "hist_entropy",
    "knn_hyperedges",
    "l2_normalize_rows",
    "load_captions_jsonl",
    "load_checkpoint",
    "load_hypergraph_json",
    "load_model",
    "load_offline_synonyms",
    "make_synthetic_corpus",
    "modality_entropy_report",
    "nmi_alpha",
    "parse_emb_file",
    "project_psi",
    "propagation_matrix",
    "run_bench",
    "save_checkpoint",
    "save_hypergraph_json",
    "score_matrix",
    "sentence_similarity",
    "train",
    "triplet_loss",
    "word_similarity",
    "write_captions_jsonl",
    "write_emb_file",
    "__version__",
]
