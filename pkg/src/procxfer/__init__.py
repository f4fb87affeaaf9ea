"""procxfer: train outcome-prediction models on business-process event logs
and apply them, unchanged, to other processes.

The pieces compose like any estimator stack: parse and label an event log,
encode prefixes with word-vector activity features and scaled time
features, fit the recurrent classifier, package it as a bundle, and score
other logs or live instances with it.
"""

from .errors import (
    ConfigurationError,
    EmptyLogError,
    FormatError,
    IntegrityError,
    NumericalError,
    ProcxferError,
    RowError,
    SchemaError,
    VersionError,
)
from .eventlog import (
    CsvSchema,
    Event,
    EventLog,
    SplitSpec,
    Trace,
    filter_by_length,
    label_in_time,
    parse_event_log,
    temporal_split,
)
from .embeddings import ActivityEmbedder, EmbeddingStore, OneHotActivityEncoder, load_embedding_store
from .timefeat import (
    AutoencoderDurationEncoder,
    CyclicTimeEncoder,
    ScaledDurationEncoder,
    TimeFeatureScaler,
    duration_since_start,
)
from .tensorize import (
    Prefix,
    PrefixDataset,
    encode_aggregate,
    encode_index,
    encode_last_k,
    encode_prefixes,
    flatten,
    generate_prefixes,
    load_dataset,
    save_dataset,
)
from .metrics import (
    EvalReport,
    binary_cross_entropy,
    evaluate,
    format_report_table,
    mcc,
    roc_auc,
    summarize_reports,
    weighted_precision_recall_f1,
)
from .nn import (
    LstmModel,
    LstmOutcomeClassifier,
    TimeAutoencoder,
    TrainConfig,
    TrainingHistory,
    init_model,
    train,
    train_time_autoencoder,
)
from .baselines import DecisionTreeBaseline, LogisticRegressionBaseline, RandomForestBaseline
from .pipeline import PreprocessConfig, SourceTrainResult, train_source
from .transfer import (
    TransferBundle,
    build_bundle,
    compare_from_scratch,
    embedding_distance_matrix,
    evaluate_on_target,
    load_bundle,
    predict_online,
    save_bundle,
    scale_study,
)

__version__ = "0.1.0"
