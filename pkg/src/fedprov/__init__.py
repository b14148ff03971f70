"""Seeded simulator for cross-province federated diabetes prediction.

Pipeline: synthetic cohort generation -> chained-equation imputation ->
logistic-regression / MLP training -> FedAvg orchestration over seven
provincial clients -> metric tables and calibration curves.
"""

from .errors import FedprovError, UndefinedMetricError, ValidationError
from .evaluation import (
    CalibrationCurve,
    ConfusionCounts,
    MetricsRow,
    auc_pairwise_oracle,
    calibration_curve,
    confusion_at_threshold,
    downsample_majority,
    precision_recall_f1,
    roc_auc,
)
from .fedavg import ClientState, FedConfig, RoundHistory, aggregate, client_update, make_client, run_fedavg, select_participants
from .harness import (
    ExperimentConfig,
    ReportTable,
    default_experiment_config,
    emit_calibration,
    emit_report,
    run_matrix,
)
from .impute import MiceConfig, initial_fill, mice_impute
from .models import (
    AdamState,
    LogisticModel,
    MlpModel,
    ParamVector,
    TrainConfig,
    adam_step,
    flatten,
    load_checkpoint,
    lr_loss_and_grad,
    lr_predict,
    mlp_forward,
    mlp_loss_and_grad,
    prox_l1,
    save_checkpoint,
    train_logistic,
    train_mlp,
    unflatten,
)
from .schema import (
    CSV_HEADER,
    FEATURE_COLUMNS,
    FL_PROVINCES,
    Dataset,
    LabeledMatrix,
    PatientRecord,
    Standardizer,
    encode_features,
    partition_by_province,
    read_csv,
    split_train_test,
    standardize_apply,
    standardize_fit,
    write_csv,
)
from .synth import (
    FeatureSpec,
    GeneratorConfig,
    MissingnessSpec,
    ProvinceProfile,
    RiskModel,
    default_generator_config,
    generate_cohort,
    generate_dataset,
    inject_missingness,
    oracle_auc,
)

__version__ = "0.1.0"
