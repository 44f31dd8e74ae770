"""IMU gait authentication benchmark with a gait-pattern dictionary attack.

The pipeline: raw multi-sensor recordings are smoothed, windowed, and
featurized; per-user authenticators are trained on mutual-information
selected features over every sensor combination and classifier kind;
zero-effort error rates are measured across users; and a dictionary of
imitator recordings at controlled walking-factor settings is swept
against every model to find each user's most damaging entry.
"""

from .authbench import (
    BaselineGrid,
    EvalReport,
    TrainedModel,
    all_combos,
    assemble_training_set,
    canonical_combo,
    evaluate_zero_effort,
    extract_session_features,
    grid_csv,
    load_cell,
    per_impostor_rates,
    save_cell,
    select_for_combo,
    sweep,
    train_user_model,
)
from .dictattack import (
    SPEED_GRID,
    STEP_LENGTH_LEVELS,
    STEP_WIDTH_LEVELS,
    THIGH_LIFT_LEVELS,
    AttackReport,
    CellAttack,
    Dictionary,
    DictionaryEntry,
    FactorSetting,
    UserAttack,
    attack_entry,
    attack_matrix,
    attack_user,
    build_dictionary,
    classify_menagerie,
)
from .eda import (
    CorrelationCell,
    LabeledMatrix,
    OverlapGrid,
    factor_feature_correlations,
    grids_by_factor,
    overlap_heatmap,
    rate_matrix,
    render,
)
from .errors import ConfigError, DataError
from .features import (
    CHANNEL_FEATURES,
    FREQ_FEATURES,
    TIME_FEATURES,
    FeatureMatrix,
    FeatureVector,
    extract_channel_features,
    feature_names,
    featurize,
)
from .learners import (
    CLASSIFIER_KINDS,
    GaitAuthenticator,
    build_classifier,
    load_model,
    save_model,
    smote_oversample,
)
from .seeds import derive_seed
from .selection import MutualInfoSelector, mi_scores, mutual_information, select_top_k
from .signal import (
    AXES,
    SENSORS,
    IMURecording,
    SignalChannel,
    magnitude,
    segment,
    smooth,
    smoothing_width,
    with_magnitudes,
)
from .synthgait import (
    SubjectProfile,
    SynthConfig,
    canonical_settings,
    clone_profile,
    generate_corpus,
    generate_recording,
    imitator_profiles,
    make_subject_profile,
    natural_setting,
    subject_profiles,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
